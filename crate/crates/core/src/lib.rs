//! Copulas generated by densities on the unit interval through wrapped sums.
//!
//! A generator density `f` on `[0, 1]` and a bit pattern `s` define a copula
//! whose density at `u` is `f` evaluated at the sum of the (possibly
//! reflected) coordinates taken modulo 1. The crate covers the generator
//! families, the copula object, concordance measures, rank-based inference
//! and a simulation harness.

pub mod cli;
pub mod concordance;
pub mod copula;
pub mod data;
pub mod error;
pub mod experiments;
pub mod generator;
pub mod inference;
pub mod optim;
pub mod qmc;
pub mod quadrature;
pub mod ranks;
pub mod rng;
pub mod signature;
pub mod special;

pub use copula::CopulaModel;
pub use data::SampleMatrix;
pub use error::{Error, Result};
pub use generator::{Density, GeneratorMoments, GeneratorSpec};
pub use signature::{frac, Signature};
