//! Univariate densities on `[0, 1]` that generate the copula family.
//!
//! [`GeneratorSpec`] is the plain, serializable description. Evaluation goes
//! through a [`Density`], which validates the parameters once and caches
//! normalizing constants; the convenience methods on `GeneratorSpec` build a
//! `Density` per call.

mod algebra;
mod density;
mod json;
mod moments;

pub use algebra::{
    evenly_spaced_points, partial_sum_generator, star_product, star_product_on_grid, STAR_GRID,
};
pub use density::Density;
pub use moments::GeneratorMoments;

use rand::Rng;

use crate::error::{domain, invalid, Result};

/// Histogram density with equal-width bins on `[0, 1]`, renormalized so the
/// mean bin height is exactly 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    values: Vec<f64>,
    cumulative: Vec<f64>,
}

impl Histogram {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return invalid("tabulated generator needs at least one bin");
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return invalid("tabulated values must be finite and non-negative");
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        if mean <= 0.0 {
            return invalid("tabulated values must not all be zero");
        }
        let values: Vec<f64> = values.into_iter().map(|v| v / mean).collect();
        let m = values.len() as f64;
        let mut cumulative = Vec::with_capacity(values.len() + 1);
        let mut acc = 0.0;
        cumulative.push(0.0);
        for v in &values {
            acc += v / m;
            cumulative.push(acc);
        }
        let total = acc;
        for c in cumulative.iter_mut() {
            *c /= total;
        }
        Ok(Self { values, cumulative })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bins(&self) -> usize {
        self.values.len()
    }

    /// `F` at the bin edges, `cumulative()[k] = F(k / m)`.
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    #[inline]
    fn bin_of(&self, x: f64) -> usize {
        let m = self.values.len();
        ((x * m as f64) as usize).min(m - 1)
    }

    pub(crate) fn pdf(&self, x: f64) -> f64 {
        self.values[self.bin_of(x)]
    }

    pub(crate) fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let m = self.values.len() as f64;
        let k = self.bin_of(x);
        let lo = k as f64 / m;
        (self.cumulative[k] + (x - lo) * self.values[k]).min(1.0)
    }

    pub(crate) fn quantile(&self, p: f64) -> f64 {
        let m = self.values.len();
        // first edge index with cumulative > p
        let k = self.cumulative.partition_point(|&c| c <= p).clamp(1, m) - 1;
        let height = self.values[k];
        let lo = k as f64 / m as f64;
        if height <= 0.0 {
            return lo;
        }
        (lo + (p - self.cumulative[k]) * m as f64 / height).clamp(0.0, 1.0)
    }

    /// `E[X^j]`, exact for histogram densities.
    pub(crate) fn raw_moment(&self, j: u32) -> f64 {
        let m = self.values.len() as f64;
        let p = (j + 1) as f64;
        self.values
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let a = k as f64 / m;
                let b = (k + 1) as f64 / m;
                v * (b.powf(p) - a.powf(p)) / p
            })
            .sum()
    }

    fn reversed(&self) -> Self {
        let mut v = self.values.clone();
        v.reverse();
        Self::new(v).expect("reversal of a valid histogram is valid")
    }

    fn edges(&self) -> Vec<f64> {
        let m = self.values.len();
        (1..m).map(|k| k as f64 / m as f64).collect()
    }
}

/// A generator density on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorSpec {
    Uniform,
    /// Lower limit 0, upper limit `upper`, mode `mode`, with `0 < mode <= upper <= 1`.
    Triangular {
        upper: f64,
        mode: f64,
    },
    Beta {
        alpha: f64,
        beta: f64,
    },
    /// Normal(`mu`, `sigma`) truncated to `[0, 1]`.
    TruncNormal {
        mu: f64,
        sigma: f64,
    },
    Kumaraswamy {
        a: f64,
        b: f64,
    },
    LogitNormal {
        mu: f64,
        sigma: f64,
    },
    /// Density proportional to `exp(phi1 cos 2πx + phi2 sin 2πx)`.
    VonMises {
        phi1: f64,
        phi2: f64,
    },
    /// `weight * first + (1 - weight) * second`.
    Mixture {
        weight: f64,
        first: Box<GeneratorSpec>,
        second: Box<GeneratorSpec>,
    },
    /// Height `(2j - 1) / n` on the `j`-th of `n` equal bins.
    PiecewiseConstant {
        levels: usize,
    },
    Tabulated(Histogram),
    /// `x -> base(frac(x + shift))`: the base density turned around the circle.
    Rotated {
        shift: f64,
        base: Box<GeneratorSpec>,
    },
    /// `x -> base(1 - x)`.
    Reflected {
        base: Box<GeneratorSpec>,
    },
}

impl GeneratorSpec {
    pub fn triangular(upper: f64, mode: f64) -> Result<Self> {
        Self::checked(Self::Triangular { upper, mode })
    }

    pub fn beta(alpha: f64, beta: f64) -> Result<Self> {
        Self::checked(Self::Beta { alpha, beta })
    }

    pub fn trunc_normal(mu: f64, sigma: f64) -> Result<Self> {
        Self::checked(Self::TruncNormal { mu, sigma })
    }

    pub fn kumaraswamy(a: f64, b: f64) -> Result<Self> {
        Self::checked(Self::Kumaraswamy { a, b })
    }

    pub fn logit_normal(mu: f64, sigma: f64) -> Result<Self> {
        Self::checked(Self::LogitNormal { mu, sigma })
    }

    pub fn von_mises(phi1: f64, phi2: f64) -> Result<Self> {
        Self::checked(Self::VonMises { phi1, phi2 })
    }

    pub fn mixture(weight: f64, first: GeneratorSpec, second: GeneratorSpec) -> Result<Self> {
        Self::checked(Self::Mixture {
            weight,
            first: Box::new(first),
            second: Box::new(second),
        })
    }

    pub fn piecewise_constant(levels: usize) -> Result<Self> {
        Self::checked(Self::PiecewiseConstant { levels })
    }

    pub fn tabulated(values: Vec<f64>) -> Result<Self> {
        Ok(Self::Tabulated(Histogram::new(values)?))
    }

    pub fn rotated(base: GeneratorSpec, shift: f64) -> Result<Self> {
        if !shift.is_finite() {
            return invalid("rotation shift must be finite");
        }
        Self::checked(Self::Rotated {
            shift: crate::signature::frac(shift),
            base: Box::new(base),
        })
    }

    /// Uniform on `[lo, hi]` as a histogram on `bins` cells; `lo` and `hi`
    /// should sit on cell edges for an exact representation.
    pub fn uniform_on(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if !(0.0 <= lo && lo < hi && hi <= 1.0) || bins == 0 {
            return invalid(format!(
                "uniform_on needs 0 <= lo < hi <= 1, got [{lo}, {hi}]"
            ));
        }
        let values = (0..bins)
            .map(|k| {
                let a = k as f64 / bins as f64;
                let b = (k + 1) as f64 / bins as f64;
                (b.min(hi) - a.max(lo)).max(0.0) * bins as f64
            })
            .collect();
        Self::tabulated(values)
    }

    /// `1/4 TruncNormal(1/4, 0.1) + 3/4 TruncNormal(3/4, 0.1)`, the bimodal
    /// benchmark generator.
    pub fn quarter_mixture() -> Self {
        Self::Mixture {
            weight: 0.25,
            first: Box::new(Self::TruncNormal {
                mu: 0.25,
                sigma: 0.1,
            }),
            second: Box::new(Self::TruncNormal {
                mu: 0.75,
                sigma: 0.1,
            }),
        }
    }

    fn checked(spec: Self) -> Result<Self> {
        spec.validate()?;
        Ok(spec)
    }

    /// Checks every parameter against its family domain.
    pub fn validate(&self) -> Result<()> {
        fn positive(name: &str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                invalid(format!("{name} must be positive and finite, got {v}"))
            }
        }
        fn finite(name: &str, v: f64) -> Result<()> {
            if v.is_finite() {
                Ok(())
            } else {
                invalid(format!("{name} must be finite, got {v}"))
            }
        }
        match self {
            Self::Uniform | Self::Tabulated(_) => Ok(()),
            Self::Triangular { upper, mode } => {
                if *mode > 0.0 && mode <= upper && *upper <= 1.0 {
                    Ok(())
                } else {
                    invalid(format!(
                        "triangular needs 0 < mode <= upper <= 1, got mode={mode}, upper={upper}"
                    ))
                }
            }
            Self::Beta { alpha, beta } => {
                positive("alpha", *alpha)?;
                positive("beta", *beta)
            }
            Self::Kumaraswamy { a, b } => {
                positive("a", *a)?;
                positive("b", *b)
            }
            Self::TruncNormal { mu, sigma } | Self::LogitNormal { mu, sigma } => {
                finite("mu", *mu)?;
                positive("sigma", *sigma)
            }
            Self::VonMises { phi1, phi2 } => {
                finite("phi1", *phi1)?;
                finite("phi2", *phi2)
            }
            Self::Mixture {
                weight,
                first,
                second,
            } => {
                if !(0.0..=1.0).contains(weight) {
                    return invalid(format!("mixture weight must lie in [0, 1], got {weight}"));
                }
                first.validate()?;
                second.validate()
            }
            Self::PiecewiseConstant { levels } => {
                if *levels == 0 {
                    invalid("piecewise-constant generator needs at least one level")
                } else {
                    Ok(())
                }
            }
            Self::Rotated { shift, base } => {
                if !(0.0..1.0).contains(shift) {
                    return invalid(format!("rotation shift must lie in [0, 1), got {shift}"));
                }
                base.validate()
            }
            Self::Reflected { base } => base.validate(),
        }
    }

    /// Short family tag, as used in JSON and reports.
    pub fn family(&self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::Triangular { .. } => "triangular",
            Self::Beta { .. } => "beta",
            Self::TruncNormal { .. } => "trunc_normal",
            Self::Kumaraswamy { .. } => "kumaraswamy",
            Self::LogitNormal { .. } => "logit_normal",
            Self::VonMises { .. } => "von_mises",
            Self::Mixture { .. } => "mixture",
            Self::PiecewiseConstant { .. } => "piecewise_constant",
            Self::Tabulated(_) => "tabulated",
            Self::Rotated { .. } => "rotated",
            Self::Reflected { .. } => "reflected",
        }
    }

    /// A human-readable label such as `beta+von_mises`.
    pub fn label(&self) -> String {
        match self {
            Self::Mixture { first, second, .. } => format!("{}+{}", first.label(), second.label()),
            Self::Rotated { base, .. } => format!("rotated({})", base.label()),
            Self::Reflected { base } => format!("reflected({})", base.label()),
            other => other.family().to_string(),
        }
    }

    /// Named scalar parameters of a parametric family (empty otherwise).
    pub fn params(&self) -> Vec<(&'static str, f64)> {
        match self {
            Self::Triangular { upper, mode } => vec![("b", *upper), ("m", *mode)],
            Self::Beta { alpha, beta } => vec![("alpha", *alpha), ("beta", *beta)],
            Self::TruncNormal { mu, sigma } | Self::LogitNormal { mu, sigma } => {
                vec![("mu", *mu), ("sigma", *sigma)]
            }
            Self::Kumaraswamy { a, b } => vec![("a", *a), ("b", *b)],
            Self::VonMises { phi1, phi2 } => vec![("phi1", *phi1), ("phi2", *phi2)],
            Self::PiecewiseConstant { levels } => vec![("n", *levels as f64)],
            Self::Rotated { shift, .. } => vec![("shift", *shift)],
            _ => Vec::new(),
        }
    }

    /// Validated, evaluation-ready form.
    pub fn density(&self) -> Result<Density> {
        Density::new(self)
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        Ok(self.density()?.pdf(x))
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        self.density()?.cdf(x)
    }

    /// `n` iid draws; deterministic given the state of `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<Vec<f64>> {
        if n == 0 {
            return domain("sample size must be positive");
        }
        let d = self.density()?;
        Ok((0..n).map(|_| d.sample(rng)).collect())
    }

    pub fn moments(&self) -> Result<GeneratorMoments> {
        self.density()?.moments()
    }

    /// The `(m + 1)`-fold antiderivative of the density evaluated at 1, from raw moments.
    pub fn antiderivative_at_one(&self, m: usize) -> Result<f64> {
        self.density()?.antiderivative_at_one(m)
    }

    /// `x -> f(1 - x)`, kept in closed form wherever the family allows.
    pub fn reflect(&self) -> Self {
        match self {
            Self::Uniform => Self::Uniform,
            Self::Triangular { upper, mode } if *upper == 1.0 && *mode < 1.0 => Self::Triangular {
                upper: 1.0,
                mode: 1.0 - mode,
            },
            Self::Beta { alpha, beta } => Self::Beta {
                alpha: *beta,
                beta: *alpha,
            },
            Self::TruncNormal { mu, sigma } => Self::TruncNormal {
                mu: 1.0 - mu,
                sigma: *sigma,
            },
            Self::LogitNormal { mu, sigma } => Self::LogitNormal {
                mu: -mu,
                sigma: *sigma,
            },
            Self::VonMises { phi1, phi2 } => Self::VonMises {
                phi1: *phi1,
                phi2: -phi2,
            },
            Self::Mixture {
                weight,
                first,
                second,
            } => Self::Mixture {
                weight: *weight,
                first: Box::new(first.reflect()),
                second: Box::new(second.reflect()),
            },
            Self::PiecewiseConstant { levels } => {
                let n = *levels as f64;
                let values = (0..*levels).rev().map(|j| (2 * j + 1) as f64 / n).collect();
                Self::Tabulated(Histogram::new(values).expect("positive levels"))
            }
            Self::Tabulated(h) => Self::Tabulated(h.reversed()),
            Self::Rotated { shift, base } => Self::Rotated {
                shift: crate::signature::frac(-shift),
                base: Box::new(base.reflect()),
            },
            Self::Reflected { base } => (**base).clone(),
            other => Self::Reflected {
                base: Box::new(other.clone()),
            },
        }
    }

    /// Number of free parameters counted for AIC.
    pub fn free_parameters(&self) -> usize {
        match self {
            Self::Uniform | Self::Tabulated(_) | Self::PiecewiseConstant { .. } => 0,
            Self::Mixture { first, second, .. } => {
                1 + first.free_parameters() + second.free_parameters()
            }
            Self::Rotated { base, .. } | Self::Reflected { base } => base.free_parameters(),
            _ => 2,
        }
    }
}

pub(crate) fn check_unit(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        domain(format!("x = {x} is outside [0, 1]"))
    }
}
