//! Recovers the signature of a four-dimensional sample from ranks alone.

use wrapcop::inference::{pseudo_observations, select_signature, SelectionMethod};
use wrapcop::rng::from_seed;
use wrapcop::{CopulaModel, GeneratorSpec, Signature};

fn main() -> wrapcop::Result<()> {
    let truth = Signature::new(vec![0, 1, 0, 1])?;
    let model = CopulaModel::new(GeneratorSpec::von_mises(5.0, 0.0)?, truth.clone())?;
    let u = pseudo_observations(&model.sample(&mut from_seed(5), 300)?)?;
    for method in [SelectionMethod::Ks, SelectionMethod::Cvm] {
        let report = select_signature(&u, method)?;
        println!("{method}: chose {} (truth {truth})", report.chosen);
        for c in &report.statistic_per_candidate {
            println!("  {}  ks {:.4}  cvm {:.5}", c.signature, c.ks, c.cvm);
        }
    }
    Ok(())
}
