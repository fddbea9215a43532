//! Spearman's rho, Kendall's tau and xi in closed form, by grid quadrature and
//! from a sample, for a few generators under every bivariate signature.

use wrapcop::concordance::{closed_form, oracle_concordance, sample_concordance};
use wrapcop::rng::from_seed;
use wrapcop::{CopulaModel, GeneratorSpec, Signature};

fn main() -> wrapcop::Result<()> {
    let generators = [
        GeneratorSpec::beta(1.5, 1.5)?,
        GeneratorSpec::von_mises(2.0, 1.0)?,
        GeneratorSpec::quarter_mixture(),
    ];
    println!(
        "{:<24} {:<6} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "generator", "sig", "rho", "tau", "xi", "oracle", "sample"
    );
    for g in &generators {
        for bits in [[0, 0], [0, 1]] {
            let model = CopulaModel::new(g.clone(), Signature::new(bits.to_vec())?)?;
            let exact = closed_form(&model)?;
            let grid = oracle_concordance(&model, 512)?;
            let sample = sample_concordance(&model.sample(&mut from_seed(3), 5000)?)?;
            println!(
                "{:<24} {:<6} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
                g.label(),
                model.signature().to_string(),
                exact.rho,
                exact.tau,
                exact.xi,
                grid.tau,
                sample.tau
            );
        }
    }
    Ok(())
}
