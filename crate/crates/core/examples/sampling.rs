//! Draws from a trivariate copula and evaluates its density and distribution
//! function at a few points.

use wrapcop::rng::from_seed;
use wrapcop::{CopulaModel, GeneratorSpec, Signature};

fn main() -> wrapcop::Result<()> {
    let model = CopulaModel::new(
        GeneratorSpec::beta(2.0, 5.0)?,
        Signature::new(vec![0, 1, 1])?,
    )?;
    let u = model.sample(&mut from_seed(7), 5)?;
    println!("five draws:");
    u.write_csv(std::io::stdout().lock(), None)?;
    for p in [[0.2, 0.4, 0.6], [0.5, 0.5, 0.5], [0.9, 0.1, 0.3]] {
        println!(
            "u = {p:?}: density {:.4}, cdf {:.4}, dC/du1 {:.4}",
            model.density(&p)?,
            model.cdf(&p)?,
            model.partial_derivative(0, &p)?
        );
    }
    Ok(())
}
