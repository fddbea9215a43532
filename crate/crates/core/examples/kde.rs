//! Kernel density estimate of a bimodal generator from rank-based wrapped sums.

use wrapcop::inference::{
    count_modes, fit_kde, integrated_squared_error, pseudo_observations, wrapped_sums, KdeOptions,
};
use wrapcop::rng::from_seed;
use wrapcop::{CopulaModel, GeneratorSpec, Signature};

fn main() -> wrapcop::Result<()> {
    let truth = GeneratorSpec::quarter_mixture();
    let sig = Signature::new(vec![0, 1])?;
    let model = CopulaModel::new(truth.clone(), sig.clone())?;
    let density = truth.density()?;
    for n in [100, 1000, 5000] {
        let u = pseudo_observations(&model.sample(&mut from_seed(n as u64), n)?)?;
        let est = fit_kde(&wrapped_sums(&u, &sig)?, &KdeOptions::default())?;
        println!(
            "n = {n:>5}: bandwidth {:.4}, modes {}, ISE {:.4}, mass {:.3}",
            est.bandwidth,
            count_modes(&est.values, 0.05),
            integrated_squared_error(&est, &density),
            est.mass()
        );
    }
    Ok(())
}
