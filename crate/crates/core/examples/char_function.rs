//! Truncated Fourier series for the characteristic function against a
//! Monte Carlo average.

use num_complex::Complex64;
use wrapcop::rng::from_seed;
use wrapcop::{CopulaModel, GeneratorSpec, Signature};

fn main() -> wrapcop::Result<()> {
    let model = CopulaModel::new(
        GeneratorSpec::von_mises(2.0, 1.0)?,
        Signature::new(vec![0, 1])?,
    )?;
    let u = model.sample(&mut from_seed(1), 200_000)?;
    for t in [[1.0, 2.0], [-4.0, 3.0], [7.5, 7.5]] {
        let series = model.char_function(&t, 64)?;
        let mc = u
            .rows()
            .map(|r| Complex64::from_polar(1.0, t[0] * r[0] + t[1] * r[1]))
            .sum::<Complex64>()
            / u.nrows() as f64;
        println!("t = {t:?}: series {series:.4}, monte carlo {mc:.4}");
    }
    Ok(())
}
