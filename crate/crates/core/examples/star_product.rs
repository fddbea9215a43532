//! Composes two bivariate members and builds a generator from partial sums of
//! inverse-square-root spikes.

use wrapcop::concordance::closed_form;
use wrapcop::generator::{evenly_spaced_points, partial_sum_generator, star_product};
use wrapcop::{CopulaModel, GeneratorSpec, Signature};

fn main() -> wrapcop::Result<()> {
    let f = GeneratorSpec::beta(1.5, 1.5)?;
    let g = GeneratorSpec::von_mises(3.0, 0.0)?;
    let zero = Signature::zeros(2);
    let (h, t) = star_product(&f, &g, &zero, &zero)?;
    let hd = h.density()?;
    println!("composite signature {t}");
    for x in [0.0, 0.25, 0.5, 0.75] {
        println!("  h({x}) = {:.4}", hd.pdf(x));
    }
    let (flat, _) = star_product(&GeneratorSpec::Uniform, &f, &zero, &zero)?;
    println!("uniform factor gives h(0.3) = {:.6}", flat.pdf(0.3)?);

    let points = evenly_spaced_points(4);
    let weights = vec![1.0; points.len()];
    let spikes = partial_sum_generator(&points, &weights, 256)?;
    let r = closed_form(&CopulaModel::new(spikes, zero)?)?;
    println!(
        "partial sum over {points:?}: rho {:.4}, tau {:.4}",
        r.rho, r.tau
    );
    Ok(())
}
