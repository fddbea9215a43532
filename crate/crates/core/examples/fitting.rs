//! Maximum-likelihood fits of every unimodal family and one mixture to the
//! wrapped sums of a rank-transformed sample, ranked by AIC.

use wrapcop::inference::{
    fit_parametric, pseudo_observations, template_at, wrapped_sums, FitOptions, PlugInFrame,
    UNIMODAL_FAMILIES,
};
use wrapcop::rng::from_seed;
use wrapcop::{CopulaModel, GeneratorSpec, Signature};

fn main() -> wrapcop::Result<()> {
    let sig = Signature::new(vec![0, 1])?;
    let truth = GeneratorSpec::beta(3.0, 6.0)?;
    let model = CopulaModel::new(truth.clone(), sig.clone())?;
    let u = pseudo_observations(&model.sample(&mut from_seed(8), 1000)?)?;
    let y = wrapped_sums(&u, &sig)?;
    let opts = FitOptions {
        frame: PlugInFrame {
            signature: sig,
            shift: 0.0,
        },
        ..FitOptions::default()
    };
    let mut templates: Vec<GeneratorSpec> = UNIMODAL_FAMILIES
        .iter()
        .map(|f| template_at(f, 0.5))
        .collect::<Result<_, _>>()?;
    templates.push(GeneratorSpec::mixture(
        0.5,
        template_at("beta", 0.3)?,
        template_at("beta", 0.7)?,
    )?);
    let mut fits = templates
        .iter()
        .map(|t| fit_parametric(&y, t, &opts))
        .collect::<wrapcop::Result<Vec<_>>>()?;
    fits.sort_by(|a, b| a.aic.total_cmp(&b.aic));
    println!(
        "truth {} with rho {:.4}",
        truth.label(),
        wrapcop::concordance::closed_form(&model)?.rho
    );
    for f in &fits {
        let params: Vec<String> = f
            .params
            .iter()
            .map(|p| format!("{}={:.3}", p.name, p.value))
            .collect();
        println!(
            "{:<14} aic {:>9.2}  rho {:.4}  {}",
            f.family,
            f.aic,
            f.rho,
            params.join(" ")
        );
    }
    Ok(())
}
