use std::f64::consts::TAU;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::concordance::closed_form;
use crate::copula::CopulaModel;
use crate::error::{domain, Error, Result};
use crate::generator::GeneratorSpec;
use crate::optim::{nelder_mead, Minimum, SimplexOptions};
use crate::qmc::shifted_points;
use crate::rng::substream;
use crate::signature::Signature;

/// Reparameterized coordinates beyond this magnitude are reported as sitting
/// on the boundary of the parameter space.
const BOUNDARY_COORD: f64 = 12.0;
const MAX_FREE_PARAMETERS: usize = 5;

/// Copula frame in which plug-in concordance measures are reported: the
/// fitted density `g` of the data becomes the generator `x -> g(x + shift)`
/// of the bivariate copula with `signature`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlugInFrame {
    pub signature: Signature,
    pub shift: f64,
}

impl Default for PlugInFrame {
    fn default() -> Self {
        Self {
            signature: Signature::zeros(2),
            shift: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Total number of simplex runs; the first starts at the template.
    pub starts: usize,
    pub simplex: SimplexOptions,
    /// Seed for the scrambled start points.
    pub seed: u64,
    pub frame: PlugInFrame,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            starts: 8,
            simplex: SimplexOptions::default(),
            seed: 0,
            frame: PlugInFrame::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedValue {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// Family label, e.g. `beta` or `von_mises+von_mises`.
    pub family: String,
    pub generator: GeneratorSpec,
    pub params: Vec<NamedValue>,
    pub log_likelihood: f64,
    pub aic: f64,
    pub rho: f64,
    pub tau: f64,
    pub xi: f64,
    pub converged: bool,
    /// Some estimate sits at the edge of its parameter space.
    pub boundary: bool,
    pub iterations: usize,
}

impl FitReport {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|p| p.name == name).map(|p| p.value)
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Unconstrained coordinates of a parametric generator.
fn encode(spec: &GeneratorSpec, out: &mut Vec<f64>) -> Result<()> {
    match spec {
        GeneratorSpec::Uniform => {}
        GeneratorSpec::Triangular { upper, mode } => {
            let upper = upper.min(1.0 - 1e-9);
            out.push(logit(upper));
            out.push(logit((mode / upper).clamp(1e-9, 1.0 - 1e-9)));
        }
        GeneratorSpec::Beta { alpha: a, beta: b } | GeneratorSpec::Kumaraswamy { a, b } => {
            out.push(a.ln());
            out.push(b.ln());
        }
        GeneratorSpec::TruncNormal { mu, sigma } | GeneratorSpec::LogitNormal { mu, sigma } => {
            out.push(*mu);
            out.push(sigma.ln());
        }
        GeneratorSpec::VonMises { phi1, phi2 } => {
            out.push(*phi1);
            out.push(*phi2);
        }
        GeneratorSpec::Mixture {
            weight,
            first,
            second,
        } => {
            out.push(logit(weight.clamp(1e-9, 1.0 - 1e-9)));
            encode(first, out)?;
            encode(second, out)?;
        }
        other => {
            return Err(Error::UnsupportedInput(format!(
                "no likelihood fit for family '{}'",
                other.label()
            )))
        }
    }
    Ok(())
}

/// Inverse of [`encode`], consuming coordinates from the front of `theta`.
fn decode(template: &GeneratorSpec, theta: &mut &[f64]) -> Result<GeneratorSpec> {
    let mut take = || -> f64 {
        let v = theta[0];
        *theta = &theta[1..];
        v
    };
    match template {
        GeneratorSpec::Uniform => Ok(GeneratorSpec::Uniform),
        GeneratorSpec::Triangular { .. } => {
            let upper = logistic(take());
            let mode = upper * logistic(take());
            GeneratorSpec::triangular(upper, mode)
        }
        GeneratorSpec::Beta { .. } => GeneratorSpec::beta(take().exp(), take().exp()),
        GeneratorSpec::Kumaraswamy { .. } => GeneratorSpec::kumaraswamy(take().exp(), take().exp()),
        GeneratorSpec::TruncNormal { .. } => GeneratorSpec::trunc_normal(take(), take().exp()),
        GeneratorSpec::LogitNormal { .. } => GeneratorSpec::logit_normal(take(), take().exp()),
        GeneratorSpec::VonMises { .. } => GeneratorSpec::von_mises(take(), take()),
        GeneratorSpec::Mixture { first, second, .. } => {
            let w = logistic(take());
            let a = decode(first, theta)?;
            let b = decode(second, theta)?;
            GeneratorSpec::mixture(w, a, b)
        }
        other => Err(Error::UnsupportedInput(format!(
            "no likelihood fit for family '{}'",
            other.label()
        ))),
    }
}

/// Box in coordinate space from which scrambled starts are drawn.
fn start_box(spec: &GeneratorSpec, out: &mut Vec<(f64, f64)>) {
    match spec {
        GeneratorSpec::Triangular { .. } => out.extend([(-1.0, 4.0), (-3.0, 3.0)]),
        GeneratorSpec::Beta { .. } | GeneratorSpec::Kumaraswamy { .. } => {
            out.extend([(-1.0, 3.0), (-1.0, 3.0)])
        }
        GeneratorSpec::TruncNormal { .. } => out.extend([(-0.25, 1.25), (-4.0, 0.0)]),
        GeneratorSpec::LogitNormal { .. } => out.extend([(-3.0, 3.0), (-2.0, 1.0)]),
        GeneratorSpec::VonMises { .. } => out.extend([(-20.0, 20.0), (-20.0, 20.0)]),
        GeneratorSpec::Mixture { first, second, .. } => {
            out.push((-2.0, 2.0));
            start_box(first, out);
            start_box(second, out);
        }
        _ => {}
    }
}

fn named_params(spec: &GeneratorSpec, prefix: &str, out: &mut Vec<NamedValue>) {
    if let GeneratorSpec::Mixture {
        weight,
        first,
        second,
    } = spec
    {
        out.push(NamedValue {
            name: format!("{prefix}weight"),
            value: *weight,
        });
        named_params(first, &format!("{prefix}first."), out);
        named_params(second, &format!("{prefix}second."), out);
    } else {
        out.extend(spec.params().into_iter().map(|(k, v)| NamedValue {
            name: format!("{prefix}{k}"),
            value: v,
        }));
    }
}

/// Named parameters of a generator; mixtures use `weight`, `first.*`, `second.*`.
pub fn parameter_list(spec: &GeneratorSpec) -> Vec<NamedValue> {
    let mut out = Vec::new();
    named_params(spec, "", &mut out);
    out
}

/// Puts same-family mixture components in increasing order of their means.
pub fn order_components(spec: GeneratorSpec) -> Result<GeneratorSpec> {
    if let GeneratorSpec::Mixture {
        weight,
        first,
        second,
    } = &spec
    {
        if first.family() == second.family() && first.moments()?.mean > second.moments()?.mean {
            return GeneratorSpec::mixture(1.0 - weight, (**second).clone(), (**first).clone());
        }
    }
    Ok(spec)
}

/// `sum_i log f(y_i)`, `-inf` for parameters the family rejects.
fn log_likelihood(spec: &GeneratorSpec, y: &[f64]) -> f64 {
    match spec.density() {
        Ok(d) => y.iter().map(|&v| d.ln_pdf(v)).sum(),
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Maximum-likelihood fit of `template`'s family to values in `[0, 1)`.
/// Values are pulled into `[1/(2(n+1)), 1 - 1/(2(n+1))]` so that densities
/// vanishing or diverging at the ends stay finite.
pub fn fit_parametric(y: &[f64], template: &GeneratorSpec, opts: &FitOptions) -> Result<FitReport> {
    let n = y.len();
    if n < 10 {
        return domain("likelihood fits need at least 10 values");
    }
    if let Some(v) = y.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return domain(format!("value {v} is outside [0, 1]"));
    }
    template.validate()?;
    let k = template.free_parameters();
    if k > MAX_FREE_PARAMETERS {
        return Err(Error::UnsupportedInput(format!(
            "family '{}' has {k} free parameters; at most {MAX_FREE_PARAMETERS} are supported",
            template.label()
        )));
    }
    let margin = 0.5 / (n as f64 + 1.0);
    let y: Vec<f64> = y.iter().map(|v| v.clamp(margin, 1.0 - margin)).collect();

    let mut x0 = Vec::new();
    encode(template, &mut x0)?;
    let mut bounds = Vec::new();
    start_box(template, &mut bounds);

    let objective = |theta: &[f64]| -> f64 {
        let mut rest = theta;
        match decode(template, &mut rest) {
            Ok(spec) => -log_likelihood(&spec, &y),
            Err(_) => f64::INFINITY,
        }
    };

    let mut starts = vec![x0];
    if opts.starts > 1 && k > 0 {
        let mut rng = substream(opts.seed, &[k as u64, n as u64]);
        let shift: Vec<f64> = (0..k).map(|_| rng.random()).collect();
        let pts = shifted_points(k, opts.starts - 1, &shift);
        starts.extend(pts.chunks(k).map(|p| {
            p.iter()
                .zip(&bounds)
                .map(|(t, (lo, hi))| lo + t * (hi - lo))
                .collect()
        }));
    }
    let runs: Vec<Minimum> = starts
        .par_iter()
        .map(|x| nelder_mead(objective, x, opts.simplex))
        .collect();
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.value < runs[best].value {
            best = i;
        }
    }
    let run = &runs[best];
    let iterations = runs.iter().map(|r| r.iterations).sum();
    if !run.value.is_finite() {
        return Err(Error::Numeric {
            message: format!(
                "no start gave a finite likelihood for '{}'",
                template.label()
            ),
            achieved: f64::INFINITY,
        });
    }
    let mut rest = &run.x[..];
    let fitted = order_components(decode(template, &mut rest)?)?;
    let ll = log_likelihood(&fitted, &y);
    let boundary = run.x.iter().any(|t| t.abs() > BOUNDARY_COORD);
    if boundary {
        log::warn!(
            "fit of '{}' reached the boundary of its parameter space",
            template.label()
        );
    }
    let converged = run.converged && ll > 0.0;
    if !converged {
        log::warn!("fit of '{}' did not converge", template.label());
    }

    let plug = if opts.frame.shift == 0.0 {
        fitted.clone()
    } else {
        GeneratorSpec::rotated(fitted.clone(), opts.frame.shift)?
    };
    let report = closed_form(&CopulaModel::new(plug, opts.frame.signature.clone())?)?;
    let params = parameter_list(&fitted);
    Ok(FitReport {
        family: fitted.label(),
        generator: fitted,
        params,
        log_likelihood: ll,
        aic: 2.0 * k as f64 - 2.0 * ll,
        rho: report.rho,
        tau: report.tau,
        xi: report.xi,
        converged,
        boundary,
        iterations,
    })
}

/// A member of `family` roughly centred at `location`, used as a starting
/// point for fits.
pub fn template_at(family: &str, location: f64) -> Result<GeneratorSpec> {
    if !(location > 0.0 && location < 1.0) {
        return domain(format!(
            "template location must lie in (0, 1), got {location}"
        ));
    }
    match family {
        "uniform" => Ok(GeneratorSpec::Uniform),
        "beta" => GeneratorSpec::beta(8.0 * location, 8.0 * (1.0 - location)),
        "trunc_normal" => GeneratorSpec::trunc_normal(location, 0.15),
        // median of Kumaraswamy(2, b) is (1 - 2^{-1/b})^{1/2}
        "kumaraswamy" => GeneratorSpec::kumaraswamy(2.0, -1.0 / (1.0 - location * location).log2()),
        "logit_normal" => GeneratorSpec::logit_normal(logit(location), 0.7),
        "von_mises" => {
            let (s, c) = (TAU * location).sin_cos();
            GeneratorSpec::von_mises(2.0 * c, 2.0 * s)
        }
        "triangular" => GeneratorSpec::triangular(1.0, location),
        other => Err(Error::UnsupportedInput(format!(
            "no template for family '{other}'"
        ))),
    }
}

/// Families fitted by the data pipeline.
pub const UNIMODAL_FAMILIES: [&str; 5] = [
    "beta",
    "trunc_normal",
    "kumaraswamy",
    "logit_normal",
    "von_mises",
];

/// The five single-family templates followed by the fifteen two-component
/// mixtures (every unordered pair, including a family with itself).
pub fn pipeline_templates() -> Vec<GeneratorSpec> {
    let mut out: Vec<GeneratorSpec> = UNIMODAL_FAMILIES
        .iter()
        .map(|f| template_at(f, 0.5).expect("valid template"))
        .collect();
    for (i, a) in UNIMODAL_FAMILIES.iter().enumerate() {
        for b in &UNIMODAL_FAMILIES[i..] {
            out.push(
                GeneratorSpec::mixture(
                    0.5,
                    template_at(a, 0.3).expect("valid template"),
                    template_at(b, 0.7).expect("valid template"),
                )
                .expect("valid mixture"),
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::from_seed;

    #[test]
    fn coordinates_round_trip() {
        for spec in pipeline_templates().into_iter().chain([
            GeneratorSpec::triangular(0.8, 0.3).unwrap(),
            GeneratorSpec::Uniform,
        ]) {
            let mut theta = Vec::new();
            encode(&spec, &mut theta).unwrap();
            assert_eq!(theta.len(), spec.free_parameters());
            let mut rest = &theta[..];
            let back = decode(&spec, &mut rest).unwrap();
            assert!(rest.is_empty());
            let (a, b) = (back.params(), spec.params());
            for ((_, x), (_, y)) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-9 * y.abs().max(1.0), "{spec:?} {back:?}");
            }
        }
    }

    #[test]
    fn twenty_pipeline_families() {
        let t = pipeline_templates();
        assert_eq!(t.len(), 20);
        assert_eq!(t.iter().filter(|g| g.family() == "mixture").count(), 15);
    }

    #[test]
    fn recovers_beta_parameters() {
        let truth = GeneratorSpec::beta(3.0, 3.0).unwrap();
        let y = truth.sample(&mut from_seed(2), 5000).unwrap();
        let fit = fit_parametric(
            &y,
            &template_at("beta", 0.5).unwrap(),
            &FitOptions::default(),
        )
        .unwrap();
        assert!(fit.converged);
        assert!((fit.param("alpha").unwrap() - 3.0).abs() < 0.3, "{fit:?}");
        assert!((fit.param("beta").unwrap() - 3.0).abs() < 0.3, "{fit:?}");
        assert_eq!(fit.aic, 2.0 * 2.0 - 2.0 * fit.log_likelihood);
        // the optimizer never ends below the truth's likelihood
        let margin = 0.5 / 5001.0;
        let clamped: Vec<f64> = y.iter().map(|v| v.clamp(margin, 1.0 - margin)).collect();
        assert!(fit.log_likelihood >= log_likelihood(&truth, &clamped) - 5000.0 * 1e-6);
    }

    #[test]
    fn uniform_data_gives_flat_von_mises() {
        let y: Vec<f64> = GeneratorSpec::Uniform
            .sample(&mut from_seed(4), 10_000)
            .unwrap();
        let fit = fit_parametric(
            &y,
            &template_at("von_mises", 0.5).unwrap(),
            &FitOptions::default(),
        )
        .unwrap();
        let kappa = fit.param("phi1").unwrap().hypot(fit.param("phi2").unwrap());
        assert!(kappa < 0.1, "{fit:?}");
    }

    #[test]
    fn mixture_components_sorted_by_mean() {
        let truth = GeneratorSpec::mixture(
            0.3,
            GeneratorSpec::trunc_normal(0.8, 0.05).unwrap(),
            GeneratorSpec::trunc_normal(0.2, 0.05).unwrap(),
        )
        .unwrap();
        let y = truth.sample(&mut from_seed(8), 2000).unwrap();
        let template = GeneratorSpec::mixture(
            0.5,
            template_at("trunc_normal", 0.7).unwrap(),
            template_at("trunc_normal", 0.3).unwrap(),
        )
        .unwrap();
        let fit = fit_parametric(&y, &template, &FitOptions::default()).unwrap();
        let mu1 = fit.param("first.mu").unwrap();
        let mu2 = fit.param("second.mu").unwrap();
        assert!(mu1 < mu2);
        assert!(
            (mu1 - 0.2).abs() < 0.02 && (mu2 - 0.8).abs() < 0.02,
            "{fit:?}"
        );
        assert!((fit.param("weight").unwrap() - 0.7).abs() < 0.05, "{fit:?}");
        assert_eq!(fit.aic, 2.0 * 5.0 - 2.0 * fit.log_likelihood);
    }

    #[test]
    fn rejects_bad_input() {
        let t = template_at("beta", 0.5).unwrap();
        assert!(fit_parametric(&[0.5; 5], &t, &FitOptions::default()).is_err());
        assert!(fit_parametric(&[1.5; 20], &t, &FitOptions::default()).is_err());
        let tab = GeneratorSpec::tabulated(vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            fit_parametric(&[0.5; 20], &tab, &FitOptions::default()),
            Err(Error::UnsupportedInput(_))
        ));
    }
}
