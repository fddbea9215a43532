//! Simulation studies (signature recovery, parameter RMSE, kernel MISE) and
//! the angle-pair data pipeline, with long-format CSV output and a JSON run
//! manifest.

use std::fmt;
use std::io::{Read, Write};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha1::{Digest, Sha1};

use crate::concordance::{sample_concordance, ConcordanceReport};
use crate::copula::CopulaModel;
use crate::data::{format_number, SampleMatrix};
use crate::error::{domain, Error, Result};
use crate::generator::GeneratorSpec;
use crate::inference::{
    count_modes, empirical_beta_grid, fit_kde, fit_parametric, integrated_squared_error,
    order_components, parameter_list, pipeline_templates, pseudo_observations, select_signature,
    template_at, wrapped_sums, FitOptions, FitReport, KdeEstimate, KdeOptions, PlugInFrame,
    Provenance, PseudoObservations, SelectionMethod,
};
use crate::quadrature::pairwise_sum;
use crate::rng::substream;
use crate::signature::{frac, Signature};
use crate::special::{norm_cdf, norm_quantile};

/// Largest sample size accepted unless `paper_scale` is set.
pub const DESK_MAX_N: usize = 5000;
/// Relative prominence used when counting modes of density curves.
pub const MODE_PROMINENCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    SignatureRecovery,
    Rmse,
    KdeMise,
    DataPipeline,
}

impl fmt::Display for StudyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::SignatureRecovery => "signature_recovery",
            Self::Rmse => "rmse",
            Self::KdeMise => "kde_mise",
            Self::DataPipeline => "data_pipeline",
        })
    }
}

/// How copula-scale observations are recovered from simulated data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginsMode {
    /// Use the simulated copula sample directly.
    None,
    /// Normal margins fitted by maximum likelihood.
    NormalParametric,
    RankBased,
}

impl fmt::Display for MarginsMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::NormalParametric => "normal_parametric",
            Self::RankBased => "rank_based",
        })
    }
}

fn default_replicates() -> usize {
    100
}

fn default_margins() -> MarginsMode {
    MarginsMode::RankBased
}

fn default_fit_starts() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub study: StudyKind,
    pub dimensions: Vec<usize>,
    pub sample_sizes: Vec<usize>,
    pub generators: Vec<GeneratorSpec>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_margins")]
    pub margins: MarginsMode,
    /// Multi-start count for likelihood fits.
    #[serde(default = "default_fit_starts")]
    pub fit_starts: usize,
    /// Lift the desk-scale cap on sample sizes.
    #[serde(default)]
    pub paper_scale: bool,
}

impl StudyConfig {
    pub fn new(
        study: StudyKind,
        dimensions: Vec<usize>,
        sample_sizes: Vec<usize>,
        generators: Vec<GeneratorSpec>,
    ) -> Self {
        Self {
            study,
            dimensions,
            sample_sizes,
            generators,
            replicates: default_replicates(),
            seed: 0,
            margins: default_margins(),
            fit_starts: default_fit_starts(),
            paper_scale: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return domain("replicates must be at least 1");
        }
        if self.dimensions.is_empty() || self.sample_sizes.is_empty() || self.generators.is_empty()
        {
            return domain("dimensions, sample_sizes and generators must be non-empty");
        }
        if let Some(&d) = self.dimensions.iter().find(|&&d| d < 2) {
            return Err(Error::UnsupportedDimension(d));
        }
        let cap = if self.paper_scale {
            usize::MAX
        } else {
            DESK_MAX_N
        };
        if let Some(&n) = self.sample_sizes.iter().find(|&&n| n < 10 || n > cap) {
            return domain(format!(
                "sample size {n} outside [10, {DESK_MAX_N}]; set paper_scale for larger runs"
            ));
        }
        for g in &self.generators {
            g.validate()?;
        }
        Ok(())
    }
}

/// One long-format result row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub study: StudyKind,
    pub d: usize,
    pub n: usize,
    pub generator: String,
    pub method: String,
    pub metric: String,
    pub value: f64,
    pub mc_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub rows: Vec<StudyRow>,
}

impl StudyResult {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "study",
            "d",
            "n",
            "generator",
            "method",
            "metric",
            "value",
            "mc_stderr",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.study.to_string(),
                r.d.to_string(),
                r.n.to_string(),
                r.generator.clone(),
                r.method.clone(),
                r.metric.clone(),
                format_number(r.value),
                format_number(r.mc_stderr),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Rows matching the given cell and metric.
    pub fn find(&self, d: usize, n: usize, method: &str, metric: &str) -> Vec<&StudyRow> {
        self.rows
            .iter()
            .filter(|r| r.d == d && r.n == n && r.method == method && r.metric == metric)
            .collect()
    }
}

/// Mean and standard error (`sd / sqrt(count)`) of per-replicate values.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let sd = (pairwise_sum(&dev) / (n - 1.0)).sqrt();
    (mean, sd / n.sqrt())
}

/// Signature `(0, 1, 0, 1, ...)` of length `d`.
pub fn alternating_signature(d: usize) -> Signature {
    Signature::alternating(d)
}

fn study_code(kind: StudyKind) -> u64 {
    kind as u64 + 1
}

/// Draws `n` rows on the copula scale, then maps them to observations by the
/// requested route: unchanged, through `N(j, j)` margins refitted by maximum
/// likelihood, or through `N(j, j)` margins replaced by ranks.
pub fn simulate_observations(
    model: &CopulaModel,
    n: usize,
    margins: MarginsMode,
    rng: &mut crate::rng::SimRng,
) -> Result<PseudoObservations> {
    let u = model.sample(rng, n)?;
    if margins == MarginsMode::None {
        return PseudoObservations::from_unit_scale(u, Provenance::KnownMargins);
    }
    let d = u.ncols();
    // column j (1-based) is N(j, variance j)
    let columns: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let m = (j + 1) as f64;
            u.column(j)
                .iter()
                .map(|&p| m + m.sqrt() * norm_quantile(p))
                .collect()
        })
        .collect();
    let x = SampleMatrix::from_columns(&columns)?;
    match margins {
        MarginsMode::RankBased => pseudo_observations(&x),
        _ => {
            let fitted: Vec<Vec<f64>> = columns
                .iter()
                .map(|c| {
                    let nf = c.len() as f64;
                    let mean = c.iter().sum::<f64>() / nf;
                    let sd = (c.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / nf).sqrt();
                    c.iter().map(|v| norm_cdf((v - mean) / sd)).collect()
                })
                .collect();
            PseudoObservations::from_unit_scale(
                SampleMatrix::from_columns(&fitted)?,
                Provenance::ParametricMargins,
            )
        }
    }
}

/// Runs the study named in `cfg`.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyResult> {
    match cfg.study {
        StudyKind::SignatureRecovery => run_signature_study(cfg),
        StudyKind::Rmse => run_rmse_study(cfg),
        StudyKind::KdeMise => run_kde_mise_study(cfg),
        StudyKind::DataPipeline => Err(Error::UnsupportedInput(
            "the data pipeline runs on a CSV file, not a study configuration".into(),
        )),
    }
}

fn check_kind(cfg: &StudyConfig, kind: StudyKind) -> Result<()> {
    cfg.validate()?;
    if cfg.study != kind {
        return Err(Error::InvalidParameter(format!(
            "expected a {kind} study, got {}",
            cfg.study
        )));
    }
    Ok(())
}

/// Cells in output order: dimension, sample size, generator.
fn cells(cfg: &StudyConfig) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for &d in &cfg.dimensions {
        for &n in &cfg.sample_sizes {
            for g in 0..cfg.generators.len() {
                out.push((d, n, g));
            }
        }
    }
    out
}

/// Error proportion of the KS and CvM selectors. Each replicate draws one
/// sample for every canonical true signature; a selection counts as correct
/// when it matches the truth up to complementing all bits.
pub fn run_signature_study(cfg: &StudyConfig) -> Result<StudyResult> {
    check_kind(cfg, StudyKind::SignatureRecovery)?;
    let mut rows = Vec::new();
    for (d, n, gi) in cells(cfg) {
        let g = &cfg.generators[gi];
        let truths = Signature::canonical_candidates(d);
        let models = truths
            .iter()
            .map(|s| CopulaModel::new(g.clone(), s.clone()))
            .collect::<Result<Vec<_>>>()?;
        let per_rep = (0..cfg.replicates)
            .into_par_iter()
            .map(|r| {
                let mut wrong = [0.0; 2];
                for (k, (s, model)) in truths.iter().zip(&models).enumerate() {
                    let mut rng = substream(
                        cfg.seed,
                        &[
                            study_code(cfg.study),
                            d as u64,
                            n as u64,
                            gi as u64,
                            r as u64,
                            k as u64,
                        ],
                    );
                    let u = simulate_observations(model, n, MarginsMode::RankBased, &mut rng)?;
                    for (slot, method) in [SelectionMethod::Ks, SelectionMethod::Cvm]
                        .into_iter()
                        .enumerate()
                    {
                        if !select_signature(&u, method)?.chosen.equivalent(s) {
                            wrong[slot] += 1.0;
                        }
                    }
                }
                Ok(wrong.map(|w| w / truths.len() as f64))
            })
            .collect::<Result<Vec<[f64; 2]>>>()?;
        for (slot, method) in ["KS", "CvM"].into_iter().enumerate() {
            let vals: Vec<f64> = per_rep.iter().map(|w| w[slot]).collect();
            let (mean, se) = mean_and_stderr(&vals);
            rows.push(StudyRow {
                study: cfg.study,
                d,
                n,
                generator: g.label(),
                method: method.into(),
                metric: "error_rate".into(),
                value: mean,
                mc_stderr: se,
            });
        }
    }
    Ok(StudyResult { rows })
}

/// Starting template for refitting a known truth's family.
pub fn default_template(truth: &GeneratorSpec) -> GeneratorSpec {
    match truth {
        GeneratorSpec::Mixture { first, second, .. } => {
            match (
                template_at(first.family(), 0.3),
                template_at(second.family(), 0.7),
            ) {
                (Ok(a), Ok(b)) => {
                    GeneratorSpec::mixture(0.5, a, b).unwrap_or_else(|_| truth.clone())
                }
                _ => truth.clone(),
            }
        }
        other => template_at(other.family(), 0.5).unwrap_or_else(|_| other.clone()),
    }
}

/// Per-parameter RMSE of the maximum-likelihood fit of the true family.
/// Non-converged fits are excluded and counted in the `nonconverged` metric.
/// The standard error of an RMSE is propagated from that of the mean squared
/// error, `se(MSE) / (2 RMSE)`.
pub fn run_rmse_study(cfg: &StudyConfig) -> Result<StudyResult> {
    check_kind(cfg, StudyKind::Rmse)?;
    let mut rows = Vec::new();
    for (d, n, gi) in cells(cfg) {
        let truth = order_components(cfg.generators[gi].clone())?;
        let target = parameter_list(&truth);
        let model = CopulaModel::new(truth.clone(), alternating_signature(d))?;
        let sig = alternating_signature(d);
        let template = default_template(&truth);
        let fits = (0..cfg.replicates)
            .into_par_iter()
            .map(|r| {
                let path = [
                    study_code(cfg.study),
                    d as u64,
                    n as u64,
                    gi as u64,
                    r as u64,
                ];
                let mut rng = substream(cfg.seed, &path);
                let u = simulate_observations(&model, n, cfg.margins, &mut rng)?;
                let y = wrapped_sums(&u, &sig)?;
                let opts = FitOptions {
                    starts: cfg.fit_starts,
                    seed: crate::rng::derive_seed(cfg.seed, &path),
                    ..FitOptions::default()
                };
                fit_parametric(&y, &template, &opts)
            })
            .collect::<Result<Vec<FitReport>>>()?;
        let kept: Vec<&FitReport> = fits.iter().filter(|f| f.converged).collect();
        let label = truth.label();
        let method = cfg.margins.to_string();
        for (k, param) in target.iter().enumerate() {
            let sq: Vec<f64> = kept
                .iter()
                .map(|f| {
                    let e = f.params[k].value - param.value;
                    e * e
                })
                .collect();
            let (mse, se) = if sq.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                mean_and_stderr(&sq)
            };
            let rmse = mse.sqrt();
            rows.push(StudyRow {
                study: cfg.study,
                d,
                n,
                generator: label.clone(),
                method: method.clone(),
                metric: format!("rmse_{}", param.name),
                value: rmse,
                mc_stderr: if rmse > 0.0 { se / (2.0 * rmse) } else { 0.0 },
            });
        }
        rows.push(StudyRow {
            study: cfg.study,
            d,
            n,
            generator: label,
            method,
            metric: "nonconverged".into(),
            value: (fits.len() - kept.len()) as f64,
            mc_stderr: 0.0,
        });
    }
    Ok(StudyResult { rows })
}

/// Integrated squared error of the kernel estimate of the generator, plus
/// the rate at which the estimate shows the true number of modes and its
/// grid mass.
pub fn run_kde_mise_study(cfg: &StudyConfig) -> Result<StudyResult> {
    check_kind(cfg, StudyKind::KdeMise)?;
    let kde_opts = KdeOptions::default();
    let mut rows = Vec::new();
    for (d, n, gi) in cells(cfg) {
        let truth = &cfg.generators[gi];
        let density = truth.density()?;
        let grid: Vec<f64> = (0..kde_opts.grid_size)
            .map(|i| i as f64 / (kde_opts.grid_size - 1) as f64)
            .collect();
        let true_modes = count_modes(
            &grid.iter().map(|&x| density.pdf(x)).collect::<Vec<_>>(),
            MODE_PROMINENCE,
        );
        let sig = alternating_signature(d);
        let model = CopulaModel::new(truth.clone(), sig.clone())?;
        let per_rep = (0..cfg.replicates)
            .into_par_iter()
            .map(|r| {
                let mut rng = substream(
                    cfg.seed,
                    &[
                        study_code(cfg.study),
                        d as u64,
                        n as u64,
                        gi as u64,
                        r as u64,
                    ],
                );
                let u = simulate_observations(&model, n, cfg.margins, &mut rng)?;
                let y = wrapped_sums(&u, &sig)?;
                let est = fit_kde(&y, &kde_opts)?;
                let modes_ok = if count_modes(&est.values, MODE_PROMINENCE) == true_modes {
                    1.0
                } else {
                    0.0
                };
                Ok([
                    integrated_squared_error(&est, &density),
                    modes_ok,
                    est.mass(),
                ])
            })
            .collect::<Result<Vec<[f64; 3]>>>()?;
        for (slot, metric) in ["mise", "mode_count_match", "mass"].into_iter().enumerate() {
            let vals: Vec<f64> = per_rep.iter().map(|v| v[slot]).collect();
            let (mean, se) = mean_and_stderr(&vals);
            rows.push(StudyRow {
                study: cfg.study,
                d,
                n,
                generator: truth.label(),
                method: cfg.margins.to_string(),
                metric: metric.into(),
                value: mean,
                mc_stderr: se,
            });
        }
    }
    Ok(StudyResult { rows })
}

/// Unit of the angle columns fed to the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleUnit {
    /// Radians in `[-pi, pi]`.
    RadiansPmPi,
    /// Radians in `[0, 2 pi]`.
    Radians02Pi,
    UnitInterval,
}

impl std::str::FromStr for AngleUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "radians_pm_pi" => Ok(Self::RadiansPmPi),
            "radians_0_2pi" => Ok(Self::Radians02Pi),
            "unit_interval" => Ok(Self::UnitInterval),
            other => Err(Error::InvalidParameter(format!(
                "unknown angle unit '{other}'"
            ))),
        }
    }
}

impl AngleUnit {
    /// Maps an angle to `[0, 1]`, rejecting values outside the unit's range.
    pub fn to_unit(self, x: f64) -> Result<f64> {
        use std::f64::consts::{PI, TAU};
        const SLACK: f64 = 1e-9;
        let (lo, hi, v) = match self {
            Self::RadiansPmPi => (-PI, PI, (x + PI) / TAU),
            Self::Radians02Pi => (0.0, TAU, x / TAU),
            Self::UnitInterval => (0.0, 1.0, x),
        };
        if x < lo - SLACK || x > hi + SLACK {
            return domain(format!("angle {x} outside [{lo}, {hi}]"));
        }
        Ok(v.clamp(0.0, 1.0))
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub angle_unit: AngleUnit,
    /// Zero-based column indices of the pair.
    pub columns: (usize, usize),
    pub delimiter: u8,
    pub fit: FitOptions,
    pub kde: KdeOptions,
    pub beta_grid: usize,
    pub histogram_bins: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            angle_unit: AngleUnit::RadiansPmPi,
            columns: (0, 1),
            delimiter: b',',
            fit: FitOptions {
                frame: PlugInFrame {
                    signature: Signature::alternating(2),
                    shift: 0.5,
                },
                ..FitOptions::default()
            },
            kde: KdeOptions::default(),
            beta_grid: 64,
            histogram_bins: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineBundle {
    pub n: usize,
    /// Shifted wrapped differences `(u1 - u2 + 1/2) mod 1`.
    pub shifted_differences: Vec<f64>,
    pub histogram: Histogram,
    /// Sorted by increasing AIC.
    pub fits: Vec<FitReport>,
    pub sample: ConcordanceReport,
    pub kde: KdeEstimate,
    /// Empirical beta copula density at cell midpoints of a square grid.
    pub empirical_beta: Vec<Vec<f64>>,
}

impl PipelineBundle {
    /// Lowest-AIC fit among the single-family models.
    pub fn best_single(&self) -> Option<&FitReport> {
        self.fits.iter().find(|f| f.generator.family() != "mixture")
    }

    /// The AIC table as CSV: generator, parameters, plug-in measures, AIC.
    pub fn write_fit_table<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "generator",
            "parameters",
            "rho",
            "tau",
            "xi",
            "aic",
            "log_likelihood",
            "converged",
        ])?;
        for f in &self.fits {
            let params: Vec<String> = f
                .params
                .iter()
                .map(|p| format!("{}={}", p.name, format_number(p.value)))
                .collect();
            w.write_record([
                f.family.clone(),
                params.join(";"),
                format_number(f.rho),
                format_number(f.tau),
                format_number(f.xi),
                format_number(f.aic),
                format_number(f.log_likelihood),
                f.converged.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn histogram(y: &[f64], bins: usize) -> Histogram {
    let mut counts = vec![0usize; bins];
    for &v in y {
        counts[((v * bins as f64) as usize).min(bins - 1)] += 1;
    }
    let scale = bins as f64 / y.len() as f64;
    Histogram {
        edges: (0..=bins).map(|k| k as f64 / bins as f64).collect(),
        density: counts.into_iter().map(|c| c as f64 * scale).collect(),
    }
}

/// Runs the pair analysis on CSV text: rescale, rank, form shifted wrapped
/// differences, fit the twenty candidate generators, and summarize.
pub fn run_data_pipeline<R: Read>(input: R, opts: &PipelineOptions) -> Result<PipelineBundle> {
    let raw = SampleMatrix::read_csv(input, opts.delimiter)?;
    if raw.ncols() < 2 {
        return Err(Error::Schema(format!(
            "need at least 2 numeric columns, found {}",
            raw.ncols()
        )));
    }
    let (a, b) = opts.columns;
    let pair = raw.select_columns(&[a, b])?;
    if pair.nrows() < 50 {
        return domain(format!(
            "the pipeline needs at least 50 rows, found {}",
            pair.nrows()
        ));
    }
    let unit = pair
        .as_slice()
        .iter()
        .map(|&x| opts.angle_unit.to_unit(x))
        .collect::<Result<Vec<_>>>()?;
    let unit = SampleMatrix::new(unit, pair.nrows(), 2)?;
    let u = pseudo_observations(&unit)?;
    let y: Vec<f64> = wrapped_sums(&u, &Signature::alternating(2))?
        .into_iter()
        .map(|v| frac(v + 0.5))
        .collect();
    let fits = pipeline_templates()
        .par_iter()
        .map(|t| fit_parametric(&y, t, &opts.fit))
        .collect::<Vec<_>>();
    let mut fits: Vec<FitReport> = fits
        .into_iter()
        .filter_map(|f| match f {
            Ok(f) => Some(f),
            Err(e) => {
                log::warn!("fit skipped: {e}");
                None
            }
        })
        .collect();
    fits.sort_by(|p, q| p.aic.total_cmp(&q.aic));
    Ok(PipelineBundle {
        n: y.len(),
        histogram: histogram(&y, opts.histogram_bins),
        fits,
        sample: sample_concordance(&unit)?,
        kde: fit_kde(&y, &opts.kde)?,
        empirical_beta: empirical_beta_grid(&u, opts.beta_grid)?,
        shifted_differences: y,
    })
}

/// Git-style blob hash: SHA-1 of `"blob <len>\0"` followed by the bytes.
pub fn blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Provenance record written next to study outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config: serde_json::Value,
    pub input_hash: String,
    pub wall_time_seconds: f64,
    pub version: String,
}

impl Manifest {
    pub fn new<C: Serialize>(config: &C, input: &[u8], started: Instant) -> Result<Self> {
        Ok(Self {
            config: serde_json::to_value(config)?,
            input_hash: blob_hash(input),
            wall_time_seconds: started.elapsed().as_secs_f64(),
            version: env!("CARGO_PKG_VERSION").into(),
        })
    }
}
