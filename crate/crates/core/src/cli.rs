//! The `wrapcop` command line.
//!
//! Data goes to `--out` or stdout; the resolved configuration and logs go to
//! stderr. Exit code 0 is success, 1 a usage error, 2 a data or numeric error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::concordance::{closed_form, oracle_concordance, ORACLE_GRID};
use crate::copula::CopulaModel;
use crate::data::{format_number, SampleMatrix};
use crate::error::{Error, Result};
use crate::experiments::{
    run_data_pipeline, run_study, AngleUnit, Manifest, PipelineOptions, StudyConfig,
};
use crate::generator::GeneratorSpec;
use crate::inference::{
    fit_kde, fit_parametric, pseudo_observations, select_signature, template_at, wrapped_sums,
    FitOptions, KdeOptions, PlugInFrame, Provenance, PseudoObservations, SelectionMethod,
};
use crate::rng::from_seed;
use crate::signature::Signature;

pub const THREADS_ENV: &str = "WRAPCOP_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "wrapcop",
    version,
    about = "Wrapped-sum copulas: sampling, evaluation, inference and studies"
)]
pub struct Cli {
    /// Seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format; each subcommand has its own default.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Draw observations from a copula model.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        n: usize,
    },
    /// Evaluate the copula density at points from a CSV file.
    Density(PointArgs),
    /// Evaluate the copula distribution function at points from a CSV file.
    Cdf(PointArgs),
    /// Spearman's rho, Kendall's tau and xi of a bivariate model.
    Concordance {
        #[arg(long)]
        model: PathBuf,
        /// Use tensor-grid quadrature instead of the closed forms.
        #[arg(long)]
        oracle: bool,
        #[arg(long, default_value_t = ORACLE_GRID)]
        grid: usize,
    },
    /// Choose the signature whose wrapped sums deviate most from uniform.
    SelectSignature {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "cvm")]
        method: String,
    },
    /// Maximum-likelihood fit of a generator family to wrapped sums.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        /// Family name, or `a+b` for a two-component mixture.
        #[arg(long, conflicts_with = "template")]
        family: Option<String>,
        /// Generator JSON used as the family and starting point.
        #[arg(long)]
        template: Option<PathBuf>,
        #[command(flatten)]
        frame: FrameArgs,
        #[arg(long, default_value_t = 8)]
        starts: usize,
    },
    /// Kernel density estimate of the generator from wrapped sums.
    Kde {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        frame: FrameArgs,
        /// Fixed bandwidth (Silverman's rule when absent).
        #[arg(long)]
        bandwidth: Option<f64>,
        #[arg(long, default_value_t = 200)]
        grid_size: usize,
        /// Wrap the kernel around the circle.
        #[arg(long)]
        circular: bool,
    },
    /// Run a simulation study from a JSON configuration.
    Study {
        #[arg(long)]
        config: PathBuf,
        /// Where to write the JSON manifest (default: next to --out).
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Analyze a pair of angle columns end to end.
    Pipeline {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "radians_pm_pi")]
        angle_unit: String,
        /// Zero-based column indices of the pair.
        #[arg(long, value_delimiter = ',', default_values_t = [0, 1])]
        columns: Vec<usize>,
        #[arg(long, default_value_t = 64)]
        beta_grid: usize,
    },
}

#[derive(Debug, Args, Serialize)]
pub struct PointArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// CSV of points, one per row.
    #[arg(long)]
    pub points: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct DataArgs {
    /// Input CSV; header optional.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
    /// Treat the columns as already uniform instead of ranking them.
    #[arg(long)]
    pub known_margins: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct FrameArgs {
    /// Signature bits such as `0,1`; selected by CvM when absent.
    #[arg(long, value_delimiter = ',')]
    pub signature: Option<Vec<u8>>,
    /// Rotation added to the wrapped sums before fitting.
    #[arg(long, default_value_t = 0.0)]
    pub shift: f64,
}

fn read_model(path: &Path) -> Result<CopulaModel> {
    Ok(serde_json::from_reader(io::BufReader::new(File::open(
        path,
    )?))?)
}

fn read_matrix(path: &Path, delimiter: char) -> Result<SampleMatrix> {
    if !delimiter.is_ascii() {
        return Err(Error::InvalidParameter(format!(
            "delimiter '{delimiter}' is not ASCII"
        )));
    }
    SampleMatrix::read_csv(io::BufReader::new(File::open(path)?), delimiter as u8)
}

fn observations(args: &DataArgs) -> Result<PseudoObservations> {
    let x = read_matrix(&args.data, args.delimiter)?;
    if args.known_margins {
        PseudoObservations::from_unit_scale(x, Provenance::KnownMargins)
    } else {
        pseudo_observations(&x)
    }
}

/// Wrapped sums under the requested or selected signature, then shifted.
fn frame_sums(u: &PseudoObservations, frame: &FrameArgs) -> Result<(Vec<f64>, Signature)> {
    let sig = match &frame.signature {
        Some(bits) => Signature::new(bits.clone())?,
        None => {
            let s = select_signature(u, SelectionMethod::Cvm)?.chosen;
            log::info!("selected signature {s}");
            s
        }
    };
    let y = wrapped_sums(u, &sig)?
        .into_iter()
        .map(|v| crate::signature::frac(v + frame.shift))
        .collect();
    Ok((y, sig))
}

fn family_template(name: &str) -> Result<GeneratorSpec> {
    match name.split_once('+') {
        Some((a, b)) => GeneratorSpec::mixture(0.5, template_at(a, 0.3)?, template_at(b, 0.7)?),
        None => template_at(name, 0.5),
    }
}

fn write_json<W: Write, T: Serialize>(mut out: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn write_rows<W: Write>(
    out: W,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn point_values(args: &PointArgs, cdf: bool) -> Result<(SampleMatrix, Vec<f64>)> {
    let model = read_model(&args.model)?;
    let pts = read_matrix(&args.points, ',')?;
    let vals = pts
        .rows()
        .map(|p| if cdf { model.cdf(p) } else { model.density(p) })
        .collect::<Result<Vec<_>>>()?;
    Ok((pts, vals))
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let fmt = |default: Format| cli.format.unwrap_or(default);
    match &cli.command {
        Command::Sample { model, n } => {
            let model = read_model(model)?;
            let u = model.sample(&mut from_seed(cli.seed), *n)?;
            match fmt(Format::Csv) {
                Format::Csv => u.write_csv(out, None)?,
                Format::Json => write_json(out, &u.rows().collect::<Vec<_>>())?,
            }
        }
        Command::Density(args) | Command::Cdf(args) => {
            let is_cdf = matches!(cli.command, Command::Cdf(_));
            let (pts, vals) = point_values(args, is_cdf)?;
            let name = if is_cdf { "cdf" } else { "density" };
            match fmt(Format::Csv) {
                Format::Csv => {
                    let mut header: Vec<String> =
                        (1..=pts.ncols()).map(|j| format!("u{j}")).collect();
                    header.push(name.into());
                    let header: Vec<&str> = header.iter().map(String::as_str).collect();
                    let rows = pts.rows().zip(&vals).map(|(p, v)| {
                        let mut r: Vec<String> = p.iter().map(|x| format_number(*x)).collect();
                        r.push(format_number(*v));
                        r
                    });
                    write_rows(out, &header, rows)?;
                }
                Format::Json => write_json(out, &vals)?,
            }
        }
        Command::Concordance {
            model,
            oracle,
            grid,
        } => {
            let model = read_model(model)?;
            let r = if *oracle {
                oracle_concordance(&model, *grid)?
            } else {
                closed_form(&model)?
            };
            match fmt(Format::Json) {
                Format::Json => write_json(out, &r)?,
                Format::Csv => write_rows(
                    out,
                    &["rho", "tau", "xi", "sign_factor", "source"],
                    [vec![
                        format_number(r.rho),
                        format_number(r.tau),
                        format_number(r.xi),
                        format_number(r.sign_factor),
                        serde_json::to_value(r.source)?
                            .as_str()
                            .unwrap_or_default()
                            .to_string(),
                    ]],
                )?,
            }
        }
        Command::SelectSignature { data, method } => {
            let method: SelectionMethod = method.parse()?;
            let r = select_signature(&observations(data)?, method)?;
            match fmt(Format::Json) {
                Format::Json => write_json(out, &r)?,
                Format::Csv => write_rows(
                    out,
                    &["signature", "ks", "cvm", "chosen"],
                    r.statistic_per_candidate.iter().map(|c| {
                        vec![
                            c.signature.to_string(),
                            format_number(c.ks),
                            format_number(c.cvm),
                            (c.signature == r.chosen).to_string(),
                        ]
                    }),
                )?,
            }
        }
        Command::Fit {
            data,
            family,
            template,
            frame,
            starts,
        } => {
            let template = match (family, template) {
                (Some(f), _) => family_template(f)?,
                (None, Some(path)) => {
                    serde_json::from_reader(io::BufReader::new(File::open(path)?))?
                }
                (None, None) => {
                    return Err(Error::InvalidParameter(
                        "fit needs --family or --template".into(),
                    ))
                }
            };
            let u = observations(data)?;
            let (y, sig) = frame_sums(&u, frame)?;
            let frame_sig = if sig.len() == 2 {
                sig
            } else {
                Signature::zeros(2)
            };
            let opts = FitOptions {
                starts: *starts,
                seed: cli.seed,
                frame: PlugInFrame {
                    signature: frame_sig,
                    shift: frame.shift,
                },
                ..FitOptions::default()
            };
            let r = fit_parametric(&y, &template, &opts)?;
            match fmt(Format::Json) {
                Format::Json => write_json(out, &r)?,
                Format::Csv => write_rows(
                    out,
                    &["name", "value"],
                    r.params
                        .iter()
                        .map(|p| (p.name.clone(), p.value))
                        .chain([
                            ("log_likelihood".into(), r.log_likelihood),
                            ("aic".into(), r.aic),
                            ("rho".into(), r.rho),
                            ("tau".into(), r.tau),
                            ("xi".into(), r.xi),
                        ])
                        .map(|(k, v)| vec![k, format_number(v)]),
                )?,
            }
        }
        Command::Kde {
            data,
            frame,
            bandwidth,
            grid_size,
            circular,
        } => {
            let u = observations(data)?;
            let (y, _) = frame_sums(&u, frame)?;
            let est = fit_kde(
                &y,
                &KdeOptions {
                    bandwidth: *bandwidth,
                    grid_size: *grid_size,
                    circular: *circular,
                },
            )?;
            match fmt(Format::Csv) {
                Format::Csv => write_rows(
                    out,
                    &["x", "density"],
                    est.grid
                        .iter()
                        .zip(&est.values)
                        .map(|(x, v)| vec![format_number(*x), format_number(*v)]),
                )?,
                Format::Json => write_json(out, &est)?,
            }
        }
        Command::Study { config, manifest } => {
            let started = Instant::now();
            let bytes = std::fs::read(config)?;
            let mut cfg: StudyConfig = serde_json::from_slice(&bytes)?;
            if cli.seed != 0 {
                cfg.seed = cli.seed;
            }
            let result = run_study(&cfg)?;
            match fmt(Format::Csv) {
                Format::Csv => result.write_csv(&mut *out)?,
                Format::Json => write_json(&mut *out, &result)?,
            }
            let path = manifest
                .clone()
                .or_else(|| cli.out.as_ref().map(|p| p.with_extension("manifest.json")));
            let m = Manifest::new(&cfg, &bytes, started)?;
            match path {
                Some(p) => write_json(File::create(p)?, &m)?,
                None => eprintln!("manifest: {}", serde_json::to_string(&m)?),
            }
        }
        Command::Pipeline {
            data,
            angle_unit,
            columns,
            beta_grid,
        } => {
            if columns.len() != 2 {
                return Err(Error::InvalidParameter(
                    "--columns takes exactly two indices".into(),
                ));
            }
            let delimiter = data.delimiter;
            if !delimiter.is_ascii() {
                return Err(Error::InvalidParameter(format!(
                    "delimiter '{delimiter}' is not ASCII"
                )));
            }
            let mut opts = PipelineOptions {
                angle_unit: angle_unit.parse::<AngleUnit>()?,
                columns: (columns[0], columns[1]),
                delimiter: delimiter as u8,
                beta_grid: *beta_grid,
                ..PipelineOptions::default()
            };
            opts.fit.seed = cli.seed;
            let mut bytes = Vec::new();
            File::open(&data.data)?.read_to_end(&mut bytes)?;
            let bundle = run_data_pipeline(&bytes[..], &opts)?;
            match fmt(Format::Json) {
                Format::Json => write_json(out, &bundle)?,
                Format::Csv => bundle.write_fit_table(out)?,
            }
        }
    }
    Ok(())
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(File::create(p)?)),
        None => Box::new(io::BufWriter::new(io::stdout().lock())),
    })
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return 1;
        }
        // a pool may already exist when called more than once in-process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match serde_json::to_string(&cli) {
        Ok(text) => eprintln!("config: {text}"),
        Err(e) => eprintln!("config: <unprintable: {e}>"),
    }
    let result = open_output(cli.out.as_deref()).and_then(|mut out| {
        execute(&cli, &mut out)?;
        out.flush()?;
        Ok(())
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidParameter(_) => 1,
                _ => 2,
            }
        }
    }
}
