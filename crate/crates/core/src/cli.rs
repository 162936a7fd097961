//! Command line entry point.
//!
//! Exit codes: 0 on success (and for `--help`/`--version`), 1 for usage and
//! configuration errors, 2 for runtime or numerical failures.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{ArgAction, Args, CommandFactory, Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::{run_experiment, BoxMuller, ExperimentConfig};
use crate::imaging::{default_stix_geometry, reconstruct, ImagingVariant, ReconstructionConfig, SourceModel, VisibilitySet};
use crate::interpolation::{fit_with, FitOptions};
use crate::io::{self, InterpConfig, MetricsConfig};
use crate::kernels::{Profile, RadialKernel};
use crate::metrics::{fill_distance, regional_distances, separation_distance, DomainBox};
use crate::model_selection::select_epsilon;
use crate::scalings::{AugmentedMap, Partition};

#[derive(Debug, Parser)]
#[command(name = "mvsk", version, about = "Kernel interpolation with mapped variably scaled kernels")]
pub struct Cli {
    /// More log output (-v info, -vv debug); RUST_LOG overrides.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit an interpolant to scattered data and evaluate it at query points.
    Interp(InterpArgs),
    /// Fill and separation distances of a node set.
    Metrics(MetricsArgs),
    /// RMSE sweep on the discontinuous test function over node counts, kernels and variants.
    BenchDiscontinuous(BenchArgs),
    /// Reconstruct an image from Fourier samples.
    ImageReconstruct(ImageArgs),
}

#[derive(Debug, Args)]
struct InterpArgs {
    /// TOML or JSON config; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Node CSV: coordinates then the data value.
    #[arg(long, required_unless_present = "config")]
    nodes: Option<PathBuf>,
    /// Query CSV: coordinates only.
    #[arg(long)]
    queries: Option<PathBuf>,
    /// wendland0, matern6 or gaussian.
    #[arg(long)]
    kernel: Option<Profile>,
    #[arg(long, allow_negative_numbers = true)]
    epsilon: Option<f64>,
    /// Choose epsilon by leave-one-out cross validation and write the score curve.
    #[arg(long)]
    loocv: bool,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Node CSV: coordinates only.
    #[arg(long, required_unless_present = "config")]
    nodes: Option<PathBuf>,
    /// Lower corner of the domain box, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required_unless_present = "config")]
    lower: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required_unless_present = "config")]
    upper: Option<Vec<f64>>,
    /// Points per axis of the grid approximating the fill distance.
    #[arg(long)]
    resolution: Option<usize>,
    /// JSON output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// TOML or JSON experiment config; defaults reproduce the full sweep.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct ImageArgs {
    /// Frequency CSV with columns u, v, or `default` for the built-in 60-point layout.
    #[arg(long)]
    geometry: Option<String>,
    /// Source model (JSON) or visibility CSV (u, v, re, im, sigma).
    #[arg(long)]
    source: PathBuf,
    /// classical, vsk or mvsk.
    #[arg(long)]
    variant: Option<ImagingVariant>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Noise level relative to the largest visibility amplitude, for source models.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Usage(clap::Error),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

fn usage(kind: ErrorKind, message: impl std::fmt::Display) -> Failure {
    Failure::Usage(Cli::command().error(kind, message))
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => return report_usage(e),
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    let outcome = match cli.command {
        Command::Interp(a) => interp(a),
        Command::Metrics(a) => metrics(a),
        Command::BenchDiscontinuous(a) => bench(a),
        Command::ImageReconstruct(a) => image(a),
    };
    match outcome {
        Ok(()) => 0,
        Err(Failure::Usage(e)) => report_usage(e),
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            match e {
                Error::Config { .. } => 1,
                _ => 2,
            }
        }
    }
}

fn report_usage(e: clap::Error) -> i32 {
    let _ = e.print();
    match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
        _ => 1,
    }
}

fn interp(a: InterpArgs) -> std::result::Result<(), Failure> {
    let mut cfg = match &a.config {
        Some(path) => io::parse_config::<InterpConfig>(path)?,
        None => InterpConfig {
            nodes: a.nodes.clone().expect("required by clap"),
            queries: None,
            kernel: Profile::MaternC6,
            epsilon: None,
            loocv: Default::default(),
            map: AugmentedMap::classical(),
            ridge: 0.0,
        },
    };
    if let Some(n) = a.nodes {
        cfg.nodes = n;
    }
    if a.queries.is_some() {
        cfg.queries = a.queries;
    }
    if let Some(k) = a.kernel {
        cfg.kernel = k;
    }
    if a.epsilon.is_some() {
        cfg.epsilon = a.epsilon;
    }
    io::ConfigFile::validate(&cfg)?;

    let samples = io::read_samples_csv(&cfg.nodes)?;
    let mut selection = None;
    let epsilon = match cfg.epsilon {
        Some(e) if !a.loocv => e,
        _ => {
            let s = select_epsilon(&cfg.loocv.to_config()?, cfg.kernel, &cfg.map, &samples.nodes, &samples.values)?;
            let best = s.best_epsilon;
            selection = Some(s);
            best
        }
    };
    let kernel = RadialKernel::new(cfg.kernel, epsilon)?;
    let interpolant = fit_with(&kernel, &cfg.map, &samples.nodes, &samples.values, &FitOptions { ridge: cfg.ridge })?;
    io::write_json(&a.out.join("interpolant.json"), &interpolant)?;
    if let Some(q) = &cfg.queries {
        let queries = io::read_nodes_csv(q)?;
        let points: Vec<&[f64]> = queries.iter().collect();
        let values = interpolant.evaluate(&points)?;
        io::write_nodes_csv(&a.out.join("predictions.csv"), &queries, Some(&values))?;
    }
    if let (true, Some(s)) = (a.loocv, &selection) {
        io::write_score_curve(&a.out.join("loocv_curve.csv"), &s.score_curve)?;
    }
    println!(
        "kernel {} epsilon {epsilon} nodes {} condition {:.3e}",
        cfg.kernel,
        samples.nodes.len(),
        interpolant.diagnostics.condition_estimate
    );
    Ok(())
}

#[derive(Serialize)]
struct RegionReport {
    region: usize,
    h: f64,
    q: f64,
}

#[derive(Serialize)]
struct MetricsReport {
    h: f64,
    q: f64,
    per_region: Vec<RegionReport>,
}

fn metrics(a: MetricsArgs) -> std::result::Result<(), Failure> {
    let mut cfg = match &a.config {
        Some(path) => io::parse_config::<MetricsConfig>(path)?,
        None => MetricsConfig {
            nodes: a.nodes.clone().expect("required by clap"),
            lower: a.lower.clone().expect("required by clap"),
            upper: a.upper.clone().expect("required by clap"),
            resolution: crate::metrics::DEFAULT_FILL_RESOLUTION,
            partition: None,
        },
    };
    if let Some(n) = a.nodes {
        cfg.nodes = n;
    }
    if let Some(l) = a.lower {
        cfg.lower = l;
    }
    if let Some(u) = a.upper {
        cfg.upper = u;
    }
    if let Some(r) = a.resolution {
        cfg.resolution = r;
    }
    io::ConfigFile::validate(&cfg)?;

    let nodes = io::read_nodes_csv(&cfg.nodes)?;
    let domain = DomainBox::new(cfg.lower.clone(), cfg.upper.clone(), cfg.resolution)?;
    let (h, q) = (fill_distance(&nodes, &domain)?, separation_distance(&nodes)?);
    let partition = match cfg.partition {
        Some(p) => p,
        None => Partition::along_axis(0, Vec::new())?,
    };
    let regional = regional_distances(&nodes, &domain, &partition)?;
    let per_region = (0..partition.region_count())
        .map(|k| RegionReport { region: k, h: regional.fill[k], q: regional.separation[k] })
        .collect();
    let report = MetricsReport { h, q, per_region };
    match &a.out {
        Some(path) => io::write_json(path, &report)?,
        None => println!("{}", io::json_string(&report)?),
    }
    Ok(())
}

fn bench(a: BenchArgs) -> std::result::Result<(), Failure> {
    let mut cfg = match &a.config {
        Some(path) => io::parse_config::<ExperimentConfig>(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let Some(out) = a.out.or(cfg.output_dir.clone()) else {
        return Err(usage(ErrorKind::MissingRequiredArgument, "bench-discontinuous needs --out or `output_dir` in the config"));
    };
    cfg.validate()?;
    let report = run_experiment(&cfg)?;
    io::write_experiment(&out, &report)?;
    let failed = report.rows.iter().filter(|r| r.failed).count();
    println!("{} rows ({failed} failed) written to {}", report.rows.len(), out.display());
    Ok(())
}

fn is_json(path: &Path) -> bool {
    path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn read_source_model(path: &Path) -> Result<SourceModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
    if let Some(obj) = value.as_object_mut() {
        obj.remove("schema_version");
    }
    let model: SourceModel = serde_json::from_value(value).map_err(|e| Error::parse(path, e))?;
    model.validate()?;
    Ok(model)
}

fn add_noise(vis: VisibilitySet, level: f64, seed: u64) -> Result<VisibilitySet> {
    let peak = vis.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
    let sigma = level * peak;
    let mut rng = BoxMuller::new(seed, 0);
    let values: Vec<Complex64> =
        vis.values().iter().map(|v| v + Complex64::new(sigma * rng.next_normal(), sigma * rng.next_normal())).collect();
    VisibilitySet::new(vis.geometry().clone(), values, Some(vec![sigma; vis.len()]))
}

fn image(a: ImageArgs) -> std::result::Result<(), Failure> {
    let mut cfg = match &a.config {
        Some(path) => io::parse_config::<ReconstructionConfig>(path)?,
        None => ReconstructionConfig::default(),
    };
    if let Some(v) = a.variant {
        cfg.variant = v;
    }
    if !(a.noise >= 0.0 && a.noise.is_finite()) {
        return Err(usage(ErrorKind::InvalidValue, "--noise must be nonnegative"));
    }
    cfg.validate()?;

    let (vis, model) = if is_json(&a.source) {
        let geometry = match a.geometry.as_deref() {
            None | Some("default") => default_stix_geometry(),
            Some(path) => io::read_geometry_csv(Path::new(path))?,
        };
        let model = read_source_model(&a.source)?;
        let mut vis = model.visibilities(&geometry, None)?;
        if a.noise > 0.0 {
            vis = add_noise(vis, a.noise, a.seed)?;
        }
        (vis, Some(model))
    } else {
        if a.geometry.as_deref().is_some_and(|g| g != "default") {
            return Err(usage(ErrorKind::ArgumentConflict, "--geometry cannot be combined with a visibility CSV source"));
        }
        if a.noise > 0.0 {
            return Err(usage(ErrorKind::ArgumentConflict, "--noise applies only to source models"));
        }
        (io::read_visibilities_csv(&a.source)?, None)
    };
    let rec = reconstruct(&vis, &cfg)?;
    let truth = model.map(|m| m.render(rec.image.spec()));
    io::write_reconstruction(&a.out, &vis, &rec, truth.as_ref())?;
    println!(
        "{} chi2 {:.6e} iterations {} written to {}",
        rec.variant.name(),
        rec.chi_square,
        rec.residual_history.len() - 1,
        a.out.display()
    );
    Ok(())
}
