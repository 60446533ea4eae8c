//! Command-line driver: sampling, fitting, prediction, rate experiments and
//! verification suites, all configured by one JSON file plus flags.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::directions::{DirectionalDistribution, PhiSpec};
use crate::forest::{
    fit_forest, predict_forest, read_query_csv, write_predictions_csv, Dataset, ForestError,
    ForestModel, MODEL_FORMAT_VERSION,
};
use crate::geometry::{ConvexBody, GeometryError, Window};
use crate::rng::RngStream;
use crate::stats::{run_rate_experiment, ExperimentError, RateExperiment, RatePoint};
use crate::svg::render_cells;
use crate::tessellation::{
    sample_partition, PartitionKind, TessellationError, DEFAULT_CELL_CAP, PARTITION_FORMAT_VERSION,
};
use crate::verify::{run_suite, Suite, SuiteReport, VerifyConfig};

/// Version of the report documents written by the CLI.
pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(
    name = "tessforest",
    version,
    about = "STIT and Poisson hyperplane partitions, random forests on them"
)]
pub struct Cli {
    /// JSON run configuration; missing fields take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "TESSFOREST_THREADS")]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Print the document format versions and exit.
    #[arg(long)]
    pub format_version: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample a partition of the window into partition.json.
    Sample {
        /// Also write partition.svg (d = 2 only).
        #[arg(long)]
        svg: bool,
    },
    /// Fit a forest on a CSV with header x1..xd,y into model.json.
    Fit {
        #[arg(long)]
        data: PathBuf,
    },
    /// Predict at the points of a CSV into predictions.csv.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Run the configured rate experiment into rates.csv and rates.json.
    Experiment,
    /// Run a verification suite into verify-<suite>.json.
    Verify { suite: Suite },
}

/// Contents of `--config`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Used only when `window` is absent: the unit cube of this dimension.
    pub dimension: usize,
    pub window: Option<Window>,
    pub phi: PhiSpec,
    pub lambda: f64,
    pub trees: usize,
    pub sampler: PartitionKind,
    pub cell_cap: usize,
    /// Pixels per window unit in SVG renders.
    pub svg_scale: f64,
    pub experiment: Option<RateExperiment>,
    pub verify: VerifyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            dimension: 2,
            window: None,
            phi: PhiSpec::axis(),
            lambda: 1.0,
            trees: 1,
            sampler: PartitionKind::Stit,
            cell_cap: DEFAULT_CELL_CAP,
            svg_scale: 100.0,
            experiment: None,
            verify: VerifyConfig::default(),
        }
    }
}

impl RunConfig {
    /// Fills the window and checks every field that does not need data.
    pub fn resolve(mut self) -> Result<Self, CliError> {
        let window = self
            .window
            .take()
            .unwrap_or_else(|| Window::unit_cube(self.dimension));
        window
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.dimension = window.dim();
        self.window = Some(window);
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(CliError::Config(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if self.trees == 0 {
            return Err(CliError::Config("trees must be at least 1".into()));
        }
        if !(self.svg_scale.is_finite() && self.svg_scale > 0.0) {
            return Err(CliError::Config("svg_scale must be positive".into()));
        }
        self.direction_law()?;
        if let Some(e) = &self.experiment {
            e.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        Ok(self)
    }

    pub fn window(&self) -> &Window {
        self.window.as_ref().expect("resolved config has a window")
    }

    pub fn direction_law(&self) -> Result<DirectionalDistribution, CliError> {
        DirectionalDistribution::from_spec(&self.phi, self.dimension)
            .map_err(|e| CliError::Config(e.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Config(String),
    #[error("resource cap: {0}")]
    Cap(String),
    #[error("{0}")]
    Runtime(String),
    #[error("verification failed")]
    VerifyFailed,
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::VerifyFailed => 1,
            CliError::Config(_) => 2,
            CliError::Cap(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }
}

impl From<TessellationError> for CliError {
    fn from(e: TessellationError) -> Self {
        match e {
            TessellationError::CellCap { .. } => CliError::Cap(e.to_string()),
            TessellationError::Geometry(GeometryError::Lp(_)) => CliError::Runtime(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<ForestError> for CliError {
    fn from(e: ForestError) -> Self {
        match e {
            ForestError::Tessellation(t) => t.into(),
            ForestError::Io(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Invalid(m) => CliError::Config(m),
            ExperimentError::Forest(f) => f.into(),
            ExperimentError::Tessellation(t) => t.into(),
        }
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        CliError::Config(e.to_string())
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

/// Reads `--config` (or the defaults) and applies the flag overrides.
pub fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.resolve()
}

/// Report wrapper: every JSON report echoes the resolved config.
#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    format_version: u32,
    config: &'a RunConfig,
    #[serde(flatten)]
    body: T,
}

#[derive(Serialize)]
struct RateSummary<'a> {
    slope: f64,
    intercept: f64,
    degenerate: bool,
    points: &'a [RatePoint],
}

#[derive(Serialize)]
struct VerifySummary<'a> {
    report: &'a SuiteReport,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| io_err(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Runs one command; `Ok` carries the paths written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    if let Some(n) = cli.threads {
        // A second call in the same process (tests) keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let Some(command) = &cli.command else {
        return Err(CliError::Config("no command given".into()));
    };
    let cfg = load_config(cli)?;
    fs::create_dir_all(&cli.out).map_err(|e| io_err(&cli.out, e))?;
    let rng = RngStream::new(cfg.seed);
    let mut written = Vec::new();
    match command {
        Command::Sample { svg } => {
            let phi = cfg.direction_law()?;
            let p = sample_partition(
                cfg.sampler,
                cfg.window(),
                &phi,
                cfg.lambda,
                &rng,
                cfg.cell_cap,
            )?;
            let path = cli.out.join("partition.json");
            write_json(&path, &p.to_document())?;
            written.push(path);
            if *svg {
                let text = render_cells(cfg.window(), &p.cells()?, cfg.svg_scale)?;
                let path = cli.out.join("partition.svg");
                fs::write(&path, text).map_err(|e| io_err(&path, e))?;
                written.push(path);
            }
        }
        Command::Fit { data } => {
            let phi = cfg.direction_law()?;
            let ds = Dataset::read_csv(open(data)?, cfg.window().clone())?;
            let model = fit_forest(
                cfg.sampler,
                &phi,
                cfg.lambda,
                cfg.trees,
                &ds,
                &rng,
                cfg.cell_cap,
            )?;
            let path = cli.out.join("model.json");
            let file = File::create(&path).map_err(|e| io_err(&path, e))?;
            model.save(BufWriter::new(file))?;
            written.push(path);
        }
        Command::Predict { model, data } => {
            let model = ForestModel::load(open(model)?)?;
            let xs = read_query_csv(open(data)?, model.window().dim())?;
            let y_hat = xs
                .iter()
                .map(|x| predict_forest(&model, x))
                .collect::<Result<Vec<_>, _>>()?;
            let path = cli.out.join("predictions.csv");
            let file = File::create(&path).map_err(|e| io_err(&path, e))?;
            write_predictions_csv(BufWriter::new(file), &xs, &y_hat)?;
            written.push(path);
        }
        Command::Experiment => {
            let Some(e) = &cfg.experiment else {
                return Err(CliError::Config("config has no experiment".into()));
            };
            let fit = run_rate_experiment(e, &rng, cfg.cell_cap)?;
            let path = cli.out.join("rates.csv");
            let file = File::create(&path).map_err(|e| io_err(&path, e))?;
            let mut w = csv::Writer::from_writer(BufWriter::new(file));
            for row in &fit.rows {
                w.serialize(row)
                    .map_err(|e| CliError::Runtime(e.to_string()))?;
            }
            w.flush().map_err(|e| io_err(&path, e))?;
            written.push(path);
            let path = cli.out.join("rates.json");
            let body = RateSummary {
                slope: fit.slope,
                intercept: fit.intercept,
                degenerate: fit.degenerate,
                points: &fit.points,
            };
            write_json(
                &path,
                &Report {
                    format_version: REPORT_FORMAT_VERSION,
                    config: &cfg,
                    body,
                },
            )?;
            written.push(path);
        }
        Command::Verify { suite } => {
            let report = run_suite(*suite, &cfg.verify, &rng)?;
            let path = cli.out.join(format!("verify-{}.json", suite_name(*suite)));
            let body = VerifySummary { report: &report };
            write_json(
                &path,
                &Report {
                    format_version: REPORT_FORMAT_VERSION,
                    config: &cfg,
                    body,
                },
            )?;
            written.push(path);
            for c in &report.checks {
                eprintln!(
                    "{} {} value={:.6} target={:.6} margin={:.6}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.target,
                    c.margin
                );
            }
            if !report.passed {
                return Err(CliError::VerifyFailed);
            }
        }
    }
    Ok(written)
}

fn suite_name(s: Suite) -> &'static str {
    match s {
        Suite::Geometry => "geometry",
        Suite::Markov => "markov",
        Suite::Equality => "equality",
        Suite::Rates => "rates",
        Suite::Biasvar => "biasvar",
    }
}

/// Entry point of the binary.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.format_version {
        println!(
            "partition {PARTITION_FORMAT_VERSION}\nmodel {MODEL_FORMAT_VERSION}\nreport {REPORT_FORMAT_VERSION}"
        );
        return ExitCode::SUCCESS;
    }
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("tessforest: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
