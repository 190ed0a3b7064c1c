use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use jkge::metrics::{MetricName, DEFAULT_EPS_B, DEFAULT_EPS_SIGMA};
use jkge::series::DEFAULT_LOG_FLOOR;
use jkge::BenchmarkMethod;

#[derive(Debug, Parser)]
#[command(name = "jkge", version, about = "Benchmark-relative efficiency metrics for streamflow simulations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert discharge in cfs to depth in mm/day, optionally log-transformed.
    Convert(ConvertArgs),
    /// Write a benchmark series next to the input values.
    Benchmark(BenchmarkArgs),
    /// Score a simulation against observations and write diagnostics.
    Evaluate(EvaluateArgs),
    /// Calibrate the bucket model against a metric.
    Calibrate(CalibrateArgs),
    /// Compare analytic metric gradients with finite differences on random pairs.
    GradCheck(GradCheckArgs),
    /// Generate a synthetic catchment (forcings and observed flow).
    Synth(SynthArgs),
    /// Calibrate with several targets and cross-evaluate every result.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct ColumnArgs {
    /// Name of the date column.
    #[arg(long, default_value = "date")]
    pub date_column: String,
    /// Name of the value column.
    #[arg(long, default_value = "value")]
    pub value_column: String,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Catchment area in km^2.
    #[arg(long)]
    pub area_km2: f64,
    /// Also take the natural log after flooring at --log-floor.
    #[arg(long)]
    pub log: bool,
    #[arg(long, default_value_t = DEFAULT_LOG_FLOOR)]
    pub log_floor: f64,
    #[command(flatten)]
    pub columns: ColumnArgs,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// ltm, sa:N (section means) or ma:N (centered moving mean, N odd).
    #[arg(long, default_value = "sa:30")]
    pub method: BenchmarkMethod,
    #[command(flatten)]
    pub columns: ColumnArgs,
}

#[derive(Debug, Args, Clone, Copy)]
pub struct GuardArgs {
    /// Lower bound on |benchmark| in benchmark ratios.
    #[arg(long, default_value_t = DEFAULT_EPS_B)]
    pub eps_b: f64,
    /// Lower bound on per-segment observed anomaly RMS.
    #[arg(long, default_value_t = DEFAULT_EPS_SIGMA)]
    pub eps_sigma: f64,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub obs: PathBuf,
    #[arg(long)]
    pub sim: PathBuf,
    #[arg(long, default_value = "sa:30")]
    pub method: BenchmarkMethod,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub guards: GuardArgs,
    /// Score log-transformed flows.
    #[arg(long)]
    pub log_space: bool,
    #[arg(long, default_value_t = DEFAULT_LOG_FLOOR)]
    pub log_floor: f64,
    /// Bootstrap replicates; 0 skips the bootstrap.
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "date")]
    pub date_column: String,
    #[arg(long, default_value = "value")]
    pub obs_column: String,
    #[arg(long, default_value = "value")]
    pub sim_column: String,
}

#[derive(Debug, Args, Clone)]
pub struct TrainingArgs {
    #[arg(long, default_value_t = 1500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    /// Number of random initializations.
    #[arg(long, default_value_t = 10)]
    pub seeds: usize,
    #[arg(long, default_value_t = jkge::experiment::DEFAULT_TRAIN_FRACTION)]
    pub train_fraction: f64,
    /// Repetitions of the first water year prepended as spin-up.
    #[arg(long, default_value_t = jkge::experiment::DEFAULT_SPINUP_YEARS)]
    pub spinup_years: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// CSV with date, precip and pet columns.
    #[arg(long)]
    pub forcings: PathBuf,
    #[arg(long)]
    pub obs: PathBuf,
    #[arg(long, default_value = "jkge_aug")]
    pub metric: MetricName,
    #[arg(long, default_value = "sa:30")]
    pub method: BenchmarkMethod,
    #[command(flatten)]
    pub training: TrainingArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct GradCheckArgs {
    /// Random pairs per benchmark method and metric.
    #[arg(long, default_value_t = 20)]
    pub cases: usize,
    #[arg(long, value_delimiter = ',', default_value = "ltm,sa:7,sa:30,sa:90,ma:7,ma:31")]
    pub methods: Vec<BenchmarkMethod>,
    /// Relative finite-difference step.
    #[arg(long, default_value_t = 1e-6)]
    pub h: f64,
    /// Largest acceptable relative error.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Key-value configuration file; defaults apply to absent keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed (through the synth sub-seed).
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Forcings CSV; without it a synthetic catchment is generated.
    #[arg(long, requires = "obs")]
    pub forcings: Option<PathBuf>,
    #[arg(long, requires = "forcings")]
    pub obs: Option<PathBuf>,
    /// Synthetic catchment configuration, used when no forcings are given.
    #[arg(long, conflicts_with = "forcings")]
    pub synth_config: Option<PathBuf>,
    /// Metric calibrated once per benchmark method.
    #[arg(long, default_value = "jkge_aug")]
    pub metric: MetricName,
    #[arg(long, value_delimiter = ',', default_value = "sa:365,sa:180,sa:90,sa:30,sa:7,sa:1")]
    pub methods: Vec<BenchmarkMethod>,
    /// Benchmark used when scoring every calibration.
    #[arg(long, default_value = "sa:30")]
    pub report_method: BenchmarkMethod,
    /// Skip the reference calibration against kge_ss.
    #[arg(long)]
    pub no_baseline: bool,
    #[command(flatten)]
    pub training: TrainingArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
}
