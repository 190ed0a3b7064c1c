//! End-to-end synthetic comparison: generate a catchment, calibrate the
//! bucket model against several metrics, and score every calibration with
//! every metric and the flow-group diagnostics.

use serde::{Deserialize, Serialize};

use crate::benchmark::BenchmarkMethod;
use crate::calibrate::{multi_seed_calibrate, AdamConfig, CalibrationResult, CalibrationSetup};
use crate::error::Result;
use crate::evaluate::{flow_group_anomalies, GroupAnomalies};
use crate::hydromodel::ForcingSeries;
use crate::metrics::{full_report, FlatReport, Guards, MetricName};
use crate::series::{split_train_eval, PairedSeries, TimeSeries, YearSplit, DEFAULT_LOG_FLOOR};

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.6;
pub const DEFAULT_SPINUP_YEARS: usize = 3;

/// One calibration target: a metric and the benchmark it is scored against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub metric: MetricName,
    pub method: BenchmarkMethod,
}

impl Target {
    pub fn label(&self) -> String {
        if self.metric.uses_benchmark() {
            format!("{}@{}", self.metric, self.method)
        } else {
            self.metric.to_string()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub targets: Vec<Target>,
    /// Benchmark used when scoring every calibration with the benchmark metrics.
    pub report_method: BenchmarkMethod,
    pub adam: AdamConfig,
    pub n_seeds: usize,
    pub train_fraction: f64,
    pub spinup_years: usize,
}

impl ExperimentConfig {
    pub fn new(targets: Vec<Target>, report_method: BenchmarkMethod) -> Self {
        Self {
            targets,
            report_method,
            adam: AdamConfig::default(),
            n_seeds: 10,
            train_fraction: DEFAULT_TRAIN_FRACTION,
            spinup_years: DEFAULT_SPINUP_YEARS,
        }
    }
}

/// Result of calibrating against one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedRun {
    pub target: Target,
    pub calibration: CalibrationResult,
    /// All metrics on the full scored record.
    pub report: FlatReport,
    /// All metrics on the evaluation years only.
    pub eval_report: FlatReport,
    pub flow_groups: Vec<GroupAnomalies>,
    #[serde(skip)]
    pub sim: Option<TimeSeries>,
}

impl TrainedRun {
    /// Median absolute log anomaly of flow group `group` (1-based).
    pub fn group_median_abs(&self, group: usize) -> Option<f64> {
        self.flow_groups
            .iter()
            .find(|g| g.group == group)
            .and_then(|g| g.stats.map(|s| s.median_abs))
    }
}

/// Forcings with spin-up, observations and the year split used by every target.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub forcings: ForcingSeries,
    pub offset: usize,
    pub obs: TimeSeries,
    pub split: YearSplit,
    pub train_mask: Vec<bool>,
    pub eval_mask: Vec<bool>,
}

pub fn prepare(
    forcings: &ForcingSeries,
    obs: &TimeSeries,
    train_fraction: f64,
    spinup_years: usize,
) -> Result<Prepared> {
    let wy = obs.water_years();
    let split = split_train_eval(obs, &wy, train_fraction)?;
    let train_mask = wy.mask_for(&split.train, obs.len());
    let eval_mask = wy.mask_for(&split.eval, obs.len());
    let (forcings, offset) = forcings.spun_up(spinup_years)?;
    Ok(Prepared {
        forcings,
        offset,
        obs: obs.clone(),
        split,
        train_mask,
        eval_mask,
    })
}

impl Prepared {
    pub fn setup(&self, target: Target) -> Result<CalibrationSetup> {
        CalibrationSetup::new(
            self.forcings.clone(),
            self.offset,
            self.obs.clone(),
            self.train_mask.clone(),
            self.eval_mask.clone(),
            target.metric,
            target.method,
        )
    }
}

/// Calibrates against each target and cross-evaluates the results.
pub fn run(
    forcings: &ForcingSeries,
    obs: &TimeSeries,
    cfg: &ExperimentConfig,
) -> Result<Vec<TrainedRun>> {
    let prepared = prepare(forcings, obs, cfg.train_fraction, cfg.spinup_years)?;
    cfg.targets
        .iter()
        .map(|&target| {
            let setup = prepared.setup(target)?;
            let calibration = multi_seed_calibrate(&setup, cfg.n_seeds, &cfg.adam)?;
            score(&prepared, target, calibration, cfg.report_method)
        })
        .collect()
}

/// Scores a calibration on the full record and on the evaluation years.
pub fn score(
    prepared: &Prepared,
    target: Target,
    calibration: CalibrationResult,
    report_method: BenchmarkMethod,
) -> Result<TrainedRun> {
    let setup = prepared.setup(target)?;
    let sim = setup.simulate(&calibration.params)?;
    let pair = PairedSeries::new(prepared.obs.clone(), sim.clone())?;
    let guards = Guards::default();
    let report = full_report(&pair, report_method, guards, false, DEFAULT_LOG_FLOOR)?.flat();
    let eval_pair = PairedSeries::new(prepared.obs.masked(&prepared.eval_mask)?, sim.clone())?;
    let eval_report = full_report(&eval_pair, report_method, guards, false, DEFAULT_LOG_FLOOR)?.flat();
    let flow_groups = flow_group_anomalies(&pair, DEFAULT_LOG_FLOOR)?;
    Ok(TrainedRun {
        target,
        calibration,
        report,
        eval_report,
        flow_groups,
        sim: Some(sim),
    })
}
