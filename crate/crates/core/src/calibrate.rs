//! Adam-based calibration of the bucket model against an efficiency metric.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchmark::BenchmarkMethod;
use crate::error::{Error, Result};
use crate::hydromodel::{self, BucketParams, BucketState, ForcingSeries, PhysicalParams, N_PARAMS};
use crate::metrics::{self, Guards, MetricName};
use crate::series::{PairedSeries, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            epochs: 1500,
            seed: 0,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::arg(format!("learning rate must be positive, got {}", self.lr)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::arg(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if !(self.eps > 0.0) {
            return Err(Error::arg("eps must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::arg("epochs must be at least 1"));
        }
        Ok(())
    }
}

/// Outcome of one optimizer run.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamOutcome {
    /// Parameters with the lowest recorded loss.
    pub params: Vec<f64>,
    pub loss: f64,
    /// Loss evaluated at the start of each epoch.
    pub trace: Vec<f64>,
}

/// Full-batch Adam with bias correction. `loss` returns the loss and its
/// gradient. Each epoch evaluates the loss once and then updates.
pub fn adam_optimize<F>(mut loss: F, init: &[f64], cfg: &AdamConfig) -> Result<AdamOutcome>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    cfg.validate()?;
    let dim = init.len();
    let mut x = init.to_vec();
    let mut m = vec![0.0; dim];
    let mut v = vec![0.0; dim];
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut best = (f64::INFINITY, x.clone());
    for epoch in 0..cfg.epochs {
        let (value, grad) = match loss(&x) {
            Ok(r) => r,
            Err(e) => {
                return Err(Error::Aborted {
                    epoch,
                    msg: e.to_string(),
                    trace,
                })
            }
        };
        if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Aborted {
                epoch,
                msg: format!("non-finite loss {value} or gradient"),
                trace,
            });
        }
        if grad.len() != dim {
            return Err(Error::arg("gradient length differs from parameter length"));
        }
        trace.push(value);
        if value < best.0 {
            best = (value, x.clone());
        }
        let k = (epoch + 1) as i32;
        let c1 = 1.0 - cfg.beta1.powi(k);
        let c2 = 1.0 - cfg.beta2.powi(k);
        for i in 0..dim {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            x[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(AdamOutcome {
        params: best.1,
        loss: best.0,
        trace,
    })
}

/// Everything needed to score a parameter vector: forcings (including any
/// spin-up), the observed record aligned with `forcings[offset..]`, and
/// masks selecting training and evaluation days.
#[derive(Debug, Clone)]
pub struct CalibrationSetup {
    pub forcings: ForcingSeries,
    pub offset: usize,
    pub init_state: BucketState,
    pub obs: TimeSeries,
    pub train_mask: Vec<bool>,
    pub eval_mask: Vec<bool>,
    pub metric: MetricName,
    pub method: BenchmarkMethod,
    pub guards: Guards,
    /// Central-difference step in unconstrained parameter space.
    pub fd_step: f64,
}

pub const DEFAULT_PARAM_FD_STEP: f64 = 1e-5;

impl CalibrationSetup {
    pub fn new(
        forcings: ForcingSeries,
        offset: usize,
        obs: TimeSeries,
        train_mask: Vec<bool>,
        eval_mask: Vec<bool>,
        metric: MetricName,
        method: BenchmarkMethod,
    ) -> Result<Self> {
        if offset + obs.len() != forcings.len() {
            return Err(Error::arg(format!(
                "forcings ({} days) do not cover spin-up ({offset}) plus observations ({})",
                forcings.len(),
                obs.len()
            )));
        }
        if forcings.start + chrono::Duration::days(offset as i64) != obs.start() {
            return Err(Error::arg("observations do not start where scoring starts"));
        }
        if train_mask.len() != obs.len() || eval_mask.len() != obs.len() {
            return Err(Error::arg("masks must match the observation length"));
        }
        Ok(Self {
            forcings,
            offset,
            init_state: BucketState::default(),
            obs,
            train_mask,
            eval_mask,
            metric,
            method,
            guards: Guards::default(),
            fd_step: DEFAULT_PARAM_FD_STEP,
        })
    }

    /// Simulated runoff over the scored period.
    pub fn simulate(&self, params: &BucketParams) -> Result<TimeSeries> {
        let q = hydromodel::simulate_values(&self.forcings, params, self.init_state);
        TimeSeries::complete(self.obs.start(), q[self.offset..].to_vec(), self.obs.unit())
    }

    fn pair(&self, params: &BucketParams, mask: &[bool]) -> Result<PairedSeries> {
        let sim = self.simulate(params)?;
        PairedSeries::new(self.obs.masked(mask)?, sim)
    }

    /// Metric value on the days selected by `mask`.
    pub fn metric_on(&self, params: &BucketParams, mask: &[bool]) -> Result<f64> {
        metrics::evaluate(self.metric, &self.pair(params, mask)?, self.method, self.guards)
    }

    fn to_loss(&self, metric_value: f64) -> f64 {
        if self.metric.is_efficiency() {
            1.0 - metric_value
        } else {
            metric_value
        }
    }

    pub fn train_loss(&self, theta: &[f64]) -> Result<f64> {
        let params = BucketParams::from_theta(theta)?;
        Ok(self.to_loss(self.metric_on(&params, &self.train_mask)?))
    }

    pub fn eval_loss(&self, theta: &[f64]) -> Result<f64> {
        let params = BucketParams::from_theta(theta)?;
        Ok(self.to_loss(self.metric_on(&params, &self.eval_mask)?))
    }

    /// Central-difference gradient of the training loss with step `h`.
    pub fn train_loss_gradient(&self, theta: &[f64], h: f64) -> Result<Vec<f64>> {
        let mut x = theta.to_vec();
        (0..theta.len())
            .map(|i| {
                x[i] = theta[i] + h;
                let up = self.train_loss(&x)?;
                x[i] = theta[i] - h;
                let down = self.train_loss(&x)?;
                x[i] = theta[i];
                Ok((up - down) / (2.0 * h))
            })
            .collect()
    }

    /// Training loss and its parameter gradient, the form consumed by [`adam_optimize`].
    pub fn metric_loss(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok((self.train_loss(theta)?, self.train_loss_gradient(theta, self.fd_step)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub params: BucketParams,
    pub physical: PhysicalParams,
    pub seed: u64,
    pub metric: MetricName,
    pub method: BenchmarkMethod,
    pub train_metric: f64,
    pub eval_metric: f64,
    pub train_loss: f64,
    pub eval_loss: f64,
    pub trace: Vec<f64>,
}

impl CalibrationResult {
    pub fn mean_loss(&self) -> f64 {
        0.5 * (self.train_loss + self.eval_loss)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Standard-normal initial parameters for run `seed`.
pub fn initial_theta(seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..N_PARAMS).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Runs Adam from `init` and scores the best parameters on both subsets.
pub fn calibrate_from(setup: &CalibrationSetup, init: &[f64], cfg: &AdamConfig) -> Result<CalibrationResult> {
    let outcome = adam_optimize(|x| setup.metric_loss(x), init, cfg)?;
    let params = BucketParams::from_theta(&outcome.params)?;
    let train_metric = setup.metric_on(&params, &setup.train_mask)?;
    let eval_metric = setup.metric_on(&params, &setup.eval_mask)?;
    Ok(CalibrationResult {
        params,
        physical: params.physical(),
        seed: cfg.seed,
        metric: setup.metric,
        method: setup.method,
        train_metric,
        eval_metric,
        train_loss: outcome.loss,
        eval_loss: setup.to_loss(eval_metric),
        trace: outcome.trace,
    })
}

/// One calibration run with initial parameters drawn from `cfg.seed`.
pub fn calibrate(setup: &CalibrationSetup, cfg: &AdamConfig) -> Result<CalibrationResult> {
    calibrate_from(setup, &initial_theta(cfg.seed), cfg)
}

/// Runs `n_seeds` calibrations with seeds `cfg.seed, cfg.seed + 1, ...` and
/// keeps the one with the lowest mean of training and evaluation loss
/// (earliest seed on ties).
pub fn multi_seed_calibrate(
    setup: &CalibrationSetup,
    n_seeds: usize,
    cfg: &AdamConfig,
) -> Result<CalibrationResult> {
    if n_seeds == 0 {
        return Err(Error::arg("at least one seed is required"));
    }
    cfg.validate()?;
    let runs: Vec<Result<CalibrationResult>> = (0..n_seeds as u64)
        .into_par_iter()
        .map(|k| {
            let cfg = AdamConfig {
                seed: cfg.seed.wrapping_add(k),
                ..*cfg
            };
            calibrate(setup, &cfg)
        })
        .collect();
    let mut best: Option<CalibrationResult> = None;
    let mut failures = Vec::new();
    for (k, run) in runs.into_iter().enumerate() {
        match run {
            Ok(r) if r.mean_loss().is_finite() => {
                if best.as_ref().is_none_or(|b| r.mean_loss() < b.mean_loss()) {
                    best = Some(r);
                }
            }
            Ok(r) => failures.push(format!("seed {}: non-finite evaluation loss", r.seed)),
            Err(e) => failures.push(format!("seed {}: {e}", cfg.seed.wrapping_add(k as u64))),
        }
    }
    best.ok_or(Error::CalibrationFailed(failures))
}
