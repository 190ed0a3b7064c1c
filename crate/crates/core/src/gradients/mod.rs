//! Analytic gradients of the efficiency metrics with respect to the simulated
//! series, and a central-difference checker.
//!
//! The benchmark operators are linear in the series, so the chain rule through
//! `b_t^s` reduces to one application of the operator transpose
//! ([`benchmark::adjoint`]): with anomalies `a = s - L s`,
//!
//! ```text
//! dF/ds = dF/da + L^T (dF/db - dF/da)
//! ```

use std::fmt;
use std::str::FromStr;

use crate::benchmark::{self, BenchmarkMethod};
use crate::error::{Error, Result};
use crate::metrics::{self, AnomalyState, Guards, MetricName, DEFAULT_EPS_B};
use crate::series::PairedSeries;

mod precise;

use precise::{Dd, PreciseInput};

/// Metrics with an analytic gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GradMetric {
    Mse,
    Nse,
    KgeSs,
    JkgeSs,
    JkgeAug,
}

impl GradMetric {
    pub const ALL: [GradMetric; 5] = [
        GradMetric::Mse,
        GradMetric::Nse,
        GradMetric::KgeSs,
        GradMetric::JkgeSs,
        GradMetric::JkgeAug,
    ];

    pub fn metric(self) -> MetricName {
        match self {
            GradMetric::Mse => MetricName::Mse,
            GradMetric::Nse => MetricName::Nse,
            GradMetric::KgeSs => MetricName::KgeSs,
            GradMetric::JkgeSs => MetricName::JkgeSs,
            GradMetric::JkgeAug => MetricName::JkgeAug,
        }
    }
}

impl fmt::Display for GradMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.metric().as_str())
    }
}

impl FromStr for GradMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let name: MetricName = s.parse()?;
        GradMetric::ALL
            .into_iter()
            .find(|g| g.metric() == name)
            .ok_or_else(|| Error::arg(format!("no analytic gradient for metric '{s}'")))
    }
}

/// `∂metric/∂s_t`, zero wherever either series is missing.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector {
    pub values: Vec<f64>,
    pub metric: GradMetric,
    pub valid: Vec<bool>,
}

pub fn grad_metric(
    metric: GradMetric,
    pair: &PairedSeries,
    method: BenchmarkMethod,
    eps_b: f64,
) -> Result<GradientVector> {
    let values = match metric {
        GradMetric::Mse => grad_mse(pair, 1.0)?,
        GradMetric::Nse => grad_nse(pair)?,
        GradMetric::KgeSs => grad_kge_ss(pair)?,
        GradMetric::JkgeSs => grad_jkge(pair, method, eps_b, false)?,
        GradMetric::JkgeAug => grad_jkge(pair, method, eps_b, true)?,
    };
    Ok(GradientVector {
        values,
        metric,
        valid: pair.usable_mask(),
    })
}

fn grad_mse(pair: &PairedSeries, scale: f64) -> Result<Vec<f64>> {
    let n = (0..pair.len()).filter(|&t| pair.usable(t)).count();
    if n == 0 {
        return Err(Error::degenerate("no usable positions"));
    }
    let (s, o) = (pair.sim().values(), pair.obs().values());
    Ok((0..pair.len())
        .map(|t| {
            if pair.usable(t) {
                scale * 2.0 * (s[t] - o[t]) / n as f64
            } else {
                0.0
            }
        })
        .collect())
}

fn grad_nse(pair: &PairedSeries) -> Result<Vec<f64>> {
    let o: Vec<f64> = (0..pair.len())
        .filter(|&t| pair.usable(t))
        .map(|t| pair.obs().values()[t])
        .collect();
    if o.is_empty() {
        return Err(Error::degenerate("no usable positions"));
    }
    let mu = o.iter().sum::<f64>() / o.len() as f64;
    let var = o.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / o.len() as f64;
    if var == 0.0 {
        return Err(Error::degenerate("observed standard deviation is zero"));
    }
    grad_mse(pair, -1.0 / var)
}

/// Derivative of `1 - sqrt(S / 2)` with respect to `S`.
fn skill_slope(sum: f64) -> Option<f64> {
    (sum > 0.0).then(|| -1.0 / (4.0 * (sum / 2.0).sqrt()))
}

fn grad_kge_ss(pair: &PairedSeries) -> Result<Vec<f64>> {
    let c = metrics::stationary_components(pair)?;
    if c.sigma_s == 0.0 {
        return Err(Error::GradientUndefined(
            "simulated standard deviation is zero".into(),
        ));
    }
    let Some(slope) = skill_slope(c.m + c.v + c.c) else {
        return Ok(vec![0.0; pair.len()]);
    };
    let n = (0..pair.len()).filter(|&t| pair.usable(t)).count() as f64;
    let (s, o) = (pair.sim().values(), pair.obs().values());
    let dm = -2.0 * (1.0 - c.beta) / (n * c.mu_o);
    Ok((0..pair.len())
        .map(|t| {
            if !pair.usable(t) {
                return 0.0;
            }
            let ds = s[t] - c.mu_s;
            let dv = -2.0 * (1.0 - c.alpha) / c.sigma_o * ds / (n * c.sigma_s);
            let drho = (o[t] - c.mu_o) / (n * c.sigma_s * c.sigma_o)
                - c.rho * ds / (n * c.sigma_s * c.sigma_s);
            let dc = -2.0 * (1.0 - c.rho) * drho;
            slope * (dm + dv + dc)
        })
        .collect())
}

fn grad_jkge(
    pair: &PairedSeries,
    method: BenchmarkMethod,
    eps_b: f64,
    augmented: bool,
) -> Result<Vec<f64>> {
    let state = AnomalyState::new(pair, method, eps_b)?;
    let c = state.components(pair);
    if c.psi_s == 0.0 && c.psi_o > 0.0 {
        return Err(Error::GradientUndefined(
            "simulated anomalies vanish; alpha* and rho* are not differentiable".into(),
        ));
    }
    let m = if augmented {
        c.m.ok_or_else(|| Error::degenerate("observed mean over scored positions is zero"))?
    } else {
        0.0
    };
    let len = pair.len();
    let Some(slope) = skill_slope(m + c.mstar + c.vstar + c.cstar) else {
        return Ok(vec![0.0; len]);
    };
    let n = c.n as f64;
    let (s, o) = (pair.sim().values(), pair.obs().values());

    let mut d_anom = vec![0.0; len];
    let mut d_bench = vec![0.0; len];
    let mut direct = vec![0.0; len];
    let dm = if augmented {
        let mu_s = state.indices().map(|t| s[t]).sum::<f64>() / n;
        let mu_o = state.indices().map(|t| o[t]).sum::<f64>() / n;
        -2.0 * (1.0 - mu_s / mu_o) / (n * mu_o)
    } else {
        0.0
    };
    // anomaly terms are constant when the observed anomalies vanish
    let anomaly_terms = c.psi_o > 0.0;
    for t in state.indices() {
        let b_s = state.b_sim.values[t];
        let d = state.denom[t];
        d_bench[t] = -2.0 * (1.0 - b_s / d) / (d * n);
        direct[t] = dm;
        if anomaly_terms {
            let a_s = s[t] - b_s;
            let a_o = o[t] - state.b_obs.values[t];
            let dpsi = a_s / (n * c.psi_s);
            let dv = -2.0 * (1.0 - c.alpha_star) / c.psi_o * dpsi;
            let drho = a_o / (n * c.psi_s * c.psi_o) - c.rho_star * a_s / (n * c.psi_s * c.psi_s);
            let dc = -2.0 * (1.0 - c.rho_star) * drho;
            d_anom[t] = dv + dc;
        }
    }
    let h: Vec<f64> = d_bench.iter().zip(&d_anom).map(|(b, a)| b - a).collect();
    let through_benchmark = benchmark::adjoint(method, &state.present, &h);
    Ok((0..len)
        .map(|t| slope * (direct[t] + d_anom[t] + through_benchmark[t]))
        .collect())
}

/// Central-difference gradient of `metric` with respect to the simulated
/// values, evaluated in double-double precision with one Richardson
/// refinement. The step at position `t` is `h * max(1, |s_t|)`.
pub fn numeric_gradient(
    metric: GradMetric,
    pair: &PairedSeries,
    method: BenchmarkMethod,
    h: f64,
) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::arg(format!("finite-difference step must be positive, got {h}")));
    }
    let present = pair.usable_mask();
    let obs: Vec<f64> = (0..pair.len())
        .map(|t| if present[t] { pair.obs().values()[t] } else { 0.0 })
        .collect();
    let base: Vec<Dd> = (0..pair.len())
        .map(|t| Dd::from(if present[t] { pair.sim().values()[t] } else { 0.0 }))
        .collect();
    // fail the same way the metric does at the base point
    metrics::evaluate(metric.metric(), pair, method, Guards::default())?;
    let mut sim = base.clone();
    let mut out = vec![0.0; pair.len()];
    let central = |sim: &mut Vec<Dd>, t: usize, step: Dd| -> Result<Dd> {
        sim[t] = base[t] + step;
        let input = PreciseInput { obs: &obs, sim, present: &present };
        let up = precise::evaluate(metric, &input, method, DEFAULT_EPS_B)?;
        sim[t] = base[t] - step;
        let input = PreciseInput { obs: &obs, sim, present: &present };
        let down = precise::evaluate(metric, &input, method, DEFAULT_EPS_B)?;
        sim[t] = base[t];
        Ok((up - down) / (step + step))
    };
    for t in (0..pair.len()).filter(|&t| present[t]) {
        let step = Dd::from(h * base[t].to_f64().abs().max(1.0));
        let coarse = central(&mut sim, t, step)?;
        let fine = central(&mut sim, t, step / Dd::from(2.0))?;
        // Richardson: cancels the h^2 truncation term
        out[t] = ((Dd::from(4.0) * fine - coarse) / Dd::from(3.0)).to_f64();
    }
    Ok(out)
}

/// Largest elementwise relative error between the analytic gradient and the
/// central-difference gradient, with denominator `max(|analytic|, |numeric|, 1e-12)`.
pub fn fd_check(
    metric: GradMetric,
    pair: &PairedSeries,
    method: BenchmarkMethod,
    h: f64,
) -> Result<f64> {
    let analytic = grad_metric(metric, pair, method, DEFAULT_EPS_B)?;
    let numeric = numeric_gradient(metric, pair, method, h)?;
    Ok(analytic
        .values
        .iter()
        .zip(&numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-12))
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use crate::series::{TimeSeries, Unit};

    fn random_pair(rng: &mut ChaCha8Rng, n: usize) -> PairedSeries {
        let obs: Vec<f64> = (0..n)
            .map(|t| 2.0 + (t as f64 / 9.0).sin() + rng.random_range(0.0..1.5))
            .collect();
        let sim: Vec<f64> = obs.iter().map(|o| 0.8 * o + rng.random_range(0.0..1.0)).collect();
        PairedSeries::from_values(&obs, &sim).unwrap()
    }

    #[test]
    fn mse_gradient_examples() {
        let obs = [1.0, 2.0, 5.0, 3.0];
        let p = PairedSeries::from_values(&obs, &obs).unwrap();
        let g = grad_metric(GradMetric::Mse, &p, BenchmarkMethod::Ltm, DEFAULT_EPS_B).unwrap();
        assert!(g.values.iter().all(|v| *v == 0.0));

        let shifted: Vec<f64> = obs.iter().map(|o| o + 0.5).collect();
        let p = PairedSeries::from_values(&obs, &shifted).unwrap();
        let g = grad_metric(GradMetric::Mse, &p, BenchmarkMethod::Ltm, DEFAULT_EPS_B).unwrap();
        assert!(g.values.iter().all(|v| (*v - 2.0 * 0.5 / 4.0).abs() < 1e-15));
    }

    #[test]
    fn mse_fd_check_is_tight() {
        let obs: Vec<f64> = (0..50).map(|t| 1.0 + (t % 7) as f64).collect();
        let sim: Vec<f64> = obs.iter().enumerate().map(|(t, o)| o + 0.5 + (t % 3) as f64).collect();
        let p = PairedSeries::from_values(&obs, &sim).unwrap();
        let err = fd_check(GradMetric::Mse, &p, BenchmarkMethod::Ltm, 1e-6).unwrap();
        assert!(err <= 1e-8, "{err}");
    }

    #[test]
    fn jkge_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = random_pair(&mut rng, 50);
        for method in [
            BenchmarkMethod::Ltm,
            BenchmarkMethod::SectionMean(10),
            BenchmarkMethod::MovingMean(7),
        ] {
            for metric in GradMetric::ALL {
                let err = fd_check(metric, &p, method, 1e-6).unwrap();
                assert!(err <= 1e-6, "{metric} {method}: {err}");
            }
        }
        let p = random_pair(&mut rng, 100);
        let err = fd_check(GradMetric::JkgeSs, &p, BenchmarkMethod::SectionMean(10), 1e-6).unwrap();
        assert!(err <= 1e-6, "{err}");
    }

    #[test]
    fn missing_positions_have_zero_gradient() {
        let start = NaiveDate::from_ymd_opt(2001, 1, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_pair(&mut rng, 40);
        let mut obs: Vec<Option<f64>> = p.obs().values().iter().map(|v| Some(*v)).collect();
        obs[5] = None;
        obs[22] = None;
        let p = PairedSeries::new(
            TimeSeries::from_options(start, &obs, Unit::MmPerDay).unwrap(),
            TimeSeries::complete(start, p.sim().values().to_vec(), Unit::MmPerDay).unwrap(),
        )
        .unwrap();
        for metric in GradMetric::ALL {
            for method in [BenchmarkMethod::SectionMean(8), BenchmarkMethod::MovingMean(5)] {
                let g = grad_metric(metric, &p, method, DEFAULT_EPS_B).unwrap();
                assert_eq!(g.values[5], 0.0);
                assert_eq!(g.values[22], 0.0);
                let err = fd_check(metric, &p, method, 1e-6).unwrap();
                assert!(err <= 1e-6, "{metric} {method}: {err}");
            }
        }
    }

    #[test]
    fn gradient_undefined_for_flat_simulation() {
        let obs = [1.0, 2.0, 3.0, 4.0];
        let p = PairedSeries::from_values(&obs, &[2.5; 4]).unwrap();
        assert!(matches!(
            grad_metric(GradMetric::KgeSs, &p, BenchmarkMethod::Ltm, DEFAULT_EPS_B),
            Err(Error::GradientUndefined(_))
        ));
        assert!(matches!(
            grad_metric(GradMetric::JkgeSs, &p, BenchmarkMethod::SectionMean(2), DEFAULT_EPS_B),
            Err(Error::GradientUndefined(_))
        ));
    }

    #[test]
    fn jkge_over_whole_record_reduces_to_kge_ss() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = random_pair(&mut rng, 64);
        let a = grad_metric(GradMetric::JkgeSs, &p, BenchmarkMethod::SectionMean(64), DEFAULT_EPS_B).unwrap();
        let b = grad_metric(GradMetric::KgeSs, &p, BenchmarkMethod::Ltm, DEFAULT_EPS_B).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn grad_metric_names() {
        assert_eq!("jkge_aug".parse::<GradMetric>().unwrap(), GradMetric::JkgeAug);
        assert!("jkge_musigma".parse::<GradMetric>().is_err());
        assert!("nope".parse::<GradMetric>().is_err());
    }
}
