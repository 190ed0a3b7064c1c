//! Efficiency metrics and their decomposition components.
//!
//! Stationary metrics (MSE, NSE, KGE, KGE_ss) compare a simulation against the
//! long-term mean of the observations. The non-stationary family replaces that
//! constant with a benchmark `b_t` built by the same operator from both series:
//!
//! * `M*` penalises mismatch of the benchmark ratio `b_t^s / b_t^o`,
//! * `V*` and `C*` compare variability and correlation of the anomalies
//!   `x_t - b_t` about those benchmarks.
//!
//! All sums run over positions usable in both series and valid in both
//! benchmarks; `N` is always the count of those positions.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::benchmark::{self, BenchmarkMethod, BenchmarkSeries};
use crate::error::{Error, Result};
use crate::series::{PairedSeries, Unit};
use crate::stats::shifted_mean;

/// Default guard on `|b_t^o|` when forming benchmark ratios (mm/day).
pub const DEFAULT_EPS_B: f64 = 1e-8;
/// Default guard on segment anomaly deviations in the time-varying variability ratio.
pub const DEFAULT_EPS_SIGMA: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Guards {
    pub eps_b: f64,
    pub eps_sigma: f64,
}

impl Default for Guards {
    fn default() -> Self {
        Self {
            eps_b: DEFAULT_EPS_B,
            eps_sigma: DEFAULT_EPS_SIGMA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    Mse,
    Nse,
    Kge,
    KgeSs,
    JkgeSs,
    JkgeAug,
    JkgeAbl1,
    JkgeAbl2,
    JkgeMusigma,
}

impl MetricName {
    pub const ALL: [MetricName; 9] = [
        MetricName::Mse,
        MetricName::Nse,
        MetricName::Kge,
        MetricName::KgeSs,
        MetricName::JkgeSs,
        MetricName::JkgeAug,
        MetricName::JkgeAbl1,
        MetricName::JkgeAbl2,
        MetricName::JkgeMusigma,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricName::Mse => "mse",
            MetricName::Nse => "nse",
            MetricName::Kge => "kge",
            MetricName::KgeSs => "kge_ss",
            MetricName::JkgeSs => "jkge_ss",
            MetricName::JkgeAug => "jkge_aug",
            MetricName::JkgeAbl1 => "jkge_abl1",
            MetricName::JkgeAbl2 => "jkge_abl2",
            MetricName::JkgeMusigma => "jkge_musigma",
        }
    }

    /// `true` for efficiencies (optimum 1), `false` for MSE (optimum 0).
    pub fn is_efficiency(self) -> bool {
        self != MetricName::Mse
    }

    /// Whether the metric depends on the benchmark method.
    pub fn uses_benchmark(self) -> bool {
        matches!(
            self,
            MetricName::JkgeSs
                | MetricName::JkgeAug
                | MetricName::JkgeAbl1
                | MetricName::JkgeAbl2
                | MetricName::JkgeMusigma
        )
    }
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricName::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::arg(format!("unknown metric '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Ablation {
    /// Correlation term dropped.
    Abl1,
    /// Correlation and variability terms dropped.
    Abl2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryComponents {
    pub mu_s: f64,
    pub mu_o: f64,
    pub sigma_s: f64,
    pub sigma_o: f64,
    pub beta: f64,
    pub alpha: f64,
    pub rho: f64,
    pub m: f64,
    pub v: f64,
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonstationaryComponents {
    pub psi_s: f64,
    pub psi_o: f64,
    pub alpha_star: f64,
    pub rho_star: f64,
    pub mstar: f64,
    pub vstar: f64,
    pub cstar: f64,
    /// Long-term water-balance term `(1 - mu_s/mu_o)^2` over the scored
    /// positions; absent when the observed mean there is zero.
    pub m: Option<f64>,
    /// Number of scored positions.
    pub n: usize,
    /// Positions where `|b_t^o| < eps_b` and the ratio guard was applied.
    pub guarded_positions: usize,
    /// Both anomaly series vanish and the benchmarks coincide: the simulation
    /// reproduces the benchmark exactly and the anomaly terms are 0/0.
    pub perfect_benchmark: bool,
}

fn usable_values(pair: &PairedSeries) -> (Vec<f64>, Vec<f64>) {
    let (s, o) = (pair.sim().values(), pair.obs().values());
    (0..pair.len())
        .filter(|&t| pair.usable(t))
        .map(|t| (s[t], o[t]))
        .unzip()
}

fn rms_about(values: &[f64], center: f64) -> f64 {
    let ss: f64 = values.iter().map(|v| (v - center).powi(2)).sum();
    (ss / values.len() as f64).sqrt()
}

pub(crate) fn water_balance(mu_s: f64, mu_o: f64) -> Result<f64> {
    if mu_o == 0.0 {
        return Err(Error::degenerate(
            "observed mean is zero; beta is undefined",
        ));
    }
    Ok((1.0 - mu_s / mu_o).powi(2))
}

/// `1 - sqrt(sum / 2)`, the skill-score form shared by KGE_ss and the JKGE family.
fn skill(sum: f64) -> f64 {
    1.0 - (sum / 2.0).sqrt()
}

pub fn mse(pair: &PairedSeries) -> Result<f64> {
    let (s, o) = usable_values(pair);
    if s.is_empty() {
        return Err(Error::degenerate("no usable positions"));
    }
    let ss: f64 = s.iter().zip(&o).map(|(s, o)| (s - o).powi(2)).sum();
    Ok(ss / s.len() as f64)
}

pub fn nse(pair: &PairedSeries) -> Result<f64> {
    let (_, o) = usable_values(pair);
    let err = mse(pair)?;
    let mu_o = shifted_mean(o.iter().copied()).expect("non-empty");
    let sigma_o = rms_about(&o, mu_o);
    if sigma_o == 0.0 {
        return Err(Error::degenerate("observed standard deviation is zero"));
    }
    Ok(1.0 - err / (sigma_o * sigma_o))
}

pub fn stationary_components(pair: &PairedSeries) -> Result<StationaryComponents> {
    let (s, o) = usable_values(pair);
    if s.is_empty() {
        return Err(Error::degenerate("no usable positions"));
    }
    let mu_s = shifted_mean(s.iter().copied()).expect("non-empty");
    let mu_o = shifted_mean(o.iter().copied()).expect("non-empty");
    let m = water_balance(mu_s, mu_o)?;
    let sigma_s = rms_about(&s, mu_s);
    let sigma_o = rms_about(&o, mu_o);
    if sigma_o == 0.0 {
        return Err(Error::degenerate("observed standard deviation is zero"));
    }
    let (alpha, rho) = if sigma_s == 0.0 {
        (0.0, 0.0)
    } else {
        let cov: f64 = s.iter().zip(&o).map(|(s, o)| (s - mu_s) * (o - mu_o)).sum();
        {
            let ss_s: f64 = s.iter().map(|v| (v - mu_s).powi(2)).sum();
            let ss_o: f64 = o.iter().map(|v| (v - mu_o).powi(2)).sum();
            (sigma_s / sigma_o, cov / (ss_s * ss_o).sqrt())
        }
    };
    let beta = mu_s / mu_o;
    Ok(StationaryComponents {
        mu_s,
        mu_o,
        sigma_s,
        sigma_o,
        beta,
        alpha,
        rho,
        m,
        v: (1.0 - alpha).powi(2),
        c: (1.0 - rho).powi(2),
    })
}

pub fn kge_with_components(pair: &PairedSeries) -> Result<(f64, StationaryComponents)> {
    let c = stationary_components(pair)?;
    Ok((kge_from(&c), c))
}

fn kge_from(c: &StationaryComponents) -> f64 {
    1.0 - (c.m + c.v + c.c).sqrt()
}

fn kge_ss_from(c: &StationaryComponents) -> f64 {
    skill(c.m + c.v + c.c)
}

pub fn kge_ss(pair: &PairedSeries) -> Result<f64> {
    Ok(kge_ss_from(&stationary_components(pair)?))
}

/// Benchmarks and anomalies of a pair on the scored positions; shared by the
/// metric and gradient code.
pub(crate) struct AnomalyState {
    pub present: Vec<bool>,
    pub scored: Vec<bool>,
    pub b_sim: BenchmarkSeries,
    pub b_obs: BenchmarkSeries,
    /// Guarded observed benchmark `sign(b^o) max(|b^o|, eps_b)`.
    pub denom: Vec<f64>,
    pub n: usize,
    pub guarded: usize,
}

impl AnomalyState {
    pub fn new(pair: &PairedSeries, method: BenchmarkMethod, eps_b: f64) -> Result<Self> {
        if !(eps_b > 0.0) {
            return Err(Error::arg(format!("eps_b must be positive, got {eps_b}")));
        }
        let present = pair.usable_mask();
        let b_obs = benchmark::build(pair.obs().values(), &present, method)?;
        let b_sim = benchmark::build(pair.sim().values(), &present, method)?;
        let scored: Vec<bool> = (0..pair.len())
            .map(|t| present[t] && b_obs.valid[t] && b_sim.valid[t])
            .collect();
        let n = scored.iter().filter(|v| **v).count();
        if n == 0 {
            return Err(Error::degenerate(format!(
                "no positions valid under benchmark {method}"
            )));
        }
        let mut guarded = 0;
        let denom = (0..pair.len())
            .map(|t| {
                let b = b_obs.values[t];
                if scored[t] && b.abs() < eps_b {
                    guarded += 1;
                    if b < 0.0 {
                        -eps_b
                    } else {
                        eps_b
                    }
                } else {
                    b
                }
            })
            .collect();
        Ok(Self {
            present,
            scored,
            b_sim,
            b_obs,
            denom,
            n,
            guarded,
        })
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.scored.len()).filter(|&t| self.scored[t])
    }

    pub fn components(&self, pair: &PairedSeries) -> NonstationaryComponents {
        let (s, o) = (pair.sim().values(), pair.obs().values());
        let n = self.n as f64;
        let (mut ss_s, mut ss_o, mut cross, mut mstar) = (0.0, 0.0, 0.0, 0.0);
        for t in self.indices() {
            let a_s = s[t] - self.b_sim.values[t];
            let a_o = o[t] - self.b_obs.values[t];
            ss_s += a_s * a_s;
            ss_o += a_o * a_o;
            cross += a_s * a_o;
            mstar += (1.0 - self.b_sim.values[t] / self.denom[t]).powi(2);
        }
        let psi_s = (ss_s / n).sqrt();
        let psi_o = (ss_o / n).sqrt();
        let mstar = mstar / n;
        let (alpha_star, rho_star) = if psi_s == 0.0 || psi_o == 0.0 {
            (0.0, 0.0)
        } else {
            (psi_s / psi_o, cross / (ss_s * ss_o).sqrt())
        };
        let perfect_benchmark = psi_s == 0.0
            && psi_o == 0.0
            && self
                .indices()
                .all(|t| self.b_sim.values[t] == self.b_obs.values[t]);
        let mu_s = shifted_mean(self.indices().map(|t| s[t])).expect("n > 0");
        let mu_o = shifted_mean(self.indices().map(|t| o[t])).expect("n > 0");
        NonstationaryComponents {
            psi_s,
            psi_o,
            alpha_star,
            rho_star,
            mstar,
            vstar: (1.0 - alpha_star).powi(2),
            cstar: (1.0 - rho_star).powi(2),
            m: water_balance(mu_s, mu_o).ok(),
            n: self.n,
            guarded_positions: self.guarded,
            perfect_benchmark,
        }
    }
}

pub fn nonstationary_components(
    pair: &PairedSeries,
    method: BenchmarkMethod,
    eps_b: f64,
) -> Result<NonstationaryComponents> {
    let state = AnomalyState::new(pair, method, eps_b)?;
    Ok(state.components(pair))
}

fn jkge_ss_from(c: &NonstationaryComponents) -> f64 {
    skill(c.mstar + c.vstar + c.cstar)
}

fn aug_m(c: &NonstationaryComponents) -> Result<f64> {
    c.m.ok_or_else(|| Error::degenerate("observed mean over scored positions is zero"))
}

fn jkge_aug_from(c: &NonstationaryComponents) -> Result<f64> {
    Ok(skill(aug_m(c)? + c.mstar + c.vstar + c.cstar))
}

fn jkge_ablated_from(c: &NonstationaryComponents, variant: Ablation) -> Result<f64> {
    let m = aug_m(c)?;
    // no skill-score halving for the ablated forms
    Ok(match variant {
        Ablation::Abl1 => 1.0 - (m + c.mstar + c.vstar).sqrt(),
        Ablation::Abl2 => 1.0 - (m + c.mstar).sqrt(),
    })
}

pub fn jkge_ss(pair: &PairedSeries, method: BenchmarkMethod, eps_b: f64) -> Result<f64> {
    Ok(jkge_ss_from(&nonstationary_components(
        pair, method, eps_b,
    )?))
}

pub fn jkge_aug(pair: &PairedSeries, method: BenchmarkMethod, eps_b: f64) -> Result<f64> {
    jkge_aug_from(&nonstationary_components(pair, method, eps_b)?)
}

pub fn jkge_ablated(
    pair: &PairedSeries,
    method: BenchmarkMethod,
    eps_b: f64,
    variant: Ablation,
) -> Result<f64> {
    jkge_ablated_from(&nonstationary_components(pair, method, eps_b)?, variant)
}

/// JKGE_ss with the variability term built from a time-varying ratio of
/// segment (or window) anomaly deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuSigma {
    pub value: f64,
    pub vstar: f64,
    /// Segments (sections, or windows for moving means) whose observed anomaly
    /// deviation fell below `eps_sigma`.
    pub guarded_segments: usize,
}

fn musigma_from(
    pair: &PairedSeries,
    state: &AnomalyState,
    comps: &NonstationaryComponents,
    eps_sigma: f64,
) -> Result<MuSigma> {
    if !(eps_sigma > 0.0) {
        return Err(Error::arg(format!(
            "eps_sigma must be positive, got {eps_sigma}"
        )));
    }
    let sig_s = benchmark::sigma_values(pair.sim().values(), &state.scored, &state.b_sim)?;
    let sig_o = benchmark::sigma_values(pair.obs().values(), &state.scored, &state.b_obs)?;
    let segment_starts: Option<Vec<usize>> = benchmark::sections(state.b_obs.method, pair.len())
        .map(|secs| secs.into_iter().map(|r| r.start).collect());
    let mut guarded = vec![false; pair.len()];
    let mut sum = 0.0;
    for t in state.indices() {
        let (ps, po) = (sig_s.values[t], sig_o.values[t]);
        let alpha = if ps == po {
            1.0
        } else if po < eps_sigma {
            guarded[t] = true;
            ps / eps_sigma
        } else {
            ps / po
        };
        sum += (1.0 - alpha).powi(2);
    }
    let guarded_segments = match segment_starts {
        Some(starts) => {
            let secs = benchmark::sections(state.b_obs.method, pair.len()).expect("sections");
            starts
                .iter()
                .zip(secs)
                .filter(|(_, r)| r.clone().any(|t| guarded[t]))
                .count()
        }
        None => guarded.iter().filter(|g| **g).count(),
    };
    let vstar = sum / state.n as f64;
    Ok(MuSigma {
        value: skill(comps.mstar + vstar + comps.cstar),
        vstar,
        guarded_segments,
    })
}

pub fn jkge_musigma_detail(
    pair: &PairedSeries,
    method: BenchmarkMethod,
    guards: Guards,
) -> Result<MuSigma> {
    let state = AnomalyState::new(pair, method, guards.eps_b)?;
    let comps = state.components(pair);
    musigma_from(pair, &state, &comps, guards.eps_sigma)
}

pub fn jkge_musigma(
    pair: &PairedSeries,
    method: BenchmarkMethod,
    eps_b: f64,
    eps_sigma: f64,
) -> Result<f64> {
    Ok(jkge_musigma_detail(pair, method, Guards { eps_b, eps_sigma })?.value)
}

/// Evaluates a single metric by name.
pub fn evaluate(
    metric: MetricName,
    pair: &PairedSeries,
    method: BenchmarkMethod,
    guards: Guards,
) -> Result<f64> {
    match metric {
        MetricName::Mse => mse(pair),
        MetricName::Nse => nse(pair),
        MetricName::Kge => Ok(kge_with_components(pair)?.0),
        MetricName::KgeSs => kge_ss(pair),
        MetricName::JkgeSs => jkge_ss(pair, method, guards.eps_b),
        MetricName::JkgeAug => jkge_aug(pair, method, guards.eps_b),
        MetricName::JkgeAbl1 => jkge_ablated(pair, method, guards.eps_b, Ablation::Abl1),
        MetricName::JkgeAbl2 => jkge_ablated(pair, method, guards.eps_b, Ablation::Abl2),
        MetricName::JkgeMusigma => jkge_musigma(pair, method, guards.eps_b, guards.eps_sigma),
    }
}

/// Every metric and component for one sim/obs pair. Metrics that could not
/// be computed are `None` with the cause recorded in `reasons`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub mse: Option<f64>,
    pub nse: Option<f64>,
    pub kge: Option<f64>,
    pub kge_ss: Option<f64>,
    pub jkge_ss: Option<f64>,
    pub jkge_aug: Option<f64>,
    pub jkge_abl1: Option<f64>,
    pub jkge_abl2: Option<f64>,
    pub jkge_musigma: Option<f64>,
    pub stationary: Option<StationaryComponents>,
    pub nonstationary: Option<NonstationaryComponents>,
    pub musigma_guarded_segments: Option<usize>,
    pub method: BenchmarkMethod,
    pub log_space: bool,
    pub reasons: BTreeMap<String, String>,
}

fn record<T>(reasons: &mut BTreeMap<String, String>, key: &str, r: Result<T>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(e) => {
            reasons.insert(key.to_string(), e.to_string());
            None
        }
    }
}

pub fn full_report(
    pair: &PairedSeries,
    method: BenchmarkMethod,
    guards: Guards,
    log_space: bool,
    floor: f64,
) -> Result<MetricReport> {
    let transformed;
    let pair = if log_space {
        if !(floor > 0.0) {
            return Err(Error::arg(format!(
                "log floor must be positive, got {floor}"
            )));
        }
        transformed = pair.map(Unit::LogMmPerDay, |v| v.max(floor).ln())?;
        &transformed
    } else {
        pair
    };
    let mut reasons = BTreeMap::new();
    let r = &mut reasons;
    let mse_v = record(r, "mse", mse(pair));
    let nse_v = record(r, "nse", nse(pair));
    let stationary = record(r, "kge", stationary_components(pair));
    if stationary.is_none() {
        let why = r["kge"].clone();
        r.insert("kge_ss".into(), why);
    }
    let state = record(r, "jkge_ss", AnomalyState::new(pair, method, guards.eps_b));
    let nonstationary = state.as_ref().map(|s| s.components(pair));
    let mut jkge =
        |key: &str, f: &dyn Fn(&NonstationaryComponents) -> Result<f64>| match &nonstationary {
            Some(c) => record(r, key, f(c)),
            None => {
                let why = r["jkge_ss"].clone();
                r.insert(key.to_string(), why);
                None
            }
        };
    let jkge_ss_v = jkge("jkge_ss", &|c| Ok(jkge_ss_from(c)));
    let jkge_aug_v = jkge("jkge_aug", &|c| jkge_aug_from(c));
    let abl1 = jkge("jkge_abl1", &|c| jkge_ablated_from(c, Ablation::Abl1));
    let abl2 = jkge("jkge_abl2", &|c| jkge_ablated_from(c, Ablation::Abl2));
    let musigma = match (&state, &nonstationary) {
        (Some(s), Some(c)) => record(
            r,
            "jkge_musigma",
            musigma_from(pair, s, c, guards.eps_sigma),
        ),
        _ => {
            let why = r["jkge_ss"].clone();
            r.insert("jkge_musigma".into(), why);
            None
        }
    };
    if nonstationary.as_ref().is_some_and(|c| c.perfect_benchmark) {
        r.insert(
            "perfect_benchmark".into(),
            "simulated and observed anomalies both vanish; alpha* and rho* set to 0".into(),
        );
    }
    Ok(MetricReport {
        mse: mse_v,
        nse: nse_v,
        kge: stationary.as_ref().map(kge_from),
        kge_ss: stationary.as_ref().map(kge_ss_from),
        jkge_ss: jkge_ss_v,
        jkge_aug: jkge_aug_v,
        jkge_abl1: abl1,
        jkge_abl2: abl2,
        jkge_musigma: musigma.map(|m| m.value),
        stationary,
        nonstationary,
        musigma_guarded_segments: musigma.map(|m| m.guarded_segments),
        method,
        log_space,
        reasons,
    })
}

impl MetricReport {
    pub fn get(&self, metric: MetricName) -> Option<f64> {
        match metric {
            MetricName::Mse => self.mse,
            MetricName::Nse => self.nse,
            MetricName::Kge => self.kge,
            MetricName::KgeSs => self.kge_ss,
            MetricName::JkgeSs => self.jkge_ss,
            MetricName::JkgeAug => self.jkge_aug,
            MetricName::JkgeAbl1 => self.jkge_abl1,
            MetricName::JkgeAbl2 => self.jkge_abl2,
            MetricName::JkgeMusigma => self.jkge_musigma,
        }
    }

    pub fn flat(&self) -> FlatReport {
        let st = self.stationary;
        let ns = self.nonstationary;
        FlatReport {
            mse: self.mse,
            nse: self.nse,
            kge: self.kge,
            kge_ss: self.kge_ss,
            jkge_ss: self.jkge_ss,
            jkge_aug: self.jkge_aug,
            jkge_abl1: self.jkge_abl1,
            jkge_abl2: self.jkge_abl2,
            jkge_musigma: self.jkge_musigma,
            beta: st.map(|c| c.beta),
            alpha: st.map(|c| c.alpha),
            rho: st.map(|c| c.rho),
            m: st.map(|c| c.m),
            v: st.map(|c| c.v),
            c: st.map(|c| c.c),
            mstar: ns.map(|c| c.mstar),
            alpha_star: ns.map(|c| c.alpha_star),
            rho_star: ns.map(|c| c.rho_star),
            vstar: ns.map(|c| c.vstar),
            cstar: ns.map(|c| c.cstar),
            psi_s: ns.map(|c| c.psi_s),
            psi_o: ns.map(|c| c.psi_o),
            method: self.method,
            log_space: self.log_space,
            n_scored: ns.map(|c| c.n),
            eps_b_guarded: ns.map(|c| c.guarded_positions),
            eps_sigma_guarded: self.musigma_guarded_segments,
            perfect_benchmark: ns.is_some_and(|c| c.perfect_benchmark),
            reasons: self.reasons.clone(),
        }
    }
}

/// Flat serialization of a [`MetricReport`]: one key per metric and component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatReport {
    pub mse: Option<f64>,
    pub nse: Option<f64>,
    pub kge: Option<f64>,
    pub kge_ss: Option<f64>,
    pub jkge_ss: Option<f64>,
    pub jkge_aug: Option<f64>,
    pub jkge_abl1: Option<f64>,
    pub jkge_abl2: Option<f64>,
    pub jkge_musigma: Option<f64>,
    pub beta: Option<f64>,
    pub alpha: Option<f64>,
    pub rho: Option<f64>,
    #[serde(rename = "M")]
    pub m: Option<f64>,
    #[serde(rename = "V")]
    pub v: Option<f64>,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    #[serde(rename = "Mstar")]
    pub mstar: Option<f64>,
    pub alpha_star: Option<f64>,
    pub rho_star: Option<f64>,
    #[serde(rename = "Vstar")]
    pub vstar: Option<f64>,
    #[serde(rename = "Cstar")]
    pub cstar: Option<f64>,
    pub psi_s: Option<f64>,
    pub psi_o: Option<f64>,
    pub method: BenchmarkMethod,
    pub log_space: bool,
    pub n_scored: Option<usize>,
    pub eps_b_guarded: Option<usize>,
    pub eps_sigma_guarded: Option<usize>,
    pub perfect_benchmark: bool,
    #[serde(default)]
    pub reasons: BTreeMap<String, String>,
}

/// Metric and component keys in the order used by the CSV row variant.
pub const REPORT_KEYS: [&str; 22] = [
    "mse",
    "nse",
    "kge",
    "kge_ss",
    "jkge_ss",
    "jkge_aug",
    "jkge_abl1",
    "jkge_abl2",
    "jkge_musigma",
    "beta",
    "alpha",
    "rho",
    "M",
    "V",
    "C",
    "Mstar",
    "alpha_star",
    "rho_star",
    "Vstar",
    "Cstar",
    "psi_s",
    "psi_o",
];

impl FlatReport {
    pub fn value(&self, key: &str) -> Option<f64> {
        match key {
            "mse" => self.mse,
            "nse" => self.nse,
            "kge" => self.kge,
            "kge_ss" => self.kge_ss,
            "jkge_ss" => self.jkge_ss,
            "jkge_aug" => self.jkge_aug,
            "jkge_abl1" => self.jkge_abl1,
            "jkge_abl2" => self.jkge_abl2,
            "jkge_musigma" => self.jkge_musigma,
            "beta" => self.beta,
            "alpha" => self.alpha,
            "rho" => self.rho,
            "M" => self.m,
            "V" => self.v,
            "C" => self.c,
            "Mstar" => self.mstar,
            "alpha_star" => self.alpha_star,
            "rho_star" => self.rho_star,
            "Vstar" => self.vstar,
            "Cstar" => self.cstar,
            "psi_s" => self.psi_s,
            "psi_o" => self.psi_o,
            _ => None,
        }
    }

    /// Every metric/component key with its value, in [`REPORT_KEYS`] order.
    pub fn entries(&self) -> Vec<(&'static str, Option<f64>)> {
        REPORT_KEYS.iter().map(|&k| (k, self.value(k))).collect()
    }
}

/// Writes reports as CSV, one row per report, preceded by a `label` column.
pub fn write_reports_csv<W: Write>(writer: W, rows: &[(String, FlatReport)]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["label".to_string()];
    header.extend(REPORT_KEYS.iter().map(|k| k.to_string()));
    header.extend(["method", "log_space"].map(String::from));
    wtr.write_record(&header)?;
    for (label, r) in rows {
        let mut rec = vec![label.clone()];
        rec.extend(
            REPORT_KEYS
                .iter()
                .map(|k| r.value(k).map(|v| v.to_string()).unwrap_or_default()),
        );
        rec.push(r.method.to_string());
        rec.push(r.log_space.to_string());
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}
