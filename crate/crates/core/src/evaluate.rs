//! Diagnostics beyond the scalar metrics: flow-duration curves, flow-group
//! log anomalies, monthly bias, QQ pairs, moving quantiles and a water-year
//! block bootstrap of every metric.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::{Datelike, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchmark::BenchmarkMethod;
use crate::error::{Error, Result};
use crate::metrics::{full_report, FlatReport, Guards, REPORT_KEYS};
use crate::series::{PairedSeries, TimeSeries, WaterYearIndex};
use crate::stats::quantile_sorted;

/// `(exceedance probability, flow)` pairs, flows descending, Weibull plotting
/// position `i / (N + 1)`.
pub fn flow_duration_curve(s: &TimeSeries) -> Result<Vec<(f64, f64)>> {
    let mut flows: Vec<f64> = (0..s.len()).filter_map(|t| s.get(t)).collect();
    if flows.is_empty() {
        return Err(Error::degenerate("flow-duration curve of an empty series"));
    }
    flows.sort_by(|a, b| b.total_cmp(a));
    let n = flows.len() as f64;
    Ok(flows
        .into_iter()
        .enumerate()
        .map(|(i, q)| ((i + 1) as f64 / (n + 1.0), q))
        .collect())
}

pub const N_FLOW_GROUPS: usize = 5;

/// Quintile partition of the usable observed flows.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowGroupAssignment {
    /// Empirical 20/40/60/80% quantiles of observed flow.
    pub boundaries: [f64; N_FLOW_GROUPS - 1],
    /// Group index 0..5 (FG1..FG5) per position; `None` where unusable.
    pub group_of: Vec<Option<usize>>,
}

/// Assigns each usable position to a flow group. A flow equal to a boundary
/// belongs to the lower group.
pub fn flow_groups(pair: &PairedSeries) -> Result<FlowGroupAssignment> {
    let mut obs: Vec<f64> = (0..pair.len())
        .filter(|&t| pair.usable(t))
        .map(|t| pair.obs().values()[t])
        .collect();
    if obs.is_empty() {
        return Err(Error::degenerate("no usable positions for flow groups"));
    }
    obs.sort_by(f64::total_cmp);
    let mut boundaries = [0.0; N_FLOW_GROUPS - 1];
    for (k, b) in boundaries.iter_mut().enumerate() {
        *b = quantile_sorted(&obs, (k + 1) as f64 / N_FLOW_GROUPS as f64).expect("non-empty");
    }
    let group_of = (0..pair.len())
        .map(|t| {
            pair.usable(t).then(|| {
                let o = pair.obs().values()[t];
                boundaries.iter().filter(|&&b| o > b).count()
            })
        })
        .collect();
    Ok(FlowGroupAssignment {
        boundaries,
        group_of,
    })
}

/// Five-number summary plus the median absolute value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
    pub median_abs: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
        abs.sort_by(f64::total_cmp);
        let q = |p| quantile_sorted(&sorted, p).expect("non-empty");
        Some(Self {
            n: values.len(),
            min: sorted[0],
            q25: q(0.25),
            median: q(0.5),
            q75: q(0.75),
            max: sorted[sorted.len() - 1],
            median_abs: quantile_sorted(&abs, 0.5).expect("non-empty"),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAnomalies {
    /// 1-based group label (1 = lowest flows).
    pub group: usize,
    /// Observed-flow range of the group; `lower` is exclusive except for FG1.
    pub lower: f64,
    pub upper: f64,
    /// `None` when ties leave the group empty.
    pub stats: Option<Summary>,
}

/// Per flow group statistics of `ln(sim) - ln(obs)`, both floored at `floor`.
pub fn flow_group_anomalies(pair: &PairedSeries, floor: f64) -> Result<Vec<GroupAnomalies>> {
    if !(floor > 0.0) {
        return Err(Error::arg(format!("log floor must be positive, got {floor}")));
    }
    let groups = flow_groups(pair)?;
    let mut per_group: Vec<Vec<f64>> = vec![Vec::new(); N_FLOW_GROUPS];
    for (t, g) in groups.group_of.iter().enumerate() {
        if let Some(g) = g {
            let o = pair.obs().values()[t].max(floor);
            let s = pair.sim().values()[t].max(floor);
            per_group[*g].push(s.ln() - o.ln());
        }
    }
    let usable: Vec<f64> = (0..pair.len())
        .filter(|&t| pair.usable(t))
        .map(|t| pair.obs().values()[t])
        .collect();
    let lo = usable.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = usable.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(per_group
        .iter()
        .enumerate()
        .map(|(g, values)| GroupAnomalies {
            group: g + 1,
            lower: if g == 0 { lo } else { groups.boundaries[g - 1] },
            upper: if g + 1 == N_FLOW_GROUPS { hi } else { groups.boundaries[g] },
            stats: Summary::of(values),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlyBias {
    pub year: i32,
    pub month: u32,
    /// `100 * (sum sim - sum obs) / sum obs`; `None` when the observed sum is zero
    /// or the month has no usable days.
    pub bias_percent: Option<f64>,
    pub mean_obs: Option<f64>,
    pub n_days: usize,
}

/// Percent bias per calendar month over usable days.
pub fn monthly_percent_bias(pair: &PairedSeries) -> Vec<MonthlyBias> {
    let mut months: BTreeMap<(i32, u32), (f64, f64, usize)> = BTreeMap::new();
    for t in 0..pair.len() {
        let date = pair.obs().date(t);
        let entry = months.entry((date.year(), date.month())).or_default();
        if pair.usable(t) {
            entry.0 += pair.sim().values()[t];
            entry.1 += pair.obs().values()[t];
            entry.2 += 1;
        }
    }
    months
        .into_iter()
        .map(|((year, month), (sim, obs, n))| MonthlyBias {
            year,
            month,
            bias_percent: (n > 0 && obs != 0.0).then(|| 100.0 * (sim - obs) / obs),
            mean_obs: (n > 0).then(|| obs / n as f64),
            n_days: n,
        })
        .collect()
}

/// Sorted observed and simulated values paired rank by rank.
pub fn qq_data(pair: &PairedSeries) -> Vec<(f64, f64)> {
    let usable: Vec<usize> = (0..pair.len()).filter(|&t| pair.usable(t)).collect();
    let mut obs: Vec<f64> = usable.iter().map(|&t| pair.obs().values()[t]).collect();
    let mut sim: Vec<f64> = usable.iter().map(|&t| pair.sim().values()[t]).collect();
    obs.sort_by(f64::total_cmp);
    sim.sort_by(f64::total_cmp);
    obs.into_iter().zip(sim).collect()
}

/// Centered moving quantile over an odd window. Positions whose window leaves
/// the record or contains a missing day are missing.
pub fn moving_quantiles(s: &TimeSeries, n_w: usize, q: f64) -> Result<TimeSeries> {
    BenchmarkMethod::moving(n_w)?;
    if n_w > s.len() {
        return Err(Error::arg(format!(
            "window {n_w} is longer than the series ({})",
            s.len()
        )));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::arg(format!("quantile must lie in (0, 1), got {q}")));
    }
    let k = (n_w - 1) / 2;
    let mut values = vec![f64::NAN; s.len()];
    let mut missing = vec![true; s.len()];
    let mut window = Vec::with_capacity(n_w);
    for t in k..s.len() - k {
        window.clear();
        window.extend((t - k..=t + k).filter_map(|u| s.get(u)));
        if window.len() == n_w {
            window.sort_by(f64::total_cmp);
            values[t] = quantile_sorted(&window, q).expect("non-empty");
            missing[t] = false;
        }
    }
    TimeSeries::new(s.start(), values, missing, s.unit())
}

/// Quantile summary of one bootstrapped report entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapEntry {
    pub median: Option<f64>,
    pub q05: Option<f64>,
    pub q95: Option<f64>,
    /// Replicates where the entry could not be computed.
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub n_samples: usize,
    pub seed: u64,
    pub block: String,
    pub method: BenchmarkMethod,
    /// Keyed by the report keys (`kge_ss`, `Mstar`, ...).
    pub entries: BTreeMap<String, BootstrapEntry>,
}

impl BootstrapSummary {
    pub fn get(&self, key: &str) -> Option<&BootstrapEntry> {
        self.entries.get(key)
    }
}

/// Settings shared by the bootstrap functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapOptions {
    pub method: BenchmarkMethod,
    pub guards: Guards,
    pub log_space: bool,
    pub floor: f64,
}

impl BootstrapOptions {
    pub fn new(method: BenchmarkMethod) -> Self {
        Self {
            method,
            guards: Guards::default(),
            log_space: false,
            floor: crate::series::DEFAULT_LOG_FLOOR,
        }
    }
}

/// Concatenates the given water-year blocks (in draw order) into a new pair
/// that starts on the first day of the first complete water year.
pub fn resample_blocks(pair: &PairedSeries, draw: &[usize]) -> Result<PairedSeries> {
    let wy = WaterYearIndex::new(pair.obs().start(), pair.len());
    let years: Vec<_> = wy.complete_years().cloned().collect();
    let Some(first) = years.first() else {
        return Err(Error::arg("no complete water years to resample"));
    };
    let start: NaiveDate = pair.obs().date(first.range.start);
    let mut obs = Vec::new();
    let mut sim = Vec::new();
    let mut obs_missing = Vec::new();
    let mut sim_missing = Vec::new();
    for &k in draw {
        let year = years
            .get(k)
            .ok_or_else(|| Error::arg(format!("block index {k} out of range")))?;
        let r = year.range.clone();
        obs.extend_from_slice(&pair.obs().values()[r.clone()]);
        sim.extend_from_slice(&pair.sim().values()[r.clone()]);
        obs_missing.extend_from_slice(&pair.obs().missing()[r.clone()]);
        sim_missing.extend_from_slice(&pair.sim().missing()[r]);
    }
    PairedSeries::new(
        TimeSeries::new(start, obs, obs_missing, pair.obs().unit())?,
        TimeSeries::new(start, sim, sim_missing, pair.sim().unit())?,
    )
}

/// Block draws for replicate `index`: one independent ChaCha stream per
/// replicate, so results do not depend on scheduling.
pub fn replicate_draw(seed: u64, index: u64, n_blocks: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    (0..n_blocks).map(|_| rng.random_range(0..n_blocks)).collect()
}

/// Bootstrap over explicit block draws (indices into the complete water years).
pub fn bootstrap_with_draws(
    pair: &PairedSeries,
    draws: &[Vec<usize>],
    opts: &BootstrapOptions,
    seed: u64,
) -> Result<BootstrapSummary> {
    let reports: Vec<Option<FlatReport>> = draws
        .par_iter()
        .map(|draw| {
            let sample = resample_blocks(pair, draw)?;
            Ok(full_report(&sample, opts.method, opts.guards, opts.log_space, opts.floor)
                .ok()
                .map(|r| r.flat()))
        })
        .collect::<Result<_>>()?;
    let mut entries = BTreeMap::new();
    for key in REPORT_KEYS {
        let mut values: Vec<f64> = reports
            .iter()
            .filter_map(|r| r.as_ref().and_then(|r| r.value(key)))
            .filter(|v| v.is_finite())
            .collect();
        values.sort_by(f64::total_cmp);
        let q = |p| quantile_sorted(&values, p);
        entries.insert(
            key.to_string(),
            BootstrapEntry {
                median: q(0.5),
                q05: q(0.05),
                q95: q(0.95),
                skipped: draws.len() - values.len(),
            },
        );
    }
    Ok(BootstrapSummary {
        n_samples: draws.len(),
        seed,
        block: "water_year".into(),
        method: opts.method,
        entries,
    })
}

/// Water-year block bootstrap of every report entry with `n` replicates.
pub fn bootstrap_metrics(
    pair: &PairedSeries,
    n: usize,
    seed: u64,
    opts: &BootstrapOptions,
) -> Result<BootstrapSummary> {
    if n == 0 {
        return Err(Error::arg("bootstrap needs at least one replicate"));
    }
    let n_blocks = WaterYearIndex::new(pair.obs().start(), pair.len())
        .complete_years()
        .count();
    if n_blocks < 2 {
        return Err(Error::arg(format!(
            "bootstrap needs at least 2 complete water years, found {n_blocks}"
        )));
    }
    let draws: Vec<Vec<usize>> = (0..n as u64)
        .map(|i| replicate_draw(seed, i, n_blocks))
        .collect();
    bootstrap_with_draws(pair, &draws, opts, seed)
}

/// Long format: one `series,exceedance,flow` row per point of each labelled curve.
pub fn write_fdc_csv<W: Write>(writer: W, curves: &[(&str, &[(f64, f64)])]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["series", "exceedance", "flow"])?;
    for (label, fdc) in curves {
        for (p, q) in fdc.iter() {
            wtr.write_record([label.to_string(), p.to_string(), q.to_string()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_flow_groups_csv<W: Write>(writer: W, groups: &[GroupAnomalies]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record([
        "group", "lower", "upper", "n", "min", "q25", "median", "q75", "max", "median_abs",
    ])?;
    for g in groups {
        let s = g.stats;
        wtr.write_record([
            format!("FG{}", g.group),
            g.lower.to_string(),
            g.upper.to_string(),
            s.map(|s| s.n).unwrap_or(0).to_string(),
            opt(s.map(|s| s.min)),
            opt(s.map(|s| s.q25)),
            opt(s.map(|s| s.median)),
            opt(s.map(|s| s.q75)),
            opt(s.map(|s| s.max)),
            opt(s.map(|s| s.median_abs)),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_monthly_bias_csv<W: Write>(writer: W, months: &[MonthlyBias]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["month", "bias_percent", "mean_obs", "n_days"])?;
    for m in months {
        wtr.write_record([
            format!("{:04}-{:02}", m.year, m.month),
            opt(m.bias_percent),
            opt(m.mean_obs),
            m.n_days.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_qq_csv<W: Write>(writer: W, qq: &[(f64, f64)]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["obs_quantile", "sim_quantile"])?;
    for (o, s) in qq {
        wtr.write_record([o.to_string(), s.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_bootstrap_csv<W: Write>(writer: W, summary: &BootstrapSummary) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["metric", "median", "q05", "q95", "skipped"])?;
    for key in REPORT_KEYS {
        let e = summary.entries[key];
        wtr.write_record([
            key.to_string(),
            opt(e.median),
            opt(e.q05),
            opt(e.q95),
            e.skipped.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a file written by [`write_bootstrap_csv`].
pub fn read_bootstrap_csv<R: std::io::Read>(reader: R) -> Result<BTreeMap<String, BootstrapEntry>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let parse = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse()
                .map(Some)
                .map_err(|_| Error::arg(format!("invalid number '{s}'")))
        }
    };
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        out.insert(
            field(0).to_string(),
            BootstrapEntry {
                median: parse(field(1))?,
                q05: parse(field(2))?,
                q95: parse(field(3))?,
                skipped: field(4)
                    .parse()
                    .map_err(|_| Error::arg(format!("invalid count '{}'", field(4))))?,
            },
        );
    }
    Ok(out)
}
