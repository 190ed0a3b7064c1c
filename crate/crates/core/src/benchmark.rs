//! Time-varying benchmark series: long-term mean, section-wise means and
//! centered moving means, plus segment standard deviations and standardized
//! log anomalies.
//!
//! Every constructor is a linear map of the input values, which the gradient
//! code relies on through [`adjoint`].

use std::fmt;
use std::io::Write;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{TimeSeries, Unit};
use crate::stats::shifted_mean;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum BenchmarkMethod {
    /// Long-term mean of the whole record.
    Ltm,
    /// Piecewise-constant means over consecutive sections of this many days.
    SectionMean(usize),
    /// Centered running mean over an odd window of this many days.
    MovingMean(usize),
}

impl BenchmarkMethod {
    pub fn section(n_s: usize) -> Result<Self> {
        if n_s == 0 {
            return Err(Error::arg("section length must be at least 1"));
        }
        Ok(Self::SectionMean(n_s))
    }

    pub fn moving(n_w: usize) -> Result<Self> {
        if n_w % 2 == 0 {
            return Err(Error::arg(format!(
                "moving-average window must be odd so the current day sits at its center, got {n_w}"
            )));
        }
        Ok(Self::MovingMean(n_w))
    }

    fn validate(self) -> Result<Self> {
        match self {
            Self::Ltm => Ok(self),
            Self::SectionMean(n) => Self::section(n),
            Self::MovingMean(n) => Self::moving(n),
        }
    }
}

impl fmt::Display for BenchmarkMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Ltm => f.write_str("ltm"),
            Self::SectionMean(n) => write!(f, "sa:{n}"),
            Self::MovingMean(n) => write!(f, "ma:{n}"),
        }
    }
}

impl FromStr for BenchmarkMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("ltm") {
            return Ok(Self::Ltm);
        }
        let Some((kind, n)) = s.split_once(':') else {
            return Err(Error::arg(format!(
                "benchmark method '{s}' must be ltm, sa:N or ma:N"
            )));
        };
        let n: usize = n
            .parse()
            .map_err(|_| Error::arg(format!("benchmark length '{n}' is not a positive integer")))?;
        match kind.to_ascii_lowercase().as_str() {
            "sa" => Self::section(n),
            "ma" => Self::moving(n),
            _ => Err(Error::arg(format!(
                "benchmark method '{s}' must be ltm, sa:N or ma:N"
            ))),
        }
    }
}

impl TryFrom<String> for BenchmarkMethod {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<BenchmarkMethod> for String {
    fn from(m: BenchmarkMethod) -> Self {
        m.to_string()
    }
}

/// Benchmark values `b_t` aligned with the source series.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSeries {
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
    pub method: BenchmarkMethod,
}

impl BenchmarkSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, t: usize) -> Option<f64> {
        self.valid[t].then(|| self.values[t])
    }

    pub fn count_valid(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }
}

/// Per-position anomaly standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaSeries {
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
    pub method: BenchmarkMethod,
}

/// Index ranges over which section-type benchmarks are constant. The long-term
/// mean is a single section covering the record.
pub(crate) fn sections(method: BenchmarkMethod, len: usize) -> Option<Vec<Range<usize>>> {
    match method {
        BenchmarkMethod::Ltm => Some(vec![0..len]),
        BenchmarkMethod::SectionMean(n_s) => Some(
            (0..len)
                .step_by(n_s)
                .map(|start| start..(start + n_s).min(len))
                .collect(),
        ),
        BenchmarkMethod::MovingMean(_) => None,
    }
}

/// Builds a benchmark from raw values, using only positions flagged `present`.
pub fn build(values: &[f64], present: &[bool], method: BenchmarkMethod) -> Result<BenchmarkSeries> {
    let method = method.validate()?;
    let len = values.len();
    if len != present.len() {
        return Err(Error::arg("values and presence mask differ in length"));
    }
    if len == 0 {
        return Err(Error::arg("cannot build a benchmark from an empty series"));
    }
    let mut out = vec![f64::NAN; len];
    let mut valid = vec![false; len];
    match method {
        BenchmarkMethod::Ltm | BenchmarkMethod::SectionMean(_) => {
            for range in sections(method, len).expect("section method") {
                let mean = shifted_mean(range.clone().filter(|&t| present[t]).map(|t| values[t]));
                if let Some(mean) = mean {
                    out[range.clone()].fill(mean);
                    valid[range].fill(true);
                }
            }
            if method == BenchmarkMethod::Ltm && !valid[0] {
                return Err(Error::arg("long-term mean of an all-missing series"));
            }
        }
        BenchmarkMethod::MovingMean(n_w) => {
            if n_w > len {
                return Err(Error::arg(format!(
                    "moving-average window {n_w} exceeds series length {len}"
                )));
            }
            let k = (n_w - 1) / 2;
            for t in k..len - k {
                let window = t - k..t + k + 1;
                if window.clone().all(|i| present[i]) {
                    out[t] = shifted_mean(window.map(|i| values[i])).expect("non-empty window");
                    valid[t] = true;
                }
            }
        }
    }
    Ok(BenchmarkSeries {
        values: out,
        valid,
        method,
    })
}

/// Applies the transpose of the benchmark operator to `h`, where `h` is zero
/// outside the positions that enter the metric.
///
/// For sections, `∂b_t/∂s_u = 1/c_k` for present `u` in the same section
/// (`c_k` present days); for moving means, `1/N_w` for `u` in the window of `t`.
pub(crate) fn adjoint(method: BenchmarkMethod, present: &[bool], h: &[f64]) -> Vec<f64> {
    let len = h.len();
    let mut out = vec![0.0; len];
    match method {
        BenchmarkMethod::Ltm | BenchmarkMethod::SectionMean(_) => {
            for range in sections(method, len).expect("section method") {
                let count = range.clone().filter(|&t| present[t]).count();
                if count == 0 {
                    continue;
                }
                let share = range.clone().map(|t| h[t]).sum::<f64>() / count as f64;
                for u in range.filter(|&u| present[u]) {
                    out[u] = share;
                }
            }
        }
        BenchmarkMethod::MovingMean(n_w) => {
            let k = (n_w - 1) / 2;
            let mut prefix = vec![0.0; len + 1];
            for t in 0..len {
                prefix[t + 1] = prefix[t] + h[t];
            }
            for u in (0..len).filter(|&u| present[u]) {
                let lo = u.saturating_sub(k);
                let hi = (u + k + 1).min(len);
                out[u] = (prefix[hi] - prefix[lo]) / n_w as f64;
            }
        }
    }
    out
}

pub fn benchmark(s: &TimeSeries, method: BenchmarkMethod) -> Result<BenchmarkSeries> {
    build(s.values(), &s.present(), method)
}

pub fn ltm_benchmark(s: &TimeSeries) -> Result<BenchmarkSeries> {
    benchmark(s, BenchmarkMethod::Ltm)
}

pub fn section_mean(s: &TimeSeries, n_s: usize) -> Result<BenchmarkSeries> {
    benchmark(s, BenchmarkMethod::section(n_s)?)
}

pub fn moving_mean(s: &TimeSeries, n_w: usize) -> Result<BenchmarkSeries> {
    benchmark(s, BenchmarkMethod::moving(n_w)?)
}

/// Anomaly standard deviation per section (broadcast) or per window.
pub(crate) fn sigma_values(
    values: &[f64],
    present: &[bool],
    b: &BenchmarkSeries,
) -> Result<SigmaSeries> {
    let len = values.len();
    if b.len() != len || present.len() != len {
        return Err(Error::arg("benchmark length differs from series length"));
    }
    let mut out = vec![f64::NAN; len];
    match b.method {
        BenchmarkMethod::Ltm | BenchmarkMethod::SectionMean(_) => {
            for range in sections(b.method, len).expect("section method") {
                let (sum, count) = range.clone().filter(|&t| present[t] && b.valid[t]).fold(
                    (0.0, 0usize),
                    |(s, c), t| {
                        let a = values[t] - b.values[t];
                        (s + a * a, c + 1)
                    },
                );
                if count > 0 {
                    out[range].fill((sum / count as f64).sqrt());
                }
            }
        }
        BenchmarkMethod::MovingMean(n_w) => {
            let k = (n_w - 1) / 2;
            for t in (0..len).filter(|&t| b.valid[t]) {
                let sum: f64 = (t - k..=t + k)
                    .map(|i| {
                        let a = values[i] - b.values[t];
                        a * a
                    })
                    .sum();
                out[t] = (sum / n_w as f64).sqrt();
            }
        }
    }
    Ok(SigmaSeries {
        values: out,
        valid: b.valid.clone(),
        method: b.method,
    })
}

pub fn segment_sigma(s: &TimeSeries, b: &BenchmarkSeries) -> Result<SigmaSeries> {
    sigma_values(s.values(), &s.present(), b)
}

/// Standardized anomalies of log flow about a benchmark, scaled to unit RMS.
///
/// Both the series and the benchmark are floored before taking logs.
pub fn standardized_log_anomalies(
    o: &TimeSeries,
    b: &BenchmarkSeries,
    floor: f64,
) -> Result<TimeSeries> {
    if !(floor > 0.0) {
        return Err(Error::arg(format!(
            "log floor must be positive, got {floor}"
        )));
    }
    if b.len() != o.len() {
        return Err(Error::arg("benchmark length differs from series length"));
    }
    let anomalies: Vec<Option<f64>> = (0..o.len())
        .map(|t| match (o.get(t), b.get(t)) {
            (Some(v), Some(bt)) => Some(v.max(floor).ln() - bt.max(floor).ln()),
            _ => None,
        })
        .collect();
    let (sum_sq, n) = anomalies
        .iter()
        .flatten()
        .fold((0.0, 0usize), |(s, n), a| (s + a * a, n + 1));
    if n == 0 {
        return Err(Error::degenerate("no valid positions for log anomalies"));
    }
    let psi = (sum_sq / n as f64).sqrt();
    if psi == 0.0 {
        return Err(Error::degenerate(
            "log anomalies are identically zero; cannot standardize",
        ));
    }
    let z: Vec<Option<f64>> = anomalies.iter().map(|a| a.map(|a| a / psi)).collect();
    TimeSeries::from_options(o.start(), &z, Unit::Dimensionless)
}

/// Writes `date,value,benchmark,valid` rows.
pub fn write_benchmark_csv<W: Write>(writer: W, s: &TimeSeries, b: &BenchmarkSeries) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["date", "value", "benchmark", "valid"])?;
    for t in 0..s.len() {
        wtr.write_record([
            s.date(t).to_string(),
            s.get(t).map(|v| v.to_string()).unwrap_or_default(),
            b.get(t).map(|v| v.to_string()).unwrap_or_default(),
            b.valid[t].to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn ts(values: &[f64]) -> TimeSeries {
        TimeSeries::complete(
            NaiveDate::from_ymd_opt(2003, 10, 1).unwrap(),
            values.to_vec(),
            Unit::MmPerDay,
        )
        .unwrap()
    }

    #[test]
    fn method_strings() {
        assert_eq!(
            "ltm".parse::<BenchmarkMethod>().unwrap(),
            BenchmarkMethod::Ltm
        );
        assert_eq!(
            "sa:30".parse::<BenchmarkMethod>().unwrap(),
            BenchmarkMethod::SectionMean(30)
        );
        assert_eq!(
            "ma:31".parse::<BenchmarkMethod>().unwrap(),
            BenchmarkMethod::MovingMean(31)
        );
        let err = "ma:30".parse::<BenchmarkMethod>().unwrap_err().to_string();
        assert!(err.contains("odd"), "{err}");
        assert!("sa:0".parse::<BenchmarkMethod>().is_err());
        assert!("sa:x".parse::<BenchmarkMethod>().is_err());
        assert!("foo".parse::<BenchmarkMethod>().is_err());
        for m in ["ltm", "sa:7", "ma:181"] {
            assert_eq!(m.parse::<BenchmarkMethod>().unwrap().to_string(), m);
        }
    }

    #[test]
    fn ltm_examples() {
        assert_eq!(
            ltm_benchmark(&ts(&[1.0, 2.0, 3.0])).unwrap().values,
            vec![2.0; 3]
        );
        assert_eq!(ltm_benchmark(&ts(&[5.0])).unwrap().values, vec![5.0]);
        let gap = TimeSeries::from_options(
            NaiveDate::from_ymd_opt(2003, 10, 1).unwrap(),
            &[Some(1.0), None, Some(3.0)],
            Unit::MmPerDay,
        )
        .unwrap();
        let b = ltm_benchmark(&gap).unwrap();
        assert_eq!(b.values, vec![2.0; 3]);
        assert!(b.valid.iter().all(|v| *v));
        let empty = TimeSeries::from_options(
            NaiveDate::from_ymd_opt(2003, 10, 1).unwrap(),
            &[None, None],
            Unit::MmPerDay,
        )
        .unwrap();
        assert!(ltm_benchmark(&empty).is_err());
    }

    #[test]
    fn section_examples() {
        let s = ts(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(
            section_mean(&s, 3).unwrap().values,
            vec![2.0, 2.0, 2.0, 5.0, 5.0, 5.0]
        );
        assert_eq!(
            section_mean(&s, 6).unwrap(),
            BenchmarkSeries {
                method: BenchmarkMethod::SectionMean(6),
                ..ltm_benchmark(&s).unwrap()
            }
        );
        assert_eq!(
            section_mean(&s, 10).unwrap().values,
            ltm_benchmark(&s).unwrap().values
        );
        assert_eq!(section_mean(&s, 1).unwrap().values, s.values());
        // partial final section gets its own mean
        assert_eq!(
            section_mean(&s, 4).unwrap().values,
            vec![2.5, 2.5, 2.5, 2.5, 5.5, 5.5]
        );
    }

    #[test]
    fn fully_missing_section_is_invalid() {
        let s = TimeSeries::from_options(
            NaiveDate::from_ymd_opt(2003, 10, 1).unwrap(),
            &[Some(1.0), Some(3.0), None, None],
            Unit::MmPerDay,
        )
        .unwrap();
        let b = section_mean(&s, 2).unwrap();
        assert_eq!(b.valid, vec![true, true, false, false]);
        assert_eq!(b.get(0), Some(2.0));
    }

    #[test]
    fn moving_examples() {
        let b = moving_mean(&ts(&[1.0, 2.0, 3.0, 4.0, 5.0]), 3).unwrap();
        assert_eq!(b.valid, vec![false, true, true, true, false]);
        assert_eq!(&b.values[1..4], &[2.0, 3.0, 4.0]);

        let s = ts(&[1.0, 7.0, 3.0]);
        let id = moving_mean(&s, 1).unwrap();
        assert_eq!(id.values, s.values());
        assert!(id.valid.iter().all(|v| *v));

        let b = moving_mean(&ts(&[1.0; 20]), 7).unwrap();
        let invalid: Vec<usize> = (0..20).filter(|&t| !b.valid[t]).collect();
        assert_eq!(invalid, vec![0, 1, 2, 17, 18, 19]);

        assert!(moving_mean(&ts(&[1.0; 4]), 2).is_err());
        assert!(moving_mean(&ts(&[1.0; 4]), 5).is_err());
    }

    #[test]
    fn sigma_examples() {
        let c = ts(&[4.0; 6]);
        let b = section_mean(&c, 3).unwrap();
        assert!(segment_sigma(&c, &b)
            .unwrap()
            .values
            .iter()
            .all(|v| *v == 0.0));

        let s = ts(&[0.0, 2.0]);
        let b = section_mean(&s, 2).unwrap();
        assert_eq!(b.values, vec![1.0, 1.0]);
        assert_eq!(segment_sigma(&s, &b).unwrap().values, vec![1.0, 1.0]);

        let s = ts(&[0.0, 2.0, 5.0]);
        let b = section_mean(&s, 2).unwrap();
        assert_eq!(segment_sigma(&s, &b).unwrap().values[2], 0.0);

        let s = ts(&[0.0, 2.0, 0.0, 2.0]);
        let b = moving_mean(&s, 3).unwrap();
        let sig = segment_sigma(&s, &b).unwrap();
        assert!(!sig.valid[0] && sig.valid[1]);
        // window [0,2,0] about 2/3
        let expected = (((2.0f64 / 3.0).powi(2) * 2.0 + (4.0f64 / 3.0).powi(2)) / 3.0).sqrt();
        assert!((sig.values[1] - expected).abs() < 1e-15);
    }

    #[test]
    fn log_anomaly_examples() {
        let o = ts(&[3.0, 4.0]);
        let b = section_mean(&ts(&[3.0, 4.0]), 1).unwrap();
        assert!(matches!(
            standardized_log_anomalies(&o, &b, 1e-6),
            Err(Error::Degenerate(_))
        ));

        let o = ts(&[std::f64::consts::E, 1.0]);
        let b = BenchmarkSeries {
            values: vec![1.0, 1.0],
            valid: vec![true, true],
            method: BenchmarkMethod::SectionMean(2),
        };
        let z = standardized_log_anomalies(&o, &b, 1e-6).unwrap();
        assert!((z.get(0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(z.get(1), Some(0.0));
    }

    fn rms(z: &TimeSeries) -> f64 {
        let vals: Vec<f64> = (0..z.len()).filter_map(|t| z.get(t)).collect();
        (vals.iter().map(|v| v * v).sum::<f64>() / vals.len() as f64).sqrt()
    }

    #[test]
    fn adjoint_matches_dense_jacobian() {
        let values = [1.0, 4.0, 2.0, 8.0, 5.0, 7.0, 3.0];
        let present = [true, true, false, true, true, true, true];
        for method in [
            BenchmarkMethod::Ltm,
            BenchmarkMethod::SectionMean(3),
            BenchmarkMethod::MovingMean(3),
        ] {
            let base = build(&values, &present, method).unwrap();
            let h: Vec<f64> = (0..7)
                .map(|t| {
                    if base.valid[t] && present[t] {
                        (t as f64) - 2.5
                    } else {
                        0.0
                    }
                })
                .collect();
            let adj = adjoint(method, &present, &h);
            for u in 0..7 {
                let mut bumped = values;
                bumped[u] += 1.0;
                let b2 = build(&bumped, &present, method).unwrap();
                let dense: f64 = (0..7)
                    .filter(|&t| h[t] != 0.0)
                    .map(|t| (b2.values[t] - base.values[t]) * h[t])
                    .sum();
                assert!(
                    (dense - adj[u]).abs() < 1e-12,
                    "{method} u={u}: {dense} vs {}",
                    adj[u]
                );
            }
        }
    }

    proptest! {
        #[test]
        fn section_anomalies_have_zero_mean(values in prop::collection::vec(-50.0f64..50.0, 1..80), n_s in 1usize..20) {
            let s = ts(&values);
            let b = section_mean(&s, n_s).unwrap();
            for range in sections(b.method, values.len()).unwrap() {
                let m: f64 = range.clone().map(|t| values[t] - b.values[t]).sum::<f64>() / range.len() as f64;
                prop_assert!(m.abs() < 1e-12);
            }
        }

        #[test]
        fn section_mean_is_idempotent(values in prop::collection::vec(0.0f64..50.0, 1..80), n_s in 1usize..20) {
            let b = section_mean(&ts(&values), n_s).unwrap();
            let again = section_mean(&ts(&b.values), n_s).unwrap();
            prop_assert_eq!(again.values, b.values);
        }

        #[test]
        fn moving_mean_is_shift_equivariant(values in prop::collection::vec(-10.0f64..10.0, 10..60), half in 0usize..4) {
            let n_w = 2 * half + 1;
            let b = moving_mean(&ts(&values), n_w).unwrap();
            let shifted = moving_mean(&ts(&values[1..]), n_w).unwrap();
            for t in 0..shifted.len() {
                if shifted.valid[t] {
                    prop_assert!(b.valid[t + 1]);
                    prop_assert!((shifted.values[t] - b.values[t + 1]).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn constructors_are_affine(values in prop::collection::vec(-10.0f64..10.0, 9..60), a in 0.1f64..5.0, c in -5.0f64..5.0) {
            let scaled: Vec<f64> = values.iter().map(|v| a * v + c).collect();
            for method in [BenchmarkMethod::Ltm, BenchmarkMethod::SectionMean(4), BenchmarkMethod::MovingMean(5)] {
                let b = benchmark(&ts(&values), method).unwrap();
                let bs = benchmark(&ts(&scaled), method).unwrap();
                for t in 0..values.len() {
                    if b.valid[t] {
                        prop_assert!((bs.values[t] - (a * b.values[t] + c)).abs() < 1e-9);
                    }
                }
            }
        }

        #[test]
        fn log_anomalies_have_unit_rms(values in prop::collection::vec(0.01f64..100.0, 4..100), n_s in 2usize..10) {
            let s = ts(&values);
            let b = section_mean(&s, n_s).unwrap();
            if let Ok(z) = standardized_log_anomalies(&s, &b, 1e-6) {
                prop_assert!((rms(&z) - 1.0).abs() < 1e-12);
            }
        }
    }
}
