//! Daily time series: representation, CSV ingestion, unit conversion,
//! water-year calendar, train/eval splitting and spin-up construction.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cubic feet per second to cubic metres per second (exact, international foot).
const CFS_TO_M3S: f64 = 0.028_316_846_592;
const SECONDS_PER_DAY: f64 = 86_400.0;

/// Default floor applied before taking logarithms of flows (mm/day).
pub const DEFAULT_LOG_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    Cfs,
    MmPerDay,
    LogMmPerDay,
    Dimensionless,
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Unit::Cfs => "cfs",
            Unit::MmPerDay => "mm_per_day",
            Unit::LogMmPerDay => "log_mm_per_day",
            Unit::Dimensionless => "dimensionless",
        };
        f.write_str(s)
    }
}

impl FromStr for Unit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cfs" => Ok(Unit::Cfs),
            "mm_per_day" | "mm/day" | "mm" => Ok(Unit::MmPerDay),
            "log_mm_per_day" => Ok(Unit::LogMmPerDay),
            "dimensionless" => Ok(Unit::Dimensionless),
            other => Err(Error::arg(format!("unknown unit '{other}'"))),
        }
    }
}

/// A daily-stepped real-valued signal with a missing-value mask.
///
/// Index `t` corresponds to `start + t` days. Missing positions hold `NaN`.
#[derive(Debug, Clone)]
pub struct TimeSeries {
    start: NaiveDate,
    values: Vec<f64>,
    missing: Vec<bool>,
    unit: Unit,
}

impl TimeSeries {
    pub fn new(start: NaiveDate, values: Vec<f64>, missing: Vec<bool>, unit: Unit) -> Result<Self> {
        if values.len() != missing.len() {
            return Err(Error::arg(format!(
                "values ({}) and missing mask ({}) differ in length",
                values.len(),
                missing.len()
            )));
        }
        let mut values = values;
        for (t, (v, &m)) in values.iter_mut().zip(&missing).enumerate() {
            if m {
                *v = f64::NAN;
            } else if !v.is_finite() {
                return Err(Error::arg(format!("non-finite value at index {t}")));
            }
        }
        Ok(Self {
            start,
            values,
            missing,
            unit,
        })
    }

    /// A series with no missing values.
    pub fn complete(start: NaiveDate, values: Vec<f64>, unit: Unit) -> Result<Self> {
        let missing = vec![false; values.len()];
        Self::new(start, values, missing, unit)
    }

    /// Builds a series from optional values; `None` marks a missing day.
    pub fn from_options(start: NaiveDate, values: &[Option<f64>], unit: Unit) -> Result<Self> {
        let missing = values.iter().map(Option::is_none).collect();
        let values = values.iter().map(|v| v.unwrap_or(f64::NAN)).collect();
        Self::new(start, values, missing, unit)
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Raw values; missing positions are `NaN`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn missing(&self) -> &[bool] {
        &self.missing
    }

    /// `true` where the value is present.
    pub fn present(&self) -> Vec<bool> {
        self.missing.iter().map(|m| !m).collect()
    }

    pub fn get(&self, t: usize) -> Option<f64> {
        match self.missing.get(t) {
            Some(false) => Some(self.values[t]),
            _ => None,
        }
    }

    pub fn date(&self, t: usize) -> NaiveDate {
        self.start + Duration::days(t as i64)
    }

    pub fn end(&self) -> NaiveDate {
        self.date(self.len().saturating_sub(1))
    }

    pub fn count_present(&self) -> usize {
        self.missing.iter().filter(|m| !**m).count()
    }

    pub fn with_unit(mut self, unit: Unit) -> Self {
        self.unit = unit;
        self
    }

    /// Applies `f` to every present value, keeping the mask.
    pub fn map(&self, unit: Unit, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = self
            .values
            .iter()
            .zip(&self.missing)
            .map(|(&v, &m)| if m { f64::NAN } else { f(v) })
            .collect();
        Self::new(self.start, values, self.missing.clone(), unit)
    }

    /// Sub-series over `range`, re-anchored at its first date.
    pub fn slice(&self, range: Range<usize>) -> Result<Self> {
        if range.end > self.len() || range.start > range.end {
            return Err(Error::arg(format!(
                "slice {range:?} out of bounds for length {}",
                self.len()
            )));
        }
        Self::new(
            self.date(range.start),
            self.values[range.clone()].to_vec(),
            self.missing[range].to_vec(),
            self.unit,
        )
    }

    /// Marks every position where `keep` is false as missing.
    pub fn masked(&self, keep: &[bool]) -> Result<Self> {
        if keep.len() != self.len() {
            return Err(Error::arg("mask length differs from series length"));
        }
        let missing = self
            .missing
            .iter()
            .zip(keep)
            .map(|(&m, &k)| m || !k)
            .collect();
        Self::new(self.start, self.values.clone(), missing, self.unit)
    }

    pub fn water_years(&self) -> WaterYearIndex {
        WaterYearIndex::new(self.start, self.len())
    }
}

impl PartialEq for TimeSeries {
    fn eq(&self, other: &Self) -> bool {
        self.start == other.start
            && self.unit == other.unit
            && self.missing == other.missing
            && (0..self.len()).all(|t| self.get(t) == other.get(t))
    }
}

/// Observed and simulated series over the same days.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSeries {
    obs: TimeSeries,
    sim: TimeSeries,
}

impl PairedSeries {
    pub fn new(obs: TimeSeries, sim: TimeSeries) -> Result<Self> {
        if obs.start != sim.start {
            return Err(Error::arg(format!(
                "obs starts {} but sim starts {}",
                obs.start, sim.start
            )));
        }
        if obs.len() != sim.len() {
            return Err(Error::arg(format!(
                "obs has {} values but sim has {}",
                obs.len(),
                sim.len()
            )));
        }
        if obs.unit != sim.unit {
            return Err(Error::arg(format!(
                "obs unit {} differs from sim unit {}",
                obs.unit, sim.unit
            )));
        }
        Ok(Self { obs, sim })
    }

    /// Convenience constructor for complete series starting on an arbitrary date.
    pub fn from_values(obs: &[f64], sim: &[f64]) -> Result<Self> {
        let start = NaiveDate::from_ymd_opt(2000, 10, 1).expect("valid date");
        Self::new(
            TimeSeries::complete(start, obs.to_vec(), Unit::MmPerDay)?,
            TimeSeries::complete(start, sim.to_vec(), Unit::MmPerDay)?,
        )
    }

    pub fn obs(&self) -> &TimeSeries {
        &self.obs
    }

    pub fn sim(&self) -> &TimeSeries {
        &self.sim
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    pub fn usable(&self, t: usize) -> bool {
        !self.obs.missing[t] && !self.sim.missing[t]
    }

    /// Joint mask: `true` where both series are present.
    pub fn usable_mask(&self) -> Vec<bool> {
        (0..self.len()).map(|t| self.usable(t)).collect()
    }

    pub fn with_sim_values(&self, sim: Vec<f64>) -> Result<Self> {
        let sim = TimeSeries::new(self.sim.start, sim, self.sim.missing.clone(), self.sim.unit)?;
        Self::new(self.obs.clone(), sim)
    }

    pub fn map(&self, unit: Unit, f: impl Fn(f64) -> f64 + Copy) -> Result<Self> {
        Self::new(self.obs.map(unit, f)?, self.sim.map(unit, f)?)
    }

    pub fn slice(&self, range: Range<usize>) -> Result<Self> {
        Self::new(self.obs.slice(range.clone())?, self.sim.slice(range)?)
    }

    pub fn masked(&self, keep: &[bool]) -> Result<Self> {
        Self::new(self.obs.masked(keep)?, self.sim.masked(keep)?)
    }
}

/// One water year (Oct 1 of `label - 1` through Sep 30 of `label`) within a series.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WaterYear {
    pub label: i32,
    pub range: Range<usize>,
    pub complete: bool,
}

/// Maps day indices of a series onto water years.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WaterYearIndex {
    years: Vec<WaterYear>,
}

pub fn water_year_of(date: NaiveDate) -> i32 {
    if date.month() >= 10 {
        date.year() + 1
    } else {
        date.year()
    }
}

fn water_year_start(label: i32) -> NaiveDate {
    NaiveDate::from_ymd_opt(label - 1, 10, 1).expect("valid water-year start")
}

impl WaterYearIndex {
    pub fn new(start: NaiveDate, len: usize) -> Self {
        let mut years: Vec<WaterYear> = Vec::new();
        let mut t = 0;
        while t < len {
            let date = start + Duration::days(t as i64);
            let label = water_year_of(date);
            let first = water_year_start(label);
            let next = water_year_start(label + 1);
            let year_len = (next - first).num_days() as usize;
            let offset = (date - first).num_days() as usize;
            let end = (t + year_len - offset).min(len);
            years.push(WaterYear {
                label,
                range: t..end,
                complete: offset == 0 && end - t == year_len,
            });
            t = end;
        }
        Self { years }
    }

    pub fn years(&self) -> &[WaterYear] {
        &self.years
    }

    pub fn complete_years(&self) -> impl Iterator<Item = &WaterYear> {
        self.years.iter().filter(|y| y.complete)
    }

    pub fn year_of(&self, t: usize) -> Option<i32> {
        self.years
            .iter()
            .find(|y| y.range.contains(&t))
            .map(|y| y.label)
    }

    pub fn get(&self, label: i32) -> Option<&WaterYear> {
        self.years.iter().find(|y| y.label == label)
    }

    /// Boolean mask selecting the days of the given water years.
    pub fn mask_for(&self, labels: &BTreeSet<i32>, len: usize) -> Vec<bool> {
        let mut mask = vec![false; len];
        for y in self.years.iter().filter(|y| labels.contains(&y.label)) {
            mask[y.range.clone()].iter_mut().for_each(|m| *m = true);
        }
        mask
    }
}

/// Column names used when reading a daily CSV file.
#[derive(Debug, Clone)]
pub struct ColumnSpec {
    pub date: String,
    pub value: String,
    pub unit: Unit,
}

impl Default for ColumnSpec {
    fn default() -> Self {
        Self {
            date: "date".into(),
            value: "value".into(),
            unit: Unit::MmPerDay,
        }
    }
}

pub fn load_daily_csv(path: impl AsRef<Path>, columns: &ColumnSpec) -> Result<TimeSeries> {
    let file = std::fs::File::open(path)?;
    read_daily_csv(file, columns)
}

/// Reads a header-bearing CSV with an ISO-8601 date column and a numeric
/// value column. Absent dates and empty values become missing days.
pub fn read_daily_csv<R: Read>(reader: R, columns: &ColumnSpec) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Ingest {
                row: 1,
                msg: format!("missing column '{name}'"),
            })
    };
    let date_col = find(&columns.date)?;
    let value_col = find(&columns.value)?;

    let mut rows: BTreeMap<NaiveDate, Option<f64>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        let row = record.position().map(|p| p.line()).unwrap_or(0);
        let date_field = record.get(date_col).unwrap_or("");
        let date =
            NaiveDate::parse_from_str(date_field, "%Y-%m-%d").map_err(|e| Error::Ingest {
                row,
                msg: format!("invalid date '{date_field}': {e}"),
            })?;
        let value_field = record.get(value_col).unwrap_or("");
        let value = if value_field.is_empty() {
            None
        } else {
            let v: f64 = value_field.parse().map_err(|_| Error::Ingest {
                row,
                msg: format!("invalid number '{value_field}'"),
            })?;
            if !v.is_finite() {
                return Err(Error::Ingest {
                    row,
                    msg: format!("non-finite value '{value_field}'"),
                });
            }
            Some(v)
        };
        if rows.insert(date, value).is_some() {
            return Err(Error::Ingest {
                row,
                msg: format!("duplicate date {date}"),
            });
        }
    }

    let (Some((&first, _)), Some((&last, _))) = (rows.first_key_value(), rows.last_key_value())
    else {
        return Err(Error::Ingest {
            row: 1,
            msg: "no data rows".into(),
        });
    };
    let len = (last - first).num_days() as usize + 1;
    let mut values = vec![None; len];
    for (date, v) in rows {
        values[(date - first).num_days() as usize] = v;
    }
    TimeSeries::from_options(first, &values, columns.unit)
}

/// Writes `date,value` rows; missing days get an empty value field.
pub fn write_daily_csv<W: Write>(writer: W, series: &TimeSeries) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["date", "value"])?;
    for t in 0..series.len() {
        let value = series.get(t).map(|v| v.to_string()).unwrap_or_default();
        wtr.write_record([series.date(t).to_string(), value])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Converts discharge in cubic feet per second to depth in mm/day over the catchment.
pub fn convert_discharge_to_depth(q: &TimeSeries, area_km2: f64) -> Result<TimeSeries> {
    if q.unit() != Unit::Cfs {
        return Err(Error::arg(format!("expected cfs input, got {}", q.unit())));
    }
    if !(area_km2 > 0.0 && area_km2.is_finite()) {
        return Err(Error::arg(format!(
            "catchment area must be positive, got {area_km2}"
        )));
    }
    // m3/day -> mm over area_km2 * 1e6 m2
    let factor = CFS_TO_M3S * SECONDS_PER_DAY * 1000.0 / (area_km2 * 1e6);
    q.map(Unit::MmPerDay, |v| v * factor)
}

pub fn log_transform(s: &TimeSeries, floor: f64) -> Result<TimeSeries> {
    if !(floor > 0.0) {
        return Err(Error::arg(format!(
            "log floor must be positive, got {floor}"
        )));
    }
    s.map(Unit::LogMmPerDay, |v| v.max(floor).ln())
}

/// Water years assigned to training and evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearSplit {
    pub train: BTreeSet<i32>,
    pub eval: BTreeSet<i32>,
}

/// Year-stratified split: complete water years are ranked by accumulated
/// flow, paired wettest-with-driest, and the pairs dealt in rotation
/// train, eval, train, ... until the evaluation quota is met.
pub fn split_train_eval(
    series: &TimeSeries,
    wy: &WaterYearIndex,
    train_fraction: f64,
) -> Result<YearSplit> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::arg(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut totals: Vec<(i32, f64)> = wy
        .complete_years()
        .map(|y| {
            let total = y.range.clone().filter_map(|t| series.get(t)).sum();
            (y.label, total)
        })
        .collect();
    if totals.len() % 2 != 0 {
        return Err(Error::arg(format!(
            "split needs an even number of complete water years, found {}",
            totals.len()
        )));
    }
    if totals.len() < 4 {
        return Err(Error::arg(format!(
            "split needs at least 4 complete water years, found {}",
            totals.len()
        )));
    }
    // wettest first; ties go to the earlier year
    totals.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let n_pairs = totals.len() / 2;
    let eval_quota = ((1.0 - train_fraction) * n_pairs as f64 - 1e-9).ceil() as usize;
    let mut split = YearSplit {
        train: BTreeSet::new(),
        eval: BTreeSet::new(),
    };
    let mut eval_pairs = 0;
    for i in 0..n_pairs {
        let pair = [totals[i].0, totals[totals.len() - 1 - i].0];
        if i % 2 == 1 && eval_pairs < eval_quota {
            eval_pairs += 1;
            split.eval.extend(pair);
        } else {
            split.train.extend(pair);
        }
    }
    Ok(split)
}

/// Forcings extended with a repeated first water year, and the index where scoring starts.
#[derive(Debug, Clone)]
pub struct SpunUp {
    pub series: Vec<TimeSeries>,
    pub offset: usize,
}

/// Prepends `n_repeats` copies of the first complete water year of the forcings.
pub fn spinup_prepend(forcings: &[TimeSeries], n_repeats: usize) -> Result<SpunUp> {
    let Some(first) = forcings.first() else {
        return Err(Error::arg("no forcing series given"));
    };
    if forcings
        .iter()
        .any(|f| f.start() != first.start() || f.len() != first.len())
    {
        return Err(Error::arg("forcing series are not aligned"));
    }
    let wy = first.water_years();
    let Some(year) = wy.complete_years().next().cloned() else {
        return Err(Error::arg(
            "spin-up needs at least one complete water year of forcings",
        ));
    };
    let year_len = year.range.len();
    let offset = n_repeats * year_len;
    let series = forcings
        .iter()
        .map(|f| {
            let mut values = Vec::with_capacity(offset + f.len());
            let mut missing = Vec::with_capacity(offset + f.len());
            for _ in 0..n_repeats {
                values.extend_from_slice(&f.values[year.range.clone()]);
                missing.extend_from_slice(&f.missing[year.range.clone()]);
            }
            values.extend_from_slice(&f.values);
            missing.extend_from_slice(&f.missing);
            TimeSeries::new(
                f.start - Duration::days(offset as i64),
                values,
                missing,
                f.unit,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpunUp { series, offset })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn read(text: &str) -> Result<TimeSeries> {
        read_daily_csv(text.as_bytes(), &ColumnSpec::default())
    }

    #[test]
    fn csv_consecutive_rows() {
        let s = read("date,value\n2003-10-01,1\n2003-10-02,2\n2003-10-03,3\n").unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.count_present(), 3);
        assert_eq!(s.get(2), Some(3.0));
        assert_eq!(s.start(), date(2003, 10, 1));
    }

    #[test]
    fn csv_gap_is_missing() {
        let s = read("date,value\n2003-10-01,1\n2003-10-03,3\n").unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.missing(), &[false, true, false]);
    }

    #[test]
    fn csv_empty_value_is_missing() {
        let s = read("date,value\n2003-10-01,1\n2003-10-02,\n2003-10-03,3\n").unwrap();
        assert_eq!(s.get(1), None);
    }

    #[test]
    fn csv_bad_date_names_row() {
        let err = read("date,value\n2003-10-01,1\n2003-13-40,5\n").unwrap_err();
        match err {
            Error::Ingest { row, .. } => assert_eq!(row, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_bad_number_and_duplicate() {
        assert!(matches!(
            read("date,value\n2003-10-01,abc\n"),
            Err(Error::Ingest { row: 2, .. })
        ));
        assert!(matches!(
            read("date,value\n2003-10-01,1\n2003-10-01,2\n"),
            Err(Error::Ingest { row: 3, .. })
        ));
    }

    #[test]
    fn csv_write_then_read() {
        let s = TimeSeries::from_options(
            date(2003, 10, 1),
            &[Some(1.5), None, Some(0.25)],
            Unit::MmPerDay,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_daily_csv(&mut buf, &s).unwrap();
        assert_eq!(read(std::str::from_utf8(&buf).unwrap()).unwrap(), s);
    }

    #[test]
    fn discharge_conversion() {
        let q = TimeSeries::complete(date(2003, 10, 1), vec![0.0, 1.0, 1000.0], Unit::Cfs).unwrap();
        let unit_area = convert_discharge_to_depth(&q, 2.446_575_5).unwrap();
        assert_eq!(unit_area.get(0), Some(0.0));
        assert!((unit_area.get(1).unwrap() - 1.0).abs() < 1e-7);
        let eel = convert_discharge_to_depth(&q, 1925.01).unwrap();
        assert!((eel.get(2).unwrap() - 1.2710).abs() < 1e-3);
        assert_eq!(eel.unit(), Unit::MmPerDay);
        assert!(convert_discharge_to_depth(&q, 0.0).is_err());
        assert!(convert_discharge_to_depth(&unit_area, 1.0).is_err());
    }

    #[test]
    fn discharge_conversion_by_dimensional_analysis() {
        // 1 ft3/s * 0.3048^3 m3/ft3 * 86400 s/day / (A km2 * 1e6 m2/km2) * 1000 mm/m
        let q = TimeSeries::complete(date(2003, 10, 1), vec![1.0], Unit::Cfs).unwrap();
        let expected = 0.3048_f64.powi(3) * 86400.0 / 1e6 * 1000.0;
        let got = convert_discharge_to_depth(&q, 1.0).unwrap().get(0).unwrap();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn log_transform_examples() {
        let s = TimeSeries::complete(
            date(2003, 10, 1),
            vec![std::f64::consts::E, 0.0, 1.0],
            Unit::MmPerDay,
        )
        .unwrap();
        let l = log_transform(&s, DEFAULT_LOG_FLOOR).unwrap();
        assert!((l.get(0).unwrap() - 1.0).abs() < 1e-15);
        assert!((l.get(1).unwrap() - (-13.815_510_557_964_274)).abs() < 1e-12);
        assert_eq!(l.get(2), Some(0.0));
        assert_eq!(l.unit(), Unit::LogMmPerDay);
        assert!(log_transform(&s, 0.0).is_err());
    }

    #[test]
    fn water_years_follow_october_convention() {
        let wy = WaterYearIndex::new(date(2003, 9, 30), 368);
        let years = wy.years();
        assert_eq!(years[0].label, 2003);
        assert!(!years[0].complete);
        assert_eq!(years[1].label, 2004);
        assert_eq!(years[1].range, 1..367);
        assert!(years[1].complete, "WY2004 is a leap water year of 366 days");
        assert_eq!(wy.year_of(367), Some(2005));
    }

    fn yearly_series(totals: &[f64]) -> TimeSeries {
        let mut values = Vec::new();
        let start = date(2000, 10, 1);
        for (i, &total) in totals.iter().enumerate() {
            let label = 2001 + i as i32;
            let days = (water_year_start(label + 1) - water_year_start(label)).num_days() as usize;
            // whole total on the first day keeps equal totals bit-identical
            values.push(total);
            values.extend(std::iter::repeat(0.0).take(days - 1));
        }
        TimeSeries::complete(start, values, Unit::MmPerDay).unwrap()
    }

    #[test]
    fn split_four_years_by_rotation() {
        let s = yearly_series(&[10.0, 1.0, 9.0, 2.0]);
        let split = split_train_eval(&s, &s.water_years(), 0.6).unwrap();
        assert_eq!(split.train, BTreeSet::from([2001, 2002]));
        assert_eq!(split.eval, BTreeSet::from([2003, 2004]));
    }

    #[test]
    fn split_twenty_years_twelve_eight() {
        let totals: Vec<f64> = (0..20).map(|i| ((i * 7) % 20) as f64 + 1.0).collect();
        let s = yearly_series(&totals);
        let split = split_train_eval(&s, &s.water_years(), 0.6).unwrap();
        assert_eq!(split.train.len(), 12);
        assert_eq!(split.eval.len(), 8);
    }

    #[test]
    fn split_ties_are_deterministic() {
        let s = yearly_series(&[5.0; 6]);
        let a = split_train_eval(&s, &s.water_years(), 0.6).unwrap();
        let b = split_train_eval(&s, &s.water_years(), 0.6).unwrap();
        assert_eq!(a, b);
        // earlier year ranks first: pairs (2001,2006), (2002,2005), (2003,2004)
        assert_eq!(a.eval, BTreeSet::from([2002, 2005]));
        assert_eq!(a.train, BTreeSet::from([2001, 2003, 2004, 2006]));
    }

    #[test]
    fn split_rejects_odd_and_short_records() {
        let s = yearly_series(&[1.0, 2.0, 3.0]);
        assert!(split_train_eval(&s, &s.water_years(), 0.6).is_err());
        let s = yearly_series(&[1.0, 2.0]);
        assert!(split_train_eval(&s, &s.water_years(), 0.6).is_err());
    }

    #[test]
    fn spinup_lengths() {
        let s = yearly_series(&[1.0, 2.0]);
        let id = spinup_prepend(std::slice::from_ref(&s), 0).unwrap();
        assert_eq!(id.offset, 0);
        assert_eq!(id.series[0], s);

        // WY2001 has 365 days
        let three = spinup_prepend(std::slice::from_ref(&s), 3).unwrap();
        assert_eq!(three.offset, 1095);
        assert_eq!(three.series[0].len(), s.len() + 1095);

        let leap_start = date(2003, 10, 1);
        let leap = TimeSeries::complete(leap_start, vec![1.0; 366], Unit::MmPerDay).unwrap();
        assert_eq!(spinup_prepend(&[leap], 1).unwrap().offset, 366);

        let short = TimeSeries::complete(leap_start, vec![1.0; 200], Unit::MmPerDay).unwrap();
        assert!(spinup_prepend(&[short], 1).is_err());
    }
}
