//! Two-bucket conceptual rainfall-runoff model.
//!
//! A soil store fills with precipitation, spills above capacity, loses water
//! to evapotranspiration and drains linearly. A fixed fraction of the drainage
//! seeps into a groundwater store that releases baseflow.

use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{read_daily_csv, ColumnSpec, TimeSeries, Unit};

pub const N_PARAMS: usize = 5;
pub const PARAM_NAMES: [&str; N_PARAMS] = ["smax", "ks", "kb", "fseep", "etc_scale"];

const SMAX_SCALE: f64 = 100.0;
const KS_SHIFT: f64 = -2.0;
const KB_SHIFT: f64 = -4.0;
const FSEEP_SHIFT: f64 = 0.0;
const ETC_SHIFT: f64 = 1.0;

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Model parameters in unconstrained space.
///
/// `smax = 100 * exp(theta)`, and the remaining four are logistic maps of
/// shifted values (shifts -2, -4, 0, +1 for `ks`, `kb`, `fseep`,
/// `etc_scale`), so a standard-normal draw lands in a plausible region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BucketParams {
    pub smax: f64,
    pub ks: f64,
    pub kb: f64,
    pub fseep: f64,
    pub etc_scale: f64,
}

/// Parameters after the constraining transforms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub smax: f64,
    pub ks: f64,
    pub kb: f64,
    pub fseep: f64,
    pub etc_scale: f64,
}

impl BucketParams {
    pub fn from_theta(theta: &[f64]) -> Result<Self> {
        let &[smax, ks, kb, fseep, etc_scale] = theta else {
            return Err(Error::arg(format!(
                "expected {N_PARAMS} parameters, got {}",
                theta.len()
            )));
        };
        Ok(Self {
            smax,
            ks,
            kb,
            fseep,
            etc_scale,
        })
    }

    pub fn theta(&self) -> [f64; N_PARAMS] {
        [self.smax, self.ks, self.kb, self.fseep, self.etc_scale]
    }

    pub fn physical(&self) -> PhysicalParams {
        PhysicalParams {
            smax: SMAX_SCALE * self.smax.exp(),
            ks: logistic(self.ks + KS_SHIFT),
            kb: logistic(self.kb + KB_SHIFT),
            fseep: logistic(self.fseep + FSEEP_SHIFT),
            etc_scale: logistic(self.etc_scale + ETC_SHIFT),
        }
    }

    /// Inverse of [`BucketParams::physical`]. Unit-interval values must lie
    /// strictly inside (0, 1).
    pub fn from_physical(p: &PhysicalParams) -> Result<Self> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(logit(v))
            } else {
                Err(Error::arg(format!("{name} must lie in (0, 1), got {v}")))
            }
        };
        if !(p.smax > 0.0) {
            return Err(Error::arg(format!("smax must be positive, got {}", p.smax)));
        }
        Ok(Self {
            smax: (p.smax / SMAX_SCALE).ln(),
            ks: unit("ks", p.ks)? - KS_SHIFT,
            kb: unit("kb", p.kb)? - KB_SHIFT,
            fseep: unit("fseep", p.fseep)? - FSEEP_SHIFT,
            etc_scale: unit("etc_scale", p.etc_scale)? - ETC_SHIFT,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BucketState {
    pub soil: f64,
    pub base: f64,
}

impl BucketState {
    pub fn total(&self) -> f64 {
        self.soil + self.base
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Forcing {
    pub precip: f64,
    pub pet: f64,
}

/// Fluxes produced by one model step, all in mm/day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutput {
    pub q: f64,
    pub et: f64,
}

/// Advances the model by one day.
pub fn step(state: BucketState, forcing: Forcing, p: &PhysicalParams) -> (BucketState, StepOutput) {
    let mut soil = state.soil + forcing.precip;
    let qx = (soil - p.smax).max(0.0);
    soil -= qx;
    let et = (p.etc_scale * forcing.pet / p.smax * soil).min(soil);
    soil -= et;
    let d = p.ks * soil;
    soil -= d;
    let seep = p.fseep * d;
    let mut base = state.base + seep;
    let qb = p.kb * base;
    base -= qb;
    let q = qx + (d - seep) + qb;
    (BucketState { soil, base }, StepOutput { q, et })
}

/// Daily precipitation and potential evapotranspiration on a shared calendar.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingSeries {
    pub start: NaiveDate,
    pub precip: Vec<f64>,
    pub pet: Vec<f64>,
}

impl ForcingSeries {
    pub fn new(start: NaiveDate, precip: Vec<f64>, pet: Vec<f64>) -> Result<Self> {
        if precip.len() != pet.len() {
            return Err(Error::arg("precip and pet lengths differ"));
        }
        if let Some(t) = precip
            .iter()
            .chain(&pet)
            .position(|v| !v.is_finite() || *v < 0.0)
        {
            return Err(Error::arg(format!(
                "forcings must be finite and non-negative (entry {})",
                t % precip.len().max(1)
            )));
        }
        Ok(Self { start, precip, pet })
    }

    /// Builds forcings from two aligned series without gaps.
    pub fn from_series(precip: &TimeSeries, pet: &TimeSeries) -> Result<Self> {
        if precip.start() != pet.start() || precip.len() != pet.len() {
            return Err(Error::arg("precip and pet series are not aligned"));
        }
        if precip.count_present() != precip.len() || pet.count_present() != pet.len() {
            return Err(Error::arg("forcings contain missing days"));
        }
        Self::new(precip.start(), precip.values().to_vec(), pet.values().to_vec())
    }

    pub fn len(&self) -> usize {
        self.precip.len()
    }

    pub fn is_empty(&self) -> bool {
        self.precip.is_empty()
    }

    pub fn get(&self, t: usize) -> Forcing {
        Forcing {
            precip: self.precip[t],
            pet: self.pet[t],
        }
    }

    pub fn precip_series(&self) -> TimeSeries {
        TimeSeries::complete(self.start, self.precip.clone(), Unit::MmPerDay)
            .expect("forcing values are finite")
    }

    pub fn pet_series(&self) -> TimeSeries {
        TimeSeries::complete(self.start, self.pet.clone(), Unit::MmPerDay)
            .expect("forcing values are finite")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read(path)?;
        Self::read(text.as_slice())
    }

    /// Reads a `date,precip,pet` CSV.
    pub fn read<R: Read>(mut reader: R) -> Result<Self> {
        let mut text = Vec::new();
        reader.read_to_end(&mut text)?;
        let column = |name: &str| {
            read_daily_csv(
                text.as_slice(),
                &ColumnSpec {
                    value: name.into(),
                    ..ColumnSpec::default()
                },
            )
        };
        Self::from_series(&column("precip")?, &column("pet")?)
    }

    pub fn write<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["date", "precip", "pet"])?;
        for t in 0..self.len() {
            wtr.write_record([
                (self.start + chrono::Duration::days(t as i64)).to_string(),
                self.precip[t].to_string(),
                self.pet[t].to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Prepends `n_repeats` copies of the first complete water year.
    /// Returns the extended forcings and the index where scoring begins.
    pub fn spun_up(&self, n_repeats: usize) -> Result<(Self, usize)> {
        let spun = crate::series::spinup_prepend(&[self.precip_series(), self.pet_series()], n_repeats)?;
        let forcings = Self::from_series(&spun.series[0], &spun.series[1])?;
        Ok((forcings, spun.offset))
    }
}

/// Runs the model and returns daily runoff for every step.
pub fn simulate_values(forcings: &ForcingSeries, params: &BucketParams, init: BucketState) -> Vec<f64> {
    let p = params.physical();
    let mut state = init;
    (0..forcings.len())
        .map(|t| {
            let (next, out) = step(state, forcings.get(t), &p);
            state = next;
            out.q
        })
        .collect()
}

/// Runs the model; days before `offset` are marked missing so they are never scored.
pub fn simulate(
    forcings: &ForcingSeries,
    params: &BucketParams,
    init: BucketState,
    offset: usize,
) -> Result<TimeSeries> {
    if offset > forcings.len() {
        return Err(Error::arg(format!(
            "scoring offset {offset} exceeds forcing length {}",
            forcings.len()
        )));
    }
    let q = simulate_values(forcings, params, init);
    let missing = (0..q.len()).map(|t| t < offset).collect();
    TimeSeries::new(forcings.start, q, missing, Unit::MmPerDay)
}
