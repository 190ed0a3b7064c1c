//! Seeded synthetic catchments with seasonal, year-to-year varying forcings.
//!
//! "Observed" flow comes from a three-store reference model that differs in
//! structure from [`crate::hydromodel`], so the calibrated model can never
//! reproduce it exactly.

use std::f64::consts::TAU;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hydromodel::ForcingSeries;
use crate::series::{TimeSeries, Unit};

const DAYS_PER_YEAR: f64 = 365.25;

/// Generator settings. Read from a plain `key = value` file (TOML syntax);
/// absent keys take the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_years: usize,
    /// First day of the record; should be October 1 so water years are whole.
    #[serde(deserialize_with = "date_or_string")]
    pub start: NaiveDate,
    pub seed: u64,

    /// Mean storm arrivals per day.
    pub storm_rate: f64,
    /// Relative amplitude of the seasonal storm-rate cycle, in [0, 1].
    pub storm_seasonal_amplitude: f64,
    /// Day of year with the highest storm rate.
    pub storm_peak_doy: f64,
    /// Log-space mean and spread of storm depth (mm).
    pub storm_depth_log_mean: f64,
    pub storm_depth_log_sd: f64,
    /// Log-space spread of a per-water-year multiplier on the storm rate.
    pub interannual_log_sd: f64,

    pub pet_mean: f64,
    pub pet_amplitude: f64,
    pub pet_peak_doy: f64,

    /// Reference model: soil capacity (mm) and shape of the saturated-area curve.
    pub soil_capacity: f64,
    pub saturation_shape: f64,
    /// Soil moisture fraction above which ET runs at the potential rate.
    pub et_threshold: f64,
    /// Percolation coefficient (1/day) applied to relative soil moisture squared.
    pub percolation: f64,
    /// Fast and slow store recession coefficients (1/day).
    pub fast_recession: f64,
    pub slow_recession: f64,
    /// Share of percolation lost to deep groundwater.
    pub deep_loss: f64,

    /// Spread of the multiplicative log-normal observation error.
    pub noise_log_sd: f64,
}

/// Accepts both a bare TOML date and a quoted ISO date.
fn date_or_string<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<NaiveDate, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Date(toml::value::Datetime),
        Text(String),
    }
    let text = match Raw::deserialize(d)? {
        Raw::Date(dt) => dt.to_string(),
        Raw::Text(s) => s,
    };
    NaiveDate::parse_from_str(&text, "%Y-%m-%d").map_err(serde::de::Error::custom)
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_years: 20,
            start: NaiveDate::from_ymd_opt(1990, 10, 1).expect("valid date"),
            seed: 1,
            storm_rate: 0.5,
            storm_seasonal_amplitude: 0.8,
            storm_peak_doy: 15.0,
            storm_depth_log_mean: 1.0,
            storm_depth_log_sd: 0.9,
            interannual_log_sd: 0.25,
            pet_mean: 2.5,
            pet_amplitude: 2.0,
            pet_peak_doy: 196.0,
            soil_capacity: 150.0,
            saturation_shape: 2.5,
            et_threshold: 1.0,
            percolation: 0.04,
            fast_recession: 0.35,
            slow_recession: 0.02,
            deep_loss: 0.0,
            noise_log_sd: 0.1,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_years < 2 {
            return Err(Error::arg("n_years must be at least 2"));
        }
        let non_negative = [
            ("storm_rate", self.storm_rate),
            ("storm_depth_log_sd", self.storm_depth_log_sd),
            ("interannual_log_sd", self.interannual_log_sd),
            ("pet_mean", self.pet_mean),
            ("pet_amplitude", self.pet_amplitude),
            ("noise_log_sd", self.noise_log_sd),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::arg(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        let positive = [
            ("soil_capacity", self.soil_capacity),
            ("saturation_shape", self.saturation_shape),
            ("et_threshold", self.et_threshold),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::arg(format!("{name} must be positive, got {v}")));
            }
        }
        let unit = [
            ("storm_seasonal_amplitude", self.storm_seasonal_amplitude),
            ("et_threshold", self.et_threshold),
            ("percolation", self.percolation),
            ("fast_recession", self.fast_recession),
            ("slow_recession", self.slow_recession),
            ("deep_loss", self.deep_loss),
        ];
        for (name, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::arg(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if !self.storm_depth_log_mean.is_finite() {
            return Err(Error::arg("storm_depth_log_mean must be finite"));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::arg(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Number of days in `n_years` water years from `start`.
    pub fn n_days(&self) -> usize {
        let end = self
            .start
            .with_year(self.start.year() + self.n_years as i32)
            .unwrap_or(self.start + chrono::Duration::days((self.n_years as f64 * DAYS_PER_YEAR) as i64));
        (end - self.start).num_days() as usize
    }

    /// Seasonal factor on the storm rate.
    pub fn storm_seasonality(&self, date: NaiveDate) -> f64 {
        let doy = date.ordinal() as f64;
        1.0 + self.storm_seasonal_amplitude * (TAU * (doy - self.storm_peak_doy) / DAYS_PER_YEAR).cos()
    }

    pub fn pet(&self, date: NaiveDate) -> f64 {
        let doy = date.ordinal() as f64;
        (self.pet_mean + self.pet_amplitude * (TAU * (doy - self.pet_peak_doy) / DAYS_PER_YEAR).cos()).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCatchment {
    pub forcings: ForcingSeries,
    /// Noisy reference-model flow.
    pub obs: TimeSeries,
    /// Reference-model flow before observation noise.
    pub true_flow: Vec<f64>,
    /// Expected daily precipitation given the seasonal cycle and the year's multiplier.
    pub seasonal_signal: Vec<f64>,
}

/// Reference model storages (mm).
#[derive(Debug, Clone, Copy, PartialEq)]
struct ReferenceState {
    soil: f64,
    fast: f64,
    slow: f64,
}

fn reference_step(s: ReferenceState, precip: f64, pet: f64, cfg: &SynthConfig) -> (ReferenceState, f64) {
    let cap = cfg.soil_capacity;
    let rel = (s.soil / cap).clamp(0.0, 1.0);
    // variable contributing area: wetter soil routes more rain to the fast store
    let quick = precip * rel.powf(cfg.saturation_shape);
    let mut soil = s.soil + precip - quick;
    let spill = (soil - cap).max(0.0);
    soil -= spill;
    let rel = soil / cap;
    let et = (pet * (rel / cfg.et_threshold).min(1.0)).min(soil);
    soil -= et;
    let perc = (cfg.percolation * (soil / cap).powi(2) * cap).min(soil);
    soil -= perc;
    let fast = s.fast + quick + spill;
    let q_fast = cfg.fast_recession * fast;
    let slow = s.slow + perc * (1.0 - cfg.deep_loss);
    let q_slow = cfg.slow_recession * slow;
    (
        ReferenceState {
            soil,
            fast: fast - q_fast,
            slow: slow - q_slow,
        },
        q_fast + q_slow,
    )
}

const PRECIP_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;

/// Generates forcings and observed flow; identical configs give identical output.
pub fn generate_catchment(cfg: &SynthConfig) -> Result<SynthCatchment> {
    cfg.validate()?;
    let n = cfg.n_days();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(PRECIP_STREAM);
    let depth = LogNormal::new(cfg.storm_depth_log_mean, cfg.storm_depth_log_sd)
        .map_err(|e| Error::arg(format!("storm depth distribution: {e}")))?;
    let s2 = cfg.interannual_log_sd.powi(2);
    let year_factor = LogNormal::new(-0.5 * s2, cfg.interannual_log_sd)
        .map_err(|e| Error::arg(format!("interannual distribution: {e}")))?;
    let mean_depth = (cfg.storm_depth_log_mean + 0.5 * cfg.storm_depth_log_sd.powi(2)).exp();

    let mut precip = Vec::with_capacity(n);
    let mut pet = Vec::with_capacity(n);
    let mut seasonal_signal = Vec::with_capacity(n);
    let mut factor = 1.0;
    for t in 0..n {
        let date = cfg.start + chrono::Duration::days(t as i64);
        if t == 0 || (date.month() == 10 && date.day() == 1) {
            factor = year_factor.sample(&mut rng);
        }
        let rate = cfg.storm_rate * cfg.storm_seasonality(date) * factor;
        seasonal_signal.push(rate * mean_depth);
        let storms = if rate > 0.0 {
            Poisson::new(rate)
                .map_err(|e| Error::arg(format!("storm rate: {e}")))?
                .sample(&mut rng) as usize
        } else {
            0
        };
        precip.push((0..storms).fold(0.0, |acc, _| acc + depth.sample(&mut rng)));
        pet.push(cfg.pet(date));
    }

    let mut state = ReferenceState {
        soil: 0.5 * cfg.soil_capacity,
        fast: 0.0,
        slow: 50.0,
    };
    let true_flow: Vec<f64> = (0..n)
        .map(|t| {
            let (next, q) = reference_step(state, precip[t], pet[t], cfg);
            state = next;
            q
        })
        .collect();

    let mut noise_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    noise_rng.set_stream(NOISE_STREAM);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let observed: Vec<f64> = true_flow
        .iter()
        .map(|q| {
            let z: f64 = normal.sample(&mut noise_rng);
            q * (cfg.noise_log_sd * z).exp()
        })
        .collect();

    Ok(SynthCatchment {
        forcings: ForcingSeries::new(cfg.start, precip, pet)?,
        obs: TimeSeries::complete(cfg.start, observed, Unit::MmPerDay)?,
        true_flow,
        seasonal_signal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmark::{self, BenchmarkMethod};
    use crate::series::WaterYearIndex;

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn no_storms_means_no_rain_and_receding_flow() {
        let cfg = SynthConfig {
            storm_rate: 0.0,
            n_years: 3,
            ..SynthConfig::default()
        };
        let c = generate_catchment(&cfg).unwrap();
        assert!(c.forcings.precip.iter().all(|p| *p == 0.0));
        let q = &c.true_flow;
        let peak = q.iter().cloned().fold(0.0, f64::max);
        let last_year = &q[q.len() - 365..];
        assert!(last_year.windows(2).all(|w| w[1] <= w[0]));
        assert!(*q.last().unwrap() < 0.05 * peak);
    }

    #[test]
    fn reproducible_from_seed() {
        let cfg = SynthConfig {
            n_years: 3,
            ..SynthConfig::default()
        };
        assert_eq!(generate_catchment(&cfg).unwrap(), generate_catchment(&cfg).unwrap());
        let other = SynthConfig { seed: 2, ..cfg.clone() };
        assert_ne!(
            generate_catchment(&cfg).unwrap().forcings.precip,
            generate_catchment(&other).unwrap().forcings.precip
        );
    }

    #[test]
    fn section_benchmark_tracks_seasonality() {
        let cfg = SynthConfig::default();
        let c = generate_catchment(&cfg).unwrap();
        assert_eq!(c.obs.len(), c.forcings.len());
        let b = benchmark::benchmark(&c.obs, BenchmarkMethod::SectionMean(30)).unwrap();
        // the flow response lags rainfall; compare against the best lag within 60 days
        let best = (0..=60)
            .map(|lag| corr(&b.values[lag..], &c.seasonal_signal[..c.obs.len() - lag]))
            .fold(f64::MIN, f64::max);
        assert!(best > 0.8, "{best}");
        let unlagged = corr(&b.values, &c.seasonal_signal);
        assert!(unlagged > 0.5, "{unlagged}");
    }

    #[test]
    fn outputs_are_non_negative_and_years_vary() {
        for seed in 1..=5 {
            let cfg = SynthConfig {
                seed,
                ..SynthConfig::default()
            };
            let c = generate_catchment(&cfg).unwrap();
            assert!(c.forcings.precip.iter().all(|v| *v >= 0.0));
            assert!(c.forcings.pet.iter().all(|v| *v >= 0.0));
            assert!(c.obs.values().iter().all(|v| *v >= 0.0));
            let wy = WaterYearIndex::new(cfg.start, c.forcings.len());
            assert_eq!(wy.complete_years().count(), 20);
            let totals: Vec<f64> = wy
                .complete_years()
                .map(|y| c.forcings.precip[y.range.clone()].iter().sum())
                .collect();
            let mean = totals.iter().sum::<f64>() / totals.len() as f64;
            let sd = (totals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / totals.len() as f64).sqrt();
            assert!(sd / mean > 0.05, "cv {}", sd / mean);
        }
    }

    #[test]
    fn config_parses_key_value_text() {
        let cfg = SynthConfig::parse("# test\nn_years = 4\nseed = 9\nstart = 2001-10-01\nnoise_log_sd = 0.0\n").unwrap();
        assert_eq!(cfg.start, NaiveDate::from_ymd_opt(2001, 10, 1).unwrap());
        let quoted = SynthConfig::parse("start = \"2002-10-01\"").unwrap();
        assert_eq!(quoted.start, NaiveDate::from_ymd_opt(2002, 10, 1).unwrap());
        assert_eq!(cfg.n_years, 4);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.noise_log_sd, 0.0);
        assert_eq!(cfg.storm_rate, SynthConfig::default().storm_rate);
        assert!(SynthConfig::parse("n_years = 1").is_err());
        assert!(SynthConfig::parse("bogus = 1").is_err());
        assert!(SynthConfig::parse("soil_capacity = -5.0").is_err());
    }

    #[test]
    fn noise_free_obs_equals_reference_flow() {
        let cfg = SynthConfig {
            noise_log_sd: 0.0,
            n_years: 2,
            ..SynthConfig::default()
        };
        let c = generate_catchment(&cfg).unwrap();
        assert_eq!(c.obs.values(), c.true_flow.as_slice());
    }
}
