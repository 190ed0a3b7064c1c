//! Efficiency metrics that score simulations against time-varying benchmarks
//! instead of the long-term mean, together with their analytic gradients,
//! a gradient-calibrated bucket model, and evaluation diagnostics.

pub mod benchmark;
pub mod calibrate;
pub mod error;
pub mod evaluate;
pub mod experiment;
pub mod gradients;
pub mod hydromodel;
pub mod metrics;
pub mod series;
pub mod stats;
pub mod synth;

pub use benchmark::{BenchmarkMethod, BenchmarkSeries, SigmaSeries};
pub use error::{Error, Result};
pub use series::{PairedSeries, TimeSeries, Unit, WaterYearIndex};
