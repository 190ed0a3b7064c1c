//! Extended-precision (double-double, ~106-bit) evaluation of the
//! gradient-bearing metrics, used as the reference for finite differences.
//!
//! Central differences in plain `f64` lose about `1e-16 / h` absolute
//! accuracy, which swamps gradient entries that happen to lie near zero.
//! Evaluating the metric in double-double moves that floor far below any
//! entry of interest. This code is written independently of the `f64`
//! metric path so it also serves as a cross-check of it.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::benchmark::BenchmarkMethod;
use crate::error::{Error, Result};

use super::GradMetric;

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Dd {
    hi: f64,
    lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    fn from_parts((hi, lo): (f64, f64)) -> Self {
        Dd { hi, lo }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn is_zero(self) -> bool {
        self.hi == 0.0
    }

    pub fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Dd::ZERO;
        }
        let q = self.hi.sqrt();
        let r = self - Dd::from(q) * Dd::from(q);
        Dd::from_parts(quick_two_sum(q, r.hi / (2.0 * q)))
    }

    pub fn powi2(self) -> Self {
        self * self
    }
}

impl From<f64> for Dd {
    fn from(v: f64) -> Self {
        Dd { hi: v, lo: 0.0 }
    }
}

impl From<usize> for Dd {
    fn from(v: usize) -> Self {
        Dd::from(v as f64)
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, y: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, y.hi);
        let (t, f) = two_sum(self.lo, y.lo);
        let (s, e) = quick_two_sum(s, e + t);
        Dd::from_parts(quick_two_sum(s, e + f))
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, y: Dd) -> Dd {
        self + (-y)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, y: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, y.hi);
        let e = e + (self.hi * y.lo + self.lo * y.hi);
        Dd::from_parts(quick_two_sum(p, e))
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, y: Dd) -> Dd {
        let q1 = self.hi / y.hi;
        let r = self - y * Dd::from(q1);
        let q2 = r.hi / y.hi;
        let r = r - y * Dd::from(q2);
        let q3 = r.hi / y.hi;
        Dd::from_parts(quick_two_sum(q1, q2)) + Dd::from(q3)
    }
}

impl std::iter::Sum for Dd {
    fn sum<I: Iterator<Item = Dd>>(iter: I) -> Dd {
        iter.fold(Dd::ZERO, |a, b| a + b)
    }
}

/// Inputs restricted to positions present in both series.
pub(crate) struct PreciseInput<'a> {
    pub obs: &'a [f64],
    pub sim: &'a [Dd],
    pub present: &'a [bool],
}

fn skill(sum: Dd) -> Dd {
    Dd::ONE - (sum / Dd::from(2.0)).sqrt()
}

fn mean(values: impl Iterator<Item = Dd>) -> (Dd, usize) {
    let mut n = 0;
    let total: Dd = values.inspect(|_| n += 1).sum();
    (total / Dd::from(n), n)
}

fn benchmark(values: &[Dd], present: &[bool], method: BenchmarkMethod) -> Vec<Option<Dd>> {
    let len = values.len();
    let mut out = vec![None; len];
    match method {
        BenchmarkMethod::Ltm | BenchmarkMethod::SectionMean(_) => {
            let n_s = match method {
                BenchmarkMethod::SectionMean(n) => n,
                _ => len,
            };
            for start in (0..len).step_by(n_s) {
                let end = (start + n_s).min(len);
                let idx: Vec<usize> = (start..end).filter(|&t| present[t]).collect();
                if idx.is_empty() {
                    continue;
                }
                let (m, _) = mean(idx.iter().map(|&t| values[t]));
                out[start..end].iter_mut().for_each(|b| *b = Some(m));
            }
        }
        BenchmarkMethod::MovingMean(n_w) => {
            let k = (n_w - 1) / 2;
            let mut prefix = vec![Dd::ZERO; len + 1];
            let mut gaps = vec![0usize; len + 1];
            for t in 0..len {
                prefix[t + 1] = prefix[t] + if present[t] { values[t] } else { Dd::ZERO };
                gaps[t + 1] = gaps[t] + usize::from(!present[t]);
            }
            if n_w <= len {
                for t in k..len - k {
                    if gaps[t + k + 1] == gaps[t - k] {
                        out[t] = Some((prefix[t + k + 1] - prefix[t - k]) / Dd::from(n_w));
                    }
                }
            }
        }
    }
    out
}

/// Evaluates `metric` in double-double precision.
pub(crate) fn evaluate(
    metric: GradMetric,
    input: &PreciseInput<'_>,
    method: BenchmarkMethod,
    eps_b: f64,
) -> Result<Dd> {
    let idx: Vec<usize> = (0..input.present.len()).filter(|&t| input.present[t]).collect();
    if idx.is_empty() {
        return Err(Error::degenerate("no usable positions"));
    }
    let s = |t: usize| input.sim[t];
    let o = |t: usize| Dd::from(input.obs[t]);
    let n = Dd::from(idx.len());
    match metric {
        GradMetric::Mse | GradMetric::Nse => {
            let mse = idx.iter().map(|&t| (s(t) - o(t)).powi2()).sum::<Dd>() / n;
            if metric == GradMetric::Mse {
                return Ok(mse);
            }
            let (mu_o, _) = mean(idx.iter().map(|&t| o(t)));
            let var = idx.iter().map(|&t| (o(t) - mu_o).powi2()).sum::<Dd>() / n;
            Ok(Dd::ONE - mse / var)
        }
        GradMetric::KgeSs => {
            let (mu_s, _) = mean(idx.iter().map(|&t| s(t)));
            let (mu_o, _) = mean(idx.iter().map(|&t| o(t)));
            let ss_s: Dd = idx.iter().map(|&t| (s(t) - mu_s).powi2()).sum();
            let ss_o: Dd = idx.iter().map(|&t| (o(t) - mu_o).powi2()).sum();
            let cross: Dd = idx.iter().map(|&t| (s(t) - mu_s) * (o(t) - mu_o)).sum();
            let beta = mu_s / mu_o;
            let alpha = (ss_s / ss_o).sqrt();
            let rho = cross / (ss_s * ss_o).sqrt();
            let terms = (Dd::ONE - beta).powi2() + (Dd::ONE - alpha).powi2() + (Dd::ONE - rho).powi2();
            Ok(skill(terms))
        }
        GradMetric::JkgeSs | GradMetric::JkgeAug => {
            let present = input.present;
            let b_s = benchmark(input.sim, present, method);
            let obs: Vec<Dd> = input.obs.iter().map(|&v| Dd::from(v)).collect();
            let b_o = benchmark(&obs, present, method);
            let scored: Vec<usize> = idx
                .iter()
                .copied()
                .filter(|&t| b_s[t].is_some() && b_o[t].is_some())
                .collect();
            if scored.is_empty() {
                return Err(Error::degenerate("no scored positions"));
            }
            let n = Dd::from(scored.len());
            let (mut ss_s, mut ss_o, mut cross, mut mstar) = (Dd::ZERO, Dd::ZERO, Dd::ZERO, Dd::ZERO);
            for &t in &scored {
                let (bs, bo) = (b_s[t].unwrap(), b_o[t].unwrap());
                let a_s = s(t) - bs;
                let a_o = o(t) - bo;
                ss_s = ss_s + a_s * a_s;
                ss_o = ss_o + a_o * a_o;
                cross = cross + a_s * a_o;
                let denom = if bo.abs().to_f64() < eps_b {
                    Dd::from(if bo.hi < 0.0 { -eps_b } else { eps_b })
                } else {
                    bo
                };
                mstar = mstar + (Dd::ONE - bs / denom).powi2();
            }
            let mstar = mstar / n;
            let (alpha, rho) = if ss_s.is_zero() || ss_o.is_zero() {
                (Dd::ZERO, Dd::ZERO)
            } else {
                ((ss_s / ss_o).sqrt(), cross / (ss_s * ss_o).sqrt())
            };
            let mut terms = mstar + (Dd::ONE - alpha).powi2() + (Dd::ONE - rho).powi2();
            if metric == GradMetric::JkgeAug {
                let (mu_s, _) = mean(scored.iter().map(|&t| s(t)));
                let (mu_o, _) = mean(scored.iter().map(|&t| o(t)));
                terms = terms + (Dd::ONE - mu_s / mu_o).powi2();
            }
            Ok(skill(terms))
        }
    }
}
