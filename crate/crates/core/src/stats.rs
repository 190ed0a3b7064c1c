//! Small numeric helpers shared across modules.

/// Mean computed relative to the first element, so a run of identical
/// values returns that value exactly.
pub(crate) fn shifted_mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut iter = values.into_iter();
    let first = iter.next()?;
    let mut sum = 0.0;
    let mut n = 1usize;
    for v in iter {
        sum += v - first;
        n += 1;
    }
    Some(first + sum / n as f64)
}

/// Empirical quantile of sorted data, linear interpolation between
/// closest ranks (position `q * (n - 1)`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() || !(0.0..=1.0).contains(&q) {
        return None;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        Some(sorted[lo])
    } else {
        Some(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
    }
}

pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, q)
}
