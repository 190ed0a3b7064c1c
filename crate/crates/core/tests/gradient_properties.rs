use jkge::gradients::{fd_check, grad_metric, GradMetric};
use jkge::metrics::DEFAULT_EPS_B;
use jkge::{BenchmarkMethod, PairedSeries};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn random_case(seed: u64) -> (PairedSeries, BenchmarkMethod) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(30..=365);
    let phase: f64 = rng.random_range(0.0..6.0);
    let obs: Vec<f64> = (0..n)
        .map(|t| 3.0 + 2.0 * (t as f64 / 30.0 + phase).sin() + rng.random_range(0.0..2.0))
        .collect();
    let gain = rng.random_range(0.5..1.5);
    let sim: Vec<f64> = obs
        .iter()
        .map(|o| gain * o + rng.random_range(-0.5..1.0))
        .collect();
    let method = match rng.random_range(0..5) {
        0 => BenchmarkMethod::Ltm,
        1 => BenchmarkMethod::SectionMean(rng.random_range(5..=60)),
        2 => BenchmarkMethod::SectionMean(n),
        3 => BenchmarkMethod::MovingMean(2 * rng.random_range(1..=10) + 1),
        _ => BenchmarkMethod::MovingMean(3),
    };
    (PairedSeries::from_values(&obs, &sim).unwrap(), method)
}

#[test]
fn analytic_gradients_agree_with_finite_differences() {
    let failures: Vec<String> = (0..100u64)
        .into_par_iter()
        .flat_map_iter(|seed| {
            let (pair, method) = random_case(seed);
            GradMetric::ALL.into_iter().filter_map(move |metric| {
                let err = fd_check(metric, &pair, method, 1e-6).unwrap();
                (err > 1e-6).then(|| format!("seed {seed} {metric} {method} n={}: {err:e}", pair.len()))
            })
        })
        .collect();
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn reduction_identity_holds_for_gradients() {
    for seed in 0..20u64 {
        let (pair, _) = random_case(seed + 500);
        let whole = BenchmarkMethod::SectionMean(pair.len() + seed as usize);
        let a = grad_metric(GradMetric::JkgeSs, &pair, whole, DEFAULT_EPS_B).unwrap();
        let b = grad_metric(GradMetric::KgeSs, &pair, BenchmarkMethod::Ltm, DEFAULT_EPS_B).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() <= 1e-10, "seed {seed}: {x} vs {y}");
        }
    }
}
