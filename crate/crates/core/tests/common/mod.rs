#![allow(dead_code)]

use ldp_core::paths::{Jump, StepPath};
use proptest::prelude::*;

/// Nondecreasing drift-free step path on `[0, 1]` with nonnegative start;
/// jumps at 0 and at 1 show up with positive probability.
pub fn monotone_step() -> impl Strategy<Value = StepPath> {
    (
        prop_oneof![Just(0.0), 0.0..1.0f64],
        prop::collection::vec(
            (prop_oneof![4 => 0.0..1.0f64, 1 => Just(0.0), 1 => Just(1.0)], 0.01..2.0f64),
            0..5,
        ),
    )
        .prop_map(|(x0, js)| StepPath::from_unsorted(1.0, x0, 0.0, js).unwrap())
}

/// Step path with drift and jumps of either sign.
pub fn signed_step() -> impl Strategy<Value = StepPath> {
    (
        -1.0..1.0f64,
        -2.0..2.0f64,
        prop::collection::vec((0.0..1.0f64, -2.0..2.0f64), 0..8),
    )
        .prop_map(|(x0, drift, js)| StepPath::from_unsorted(1.0, x0, drift, js).unwrap())
}

/// Increasing pure-jump path on `[0, 1]` with jumps strictly inside.
pub fn pure_jump() -> impl Strategy<Value = StepPath> {
    prop::collection::vec((0.001..0.999f64, 0.01..3.0f64), 1..8)
        .prop_map(|js| StepPath::from_unsorted(1.0, 0.0, 0.0, js).unwrap())
}

/// `ζ_μ + ξ` on `[0, γ/μ]` with `ζ_μ(s) = μs` and jumps placed so the path
/// ends no higher than `γ`. Returns the path and its jump sizes.
pub fn drift_plus_jumps() -> impl Strategy<Value = (StepPath, f64, f64, Vec<f64>)> {
    (
        0.2..3.0f64,
        0.5..5.0f64,
        prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 1..7),
        0.05..0.9f64,
    )
        .prop_map(|(mu, gamma, raw, share)| {
            let horizon = gamma / mu;
            let mut times: Vec<f64> = raw.iter().map(|r| 0.01 + 0.98 * r.0).collect();
            times.sort_by(|a, b| a.partial_cmp(b).unwrap());
            times.dedup();
            let weights: Vec<f64> = raw.iter().take(times.len()).map(|r| 0.05 + r.1).collect();
            let total: f64 = weights.iter().sum();
            // Budget left for jumps once the drift has reached the last jump time.
            let budget = share * gamma * (1.0 - times[times.len() - 1]);
            let sizes: Vec<f64> = weights.iter().map(|w| budget * w / total).collect();
            let jumps = times.iter().zip(&sizes).map(|(&t, &x)| Jump::new(t * horizon, x)).collect();
            (StepPath::new(horizon, 0.0, mu, jumps).unwrap(), mu, gamma, sizes)
        })
}
