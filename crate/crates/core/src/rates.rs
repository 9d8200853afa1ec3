//! Rate functions on step paths and the jump-merging minimizer.

use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, Mul};

use thiserror::Error;

use crate::float::{guarded_floor, powf};
use crate::paths::{same_horizon, Jump, PathError, PiecewisePath, StepPath};
use crate::TOL;

/// A rate value in `[0, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct RateValue(pub f64);

impl RateValue {
    pub const INFINITE: RateValue = RateValue(f64::INFINITY);
    pub const ZERO: RateValue = RateValue(0.0);

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Add for RateValue {
    type Output = RateValue;
    fn add(self, rhs: RateValue) -> RateValue {
        RateValue(self.0 + rhs.0)
    }
}

impl Mul<f64> for RateValue {
    type Output = RateValue;
    fn mul(self, w: f64) -> RateValue {
        if self.0.is_infinite() {
            self
        } else {
            RateValue(self.0 * w)
        }
    }
}

impl fmt::Display for RateValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RateError {
    #[error("alpha must lie in (0, 1), got {0}")]
    Alpha(f64),
    #[error("expected {expected} weights, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("weights must be positive and finite")]
    Weight,
    #[error("all paths must share one horizon")]
    Horizon,
    #[error("need 0 < b <= c, got c = {c}, b = {b}")]
    Boundary { c: f64, b: f64 },
    #[error("merge step needs a nondecreasing pure-jump path with jumps at most b")]
    MergeInput,
    #[error(transparent)]
    Path(#[from] PathError),
}

fn check_alpha(alpha: f64) -> Result<(), RateError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(RateError::Alpha(alpha))
    }
}

fn power_sum(sizes: impl Iterator<Item = f64>, alpha: f64) -> RateValue {
    RateValue(sizes.map(|x| powf(x, alpha)).sum())
}

/// `Σ x_i^α` on nondecreasing pure-jump paths vanishing at 0 and continuous
/// at the horizon, `∞` elsewhere.
pub fn rate_i(path: &StepPath, alpha: f64) -> Result<RateValue, RateError> {
    check_alpha(alpha)?;
    if !path.is_increasing_pure_jump() {
        return Ok(RateValue::INFINITE);
    }
    Ok(power_sum(path.jumps().iter().map(|j| j.size), alpha))
}

/// [`rate_i`] restricted to paths with at most `k` jumps.
pub fn rate_ik(path: &StepPath, alpha: f64, k: usize) -> Result<RateValue, RateError> {
    let r = rate_i(path, alpha)?;
    if path.jumps().len() > k {
        Ok(RateValue::INFINITE)
    } else {
        Ok(r)
    }
}

/// Weighted sum of [`rate_i`] over the coordinates of a vector path.
pub fn rate_id(paths: &[StepPath], alpha: f64, weights: &[f64]) -> Result<RateValue, RateError> {
    check_alpha(alpha)?;
    if weights.len() != paths.len() {
        return Err(RateError::WeightCount { expected: paths.len(), got: weights.len() });
    }
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(RateError::Weight);
    }
    if let Some(first) = paths.first() {
        if paths.iter().any(|p| !same_horizon(p.horizon(), first.horizon())) {
            return Err(RateError::Horizon);
        }
    }
    let mut total = RateValue::ZERO;
    for (p, &w) in paths.iter().zip(weights) {
        total = total + rate_i(p, alpha)? * w;
    }
    Ok(total)
}

/// Rate for the M1′ topology: jumps at the origin (including an initial
/// value, measured from 0) and at the horizon are allowed.
pub fn rate_im1p(path: &StepPath, alpha: f64) -> Result<RateValue, RateError> {
    check_alpha(alpha)?;
    if path.drift() != 0.0 || path.x0() < 0.0 || path.jumps().iter().any(|j| j.size < 0.0) {
        return Ok(RateValue::INFINITE);
    }
    let at_zero = path.value_at_zero();
    let interior = path.jumps().iter().filter(|j| j.time > 0.0).map(|j| j.size);
    Ok(power_sum(core::iter::once(at_zero).filter(|&x| x > 0.0).chain(interior), alpha))
}

/// `⌊c/b⌋·b^α + (c − b⌊c/b⌋)^α` for `0 < b ≤ c`, 0 at the origin, `∞`
/// elsewhere.
pub fn rate_boundary(c: f64, b: f64, alpha: f64) -> Result<RateValue, RateError> {
    check_alpha(alpha)?;
    if c == 0.0 && b == 0.0 {
        return Ok(RateValue::ZERO);
    }
    if !(b > 0.0 && b <= c && c.is_finite()) {
        return Ok(RateValue::INFINITE);
    }
    let (m, rem) = boundary_parts(c, b);
    Ok(RateValue(m as f64 * powf(b, alpha) + if rem > 0.0 { powf(rem, alpha) } else { 0.0 }))
}

fn boundary_parts(c: f64, b: f64) -> (usize, f64) {
    let m = guarded_floor(c / b);
    let rem = c - m * b;
    let rem = if rem <= TOL * c.max(1.0) { 0.0 } else { rem };
    (m as usize, rem)
}

/// The minimizer behind [`rate_boundary`]: `⌊c/b⌋` jumps of size `b` and one
/// remainder jump, at distinct interior times of `[0, 1]`.
pub fn canonical_boundary_minimizer(c: f64, b: f64) -> Result<StepPath, RateError> {
    if !(b > 0.0 && b <= c && c.is_finite()) {
        return Err(RateError::Boundary { c, b });
    }
    let (m, rem) = boundary_parts(c, b);
    let mut sizes: Vec<f64> = core::iter::repeat(b).take(m).collect();
    if rem > 0.0 {
        sizes.push(rem);
    }
    let slots = (sizes.len() + 1) as f64;
    let jumps = sizes.iter().enumerate().map(|(i, &x)| Jump::new((i + 1) as f64 / slots, x)).collect();
    Ok(StepPath::pure_jump(1.0, jumps)?)
}

/// One step of the merging construction: the smallest jump feeds the first
/// jump (by size) that is still below `b`. Paths already at a fixed point are
/// returned unchanged.
pub fn merge_step(path: &StepPath, b: f64) -> Result<StepPath, RateError> {
    if !path.is_increasing_pure_jump() || path.max_jump() > b * (1.0 + TOL) {
        return Err(RateError::MergeInput);
    }
    let mut jumps = path.sorted_jumps();
    let Some(l) = jumps.iter().position(|j| j.size < b - TOL) else {
        return Ok(path.clone());
    };
    let m = jumps.len() - 1;
    if l == m {
        return Ok(path.clone());
    }
    let room = b - jumps[l].size;
    if jumps[m].size >= room {
        jumps[l].size = b;
        jumps[m].size -= room;
    } else {
        jumps[l].size += jumps[m].size;
        jumps[m].size = 0.0;
    }
    let pairs = jumps.into_iter().filter(|j| j.size > TOL).map(|j| (j.time, j.size)).collect();
    Ok(StepPath::from_unsorted(path.horizon(), 0.0, 0.0, pairs)?)
}

/// Iterate [`merge_step`] to its fixed point; also returns the step count.
pub fn merge_to_fixed_point(path: &StepPath, b: f64) -> Result<(StepPath, usize), RateError> {
    let mut cur = path.clone();
    let mut steps = 0;
    loop {
        let next = merge_step(&cur, b)?;
        if next == cur {
            return Ok((cur, steps));
        }
        cur = next;
        steps += 1;
    }
}

/// Rate of a first-passage path for a renewal process with mean inter-event
/// time `es`: `Σ τ_s^α` over its flat stretches when the path is continuous,
/// starts at 0, stays below `γ/es` and has slopes in `{0, 1/es}`.
pub fn rate_renewal(path: &PiecewisePath, alpha: f64, es: f64, gamma: f64) -> Result<RateValue, RateError> {
    check_alpha(alpha)?;
    if !(es.is_finite() && es > 0.0) {
        return Err(RateError::Path(PathError::Parameter("mean service time must be positive")));
    }
    if !same_horizon(path.horizon(), gamma) {
        return Err(RateError::Path(PathError::HorizonMismatch { expected: gamma, got: path.horizon() }));
    }
    let slope = 1.0 / es;
    let admissible = path.knots()[0].value.abs() <= TOL
        && path.is_continuous(1e-9)
        && path.sup() <= gamma / es + 1e-9
        && path
            .knots()
            .iter()
            .all(|k| k.slope == 0.0 || (k.slope - slope).abs() <= 1e-9 * slope);
    if !admissible {
        return Ok(RateValue::INFINITE);
    }
    Ok(power_sum(path.flat_stretches().iter().map(|s| s.length()), alpha))
}
