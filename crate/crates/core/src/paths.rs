//! Càdlàg paths on a finite horizon.
//!
//! [`StepPath`] is the workhorse: an initial value, a linear drift and a finite
//! list of jumps. Functionals such as the running supremum or the
//! first-passage inverse leave that class, so they return a
//! [`PiecewisePath`], a right-continuous piecewise-linear path with jumps at
//! its knots.

use alloc::vec::Vec;
use core::cmp::Ordering;

use thiserror::Error;

use crate::TOL;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PathError {
    #[error("horizon must be finite and positive, got {0}")]
    Horizon(f64),
    #[error("path data contains a non-finite value")]
    NonFinite,
    #[error("time {t} lies outside [0, {horizon}]")]
    Domain { t: f64, horizon: f64 },
    #[error("times must be strictly increasing")]
    Unsorted,
    #[error("path must be nondecreasing")]
    NotMonotone,
    #[error("horizon mismatch: expected {expected}, got {got}")]
    HorizonMismatch { expected: f64, got: f64 },
    #[error("invalid parameter: {0}")]
    Parameter(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub time: f64,
    pub size: f64,
}

impl Jump {
    pub fn new(time: f64, size: f64) -> Self {
        Jump { time, size }
    }
}

/// `ξ(t) = x0 + drift·t + Σ_{u_i ≤ t} x_i` on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepPath {
    horizon: f64,
    x0: f64,
    drift: f64,
    jumps: Vec<Jump>,
}

fn check_horizon(horizon: f64) -> Result<(), PathError> {
    if horizon.is_finite() && horizon > 0.0 {
        Ok(())
    } else {
        Err(PathError::Horizon(horizon))
    }
}

pub(crate) fn same_horizon(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL * a.abs().max(b.abs()).max(1.0)
}

impl StepPath {
    /// Jumps must have strictly increasing times in `[0, T]`. Zero-size jumps
    /// are dropped.
    pub fn new(horizon: f64, x0: f64, drift: f64, jumps: Vec<Jump>) -> Result<Self, PathError> {
        check_horizon(horizon)?;
        if !x0.is_finite() || !drift.is_finite() {
            return Err(PathError::NonFinite);
        }
        let mut prev = f64::NEG_INFINITY;
        for j in &jumps {
            if !j.time.is_finite() || !j.size.is_finite() {
                return Err(PathError::NonFinite);
            }
            if j.time < 0.0 || j.time > horizon {
                return Err(PathError::Domain { t: j.time, horizon });
            }
            if j.time <= prev {
                return Err(PathError::Unsorted);
            }
            prev = j.time;
        }
        let jumps = jumps.into_iter().filter(|j| j.size != 0.0).collect();
        Ok(StepPath { horizon, x0, drift, jumps })
    }

    /// Pure-jump path from `(time, size)` pairs in any order. Jumps sharing a
    /// time are added together.
    pub fn from_unsorted(horizon: f64, x0: f64, drift: f64, mut pairs: Vec<(f64, f64)>) -> Result<Self, PathError> {
        if pairs.iter().any(|p| p.0.is_nan()) {
            return Err(PathError::NonFinite);
        }
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));
        let mut jumps: Vec<Jump> = Vec::with_capacity(pairs.len());
        for (t, x) in pairs {
            match jumps.last_mut() {
                Some(last) if last.time == t => last.size += x,
                _ => jumps.push(Jump::new(t, x)),
            }
        }
        StepPath::new(horizon, x0, drift, jumps)
    }

    pub fn pure_jump(horizon: f64, jumps: Vec<Jump>) -> Result<Self, PathError> {
        StepPath::new(horizon, 0.0, 0.0, jumps)
    }

    pub fn zero(horizon: f64) -> Result<Self, PathError> {
        StepPath::new(horizon, 0.0, 0.0, Vec::new())
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    /// Jumps in time order.
    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    fn check_time(&self, t: f64) -> Result<(), PathError> {
        if t.is_nan() || t < 0.0 || t > self.horizon {
            Err(PathError::Domain { t, horizon: self.horizon })
        } else {
            Ok(())
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64, PathError> {
        self.check_time(t)?;
        let idx = self.jumps.partition_point(|j| j.time <= t);
        Ok(self.x0 + self.drift * t + self.jumps[..idx].iter().map(|j| j.size).sum::<f64>())
    }

    /// Value just before `t`. At `t = 0` this is `x0`, the value before any
    /// jump placed at the origin.
    pub fn left_limit(&self, t: f64) -> Result<f64, PathError> {
        self.check_time(t)?;
        let idx = self.jumps.partition_point(|j| j.time < t);
        Ok(self.x0 + self.drift * t + self.jumps[..idx].iter().map(|j| j.size).sum::<f64>())
    }

    pub fn value_at_zero(&self) -> f64 {
        self.x0 + self.jumps.first().filter(|j| j.time == 0.0).map_or(0.0, |j| j.size)
    }

    pub fn end_value(&self) -> f64 {
        self.x0 + self.drift * self.horizon + self.jumps.iter().map(|j| j.size).sum::<f64>()
    }

    /// Jumps ordered by size, largest first, ties broken by earlier time.
    pub fn sorted_jumps(&self) -> Vec<Jump> {
        let mut v = self.jumps.clone();
        v.sort_by(|a, b| {
            b.size
                .partial_cmp(&a.size)
                .unwrap_or(Ordering::Equal)
                .then(a.time.partial_cmp(&b.time).unwrap_or(Ordering::Equal))
        });
        v
    }

    /// Largest jump size, or 0 when there is no upward jump.
    pub fn max_jump(&self) -> f64 {
        self.jumps.iter().map(|j| j.size).fold(0.0, f64::max)
    }

    /// Values at the right of 0 and at both sides of every jump, plus the end
    /// value. Between these points the path is linear.
    fn extreme_candidates(&self) -> impl Iterator<Item = f64> + '_ {
        let mut level = self.x0;
        let mut last_t = 0.0;
        let mut out = Vec::with_capacity(2 * self.jumps.len() + 2);
        for j in &self.jumps {
            level += self.drift * (j.time - last_t);
            last_t = j.time;
            if j.time > 0.0 {
                out.push(level);
            }
            level += j.size;
            out.push(level);
        }
        if self.jumps.first().map_or(true, |j| j.time > 0.0) {
            out.push(self.x0);
        }
        out.push(self.end_value());
        out.into_iter()
    }

    pub fn sup(&self) -> f64 {
        self.extreme_candidates().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn inf(&self) -> f64 {
        self.extreme_candidates().fold(f64::INFINITY, f64::min)
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.drift >= 0.0 && self.jumps.iter().all(|j| j.size > 0.0)
    }

    /// Membership in the space of nondecreasing pure-jump paths that vanish
    /// at the origin and are continuous at the horizon.
    pub fn is_increasing_pure_jump(&self) -> bool {
        self.x0 == 0.0
            && self.drift == 0.0
            && self
                .jumps
                .iter()
                .all(|j| j.size > 0.0 && j.time > 0.0 && j.time < self.horizon)
    }

    /// Split into the `k` largest jumps and everything else.
    pub fn truncate_topk(&self, k: usize) -> (StepPath, StepPath) {
        let sorted = self.sorted_jumps();
        let k = k.min(sorted.len());
        let mut kept: Vec<Jump> = sorted[..k].to_vec();
        let mut rest: Vec<Jump> = sorted[k..].to_vec();
        let by_time = |a: &Jump, b: &Jump| a.time.partial_cmp(&b.time).unwrap_or(Ordering::Equal);
        kept.sort_by(by_time);
        rest.sort_by(by_time);
        (
            StepPath { horizon: self.horizon, x0: 0.0, drift: 0.0, jumps: kept },
            StepPath { horizon: self.horizon, x0: self.x0, drift: self.drift, jumps: rest },
        )
    }

    /// `a·self + b·other` on a common horizon.
    pub fn combine(&self, a: f64, other: &StepPath, b: f64) -> Result<StepPath, PathError> {
        if !same_horizon(self.horizon, other.horizon) {
            return Err(PathError::HorizonMismatch { expected: self.horizon, got: other.horizon });
        }
        let mut pairs: Vec<(f64, f64)> = self.jumps.iter().map(|j| (j.time, a * j.size)).collect();
        pairs.extend(other.jumps.iter().map(|j| (j.time.min(self.horizon), b * j.size)));
        StepPath::from_unsorted(
            self.horizon,
            a * self.x0 + b * other.x0,
            a * self.drift + b * other.drift,
            pairs,
        )
    }

    pub fn running_sup(&self) -> PiecewisePath {
        PiecewisePath::from(self).running_sup()
    }
}

/// `(sup, largest jump)` of a step path.
pub fn path_functionals(path: &StepPath) -> (f64, f64) {
    (path.sup(), path.max_jump())
}

/// Breakpoint of a [`PiecewisePath`]: on `[time, next)` the path equals
/// `value + slope·(t − time)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Knot {
    pub time: f64,
    pub value: f64,
    pub slope: f64,
}

impl Knot {
    pub fn new(time: f64, value: f64, slope: f64) -> Self {
        Knot { time, value, slope }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePath {
    horizon: f64,
    knots: Vec<Knot>,
}

/// A maximal interval on which a path is constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatStretch {
    pub level: f64,
    pub start: f64,
    pub end: f64,
}

impl FlatStretch {
    pub fn length(&self) -> f64 {
        self.end - self.start
    }
}

impl PiecewisePath {
    /// The first knot must sit at 0, times must increase strictly and the
    /// last knot may sit exactly at the horizon.
    pub fn new(horizon: f64, knots: Vec<Knot>) -> Result<Self, PathError> {
        check_horizon(horizon)?;
        match knots.first() {
            Some(k) if k.time == 0.0 => {}
            _ => return Err(PathError::Parameter("first knot must be at time 0")),
        }
        let mut prev = f64::NEG_INFINITY;
        for k in &knots {
            if !k.time.is_finite() || !k.value.is_finite() || !k.slope.is_finite() {
                return Err(PathError::NonFinite);
            }
            if k.time <= prev {
                return Err(PathError::Unsorted);
            }
            if k.time > horizon {
                return Err(PathError::Domain { t: k.time, horizon });
            }
            prev = k.time;
        }
        Ok(PiecewisePath { horizon, knots })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn knots(&self) -> &[Knot] {
        &self.knots
    }

    fn piece_end_time(&self, i: usize) -> f64 {
        self.knots.get(i + 1).map_or(self.horizon, |k| k.time)
    }

    /// Left limit at the end of piece `i`.
    fn piece_end_value(&self, i: usize) -> f64 {
        let k = &self.knots[i];
        k.value + k.slope * (self.piece_end_time(i) - k.time)
    }

    pub fn eval(&self, t: f64) -> Result<f64, PathError> {
        if t.is_nan() || t < 0.0 || t > self.horizon {
            return Err(PathError::Domain { t, horizon: self.horizon });
        }
        let i = self.knots.partition_point(|k| k.time <= t) - 1;
        let k = &self.knots[i];
        Ok(k.value + k.slope * (t - k.time))
    }

    pub fn left_limit(&self, t: f64) -> Result<f64, PathError> {
        if t.is_nan() || t < 0.0 || t > self.horizon {
            return Err(PathError::Domain { t, horizon: self.horizon });
        }
        if t == 0.0 {
            return Ok(self.knots[0].value);
        }
        let i = self.knots.partition_point(|k| k.time < t) - 1;
        let k = &self.knots[i];
        Ok(k.value + k.slope * (t - k.time))
    }

    /// Discontinuities at interior knots (and at the horizon).
    pub fn jumps(&self) -> Vec<Jump> {
        (1..self.knots.len())
            .filter_map(|i| {
                let size = self.knots[i].value - self.piece_end_value(i - 1);
                (size != 0.0).then(|| Jump::new(self.knots[i].time, size))
            })
            .collect()
    }

    fn extreme_candidates(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.knots.len()).flat_map(move |i| [self.knots[i].value, self.piece_end_value(i)])
    }

    pub fn sup(&self) -> f64 {
        self.extreme_candidates().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn inf(&self) -> f64 {
        self.extreme_candidates().fold(f64::INFINITY, f64::min)
    }

    pub fn end_value(&self) -> f64 {
        self.piece_end_value(self.knots.len() - 1)
    }

    pub fn max_abs_jump(&self) -> f64 {
        self.jumps().iter().map(|j| j.size.abs()).fold(0.0, f64::max)
    }

    pub fn is_nondecreasing(&self, tol: f64) -> bool {
        self.knots.iter().all(|k| k.slope >= -tol) && self.jumps().iter().all(|j| j.size >= -tol)
    }

    pub fn is_continuous(&self, tol: f64) -> bool {
        self.max_abs_jump() <= tol
    }

    pub fn running_sup(&self) -> PiecewisePath {
        let mut out: Vec<Knot> = Vec::with_capacity(self.knots.len() + 4);
        let mut push = |k: Knot| {
            if let Some(last) = out.last_mut() {
                if last.time == k.time {
                    *last = k;
                    return;
                }
                if last.slope == 0.0 && k.slope == 0.0 && last.value == k.value {
                    return;
                }
            }
            out.push(k);
        };
        let mut m = f64::NEG_INFINITY;
        for i in 0..self.knots.len() {
            let k = self.knots[i];
            let end_t = self.piece_end_time(i);
            let end_v = self.piece_end_value(i);
            if k.value >= m {
                if k.slope > 0.0 {
                    push(k);
                    m = end_v.max(k.value);
                } else {
                    push(Knot::new(k.time, k.value, 0.0));
                    m = k.value;
                }
            } else if k.slope > 0.0 && end_v > m {
                let tc = k.time + (m - k.value) / k.slope;
                push(Knot::new(k.time, m, 0.0));
                if tc < end_t {
                    push(Knot::new(tc, m, k.slope));
                }
                m = end_v;
            } else {
                push(Knot::new(k.time, m, 0.0));
            }
        }
        PiecewisePath { horizon: self.horizon, knots: out }
    }

    /// Maximal constancy intervals of positive length. A discontinuity
    /// always ends a stretch.
    pub fn flat_stretches(&self) -> Vec<FlatStretch> {
        let mut out: Vec<FlatStretch> = Vec::new();
        let mut open: Option<FlatStretch> = None;
        for i in 0..self.knots.len() {
            let k = self.knots[i];
            let end = self.piece_end_time(i);
            let continues = open.map_or(false, |s| s.end == k.time && (s.level - k.value).abs() <= TOL);
            if k.slope == 0.0 && end > k.time {
                match open.as_mut() {
                    Some(s) if continues => s.end = end,
                    _ => {
                        if let Some(s) = open.take() {
                            out.push(s);
                        }
                        open = Some(FlatStretch { level: k.value, start: k.time, end });
                    }
                }
            } else if end > k.time || !continues {
                if let Some(s) = open.take() {
                    out.push(s);
                }
            }
        }
        if let Some(s) = open {
            out.push(s);
        }
        out
    }

    /// `npts` evenly spaced samples `(t, ξ(t))`, endpoints included.
    pub fn samples(&self, npts: usize) -> Vec<(f64, f64)> {
        match npts {
            0 => Vec::new(),
            1 => Vec::from([(0.0, self.knots[0].value)]),
            _ => (0..npts)
                .map(|i| {
                    let t = if i + 1 == npts { self.horizon } else { self.horizon * i as f64 / (npts - 1) as f64 };
                    (t, self.eval(t).unwrap_or(f64::NAN))
                })
                .collect(),
        }
    }

    /// Restriction of a path given on `[lo, ∞)` by `knots` to `[0, hi]`,
    /// shifted so that it starts at 0 when `lo < 0`.
    fn clip(knots: &[Knot], hi: f64) -> Result<PiecewisePath, PathError> {
        let first = knots.partition_point(|k| k.time <= 0.0).saturating_sub(1);
        let k0 = knots[first];
        let mut out = Vec::from([Knot::new(0.0, k0.value + k0.slope * (0.0 - k0.time), k0.slope)]);
        out.extend(knots[first + 1..].iter().copied().filter(|k| k.time > 0.0 && k.time <= hi));
        PiecewisePath::new(hi, out)
    }
}

impl From<&StepPath> for PiecewisePath {
    fn from(p: &StepPath) -> Self {
        let mut knots = Vec::with_capacity(p.jumps.len() + 1);
        knots.push(Knot::new(0.0, p.value_at_zero(), p.drift));
        let mut level = p.value_at_zero();
        let mut last_t = 0.0;
        for j in p.jumps.iter().filter(|j| j.time > 0.0) {
            level += p.drift * (j.time - last_t) + j.size;
            last_t = j.time;
            knots.push(Knot::new(j.time, level, p.drift));
        }
        PiecewisePath { horizon: p.horizon, knots }
    }
}

/// First-passage inverse `Φ_μ = φ ∧ ψ` of a path on `[0, γ/μ]`, returned on
/// `[0, γ]`, where `φ(t) = inf{s : ξ̄(s) > t}` for the running supremum `ξ̄`
/// and `ψ(t) = (γ + (t − sup ξ)^+)/μ`.
pub fn first_passage_map(path: &PiecewisePath, mu: f64, gamma: f64) -> Result<PiecewisePath, PathError> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(PathError::Parameter("mu must be positive"));
    }
    check_horizon(gamma)?;
    let s_max = gamma / mu;
    if !same_horizon(path.horizon, s_max) {
        return Err(PathError::HorizonMismatch { expected: s_max, got: path.horizon });
    }
    let xi = path.running_sup();
    let mut out: Vec<Knot> = Vec::with_capacity(2 * xi.knots.len() + 2);
    let mut push = |k: Knot| match out.last_mut() {
        Some(last) if last.time >= k.time => *last = k,
        _ => out.push(k),
    };
    let v0 = xi.knots[0].value;
    if v0 > 0.0 {
        push(Knot::new(0.0, 0.0, 0.0));
    }
    let mut prev_end = f64::NAN;
    for i in 0..xi.knots.len() {
        let k = xi.knots[i];
        if i > 0 && k.value > prev_end {
            push(Knot::new(prev_end, k.time, 0.0));
        }
        let end_t = xi.piece_end_time(i);
        let end_v = xi.piece_end_value(i);
        if k.slope > 0.0 && end_t > k.time {
            push(Knot::new(k.value, k.time, 1.0 / k.slope));
        }
        prev_end = end_v;
    }
    push(Knot::new(prev_end, xi.horizon, 1.0 / mu));
    PiecewisePath::clip(&out, gamma)
}
