//! The many-server queue concave program
//!
//! ```text
//! minimize Σ x_i^α  subject to  λs − Σ (s − x_i)^+ ≥ b  for some s ∈ [0, γ],  x ≥ 0,
//! ```
//!
//! solved by enumerating extreme points, plus two independent search oracles.

use alloc::vec::Vec;
use core::cmp::Ordering;

use thiserror::Error;

use crate::float::{ceil, floor, guarded_floor, powf, round};
use crate::paths::{Knot, PathError, PiecewisePath};
use crate::rates::RateValue;

const FEAS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QueueError {
    #[error("invalid queue parameters: {0}")]
    Spec(&'static str),
    #[error("s = {s} lies outside [0, {gamma}]")]
    Domain { s: f64, gamma: f64 },
    #[error("expected {expected} blocking times, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("search grid too large ({points} points)")]
    ExcessiveGrid { points: f64 },
    #[error("problem is infeasible")]
    Infeasible,
    #[error(transparent)]
    Path(#[from] PathError),
}

/// `d` servers, arrival rate `λ ∈ (0, d)`, Weibull shape `α`, horizon `γ`,
/// target level `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueSpec {
    pub d: usize,
    pub lambda: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub b: f64,
}

impl QueueSpec {
    pub fn new(d: usize, lambda: f64, alpha: f64, gamma: f64, b: f64) -> Result<Self, QueueError> {
        if d == 0 {
            return Err(QueueError::Spec("need at least one server"));
        }
        if !(lambda > 0.0 && lambda < d as f64) {
            return Err(QueueError::Spec("need 0 < lambda < d"));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(QueueError::Spec("need 0 < alpha < 1"));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(QueueError::Spec("need gamma > 0"));
        }
        if !(b.is_finite() && b > 0.0) {
            return Err(QueueError::Spec("need b > 0"));
        }
        Ok(QueueSpec { d, lambda, alpha, gamma, b })
    }

    fn lambda_is_integer(&self) -> bool {
        (self.lambda - round(self.lambda)).abs() <= FEAS_TOL
    }

    /// Largest admissible count of servers idled at time 0.
    fn max_idle(&self) -> usize {
        if self.lambda_is_integer() {
            round(self.lambda) as usize - 1
        } else {
            floor(self.lambda) as usize
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolutionKind {
    /// `d − l` servers blocked for `b/(λ − l)`, `l` servers free.
    Symmetric { l: usize },
    /// `d − k` servers blocked through `γ`, `k − l` blocked for a shared
    /// shorter time, `l` free.
    Mixed { k: usize, l: usize },
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueueSolution {
    pub kind: SolutionKind,
    /// Blocking times, largest first. Empty when infeasible.
    pub x: Vec<f64>,
    pub cstar: RateValue,
    /// Time at which the load gap first reaches `b`.
    pub sstar: Option<f64>,
}

impl QueueSolution {
    fn infeasible() -> Self {
        QueueSolution { kind: SolutionKind::Infeasible, x: Vec::new(), cstar: RateValue::INFINITE, sstar: None }
    }

    fn cost(x: &[f64], alpha: f64) -> f64 {
        x.iter().filter(|&&v| v > 0.0).map(|&v| powf(v, alpha)).sum()
    }
}

/// `λs − Σ (s − x_i)^+`.
pub fn load_gap(s: f64, x: &[f64], spec: &QueueSpec) -> Result<f64, QueueError> {
    if !(s >= 0.0 && s <= spec.gamma) {
        return Err(QueueError::Domain { s, gamma: spec.gamma });
    }
    if x.len() != spec.d {
        return Err(QueueError::Dimension { expected: spec.d, got: x.len() });
    }
    if x.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(QueueError::Spec("blocking times must be finite and nonnegative"));
    }
    Ok(gap_unchecked(s, x, spec.lambda))
}

fn gap_unchecked(s: f64, x: &[f64], lambda: f64) -> f64 {
    lambda * s - x.iter().map(|&xi| (s - xi).max(0.0)).sum::<f64>()
}

fn repeat(v: f64, n: usize) -> impl Iterator<Item = f64> {
    core::iter::repeat(v).take(n)
}

/// Feasible extreme points of the program, scaled to level `b`.
pub fn enumerate_candidates(spec: &QueueSpec) -> Vec<QueueSolution> {
    let g = spec.gamma / spec.b;
    let d = spec.d;
    let lam = spec.lambda;
    let top = spec.max_idle();
    let mut out = Vec::new();
    for l in 0..=top {
        let a = 1.0 / (lam - l as f64);
        if g >= a * (1.0 - FEAS_TOL) {
            let x: Vec<f64> = repeat(a, d - l).chain(repeat(0.0, l)).collect();
            out.push((SolutionKind::Symmetric { l }, x, a));
        }
    }
    for k in 1..=top {
        let upper = 1.0 / (lam - k as f64);
        if g >= upper * (1.0 - FEAS_TOL) {
            continue;
        }
        for l in 0..k {
            if g < (1.0 - FEAS_TOL) / (lam - l as f64) {
                continue;
            }
            let a = ((1.0 - g * (lam - k as f64)) / (k - l) as f64).max(0.0);
            let x: Vec<f64> = repeat(g, d - k).chain(repeat(a, k - l)).chain(repeat(0.0, l)).collect();
            out.push((SolutionKind::Mixed { k, l }, x, g));
        }
    }
    out.into_iter()
        .map(|(kind, x, s)| {
            let x: Vec<f64> = x.into_iter().map(|v| v * spec.b).collect();
            let cstar = RateValue(QueueSolution::cost(&x, spec.alpha));
            QueueSolution { kind, x, cstar, sstar: Some(s * spec.b) }
        })
        .collect()
}

fn kind_rank(k: &SolutionKind) -> (usize, usize, usize) {
    match *k {
        SolutionKind::Symmetric { l } => (0, l, 0),
        SolutionKind::Mixed { k, l } => (1, k, l),
        SolutionKind::Infeasible => (2, 0, 0),
    }
}

/// Optimal extreme point. Ties within `1e-12` go to the symmetric solution
/// with the fewest idle servers.
pub fn solve_cstar(spec: &QueueSpec) -> QueueSolution {
    let mut cands = enumerate_candidates(spec);
    if cands.is_empty() {
        return QueueSolution::infeasible();
    }
    let best = cands.iter().map(|c| c.cstar.value()).fold(f64::INFINITY, f64::min);
    cands.retain(|c| c.cstar.value() <= best + 1e-12 * best.max(1.0));
    cands.sort_by_key(|c| kind_rank(&c.kind));
    cands.swap_remove(0)
}

/// The closed-form expression for `c*`: the symmetric minimum over
/// `l ≤ ⌊λ⌋ ∧ ⌊λ − b/γ⌋` against mixed candidates built on that same `l`.
pub fn cstar_compact(spec: &QueueSpec) -> RateValue {
    let g = spec.gamma / spec.b;
    let lam = spec.lambda;
    let d = spec.d as f64;
    let alpha = spec.alpha;
    if g < (1.0 - FEAS_TOL) / lam {
        return RateValue::INFINITE;
    }
    let cap = floor(lam).min(guarded_floor(lam - 1.0 / g));
    let mut best = f64::INFINITY;
    let mut l = 0.0;
    while l <= cap {
        if lam - l > 0.0 {
            best = best.min((d - l) * powf(1.0 / (lam - l), alpha));
        }
        l += 1.0;
    }
    let mut k = 1.0;
    while k <= floor(lam) {
        if g * (lam - k) < 1.0 - FEAS_TOL && k > cap {
            let v = (d - k) * powf(g, alpha) + powf(1.0 - g * lam + g * k, alpha) * powf(k - cap, 1.0 - alpha);
            best = best.min(v);
        }
        k += 1.0;
    }
    RateValue(best * powf(spec.b, alpha))
}

/// Rescale a level-1 solution to level `b`.
pub fn scale_level(sol: &QueueSolution, b: f64, alpha: f64) -> QueueSolution {
    QueueSolution {
        kind: sol.kind,
        x: sol.x.iter().map(|v| v * b).collect(),
        cstar: sol.cstar * powf(b, alpha),
        sstar: sol.sstar.map(|s| s * b),
    }
}

/// Where the symmetric cost `(d − t)(λ − t)^{−α}` turns from decreasing to
/// increasing, with the integer minimizers next to it.
#[derive(Debug, Clone, PartialEq)]
pub struct IdleThreshold {
    pub tstar: f64,
    pub candidates: Vec<usize>,
}

pub fn lstar_threshold(spec: &QueueSpec) -> IdleThreshold {
    let lam = spec.lambda;
    let d = spec.d as f64;
    let alpha = spec.alpha;
    let tstar = (lam - alpha * d) / (1.0 - alpha);
    let top = spec.max_idle() as f64;
    let f = |t: f64| (d - t) * powf(lam - t, -alpha);
    let lo = floor(tstar).clamp(0.0, top);
    let hi = ceil(tstar).clamp(0.0, top);
    let (flo, fhi) = (f(lo), f(hi));
    let candidates = if lo == hi || (flo - fhi).abs() <= 1e-12 * flo.max(fhi) {
        let mut v = Vec::from([lo as usize]);
        if hi != lo {
            v.push(hi as usize);
        }
        v
    } else if flo < fhi {
        Vec::from([lo as usize])
    } else {
        Vec::from([hi as usize])
    };
    IdleThreshold { tstar, candidates }
}

/// Optimal queue buildup `s ↦ max(load_gap(s), 0)` on `[0, s*]`, plus
/// `npts` evenly spaced samples of it.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueTrajectory {
    pub path: PiecewisePath,
    pub samples: Vec<(f64, f64)>,
}

pub fn most_likely_queue_path(sol: &QueueSolution, spec: &QueueSpec, npts: usize) -> Result<QueueTrajectory, QueueError> {
    let s_end = sol.sstar.ok_or(QueueError::Infeasible)?;
    if sol.x.len() != spec.d {
        return Err(QueueError::Dimension { expected: spec.d, got: sol.x.len() });
    }
    let mut times: Vec<f64> = sol.x.iter().copied().filter(|&v| v > 0.0 && v < s_end).collect();
    times.push(0.0);
    times.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    times.dedup();
    let knots = times
        .iter()
        .map(|&t| {
            let busy = sol.x.iter().filter(|&&xi| xi <= t).count() as f64;
            Knot::new(t, gap_unchecked(t, &sol.x, spec.lambda).max(0.0), spec.lambda - busy)
        })
        .collect();
    let path = PiecewisePath::new(s_end, knots)?;
    let samples = path.samples(npts);
    Ok(QueueTrajectory { path, samples })
}

/// Result of a numerical search over the program.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub cstar: RateValue,
    pub x: Vec<f64>,
    pub s: Option<f64>,
}

/// Brute-force minimization over crossing times `s` on a grid of mesh `h`
/// (plus `s = γ`).
/// For fixed `s` the best blocking vector is an extreme point of
/// `{Σ (s − x_i) ≤ λs − b, 0 ≤ x_i ≤ s}` and is written down directly.
pub fn brute_force_cstar(spec: &QueueSpec, h: f64) -> Result<SearchResult, QueueError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(QueueError::Spec("mesh must be positive"));
    }
    let steps = floor(spec.gamma / h) as usize;
    if steps as f64 > 1e8 {
        return Err(QueueError::ExcessiveGrid { points: steps as f64 });
    }
    let mut best = sweep_range(spec, h, 1..steps + 1);
    let end = sweep_point(spec, spec.gamma);
    if end.cstar < best.cstar {
        best = end;
    }
    Ok(best)
}

/// [`brute_force_cstar`] restricted to grid indices `range` (the point `s = i·h`).
pub fn sweep_range(spec: &QueueSpec, h: f64, range: core::ops::Range<usize>) -> SearchResult {
    let mut best = SearchResult { cstar: RateValue::INFINITE, x: Vec::new(), s: None };
    for i in range {
        let s = (i as f64 * h).min(spec.gamma);
        let r = sweep_point(spec, s);
        if r.cstar < best.cstar {
            best = r;
        }
    }
    best
}

pub fn sweep_point(spec: &QueueSpec, s: f64) -> SearchResult {
    let none = SearchResult { cstar: RateValue::INFINITE, x: Vec::new(), s: None };
    let slack = spec.lambda * s - spec.b;
    if s <= 0.0 || slack < 0.0 {
        return none;
    }
    let full = floor(slack / s) as usize;
    if full >= spec.d {
        return none;
    }
    let rem = (slack - full as f64 * s).max(0.0);
    let x: Vec<f64> = repeat(s, spec.d - full - 1).chain([s - rem]).chain(repeat(0.0, full)).collect();
    let cstar = RateValue(QueueSolution::cost(&x, spec.alpha));
    SearchResult { cstar, x, s: Some(s) }
}

/// Exhaustive search over blocking vectors with coordinates on the grid
/// `{0, h, 2h, …} ∪ {γ}`. Only practical for very few servers.
pub fn grid_search_cstar(spec: &QueueSpec, h: f64) -> Result<SearchResult, QueueError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(QueueError::Spec("mesh must be positive"));
    }
    let mut grid: Vec<f64> = (0..=floor(spec.gamma / h) as usize).map(|i| i as f64 * h).collect();
    if grid.last().map_or(true, |&v| v < spec.gamma) {
        grid.push(spec.gamma);
    }
    let g = grid.len() as f64;
    let mut tuples = 1.0;
    for i in 0..spec.d {
        tuples *= (g + i as f64) / (i + 1) as f64;
    }
    if tuples > 2e7 {
        return Err(QueueError::ExcessiveGrid { points: tuples });
    }
    let mut powered: Vec<f64> = grid.iter().map(|&v| if v > 0.0 { powf(v, spec.alpha) } else { 0.0 }).collect();
    powered.truncate(grid.len());
    let mut state = BruteState { spec, grid: &grid, powered: &powered, x: Vec::with_capacity(spec.d), best: f64::INFINITY, best_x: Vec::new() };
    state.descend(grid.len() - 1, 0.0);
    if state.best.is_infinite() {
        return Ok(SearchResult { cstar: RateValue::INFINITE, x: Vec::new(), s: None });
    }
    let x = state.best_x.clone();
    let s = best_crossing(&x, spec);
    Ok(SearchResult { cstar: RateValue(state.best), x, s })
}

struct BruteState<'a> {
    spec: &'a QueueSpec,
    grid: &'a [f64],
    powered: &'a [f64],
    x: Vec<f64>,
    best: f64,
    best_x: Vec<f64>,
}

impl BruteState<'_> {
    fn descend(&mut self, max_idx: usize, cost: f64) {
        if self.x.len() == self.spec.d {
            if cost < self.best && best_crossing(&self.x, self.spec).is_some() {
                self.best = cost;
                self.best_x = self.x.clone();
            }
            return;
        }
        for i in (0..=max_idx).rev() {
            let c = cost + self.powered[i];
            if c >= self.best {
                continue;
            }
            self.x.push(self.grid[i]);
            self.descend(i, c);
            self.x.pop();
        }
    }
}

/// Earliest breakpoint at which the load gap reaches `b`, if any.
fn best_crossing(x: &[f64], spec: &QueueSpec) -> Option<f64> {
    let mut pts: Vec<f64> = x.iter().copied().filter(|&v| v > 0.0 && v <= spec.gamma).collect();
    pts.push(spec.gamma);
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    pts.into_iter().find(|&s| gap_unchecked(s, x, spec.lambda) >= spec.b - FEAS_TOL)
}
