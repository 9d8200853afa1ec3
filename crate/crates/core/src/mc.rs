//! Naive Monte Carlo for rare path events.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use thiserror::Error;

use crate::float::{ln, powf, sqrt};
use crate::paths::{Jump, StepPath};
use crate::queueopt::QueueSpec;
use crate::sim::{
    queue_bound_trial, simulate_scaled_levy, simulate_scaled_walk, ArrivalLaw, RngStream,
    SimError, TailModel,
};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

pub const MIN_TRIALS: u64 = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McError {
    #[error("need at least {MIN_TRIALS} trials, got {0}")]
    TooFewTrials(u64),
    #[error("need at least two points with hits and distinct scales")]
    InsufficientData,
    #[error("no trial hit the event")]
    NoHits,
    #[error("census needs a boundary-crossing event")]
    NotBoundary,
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Wilson score interval.
pub fn wilson(hits: u64, trials: u64, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    ((center - half).max(0.0).min(p), (center + half).min(1.0).max(p))
}

#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub n: u64,
    pub trials: u64,
    pub hits: u64,
    pub phat: f64,
    pub ci95: (f64, f64),
    /// `log(phat)/(c n^α)`; `None` when there were no hits.
    pub norm_log: Option<f64>,
}

impl McEstimate {
    pub fn from_counts(n: u64, trials: u64, hits: u64, tail: &TailModel) -> McEstimate {
        let phat = hits as f64 / trials as f64;
        let norm_log = (hits > 0).then(|| ln(phat) / speed(n as f64, tail));
        McEstimate { n, trials, hits, phat, ci95: wilson(hits, trials, Z95), norm_log }
    }
}

/// `c n^α`.
pub fn speed(n: f64, tail: &TailModel) -> f64 {
    tail.c * powf(n, tail.alpha)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Generator {
    Walk,
    Levy { jump_floor: f64 },
}

#[derive(Debug, Clone, Copy)]
pub enum EventKind {
    /// `sup X̄ ≥ level` with every jump at most `cap`.
    BoundaryCross { level: f64, cap: f64 },
    /// `‖K̄^k‖_∞ > eps`, where `K̄^k` keeps every jump but the `k` largest
    /// and charges each jump its share of the compensator.
    ResidualSup { k: usize, eps: f64 },
    /// Arrivals outrun `d` renewal servers by `b` before `γ`.
    QueueBound { spec: QueueSpec, arrivals: ArrivalLaw },
    Custom(fn(&StepPath) -> bool),
}

/// An event together with the model that generates its paths. For queue
/// events `tail` is the unit-mean service tail.
#[derive(Debug, Clone, Copy)]
pub struct EventSpec {
    pub kind: EventKind,
    pub tail: TailModel,
    pub generator: Generator,
}

impl EventSpec {
    pub fn queue(spec: QueueSpec, arrivals: ArrivalLaw) -> Result<Self, McError> {
        Ok(EventSpec {
            kind: EventKind::QueueBound { spec, arrivals },
            tail: TailModel::unit_mean(spec.alpha)?,
            generator: Generator::Walk,
        })
    }

    pub fn generate(&self, n: usize, stream: RngStream) -> Result<StepPath, McError> {
        let mut rng = stream.rng();
        Ok(match self.generator {
            Generator::Walk => simulate_scaled_walk(n, &self.tail, &mut rng)?,
            Generator::Levy { jump_floor } => simulate_scaled_levy(n, &self.tail, jump_floor, &mut rng)?,
        })
    }

    /// One trial on its own stream.
    pub fn trial(&self, n: usize, stream: RngStream) -> Result<bool, McError> {
        match self.kind {
            EventKind::QueueBound { spec, arrivals } => {
                Ok(queue_bound_trial(&spec, n, arrivals, stream)?)
            }
            _ => {
                let path = self.generate(n, stream)?;
                Ok(self.holds(&path, n))
            }
        }
    }

    /// Predicate for path-valued events generated at scale `n`; queue events
    /// are never decided from a single path.
    pub fn holds(&self, path: &StepPath, n: usize) -> bool {
        match self.kind {
            EventKind::BoundaryCross { level, cap } => {
                path.sup() >= level && path.jumps().iter().all(|j| j.size.abs() <= cap)
            }
            EventKind::ResidualSup { k, eps } => {
                let per_jump = match self.generator {
                    Generator::Walk => 0.0,
                    Generator::Levy { jump_floor } => self.tail.mean_above(jump_floor.max(1.0)) / n as f64,
                };
                residual_sup(path, k, per_jump) > eps
            }
            EventKind::Custom(f) => f(path),
            EventKind::QueueBound { .. } => false,
        }
    }
}

/// `sup_t |Σ_{u_i ≤ t, rank i > k} x_i − per_jump·#{u_i ≤ t}|` over the
/// jumps of `path`; drift is ignored.
pub fn residual_sup(path: &StepPath, k: usize, per_jump: f64) -> f64 {
    let top: Vec<Jump> = path.sorted_jumps().into_iter().take(k).collect();
    let mut level = 0.0f64;
    let mut best = 0.0f64;
    for j in path.jumps() {
        if !top.contains(j) {
            level += j.size;
        }
        level -= per_jump;
        best = best.max(level.abs());
    }
    best
}

/// Sequential estimate; trial `i` uses stream `i` of `seed`.
pub fn estimate_event(ev: &EventSpec, n: usize, trials: u64, seed: u64) -> Result<McEstimate, McError> {
    if trials < MIN_TRIALS {
        return Err(McError::TooFewTrials(trials));
    }
    let mut hits = 0;
    for i in 0..trials {
        if ev.trial(n, RngStream::new(seed, i))? {
            hits += 1;
        }
    }
    Ok(McEstimate::from_counts(n as u64, trials, hits, &ev.tail))
}

/// One point for the slope fit: `log p` at scale `n` with a regression
/// weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopePoint {
    pub n: f64,
    pub log_p: f64,
    pub weight: f64,
}

impl SlopePoint {
    /// Inverse delta-method variance `hits/(1 − phat)` as weight.
    pub fn from_estimate(e: &McEstimate) -> Option<SlopePoint> {
        (e.hits > 0).then(|| SlopePoint {
            n: e.n as f64,
            log_p: ln(e.phat),
            weight: e.hits as f64 / (1.0 - e.phat).max(1.0 / e.trials as f64),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// `log p / (c n^α)` for each input point.
    pub per_n: Vec<f64>,
}

/// Weighted least squares of `log p` on `c n^α`.
pub fn fit_normalized_slope(points: &[SlopePoint], tail: &TailModel) -> Result<SlopeFit, McError> {
    let pts: Vec<(f64, f64, f64)> = points
        .iter()
        .filter(|p| p.log_p.is_finite() && p.weight > 0.0)
        .map(|p| (speed(p.n, tail), p.log_p, p.weight))
        .collect();
    if pts.len() < 2 {
        return Err(McError::InsufficientData);
    }
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let mx = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let my = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.0 - mx)).sum();
    if !(sxx > 0.0) {
        return Err(McError::InsufficientData);
    }
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Ok(SlopeFit { slope, intercept: my - slope * mx, per_n: pts.iter().map(|p| p.1 / p.0).collect() })
}

/// Jump structure of the paths that hit a boundary-crossing event.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpCensus {
    pub trials: u64,
    pub hits: u64,
    /// Number of hit paths by count of jumps at least `0.9·min(cap, level)`.
    pub near_cap: BTreeMap<usize, u64>,
    /// Hit paths that also carry a jump below that threshold but at least
    /// half of the remainder `level − ⌊level/cap⌋·cap`.
    pub with_secondary: u64,
}

impl JumpCensus {
    pub fn mode(&self) -> Option<usize> {
        self.near_cap.iter().max_by_key(|(k, v)| (**v, core::cmp::Reverse(**k))).map(|(k, _)| *k)
    }
}

pub fn conditioned_jump_census(ev: &EventSpec, n: usize, trials: u64, seed: u64) -> Result<JumpCensus, McError> {
    let EventKind::BoundaryCross { level, cap } = ev.kind else {
        return Err(McError::NotBoundary);
    };
    if trials < MIN_TRIALS {
        return Err(McError::TooFewTrials(trials));
    }
    let mut census = JumpCensus { trials, hits: 0, near_cap: BTreeMap::new(), with_secondary: 0 };
    for i in 0..trials {
        let path = ev.generate(n, RngStream::new(seed, i))?;
        if ev.holds(&path, n) {
            census_record(&mut census, &path, level, cap);
        }
    }
    if census.hits == 0 {
        return Err(McError::NoHits);
    }
    Ok(census)
}

/// Add one hit path to a census.
pub fn census_record(census: &mut JumpCensus, path: &StepPath, level: f64, cap: f64) {
    let thr = 0.9 * cap.min(level);
    let rem = if cap <= level { level - crate::float::guarded_floor(level / cap) * cap } else { 0.0 };
    let near = path.jumps().iter().filter(|j| j.size >= thr).count();
    census.hits += 1;
    *census.near_cap.entry(near).or_insert(0) += 1;
    if rem > 1e-9 && path.jumps().iter().any(|j| j.size < thr && j.size >= 0.5 * rem) {
        census.with_secondary += 1;
    }
}
