//! Uniform, J1 and M1′ distances between step paths.
//!
//! J1 is solved exactly by a dynamic program over order-preserving partial
//! matchings of the two jump sequences, driven by binary search over the
//! finite set of candidate values. M1′ is the Fréchet distance under the
//! max-norm between the extended completed graphs, which are polylines; the
//! free-space decision procedure is exact for each tolerance and is bisected
//! to 1e-13.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::float::floor;
use crate::paths::{same_horizon, Jump, PathError, PiecewisePath, StepPath};

/// Slack used when comparing against a candidate value.
const CMP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("paths live on different horizons ({0} vs {1})")]
    Horizon(f64, f64),
    #[error("J1 distance is implemented for drift-free step paths")]
    Drift,
    #[error("M1' distance needs nondecreasing paths with nonnegative initial value")]
    NotMonotone,
    #[error(transparent)]
    Path(#[from] PathError),
}

fn check_horizons(a: f64, b: f64) -> Result<(), MetricError> {
    if same_horizon(a, b) {
        Ok(())
    } else {
        Err(MetricError::Horizon(a, b))
    }
}

/// `sup_t |a(t) − b(t)|`, exact because both paths are linear between
/// their merged breakpoints.
pub fn d_uniform(a: &StepPath, b: &StepPath) -> Result<f64, MetricError> {
    d_uniform_pl(&PiecewisePath::from(a), &PiecewisePath::from(b))
}

pub fn d_uniform_pl(a: &PiecewisePath, b: &PiecewisePath) -> Result<f64, MetricError> {
    check_horizons(a.horizon(), b.horizon())?;
    let h = a.horizon();
    let mut times: Vec<f64> = a.knots().iter().chain(b.knots()).map(|k| k.time.min(h)).collect();
    times.push(h);
    times.sort_by(|x, y| x.partial_cmp(y).unwrap_or(Ordering::Equal));
    times.dedup();
    let mut best: f64 = 0.0;
    for &t in &times {
        best = best.max((a.eval(t)? - b.eval(t)?).abs());
        best = best.max((a.left_limit(t)? - b.left_limit(t)?).abs());
    }
    Ok(best)
}

/// Step structure used by the J1 program: interior jump times, the levels
/// between them and the original index of every interior jump.
struct Levels {
    times: Vec<f64>,
    levels: Vec<f64>,
    index: Vec<usize>,
}

impl Levels {
    fn of(p: &StepPath) -> Levels {
        let mut levels = vec![p.value_at_zero()];
        let mut times = Vec::new();
        let mut index = Vec::new();
        let mut cur = p.value_at_zero();
        for (k, j) in p.jumps().iter().enumerate() {
            if j.time > 0.0 {
                cur += j.size;
                times.push(j.time);
                levels.push(cur);
                index.push(k);
            }
        }
        Levels { times, levels, index }
    }
}

/// J1 distance together with an optimal matching, given as index pairs into
/// `a.jumps()` and `b.jumps()`.
#[derive(Debug, Clone, PartialEq)]
pub struct J1Distance {
    pub distance: f64,
    pub matching: Vec<(usize, usize)>,
}

#[derive(Clone, Copy)]
enum Move {
    Start,
    Both,
    First,
    Second,
}

fn le(x: f64, y: f64) -> bool {
    x <= y + CMP_TOL
}

/// Feasibility of `d_J1 ≤ eps`; on success returns the matched interior
/// jump pairs.
fn j1_decide(x: &Levels, y: &Levels, horizon: f64, eps: f64) -> Option<Vec<(usize, usize)>> {
    let (m, n) = (x.times.len(), y.times.len());
    let w = n + 1;
    let inf = f64::INFINITY;
    let mut pos = vec![inf; (m + 1) * w];
    let mut from = vec![Move::Start; (m + 1) * w];
    let ok = |i: usize, j: usize| le((x.levels[i] - y.levels[j]).abs(), eps);
    if !ok(0, 0) {
        return None;
    }
    pos[0] = 0.0;
    for i in 0..=m {
        for j in 0..=n {
            let p = pos[i * w + j];
            if p.is_infinite() {
                continue;
            }
            let second_done_at_end = j > 0 && y.times[j - 1] == horizon;
            let mut relax = |ii: usize, jj: usize, q: f64, mv: Move| {
                let c = ii * w + jj;
                if q < pos[c] {
                    pos[c] = q;
                    from[c] = mv;
                }
            };
            if i < m && j < n && ok(i + 1, j + 1) {
                let (u, v) = (x.times[i], y.times[j]);
                if (u == horizon) == (v == horizon) && le((u - v).abs(), eps) && le(p, v) {
                    relax(i + 1, j + 1, v, Move::Both);
                }
            }
            if i < m && ok(i + 1, j) {
                let u = x.times[i];
                if u == horizon || !second_done_at_end {
                    let lower = if u == horizon { horizon } else { p.max(u - eps) };
                    let next = if j < n { y.times[j] } else { horizon };
                    let upper = (u + eps).min(next).min(horizon);
                    if le(lower, upper) {
                        relax(i + 1, j, lower, Move::First);
                    }
                }
            }
            if j < n && ok(i, j + 1) {
                let v = y.times[j];
                if le(p, v) {
                    relax(i, j + 1, v, Move::Second);
                }
            }
        }
    }
    if pos[m * w + n].is_infinite() {
        return None;
    }
    let mut pairs = Vec::new();
    let (mut i, mut j) = (m, n);
    while i > 0 || j > 0 {
        match from[i * w + j] {
            Move::Both => {
                pairs.push((x.index[i - 1], y.index[j - 1]));
                i -= 1;
                j -= 1;
            }
            Move::First => i -= 1,
            Move::Second => j -= 1,
            Move::Start => break,
        }
    }
    pairs.reverse();
    Some(pairs)
}

/// Exact J1 distance between drift-free step paths.
pub fn d_j1(a: &StepPath, b: &StepPath) -> Result<J1Distance, MetricError> {
    check_horizons(a.horizon(), b.horizon())?;
    if a.drift() != 0.0 || b.drift() != 0.0 {
        return Err(MetricError::Drift);
    }
    let h = a.horizon();
    let x = Levels::of(a);
    let y = Levels::of(b);
    let mut cands: Vec<f64> = vec![0.0];
    for &l in &x.levels {
        cands.extend(y.levels.iter().map(|&m| (l - m).abs()));
    }
    for &u in &x.times {
        cands.extend(y.times.iter().map(|&v| (u - v).abs()));
    }
    cands.sort_by(|p, q| p.partial_cmp(q).unwrap_or(Ordering::Equal));
    cands.dedup();
    let (mut lo, mut hi) = (0usize, cands.len() - 1);
    let mut witness = j1_decide(&x, &y, h, cands[hi]);
    if witness.is_none() {
        // Identity time change is always admissible; reached only through
        // rounding trouble.
        return Ok(J1Distance { distance: d_uniform(a, b)?, matching: Vec::new() });
    }
    while lo < hi {
        let mid = (lo + hi) / 2;
        match j1_decide(&x, &y, h, cands[mid]) {
            Some(wt) => {
                hi = mid;
                witness = Some(wt);
            }
            None => lo = mid + 1,
        }
    }
    if let Some(wt) = j1_decide(&x, &y, h, cands[hi]) {
        witness = Some(wt);
    }
    Ok(J1Distance { distance: cands[hi], matching: witness.unwrap_or_default() })
}

type Pt = [f64; 2];

fn dist(p: Pt, q: Pt) -> f64 {
    (p[0] - q[0]).abs().max((p[1] - q[1]).abs())
}

/// Vertices of the extended completed graph as `(value, time)` points, in
/// traversal order.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphParam {
    /// Parameter of each vertex, evenly spaced on `[0, 1]`.
    pub s: Vec<f64>,
    pub u: Vec<f64>,
    pub t: Vec<f64>,
}

impl GraphParam {
    fn points(&self) -> Vec<Pt> {
        self.u.iter().zip(&self.t).map(|(&u, &t)| [u, t]).collect()
    }
}

/// The polyline `(0,0) → (ξ(0),0) → … → (ξ(T),T)` through every jump.
pub fn extended_graph(p: &StepPath) -> Result<GraphParam, MetricError> {
    if !(p.is_nondecreasing() && p.value_at_zero() >= 0.0) {
        return Err(MetricError::NotMonotone);
    }
    let mut pts: Vec<Pt> = vec![[0.0, 0.0], [p.value_at_zero(), 0.0]];
    let mut level = p.value_at_zero();
    let mut last_t = 0.0;
    for j in p.jumps().iter().filter(|j| j.time > 0.0) {
        level += p.drift() * (j.time - last_t);
        last_t = j.time;
        pts.push([level, j.time]);
        level += j.size;
        pts.push([level, j.time]);
    }
    pts.push([p.end_value(), p.horizon()]);
    pts.dedup();
    if pts.len() == 1 {
        pts.push(pts[0]);
    }
    let last = (pts.len() - 1) as f64;
    Ok(GraphParam {
        s: (0..pts.len()).map(|i| i as f64 / last).collect(),
        u: pts.iter().map(|q| q[0]).collect(),
        t: pts.iter().map(|q| q[1]).collect(),
    })
}

/// Parameters `s ∈ [0, 1]` with `|a + s(b − a) − q|_∞ ≤ eps`.
fn free_interval(q: Pt, a: Pt, b: Pt, eps: f64) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for k in 0..2 {
        let d = b[k] - a[k];
        let c = a[k] - q[k];
        if d == 0.0 {
            if c.abs() > eps {
                return None;
            }
        } else {
            let (s1, s2) = ((-eps - c) / d, (eps - c) / d);
            let (s1, s2) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
            lo = lo.max(s1);
            hi = hi.min(s2);
        }
    }
    (lo <= hi).then_some((lo, hi))
}

fn clip_from(iv: Option<(f64, f64)>, from: f64) -> Option<(f64, f64)> {
    iv.and_then(|(lo, hi)| {
        let lo = lo.max(from);
        (lo <= hi).then_some((lo, hi))
    })
}

/// Whether the Fréchet distance between two polylines is at most `eps`.
fn frechet_decide(p: &[Pt], q: &[Pt], eps: f64) -> bool {
    if dist(p[0], q[0]) > eps || dist(p[p.len() - 1], q[q.len() - 1]) > eps {
        return false;
    }
    let (mm, nn) = (p.len() - 1, q.len() - 1);
    // left[j]: reachable part of the edge (vertex p_i, segment q_j); bottom
    // likewise for (segment p_i, vertex q_j). Both are swept over i.
    let mut left: Vec<Option<(f64, f64)>> = vec![None; nn];
    let mut reach = true;
    for j in 0..nn {
        let f = if reach { free_interval(p[0], q[j], q[j + 1], eps) } else { None };
        left[j] = f.filter(|iv| iv.0 == 0.0);
        reach = left[j].map_or(false, |iv| iv.1 >= 1.0);
    }
    let mut bottom_reach = true;
    for i in 0..mm {
        let f = if bottom_reach { free_interval(q[0], p[i], p[i + 1], eps) } else { None };
        let mut bottom = f.filter(|iv| iv.0 == 0.0);
        bottom_reach = bottom.map_or(false, |iv| iv.1 >= 1.0);
        for j in 0..nn {
            let f_right = free_interval(p[i + 1], q[j], q[j + 1], eps);
            let f_top = free_interval(q[j + 1], p[i], p[i + 1], eps);
            let right = if bottom.is_some() {
                f_right
            } else {
                left[j].and_then(|iv| clip_from(f_right, iv.0))
            };
            let top = if left[j].is_some() {
                f_top
            } else {
                bottom.and_then(|iv| clip_from(f_top, iv.0))
            };
            left[j] = right;
            bottom = top;
        }
    }
    left[nn - 1].map_or(false, |iv| iv.1 >= 1.0)
}

fn frechet(p: &[Pt], q: &[Pt]) -> f64 {
    let lo0 = dist(p[0], q[0]).max(dist(p[p.len() - 1], q[q.len() - 1]));
    if frechet_decide(p, q, lo0 + CMP_TOL) {
        return lo0;
    }
    let mut hi = p
        .iter()
        .flat_map(|&a| q.iter().map(move |&b| dist(a, b)))
        .fold(lo0, f64::max);
    let mut lo = lo0;
    for _ in 0..200 {
        if hi - lo <= 1e-13 * hi.max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if frechet_decide(p, q, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// M1′ distance: the smallest `ε` admitting parametrizations of the two
/// extended completed graphs that stay within `ε` in both value and time.
pub fn d_m1p(a: &StepPath, b: &StepPath) -> Result<f64, MetricError> {
    check_horizons(a.horizon(), b.horizon())?;
    let p = extended_graph(a)?.points();
    let q = extended_graph(b)?.points();
    Ok(frechet(&p, &q))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    J1,
    M1p,
}

/// Bracket `(lower, upper)` for a distance: `upper` is the best of `samples`
/// random time changes or couplings, `lower` comes from matching every graph
/// point to its best partner in isolation.
pub fn metric_oracle(a: &StepPath, b: &StepPath, which: Which, samples: usize, seed: u64) -> Result<(f64, f64), MetricError> {
    check_horizons(a.horizon(), b.horizon())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match which {
        Which::J1 => {
            if a.drift() != 0.0 || b.drift() != 0.0 {
                return Err(MetricError::Drift);
            }
            let lower = j1_lower(a, b).max(j1_lower(b, a));
            let mut upper = d_uniform(a, b)?;
            for _ in 0..samples {
                upper = upper.min(j1_random_upper(a, b, &mut rng)?);
            }
            Ok((lower, upper))
        }
        Which::M1p => {
            let p = extended_graph(a)?.points();
            let q = extended_graph(b)?.points();
            let lower = m1p_lower(&p, &q).max(m1p_lower(&q, &p));
            let mut upper = f64::INFINITY;
            for k in 0..samples.max(1) {
                upper = upper.min(coupling_error(&p, &q, &random_coupling(&p, &q, k == 0, &mut rng)));
            }
            Ok((lower, upper))
        }
    }
}

fn j1_lower(a: &StepPath, b: &StepPath) -> f64 {
    let h = a.horizon();
    let y = Levels::of(b);
    let mut bounds: Vec<f64> = Vec::with_capacity(y.levels.len() + 1);
    bounds.push(0.0);
    bounds.extend(&y.times);
    bounds.push(h);
    let cost = |t: f64, val: f64| {
        (0..y.levels.len())
            .map(|j| {
                let (s0, s1) = (bounds[j], bounds[j + 1]);
                let dt = if t < s0 { s0 - t } else if t > s1 { t - s1 } else { 0.0 };
                dt.max((val - y.levels[j]).abs())
            })
            .fold(f64::INFINITY, f64::min)
    };
    let mut best = (a.value_at_zero() - b.value_at_zero()).abs().max((a.end_value() - b.end_value()).abs());
    let mut times: Vec<f64> = (0..=64).map(|i| h * i as f64 / 64.0).collect();
    times.extend(a.jumps().iter().map(|j| j.time));
    for t in times {
        let (v, vl) = (a.eval(t).unwrap_or(0.0), a.left_limit(t).unwrap_or(0.0));
        best = best.max(cost(t, v));
        if t > 0.0 {
            best = best.max(cost(t, vl));
        }
    }
    best
}

/// Error of the time change through increasing knots `(t_k, λ_k)`.
fn j1_eval(a: &StepPath, b: &StepPath, knots: &[(f64, f64)]) -> Result<f64, MetricError> {
    let time_err = knots.iter().map(|k| (k.1 - k.0).abs()).fold(0.0, f64::max);
    let inv = |v: f64| {
        let i = knots.partition_point(|k| k.1 < v).clamp(1, knots.len() - 1);
        let (k0, k1) = (knots[i - 1], knots[i]);
        if k1.1 == k0.1 {
            k0.0
        } else {
            (k0.0 + (v - k0.1) * (k1.0 - k0.0) / (k1.1 - k0.1)).clamp(k0.0, k1.0)
        }
    };
    let pairs: Vec<(f64, f64)> =
        b.jumps().iter().map(|j| (if j.time == 0.0 { 0.0 } else { inv(j.time) }, j.size)).collect();
    let moved = StepPath::from_unsorted(b.horizon(), b.x0(), 0.0, pairs)?;
    Ok(time_err.max(d_uniform(a, &moved)?))
}

fn j1_random_upper<R: Rng>(a: &StepPath, b: &StepPath, rng: &mut R) -> Result<f64, MetricError> {
    let h = a.horizon();
    let xs: Vec<f64> = a.jumps().iter().map(|j| j.time).filter(|&t| t > 0.0 && t < h).collect();
    let ys: Vec<f64> = b.jumps().iter().map(|j| j.time).filter(|&t| t > 0.0 && t < h).collect();
    let mut knots: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    let p_match: f64 = rng.random();
    let mut j0 = 0;
    for &u in &xs {
        if j0 >= ys.len() {
            break;
        }
        if rng.random::<f64>() < p_match {
            let j = rng.random_range(j0..ys.len());
            knots.push((u, ys[j]));
            j0 = j + 1;
        }
    }
    knots.push((h, h));
    let mut jittered = Vec::with_capacity(2 * knots.len());
    for w in knots.windows(2) {
        jittered.push(w[0]);
        if rng.random::<f64>() < 0.3 {
            let r: f64 = rng.random_range(0.05..0.95);
            let q: f64 = rng.random_range(0.05..0.95);
            jittered.push((w[0].0 + r * (w[1].0 - w[0].0), w[0].1 + q * (w[1].1 - w[0].1)));
        }
    }
    jittered.push((h, h));
    j1_eval(a, b, &jittered)
}

/// Closest point of a polyline to `p`, as `(distance, parameter)` with the
/// parameter counted in segments.
fn nearest_on(p: Pt, q: &[Pt]) -> (f64, f64) {
    let mut best = (f64::INFINITY, 0.0);
    for j in 0..q.len() - 1 {
        let (d, s) = point_segment(p, q[j], q[j + 1]);
        if d < best.0 {
            best = (d, j as f64 + s);
        }
    }
    best
}

/// Minimizer over `s ∈ [0,1]` of `|a + s(b − a) − p|_∞`. The objective is a
/// convex maximum of four affine maps, so the optimum sits at an endpoint or
/// where two of them cross.
fn point_segment(p: Pt, a: Pt, b: Pt) -> (f64, f64) {
    let lines: [(f64, f64); 4] = [
        (a[0] - p[0], b[0] - a[0]),
        (p[0] - a[0], a[0] - b[0]),
        (a[1] - p[1], b[1] - a[1]),
        (p[1] - a[1], a[1] - b[1]),
    ];
    let f = |s: f64| lines.iter().map(|l| l.0 + s * l.1).fold(f64::NEG_INFINITY, f64::max);
    let mut cands = vec![0.0, 1.0];
    for i in 0..4 {
        for k in i + 1..4 {
            let dd = lines[i].1 - lines[k].1;
            if dd != 0.0 {
                let s = (lines[k].0 - lines[i].0) / dd;
                if (0.0..=1.0).contains(&s) {
                    cands.push(s);
                }
            }
        }
    }
    cands.into_iter().map(|s| (f(s), s)).fold((f64::INFINITY, 0.0), |acc, x| if x.0 < acc.0 { x } else { acc })
}

fn m1p_lower(p: &[Pt], q: &[Pt]) -> f64 {
    let ends = dist(p[0], q[0]).max(dist(p[p.len() - 1], q[q.len() - 1]));
    p.iter().map(|&v| nearest_on(v, q).0).fold(ends, f64::max)
}

fn point_at(p: &[Pt], a: f64) -> Pt {
    let last = p.len() - 1;
    let i = (floor(a) as usize).min(last - 1);
    let s = (a - i as f64).clamp(0.0, 1.0);
    [p[i][0] + s * (p[i + 1][0] - p[i][0]), p[i][1] + s * (p[i + 1][1] - p[i][1])]
}

/// Monotone knots in `[0, M] × [0, N]` built from projections of random
/// vertex subsets (all vertices when `full`).
fn random_coupling<R: Rng>(p: &[Pt], q: &[Pt], full: bool, rng: &mut R) -> Vec<(f64, f64)> {
    let (mm, nn) = ((p.len() - 1) as f64, (q.len() - 1) as f64);
    let keep: f64 = if full { 1.0 } else { rng.random() };
    let mut knots: Vec<(f64, f64)> = vec![(0.0, 0.0), (mm, nn)];
    for (i, &v) in p.iter().enumerate() {
        if rng.random::<f64>() < keep {
            let b = nearest_on(v, q).1;
            let b = if full { b } else { (b + rng.random_range(-0.2..0.2)).clamp(0.0, nn) };
            knots.push((i as f64, b));
        }
    }
    for (j, &v) in q.iter().enumerate() {
        if rng.random::<f64>() < keep {
            knots.push((nearest_on(v, p).1, j as f64));
        }
    }
    knots.sort_by(|x, y| {
        x.0.partial_cmp(&y.0).unwrap_or(Ordering::Equal).then(x.1.partial_cmp(&y.1).unwrap_or(Ordering::Equal))
    });
    let mut m = 0.0f64;
    for k in knots.iter_mut() {
        m = m.max(k.1);
        k.1 = m;
    }
    knots
}

/// Largest distance along a monotone coupling given by knots; between
/// breakpoints both points move linearly, so the maximum sits at one.
fn coupling_error(p: &[Pt], q: &[Pt], knots: &[(f64, f64)]) -> f64 {
    let mut best: f64 = 0.0;
    for w in knots.windows(2) {
        let ((a0, b0), (a1, b1)) = (w[0], w[1]);
        let mut rs = vec![0.0, 1.0];
        for (x0, x1) in [(a0, a1), (b0, b1)] {
            if x1 > x0 {
                let mut k = floor(x0) + 1.0;
                while k < x1 {
                    rs.push((k - x0) / (x1 - x0));
                    k += 1.0;
                }
            }
        }
        for r in rs {
            let pa = point_at(p, a0 + r * (a1 - a0));
            let qb = point_at(q, b0 + r * (b1 - b0));
            best = best.max(dist(pa, qb));
        }
    }
    best
}

/// Convenience for tests and callers holding `(time, size)` pairs.
pub fn step(horizon: f64, x0: f64, jumps: &[(f64, f64)]) -> Result<StepPath, PathError> {
    StepPath::new(horizon, x0, 0.0, jumps.iter().map(|&(t, x)| Jump::new(t, x)).collect())
}
