//! Samplers for Weibull-tail increments and the paths built from them.

use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Exp1, Poisson};
use thiserror::Error;

use crate::float::{exp, ln, powf};
use crate::paths::{same_horizon, Jump, PathError, StepPath};
use crate::queueopt::QueueSpec;
use crate::special::{gamma, ln_gamma, ln_gamma_p_lnx, ln_gamma_q};

/// Jumps below this size are folded into the compensator drift.
pub const DEFAULT_JUMP_FLOOR: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("tail needs 0 < alpha < 1 and c > 0, got alpha = {alpha}, c = {c}")]
    Tail { alpha: f64, c: f64 },
    #[error("invalid sampler argument: {0}")]
    Argument(&'static str),
    #[error(transparent)]
    Path(#[from] PathError),
}

/// Survival `ν[x, ∞) = exp(−c x^α)` for `x ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailModel {
    pub alpha: f64,
    pub c: f64,
}

impl TailModel {
    pub fn new(alpha: f64, c: f64) -> Result<Self, SimError> {
        if alpha > 0.0 && alpha < 1.0 && c.is_finite() && c > 0.0 {
            Ok(TailModel { alpha, c })
        } else {
            Err(SimError::Tail { alpha, c })
        }
    }

    /// Tail with unit mean.
    pub fn unit_mean(alpha: f64) -> Result<Self, SimError> {
        TailModel::new(alpha, service_scale(alpha))
    }

    pub fn survival(&self, x: f64) -> f64 {
        if x <= 0.0 {
            1.0
        } else {
            exp(-self.c * powf(x, self.alpha))
        }
    }

    /// `inf{s > 0 : n·ν[s, ∞) < y}`.
    pub fn tail_inverse(&self, n: f64, y: f64) -> f64 {
        if y >= n {
            0.0
        } else {
            powf((ln(n) - ln(y)) / self.c, 1.0 / self.alpha)
        }
    }

    /// Inverse survival: the `x` with `ν[x, ∞) = v`.
    pub fn quantile_from_survival(&self, v: f64) -> f64 {
        powf(-ln(v) / self.c, 1.0 / self.alpha)
    }

    pub fn mean(&self) -> f64 {
        powf(self.c, -1.0 / self.alpha) * gamma(1.0 + 1.0 / self.alpha)
    }

    pub fn variance(&self) -> f64 {
        let g1 = gamma(1.0 + 1.0 / self.alpha);
        powf(self.c, -2.0 / self.alpha) * (gamma(1.0 + 2.0 / self.alpha) - g1 * g1)
    }

    /// `E[W | W ≥ f]`.
    pub fn mean_above(&self, f: f64) -> f64 {
        let a = 1.0 / self.alpha;
        let cf = self.c * powf(f.max(0.0), self.alpha);
        let ln_int = -ln(self.alpha) - a * ln(self.c) + ln_gamma(a) + ln_gamma_q(a, cf);
        f.max(0.0) + exp(cf + ln_int)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let e: f64 = Exp1.sample(rng);
        powf(e / self.c, 1.0 / self.alpha)
    }

    /// Draw from the law of `W` given `W ≥ f`.
    pub fn sample_above<R: Rng + ?Sized>(&self, f: f64, rng: &mut R) -> f64 {
        let e: f64 = Exp1.sample(rng);
        powf(powf(f, self.alpha) + e / self.c, 1.0 / self.alpha)
    }
}

/// `c_s = Γ(1 + 1/α)^α`, the scale giving `E W = 1`.
pub fn service_scale(alpha: f64) -> f64 {
    powf(gamma(1.0 + 1.0 / alpha), alpha)
}

/// A seed plus a stream index; each pair yields its own reproducible
/// sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngStream { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(self.stream);
        r
    }

    /// Disjoint block `j` of this stream, for drawing independent components.
    pub fn substream(&self, j: u64) -> ChaCha8Rng {
        let mut r = self.rng();
        r.set_word_pos((j as u128) << 64);
        r
    }
}

/// Centered increment `W − E W`.
pub fn sample_increment<R: Rng + ?Sized>(tail: &TailModel, rng: &mut R) -> f64 {
    tail.sample(rng) - tail.mean()
}

/// `t ↦ (1/n) Σ_{i ≤ ⌊nt⌋} S_i` on `[0, 1]`.
pub fn simulate_scaled_walk<R: Rng + ?Sized>(n: usize, tail: &TailModel, rng: &mut R) -> Result<StepPath, SimError> {
    if n == 0 {
        return Err(SimError::Argument("n must be at least 1"));
    }
    let nf = n as f64;
    let jumps = (1..=n)
        .map(|i| Jump::new(if i == n { 1.0 } else { i as f64 / nf }, sample_increment(tail, rng) / nf))
        .collect();
    Ok(StepPath::new(1.0, 0.0, 0.0, jumps)?)
}

/// Scaled compensated compound-Poisson path on `[0, 1]` keeping jumps of at
/// least `max(jump_floor, 1)`.
pub fn simulate_scaled_levy<R: Rng + ?Sized>(
    n: usize,
    tail: &TailModel,
    jump_floor: f64,
    rng: &mut R,
) -> Result<StepPath, SimError> {
    if n == 0 || !(jump_floor >= 0.0) {
        return Err(SimError::Argument("need n >= 1 and a nonnegative floor"));
    }
    let f = jump_floor.max(1.0);
    let nu = tail.survival(f);
    let nf = n as f64;
    let drift = -nu * tail.mean_above(f);
    let mean_count = nf * nu;
    let count = if mean_count > 0.0 {
        let p = Poisson::new(mean_count).map_err(|_| SimError::Argument("jump intensity out of range"))?;
        p.sample(rng) as usize
    } else {
        0
    };
    let pairs: Vec<(f64, f64)> = (0..count)
        .map(|_| {
            let z = tail.sample_above(f, rng);
            let u: f64 = rng.random();
            (u, z / nf)
        })
        .collect();
    Ok(StepPath::from_unsorted(1.0, 0.0, drift, pairs)?)
}

/// The `k` largest scaled jumps of the compound-Poisson path as
/// `Q_n^←(Γ_i)/n` with uniform times, largest first. Sizes whose
/// `Γ_i` exceeds `n·ν[1, ∞)` fall below the floor and are reported as 0.
pub fn sample_ordered_jumps<R: Rng + ?Sized>(n: usize, k: usize, tail: &TailModel, rng: &mut R) -> Vec<Jump> {
    let nf = n as f64;
    let cutoff = nf * tail.survival(DEFAULT_JUMP_FLOOR);
    let mut g = 0.0;
    (0..k)
        .map(|_| {
            let e: f64 = Exp1.sample(rng);
            g += e;
            let u: f64 = rng.random();
            let size = if g < cutoff { tail.tail_inverse(nf, g) / nf } else { 0.0 };
            Jump::new(u, size)
        })
        .collect()
}

/// `P(Γ_k ≤ n·ν[nδ, ∞))` together with its logarithm and the normalized
/// logarithm `log P / (c n^α)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailProbability {
    pub p: f64,
    pub log_p: f64,
    pub norm_log: f64,
}

pub fn largest_jump_tail_exact(n: f64, k: usize, delta: f64, tail: &TailModel) -> Result<TailProbability, SimError> {
    if !(n > 0.0) || k == 0 || !(delta > 0.0) {
        return Err(SimError::Argument("need n > 0, k >= 1, delta > 0"));
    }
    let ln_q = ln(n) - tail.c * powf(n * delta, tail.alpha);
    let log_p = ln_gamma_p_lnx(k as f64, ln_q);
    Ok(TailProbability { p: exp(log_p), log_p, norm_log: log_p / (tail.c * powf(n, tail.alpha)) })
}

/// Interarrival law for the queue's arrival stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ArrivalLaw {
    #[default]
    Exponential,
    Deterministic,
}

/// Scaled counting process `t ↦ N(nt)/n` on `[0, horizon]`, where `N` counts
/// partial sums of `gaps` not exceeding `nt`. Epochs that coincide in floating
/// point share one jump.
pub fn renewal_counting(n: usize, horizon: f64, gaps: &[f64]) -> Result<StepPath, SimError> {
    let nf = n as f64;
    let limit = nf * horizon;
    let mut jumps: Vec<Jump> = Vec::new();
    let mut t = 0.0;
    for &g in gaps {
        t += g;
        if t > limit {
            break;
        }
        let time = (t / nf).min(horizon);
        match jumps.last_mut() {
            Some(last) if last.time >= time => last.size += 1.0 / nf,
            _ => jumps.push(Jump::new(time, 1.0 / nf)),
        }
    }
    Ok(StepPath::new(horizon, 0.0, 0.0, jumps)?)
}

/// Scaled partial sums `t ↦ (1/n) Σ_{j ≤ ⌊nt⌋} draws_j` on `[0, horizon]`.
pub fn partial_sum_path(n: usize, horizon: f64, draws: &[f64]) -> Result<StepPath, SimError> {
    let nf = n as f64;
    let m = crate::float::floor(nf * horizon + 1e-9) as usize;
    let jumps = draws
        .iter()
        .take(m)
        .enumerate()
        .map(|(j, &s)| Jump::new(((j + 1) as f64 / nf).min(horizon), s / nf))
        .collect();
    Ok(StepPath::new(horizon, 0.0, 0.0, jumps)?)
}

/// Draw renewal gaps until their sum passes `limit`.
fn gaps_until<R: Rng + ?Sized>(limit: f64, rng: &mut R, mut draw: impl FnMut(&mut R) -> f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut t = 0.0;
    while t <= limit {
        let g = draw(rng);
        t += g;
        out.push(g);
    }
    out
}

/// Scaled arrival counting path and one scaled service-completion counting
/// path per server, all on `[0, γ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueInputs {
    pub arrivals: StepPath,
    pub services: Vec<StepPath>,
}

/// Arrivals use substream 0 of `stream`, server `i` substream `i + 1`.
pub fn simulate_queue_inputs(spec: &QueueSpec, n: usize, law: ArrivalLaw, stream: RngStream) -> Result<QueueInputs, SimError> {
    if n == 0 {
        return Err(SimError::Argument("n must be at least 1"));
    }
    let limit = n as f64 * spec.gamma;
    let mut rng = stream.substream(0);
    let gaps = match law {
        ArrivalLaw::Exponential => {
            let e = Exp::new(spec.lambda).map_err(|_| SimError::Argument("arrival rate"))?;
            gaps_until(limit, &mut rng, |r| e.sample(r))
        }
        ArrivalLaw::Deterministic => gaps_until(limit, &mut rng, |_| 1.0 / spec.lambda),
    };
    let arrivals = renewal_counting(n, spec.gamma, &gaps)?;
    let service = TailModel::unit_mean(spec.alpha)?;
    let services = (0..spec.d)
        .map(|i| {
            let draws = gaps_until(limit, &mut stream.substream(i as u64 + 1), |r| service.sample(r));
            renewal_counting(n, spec.gamma, &draws)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(QueueInputs { arrivals, services })
}

/// Service epochs of one server, drawn on demand.
struct LazyEpochs {
    rng: ChaCha8Rng,
    service: TailModel,
    n: f64,
    gamma: f64,
    t: f64,
    next: Option<f64>,
}

impl LazyEpochs {
    fn new(rng: ChaCha8Rng, service: TailModel, n: f64, gamma: f64) -> Self {
        let mut e = LazyEpochs { rng, service, n, gamma, t: 0.0, next: None };
        e.advance();
        e
    }

    fn advance(&mut self) {
        self.t += self.service.sample(&mut self.rng);
        self.next = (self.t <= self.n * self.gamma).then(|| (self.t / self.n).min(self.gamma));
    }
}

/// The verdict of [`queue_bound_event`] on [`simulate_queue_inputs`] for the
/// same stream. Service epochs are drawn only until the servers have
/// completed more work than the remaining arrivals could overcome.
pub fn queue_bound_trial(spec: &QueueSpec, n: usize, law: ArrivalLaw, stream: RngStream) -> Result<bool, SimError> {
    if n == 0 {
        return Err(SimError::Argument("n must be at least 1"));
    }
    let nf = n as f64;
    let limit = nf * spec.gamma;
    let mut rng = stream.substream(0);
    let gaps = match law {
        ArrivalLaw::Exponential => {
            let e = Exp::new(spec.lambda).map_err(|_| SimError::Argument("arrival rate"))?;
            gaps_until(limit, &mut rng, |r| e.sample(r))
        }
        ArrivalLaw::Deterministic => gaps_until(limit, &mut rng, |_| 1.0 / spec.lambda),
    };
    let mut t = 0.0;
    let arrivals: Vec<f64> = gaps
        .into_iter()
        .map_while(|g| {
            t += g;
            (t <= limit).then(|| (t / nf).min(spec.gamma))
        })
        .collect();
    let service = TailModel::unit_mean(spec.alpha)?;
    let mut servers: Vec<LazyEpochs> =
        (0..spec.d).map(|i| LazyEpochs::new(stream.substream(i as u64 + 1), service, nf, spec.gamma)).collect();
    let total = arrivals.len() as f64 / nf;
    let threshold = spec.b - 1e-9;
    let (mut came, mut served) = (0usize, 0usize);
    loop {
        let next = servers.iter().filter_map(|s| s.next).chain(arrivals.get(came).copied()).fold(f64::INFINITY, f64::min);
        if next == f64::INFINITY {
            return Ok(false);
        }
        while came < arrivals.len() && arrivals[came] == next {
            came += 1;
        }
        for s in servers.iter_mut() {
            while s.next == Some(next) {
                served += 1;
                s.advance();
            }
        }
        let level = (came as f64 - served as f64) / nf;
        if level >= threshold {
            return Ok(true);
        }
        if total - served as f64 / nf < threshold {
            return Ok(false);
        }
    }
}

/// `sup_{s ≤ γ} (M̄(s) − Σ_i N̄_i(s)) ≥ b`, evaluated over all jump epochs.
pub fn queue_bound_event(arrivals: &StepPath, services: &[StepPath], b: f64) -> Result<bool, SimError> {
    let h = arrivals.horizon();
    if services.iter().any(|s| !same_horizon(s.horizon(), h)) {
        return Err(SimError::Path(PathError::HorizonMismatch {
            expected: h,
            got: services.iter().map(|s| s.horizon()).find(|&x| !same_horizon(x, h)).unwrap_or(h),
        }));
    }
    let mut events: Vec<(f64, f64)> = arrivals.jumps().iter().map(|j| (j.time, j.size)).collect();
    for s in services {
        events.extend(s.jumps().iter().map(|j| (j.time, -j.size)));
    }
    events.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));
    let mut level = arrivals.x0() - services.iter().map(|s| s.x0()).sum::<f64>();
    let mut best = level;
    let mut i = 0;
    while i < events.len() {
        let t = events[i].0;
        while i < events.len() && events[i].0 == t {
            level += events[i].1;
            i += 1;
        }
        best = best.max(level);
    }
    Ok(best >= b - 1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn merged_queue_trial_matches_path_construction() {
        let spec = QueueSpec::new(2, 1.49, 0.1, 1.0 / 0.49, 0.25).unwrap();
        let mut hits = 0;
        for (n, law) in [(4, ArrivalLaw::Exponential), (16, ArrivalLaw::Exponential), (9, ArrivalLaw::Deterministic)] {
            for i in 0..3000 {
                let s = RngStream::new(11, i);
                let q = simulate_queue_inputs(&spec, n, law, s).unwrap();
                let slow = queue_bound_event(&q.arrivals, &q.services, spec.b).unwrap();
                let fast = queue_bound_trial(&spec, n, law, s).unwrap();
                assert_eq!(slow, fast, "n={n} stream={i}");
                hits += fast as u32;
            }
        }
        assert!(hits > 10);
    }

    fn tail() -> TailModel {
        TailModel::new(0.5, 1.0).unwrap()
    }

    #[test]
    fn tail_basics() {
        let t = tail();
        assert_eq!(t.survival(0.0), 1.0);
        assert!((t.mean() - 2.0).abs() < 1e-12);
        assert!((t.quantile_from_survival((-1.0f64).exp()) - 1.0).abs() < 1e-12);
        assert!(TailModel::new(1.0, 1.0).is_err());
        assert!(TailModel::new(0.5, 0.0).is_err());
        assert!((service_scale(0.5) - 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn conditional_mean_matches_quadrature() {
        let t = TailModel::new(0.4, 1.3).unwrap();
        let f = 1.0f64;
        // Trapezoid on u = x^α: ∫_f^∞ e^{−c x^α} dx = ∫ e^{−c u} (1/α) u^{1/α−1} du.
        let (a, n) = (0.4f64, 400_000);
        let lo = f.powf(a);
        let hi = lo + 60.0;
        let h = (hi - lo) / n as f64;
        let g = |u: f64| (-1.3 * u).exp() * u.powf(1.0 / a - 1.0) / a;
        let mut s = 0.5 * (g(lo) + g(hi));
        for i in 1..n {
            s += g(lo + i as f64 * h);
        }
        let oracle = f + s * h / t.survival(f);
        assert!((t.mean_above(f) - oracle).abs() < 1e-7 * oracle, "{} vs {oracle}", t.mean_above(f));
    }

    #[test]
    fn streams_are_reproducible() {
        let a: Vec<f64> = {
            let mut r = RngStream::new(7, 3).rng();
            (0..5).map(|_| r.random()).collect()
        };
        let b: Vec<f64> = {
            let mut r = RngStream::new(7, 3).rng();
            (0..5).map(|_| r.random()).collect()
        };
        let c: Vec<f64> = {
            let mut r = RngStream::new(7, 4).rng();
            (0..5).map(|_| r.random()).collect()
        };
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn walk_shape() {
        let mut r = RngStream::new(1, 0).rng();
        let p = simulate_scaled_walk(1, &tail(), &mut r).unwrap();
        assert_eq!(p.jumps().len(), 1);
        assert_eq!(p.jumps()[0].time, 1.0);
        let p = simulate_scaled_walk(50, &tail(), &mut r).unwrap();
        let total: f64 = p.jumps().iter().map(|j| j.size).sum();
        assert!((p.eval(1.0).unwrap() - total).abs() < 1e-15);
    }

    #[test]
    fn levy_with_huge_floor_is_pure_drift() {
        let mut r = RngStream::new(2, 0).rng();
        let p = simulate_scaled_levy(10, &tail(), 400.0, &mut r).unwrap();
        assert!(p.jumps().is_empty());
        assert!(p.drift() <= 0.0);
    }

    #[test]
    fn ordered_jumps_decrease() {
        let mut r = RngStream::new(3, 0).rng();
        for _ in 0..100 {
            let js = sample_ordered_jumps(100, 5, &tail(), &mut r);
            assert!(js.windows(2).all(|w| w[0].size >= w[1].size));
            assert!(js.iter().all(|j| j.size >= 0.0));
        }
        let js = sample_ordered_jumps(1, 1, &TailModel::new(0.5, 50.0).unwrap(), &mut r);
        assert_eq!(js[0].size, 0.0);
    }

    #[test]
    fn exact_tail_k1() {
        let t = tail();
        let (n, d) = (50.0f64, 0.2f64);
        let q = n * (-(n * d).sqrt()).exp();
        let p = largest_jump_tail_exact(n, 1, d, &t).unwrap().p;
        assert!((p - (1.0 - (-q).exp())).abs() < 1e-14);
    }

    #[test]
    fn exact_tail_normalized_log() {
        let t = tail();
        for k in 1..=3 {
            let r = largest_jump_tail_exact(1e6, k, 1.0, &t).unwrap();
            assert!((r.norm_log + k as f64).abs() < 0.02 * k as f64, "k={k}: {}", r.norm_log);
        }
        let tiny = largest_jump_tail_exact(1e6, 1, 1e-12, &t).unwrap();
        assert!(tiny.p > 1.0 - 1e-12);
    }

    #[test]
    fn counting_paths() {
        let p = renewal_counting(2, 2.0, &[1.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(p.jumps().len(), 4);
        assert_eq!(p.end_value(), 2.0);
        let q = renewal_counting(1, 1.0, &[0.5, 0.0, 0.0]).unwrap();
        assert_eq!(q.jumps(), &[Jump::new(0.5, 3.0)]);
        let s = partial_sum_path(2, 1.0, &[1.0, 3.0, 5.0]).unwrap();
        assert_eq!(s.jumps().len(), 2);
        assert_eq!(s.end_value(), 2.0);
    }

    #[test]
    fn bound_event_cases() {
        let m = StepPath::pure_jump(1.0, vec![Jump::new(0.2, 0.5), Jump::new(0.4, 0.5), Jump::new(0.6, 0.5)]).unwrap();
        let none = StepPath::zero(1.0).unwrap();
        assert!(queue_bound_event(&m, &[none.clone()], 1.5).unwrap());
        assert!(!queue_bound_event(&m, &[m.clone()], 0.1).unwrap());
        let late = StepPath::pure_jump(1.0, vec![Jump::new(0.5, 1.0)]).unwrap();
        assert!(queue_bound_event(&m, &[late.clone()], 1.0).unwrap());
        assert!(!queue_bound_event(&m, &[late], 1.01).unwrap());
        let short = StepPath::zero(2.0).unwrap();
        assert!(queue_bound_event(&m, &[short], 1.0).is_err());
    }

    #[test]
    fn queue_inputs_shape() {
        let spec = QueueSpec::new(2, 1.49, 0.5, 2.0, 1.0).unwrap();
        let q = simulate_queue_inputs(&spec, 10, ArrivalLaw::Deterministic, RngStream::new(5, 0)).unwrap();
        assert_eq!(q.services.len(), 2);
        assert_eq!(q.arrivals.horizon(), 2.0);
        assert!((q.arrivals.end_value() - 2.9).abs() < 1e-12);
    }
}
