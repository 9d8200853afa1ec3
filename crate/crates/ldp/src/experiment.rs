//! The three Monte Carlo experiments and their feasibility guard.

use ldp_core::mc::{EventKind, EventSpec, Generator, McError};
use ldp_core::queueopt::{solve_cstar, QueueError, QueueSpec};
use ldp_core::rates::{rate_boundary, RateError};
use ldp_core::sim::{ArrivalLaw, SimError, TailModel};
use rayon::ThreadPool;
use thiserror::Error;

use crate::parallel::estimate_parallel;
use crate::report::ReportRow;

/// Largest predicted exponent `rate · c n^α` we are willing to estimate.
pub const MAX_EXPONENT: f64 = 12.0;
/// Smallest predicted hit count we are willing to estimate.
pub const MIN_PREDICTED_HITS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Moderate,
    Residual,
    Queue,
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(
        "refused: predicted exponent {exponent:.3} at n = {n} (limit {MAX_EXPONENT}), \
         predicted hits {predicted_hits:.3} at {trials} trials (need {MIN_PREDICTED_HITS})"
    )]
    Refused { n: usize, exponent: f64, predicted_hits: f64, trials: u64 },
    #[error("empty n or k grid")]
    EmptyGrid,
    #[error(transparent)]
    Mc(#[from] McError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error(transparent)]
    Queue(#[from] QueueError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModerateConfig {
    pub alpha: f64,
    pub c: f64,
    pub level: f64,
    pub cap: f64,
    pub ns: Vec<usize>,
    pub trials: u64,
    pub generator: Generator,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualConfig {
    pub alpha: f64,
    pub c: f64,
    pub n: usize,
    pub ks: Vec<usize>,
    pub eps: f64,
    pub trials: u64,
    pub generator: Generator,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueueConfig {
    pub spec: QueueSpec,
    pub ns: Vec<usize>,
    pub trials: u64,
    pub arrivals: ArrivalLaw,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentConfig {
    Moderate(ModerateConfig),
    Residual(ResidualConfig),
    Queue(QueueConfig),
}

impl ExperimentConfig {
    pub fn defaults(which: Experiment) -> Self {
        let levy = Generator::Levy { jump_floor: 1.0 };
        match which {
            Experiment::Moderate => ExperimentConfig::Moderate(ModerateConfig {
                alpha: 0.5,
                c: 1.0,
                level: 1.2,
                cap: 1.0,
                ns: vec![9, 16, 25],
                trials: 1_000_000,
                generator: levy,
            }),
            Experiment::Residual => ExperimentConfig::Residual(ResidualConfig {
                alpha: 0.5,
                c: 1.0,
                n: 200,
                ks: (0..=5).collect(),
                eps: 0.3,
                trials: 100_000,
                generator: levy,
            }),
            Experiment::Queue => ExperimentConfig::Queue(QueueConfig {
                spec: QueueSpec { d: 2, lambda: 1.49, alpha: 0.1, gamma: 1.0 / 0.49, b: 1.0 },
                ns: vec![16, 36, 64],
                trials: 1_000_000,
                arrivals: ArrivalLaw::Exponential,
            }),
        }
    }

    pub fn experiment(&self) -> Experiment {
        match self {
            ExperimentConfig::Moderate(_) => Experiment::Moderate,
            ExperimentConfig::Residual(_) => Experiment::Residual,
            ExperimentConfig::Queue(_) => Experiment::Queue,
        }
    }
}

/// Refuse unless every scale in `ns` has a predicted exponent of at most
/// [`MAX_EXPONENT`] and at least [`MIN_PREDICTED_HITS`] predicted hits.
pub fn check_feasible(rate: f64, tail: &TailModel, ns: &[usize], trials: u64) -> Result<(), ExperimentError> {
    for &n in ns {
        let exponent = rate * ldp_core::mc::speed(n as f64, tail);
        let predicted_hits = trials as f64 * (-exponent).exp();
        if !(exponent <= MAX_EXPONENT && predicted_hits >= MIN_PREDICTED_HITS) {
            return Err(ExperimentError::Refused { n, exponent, predicted_hits, trials });
        }
    }
    Ok(())
}

pub fn run_experiment(cfg: &ExperimentConfig, seed: u64, pool: &ThreadPool) -> Result<Vec<ReportRow>, ExperimentError> {
    match cfg {
        ExperimentConfig::Moderate(m) => {
            if m.ns.is_empty() {
                return Err(ExperimentError::EmptyGrid);
            }
            let tail = TailModel::new(m.alpha, m.c)?;
            let rate = rate_boundary(m.level, m.cap, m.alpha)?.value();
            check_feasible(rate, &tail, &m.ns, m.trials)?;
            let ev = EventSpec {
                kind: EventKind::BoundaryCross { level: m.level, cap: m.cap },
                tail,
                generator: m.generator,
            };
            m.ns.iter()
                .map(|&n| {
                    let e = estimate_parallel(&ev, n, m.trials, seed, pool)?;
                    Ok(ReportRow::from_estimate(&e, None, &tail, Some(-rate)))
                })
                .collect()
        }
        ExperimentConfig::Residual(r) => {
            if r.ks.is_empty() {
                return Err(ExperimentError::EmptyGrid);
            }
            let tail = TailModel::new(r.alpha, r.c)?;
            r.ks.iter()
                .map(|&k| {
                    let ev = EventSpec { kind: EventKind::ResidualSup { k, eps: r.eps }, tail, generator: r.generator };
                    let e = estimate_parallel(&ev, r.n, r.trials, seed, pool)?;
                    Ok(ReportRow::from_estimate(&e, Some(k), &tail, None))
                })
                .collect()
        }
        ExperimentConfig::Queue(q) => {
            if q.ns.is_empty() {
                return Err(ExperimentError::EmptyGrid);
            }
            let spec = QueueSpec::new(q.spec.d, q.spec.lambda, q.spec.alpha, q.spec.gamma, q.spec.b)?;
            let ev = EventSpec::queue(spec, q.arrivals)?;
            let rate = solve_cstar(&spec).cstar.value();
            check_feasible(rate, &ev.tail, &q.ns, q.trials)?;
            q.ns.iter()
                .map(|&n| {
                    let e = estimate_parallel(&ev, n, q.trials, seed, pool)?;
                    Ok(ReportRow::from_estimate(&e, None, &ev.tail, Some(-rate)))
                })
                .collect()
        }
    }
}
