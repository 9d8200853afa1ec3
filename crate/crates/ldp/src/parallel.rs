//! Monte Carlo over a rayon pool. Trial `i` always uses stream `i`, and
//! per-chunk results are folded in chunk order, so output does not depend on
//! the thread count.

use std::collections::BTreeMap;

use ldp_core::mc::{census_record, EventKind, EventSpec, JumpCensus, McError, McEstimate, MIN_TRIALS};
use ldp_core::paths::StepPath;
use ldp_core::queueopt::{sweep_point, sweep_range, QueueError, QueueSpec, SearchResult};
use ldp_core::sim::RngStream;
use rayon::prelude::*;
use rayon::ThreadPool;

const CHUNK: u64 = 4096;

/// A pool with `threads` workers; 0 means one per core.
pub fn pool(threads: usize) -> Result<ThreadPool, rayon::ThreadPoolBuildError> {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build()
}

fn chunks(trials: u64) -> impl IndexedParallelIterator<Item = (u64, u64)> {
    let count = trials.div_ceil(CHUNK) as usize;
    (0..count).into_par_iter().map(move |c| {
        let c = c as u64;
        (c * CHUNK, ((c + 1) * CHUNK).min(trials))
    })
}

pub fn estimate_parallel(
    ev: &EventSpec,
    n: usize,
    trials: u64,
    seed: u64,
    pool: &ThreadPool,
) -> Result<McEstimate, McError> {
    if trials < MIN_TRIALS {
        return Err(McError::TooFewTrials(trials));
    }
    let counts: Vec<Result<u64, McError>> = pool.install(|| {
        chunks(trials)
            .map(|(lo, hi)| {
                let mut hits = 0;
                for i in lo..hi {
                    if ev.trial(n, RngStream::new(seed, i))? {
                        hits += 1;
                    }
                }
                Ok(hits)
            })
            .collect()
    });
    let mut hits = 0;
    for c in counts {
        hits += c?;
    }
    Ok(McEstimate::from_counts(n as u64, trials, hits, &ev.tail))
}

/// Parallel version of the conditioned jump census; hit paths are recorded
/// in trial order.
pub fn census_parallel(
    ev: &EventSpec,
    n: usize,
    trials: u64,
    seed: u64,
    pool: &ThreadPool,
) -> Result<JumpCensus, McError> {
    let EventKind::BoundaryCross { level, cap } = ev.kind else {
        return Err(McError::NotBoundary);
    };
    if trials < MIN_TRIALS {
        return Err(McError::TooFewTrials(trials));
    }
    let hit_paths: Vec<Result<Vec<StepPath>, McError>> = pool.install(|| {
        chunks(trials)
            .map(|(lo, hi)| {
                let mut out = Vec::new();
                for i in lo..hi {
                    let path = ev.generate(n, RngStream::new(seed, i))?;
                    if ev.holds(&path, n) {
                        out.push(path);
                    }
                }
                Ok(out)
            })
            .collect()
    });
    let mut census = JumpCensus { trials, hits: 0, near_cap: BTreeMap::new(), with_secondary: 0 };
    for chunk in hit_paths {
        for p in chunk? {
            census_record(&mut census, &p, level, cap);
        }
    }
    if census.hits == 0 {
        return Err(McError::NoHits);
    }
    Ok(census)
}

/// Crossing-time sweep split over the pool. Chunk minima are folded in grid
/// order with strict improvement, which reproduces the sequential result.
pub fn brute_force_parallel(spec: &QueueSpec, h: f64, pool: &ThreadPool) -> Result<SearchResult, QueueError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(QueueError::Spec("mesh must be positive"));
    }
    let steps = (spec.gamma / h).floor() as usize;
    if steps as f64 > 1e8 {
        return Err(QueueError::ExcessiveGrid { points: steps as f64 });
    }
    let block = 1 << 14;
    let parts: Vec<SearchResult> = pool.install(|| {
        (0..steps.div_ceil(block))
            .into_par_iter()
            .map(|b| sweep_range(spec, h, 1 + b * block..(1 + (b + 1) * block).min(steps + 1)))
            .collect()
    });
    let mut best = sweep_range(spec, h, 0..0);
    for r in parts.into_iter().chain(std::iter::once(sweep_point(spec, spec.gamma))) {
        if r.cstar < best.cstar {
            best = r;
        }
    }
    Ok(best)
}
