//! Acceptance criteria 1–9, one PASS/FAIL line each. Exits nonzero when any
//! criterion fails.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use ldp::experiment::{run_experiment, Experiment, ExperimentConfig};
use ldp::parallel::pool;
use ldp::report::{NormLog, ReportRow};
use ldp_core::metrics::{d_j1, d_m1p, d_uniform, metric_oracle, step, Which};
use ldp_core::paths::{first_passage_map, Jump, PiecewisePath, StepPath};
use ldp_core::queueopt::{brute_force_cstar, most_likely_queue_path, solve_cstar, QueueSpec, SolutionKind};
use ldp_core::rates::{canonical_boundary_minimizer, merge_step, rate_boundary, rate_i};
use ldp_core::sim::{largest_jump_tail_exact, RngStream, TailModel};
use rand::Rng;

struct Gen<R: Rng>(R);

impl<R: Rng> Gen<R> {
    fn u(&mut self) -> f64 {
        self.0.random::<f64>()
    }

    fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.u()
    }

    fn int(&mut self, lo: usize, hi: usize) -> usize {
        self.0.random_range(lo..=hi)
    }
}

fn gen(seed: u64) -> Gen<impl Rng> {
    Gen(RngStream::new(seed, 0).rng())
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

/// A random spec with `d ≤ 4`; about one in five has `γ < b/λ`.
fn random_spec<R: Rng>(g: &mut Gen<R>) -> QueueSpec {
    let d = g.int(1, 4);
    let lambda = 0.2 + g.u() * (d as f64 - 0.3);
    let alpha = g.range(0.05, 0.95);
    let b = if g.u() < 0.75 { 1.0 } else { g.range(0.3, 3.0) };
    let lo = b / lambda;
    let gamma = if g.u() < 0.2 {
        lo * g.range(0.05, 0.98)
    } else {
        let frac = lambda - lambda.floor();
        let hi = if frac > 1e-9 { (3.0 * b / frac).min(50.0) } else { 50.0 }.max(lo * 1.01);
        g.range(lo, hi)
    };
    QueueSpec::new(d, lambda, alpha, gamma, b).unwrap()
}

fn criterion_1() -> Outcome {
    let mut g = gen(101);
    let (mut worst, mut infeasible, mut bad) = (0.0f64, 0, Vec::new());
    for _ in 0..200 {
        let s = random_spec(&mut g);
        let exact = solve_cstar(&s);
        let sweep = brute_force_cstar(&s, 1e-3).unwrap();
        if s.gamma < s.b / s.lambda {
            infeasible += 1;
            if exact.kind != SolutionKind::Infeasible || sweep.cstar.is_finite() {
                bad.push(format!("{s:?} not infeasible on both sides"));
            }
            continue;
        }
        let diff = (exact.cstar.value() - sweep.cstar.value()).abs();
        worst = worst.max(diff);
        if !(diff <= 5e-3) {
            bad.push(format!("{s:?}: {} vs {}", exact.cstar.value(), sweep.cstar.value()));
        }
    }
    outcome(bad.is_empty(), format!("max |diff| {worst:.2e} (limit 5e-3), {infeasible} infeasible specs; {bad:?}"))
}

fn kinks(p: &PiecewisePath) -> usize {
    p.knots().windows(2).filter(|w| (w[0].slope - w[1].slope).abs() > 1e-12).count()
}

fn criterion_2() -> Outcome {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-5;
    let mut notes = Vec::new();
    let sym_spec = QueueSpec::new(2, 1.49, 0.1, 1.0 / 0.49, 1.0).unwrap();
    let sym = solve_cstar(&sym_spec);
    let sym_ok = sym.kind == SolutionKind::Symmetric { l: 1 } && close(sym.cstar.value(), 1.07394);
    notes.push(format!("γ=1/0.49: {:?} c*={:.6}", sym.kind, sym.cstar.value()));
    let mix_spec = QueueSpec::new(2, 1.49, 0.1, 1.0 / 0.49 - 0.1, 1.0).unwrap();
    let mix = solve_cstar(&mix_spec);
    let mix_ok = mix.kind == SolutionKind::Mixed { k: 1, l: 0 }
        && close(mix.x[0], 1.94082)
        && close(mix.x[1], 0.04900)
        && close(mix.cstar.value(), 1.80819);
    notes.push(format!("γ=1/0.49−0.1: {:?} x=({:.6}, {:.6}) c*={:.6}", mix.kind, mix.x[0], mix.x[1], mix.cstar.value()));
    let sym_only = 2.0 * (1.0f64 / 1.49).powf(0.1);
    let beats = mix.cstar.value() < sym_only && close(sym_only, 1.92181);
    notes.push(format!("mixed {:.5} < symmetric-only {:.5}", mix.cstar.value(), sym_only));
    let mut traj_ok = true;
    for (sol, spec, want) in [(&sym, &sym_spec, 0), (&mix, &mix_spec, 1)] {
        let t = most_likely_queue_path(sol, spec, 201).unwrap();
        let s = sol.sstar.unwrap();
        let reach = t.path.eval(s).unwrap();
        let continuous = t.path.is_continuous(1e-12);
        let k = kinks(&t.path);
        traj_ok &= k == want && (reach - spec.b).abs() <= 1e-9 && continuous;
        notes.push(format!("trajectory: {k} kink(s), value {reach:.9} at s*={s:.6}"));
    }
    outcome(sym_ok && mix_ok && beats && traj_ok, notes.join("; "))
}

/// Minimum of `Σ z^α` over multisets of sizes `j·b/200` (`1 ≤ j ≤ 200`)
/// with total at least `c`.
fn discretized_boundary(c: f64, b: f64, alpha: f64) -> f64 {
    let h = b / 200.0;
    let target = (c / h - 1e-9).ceil() as usize;
    let cost: Vec<f64> = (0..=200).map(|j| (j as f64 * h).powf(alpha)).collect();
    let mut best = vec![f64::INFINITY; target + 1];
    best[0] = 0.0;
    for s in 1..=target {
        let mut m = f64::INFINITY;
        for (j, &cj) in cost.iter().enumerate().skip(1) {
            let v = best[s.saturating_sub(j)] + cj;
            if v < m {
                m = v;
            }
        }
        best[s] = m;
    }
    best[target]
}

fn criterion_3() -> Outcome {
    let (mut cells, mut worst_ratio, mut worst_canon, mut bad) = (0, 0.0f64, 0.0f64, Vec::new());
    for &alpha in &[0.3, 0.5, 0.8] {
        for ci in 1..=50usize {
            let c = ci as f64 / 10.0;
            for bi in 1..=ci {
                let b = bi as f64 / 10.0;
                cells += 1;
                let exact = rate_boundary(c, b, alpha).unwrap().value();
                let disc = discretized_boundary(c, b, alpha);
                let bound = 2.0 * alpha * (b / 200.0).powf(alpha) * ((c / b).ceil() + 1.0);
                worst_ratio = worst_ratio.max((disc - exact).abs() / bound);
                if !((disc - exact).abs() <= bound) {
                    bad.push(format!("c={c} b={b} α={alpha}: {disc} vs {exact}"));
                }
                let m = canonical_boundary_minimizer(c, b).unwrap();
                let canon = (rate_i(&m, alpha).unwrap().value() - exact).abs();
                worst_canon = worst_canon.max(canon);
                if !(canon <= 1e-12) {
                    bad.push(format!("canonical c={c} b={b} α={alpha}: off by {canon:e}"));
                }
            }
        }
    }
    outcome(
        bad.is_empty(),
        format!("{cells} cells, worst |diff|/bound {worst_ratio:.3}, worst canonical error {worst_canon:.1e}; {bad:?}"),
    )
}

fn criterion_4() -> Outcome {
    let tail = TailModel::new(0.5, 1.0).unwrap();
    let mut pass = true;
    let mut notes = Vec::new();
    for k in 1..=3usize {
        let vals: Vec<f64> =
            [1e4, 1e5, 1e6].iter().map(|&n| largest_jump_tail_exact(n, k, 1.0, &tail).unwrap().norm_log).collect();
        let target = -(k as f64);
        let rel = (vals[2] - target).abs() / target.abs();
        let monotone = vals.windows(2).all(|w| w[1] < w[0]);
        pass &= rel <= 0.02 && monotone;
        notes.push(format!("k={k}: {:.4} {:.4} {:.4} (rel err {rel:.4})", vals[0], vals[1], vals[2]));
    }
    outcome(pass, notes.join("; "))
}

/// `ζ_μ + ξ` on `[0, γ/μ]` with jumps small enough that the path ends at or
/// below `γ`, plus its jump sizes.
fn drift_plus_jumps<R: Rng>(g: &mut Gen<R>) -> (StepPath, f64, f64, Vec<f64>) {
    let mu = g.range(0.2, 3.0);
    let gamma = g.range(0.5, 5.0);
    let count = g.int(1, 6);
    let mut times: Vec<f64> = (0..count).map(|_| 0.01 + 0.98 * g.u()).collect();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup();
    let weights: Vec<f64> = times.iter().map(|_| 0.05 + g.u()).collect();
    let total: f64 = weights.iter().sum();
    let budget = g.range(0.05, 0.9) * gamma * (1.0 - times[times.len() - 1]);
    let sizes: Vec<f64> = weights.iter().map(|w| budget * w / total).collect();
    let horizon = gamma / mu;
    let jumps = times.iter().zip(&sizes).map(|(&t, &x)| Jump::new(t * horizon, x)).collect();
    (StepPath::new(horizon, 0.0, mu, jumps).unwrap(), mu, gamma, sizes)
}

fn criterion_5() -> Outcome {
    let mut g = gen(505);
    let (mut worst, mut bad) = (0.0f64, 0);
    for _ in 0..500 {
        let (p, mu, gamma, sizes) = drift_plus_jumps(&mut g);
        let image = first_passage_map(&PiecewisePath::from(&p), mu, gamma).unwrap();
        let stretches = image.flat_stretches();
        if stretches.len() != sizes.len() {
            bad += 1;
            continue;
        }
        for (s, x) in stretches.iter().zip(&sizes) {
            worst = worst.max((s.length() - x).abs());
        }
    }
    outcome(bad == 0 && worst <= 1e-12, format!("500 inputs, {bad} count mismatches, max |length − size| {worst:.1e}"))
}

fn criterion_6() -> Outcome {
    let mut g = gen(606);
    let (mut worst, mut increases, mut steps) = (0.0f64, 0, 0usize);
    for _ in 0..200 {
        let b = g.range(0.1, 2.0);
        let alpha = g.range(0.05, 0.95);
        let extra = g.int(0, 11);
        let mut sizes = vec![b];
        sizes.extend((0..extra).map(|_| g.range(0.01, 1.0) * b));
        let c: f64 = sizes.iter().sum();
        let pairs: Vec<(f64, f64)> =
            sizes.iter().enumerate().map(|(i, &x)| (0.001 + 0.998 * g.u() + i as f64 * 1e-9, x)).collect();
        let mut cur = StepPath::from_unsorted(1.0, 0.0, 0.0, pairs).unwrap();
        let mut prev = rate_i(&cur, alpha).unwrap().value();
        loop {
            let next = merge_step(&cur, b).unwrap();
            let r = rate_i(&next, alpha).unwrap().value();
            if r > prev + 1e-12 {
                increases += 1;
            }
            if next == cur {
                break;
            }
            steps += 1;
            prev = r;
            cur = next;
        }
        let target = rate_boundary(c, b, alpha).unwrap().value();
        worst = worst.max((prev - target).abs() / target.max(1.0));
    }
    outcome(
        increases == 0 && worst <= 1e-9,
        format!("200 starts, {steps} merge steps, {increases} increases, worst relative gap to boundary rate {worst:.1e}"),
    )
}

/// Nondecreasing drift-free step path on `[0, 1]`, sometimes with jumps at
/// the endpoints.
fn monotone_step<R: Rng>(g: &mut Gen<R>) -> StepPath {
    let x0 = if g.u() < 0.5 { 0.0 } else { g.u() };
    let count = g.int(0, 4);
    let pairs = (0..count)
        .map(|_| {
            let r = g.u();
            let t = if r < 1.0 / 6.0 {
                0.0
            } else if r < 2.0 / 6.0 {
                1.0
            } else {
                g.u()
            };
            (t, g.range(0.01, 2.0))
        })
        .collect();
    StepPath::from_unsorted(1.0, x0, 0.0, pairs).unwrap()
}

fn criterion_7() -> Outcome {
    let mut g = gen(707);
    let mut failures: Vec<String> = Vec::new();
    type Metric = fn(&StepPath, &StepPath) -> f64;
    let metrics: [(&str, Metric); 3] = [
        ("uniform", |a, b| d_uniform(a, b).unwrap()),
        ("j1", |a, b| d_j1(a, b).unwrap().distance),
        ("m1p", |a, b| d_m1p(a, b).unwrap()),
    ];
    for _ in 0..1000 {
        let (a, b, c) = (monotone_step(&mut g), monotone_step(&mut g), monotone_step(&mut g));
        for (name, f) in metrics {
            let (ab, ba) = (f(&a, &b), f(&b, &a));
            if !(ab >= 0.0 && (ab - ba).abs() <= 1e-12 && f(&a, &a) <= 1e-12 && ab <= f(&a, &c) + f(&c, &b) + 1e-9) {
                failures.push(format!("{name} axioms"));
            }
        }
        let (m1, j1, du) = (d_m1p(&a, &b).unwrap(), d_j1(&a, &b).unwrap().distance, d_uniform(&a, &b).unwrap());
        if !(m1 <= j1 + 1e-12 && j1 <= du + 1e-12) {
            failures.push(format!("ordering m1p {m1} j1 {j1} uniform {du}"));
        }
    }
    let a = step(1.0, 0.0, &[(0.0, 1.0)]).unwrap();
    for eps in [0.1, 0.01] {
        let b = step(1.0, 0.0, &[(eps, 1.0)]).unwrap();
        if d_j1(&a, &b).unwrap().distance != 1.0 || d_m1p(&a, &b).unwrap() > eps + 1e-12 {
            failures.push(format!("boundary-jump separation at ε={eps}"));
        }
    }
    for i in 0..500u64 {
        let (a, b) = (monotone_step(&mut g), monotone_step(&mut g));
        for (which, exact) in [(Which::J1, d_j1(&a, &b).unwrap().distance), (Which::M1p, d_m1p(&a, &b).unwrap())] {
            let (lo, hi) = metric_oracle(&a, &b, which, 200, i).unwrap();
            if !(lo - 1e-9 <= exact && exact <= hi + 1e-9) {
                failures.push(format!("{which:?} {exact} outside [{lo}, {hi}]"));
            }
        }
    }
    failures.dedup();
    outcome(
        failures.is_empty(),
        format!("1000 triples, 2 separation cases, 500 oracle pairs; failures: {failures:?}"),
    )
}

fn norm_logs(rows: &[ReportRow]) -> Vec<f64> {
    rows.iter()
        .map(|r| match r.norm_log {
            NormLog::Value(v) => v,
            NormLog::Below(v) => v,
        })
        .collect()
}

fn decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ")
}

fn criterion_8() -> Outcome {
    let p = pool(0).unwrap();
    let mut notes = Vec::new();
    let mut pass = true;

    let moderate = run_experiment(&ExperimentConfig::defaults(Experiment::Moderate), 8001, &p).unwrap();
    let nl = norm_logs(&moderate);
    let i_prime = -moderate[0].target.unwrap();
    let last = *nl.last().unwrap();
    let (dec, band) = (decreasing(&nl), last >= -i_prime - 0.6 && last <= -i_prime + 0.3);
    pass &= dec && band;
    notes.push(format!(
        "moderate norm_log [{}] decreasing={dec}, final in [{:.4}, {:.4}]={band}",
        fmt_list(&nl),
        -i_prime - 0.6,
        -i_prime + 0.3
    ));

    let residual = run_experiment(&ExperimentConfig::defaults(Experiment::Residual), 8002, &p).unwrap();
    let ph: Vec<f64> = residual.iter().map(|r| r.phat).collect();
    let nonincreasing = residual.windows(2).all(|w| w[1].phat <= w[0].phat || w[1].ci_lo <= w[0].ci_hi);
    let tenfold = ph[ph.len() - 1] <= ph[0] / 10.0;
    pass &= nonincreasing && tenfold;
    notes.push(format!("residual phat [{}] nonincreasing={nonincreasing}, phat(5) ≤ phat(0)/10={tenfold}", fmt_list(&ph)));

    let queue = run_experiment(&ExperimentConfig::defaults(Experiment::Queue), 8003, &p).unwrap();
    let nl = norm_logs(&queue);
    let cstar = -queue[0].target.unwrap();
    let dec = decreasing(&nl);
    let above = nl.iter().all(|&v| v >= -cstar - 0.8);
    pass &= dec && above;
    notes.push(format!("queue norm_log [{}] vs −c*={:.4}: decreasing={dec}, above −c*−0.8={above}", fmt_list(&nl), -cstar));
    outcome(pass, notes.join("; "))
}

fn run_cli(args: &[String]) -> (i32, Vec<u8>) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = ldp::cli::run_with(std::iter::once("ldp".to_string()).chain(args.iter().cloned()), &mut out, &mut err);
    (code, out)
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let path = d.join("p.json");
    let other = d.join("q.json");
    fs::write(&path, r#"{"T":1,"x0":0.2,"jumps":[[0,0.3],[0.2,1],[0.7,0.44],[1,0.1]]}"#).unwrap();
    fs::write(&other, r#"{"T":1,"jumps":[[0.25,0.9],[0.6,0.5]]}"#).unwrap();
    let (p, q) = (path.display().to_string(), other.display().to_string());
    let commands: Vec<(&str, Vec<String>)> = vec![
        ("solve", "solve --d 3 --lambda 2.2 --alpha 0.3 --gamma 4 --b 1.5 --oracle 1e-4 --path-out {out} --npts 50".into()),
        ("rate", format!("rate --fn IM1p --path {p} --alpha 0.3")),
        ("rate", "rate --fn boundary --c 2.5 --b 1 --alpha 0.5".into()),
        ("dist", format!("dist --metric j1 {p} {q}")),
        ("dist", format!("dist --metric m1p {p} {q}")),
        ("dist", format!("dist --metric uniform {p} {q}")),
        ("simulate", "simulate --what walk --n 40 --alpha 0.5 --out {out}".into()),
        ("simulate", "simulate --what levy --n 40 --alpha 0.5 --stream 3".into()),
        ("simulate", "simulate --what queue --n 12 --alpha 0.3 --d 2 --lambda 1.49 --gamma 2".into()),
        ("tail", "tail --k 2 --n 1e5 --delta 1 --alpha 0.5".into()),
        ("estimate", "estimate --experiment moderate --ns 9,16 --trials 30000 --out {out}".into()),
        ("estimate", "estimate --experiment residual --n 60 --ks 0,1,2 --trials 20000 --format json".into()),
        ("estimate", "estimate --experiment queue --ns 8,16 --trials 20000".into()),
    ]
    .into_iter()
    .map(|(name, cmd): (&str, String)| (name, cmd.split_whitespace().map(String::from).collect()))
    .collect();
    let mut bad = Vec::new();
    for (i, (name, cmd)) in commands.iter().enumerate() {
        let mut results = Vec::new();
        for (run, threads) in ["1", "8", "1", "8"].iter().enumerate() {
            let out_file = d.join(format!("out-{i}-{run}"));
            let mut args: Vec<String> = vec!["--seed".into(), "42".into(), "--threads".into(), threads.to_string()];
            args.extend(cmd.iter().map(|a| a.replace("{out}", &out_file.display().to_string())));
            let (code, stdout) = run_cli(&args);
            let file = if Path::new(&out_file).exists() { fs::read(&out_file).unwrap() } else { Vec::new() };
            results.push((code, stdout, file));
        }
        if results[0].0 != 0 || results[0].1.is_empty() && results[0].2.is_empty() {
            bad.push(format!("{name} #{i} failed to run"));
        }
        if results.iter().any(|r| r != &results[0]) {
            bad.push(format!("{name} #{i} differs"));
        }
    }
    outcome(bad.is_empty(), format!("{} commands × 4 runs (threads 1, 8, 1, 8); {bad:?}", commands.len()))
}

fn main() {
    type Check = fn() -> Outcome;
    let checks: [(u8, &str, Check, Option<Duration>); 9] = [
        (1, "queue solver vs crossing-time oracle", criterion_1, Some(Duration::from_secs(60))),
        (2, "two-server example values and trajectories", criterion_2, None),
        (3, "boundary rate vs discretized multiset search", criterion_3, None),
        (4, "analytic tail slope", criterion_4, Some(Duration::from_secs(1))),
        (5, "first-passage stretch identity", criterion_5, None),
        (6, "merge algorithm optimality", criterion_6, None),
        (7, "metric suite", criterion_7, None),
        (8, "Monte Carlo trend bands", criterion_8, Some(Duration::from_secs(600))),
        (9, "CLI determinism", criterion_9, None),
    ];
    let mut failed = 0;
    for (n, name, check, budget) in checks {
        let t = Instant::now();
        let o = check();
        let elapsed = t.elapsed();
        let in_time = budget.is_none_or(|b| elapsed <= b);
        let pass = o.pass && in_time;
        if !pass {
            failed += 1;
        }
        let timing = match budget {
            Some(b) => format!("{:.2}s of {}s", elapsed.as_secs_f64(), b.as_secs()),
            None => format!("{:.2}s", elapsed.as_secs_f64()),
        };
        println!("criterion {n} {}: {name} [{timing}] {}", if pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("{} of 9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
