//! The `ldp` command line.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ldp_core::mc::Generator;
use ldp_core::metrics::{d_j1, d_m1p, d_uniform, d_uniform_pl};
use ldp_core::paths::StepPath;
use ldp_core::queueopt::{most_likely_queue_path, solve_cstar, QueueSpec, SolutionKind};
use ldp_core::rates::{rate_boundary, rate_i, rate_id, rate_ik, rate_im1p, rate_renewal, RateValue};
use ldp_core::sim::{
    largest_jump_tail_exact, simulate_queue_inputs, simulate_scaled_levy, simulate_scaled_walk, ArrivalLaw,
    RngStream, TailModel,
};
use serde_json::{json, Value};

use crate::experiment::{run_experiment, Experiment, ExperimentConfig, ExperimentError};
use crate::io::{queue_inputs_json, read_params, read_path_arg, step_path_json, AnyPath};
use crate::parallel::{brute_force_parallel, pool};
use crate::report::{fmt_sig, write_report, Format};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_REFUSED: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "ldp", version, about = "Heavy-tailed sample-path large deviations: solvers, rates, metrics, Monte Carlo")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Base RNG seed (integer); trial i uses stream i of this seed
    #[arg(long, global = true, env = "LDP_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for parallel commands (count; 0 = one per core)
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Parameter file (flat key=value or JSON object); explicit flags win
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the many-server queue overflow problem in closed form
    Solve(SolveArgs),
    /// Evaluate a rate function
    Rate(RateArgs),
    /// Distance between two path files
    Dist(DistArgs),
    /// Simulate a scaled path and write it as JSON
    Simulate(SimulateArgs),
    /// Exact tail probability of the k-th largest jump
    Tail(TailArgs),
    /// Run a Monte Carlo experiment and write a report
    Estimate(EstimateArgs),
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Number of servers (count >= 1)
    #[arg(long)]
    pub d: usize,
    /// Arrival rate (arrivals per unit time, 0 < lambda < d)
    #[arg(long)]
    pub lambda: f64,
    /// Weibull shape of the service times (0 < alpha < 1)
    #[arg(long)]
    pub alpha: f64,
    /// Time horizon (units of n time)
    #[arg(long)]
    pub gamma: f64,
    /// Queue level (units of n customers)
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    /// Also run the crossing-time sweep with this mesh (time units)
    #[arg(long, value_name = "H")]
    pub oracle: Option<f64>,
    /// Write the most likely queue trajectory as CSV (s,value)
    #[arg(long, value_name = "FILE")]
    pub path_out: Option<PathBuf>,
    /// Sample points of the trajectory (count; needs --path-out)
    #[arg(long)]
    pub npts: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RateFn {
    #[value(name = "I")]
    I,
    #[value(name = "Ik")]
    Ik,
    #[value(name = "Id")]
    Id,
    #[value(name = "IM1p")]
    IM1p,
    #[value(name = "boundary")]
    Boundary,
    #[value(name = "renewal")]
    Renewal,
}

#[derive(Debug, Args)]
pub struct RateArgs {
    /// Which rate function
    #[arg(long = "fn", value_enum)]
    pub func: RateFn,
    /// Path JSON file (I, Ik, IM1p, renewal)
    #[arg(long, value_name = "FILE")]
    pub path: Option<PathBuf>,
    /// Comma-separated path JSON files, one per coordinate (Id)
    #[arg(long, value_name = "FILES")]
    pub paths: Option<String>,
    /// Comma-separated positive weights, one per coordinate (Id; default all 1)
    #[arg(long)]
    pub weights: Option<String>,
    /// Component of a queue bundle file: arrivals or service-<i>
    #[arg(long)]
    pub component: Option<String>,
    /// Weibull shape (0 < alpha < 1)
    #[arg(long)]
    pub alpha: f64,
    /// Maximum number of jumps (count; Ik)
    #[arg(long)]
    pub k: Option<usize>,
    /// Level to reach (path units; boundary)
    #[arg(long)]
    pub c: Option<f64>,
    /// Jump cap (path units; boundary)
    #[arg(long)]
    pub b: Option<f64>,
    /// Mean inter-event time (time units; renewal; default 1)
    #[arg(long)]
    pub es: Option<f64>,
    /// Horizon (time units; renewal; default the path's horizon)
    #[arg(long)]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricName {
    Uniform,
    J1,
    M1p,
}

#[derive(Debug, Args)]
pub struct DistArgs {
    /// Which distance
    #[arg(long, value_enum)]
    pub metric: MetricName,
    /// Component of queue bundle inputs: arrivals or service-<i>
    #[arg(long)]
    pub component: Option<String>,
    /// First path JSON file
    pub a: PathBuf,
    /// Second path JSON file
    pub b: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum What {
    Walk,
    Levy,
    Queue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Arrivals {
    Exponential,
    Deterministic,
}

impl From<Arrivals> for ArrivalLaw {
    fn from(a: Arrivals) -> Self {
        match a {
            Arrivals::Exponential => ArrivalLaw::Exponential,
            Arrivals::Deterministic => ArrivalLaw::Deterministic,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Which process
    #[arg(long, value_enum)]
    pub what: What,
    /// Scale (count >= 1)
    #[arg(long)]
    pub n: usize,
    /// Weibull shape (0 < alpha < 1)
    #[arg(long)]
    pub alpha: f64,
    /// Weibull rate (walk, levy; default 1)
    #[arg(long)]
    pub c: Option<f64>,
    /// Smallest simulated jump before scaling (levy; default 1)
    #[arg(long)]
    pub jump_floor: Option<f64>,
    /// Servers (queue; count)
    #[arg(long)]
    pub d: Option<usize>,
    /// Arrival rate (queue; arrivals per unit time)
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Horizon (queue; time units)
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Level (queue; default 1)
    #[arg(long)]
    pub b: Option<f64>,
    /// Inter-arrival law (queue; default exponential)
    #[arg(long, value_enum)]
    pub arrivals: Option<Arrivals>,
    /// Stream index within the seed (integer)
    #[arg(long, default_value_t = 0)]
    pub stream: u64,
    /// Output file (default stdout)
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TailArgs {
    /// Rank of the jump (count >= 1)
    #[arg(long)]
    pub k: usize,
    /// Scale (may be fractional)
    #[arg(long)]
    pub n: f64,
    /// Jump size relative to n (> 0)
    #[arg(long)]
    pub delta: f64,
    /// Weibull shape (0 < alpha < 1)
    #[arg(long)]
    pub alpha: f64,
    /// Weibull rate (> 0)
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExperimentName {
    Moderate,
    Residual,
    Queue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GeneratorName {
    Walk,
    Levy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatName {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Which experiment
    #[arg(long, value_enum)]
    pub experiment: ExperimentName,
    /// Report file (default stdout)
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Report format
    #[arg(long, value_enum, default_value_t = FormatName::Csv)]
    pub format: FormatName,
    /// Trials per row (count >= 100)
    #[arg(long)]
    pub trials: Option<u64>,
    /// Weibull shape (0 < alpha < 1)
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Weibull rate (moderate, residual)
    #[arg(long)]
    pub c: Option<f64>,
    /// Level the supremum must reach (moderate; path units)
    #[arg(long)]
    pub level: Option<f64>,
    /// Largest allowed jump (moderate; path units)
    #[arg(long)]
    pub cap: Option<f64>,
    /// Comma-separated scales (moderate, queue)
    #[arg(long)]
    pub ns: Option<String>,
    /// Scale (residual)
    #[arg(long)]
    pub n: Option<usize>,
    /// Comma-separated counts of removed jumps (residual)
    #[arg(long)]
    pub ks: Option<String>,
    /// Threshold for the residual supremum (residual; path units)
    #[arg(long)]
    pub eps: Option<f64>,
    /// Path generator (moderate, residual; default levy)
    #[arg(long, value_enum)]
    pub generator: Option<GeneratorName>,
    /// Smallest simulated jump before scaling (levy generator; default 1)
    #[arg(long)]
    pub jump_floor: Option<f64>,
    /// Servers (queue)
    #[arg(long)]
    pub d: Option<usize>,
    /// Arrival rate (queue)
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Horizon (queue; time units)
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Level (queue)
    #[arg(long)]
    pub b: Option<f64>,
    /// Inter-arrival law (queue)
    #[arg(long, value_enum)]
    pub arrivals: Option<Arrivals>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Domain(String),
    Refused(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Domain(_) => EXIT_DOMAIN,
            Failure::Refused(_) => EXIT_REFUSED,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Domain(m) | Failure::Refused(m) => m,
        }
    }
}

fn domain<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Domain(e.to_string())
}

/// Run with process stdout and stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

/// Run with explicit sinks for data and diagnostics; returns the exit code.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match inject_config(args) {
        Ok(a) => a,
        Err(f) => return report_failure(f, err),
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    return EXIT_OK;
                }
                _ => EXIT_USAGE,
            };
            let _ = write!(err, "{}", e.render());
            return code;
        }
    };
    match dispatch(&cli, out) {
        Ok(()) => match out.flush() {
            Ok(()) => EXIT_OK,
            Err(e) => report_failure(domain(e), err),
        },
        Err(f) => report_failure(f, err),
    }
}

fn report_failure(f: Failure, err: &mut dyn Write) -> i32 {
    let _ = writeln!(err, "ldp: {}", f.message());
    f.code()
}

/// Splice `--config` entries in as flags right after the subcommand, so any
/// flag given on the command line overrides them.
fn inject_config(args: Vec<OsString>) -> Result<Vec<OsString>, Failure> {
    let mut config = None;
    for (i, a) in args.iter().enumerate() {
        let s = a.to_string_lossy();
        if let Some(v) = s.strip_prefix("--config=") {
            config = Some(PathBuf::from(v));
        } else if s == "--config" {
            config = args.get(i + 1).map(PathBuf::from);
        }
    }
    let Some(path) = config else {
        return Ok(args);
    };
    let params = read_params(&path).map_err(|e| Failure::Usage(e.to_string()))?;
    let sub = subcommand_index(&args).ok_or_else(|| Failure::Usage("--config needs a subcommand".into()))?;
    let mut spliced: Vec<OsString> = args[..=sub].to_vec();
    for (k, v) in params {
        if k == "config" {
            return Err(Failure::Usage(format!("{}: config files cannot nest", path.display())));
        }
        spliced.push(format!("--{}", k.replace('_', "-")).into());
        spliced.push(v.into());
    }
    spliced.extend_from_slice(&args[sub + 1..]);
    Ok(spliced)
}

fn subcommand_index(args: &[OsString]) -> Option<usize> {
    let mut i = 1;
    while i < args.len() {
        let s = args[i].to_string_lossy();
        if !s.starts_with("--") {
            return Some(i);
        }
        i += if s.contains('=') { 1 } else { 2 };
    }
    None
}

/// Error unless every flag that was given applies to `mode`.
fn only(mode: &str, given: &[(&str, bool)], allowed: &[&str]) -> Result<(), Failure> {
    let bad: Vec<String> =
        given.iter().filter(|(name, set)| *set && !allowed.contains(name)).map(|(name, _)| format!("--{name}")).collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("{} not applicable to {mode}", bad.join(", "))))
    }
}

fn need<T: Copy>(v: Option<T>, flag: &str, mode: &str) -> Result<T, Failure> {
    v.ok_or_else(|| Failure::Usage(format!("{mode} needs --{flag}")))
}

fn split_list<T: std::str::FromStr>(s: &str, flag: &str) -> Result<Vec<T>, Failure> {
    s.split(',')
        .map(|x| x.trim().parse().map_err(|_| Failure::Usage(format!("--{flag}: cannot parse {x:?}"))))
        .collect()
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<(), Failure> {
    match &cli.command {
        Command::Solve(a) => solve(a, cli.threads, out),
        Command::Rate(a) => rate(a, out),
        Command::Dist(a) => dist(a, out),
        Command::Simulate(a) => simulate(a, cli.seed, out),
        Command::Tail(a) => tail(a, out),
        Command::Estimate(a) => estimate(a, cli.seed, cli.threads, out),
    }
}

fn json_f64(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

fn rate_text(r: RateValue) -> String {
    if r.is_finite() {
        fmt_sig(r.value())
    } else {
        "inf".into()
    }
}

fn write_line(out: &mut dyn Write, s: &str) -> Result<(), Failure> {
    writeln!(out, "{s}").map_err(domain)
}

fn solve(a: &SolveArgs, threads: usize, out: &mut dyn Write) -> Result<(), Failure> {
    if a.npts.is_some() && a.path_out.is_none() {
        return Err(Failure::Usage("--npts needs --path-out".into()));
    }
    let spec = QueueSpec::new(a.d, a.lambda, a.alpha, a.gamma, a.b).map_err(domain)?;
    let sol = solve_cstar(&spec);
    let (kind, l, k) = match sol.kind {
        SolutionKind::Symmetric { l } => ("Symmetric", Some(l), None),
        SolutionKind::Mixed { k, l } => ("Mixed", Some(l), Some(k)),
        SolutionKind::Infeasible => ("Infeasible", None, None),
    };
    let mut doc = json!({
        "kind": kind,
        "l": l,
        "k": k,
        "x": sol.x.iter().map(|&v| json_f64(v)).collect::<Vec<_>>(),
        "cstar": if sol.cstar.is_finite() { json_f64(sol.cstar.value()) } else { Value::Null },
        "sstar": sol.sstar.map(json_f64),
    });
    if let Some(h) = a.oracle {
        let p = pool(threads).map_err(domain)?;
        let r = brute_force_parallel(&spec, h, &p).map_err(domain)?;
        let finite = |v: RateValue| if v.is_finite() { json_f64(v.value()) } else { Value::Null };
        let diff = if r.cstar.is_finite() && sol.cstar.is_finite() {
            json_f64((r.cstar.value() - sol.cstar.value()).abs())
        } else {
            Value::Null
        };
        doc["oracle"] = json!({
            "h": json_f64(h),
            "cstar": finite(r.cstar),
            "s": r.s.map(json_f64),
            "x": r.x.iter().map(|&v| json_f64(v)).collect::<Vec<_>>(),
            "abs_diff": diff,
        });
    }
    if let Some(path) = &a.path_out {
        let traj = most_likely_queue_path(&sol, &spec, a.npts.unwrap_or(201)).map_err(domain)?;
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)
            .map_err(|e| domain(format!("{}: {e}", path.display())))?;
        w.write_record(["s", "value"]).map_err(domain)?;
        for (s, v) in &traj.samples {
            w.write_record([fmt_sig(*s), fmt_sig(*v)]).map_err(domain)?;
        }
        w.flush().map_err(domain)?;
    }
    write_line(out, &doc.to_string())
}

fn step_of(p: AnyPath, origin: &Path) -> Result<StepPath, Failure> {
    match p {
        AnyPath::Step(s) => Ok(s),
        AnyPath::Piecewise(_) => Err(Failure::Domain(format!("{}: expected a step path", origin.display()))),
    }
}

fn rate(a: &RateArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let given = [
        ("path", a.path.is_some()),
        ("paths", a.paths.is_some()),
        ("weights", a.weights.is_some()),
        ("component", a.component.is_some()),
        ("k", a.k.is_some()),
        ("c", a.c.is_some()),
        ("b", a.b.is_some()),
        ("es", a.es.is_some()),
        ("gamma", a.gamma.is_some()),
    ];
    let mode = "this --fn";
    let load = |mode: &str| -> Result<(AnyPath, PathBuf), Failure> {
        let p = a.path.clone().ok_or_else(|| Failure::Usage(format!("{mode} needs --path")))?;
        Ok((read_path_arg(&p, a.component.as_deref()).map_err(domain)?, p))
    };
    let value = match a.func {
        RateFn::I | RateFn::IM1p => {
            only(mode, &given, &["path", "component"])?;
            let (p, origin) = load("--fn I")?;
            let p = step_of(p, &origin)?;
            if a.func == RateFn::I {
                rate_i(&p, a.alpha)
            } else {
                rate_im1p(&p, a.alpha)
            }
            .map_err(domain)?
        }
        RateFn::Ik => {
            only(mode, &given, &["path", "component", "k"])?;
            let k = need(a.k, "k", "--fn Ik")?;
            let (p, origin) = load("--fn Ik")?;
            rate_ik(&step_of(p, &origin)?, a.alpha, k).map_err(domain)?
        }
        RateFn::Id => {
            only(mode, &given, &["paths", "weights", "component"])?;
            let files: Vec<PathBuf> = a
                .paths
                .as_deref()
                .ok_or_else(|| Failure::Usage("--fn Id needs --paths".into()))?
                .split(',')
                .map(|s| PathBuf::from(s.trim()))
                .collect();
            let paths = files
                .iter()
                .map(|f| step_of(read_path_arg(f, a.component.as_deref()).map_err(domain)?, f))
                .collect::<Result<Vec<_>, _>>()?;
            let weights = match &a.weights {
                Some(w) => split_list(w, "weights")?,
                None => vec![1.0; paths.len()],
            };
            rate_id(&paths, a.alpha, &weights).map_err(domain)?
        }
        RateFn::Boundary => {
            only(mode, &given, &["c", "b"])?;
            rate_boundary(need(a.c, "c", "--fn boundary")?, need(a.b, "b", "--fn boundary")?, a.alpha)
                .map_err(domain)?
        }
        RateFn::Renewal => {
            only(mode, &given, &["path", "component", "es", "gamma"])?;
            let (p, _) = load("--fn renewal")?;
            let p = p.to_piecewise();
            let gamma = a.gamma.unwrap_or(p.horizon());
            rate_renewal(&p, a.alpha, a.es.unwrap_or(1.0), gamma).map_err(domain)?
        }
    };
    write_line(out, &rate_text(value))
}

fn dist(a: &DistArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let pa = read_path_arg(&a.a, a.component.as_deref()).map_err(domain)?;
    let pb = read_path_arg(&a.b, a.component.as_deref()).map_err(domain)?;
    let doc = match a.metric {
        MetricName::Uniform => {
            let d = match (&pa, &pb) {
                (AnyPath::Step(x), AnyPath::Step(y)) => d_uniform(x, y),
                _ => d_uniform_pl(&pa.to_piecewise(), &pb.to_piecewise()),
            }
            .map_err(domain)?;
            json!({"metric": "uniform", "distance": json_f64(d)})
        }
        MetricName::J1 => {
            let r = d_j1(&step_of(pa, &a.a)?, &step_of(pb, &a.b)?).map_err(domain)?;
            json!({"metric": "j1", "distance": json_f64(r.distance), "matching": r.matching})
        }
        MetricName::M1p => {
            let d = d_m1p(&step_of(pa, &a.a)?, &step_of(pb, &a.b)?).map_err(domain)?;
            json!({"metric": "m1p", "distance": json_f64(d)})
        }
    };
    write_line(out, &doc.to_string())
}

fn write_doc(text: &str, dest: Option<&Path>, out: &mut dyn Write) -> Result<(), Failure> {
    match dest {
        Some(p) => fs::write(p, format!("{text}\n")).map_err(|e| domain(format!("{}: {e}", p.display()))),
        None => write_line(out, text),
    }
}

fn simulate(a: &SimulateArgs, seed: u64, out: &mut dyn Write) -> Result<(), Failure> {
    let given = [
        ("c", a.c.is_some()),
        ("jump-floor", a.jump_floor.is_some()),
        ("d", a.d.is_some()),
        ("lambda", a.lambda.is_some()),
        ("gamma", a.gamma.is_some()),
        ("b", a.b.is_some()),
        ("arrivals", a.arrivals.is_some()),
    ];
    let mut rng = RngStream::new(seed, a.stream).rng();
    let text = match a.what {
        What::Walk => {
            only("--what walk", &given, &["c"])?;
            let tail = TailModel::new(a.alpha, a.c.unwrap_or(1.0)).map_err(domain)?;
            step_path_json(&simulate_scaled_walk(a.n, &tail, &mut rng).map_err(domain)?)
        }
        What::Levy => {
            only("--what levy", &given, &["c", "jump-floor"])?;
            let tail = TailModel::new(a.alpha, a.c.unwrap_or(1.0)).map_err(domain)?;
            let p = simulate_scaled_levy(a.n, &tail, a.jump_floor.unwrap_or(1.0), &mut rng).map_err(domain)?;
            step_path_json(&p)
        }
        What::Queue => {
            only("--what queue", &given, &["d", "lambda", "gamma", "b", "arrivals"])?;
            let spec = QueueSpec::new(
                need(a.d, "d", "--what queue")?,
                need(a.lambda, "lambda", "--what queue")?,
                a.alpha,
                need(a.gamma, "gamma", "--what queue")?,
                a.b.unwrap_or(1.0),
            )
            .map_err(domain)?;
            let law = a.arrivals.map_or(ArrivalLaw::Exponential, Into::into);
            queue_inputs_json(&simulate_queue_inputs(&spec, a.n, law, RngStream::new(seed, a.stream)).map_err(domain)?)
        }
    };
    write_doc(&text, a.out.as_deref(), out)
}

fn tail(a: &TailArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let tail = TailModel::new(a.alpha, a.c).map_err(domain)?;
    let t = largest_jump_tail_exact(a.n, a.k, a.delta, &tail).map_err(domain)?;
    let doc = json!({"p": json_f64(t.p), "log_p": json_f64(t.log_p), "norm_log": json_f64(t.norm_log)});
    write_line(out, &doc.to_string())
}

fn generator(name: Option<GeneratorName>, floor: Option<f64>, default: Generator) -> Result<Generator, Failure> {
    match (name, floor) {
        (Some(GeneratorName::Walk), Some(_)) => Err(Failure::Usage("--jump-floor not applicable to --generator walk".into())),
        (Some(GeneratorName::Walk), None) => Ok(Generator::Walk),
        (Some(GeneratorName::Levy), f) => Ok(Generator::Levy { jump_floor: f.unwrap_or(1.0) }),
        (None, Some(f)) => match default {
            Generator::Levy { .. } => Ok(Generator::Levy { jump_floor: f }),
            Generator::Walk => Err(Failure::Usage("--jump-floor needs --generator levy".into())),
        },
        (None, None) => Ok(default),
    }
}

/// Default configuration for the experiment with the given flags applied.
fn experiment_config(a: &EstimateArgs) -> Result<ExperimentConfig, Failure> {
    let which = match a.experiment {
        ExperimentName::Moderate => Experiment::Moderate,
        ExperimentName::Residual => Experiment::Residual,
        ExperimentName::Queue => Experiment::Queue,
    };
    let given = [
        ("alpha", a.alpha.is_some()),
        ("c", a.c.is_some()),
        ("level", a.level.is_some()),
        ("cap", a.cap.is_some()),
        ("ns", a.ns.is_some()),
        ("n", a.n.is_some()),
        ("ks", a.ks.is_some()),
        ("eps", a.eps.is_some()),
        ("generator", a.generator.is_some()),
        ("jump-floor", a.jump_floor.is_some()),
        ("d", a.d.is_some()),
        ("lambda", a.lambda.is_some()),
        ("gamma", a.gamma.is_some()),
        ("b", a.b.is_some()),
        ("arrivals", a.arrivals.is_some()),
    ];
    let mut cfg = ExperimentConfig::defaults(which);
    match &mut cfg {
        ExperimentConfig::Moderate(m) => {
            only(
                "--experiment moderate",
                &given,
                &["alpha", "c", "level", "cap", "ns", "generator", "jump-floor"],
            )?;
            m.alpha = a.alpha.unwrap_or(m.alpha);
            m.c = a.c.unwrap_or(m.c);
            m.level = a.level.unwrap_or(m.level);
            m.cap = a.cap.unwrap_or(m.cap);
            if let Some(ns) = &a.ns {
                m.ns = split_list(ns, "ns")?;
            }
            m.trials = a.trials.unwrap_or(m.trials);
            m.generator = generator(a.generator, a.jump_floor, m.generator)?;
        }
        ExperimentConfig::Residual(r) => {
            only("--experiment residual", &given, &["alpha", "c", "n", "ks", "eps", "generator", "jump-floor"])?;
            r.alpha = a.alpha.unwrap_or(r.alpha);
            r.c = a.c.unwrap_or(r.c);
            r.n = a.n.unwrap_or(r.n);
            if let Some(ks) = &a.ks {
                r.ks = split_list(ks, "ks")?;
            }
            r.eps = a.eps.unwrap_or(r.eps);
            r.trials = a.trials.unwrap_or(r.trials);
            r.generator = generator(a.generator, a.jump_floor, r.generator)?;
        }
        ExperimentConfig::Queue(q) => {
            only("--experiment queue", &given, &["alpha", "ns", "d", "lambda", "gamma", "b", "arrivals"])?;
            q.spec.alpha = a.alpha.unwrap_or(q.spec.alpha);
            q.spec.d = a.d.unwrap_or(q.spec.d);
            q.spec.lambda = a.lambda.unwrap_or(q.spec.lambda);
            q.spec.gamma = a.gamma.unwrap_or(q.spec.gamma);
            q.spec.b = a.b.unwrap_or(q.spec.b);
            if let Some(ns) = &a.ns {
                q.ns = split_list(ns, "ns")?;
            }
            q.trials = a.trials.unwrap_or(q.trials);
            q.arrivals = a.arrivals.map_or(q.arrivals, Into::into);
        }
    }
    Ok(cfg)
}

fn estimate(a: &EstimateArgs, seed: u64, threads: usize, out: &mut dyn Write) -> Result<(), Failure> {
    let cfg = experiment_config(a)?;
    let p = pool(threads).map_err(domain)?;
    let rows = run_experiment(&cfg, seed, &p).map_err(|e| match e {
        ExperimentError::Refused { .. } => Failure::Refused(e.to_string()),
        e => domain(e),
    })?;
    let format = match a.format {
        FormatName::Csv => Format::Csv,
        FormatName::Json => Format::Json,
    };
    match &a.out {
        Some(path) => {
            let f = fs::File::create(path).map_err(|e| domain(format!("{}: {e}", path.display())))?;
            write_report(&rows, format, std::io::BufWriter::new(f)).map_err(domain)
        }
        None => write_report(&rows, format, out).map_err(domain),
    }
}
