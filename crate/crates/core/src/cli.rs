//! Command-line front end. [`run_cli`] parses arguments, runs one
//! subcommand, and returns the process exit status.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::engine::{monte_carlo_with, McOptions, MonteCarloStats};
use crate::error::Error;
use crate::exact::{
    build_policy_tree, constructive_policy_value, eval_policy_tree, min_opened_budgeted, optimal_cost_dp,
    restricted_policy_search, single_bin_optimal_iid, SearchLimits, TablePolicy, DEFAULT_MAX_STATES,
    DEFAULT_TREE_LIMIT, DEFAULT_USAGE_LIMIT,
};
use crate::generators::{
    count_sat_bruteforce, gen_named, reduction_instance, reduction_value, reduction_value_corrected, symmetrize_2cnf,
    Cnf, GenParams,
};
use crate::instance::Instance;
use crate::mdp::{threshold, MdpOptions};
use crate::num::{fmt_decimal, fmt_rational, parse_rational, to_f64, Gamma, Q};
use crate::policies::PolicyConfig;
use crate::ptas::{discretize_instance, ptas_dp, track_monte_carlo, DiscretizationParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CAPACITY: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

pub const CSV_HEADER: &str = "prefix,policy,mean_cost,stderr,mean_opened,mean_broken,ref_cost,ratio";

#[derive(Parser, Debug)]
#[command(name = "adaptive-binpack", version, about = "Adaptive bin packing with overflow penalties")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a named instance family, or a reduction instance, to a file.
    Generate(GenerateArgs),
    /// Monte Carlo evaluation of policies, one CSV row per prefix and policy.
    Simulate(SimulateArgs),
    /// Exact optimum of a small discrete instance.
    Exact(ExactArgs),
    /// Discretize, solve the level-vector DP, optionally track on real items.
    Ptas(PtasArgs),
    /// Threshold of the discounted single-bin MDP.
    Threshold(ThresholdArgs),
    /// Build the reduction instance of a CNF formula and evaluate it.
    Reduce(ReduceArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Family name, or `reduction` (needs --cnf).
    name: String,
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Overflow penalty.
    #[arg(long = "C", default_value = "50")]
    penalty: String,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long)]
    eps: Option<String>,
    /// DIMACS formula for `reduction`.
    #[arg(long)]
    cnf: Option<PathBuf>,
    /// Symmetrize a 2CNF before reducing.
    #[arg(long)]
    symmetrize: bool,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(short, long)]
    input: PathBuf,
    /// Comma-separated policies: bg:γ, fg, ft:α, tg:α, mdp, split:γ.
    #[arg(short, long)]
    policies: String,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated prefix lengths; the full length is always reported.
    #[arg(long, value_delimiter = ',')]
    prefix_sweep: Vec<usize>,
    #[arg(long)]
    workers: Option<usize>,
    /// CSV path; standard output when absent.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// JSON report path.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExactArgs {
    #[arg(short, long)]
    input: PathBuf,
    /// Best one-active-bin policy (i.i.d. instances).
    #[arg(long, conflicts_with = "budgeted")]
    single_bin: bool,
    /// Minimum expected bins over policies with risk budget γ/C.
    #[arg(long)]
    budgeted: Option<String>,
    #[arg(long, default_value_t = DEFAULT_MAX_STATES)]
    max_states: usize,
    /// Write the optimal action table here.
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PtasArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(long)]
    eps: String,
    /// Grid in (0, ε⁴]; default ε⁵.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    track: bool,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_MAX_STATES)]
    max_states: usize,
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ThresholdArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0.999)]
    discount: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_states: usize,
}

#[derive(Args, Debug)]
struct ReduceArgs {
    /// DIMACS formula.
    #[arg(short = 'f', long = "file")]
    file: PathBuf,
    #[arg(long)]
    symmetrize: bool,
    #[arg(long = "C", default_value = "10")]
    penalty: String,
    /// Skip the restricted search.
    #[arg(long)]
    no_search: bool,
}

/// Runs the CLI on `argv` (program name first), writing to `out`.
pub fn run_cli_with<I, T>(argv: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let argv: Vec<std::ffi::OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let echo: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let result = match cli.cmd {
        Command::Generate(a) => generate(a, out),
        Command::Simulate(a) => simulate(a, &echo, out),
        Command::Exact(a) => exact(a, out),
        Command::Ptas(a) => ptas(a, out),
        Command::Threshold(a) => run_threshold(a, out),
        Command::Reduce(a) => reduce(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    run_cli_with(argv, &mut std::io::stdout().lock())
}

fn exit_code(e: &anyhow::Error) -> i32 {
    match e.downcast_ref::<Error>() {
        Some(
            Error::StateSpaceTooLarge { .. }
            | Error::UsageSetTooLarge { .. }
            | Error::TreeTooLarge { .. }
            | Error::InstanceTooLarge(_)
            | Error::NotSimulable(_),
        ) => EXIT_CAPACITY,
        Some(Error::DeviationLogicBreach { .. } | Error::InconsistentTree(_)) => EXIT_INVARIANT,
        Some(
            Error::Parse(_)
            | Error::InvalidParams(_)
            | Error::InvalidPolicy(_)
            | Error::UnknownName(_)
            | Error::NonDiscreteItem(_)
            | Error::NotSymmetric
            | Error::NotWidth2(_)
            | Error::ParamsMismatch,
        ) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

fn load(path: &Path) -> anyhow::Result<Instance> {
    Instance::load(path).with_context(|| format!("reading instance {}", path.display()))
}

fn rational(s: &str) -> anyhow::Result<Q> {
    Ok(parse_rational(s)?)
}

fn write_json(path: &Path, v: &Value) -> anyhow::Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(v)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn show(x: &Q) -> String {
    format!("{} ({})", fmt_rational(x), fmt_decimal(x, 12))
}

fn read_cnf(path: &Path, symmetrize: bool) -> anyhow::Result<Cnf> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let phi = Cnf::parse_dimacs(&text)?;
    Ok(if symmetrize { symmetrize_2cnf(&phi)? } else { phi })
}

fn generate(a: GenerateArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let penalty = rational(&a.penalty)?;
    if a.name == "reduction" {
        let path = a.cnf.as_deref().ok_or_else(|| Error::InvalidParams("reduction needs --cnf".into()))?;
        let phi = read_cnf(path, a.symmetrize)?;
        let art = reduction_instance(&phi, &penalty)?;
        art.instance.save(&a.output)?;
        let meta = a.output.with_extension("meta.json");
        write_json(&meta, &art.metadata_json())?;
        writeln!(out, "wrote {} items to {} and {}", art.instance.len(), a.output.display(), meta.display())?;
        return Ok(());
    }
    let mut p = GenParams::new(a.n, penalty);
    p.alpha = a.alpha.as_deref().map(rational).transpose()?;
    p.n1 = a.n1;
    p.eps = a.eps.as_deref().map(rational).transpose()?;
    let inst = gen_named(&a.name, &p)?;
    inst.save(&a.output)?;
    writeln!(out, "wrote {} items to {}", inst.len(), a.output.display())?;
    Ok(())
}

/// Reference cost per prefix length `0..=n`: the single-bin optimum for
/// i.i.d. discrete instances, else `k/C + 1`.
fn reference_curve(inst: &Instance) -> (Vec<f64>, &'static str) {
    if inst.is_iid() && inst.is_discrete() {
        if let Ok(c) =
            single_bin_optimal_iid::<f64>(inst.item(0), inst.len(), inst.penalty(), inst.capacity(), DEFAULT_USAGE_LIMIT)
        {
            return (c, "single_bin_optimum");
        }
    }
    let c = to_f64(inst.penalty());
    ((0..=inst.len()).map(|k| k as f64 / c + 1.0).collect(), "proxy_n_over_C_plus_1")
}

fn simulate(a: SimulateArgs, echo: &[String], out: &mut dyn Write) -> anyhow::Result<()> {
    let started = Instant::now();
    let inst = load(&a.input)?;
    let compiled = inst.compile()?;
    let configs = PolicyConfig::parse_list(&a.policies)?;
    if configs.is_empty() {
        return Err(Error::InvalidPolicy("no policies given".into()).into());
    }
    let n = inst.len();
    let mut checkpoints: Vec<usize> = a.prefix_sweep.iter().copied().filter(|&k| k >= 1 && k <= n).collect();
    checkpoints.push(n);
    checkpoints.sort_unstable();
    checkpoints.dedup();
    let opts = McOptions { checkpoints: checkpoints.clone(), workers: a.workers };
    let (curve, ref_kind) = reference_curve(&inst);
    let mut stats: Vec<MonteCarloStats> = Vec::new();
    for c in &configs {
        let policy = c.prepare(&inst, &compiled)?;
        stats.push(monte_carlo_with(&compiled, policy.as_ref(), a.trials, a.seed, &opts)?);
    }
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    let mut rows = Vec::new();
    for (k_idx, &k) in checkpoints.iter().enumerate() {
        for s in &stats {
            let p = &s.prefixes[k_idx];
            let r = curve[k];
            let ratio = p.mean_cost / r;
            csv.push_str(&format!(
                "{k},{},{},{},{},{},{},{}\n",
                s.policy, p.mean_cost, p.stderr, p.mean_opened, p.mean_broken, r, ratio
            ));
            rows.push(json!({
                "prefix": k, "policy": s.policy, "mean_cost": p.mean_cost, "stderr": p.stderr,
                "mean_opened": p.mean_opened, "mean_broken": p.mean_broken, "ref_cost": r, "ratio": ratio,
            }));
        }
    }
    match &a.csv {
        Some(path) => std::fs::write(path, &csv).with_context(|| format!("writing {}", path.display()))?,
        None => out.write_all(csv.as_bytes())?,
    }
    if let Some(path) = &a.report {
        let report = json!({
            "command": echo,
            "params": {
                "input": a.input.display().to_string(),
                "policies": configs.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
                "trials": a.trials,
                "prefixes": checkpoints,
                "n": n,
                "penalty": fmt_rational(inst.penalty()),
            },
            "seed": a.seed,
            "reference": { "kind": ref_kind, "proxy": ref_kind != "single_bin_optimum" },
            "stats": stats,
            "rows": rows,
            "timing": { "wall_clock_s": started.elapsed().as_secs_f64() },
        });
        write_json(path, &report)?;
    }
    Ok(())
}

fn exact(a: ExactArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let inst = load(&a.input)?;
    if a.single_bin {
        if !inst.is_iid() {
            return Err(Error::InvalidParams("--single-bin needs an i.i.d. instance".into()).into());
        }
        let curve = single_bin_optimal_iid::<Q>(inst.item(0), inst.len(), inst.penalty(), inst.capacity(), DEFAULT_USAGE_LIMIT)?;
        writeln!(out, "single_bin_value: {}", show(curve.last().unwrap()))?;
        return Ok(());
    }
    if let Some(g) = &a.budgeted {
        let gamma = Gamma::parse(g)?;
        let v = min_opened_budgeted(&inst, &gamma, usize::MAX, a.max_states)?;
        writeln!(out, "gamma: {gamma}")?;
        writeln!(out, "min_opened_budgeted: {}", show(&v))?;
        return Ok(());
    }
    let sol = optimal_cost_dp(&inst, a.max_states)?;
    writeln!(out, "value: {}", show(&sol.value))?;
    writeln!(out, "states: {}", sol.states())?;
    let compiled = inst.compile()?;
    let policy = TablePolicy::new(sol.table.clone(), &compiled)?;
    match build_policy_tree(&inst, &policy, DEFAULT_TREE_LIMIT) {
        Ok(tree) => {
            let v = eval_policy_tree(&tree, &inst)?;
            writeln!(out, "tree_value: {}", show(&v))?;
            writeln!(out, "tree_matches: {}", v == sol.value)?;
        }
        Err(Error::TreeTooLarge { limit }) => writeln!(out, "tree_value: skipped (more than {limit} nodes)")?,
        Err(e) => return Err(e.into()),
    }
    if let Some(path) = &a.table {
        write_json(path, &sol.table.to_json())?;
    }
    Ok(())
}

fn ptas(a: PtasArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let inst = load(&a.input)?;
    let eps = rational(&a.eps)?;
    let params = match &a.grid {
        Some(g) => DiscretizationParams::with_grid(eps, rational(g)?)?,
        None => DiscretizationParams::new(eps)?,
    };
    let hat = discretize_instance(&inst, &params)?;
    let sol = ptas_dp(&hat, &params, a.max_states)?;
    writeln!(out, "eps: {}", fmt_rational(params.eps()))?;
    writeln!(out, "grid: {}", fmt_rational(params.grid()))?;
    writeln!(out, "dp_capacity: {}", fmt_rational(&params.dp_capacity()))?;
    writeln!(out, "value: {}", show(&sol.value))?;
    writeln!(out, "states: {}", sol.table.len())?;
    if let Some(path) = &a.table {
        write_json(path, &sol.table.to_json())?;
    }
    if a.track {
        let st = track_monte_carlo(&sol.table, &inst, &params, a.trials, a.seed, a.workers)?;
        writeln!(out, "track_capacity: {}", fmt_rational(&params.track_capacity()))?;
        writeln!(out, "tracked_mean_cost: {}", st.mean_cost)?;
        writeln!(out, "tracked_stderr: {}", st.stderr)?;
        writeln!(out, "discretized_mean_cost: {}", st.mean_hat_cost)?;
        writeln!(out, "mean_opened: {}", st.mean_opened)?;
        writeln!(out, "mean_broken: {}", st.mean_broken)?;
        for s in &st.sources {
            writeln!(out, "source {}: open_freq {} mean_copies {}", s.bin, s.open_freq, s.mean_copies)?;
        }
    }
    Ok(())
}

fn run_threshold(a: ThresholdArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let inst = load(&a.input)?;
    if !inst.is_iid() {
        return Err(Error::InvalidParams("threshold needs an i.i.d. instance".into()).into());
    }
    let opts = MdpOptions { discount: a.discount, tol: a.tol, cap_states: a.max_states };
    let r = threshold(inst.item(0), inst.penalty(), inst.capacity(), &opts)?;
    writeln!(out, "alpha: {}", show(&r.alpha))?;
    writeln!(out, "alpha_fraction: {}", show(&r.alpha_fraction(inst.capacity())))?;
    writeln!(out, "states: {}", r.states)?;
    writeln!(out, "iterations: {}", r.iterations)?;
    writeln!(out, "residual: {:e}", r.residual)?;
    writeln!(out, "interval: {}", r.interval)?;
    writeln!(out, "monotone: {}", r.monotone)?;
    Ok(())
}

fn reduce(a: ReduceArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let phi = read_cnf(&a.file, a.symmetrize)?;
    let s = count_sat_bruteforce(&phi)?;
    let art = reduction_instance(&phi, &rational(&a.penalty)?)?;
    let stated = reduction_value(phi.n_vars, s)?;
    let corrected = reduction_value_corrected(phi.n_vars, s)?;
    writeln!(out, "variables: {}", phi.n_vars)?;
    writeln!(out, "clauses: {}", phi.clauses.len())?;
    writeln!(out, "items: {}", art.instance.len())?;
    writeln!(out, "satisfying: {s}")?;
    writeln!(out, "stated_value: {}", show(&stated))?;
    writeln!(out, "corrected_value: {}", show(&corrected))?;
    if a.no_search {
        return Ok(());
    }
    match restricted_policy_search(&art, &SearchLimits::default()) {
        Ok(r) => {
            writeln!(out, "searched_value: {}", show(&r.value))?;
            writeln!(out, "constructive_value: {}", show(&constructive_policy_value(&art)?))?;
            writeln!(out, "searched_equals_stated: {}", r.value == stated)?;
            writeln!(out, "searched_equals_corrected: {}", r.value == corrected)?;
            writeln!(out, "digit_carries: {}", r.carries)?;
        }
        Err(Error::InstanceTooLarge(m)) => writeln!(out, "searched_value: skipped ({m})")?,
        Err(e) => return Err(e.into()),
    }
    Ok(())
}
