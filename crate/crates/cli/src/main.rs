//! Command-line surface: instance generation, the exact reference oracle,
//! learning runs, regret experiments, and a white-box audit.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error. All numeric
//! output is JSON or CSV at full float precision, so identical argv and
//! seed produce byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use contract_learner::driver::{
    compute_params_with_overrides, discover_and_cover, MixMode, Overrides, Params,
};
use contract_learner::environment::Environment;
use contract_learner::find_contract::suboptimality_audit;
use contract_learner::instgen::{gen_hardness, gen_random};
use contract_learner::model::{principal_utility, Contract, Instance};
use contract_learner::oracle_ref::{grid_opt, solve_opt};
use contract_learner::regret::{per_round_csv, run_regret};
use contract_learner::try_cover::CoverSnapshot;

#[derive(Parser)]
#[command(name = "contract-learner", version, about = "Learning bounded contracts from outcome samples")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate an instance file.
    Gen {
        #[command(subcommand)]
        family: GenCmd,
    },
    /// Exact optimal bounded contract of an instance.
    Oracle {
        /// Instance JSON file.
        #[arg(long)]
        instance: PathBuf,
        /// Per-outcome payment bound.
        #[arg(long = "B")]
        bound: f64,
        /// Also brute-force over the grid {0, step, ..., B}^m.
        #[arg(long, value_name = "STEP")]
        grid: Option<f64>,
    },
    /// Learn a contract from outcome samples alone.
    Learn(LearnArgs),
    /// Explore-then-commit regret experiment.
    Regret(RegretArgs),
    /// Distance of a contract's utility from the exact optimum.
    Audit {
        /// Instance JSON file.
        #[arg(long)]
        instance: PathBuf,
        /// Per-outcome payment bound.
        #[arg(long = "B")]
        bound: f64,
        /// Payment vector: a JSON array, or a path to a JSON file with a
        /// top-level array or a "contract" field (e.g. a learn result).
        #[arg(long)]
        contract: String,
    },
}

#[derive(Subcommand)]
enum GenCmd {
    /// Random instance with a pairwise separation floor.
    Random {
        /// Number of actions.
        #[arg(long)]
        n: usize,
        /// Number of outcomes.
        #[arg(long)]
        m: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Minimum pairwise L-infinity distance between distributions.
        #[arg(long, default_value_t = 0.0)]
        min_sep: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Two-action three-outcome family that separates bounded from
    /// unbounded optima.
    Hardness {
        #[arg(long)]
        eps: f64,
        /// Enforce the analysis range eps < 1/80 instead of allowing any
        /// eps in (0, 1/2).
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct LearnArgs {
    /// Instance JSON file.
    #[arg(long)]
    instance: PathBuf,
    /// Target suboptimality in (0, 1).
    #[arg(long)]
    rho: Option<f64>,
    /// Failure probability in (0, 1).
    #[arg(long)]
    delta: Option<f64>,
    /// Per-outcome payment bound (at least 1).
    #[arg(long = "B")]
    bound: Option<f64>,
    /// Replace the derived estimation tolerance.
    #[arg(long)]
    eps: Option<f64>,
    /// Replace the derived samples-per-query count.
    #[arg(long)]
    q: Option<u64>,
    /// Replace the derived bisection resolution.
    #[arg(long)]
    eta: Option<f64>,
    /// Mixing weight: "gamma", "eps", or an explicit value.
    #[arg(long)]
    mix: Option<String>,
    /// Action-count bound used only for parameter derivation
    /// (default: the instance's true count).
    #[arg(long)]
    n_bound: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Hard cap on environment rounds.
    #[arg(long)]
    round_cap: Option<u64>,
    /// Result JSON file (an array when --replicates > 1).
    #[arg(long)]
    out: PathBuf,
    /// Include the exact suboptimality (needs the true instance).
    #[arg(long)]
    whitebox: bool,
    /// Write per-pass covering snapshots to this JSON file.
    #[arg(long, value_name = "PATH")]
    trace_cover: Option<PathBuf>,
    /// Run this many consecutive seeds.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    replicates: u64,
    /// Worker threads for replicates (default: one per core).
    #[arg(long)]
    jobs: Option<usize>,
    /// JSON file with defaults for rho, delta, B, eps, q, eta, mix, seed,
    /// round_cap; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct RegretArgs {
    /// Instance JSON file.
    #[arg(long)]
    instance: PathBuf,
    /// Horizon (number of rounds).
    #[arg(long = "T")]
    horizon: Option<u64>,
    /// Failure probability in (0, 1).
    #[arg(long)]
    delta: Option<f64>,
    /// Per-outcome payment bound (at least 1).
    #[arg(long = "B")]
    bound: Option<f64>,
    /// Replace the horizon-derived accuracy target.
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    q: Option<u64>,
    #[arg(long)]
    eta: Option<f64>,
    /// Mixing weight: "gamma", "eps", or an explicit value.
    #[arg(long)]
    mix: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Per-round CSV file; replicate seeds get "-<seed>" appended to the
    /// file stem.
    #[arg(long)]
    csv: PathBuf,
    /// Run this many consecutive seeds.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    replicates: u64,
    /// Worker threads for replicates (default: one per core).
    #[arg(long)]
    jobs: Option<usize>,
    /// JSON file with defaults for rho, delta, B, eps, q, eta, mix, seed,
    /// T; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Optional defaults loaded from --config; every flag overrides its field.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    rho: Option<f64>,
    delta: Option<f64>,
    #[serde(rename = "B")]
    bound: Option<f64>,
    eps: Option<f64>,
    q: Option<u64>,
    eta: Option<f64>,
    mix: Option<serde_json::Value>,
    seed: Option<u64>,
    #[serde(rename = "T")]
    horizon: Option<u64>,
    round_cap: Option<u64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Gen { family } => run_gen(family),
        Cmd::Oracle { instance, bound, grid } => run_oracle(&instance, bound, grid),
        Cmd::Learn(args) => run_learn(args),
        Cmd::Regret(args) => run_regret_cmd(args),
        Cmd::Audit { instance, bound, contract } => run_audit(&instance, bound, &contract),
    }
}

fn load_instance(path: &Path) -> Result<Instance> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading instance file {}", path.display()))?;
    Instance::from_json_str(&text)
        .with_context(|| format!("malformed instance file {}", path.display()))
}

fn load_config(path: Option<&Path>) -> Result<ConfigFile> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading config file {}", path.display()))?;
    serde_json::from_str(&text)
        .with_context(|| format!("malformed config file {}", path.display()))
}

/// Seed precedence: flag, then config, then CONTRACT_LEARNER_SEED, then 0.
fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> Result<u64> {
    if let Some(s) = flag.or(config) {
        return Ok(s);
    }
    match std::env::var("CONTRACT_LEARNER_SEED") {
        Ok(v) => v
            .parse::<u64>()
            .with_context(|| format!("CONTRACT_LEARNER_SEED must be a u64, got '{v}'")),
        Err(_) => Ok(0),
    }
}

fn parse_mix(v: &serde_json::Value) -> Result<MixMode> {
    match v {
        serde_json::Value::String(s) => match s.as_str() {
            "gamma" => Ok(MixMode::Gamma),
            "eps" => Ok(MixMode::Eps),
            other => other
                .parse::<f64>()
                .map(MixMode::Value)
                .map_err(|_| anyhow::anyhow!("mix must be \"gamma\", \"eps\", or a number, got \"{other}\"")),
        },
        serde_json::Value::Number(x) => Ok(MixMode::Value(
            x.as_f64().context("mix value does not fit in a double")?,
        )),
        other => bail!("mix must be \"gamma\", \"eps\", or a number, got {other}"),
    }
}

fn resolve_mix(flag: Option<&str>, config: Option<&serde_json::Value>) -> Result<MixMode> {
    match (flag, config) {
        (Some(s), _) => parse_mix(&serde_json::Value::String(s.to_owned())),
        (None, Some(v)) => parse_mix(v),
        (None, None) => Ok(MixMode::Gamma),
    }
}

fn write_output(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn run_gen(family: GenCmd) -> Result<()> {
    let (instance, out) = match family {
        GenCmd::Random { n, m, seed, min_sep, out } => {
            let seed = resolve_seed(seed, None)?;
            (gen_random(n, m, seed, min_sep)?, out)
        }
        GenCmd::Hardness { eps, strict, out } => (gen_hardness(eps, strict)?, out),
    };
    write_output(&out, &instance.to_json_string()?)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn run_oracle(path: &Path, bound: f64, grid: Option<f64>) -> Result<()> {
    let instance = load_instance(path)?;
    let opt = solve_opt(&instance, bound)?;
    let mut out = json!({
        "value": opt.value,
        "contract": opt.contract.payments(),
        "action": opt.action,
        "region_values": opt.region_values,
    });
    if let Some(step) = grid {
        let (value, contract) = grid_opt(&instance, bound, step)?;
        out["grid_value"] = json!(value);
        out["grid_contract"] = json!(contract.payments());
    }
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

/// One learning replicate, fully described by its seed.
fn learn_once(
    instance: &Instance,
    params: &Params,
    seed: u64,
    whitebox: bool,
    trace: bool,
) -> Result<(serde_json::Value, Vec<CoverSnapshot>)> {
    let mut env = Environment::new(instance.clone(), seed)?;
    let mut snapshots = Vec::new();
    let outcome = discover_and_cover(
        &mut env,
        &instance.rewards,
        params,
        trace.then_some(&mut snapshots),
    )?;
    let mut report = json!({
        "seed": seed,
        "contract": outcome.result.contract.payments(),
        "rounds": outcome.rounds,
        "restarts": outcome.restarts,
        "oracle_calls": outcome.oracle_calls,
        "region_values": outcome.result.region_values,
        "selected_region": outcome.result.meta,
        "empirical_value": outcome.result.empirical_value,
        "mix_applied": outcome.result.mix_applied,
    });
    if whitebox {
        report["audit"] = json!(suboptimality_audit(
            instance,
            &outcome.result.contract,
            params.bound
        )?);
        report["utility"] = json!(principal_utility(instance, &outcome.result.contract));
    }
    Ok((report, snapshots))
}

fn run_learn(args: LearnArgs) -> Result<()> {
    let config = load_config(args.config.as_deref())?;
    let instance = load_instance(&args.instance)?;
    let rho = args.rho.or(config.rho).unwrap_or(0.1);
    let delta = args.delta.or(config.delta).unwrap_or(0.05);
    let bound = args.bound.or(config.bound).unwrap_or(1.0);
    let mix = resolve_mix(args.mix.as_deref(), config.mix.as_ref())?;
    let overrides = Overrides {
        eps: args.eps.or(config.eps),
        eta: args.eta.or(config.eta),
        alpha: None,
        q: args.q.or(config.q),
    };
    let n_bound = args.n_bound.unwrap_or_else(|| instance.n_actions());
    let mut params = compute_params_with_overrides(
        rho,
        delta,
        bound,
        instance.n_outcomes(),
        n_bound,
        mix,
        overrides,
    )?;
    if let Some(cap) = args.round_cap.or(config.round_cap) {
        params.round_cap = cap;
    }
    let seed = resolve_seed(args.seed, config.seed)?;
    if args.trace_cover.is_some() && args.replicates > 1 {
        bail!("--trace-cover is only meaningful with a single replicate");
    }

    let seeds: Vec<u64> = (0..args.replicates).map(|i| seed + i).collect();
    let mut results = run_replicates(args.jobs, &seeds, |s| {
        learn_once(&instance, &params, s, args.whitebox, args.trace_cover.is_some())
    })?;

    if let Some(path) = &args.trace_cover {
        let (_, snapshots) = &results[0];
        write_output(path, &serde_json::to_string_pretty(snapshots)?)?;
    }
    let body = if args.replicates == 1 {
        serde_json::to_string_pretty(&results.remove(0).0)?
    } else {
        let reports: Vec<serde_json::Value> = results.into_iter().map(|(r, _)| r).collect();
        serde_json::to_string_pretty(&reports)?
    };
    write_output(&args.out, &body)?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn run_regret_cmd(args: RegretArgs) -> Result<()> {
    let config = load_config(args.config.as_deref())?;
    let instance = load_instance(&args.instance)?;
    let horizon = args
        .horizon
        .or(config.horizon)
        .context("missing --T (or \"T\" in the config file)")?;
    let delta = args.delta.or(config.delta).unwrap_or(0.05);
    let bound = args.bound.or(config.bound).unwrap_or(1.0);
    let rho = args.rho.or(config.rho);
    let mix = resolve_mix(args.mix.as_deref(), config.mix.as_ref())?;
    let overrides = Overrides {
        eps: args.eps.or(config.eps),
        eta: args.eta.or(config.eta),
        alpha: None,
        q: args.q.or(config.q),
    };
    let seed = resolve_seed(args.seed, config.seed)?;

    let seeds: Vec<u64> = (0..args.replicates).map(|i| seed + i).collect();
    let results = run_replicates(args.jobs, &seeds, |s| {
        let outcome = run_regret(&instance, horizon, delta, bound, rho, mix, overrides, s)?;
        Ok((s, outcome))
    })?;

    for (s, outcome) in &results {
        let path = if args.replicates == 1 {
            args.csv.clone()
        } else {
            replicate_path(&args.csv, *s)
        };
        write_output(&path, &per_round_csv(outcome))?;
        let summary = json!({
            "seed": s,
            "T": outcome.horizon,
            "opt": outcome.opt,
            "rho": outcome.rho_used,
            "cumulative_regret": outcome.cumulative_regret,
            "exploration_rounds": outcome.exploration_rounds,
            "all_exploration": outcome.all_exploration,
            "restarts": outcome.restarts,
            "learned_contract": outcome.learned.as_ref().map(|c| c.payments().to_vec()),
            "learned_value": outcome.learned_value,
            "csv": path.display().to_string(),
        });
        println!("{}", serde_json::to_string(&summary)?);
    }
    Ok(())
}

/// "out.csv" with seed 7 becomes "out-7.csv".
fn replicate_path(base: &Path, seed: u64) -> PathBuf {
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    base.with_file_name(format!("{stem}-{seed}.{ext}"))
}

/// Runs one closure per seed, in parallel when requested; results come
/// back in seed order so aggregation is deterministic.
fn run_replicates<T: Send>(
    jobs: Option<usize>,
    seeds: &[u64],
    f: impl Fn(u64) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    use rayon::prelude::*;
    if seeds.len() == 1 {
        return Ok(vec![f(seeds[0])?]);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .context("building worker pool")?;
    pool.install(|| seeds.par_iter().map(|&s| f(s)).collect())
}

fn run_audit(path: &Path, bound: f64, contract_arg: &str) -> Result<()> {
    let instance = load_instance(path)?;
    let payments = parse_contract_arg(contract_arg)?;
    let contract = Contract::new(payments)?;
    let opt = solve_opt(&instance, bound)?;
    let utility = principal_utility(&instance, &contract);
    let audit = suboptimality_audit(&instance, &contract, bound)?;
    let out = json!({
        "opt": opt.value,
        "utility": utility,
        "audit": audit,
        "contract": contract.payments(),
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

/// Accepts an inline JSON array or a path to a JSON file holding either a
/// top-level array or an object with a "contract" array (a learn result).
fn parse_contract_arg(arg: &str) -> Result<Vec<f64>> {
    let text = if arg.trim_start().starts_with('[') {
        arg.to_owned()
    } else {
        fs::read_to_string(arg).with_context(|| format!("reading contract file {arg}"))?
    };
    let value: serde_json::Value =
        serde_json::from_str(&text).context("contract is not valid JSON")?;
    let array = match &value {
        serde_json::Value::Array(_) => &value,
        serde_json::Value::Object(map) => map
            .get("contract")
            .context("contract file has no \"contract\" field")?,
        _ => bail!("contract must be a JSON array of payments"),
    };
    serde_json::from_value(array.clone()).context("contract array must hold numbers")
}
