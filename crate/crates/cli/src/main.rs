//! `esconv`: run the (1+1)-ES, estimate success quantities, verify bounds
//! and run experiment suites from the command line.
//!
//! Exit status: 0 on success, 1 when any bound check fails, 2 on usage
//! errors, 3 on runtime failures.

mod config;
mod emit;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use esconv_core::objectives::Objective;
use esconv_core::{
    es_run, estimate_eta, estimate_sigma_range, estimate_suboptimality, estimate_success_exponent,
    estimate_success_prob, estimate_xi, list_objectives, make_objective, parse_vector, rng,
    run_check, run_experiment, summary_csv, CheckId, CheckOverrides, Defaults, EsParams,
    ExperimentConfig, ObjectiveSpec, SigmaGrid, StoppingRule, SuccessMode,
};

use config::CliConfig;
use emit::{sibling, sink, write_value, Format};

#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub(crate) fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn is_usage(e: &anyhow::Error) -> bool {
    if e.downcast_ref::<Usage>().is_some() {
        return true;
    }
    matches!(
        e.downcast_ref::<esconv_core::Error>(),
        Some(err) if !matches!(err, esconv_core::Error::NonFiniteObjective { .. })
    )
}

#[derive(Parser, Debug)]
#[command(
    name = "esconv",
    version,
    about = "(1+1)-ES runs, Monte Carlo estimates and bound checks"
)]
struct Cli {
    /// Output format; each subcommand has its own default.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Output file (stdout when omitted). Side files are written next to it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Master seed (default: the seed in the shipped defaults file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON settings file. For `experiment` this is an experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Print the resolved configuration as JSON and exit.
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the ES once and write its trace.
    Run(RunArgs),
    /// Monte Carlo estimate of a success quantity.
    Estimate(EstimateArgs),
    /// Run bound checks and report pass/fail.
    Verify(VerifyArgs),
    /// Run an experiment suite.
    Experiment(ExperimentArgs),
    /// List the objective registry.
    ListObjectives,
}

/// Comma-separated decimals as one argument.
#[derive(Debug, Clone)]
struct Vector(Vec<f64>);

fn vector(s: &str) -> Result<Vector, String> {
    parse_vector(s).map(Vector).map_err(|e| e.to_string())
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Objective spec, e.g. `rosenbrock2d` or `quadratic_saddle:a=9`.
    #[arg(long)]
    objective: Option<String>,
    /// Initial mean, comma-separated.
    #[arg(long, value_parser = vector, allow_hyphen_values = true)]
    m0: Option<Vector>,
    /// Initial step size [default: 1].
    #[arg(long)]
    sigma0: Option<f64>,
    /// Iteration budget [default: 10000].
    #[arg(long)]
    max_iters: Option<u64>,
    /// Stop once f(m) <= target.
    #[arg(long, allow_negative_numbers = true)]
    f_target: Option<f64>,
    /// Stop once sigma < floor * max(|m|, 1).
    #[arg(long)]
    sigma_floor: Option<f64>,
    /// Stop once max(|m|, -f(m)) exceeds this radius.
    #[arg(long)]
    divergence_radius: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    c_plus: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    c_minus: Option<f64>,
    /// Keep every n-th iteration in the trace (0 keeps none).
    #[arg(long, default_value_t = 100)]
    stride: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum What {
    Success,
    Suboptimality,
    Xi,
    Eta,
    SigmaRange,
    Exponent,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Strict,
    Weak,
}

impl From<Mode> for SuccessMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Strict => SuccessMode::Strict,
            Mode::Weak => SuccessMode::Weak,
        }
    }
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[arg(long, value_enum)]
    what: Option<What>,
    #[arg(long)]
    objective: Option<String>,
    /// Parent (or evaluation point for suboptimality), comma-separated.
    #[arg(long, value_parser = vector, allow_hyphen_values = true)]
    m: Option<Vector>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Samples (per grid point for xi, eta, sigma-range and exponent).
    #[arg(long)]
    n: Option<u64>,
    #[arg(long, value_enum, default_value = "strict")]
    mode: Mode,
    /// Target probability for xi and eta.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    p_t: Option<f64>,
    #[arg(long)]
    p_h: Option<f64>,
    /// Step-size grid for xi, eta, sigma-range and exponent.
    #[arg(long)]
    sigma_min: Option<f64>,
    #[arg(long)]
    sigma_max: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Check id, or `all`.
    #[arg(long)]
    check: Option<String>,
    /// Objective replacing the check's default one.
    #[arg(long)]
    objective: Option<String>,
    /// Overrides such as `m=1,0 sigma=0.3 n=200000`.
    #[arg(long, num_args = 1..)]
    params: Vec<String>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// A named experiment from the shipped defaults.
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    replicates: Option<u64>,
    #[arg(long)]
    max_iters: Option<u64>,
}

struct Globals {
    format: Option<Format>,
    out: Option<PathBuf>,
    seed: u64,
    dry_run: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_usage(&e) { 2 } else { 3 })
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    let file = match (&cli.config, &cli.command) {
        (Some(p), c) if !matches!(c, Command::Experiment(_)) => CliConfig::load(p)?,
        _ => CliConfig::default(),
    };
    if let Some(j) = cli.jobs.or(file.jobs) {
        if j == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let g = Globals {
        format: cli.format.or(file.format),
        out: cli.out.clone().or(file.out.clone()),
        seed: cli.seed.or(file.seed).unwrap_or(Defaults::shipped().seed),
        dry_run: cli.dry_run,
    };
    match cli.command {
        Command::Run(a) => cmd_run(a, file, &g),
        Command::Estimate(a) => cmd_estimate(a, file, &g),
        Command::Verify(a) => cmd_verify(a, file, &g),
        Command::Experiment(a) => cmd_experiment(a, cli.config, cli.seed, &g),
        Command::ListObjectives => cmd_list(&g),
    }
}

fn objective(spec: Option<String>) -> anyhow::Result<(ObjectiveSpec, Objective)> {
    let text = spec.ok_or_else(|| usage("--objective is required"))?;
    let spec: ObjectiveSpec = text.parse()?;
    let f = make_objective(&spec)?;
    Ok((spec, f))
}

fn dry_run(g: &Globals, value: &impl serde::Serialize) -> anyhow::Result<ExitCode> {
    let mut w = sink(g.out.as_deref())?;
    write_value(&mut w, &serde_json::to_value(value)?, Format::Json)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_run(a: RunArgs, file: CliConfig, g: &Globals) -> anyhow::Result<ExitCode> {
    let d = Defaults::shipped();
    let resolved = CliConfig {
        seed: Some(g.seed),
        format: g.format,
        objective: a.objective.or(file.objective),
        m0: a.m0.map(|v| v.0).or(file.m0),
        sigma0: Some(a.sigma0.or(file.sigma0).unwrap_or(1.0)),
        max_iters: Some(a.max_iters.or(file.max_iters).unwrap_or(10_000)),
        f_target: a.f_target.or(file.f_target),
        c_plus: Some(a.c_plus.or(file.c_plus).unwrap_or(d.params.c_plus())),
        c_minus: Some(a.c_minus.or(file.c_minus).unwrap_or(d.params.c_minus())),
        ..Default::default()
    };
    if g.dry_run {
        return dry_run(g, &resolved);
    }
    let (_, f) = objective(resolved.objective.clone())?;
    let m0 = resolved.m0.ok_or_else(|| usage("--m0 is required"))?;
    let params = EsParams::new(resolved.c_plus.unwrap(), resolved.c_minus.unwrap())?;
    let stopping = StoppingRule {
        max_iterations: resolved.max_iters.unwrap(),
        f_target: resolved.f_target,
        sigma_floor: a.sigma_floor,
        divergence_radius: a.divergence_radius,
        ..StoppingRule::default()
    };
    let trace = es_run(
        &params,
        &f,
        &m0,
        resolved.sigma0.unwrap(),
        &stopping,
        g.seed,
        a.stride,
    )?;
    let mut w = sink(g.out.as_deref())?;
    match g.format.unwrap_or(Format::Json) {
        Format::Json => write_value(&mut w, &serde_json::to_value(&trace)?, Format::Json)?,
        Format::Jsonl => trace.write_jsonl(&mut w)?,
        Format::Csv => trace.write_csv(&mut w)?,
    }
    w.flush()?;
    eprintln!(
        "{}: {} after {} iterations, f = {:e}, sigma = {:e}",
        trace.objective,
        trace.outcome.as_str(),
        trace.iterations,
        trace.final_f,
        trace.final_state.sigma()
    );
    Ok(ExitCode::SUCCESS)
}

fn require<T>(v: Option<T>, flag: &str, what: What) -> anyhow::Result<T> {
    v.ok_or_else(|| usage(format!("--{flag} is required for --what {:?}", what).to_lowercase()))
}

fn merge(result: Value, what: What, objective: String, inputs: Value) -> Value {
    let mut out = serde_json::Map::new();
    out.insert(
        "what".into(),
        json!(what.to_possible_value().unwrap().get_name()),
    );
    out.insert("objective".into(), json!(objective));
    out.insert("inputs".into(), inputs);
    if let Value::Object(fields) = result {
        out.extend(fields);
    }
    Value::Object(out)
}

fn cmd_estimate(a: EstimateArgs, file: CliConfig, g: &Globals) -> anyhow::Result<ExitCode> {
    let what = match (a.what, file.what.as_deref()) {
        (Some(w), _) => w,
        (None, Some(s)) => What::from_str(s, true).map_err(|_| {
            usage(format!(
                "unknown estimate `{s}`; valid: success, suboptimality, xi, eta, sigma-range, exponent"
            ))
        })?,
        (None, None) => return Err(usage("--what is required")),
    };
    let objective_text = a.objective.or(file.objective);
    let m = a.m.map(|v| v.0).or(file.m);
    let sigma = a.sigma.or(file.sigma);
    let n = a.n.or(file.n);
    if g.dry_run {
        let resolved = CliConfig {
            seed: Some(g.seed),
            format: g.format,
            objective: objective_text,
            what: Some(what.to_possible_value().unwrap().get_name().to_string()),
            m,
            sigma,
            n,
            ..Default::default()
        };
        return dry_run(g, &resolved);
    }
    let (_, f) = objective(objective_text)?;
    let m = require(m, "m", what)?;
    let seed = g.seed;
    let grid = || -> anyhow::Result<SigmaGrid> {
        let def = SigmaGrid::default_for(&m);
        Ok(SigmaGrid {
            lo: a.sigma_min.unwrap_or(def.lo),
            hi: a.sigma_max.unwrap_or(def.hi),
            points: a.points.unwrap_or(def.points),
        })
    };
    let mut inputs = json!({ "m": m, "seed": seed });
    let result = match what {
        What::Success => {
            let sigma = require(sigma, "sigma", what)?;
            let n = n.unwrap_or(100_000);
            inputs["sigma"] = json!(sigma);
            inputs["n"] = json!(n);
            inputs["mode"] = json!(SuccessMode::from(a.mode));
            serde_json::to_value(estimate_success_prob(
                &m,
                sigma,
                &f,
                n,
                a.mode.into(),
                seed,
            )?)?
        }
        What::Suboptimality => {
            let n = n.unwrap_or(1_000_000);
            inputs["n"] = json!(n);
            inputs["mode"] = json!(SuccessMode::from(a.mode));
            inputs["box"] = serde_json::to_value(f.bounding_box())?;
            let r = estimate_suboptimality(&m, &f, f.bounding_box(), n, a.mode.into(), seed)?;
            let mut v = serde_json::to_value(r)?;
            if let Some(exact) = f.analytic_suboptimality(&m) {
                v["analytic"] = json!(exact);
            }
            v
        }
        What::Xi | What::Eta => {
            let p = require(a.p, "p", what)?;
            let grid = grid()?;
            let n = n.unwrap_or(10_000);
            inputs["p"] = json!(p);
            inputs["n"] = json!(n);
            inputs["grid"] = serde_json::to_value(grid)?;
            let r = if what == What::Xi {
                estimate_xi(&m, p, &f, &grid, n, seed)?
            } else {
                estimate_eta(&m, p, &f, &grid, n, seed)?
            };
            serde_json::to_value(r)?
        }
        What::SigmaRange => {
            let p_t = require(a.p_t, "p-t", what)?;
            let p_h = require(a.p_h, "p-h", what)?;
            let grid = grid()?;
            let n = n.unwrap_or(10_000);
            inputs["n"] = json!(n);
            inputs["grid"] = serde_json::to_value(grid)?;
            serde_json::to_value(estimate_sigma_range(&m, p_t, p_h, &f, &grid, n, seed)?)?
        }
        What::Exponent => {
            let lo = a.sigma_min.unwrap_or(1e-6);
            let hi = a.sigma_max.unwrap_or(1e-2);
            let points = a.points.unwrap_or(9);
            let n = n.unwrap_or(100_000);
            inputs["sigma_min"] = json!(lo);
            inputs["sigma_max"] = json!(hi);
            inputs["points"] = json!(points);
            inputs["n"] = json!(n);
            serde_json::to_value(estimate_success_exponent(&m, &f, lo, hi, points, n, seed)?)?
        }
    };
    let value = merge(result, what, f.id(), inputs);
    let mut w = sink(g.out.as_deref())?;
    write_value(&mut w, &value, g.format.unwrap_or(Format::Json))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(a: VerifyArgs, file: CliConfig, g: &Globals) -> anyhow::Result<ExitCode> {
    let check = a
        .check
        .or(file.check)
        .ok_or_else(|| usage("--check is required (a check id or `all`)"))?;
    let objective_text = a.objective.or(file.objective);
    let params = if a.params.is_empty() {
        file.params
    } else {
        a.params
    };
    if g.dry_run {
        let resolved = CliConfig {
            seed: Some(g.seed),
            format: g.format,
            check: Some(check),
            objective: objective_text,
            params,
            ..Default::default()
        };
        return dry_run(g, &resolved);
    }
    let checks: Vec<CheckId> = if check == "all" {
        CheckId::ALL.to_vec()
    } else {
        vec![check.parse()?]
    };
    let spec = match objective_text {
        Some(t) => Some(objective(Some(t))?.0),
        None => None,
    };
    let overrides = CheckOverrides::from_pairs(&params)?;
    let mut reports = Vec::new();
    for (i, c) in checks.iter().enumerate() {
        // a single check uses the seed as given; `all` derives one per check
        let seed = if checks.len() == 1 {
            g.seed
        } else {
            rng::derive_seed(g.seed, i as u64)
        };
        reports.extend(run_check(*c, spec.as_ref(), &overrides, seed)?);
    }
    let summary = summary_csv(&reports);
    let format = g.format.unwrap_or(Format::Json);
    let mut w = sink(g.out.as_deref())?;
    if format == Format::Csv {
        w.write_all(summary.as_bytes())?;
        w.flush()?;
    } else {
        write_value(&mut w, &serde_json::to_value(&reports)?, format)?;
        match &g.out {
            Some(out) => std::fs::write(sibling(out, "summary.csv"), &summary)?,
            None => eprint!("{summary}"),
        }
    }
    let passed = reports.iter().filter(|r| r.pass).count();
    eprintln!("{passed}/{} reports pass", reports.len());
    Ok(if passed == reports.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_experiment(
    a: ExperimentArgs,
    path: Option<PathBuf>,
    seed: Option<u64>,
    g: &Globals,
) -> anyhow::Result<ExitCode> {
    let shipped = &Defaults::shipped().experiments;
    let mut cfg: ExperimentConfig = match (&a.name, &path) {
        (Some(name), None) => shipped.get(name).cloned().ok_or_else(|| {
            let valid: Vec<&str> = shipped.keys().map(String::as_str).collect();
            usage(format!(
                "unknown experiment `{name}`; valid names: {}",
                valid.join(", ")
            ))
        })?,
        (None, Some(p)) => {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", p.display())))?
        }
        _ => return Err(usage("pass exactly one of --name or --config")),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(r) = a.replicates {
        cfg.replicates = r;
    }
    if let Some(m) = a.max_iters {
        cfg.stopping.max_iterations = m;
    }
    cfg.validate()?;
    if g.dry_run {
        return dry_run(g, &cfg);
    }
    let report = run_experiment(&cfg)?;
    let format = g.format.unwrap_or(Format::Json);
    let mut w = sink(g.out.as_deref())?;
    match format {
        Format::Csv => report.write_replicates_csv(&mut w)?,
        f => write_value(&mut w, &serde_json::to_value(&report)?, f)?,
    }
    w.flush()?;
    if let Some(out) = &g.out {
        if format != Format::Csv {
            let p = sibling(out, "replicates.csv");
            report.write_replicates_csv(std::io::BufWriter::new(std::fs::File::create(&p)?))?;
        }
        let p = sibling(out, "long.csv");
        report.write_long_csv(std::io::BufWriter::new(std::fs::File::create(&p)?))?;
    }
    for p in &report.points {
        let counts: Vec<String> = p
            .aggregates
            .outcomes
            .iter()
            .map(|(k, v)| format!("{k} {}/{}", v.successes, v.trials))
            .collect();
        eprintln!("{}: {}", p.label, counts.join(", "));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_list(g: &Globals) -> anyhow::Result<ExitCode> {
    let entries = list_objectives();
    let mut w = sink(g.out.as_deref())?;
    match g.format {
        Some(f) => write_value(&mut w, &serde_json::to_value(&entries)?, f)?,
        None => {
            for e in &entries {
                let params: Vec<String> = e
                    .parameters
                    .iter()
                    .map(|p| format!("{}={} ({})", p.name, p.default, p.values))
                    .collect();
                let optimum = match &e.known_optimum {
                    Some(x) => format!("{x:?}"),
                    None => "-".into(),
                };
                writeln!(
                    w,
                    "{:<18} d={}  optimum {:<12} default {}\n  params: {}\n  hooks: {}",
                    e.id,
                    e.dimension,
                    optimum,
                    e.default_spec,
                    if params.is_empty() {
                        "none".to_string()
                    } else {
                        params.join(", ")
                    },
                    e.hooks.join(", ")
                )?;
            }
            w.flush()?;
        }
    }
    Ok(ExitCode::SUCCESS)
}
