//! Command-line front end for threshold planning, simulation and evaluation.
//!
//! Every subcommand reads a scenario document and prints `key=value` lines.
//! Exit codes: 0 success, 1 invalid input, 2 runtime failure, 64 bad usage.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use capflag::error::Error;
use capflag::io::{
    format_sig9, load_scenario, render_sweep_svg, selection_csv, selection_summary_json, validation_csv,
    write_atomic, write_sweep_csv, IoError, Scenario, SweepRow, SweepTable, ValidationRow,
};
use capflag::metrics::{auc_integral, candidate_auc, opauc, select_algorithm_with, AlgorithmCandidate};
use capflag::par::Execution;
use capflag::planner::{
    capacity_matching_threshold, critical_baseline, fluid_objective, gap_curve_with, regime,
    score_optimal_threshold_with_grid, two_point_threshold, BehavioralParams, SweepAxis, SweepBase, ThresholdPolicy,
};
use capflag::sim::{
    chernoff_demand_bound, exact_objective_expected, grid_oracle_with, simulate_thresholds_with, SimConfig,
    EXACT_BUDGET,
};

#[derive(Parser, Debug)]
#[command(name = "capflag", version, about = "Plan flagging thresholds under capacity limits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fluid thresholds, regime and objective for each policy.
    Threshold(CommonArgs),
    /// Policy gaps along the scenario's sweep axis; writes CSV and SVG.
    Sweep(CommonArgs),
    /// Monte Carlo estimate for each policy and allocation mix.
    Simulate(CommonArgs),
    /// AUC and OpAUC for the scenario's candidates; writes CSV and JSON.
    Opauc(CommonArgs),
    /// Fluid objective against the finite-population one at several sizes.
    Validate(CommonArgs),
    /// Simulated grid search for the best threshold.
    Oracle(CommonArgs),
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Scenario JSON document.
    #[arg(long)]
    scenario: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the number of Monte Carlo trials.
    #[arg(long)]
    trials: Option<usize>,
    /// Overrides the allocation mix; comma separated values in [0, 1].
    #[arg(long, value_delimiter = ',')]
    beta1: Option<Vec<f64>>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides the output prefix; artifacts are written to `PREFIX_<name>`.
    #[arg(long)]
    out: Option<String>,
}

/// Failure classified by exit code.
enum Failure {
    Validation(String),
    Runtime(String),
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Model(inner) => inner.into(),
            e if e.is_validation() => Failure::Validation(e.to_string()),
            e => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. } | Error::OverBudget { .. } | Error::Unsupported(_) => {
                Failure::Validation(e.to_string())
            }
            e => Failure::Runtime(e.to_string()),
        }
    }
}

type Run<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Run<()> {
    let (args, action): (&CommonArgs, fn(&Scenario) -> Run<()>) = match &cli.command {
        Command::Threshold(a) => (a, threshold),
        Command::Sweep(a) => (a, sweep),
        Command::Simulate(a) => (a, simulate),
        Command::Opauc(a) => (a, opauc_cmd),
        Command::Validate(a) => (a, validate),
        Command::Oracle(a) => (a, oracle),
    };
    let scenario = prepare(args)?;
    match args.workers {
        Some(0) => Err(Failure::Validation("invalid `--workers`: must be at least 1".into())),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Failure::Runtime(e.to_string()))?;
            pool.install(|| action(&scenario))
        }
        None => action(&scenario),
    }
}

/// Loads the scenario and applies command-line overrides.
fn prepare(args: &CommonArgs) -> Run<Scenario> {
    let mut s = load_scenario(&args.scenario)?;
    if let Some(seed) = args.seed {
        s.spec.seed = seed;
    }
    if let Some(trials) = args.trials {
        if trials == 0 {
            return Err(Failure::Validation("invalid `--trials`: must be at least 1".into()));
        }
        s.spec.trials = trials;
    }
    if let Some(beta1) = &args.beta1 {
        if beta1.is_empty() || beta1.iter().any(|b| !(0.0..=1.0).contains(b)) {
            return Err(Failure::Validation("invalid `--beta1`: values must lie in [0, 1]".into()));
        }
        s.spec.beta1 = beta1.clone();
    }
    if let Some(prefix) = &args.out {
        if prefix.is_empty() {
            return Err(Failure::Validation("invalid `--out`: must be nonempty".into()));
        }
        s.spec.output_prefix = prefix.clone();
    }
    Ok(s)
}

fn kv(key: &str, value: impl Display) -> String {
    format!("{key}={value}")
}

fn num(x: f64) -> String {
    format_sig9(x)
}

fn artifact(s: &Scenario, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{}_{suffix}", s.spec.output_prefix))
}

fn write_text(path: &Path, text: &str) -> Run<()> {
    write_atomic(path, text.as_bytes()).map_err(Failure::from)
}

fn header(s: &Scenario) {
    println!(
        "{} {} {} {} {}",
        kv("n", s.n()),
        kv("m", s.m()),
        kv("rho", num(s.rho())),
        kv("p0", num(s.params.p0)),
        kv("delta_p", num(s.params.delta_p))
    );
}

fn threshold(s: &Scenario) -> Run<()> {
    header(s);
    let rho = s.rho();
    let score = score_optimal_threshold_with_grid(&s.model, &s.params, s.spec.grid_size)?;
    let capacity = capacity_matching_threshold(rho, &s.params);
    println!(
        "{} {} {} {}",
        kv("tau_capacity", num(capacity)),
        kv("tau_score", num(score)),
        kv("tau_star", num(score.min(capacity))),
        kv("regime", regime(score, rho, &s.params).label())
    );
    if s.params.delta_p > 0.0 && s.params.delta_p < 1.0 {
        println!("{}", kv("critical_p0", num(critical_baseline(rho, &s.model, s.params.delta_p)?)));
    }
    let (n, m) = (s.n() as f64, s.m() as f64);
    for policy in &s.policies {
        let tau = resolve(policy, rho, s, &s.params)?;
        let w = fluid_objective(tau, &s.model, n, m, &s.params)?;
        println!("{} {} {}", kv("policy", policy.label()), kv("tau", num(tau)), kv("fluid_w", num(w)));
    }
    Ok(())
}

/// Resolves a policy, honouring the scenario's grid size for score-optimal search.
fn resolve(policy: &ThresholdPolicy, rho: f64, s: &Scenario, params: &BehavioralParams) -> Run<f64> {
    Ok(match policy {
        ThresholdPolicy::ScoreOptimal => score_optimal_threshold_with_grid(&s.model, params, s.spec.grid_size)?,
        ThresholdPolicy::TwoPointOptimal => {
            let score = score_optimal_threshold_with_grid(&s.model, params, s.spec.grid_size)?;
            score.min(capacity_matching_threshold(rho, params))
        }
        p => p.resolve(rho, &s.model, params)?,
    })
}

fn sweep(s: &Scenario) -> Run<()> {
    let Some((axis, grid)) = s.sweep() else {
        return Err(Failure::Validation("invalid `sweep`: scenario declares no sweep".into()));
    };
    let simulate = s.spec.sweep.as_ref().is_some_and(|w| w.simulate);
    let base = SweepBase {
        n: s.n() as f64,
        rho: s.rho(),
        params: s.params,
    };
    let beta1 = s.spec.beta1[0];
    let mut rows = Vec::new();
    for policy in &s.policies {
        let curve = gap_curve_with(*policy, axis, &grid, &s.model, &base, Execution::Parallel)?;
        for point in curve {
            let (mut sim_mean, mut sim_se) = (None, None);
            if simulate {
                let config = match axis {
                    SweepAxis::Rho => SimConfig {
                        m: (point.x * s.n() as f64).round() as usize,
                        ..s.sim_config(beta1)
                    },
                    SweepAxis::P0 => SimConfig {
                        params: BehavioralParams::new(point.x, s.params.delta_p)?,
                        ..s.sim_config(beta1)
                    },
                };
                let est = simulate_thresholds_with(&config, &s.model, &[point.tau_policy], Execution::Parallel)?[0];
                sim_mean = Some(est.mean);
                sim_se = Some(est.std_error);
            }
            rows.push(SweepRow {
                axis: point.x,
                policy: policy.label(),
                tau: point.tau_policy,
                fluid_w: point.objective_policy,
                sim_mean,
                sim_se,
                gap: point.gap,
                rel_gap: point.relative_gap,
            });
        }
    }
    let table = SweepTable::new(rows);
    let csv_path = artifact(s, "sweep.csv");
    let svg_path = artifact(s, "sweep.svg");
    write_sweep_csv(&table, &csv_path)?;
    let label = match axis {
        SweepAxis::Rho => "capacity ratio",
        SweepAxis::P0 => "baseline request rate",
    };
    render_sweep_svg(&table, label, &svg_path)?;
    header(s);
    for policy in table.policies() {
        let worst = table
            .rows()
            .iter()
            .filter(|r| r.policy == policy)
            .fold(0.0_f64, |acc, r| acc.max(r.rel_gap));
        println!("{} {}", kv("policy", policy), kv("max_rel_gap", num(worst)));
    }
    println!("{} {}", kv("rows", table.rows().len()), kv("csv", csv_path.display()));
    println!("{}", kv("svg", svg_path.display()));
    Ok(())
}

fn simulate(s: &Scenario) -> Run<()> {
    header(s);
    let rho = s.rho();
    let (n, m) = (s.n() as f64, s.m() as f64);
    for policy in &s.policies {
        let tau = resolve(policy, rho, s, &s.params)?;
        let fluid = fluid_objective(tau, &s.model, n, m, &s.params)?;
        for &beta1 in &s.spec.beta1 {
            let est = simulate_thresholds_with(&s.sim_config(beta1), &s.model, &[tau], Execution::Parallel)?[0];
            println!(
                "{} {} {} {} {} {} {} {}",
                kv("policy", policy.label()),
                kv("beta1", num(beta1)),
                kv("tau", num(tau)),
                kv("mean", num(est.mean)),
                kv("se", num(est.std_error)),
                kv("served", num(est.mean_served)),
                kv("utilization", num(est.utilization)),
                kv("fluid_w", num(fluid))
            );
        }
    }
    println!("{} {}", kv("trials", s.spec.trials), kv("seed", s.spec.seed));
    Ok(())
}

fn opauc_cmd(s: &Scenario) -> Run<()> {
    let Some(mu) = &s.mu else {
        return Err(Failure::Validation("invalid `mu`: scenario declares no capacity distribution".into()));
    };
    if s.candidates.len() < 2 {
        let (name, model) = match s.candidates.first() {
            Some(c) => (c.name.as_str(), &c.model),
            None => ("model", &s.model),
        };
        let auc = if model.is_labeled() { candidate_auc(model)? } else { auc_integral(model)? };
        let value = opauc(model, mu, &s.params)?;
        println!("{} {} {}", kv("candidate", name), kv("auc", num(auc)), kv("opauc", num(value)));
        return Ok(());
    }
    let candidates: Vec<AlgorithmCandidate> = s.candidates.clone();
    let report = select_algorithm_with(&candidates, mu, &s.params, Execution::Parallel)?;
    let csv_path = artifact(s, "selection.csv");
    let json_path = artifact(s, "selection.json");
    write_text(&csv_path, &selection_csv(&report))?;
    write_text(&json_path, &selection_summary_json(&report))?;
    let mut sorted: Vec<_> = report.candidates.iter().collect();
    sorted.sort_by(|a, b| a.name.cmp(&b.name));
    for c in sorted {
        println!("{} {} {}", kv("candidate", &c.name), kv("auc", num(c.auc)), kv("opauc", num(c.opauc)));
    }
    println!(
        "{} {}",
        kv("winner_by_auc", &report.winner_by_auc),
        kv("winner_by_opauc", &report.winner_by_opauc)
    );
    println!("{} {}", kv("csv", csv_path.display()), kv("json", json_path.display()));
    Ok(())
}

fn validate(s: &Scenario) -> Run<()> {
    header(s);
    let rho = s.rho();
    let tau = two_point_threshold(rho, &s.model, &s.params)?;
    let mut rows = Vec::new();
    for &n in &s.spec.validate_n {
        let m = (rho * n as f64).round() as usize;
        let fluid = fluid_objective(tau, &s.model, n as f64, m as f64, &s.params)?;
        let (finite, se, method) = if n <= EXACT_BUDGET {
            (exact_objective_expected(&s.model, tau, n, m, &s.params)?, None, "exact")
        } else {
            let config = SimConfig {
                n,
                m,
                ..s.sim_config(s.spec.beta1[0])
            };
            let est = simulate_thresholds_with(&config, &s.model, &[tau], Execution::Parallel)?[0];
            (est.mean, Some(est.std_error), "monte_carlo")
        };
        let rel_error = if fluid != 0.0 { (finite - fluid).abs() / fluid } else { (finite - fluid).abs() };
        println!(
            "{} {} {} {} {} {} {}",
            kv("n", n),
            kv("m", m),
            kv("tau", num(tau)),
            kv("fluid_w", num(fluid)),
            kv("finite_w", num(finite)),
            kv("method", method),
            kv("rel_error", num(rel_error))
        );
        println!("{}", kv("demand_bound", num(chernoff_demand_bound(tau, n, m, &s.params))));
        rows.push(ValidationRow {
            n,
            m,
            tau,
            fluid_w: fluid,
            finite_w: finite,
            finite_se: se,
            method: method.into(),
            rel_error,
        });
    }
    let path = artifact(s, "validation.csv");
    write_text(&path, &validation_csv(&rows))?;
    println!("{}", kv("csv", path.display()));
    Ok(())
}

fn oracle(s: &Scenario) -> Run<()> {
    header(s);
    let tau_two_point = two_point_threshold(s.rho(), &s.model, &s.params)?;
    for &beta1 in &s.spec.beta1 {
        let config = s.sim_config(beta1);
        let search = grid_oracle_with(&config, &s.model, s.spec.oracle_grid, Execution::Parallel)?;
        let planned = simulate_thresholds_with(&config, &s.model, &[tau_two_point], Execution::Parallel)?[0];
        let gap = (search.best.mean - planned.mean).max(0.0);
        let rel = if search.best.mean > 0.0 { gap / search.best.mean } else { 0.0 };
        println!(
            "{} {} {} {} {} {} {}",
            kv("beta1", num(beta1)),
            kv("tau_best", num(search.tau_best)),
            kv("best_mean", num(search.best.mean)),
            kv("tau_two_point", num(tau_two_point)),
            kv("two_point_mean", num(planned.mean)),
            kv("gap", num(gap)),
            kv("rel_gap", num(rel))
        );
    }
    Ok(())
}
