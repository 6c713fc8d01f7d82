//! The four subcommands.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use beliefagg::aggregation::{FeatureScheme, GridIndex, PsiMode};
use beliefagg::policy::{
    bound_report_on, exact_oracle, sample_beliefs, save_trace_csv, BoundReport, CostApprox,
    ExactOracle, LookaheadPolicy,
};
use beliefagg::pomdp::{
    rollout_cost_with, trace, Belief, BeliefEstimator, BeliefPolicy, ExactBayes, RolloutConfig,
};
use beliefagg::problems::{
    optimal_cost_product, product_marginals, ParticleEstimator, Preset, TreasureSpec,
    DEFAULT_PARTICLES,
};
use beliefagg::solver::{
    seeds_from_belief, solve as run_solver, AggregateValue, BiasFunction, Expansion, Mode,
    SolverConfig,
};
use serde::Serialize;

use crate::inputs::{load_bias, load_solution, output_path, Problem};
use crate::{
    ConfigError, DiagnoseArgs, EvaluateArgs, ExpansionArg, ExportArgs, Format, ModeArg, SolveArgs,
    SolverArgs, EXIT_BOUND_VIOLATED, EXIT_NOT_CONVERGED,
};

fn parse_psi(s: &str) -> Result<PsiMode> {
    s.parse().map_err(ConfigError::wrap)
}

fn mode(m: ModeArg) -> Mode {
    match m {
        ModeArg::Sync => Mode::Sync,
        ModeArg::Async => Mode::Async,
    }
}

/// Bias function from `--bias`, read over `--bias-features` (or `features`).
fn bias_from(
    problem: &Problem,
    path: Option<&Path>,
    bias_features: Option<&str>,
    features: Option<&str>,
) -> Result<Option<BiasFunction>> {
    match path {
        None => Ok(None),
        Some(p) => {
            let scheme = problem.scheme(bias_features.or(features))?;
            load_bias(p, scheme).map(Some)
        }
    }
}

/// Solver configuration shared by `solve` and `diagnose`; lazy seeds are
/// computed per resolution by [`seeds_for`].
fn solver_config(args: &SolverArgs, bias: Option<BiasFunction>) -> Result<SolverConfig> {
    if !(args.tolerance > 0.0) {
        bail!(ConfigError(format!(
            "tolerance must be positive, got {}",
            args.tolerance
        )));
    }
    Ok(SolverConfig {
        tolerance: args.tolerance,
        max_sweeps: args.max_sweeps,
        expansion: match args.expansion {
            ExpansionArg::Eager => Expansion::Eager,
            ExpansionArg::Lazy => Expansion::Lazy,
        },
        seeds: Vec::new(),
        bias,
        table_limit: args.table_limit,
    })
}

fn seeds_for(
    problem: &Problem,
    args: &SolverArgs,
    scheme: &FeatureScheme,
    rho: u32,
    psi: PsiMode,
) -> Result<Vec<GridIndex>> {
    if args.expansion == ExpansionArg::Eager {
        if !args.seed_belief.is_empty() {
            bail!(ConfigError("--seed-belief needs --expansion lazy".into()));
        }
        return Ok(Vec::new());
    }
    let sources: Vec<&str> = if args.seed_belief.is_empty() {
        vec!["initial"]
    } else {
        args.seed_belief.iter().map(String::as_str).collect()
    };
    let mut seeds = Vec::new();
    for s in sources {
        let b = problem.belief(s)?;
        seeds.extend(seeds_from_belief(scheme, rho, psi, &b).map_err(ConfigError::wrap)?);
    }
    seeds.sort();
    seeds.dedup();
    Ok(seeds)
}

fn check_rho(rho: u32) -> Result<()> {
    if rho == 0 {
        bail!(ConfigError("--rho must be at least 1".into()));
    }
    Ok(())
}

pub fn solve(args: &SolveArgs, out_dir: Option<&Path>) -> Result<u8> {
    check_rho(args.rho)?;
    let problem = Problem::load(&args.problem.problem)?;
    let scheme = problem.scheme(args.problem.features.as_deref())?;
    let psi = parse_psi(&args.solver.psi)?;
    let bias = bias_from(
        &problem,
        args.solver.bias.as_deref(),
        args.solver.bias_features.as_deref(),
        args.problem.features.as_deref(),
    )?;
    let mut config = solver_config(&args.solver, bias)?;
    config.seeds = seeds_for(&problem, &args.solver, &scheme, args.rho, psi)?;
    let path = output_path(args.output.as_deref(), out_dir, "solution.json")?;

    let start = Instant::now();
    let solution = run_solver(
        &problem.model,
        &scheme,
        args.rho,
        psi,
        mode(args.solver.mode),
        &config,
    )?;
    let wall = start.elapsed().as_secs_f64();
    solution
        .save(&path)
        .with_context(|| format!("writing solution file {}", path.display()))?;
    println!(
        "{}: rho {} psi {} mode {} table {} sweeps {} residual {:.3e} bellman residual {:.3e} wall time {:.3}s -> {}",
        if solution.converged { "converged" } else { "NOT CONVERGED" },
        args.rho,
        psi,
        solution.mode(),
        solution.len(),
        solution.iterations,
        solution.residual,
        solution.bellman_residual,
        wall,
        path.display()
    );
    Ok(if solution.converged {
        0
    } else {
        EXIT_NOT_CONVERGED
    })
}

enum PolicyChoice {
    Lookahead,
    Constant(usize),
}

fn parse_policy(problem: &Problem, s: &str) -> Result<PolicyChoice> {
    if s == "lookahead" {
        return Ok(PolicyChoice::Lookahead);
    }
    let Some(c) = s.strip_prefix("constant:") else {
        bail!(ConfigError(format!(
            "unknown policy '{s}' (expected lookahead or constant:C)"
        )));
    };
    let u = match problem.model.control_index(c) {
        Some(u) => u,
        None => c
            .parse::<usize>()
            .ok()
            .filter(|&u| u < problem.model.num_controls())
            .ok_or_else(|| ConfigError(format!("unknown control '{c}'")))?,
    };
    Ok(PolicyChoice::Constant(u))
}

fn parse_estimator(s: &str) -> Result<Box<dyn BeliefEstimator>> {
    match s {
        "exact" => Ok(Box::new(ExactBayes)),
        "particle" => Ok(Box::new(ParticleEstimator {
            count: DEFAULT_PARTICLES,
        })),
        _ => match s
            .strip_prefix("particle:")
            .and_then(|n| n.parse::<usize>().ok())
        {
            Some(count) if count > 0 => Ok(Box::new(ParticleEstimator { count })),
            _ => bail!(ConfigError(format!(
                "unknown estimator '{s}' (expected exact or particle[:COUNT])"
            ))),
        },
    }
}

#[derive(Debug, Serialize)]
struct EvaluationRow {
    problem: String,
    rho: Option<u32>,
    psi: Option<PsiMode>,
    policy: String,
    estimator: String,
    mean: f64,
    std_error: f64,
    trials: usize,
    horizon: usize,
    seed: u64,
    wall_time_s: f64,
    /// Lookups outside the solution's table, read as zero.
    approx_misses: u64,
}

pub fn evaluate(args: &EvaluateArgs, out_dir: Option<&Path>) -> Result<u8> {
    let problem = Problem::load(&args.problem.problem)?;
    let choice = parse_policy(&problem, &args.policy)?;
    let estimator = parse_estimator(&args.estimator)?;
    let b0 = problem.belief(&args.initial_belief)?;
    if args.horizon == 0 || args.trials == 0 {
        bail!(ConfigError(
            "--horizon and --trials must be at least 1".into()
        ));
    }
    let config = RolloutConfig {
        horizon: args.horizon,
        trials: args.trials,
        seed: args.seed,
    };

    let approx = match choice {
        PolicyChoice::Lookahead => {
            let Some(path) = &args.solution else {
                bail!(ConfigError("the lookahead policy needs --solution".into()));
            };
            let solution = load_solution(path)?;
            let bias = bias_from(
                &problem,
                args.bias.as_deref(),
                args.bias_features.as_deref(),
                args.problem.features.as_deref(),
            )?;
            if solution.bias_tag.is_some() && bias.is_none() {
                bail!(ConfigError(format!(
                    "{} was solved with a bias; pass the same --bias to evaluate it",
                    path.display()
                )));
            }
            let scheme = problem.scheme(args.problem.features.as_deref())?;
            Some(CostApprox::new(scheme, solution, bias).map_err(ConfigError::wrap)?)
        }
        PolicyChoice::Constant(_) => None,
    };
    let constant = |u: usize| move |_: &Belief| u;
    let policy: Box<dyn BeliefPolicy + '_> = match (&choice, &approx) {
        (PolicyChoice::Constant(u), _) => Box::new(constant(*u)),
        (PolicyChoice::Lookahead, Some(a)) => Box::new(LookaheadPolicy::new(&problem.model, a)),
        (PolicyChoice::Lookahead, None) => unreachable!("lookahead always loads a solution"),
    };

    let start = Instant::now();
    let report = rollout_cost_with(
        &problem.model,
        policy.as_ref(),
        estimator.as_ref(),
        &b0,
        config,
    )?;
    let wall = start.elapsed().as_secs_f64();
    if let Some(path) = &args.trace {
        let steps = trace(
            &problem.model,
            policy.as_ref(),
            &b0,
            args.horizon,
            args.seed,
        )?;
        save_trace_csv(&steps, path)
            .with_context(|| format!("writing trace {}", path.display()))?;
    }
    let misses = approx.as_ref().map_or(0, |a| a.misses());
    if misses > 0 {
        eprintln!(
            "warning: {misses} lookups fell outside the solution's table and were read as 0; \
             solve eagerly or seed the lazy solve with more beliefs"
        );
    }
    let row = EvaluationRow {
        problem: problem.name.clone(),
        rho: approx.as_ref().map(|a| a.solution().rho()),
        psi: approx.as_ref().map(|a| a.solution().psi_mode()),
        policy: args.policy.clone(),
        estimator: args.estimator.clone(),
        mean: report.mean,
        std_error: report.std_error,
        trials: report.trials,
        horizon: report.horizon,
        seed: args.seed,
        wall_time_s: wall,
        approx_misses: misses,
    };
    let text = match args.format {
        Format::Json => serde_json::to_string_pretty(&row)? + "\n",
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["problem", "rho", "psi", "mean", "stderr", "wall_time_s"])?;
            w.write_record([
                row.problem.clone(),
                row.rho.map(|r| r.to_string()).unwrap_or_default(),
                row.psi.map(|p| p.to_string()).unwrap_or_default(),
                row.mean.to_string(),
                row.std_error.to_string(),
                format!("{:.6}", row.wall_time_s),
            ])?;
            String::from_utf8(w.into_inner()?)?
        }
    };
    print!("{text}");
    std::io::stdout().flush()?;
    if args.output.is_some() || out_dir.is_some() {
        let name = match args.format {
            Format::Json => "evaluation.json",
            Format::Csv => "evaluation.csv",
        };
        let path = output_path(args.output.as_deref(), out_dir, name)?;
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(0)
}

/// Reference optimal cost for diagnostics.
enum Reference {
    /// Fine-grid solve of the flat scheme.
    Grid(ExactOracle),
    /// Closed form for product beliefs of a treasure preset, evaluated on a
    /// product grid of beliefs.
    Product {
        spec: TreasureSpec,
        beliefs: Vec<Belief>,
    },
}

impl Reference {
    fn build(problem: &Problem, args: &DiagnoseArgs) -> Result<Self> {
        let oracle = args.oracle.as_str();
        if oracle == "product" {
            let Some(Preset::Treasure(spec)) = &problem.preset else {
                bail!(ConfigError(
                    "the product oracle applies to treasure presets only".into()
                ));
            };
            let n = spec.sites();
            let steps = args.grid_steps.unwrap_or(if n == 1 { 200 } else { 10 });
            if steps == 0 {
                bail!(ConfigError("--grid-steps must be at least 1".into()));
            }
            let mut probs: Vec<Vec<f64>> = vec![Vec::new()];
            for _ in 0..n {
                probs = probs
                    .into_iter()
                    .flat_map(|v| {
                        (0..=steps).map(move |i| {
                            let mut w = v.clone();
                            w.push(i as f64 / steps as f64);
                            w
                        })
                    })
                    .collect();
            }
            let beliefs = probs
                .iter()
                .map(|p| spec.product_belief(p))
                .collect::<beliefagg::Result<Vec<_>>>()?;
            return Ok(Reference::Product {
                spec: spec.clone(),
                beliefs,
            });
        }
        let rho0 = match oracle.strip_prefix("grid") {
            Some("") => None,
            Some(r) => Some(
                r.strip_prefix(':')
                    .and_then(|r| r.parse::<u32>().ok())
                    .filter(|&r| r > 0)
                    .ok_or_else(|| {
                        ConfigError(format!(
                            "bad oracle '{oracle}' (expected grid, grid:RHO0 or product)"
                        ))
                    })?,
            ),
            None => bail!(ConfigError(format!(
                "unknown oracle '{oracle}' (expected grid, grid:RHO0 or product)"
            ))),
        };
        Ok(Reference::Grid(exact_oracle(&problem.model, rho0)?))
    }

    fn eval(&self, b: &Belief) -> f64 {
        match self {
            Reference::Grid(o) => o.eval(b),
            Reference::Product { spec, .. } => {
                let probs =
                    product_marginals(spec, b).expect("diagnostic beliefs are of product form");
                optimal_cost_product(spec, &probs).expect("valid marginals")
            }
        }
    }

    fn report(
        &self,
        problem: &Problem,
        approx: &CostApprox,
        args: &DiagnoseArgs,
    ) -> Result<(BoundReport, Vec<Belief>)> {
        let jstar = |b: &Belief| self.eval(b);
        match self {
            Reference::Grid(_) => {
                let beliefs = sample_beliefs(&problem.model, approx, args.samples, args.seed)?;
                let mut report = bound_report_on(
                    approx,
                    &jstar,
                    &beliefs,
                    problem.model.discount(),
                    args.slack,
                )?;
                report.seed = Some(args.seed);
                Ok((report, beliefs))
            }
            Reference::Product { beliefs, .. } => {
                let report = bound_report_on(
                    approx,
                    &jstar,
                    beliefs,
                    problem.model.discount(),
                    args.slack,
                )?;
                Ok((report, beliefs.clone()))
            }
        }
    }
}

#[derive(Debug, Serialize)]
struct DiagnosedRun {
    rho: u32,
    psi: PsiMode,
    table: usize,
    converged: bool,
    #[serde(flatten)]
    report: BoundReport,
}

pub fn diagnose(args: &DiagnoseArgs, out_dir: Option<&Path>) -> Result<u8> {
    for &rho in &args.rho {
        check_rho(rho)?;
    }
    if args.samples == 0 && !args.oracle.starts_with("product") {
        bail!(ConfigError("--samples must be at least 1".into()));
    }
    let problem = Problem::load(&args.problem.problem)?;
    let scheme = Arc::new(problem.scheme(args.problem.features.as_deref())?);
    let psi = parse_psi(&args.solver.psi)?;
    let bias = bias_from(
        &problem,
        args.solver.bias.as_deref(),
        args.solver.bias_features.as_deref(),
        args.problem.features.as_deref(),
    )?;
    let base = solver_config(&args.solver, bias.clone())?;
    let reference = Reference::build(&problem, args)?;

    let mut runs = Vec::new();
    let mut curve = Vec::new();
    for &rho in &args.rho {
        let config = SolverConfig {
            seeds: seeds_for(&problem, &args.solver, &scheme, rho, psi)?,
            ..base.clone()
        };
        let solution: AggregateValue = run_solver(
            &problem.model,
            &scheme,
            rho,
            psi,
            mode(args.solver.mode),
            &config,
        )?;
        if !solution.converged {
            eprintln!(
                "warning: rho {rho} did not converge within {} sweeps",
                args.solver.max_sweeps
            );
        }
        let (table, converged) = (solution.len(), solution.converged);
        let approx = CostApprox::new(scheme.clone(), solution, bias.clone())?;
        let (report, beliefs) = reference.report(&problem, &approx, args)?;
        if args.curve.is_some() {
            for (i, b) in beliefs.iter().enumerate() {
                curve.push((rho, i, approx.approx_cost(b), reference.eval(b)));
            }
        }
        eprintln!(
            "rho {rho}: sup error {:.4e} bound {:.4e} max over-estimate {:.3e} {}",
            report.sup_error,
            report.bound,
            report.max_violation_over,
            if report.violated() { "VIOLATED" } else { "ok" }
        );
        runs.push(DiagnosedRun {
            rho,
            psi,
            table,
            converged,
            report,
        });
    }

    if let Some(path) = &args.curve {
        let mut w = csv::Writer::from_path(path)
            .with_context(|| format!("writing curve {}", path.display()))?;
        w.write_record(["rho", "belief", "approx", "reference"])?;
        for (rho, i, a, r) in &curve {
            w.write_record([rho.to_string(), i.to_string(), a.to_string(), r.to_string()])?;
        }
        w.flush()?;
    }

    let default_name = match args.format {
        Format::Json => "bound_report.json",
        Format::Csv => "bound_report.csv",
    };
    let path = output_path(args.output.as_deref(), out_dir, default_name)?;
    let text = match args.format {
        Format::Json if runs.len() == 1 => serde_json::to_string_pretty(&runs[0])?,
        Format::Json => serde_json::to_string_pretty(&runs)?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record([
                "rho",
                "psi",
                "table",
                "sup_error",
                "bound",
                "epsilon_hat",
                "max_over",
                "max_under",
                "bound_holds",
                "lower_bound_holds",
            ])?;
            for r in &runs {
                w.write_record([
                    r.rho.to_string(),
                    r.psi.to_string(),
                    r.table.to_string(),
                    r.report.sup_error.to_string(),
                    r.report.bound.to_string(),
                    r.report.epsilon_hat.to_string(),
                    r.report.max_violation_over.to_string(),
                    r.report.max_violation_under.to_string(),
                    r.report.bound_holds.to_string(),
                    r.report
                        .lower_bound_holds
                        .map(|b| b.to_string())
                        .unwrap_or_default(),
                ])?;
            }
            String::from_utf8(w.into_inner()?)?
        }
    };
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(if runs.iter().any(|r| r.report.violated()) {
        EXIT_BOUND_VIOLATED
    } else {
        0
    })
}

pub fn export(args: &ExportArgs, out_dir: Option<&Path>) -> Result<u8> {
    let problem = Problem::load(&args.problem.problem)?;
    let path = output_path(args.output.as_deref(), out_dir, "problem.json")?;
    problem
        .model
        .save(&path)
        .with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    if let Some(spath) = &args.scheme_output {
        let scheme = problem.scheme(args.problem.features.as_deref())?;
        scheme
            .save(spath)
            .with_context(|| format!("writing {}", spath.display()))?;
        println!("wrote {}", spath.display());
    }
    Ok(0)
}
