#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use freebound::boundary::GcaBoundary;
use freebound::btm::DEFAULT_STEPS;
use freebound::config::RunConfig;
use freebound::dual_value::{DEFAULT_ORDER, DEFAULT_TOL};
use freebound::error::Error;
use freebound::fd::FdConfig;
use freebound::model::Problem;
use freebound::numerics::Integrator;
use freebound::primal::{PrimalSolver, SimulationConfig};
use freebound::report::{self, BoundaryOptions, Cell, CsvTable, Table2Config};
use freebound::utility::UtilitySpec;

/// Free-boundary approximation for optimal investment-stopping problems.
#[derive(Debug, Parser)]
#[command(name = "freebound", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write output files into this directory instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    #[arg(long, global = true, default_value_t = 101)]
    points: usize,
    #[arg(long, global = true, default_value_t = DEFAULT_STEPS)]
    btm_steps: usize,
    #[arg(long, global = true, default_value_t = DEFAULT_TOL)]
    quad_tol: f64,
    #[arg(long, global = true)]
    with_btm: bool,
    #[arg(long, global = true)]
    with_fd: bool,
    /// Wealth level.
    #[arg(long, global = true)]
    x: Option<f64>,
    /// Calendar time.
    #[arg(long, global = true, default_value_t = 0.0)]
    t: f64,
    #[arg(long, global = true, default_value_t = 2)]
    paths: usize,
    #[arg(long, global = true, default_value_t = 500)]
    steps: usize,
    #[arg(long, global = true, default_value_t = 10)]
    samples: usize,
    #[arg(long, global = true)]
    mu: Option<f64>,
    #[arg(long, global = true)]
    r: Option<f64>,
    #[arg(long, global = true)]
    sigma: Option<f64>,
    #[arg(long, global = true)]
    beta: Option<f64>,
    #[arg(long = "horizon", global = true)]
    horizon: Option<f64>,
    #[arg(long = "floor", global = true)]
    floor: Option<f64>,
    /// Replace the utility by the power family with this exponent.
    #[arg(long, global = true)]
    gamma: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Regime, coefficients, discount thresholds and boundary limits (JSON).
    Classify,
    /// Closed-form boundary on a time grid (CSV).
    Boundary,
    /// Value, strategy and dual root at (t, x) (JSON).
    Value,
    /// Closed form against the binomial tree at t = 0 (CSV).
    Compare,
    /// Randomised comparison over the sampling ranges (CSV).
    Table2,
    /// Optimal wealth paths (CSV).
    Simulate,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = std::env::var("FREEBOUND_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("freebound: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load(common: &Common) -> Result<RunConfig, Error> {
    let path = common
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    let m = &mut cfg.model;
    for (slot, flag) in [
        (&mut m.mu, common.mu),
        (&mut m.r, common.r),
        (&mut m.sigma, common.sigma),
        (&mut m.beta, common.beta),
        (&mut m.horizon, common.horizon),
        (&mut m.floor, common.floor),
    ] {
        if let Some(v) = flag {
            *slot = v;
        }
    }
    if let Some(gamma) = common.gamma {
        cfg.utility = UtilitySpec::Power { gamma };
    }
    cfg.model.validate()?;
    Ok(cfg)
}

fn emit(common: &Common, name: &str, table: &CsvTable) -> Result<(), Error> {
    match &common.out {
        Some(dir) => write_file(dir, name, table),
        None => {
            let stdout = std::io::stdout();
            table
                .write_to(stdout.lock())
                .map_err(|e| Error::Config(format!("stdout: {e}")))
        }
    }
}

fn write_file(dir: &Path, name: &str, table: &CsvTable) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Config(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    let file = std::fs::File::create(&path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    table
        .write_to(std::io::BufWriter::new(file))
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn print_json(value: &serde_json::Value) -> Result<(), Error> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{}", serde_json::to_string_pretty(value).expect("serialisable"))
        .map_err(|e| Error::Config(format!("stdout: {e}")))
}

fn quad(common: &Common) -> Result<Integrator, Error> {
    if !(common.quad_tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "quad-tol",
            value: common.quad_tol,
            reason: "must be positive",
        });
    }
    Ok(Integrator::adaptive(DEFAULT_ORDER, common.quad_tol))
}

fn run(cli: &Cli) -> Result<(), Error> {
    let common = &cli.common;
    let cfg = load(common)?;
    match cli.command {
        Command::Classify => classify(&cfg),
        Command::Boundary => {
            let problem = cfg.problem()?;
            problem.validate_assumption()?;
            let opts = BoundaryOptions {
                n_points: common.points,
                btm_steps: common.with_btm.then_some(common.btm_steps),
                fd: if common.with_fd {
                    Some(FdConfig::around(&problem)?)
                } else {
                    None
                },
            };
            let table = report::boundary_table(&problem, &cfg.utility, &opts)?;
            emit(common, "boundary.csv", &table)
        }
        Command::Value => {
            let problem = cfg.problem()?;
            let x = common.x.ok_or_else(|| Error::Config("--x is required".into()))?;
            let solver = PrimalSolver::with_integrator(&problem, quad(common)?)?;
            let sol = solver.primal_value(common.t, x)?;
            print_json(&json!({
                "t": sol.t,
                "x": sol.x,
                "V": sol.value,
                "pi": sol.strategy,
                "pi_fraction": sol.strategy_fraction,
                "y_star": sol.y_star,
                "stopped": sol.stopped,
                "x_boundary": solver.wealth_boundary(common.t)?,
            }))
        }
        Command::Compare => {
            let problem = cfg.problem()?;
            let x = common.x.unwrap_or(1.5);
            let c = report::compare(&problem, x, common.btm_steps, quad(common)?)?;
            let table = report::comparison_table(&c, &problem, &cfg.utility, common.btm_steps);
            emit(common, "compare.csv", &table)
        }
        Command::Table2 => {
            let mut t2 = Table2Config::new(common.seed);
            t2.n_samples = common.samples;
            t2.x = common.x.unwrap_or(1.5);
            t2.horizon = cfg.model.horizon;
            t2.floor = cfg.model.floor;
            t2.btm_steps = common.btm_steps;
            t2.quad = (DEFAULT_ORDER, quad(common)?.tol());
            let result = report::table2(&t2)?;
            emit(common, "table2.csv", &report::table2_summary(&result, &t2))?;
            if let Some(dir) = &common.out {
                write_file(dir, "table2_samples.csv", &report::table2_samples(&result, &t2))?;
            }
            Ok(())
        }
        Command::Simulate => simulate(common, &cfg),
    }
}

fn classify(cfg: &RunConfig) -> Result<(), Error> {
    let problem = cfg.problem()?;
    let regime = problem.classify_regime()?;
    let assumption = problem.validate_assumption();
    let boundary = assumption
        .as_ref()
        .ok()
        .map(|_| GcaBoundary::new(&problem))
        .transpose()?;
    let d = problem.derived();
    print_json(&json!({
        "utility": cfg.utility,
        "exponents": problem.utility().exponents(),
        "derived": {
            "theta": d.theta,
            "nu": d.nu,
            "rho": d.rho,
            "kappa": d.kappa,
            "lambda": d.lambda,
            "tau_max": d.tau_max,
        },
        "regime": regime,
        "assumption_holds": assumption.is_ok(),
        "boundary": boundary,
    }))
}

fn simulate(common: &Common, cfg: &RunConfig) -> Result<(), Error> {
    let problem: Problem = cfg.problem()?;
    let solver = PrimalSolver::with_integrator(&problem, quad(common)?)?;
    let x0 = common.x.unwrap_or(1.4);
    let sim = SimulationConfig {
        n_steps: common.steps,
        seed: common.seed,
        shocks: true,
    };
    let paths = solver.simulate_paths(x0, common.paths, sim)?;
    match &common.out {
        Some(dir) => {
            for p in &paths {
                let table = report::path_table(p, &problem, &cfg.utility, x0);
                write_file(dir, &format!("path_{:03}.csv", p.path), &table)?;
            }
            Ok(())
        }
        None => {
            let mut table = CsvTable::new(["path", "t", "X", "pi"])
                .with_meta("command", "simulate")
                .with_meta("seed", common.seed)
                .with_meta("x0", report::format_sig(x0));
            for p in &paths {
                for i in 0..p.times.len() {
                    table.push(vec![
                        Cell::Text(p.path.to_string()),
                        p.times[i].into(),
                        p.wealth[i].into(),
                        p.strategy[i].into(),
                    ]);
                }
                table
                    .footer
                    .push((format!("stop_time_{}", p.path), report::format_sig(p.stop_time)));
            }
            emit(common, "paths.csv", &table)
        }
    }
}
