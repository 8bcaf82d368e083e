//! Command-line surface: `solve`, `simulate`, `counterexample`, `verify`.
//!
//! Exit codes: 0 success, 2 configuration/IO error, 3 assumption violation,
//! 4 solver non-convergence, 5 verification failure.

use crate::config::{ConfigError, RunConfig};
use crate::hjb::{self, Grid, HjbError, JumpFormula, ValueGrid};
use crate::model::ModelParams;
use crate::simulate::{self, SimError, Strategy};
use crate::verify::{self, PropertyReport, VerifyError};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Solve(HjbError),
    #[error(transparent)]
    Simulate(#[from] SimError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupted value/policy file {path}: {detail}")]
    CorruptGrid { path: String, detail: String },
    #[error("invalid --x0 list {0:?}: expected comma-separated positive numbers")]
    BadX0List(String),
    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("verification failed: {failed} of {total} checks did not pass")]
    VerificationFailed { failed: usize, total: usize },
}

impl From<HjbError> for CliError {
    fn from(e: HjbError) -> Self {
        CliError::Solve(e)
    }
}

impl From<VerifyError> for CliError {
    fn from(e: VerifyError) -> Self {
        match e {
            VerifyError::Solve(e) => CliError::Solve(e),
            VerifyError::Simulate(e) => CliError::Simulate(e),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Solve(HjbError::AssumptionViolated { .. }) => 3,
            CliError::NonConvergence { .. } => 4,
            CliError::VerificationFailed { .. } | CliError::CorruptGrid { .. } => 5,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "reindiv",
    about = "Optimal reinsurance/dividend control: HJB solver and exact Monte Carlo"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the variational inequality and write value_policy.csv.
    Solve(SolveArgs),
    /// Estimate the value of a strategy by Monte Carlo.
    Simulate(SimulateArgs),
    /// Collective-risk counter-example: analytic value vs Monte Carlo.
    Counterexample(CounterArgs),
    /// Run the verification suite and write verify_report.csv.
    Verify(VerifyArgs),
}

#[derive(Debug, Args, Clone)]
struct CommonArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the y-grid resolution from the config.
    #[arg(long)]
    grid_n: Option<usize>,
    /// Override the jump-target formula: derived | printed.
    #[arg(long)]
    jump_formula: Option<String>,
    /// Override the Monte Carlo seed from the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated initial reserves.
    #[arg(long, default_value = "1")]
    x0: String,
    /// Override the number of simulated paths.
    #[arg(long)]
    paths: Option<usize>,
    /// Use a constant retention instead of the solved feedback policy.
    #[arg(long, requires = "barrier")]
    retention: Option<f64>,
    /// Use a constant dividend barrier instead of the solved one.
    #[arg(long, requires = "retention")]
    barrier: Option<f64>,
}

#[derive(Debug, Args)]
struct CounterArgs {
    /// Discount rate.
    #[arg(long, default_value_t = 0.07)]
    r: f64,
    #[arg(long, default_value_t = 100_000)]
    paths: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated initial reserves for the Monte Carlo cross-check.
    #[arg(long, default_value = "1,5")]
    x0: String,
    /// Override the number of Monte Carlo paths per cross-check.
    #[arg(long)]
    paths: Option<usize>,
}

/// 17-significant-digit float formatting, stable across platforms.
fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let io_err = |source| CliError::Io { path: path.display().to_string(), source };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err)?;
    }
    let tmp = path.with_extension("csv.tmp");
    std::fs::write(&tmp, contents).map_err(io_err)?;
    std::fs::rename(&tmp, path).map_err(io_err)
}

/// Serialize a solved grid as `y,x,psi,u_star,dividend_flag`.
pub fn write_value_grid(path: &Path, vg: &ValueGrid) -> Result<(), CliError> {
    let mut out = String::from("y,x,psi,u_star,dividend_flag\n");
    for j in 0..vg.grid.n() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt(vg.grid.y(j)),
            fmt(vg.grid.x(j)),
            fmt(vg.psi[j]),
            fmt(vg.u_star[j]),
            u8::from(vg.dividend_flag[j]),
        ));
    }
    write_atomic(path, &out)
}

/// Parse a `value_policy.csv` back into a grid, validating layout and node
/// placement.
pub fn read_value_grid(path: &Path) -> Result<ValueGrid, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let corrupt = |detail: String| CliError::CorruptGrid {
        path: path.display().to_string(),
        detail,
    };
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header != "y,x,psi,u_star,dividend_flag" {
        return Err(corrupt(format!("unexpected header {header:?}")));
    }
    let rows: Vec<&str> = lines.filter(|l| !l.is_empty()).collect();
    let n = rows.len();
    let grid = Grid::new(n).map_err(|e| corrupt(e.to_string()))?;
    let mut psi = Vec::with_capacity(n);
    let mut u_star = Vec::with_capacity(n);
    let mut dividend_flag = Vec::with_capacity(n);
    for (j, row) in rows.iter().enumerate() {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 5 {
            return Err(corrupt(format!("row {j}: expected 5 fields, got {}", fields.len())));
        }
        let parse = |s: &str, what: &str| {
            s.parse::<f64>()
                .map_err(|_| corrupt(format!("row {j}: bad {what} {s:?}")))
        };
        let y = parse(fields[0], "y")?;
        if (y - grid.y(j)).abs() > 1e-12 {
            return Err(corrupt(format!("row {j}: node y = {y} off the uniform grid")));
        }
        let v = parse(fields[2], "psi")?;
        if !v.is_finite() {
            return Err(corrupt(format!("row {j}: non-finite psi")));
        }
        psi.push(v);
        u_star.push(parse(fields[3], "u_star")?);
        dividend_flag.push(match fields[4] {
            "0" => false,
            "1" => true,
            other => return Err(corrupt(format!("row {j}: bad dividend_flag {other:?}"))),
        });
    }
    Ok(ValueGrid { grid, psi, u_star, dividend_flag })
}

fn parse_x0_list(text: &str) -> Result<Vec<f64>, CliError> {
    let vals: Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    match vals {
        Ok(v) if !v.is_empty() && v.iter().all(|x| x.is_finite() && *x >= 0.0) => Ok(v),
        _ => Err(CliError::BadX0List(text.to_string())),
    }
}

struct Prepared {
    config: RunConfig,
    params: ModelParams,
    grid_cfg: hjb::GridConfig,
    solver_cfg: hjb::SolverConfig,
    formula: JumpFormula,
    seed: u64,
}

fn prepare(common: &CommonArgs) -> Result<Prepared, CliError> {
    let mut config = RunConfig::from_path(&common.config)?;
    if let Some(n) = common.grid_n {
        config.grid.n = n;
    }
    if let Some(f) = &common.jump_formula {
        config.solver.jump_formula = f.clone();
    }
    let params = config.model_params()?;
    let report = params.validate_assumptions();
    for msg in &report.messages {
        eprintln!("note: {msg}");
    }
    let grid_cfg = config.grid_config();
    let solver_cfg = config.solver_config()?;
    let formula = config.jump_formula()?;
    let seed = common.seed.unwrap_or(config.mc.seed);
    Ok(Prepared { config, params, grid_cfg, solver_cfg, formula, seed })
}

fn solve_to_dir(p: &Prepared, out: &Path) -> Result<ValueGrid, CliError> {
    let (vg, report) = hjb::solve(&p.params, p.grid_cfg, p.solver_cfg)?;
    write_value_grid(&out.join("value_policy.csv"), &vg)?;
    let policy = hjb::extract_policy(&vg);
    println!(
        "solve: n = {}, iterations = {}, residual = {:.3e}, barrier = {:.6}",
        vg.grid.n(),
        report.iterations,
        report.sup_residual,
        policy.barrier
    );
    if policy.no_dividend_warning {
        eprintln!("warning: no dividend region found on the grid; barrier reported as infinite");
    }
    if !report.converged {
        return Err(CliError::NonConvergence {
            iterations: report.iterations,
            residual: report.sup_residual,
        });
    }
    Ok(vg)
}

/// Load a previously solved grid from the output directory, solving afresh
/// when no file is present.
fn load_or_solve(p: &Prepared, out: &Path) -> Result<ValueGrid, CliError> {
    let path = out.join("value_policy.csv");
    if path.exists() {
        read_value_grid(&path)
    } else {
        solve_to_dir(p, out)
    }
}

fn cmd_solve(args: &SolveArgs) -> Result<(), CliError> {
    let p = prepare(&args.common)?;
    solve_to_dir(&p, &args.common.out)?;
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let p = prepare(&args.common)?;
    let x0s = parse_x0_list(&args.x0)?;
    let paths = args.paths.unwrap_or(p.config.mc.paths);
    let horizon = p.config.mc.t_max;

    let solved;
    let policy;
    let strategy = match (args.retention, args.barrier) {
        (Some(u), Some(b)) => Strategy::ConstantBarrier { retention: u, barrier: b },
        _ => {
            solved = load_or_solve(&p, &args.common.out)?;
            policy = hjb::extract_policy(&solved);
            Strategy::Feedback(&policy)
        }
    };

    let mut out = String::from("x0,mean,std_error,paths,seed\n");
    for &x0 in &x0s {
        let est = simulate::estimate_value(&p.params, &strategy, x0, paths, p.seed, horizon)?;
        println!(
            "simulate: x0 = {x0}, mean = {:.6}, std_error = {:.3e}, paths = {paths}",
            est.mean, est.std_error
        );
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt(x0),
            fmt(est.mean),
            fmt(est.std_error),
            est.paths,
            est.seed
        ));
    }
    write_atomic(&args.common.out.join("estimate_summary.csv"), &out)?;

    let dump = p.config.output.dump_paths;
    if dump > 0 {
        use rand_chacha::rand_core::SeedableRng;
        let mut out = String::from("path_id,time,event,reserve_after,amount\n");
        let horizon = horizon.unwrap_or_else(|| simulate::default_horizon(p.params.r));
        for k in 0..dump {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(p.seed);
            rng.set_stream(k as u64 + 1);
            let rec = simulate::simulate_path(&p.params, &strategy, x0s[0], horizon, &mut rng)?;
            for ev in &rec.events {
                out.push_str(&format!(
                    "{k},{},{},{},{}\n",
                    fmt(ev.time),
                    ev.kind.label(),
                    fmt(ev.reserve_after),
                    fmt(ev.amount)
                ));
            }
        }
        write_atomic(&args.common.out.join("paths.csv"), &out)?;
    }
    Ok(())
}

fn cmd_counterexample(args: &CounterArgs) -> Result<(), CliError> {
    let res = simulate::counterexample_collective(args.r, args.paths, args.seed);
    println!(
        "counterexample: analytic = {:.9}, mc = {:.9} +/- {:.3e}, survival = {:.6} (exp(-1) = {:.6})",
        res.analytic,
        res.estimate.mean,
        res.estimate.std_error,
        res.survival_prob,
        (-1.0f64).exp()
    );
    let mut out = String::from("analytic,mc_mean,mc_std_error,survival_prob,paths,seed\n");
    out.push_str(&format!(
        "{},{},{},{},{},{}\n",
        fmt(res.analytic),
        fmt(res.estimate.mean),
        fmt(res.estimate.std_error),
        fmt(res.survival_prob),
        res.estimate.paths,
        res.estimate.seed
    ));
    write_atomic(&args.out.join("counterexample.csv"), &out)
}

fn write_verify_report(path: &Path, reports: &[PropertyReport]) -> Result<(), CliError> {
    let mut out = String::from("check,passed,worst_violation,location\n");
    for rep in reports {
        out.push_str(&format!(
            "{},{},{},{}\n",
            rep.name,
            u8::from(rep.passed),
            fmt(rep.worst_violation),
            rep.location.replace(',', ";")
        ));
    }
    write_atomic(path, &out)
}

fn cmd_verify(args: &VerifyArgs) -> Result<(), CliError> {
    let p = prepare(&args.common)?;
    let x0s = parse_x0_list(&args.x0)?;
    let paths = args.paths.unwrap_or(p.config.mc.paths);
    let report_path = args.common.out.join("verify_report.csv");

    let vg = match load_or_solve(&p, &args.common.out) {
        Ok(vg) => vg,
        Err(e @ CliError::CorruptGrid { .. }) => {
            // A grid that cannot be parsed is itself a failed check.
            let rep = PropertyReport {
                name: "grid_file_readable".into(),
                passed: false,
                worst_violation: 1.0,
                location: args.common.out.join("value_policy.csv").display().to_string(),
                details: e.to_string(),
            };
            eprintln!("FAIL grid_file_readable: {e}");
            write_verify_report(&report_path, &[rep])?;
            return Err(CliError::VerificationFailed { failed: 1, total: 1 });
        }
        Err(e) => return Err(e),
    };

    let reports = verify::run_all(
        &p.params,
        &vg,
        p.grid_cfg.control_points,
        p.formula,
        &x0s,
        paths,
        p.seed,
    )?;
    for rep in &reports {
        println!(
            "{} {}: worst = {:.3e} at {}",
            if rep.passed { "PASS" } else { "FAIL" },
            rep.name,
            rep.worst_violation,
            rep.location
        );
    }
    write_verify_report(&report_path, &reports)?;
    let failed = reports.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(CliError::VerificationFailed { failed, total: reports.len() });
    }
    Ok(())
}

/// Binary entry point; maps errors to the documented exit codes.
pub fn run() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Counterexample(args) => cmd_counterexample(args),
        Command::Verify(args) => cmd_verify(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hjb::Grid;

    fn sample_grid() -> ValueGrid {
        let grid = Grid::new(5).unwrap();
        ValueGrid {
            grid,
            psi: (0..5).map(|j| grid.x(j)).collect(),
            u_star: vec![1.0; 5],
            dividend_flag: vec![false, true, true, true, true],
        }
    }

    #[test]
    fn value_grid_round_trips_through_csv() {
        let dir = std::env::temp_dir().join("reindiv-cli-roundtrip");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("value_policy.csv");
        let vg = sample_grid();
        write_value_grid(&path, &vg).unwrap();
        let back = read_value_grid(&path).unwrap();
        assert_eq!(back.grid.n(), 5);
        assert_eq!(back.psi, vg.psi);
        assert_eq!(back.u_star, vg.u_star);
        assert_eq!(back.dividend_flag, vg.dividend_flag);
    }

    #[test]
    fn corrupted_csv_is_rejected() {
        let dir = std::env::temp_dir().join("reindiv-cli-corrupt");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("value_policy.csv");
        std::fs::write(&path, "y,x,psi,u_star,dividend_flag\n0,0,zero,1,0\n").unwrap();
        assert!(matches!(read_value_grid(&path), Err(CliError::CorruptGrid { .. })));
        std::fs::write(&path, "wrong,header\n").unwrap();
        assert!(matches!(read_value_grid(&path), Err(CliError::CorruptGrid { .. })));
    }

    #[test]
    fn x0_list_parsing() {
        assert_eq!(parse_x0_list("1,5,9").unwrap(), vec![1.0, 5.0, 9.0]);
        assert_eq!(parse_x0_list(" 2.5 ").unwrap(), vec![2.5]);
        assert!(parse_x0_list("1,,3").is_err());
        assert!(parse_x0_list("-1").is_err());
        assert!(parse_x0_list("abc").is_err());
    }

    #[test]
    fn exit_codes_match_error_classes() {
        assert_eq!(
            CliError::Solve(HjbError::AssumptionViolated { r: 0.07, threshold: 0.088 }).exit_code(),
            3
        );
        assert_eq!(CliError::NonConvergence { iterations: 500, residual: 1.0 }.exit_code(), 4);
        assert_eq!(CliError::VerificationFailed { failed: 1, total: 9 }.exit_code(), 5);
        assert_eq!(CliError::BadX0List("x".into()).exit_code(), 2);
    }

    #[test]
    fn float_format_is_17_significant_digits() {
        assert_eq!(fmt(1.0), "1.0000000000000000e0");
        assert_eq!(fmt(0.033), "3.3000000000000002e-2");
    }
}
