//! Command-line front end.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::benchmark::{average_curves, mean_sd, run_replicate_with_truth, BenchmarkConfig, ReplicateResult};
use crate::covariance::{build_pair_with, Group, Normalization};
use crate::error::{Error, Result};
use crate::evaluation::{irrepresentability_alpha, support_metrics, write_curve_points, write_metrics_csv, MAX_DIAGNOSTIC_DIM};
use crate::io;
use crate::linalg::spd_inverse;
use crate::model_selection::{bic_score, lambda_grid, select_index, solve_path, BicNorm, DEFAULT_GRID_COUNT, DEFAULT_GRID_RATIO};
use crate::simulation::{Scenario, SimulationSpec};
use crate::solver::{admm_solve, SolverConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
/// Outputs were written but at least one solve hit `max_iter`.
pub const EXIT_NOT_CONVERGED: i32 = 3;

pub const THREADS_ENV: &str = "DIFFTRACE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "difftrace", version, about = "Differential network estimation with the lasso-penalized D-trace loss")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate Δ from two observation files at a fixed λ or by BIC.
    Estimate(EstimateArgs),
    /// Solve a λ path and write its BIC scores.
    Path(PathArgs),
    /// Run replicated simulation benchmarks.
    Simulate(SimulateArgs),
    /// Score an estimate against a ground-truth matrix.
    Evaluate(EvaluateArgs),
    /// Irrepresentability diagnostic for two precision matrices and a support.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 50.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    #[arg(long = "max-iter", default_value_t = 5000)]
    pub max_iter: usize,
    /// Return Δ₃ without symmetrizing.
    #[arg(long = "no-symmetrize")]
    pub no_symmetrize: bool,
}

impl SolverArgs {
    fn config(&self) -> Result<SolverConfig> {
        let cfg = SolverConfig {
            rho: self.rho,
            tol: self.tol,
            max_iter: self.max_iter,
            symmetrize_output: !self.no_symmetrize,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long = "grid-count", default_value_t = DEFAULT_GRID_COUNT)]
    pub grid_count: usize,
    #[arg(long = "grid-ratio", default_value_t = DEFAULT_GRID_RATIO)]
    pub grid_ratio: f64,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Observations of group X (rows = samples).
    #[arg(long)]
    pub x: PathBuf,
    /// Observations of group Y.
    #[arg(long)]
    pub y: PathBuf,
    /// Use the 1/(n-1) covariance normalization instead of 1/n.
    #[arg(long)]
    pub unbiased: bool,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, conflicts_with = "bic", required_unless_present = "bic")]
    pub lambda: Option<f64>,
    /// Select λ by BIC with the given residual norm (frobenius or max).
    #[arg(long)]
    pub bic: Option<BicNorm>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PathArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// sim1, sim2 or sim3.
    #[arg(long)]
    pub scenario: Scenario,
    #[arg(long)]
    pub p: usize,
    /// Sample size of each group.
    #[arg(long)]
    pub n: usize,
    /// Sample size of group Y when it differs from --n.
    #[arg(long = "n-y")]
    pub n_y: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Ridge of the naive inverse-difference baseline.
    #[arg(long, default_value_t = 1e-3)]
    pub ridge: f64,
    /// Also write replicate 0's samples and ground truth under OUT/data.
    #[arg(long = "export-data")]
    pub export_data: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Estimated Δ (dense CSV).
    #[arg(long)]
    pub estimate: PathBuf,
    /// True Δ (dense CSV).
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// Precision matrix of group X (dense CSV).
    #[arg(long)]
    pub x: PathBuf,
    /// Precision matrix of group Y (dense CSV).
    #[arg(long)]
    pub y: PathBuf,
    /// Support file: `i,j[,value]` rows, 1-based.
    #[arg(long)]
    pub support: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// Outcome of a command that completed without error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    NotConverged,
}

pub fn exit_code(result: &Result<Outcome>) -> i32 {
    match result {
        Ok(Outcome::Done) => EXIT_OK,
        Ok(Outcome::NotConverged) => EXIT_NOT_CONVERGED,
        Err(e) if e.is_input_error() => EXIT_INPUT,
        Err(_) => EXIT_FAILURE,
    }
}

pub fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Estimate(a) => cmd_estimate(&a),
        Command::Path(a) => cmd_path(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Diagnose(a) => cmd_diagnose(&a),
    }
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn load_pair(data: &DataArgs) -> Result<crate::covariance::CovariancePair> {
    let x = io::read_observations(&data.x, Group::X)?;
    let y = io::read_observations(&data.y, Group::Y)?;
    let norm = if data.unbiased {
        Normalization::Unbiased
    } else {
        Normalization::MaximumLikelihood
    };
    build_pair_with(&x, &y, norm)
}

/// Machine-readable record of one estimate.
#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub lambda: f64,
    pub selection: String,
    pub rho: f64,
    pub tol: f64,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    pub bic_f: f64,
    pub bic_inf: f64,
    pub nnz: usize,
    pub wallclock_ms: u128,
}

pub fn cmd_estimate(a: &EstimateArgs) -> Result<Outcome> {
    let started = Instant::now();
    let cfg = a.solver.config()?;
    let pair = load_pair(&a.data)?;
    prepare_out(&a.out)?;

    let (estimate, selection) = match (a.lambda, a.bic) {
        (Some(lam), _) => (admm_solve(&pair, lam, &cfg, None)?.0, "fixed".to_string()),
        (None, Some(norm)) => {
            let grid = lambda_grid(&pair, a.grid.grid_count, a.grid.grid_ratio)?;
            let path = solve_path(&pair, &grid, &cfg)?;
            let mut buf = Vec::new();
            path.write_csv(&mut buf)?;
            fs::write(a.out.join("path.csv"), buf)?;
            let i = select_index(&path, norm)?;
            (path.estimates[i].clone(), format!("bic-{}", norm.as_str()))
        }
        (None, None) => return Err(Error::precondition("either --lambda or --bic is required")),
    };

    io::write_matrix_file(&a.out.join("delta.csv"), &estimate.delta)?;
    io::write_support_file(&a.out.join("support.csv"), &estimate.delta)?;
    let record = RunRecord {
        lambda: estimate.lambda,
        selection,
        rho: cfg.rho,
        tol: cfg.tol,
        iterations: estimate.iterations,
        converged: estimate.converged,
        objective: estimate.objective,
        bic_f: bic_score(&estimate.delta, &pair, BicNorm::Frobenius)?,
        bic_inf: bic_score(&estimate.delta, &pair, BicNorm::MaxAbs)?,
        nnz: estimate.nnz(),
        wallclock_ms: started.elapsed().as_millis(),
    };
    fs::write(a.out.join("run.json"), serde_json::to_string_pretty(&record)? + "\n")?;
    println!(
        "lambda={} nnz={} iterations={} converged={}",
        record.lambda, record.nnz, record.iterations, record.converged
    );
    Ok(if record.converged {
        Outcome::Done
    } else {
        Outcome::NotConverged
    })
}

pub fn cmd_path(a: &PathArgs) -> Result<Outcome> {
    let cfg = a.solver.config()?;
    let pair = load_pair(&a.data)?;
    prepare_out(&a.out)?;
    let grid = lambda_grid(&pair, a.grid.grid_count, a.grid.grid_ratio)?;
    let path = solve_path(&pair, &grid, &cfg)?;
    let mut buf = Vec::new();
    path.write_csv(&mut buf)?;
    fs::write(a.out.join("path.csv"), buf)?;
    for norm in [BicNorm::Frobenius, BicNorm::MaxAbs] {
        let i = select_index(&path, norm)?;
        println!("bic-{}: lambda={} nnz={}", norm.as_str(), path.lambdas[i], path.nnz[i]);
    }
    Ok(if path.all_converged() {
        Outcome::Done
    } else {
        Outcome::NotConverged
    })
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::precondition(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
        builder = builder.num_threads(n.max(1));
    }
    builder
        .build()
        .map_err(|e| Error::precondition(format!("cannot start worker threads: {e}")))
}

/// `mean(sd)` in percent, or just the mean for a single replicate.
fn table_cell(mean: f64, sd: Option<f64>) -> String {
    match sd {
        Some(sd) => format!("{:.1}({:.1})", 100.0 * mean, 100.0 * sd),
        None => format!("{:.1}", 100.0 * mean),
    }
}

fn summary_csv(results: &[ReplicateResult]) -> String {
    let mut s = String::from("metric,mean,sd,table\n");
    let mut row = |name: &str, values: Vec<f64>| {
        let (mean, sd) = mean_sd(&values);
        let sd_field = sd.map(|v| v.to_string()).unwrap_or_default();
        s.push_str(&format!("{name},{mean},{sd_field},{}\n", table_cell(mean, sd)));
    };
    for (suffix, norm) in [("f", BicNorm::Frobenius), ("inf", BicNorm::MaxAbs)] {
        row(&format!("tp_{suffix}"), results.iter().map(|r| r.selection(norm).metrics.tp_rate).collect());
        row(&format!("td_{suffix}"), results.iter().map(|r| r.selection(norm).metrics.td_rate).collect());
        row(&format!("tn_{suffix}"), results.iter().map(|r| r.selection(norm).metrics.tn_rate).collect());
    }
    row("auc_dtl", results.iter().map(|r| r.curve.auc).collect());
    row("auc_naive", results.iter().map(|r| r.naive.auc).collect());
    s
}

fn replicates_csv(results: &[ReplicateResult]) -> String {
    let mut s = String::from(
        "replicate,seed,lambda_f,tp_f,tn_f,td_f,nnz_f,lambda_inf,tp_inf,tn_inf,td_inf,nnz_inf,auc_dtl,auc_naive,converged\n",
    );
    for (k, r) in results.iter().enumerate() {
        let (f, m) = (&r.frobenius, &r.max_abs);
        s.push_str(&format!(
            "{k},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.seed,
            f.lambda,
            f.metrics.tp_rate,
            f.metrics.tn_rate,
            f.metrics.td_rate,
            f.metrics.nnz_est,
            m.lambda,
            m.metrics.tp_rate,
            m.metrics.tn_rate,
            m.metrics.td_rate,
            m.metrics.nnz_est,
            r.curve.auc,
            r.naive.auc,
            r.converged
        ));
    }
    s
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<Outcome> {
    if a.reps == 0 {
        return Err(Error::precondition("--reps must be at least 1"));
    }
    let cfg = BenchmarkConfig {
        solver: a.solver.config()?,
        grid_count: a.grid.grid_count,
        grid_ratio: a.grid.grid_ratio,
        ridge: a.ridge,
    };
    let spec_for = |r: usize| SimulationSpec {
        scenario: a.scenario,
        p: a.p,
        n_x: a.n,
        n_y: a.n_y.unwrap_or(a.n),
        seed: a.seed.wrapping_add(r as u64),
    };
    spec_for(0).validate()?;
    prepare_out(&a.out)?;

    let pool = thread_pool()?;
    let results: Vec<ReplicateResult> = pool.install(|| {
        (0..a.reps)
            .into_par_iter()
            .map(|r| {
                let spec = spec_for(r);
                let truth = spec.ground_truth()?;
                run_replicate_with_truth(&spec, &truth, &cfg)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    fs::write(a.out.join("replicates.csv"), replicates_csv(&results))?;
    fs::write(a.out.join("summary.csv"), summary_csv(&results))?;
    let mut buf = Vec::new();
    write_curve_points(&average_curves(results.iter().map(|r| &r.curve)), &mut buf)?;
    fs::write(a.out.join("curve_dtl.csv"), buf)?;
    let mut buf = Vec::new();
    write_curve_points(&average_curves(results.iter().map(|r| &r.naive)), &mut buf)?;
    fs::write(a.out.join("curve_naive.csv"), buf)?;

    if a.export_data {
        let spec = spec_for(0);
        let truth = spec.ground_truth()?;
        let (x, y) = spec.sample(&truth)?;
        let dir = a.out.join("data");
        prepare_out(&dir)?;
        io::write_matrix_file(&dir.join("x.csv"), x.values())?;
        io::write_matrix_file(&dir.join("y.csv"), y.values())?;
        io::write_matrix_file(&dir.join("omega_x.csv"), &truth.omega_x)?;
        io::write_matrix_file(&dir.join("omega_y.csv"), &truth.omega_y)?;
        io::write_matrix_file(&dir.join("delta_star.csv"), &truth.delta_star)?;
        io::write_support_file(&dir.join("truth_support.csv"), &truth.delta_star)?;
    }

    print!("{}", summary_csv(&results));
    Ok(if results.iter().all(|r| r.converged) {
        Outcome::Done
    } else {
        Outcome::NotConverged
    })
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<Outcome> {
    let est = io::read_matrix(&a.estimate)?;
    let truth = io::read_matrix(&a.truth)?;
    let m = support_metrics(&est, &truth)?;
    prepare_out(&a.out)?;
    let mut buf = Vec::new();
    write_metrics_csv(&m, &mut buf)?;
    fs::write(a.out.join("metrics.csv"), &buf)?;
    print!("{}", String::from_utf8_lossy(&buf));
    Ok(Outcome::Done)
}

#[derive(Debug, Serialize)]
struct DiagnoseRecord {
    alpha: f64,
    kappa: f64,
    holds: bool,
}

pub fn cmd_diagnose(a: &DiagnoseArgs) -> Result<Outcome> {
    let omega_x = io::read_sym_matrix(&a.x)?;
    let omega_y = io::read_sym_matrix(&a.y)?;
    if omega_x.dim() != omega_y.dim() {
        return Err(Error::shape("diagnose", omega_x.shape(), omega_y.shape()));
    }
    let p = omega_x.dim();
    if p > MAX_DIAGNOSTIC_DIM {
        return Err(Error::TooLarge {
            p,
            max: MAX_DIAGNOSTIC_DIM,
            reason: "the diagnostic builds a p^2 x p^2 matrix (O(p^4) memory and time)",
        });
    }
    let support: Vec<(usize, usize)> = io::read_support(&a.support)?
        .into_iter()
        .map(|e| (e.row, e.col))
        .collect();
    let sigma_x = spd_inverse(&omega_x, "precision X")?;
    let sigma_y = spd_inverse(&omega_y, "precision Y")?;
    let r = irrepresentability_alpha(&sigma_x, &sigma_y, &support)?;
    let record = DiagnoseRecord {
        alpha: r.alpha,
        kappa: r.kappa,
        holds: r.holds(),
    };
    prepare_out(&a.out)?;
    fs::write(a.out.join("diagnose.json"), serde_json::to_string_pretty(&record)? + "\n")?;
    println!(
        "alpha={} kappa={} {}",
        record.alpha,
        record.kappa,
        if record.holds {
            "condition holds"
        } else {
            "condition fails"
        }
    );
    Ok(Outcome::Done)
}
