//! Regularization paths and BIC-based selection of λ.

use std::io::Write;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::covariance::CovariancePair;
use crate::error::{Error, Result};
use crate::linalg::{count_nonzero, norm_frobenius, norm_linf};
use crate::solver::{DeltaEstimate, DtraceAdmm, SolverConfig, SolverState};

pub const DEFAULT_GRID_COUNT: usize = 50;
pub const DEFAULT_GRID_RATIO: f64 = 0.01;

/// Norm applied to the stationarity residual inside the BIC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BicNorm {
    Frobenius,
    MaxAbs,
}

impl BicNorm {
    pub fn as_str(&self) -> &'static str {
        match self {
            BicNorm::Frobenius => "frobenius",
            BicNorm::MaxAbs => "max",
        }
    }
}

impl FromStr for BicNorm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "frobenius" | "f" | "fro" => Ok(BicNorm::Frobenius),
            "max" | "inf" | "max-abs" | "linf" => Ok(BicNorm::MaxAbs),
            other => Err(format!("unknown BIC norm '{other}' (expected frobenius or max)")),
        }
    }
}

/// `‖Σ̂_X − Σ̂_Y‖_∞`. Zero solves the penalized problem iff λ is at least this.
pub fn lambda_max(pair: &CovariancePair) -> f64 {
    norm_linf(&pair.difference())
}

/// `count` log-spaced values from `lambda_max` down to `ratio · lambda_max`.
pub fn lambda_grid(pair: &CovariancePair, count: usize, ratio: f64) -> Result<Vec<f64>> {
    log_grid(lambda_max(pair), count, ratio)
}

pub(crate) fn log_grid(top: f64, count: usize, ratio: f64) -> Result<Vec<f64>> {
    if count < 2 {
        return Err(Error::precondition(format!("grid count must be at least 2, got {count}")));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::precondition(format!("grid ratio must lie in (0, 1), got {ratio}")));
    }
    if top == 0.0 {
        return Err(Error::Indistinguishable);
    }
    let (hi, lo) = (top.ln(), (top * ratio).ln());
    let step = (lo - hi) / (count - 1) as f64;
    let mut grid: Vec<f64> = (0..count).map(|k| (hi + step * k as f64).exp()).collect();
    grid[0] = top;
    grid[count - 1] = top * ratio;
    Ok(grid)
}

/// `(n_X + n_Y)·‖½(Σ̂_X Δ Σ̂_Y + Σ̂_Y Δ Σ̂_X) − Σ̂_X + Σ̂_Y‖ + log(n_X + n_Y)·|Δ|₀`
pub fn bic_score(delta: &DMatrix<f64>, pair: &CovariancePair, norm: BicNorm) -> Result<f64> {
    let (sx, sy) = (pair.sigma_x.as_matrix(), pair.sigma_y.as_matrix());
    if delta.shape() != sx.shape() {
        return Err(Error::shape("bic_score", sx.shape(), delta.shape()));
    }
    let n = (pair.n_x + pair.n_y) as f64;
    let residual = (sx * delta * sy + sy * delta * sx) * 0.5 - sx + sy;
    let fit = match norm {
        BicNorm::Frobenius => norm_frobenius(&residual),
        BicNorm::MaxAbs => norm_linf(&residual),
    };
    Ok(n * fit + n.ln() * count_nonzero(delta) as f64)
}

/// Solutions along a descending λ grid.
#[derive(Debug, Clone)]
pub struct RegPath {
    pub lambdas: Vec<f64>,
    pub estimates: Vec<DeltaEstimate>,
    pub bic_f: Vec<f64>,
    pub bic_inf: Vec<f64>,
    pub nnz: Vec<usize>,
}

impl RegPath {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn bic(&self, norm: BicNorm) -> &[f64] {
        match norm {
            BicNorm::Frobenius => &self.bic_f,
            BicNorm::MaxAbs => &self.bic_inf,
        }
    }

    pub fn all_converged(&self) -> bool {
        self.estimates.iter().all(|e| e.converged)
    }

    /// Columns `lambda,nnz,bic_f,bic_inf,converged,iterations`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "lambda,nnz,bic_f,bic_inf,converged,iterations")?;
        for i in 0..self.len() {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                self.lambdas[i],
                self.nnz[i],
                self.bic_f[i],
                self.bic_inf[i],
                self.estimates[i].converged,
                self.estimates[i].iterations
            )?;
        }
        Ok(())
    }
}

/// Solves along `lambdas` (strictly descending), warm-starting each solve
/// from the previous state.
pub fn solve_path(pair: &CovariancePair, lambdas: &[f64], cfg: &SolverConfig) -> Result<RegPath> {
    if lambdas.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::precondition("lambda grid must be strictly descending"));
    }
    let solver = DtraceAdmm::new(pair, *cfg)?;
    let mut warm: Option<SolverState> = None;
    let mut path = RegPath {
        lambdas: Vec::with_capacity(lambdas.len()),
        estimates: Vec::with_capacity(lambdas.len()),
        bic_f: Vec::with_capacity(lambdas.len()),
        bic_inf: Vec::with_capacity(lambdas.len()),
        nnz: Vec::with_capacity(lambdas.len()),
    };
    for &lam in lambdas {
        let (est, state) = solver
            .solve(lam, warm.as_ref())
            .map_err(|e| Error::PathSolve {
                lambda: lam,
                source: Box::new(e),
            })?;
        path.bic_f.push(bic_score(&est.delta, pair, BicNorm::Frobenius)?);
        path.bic_inf.push(bic_score(&est.delta, pair, BicNorm::MaxAbs)?);
        path.nnz.push(est.nnz());
        path.lambdas.push(lam);
        path.estimates.push(est);
        warm = Some(state);
    }
    Ok(path)
}

/// Index of the BIC minimizer; ties go to the larger λ (earlier index).
pub fn select_index(path: &RegPath, norm: BicNorm) -> Result<usize> {
    let scores = path.bic(norm);
    if scores.is_empty() {
        return Err(Error::precondition("cannot select from an empty path"));
    }
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if *s < scores[best] {
            best = i;
        }
    }
    Ok(best)
}

pub fn select_by_bic(path: &RegPath, norm: BicNorm) -> Result<(f64, &DeltaEstimate)> {
    let i = select_index(path, norm)?;
    Ok((path.lambdas[i], &path.estimates[i]))
}
