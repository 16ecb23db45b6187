//! The D-trace loss, its gradient, and the three-block ADMM that minimizes
//! `L_D(Δ, Σ̂_X, Σ̂_Y) + λ‖Δ‖₁`.
//!
//! The loss is
//!
//! ```text
//! L_D(Δ) = ¼(⟨Σ_X Δ, Δ Σ_Y⟩ + ⟨Σ_Y Δ, Δ Σ_X⟩) − ⟨Δ, Σ_X − Σ_Y⟩
//! ```
//!
//! and is minimized without a penalty at `Δ = Σ_Y⁻¹ − Σ_X⁻¹`. The solver
//! splits it into two quadratic halves on copies `Δ₁`, `Δ₂` and puts the
//! penalty on a third copy `Δ₃`; each quadratic block is a closed-form
//! `A X B + γ X = C` solve and the penalty block is a soft-threshold.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::covariance::CovariancePair;
use crate::error::{Error, Result};
use crate::linalg::{
    inner, norm_frobenius, norm_l1, norm_linf, psd_eig, shrink, SylvesterKernel,
};

/// Iterate norm beyond which the run is declared divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Augmented-Lagrangian weight.
    pub rho: f64,
    /// Relative change tolerance of the stopping rule.
    pub tol: f64,
    pub max_iter: usize,
    /// Return `(Δ₃ + Δ₃ᵀ)/2` instead of `Δ₃`.
    pub symmetrize_output: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rho: 50.0,
            tol: 1e-3,
            max_iter: 5000,
            symmetrize_output: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::precondition(format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::precondition(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::precondition("max_iter must be at least 1"));
        }
        Ok(())
    }
}

/// Primal blocks `Δ₁, Δ₂, Δ₃` and multipliers `Λ₁, Λ₂, Λ₃`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub delta1: DMatrix<f64>,
    pub delta2: DMatrix<f64>,
    pub delta3: DMatrix<f64>,
    pub lambda1: DMatrix<f64>,
    pub lambda2: DMatrix<f64>,
    pub lambda3: DMatrix<f64>,
    pub iter: usize,
}

impl SolverState {
    fn dim(&self) -> usize {
        self.delta1.nrows()
    }

    fn max_norm(&self) -> f64 {
        [
            &self.delta1,
            &self.delta2,
            &self.delta3,
            &self.lambda1,
            &self.lambda2,
            &self.lambda3,
        ]
        .iter()
        .map(|m| {
            let n = norm_frobenius(m);
            if n.is_nan() {
                f64::INFINITY
            } else {
                n
            }
        })
        .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaEstimate {
    /// Final `Δ₃`, symmetrized when configured.
    pub delta: DMatrix<f64>,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `L_D(Δ̂) + λ‖Δ̂‖₁`
    pub objective: f64,
}

impl DeltaEstimate {
    pub fn nnz(&self) -> usize {
        crate::linalg::count_nonzero(&self.delta)
    }
}

fn check_dims(delta: &DMatrix<f64>, sigma_x: &DMatrix<f64>, sigma_y: &DMatrix<f64>) -> Result<()> {
    if sigma_x.shape() != sigma_y.shape() || !sigma_x.is_square() {
        return Err(Error::shape("D-trace loss", sigma_x.shape(), sigma_y.shape()));
    }
    if delta.shape() != sigma_x.shape() {
        return Err(Error::shape("D-trace loss", sigma_x.shape(), delta.shape()));
    }
    Ok(())
}

pub fn dtrace_loss(delta: &DMatrix<f64>, sigma_x: &DMatrix<f64>, sigma_y: &DMatrix<f64>) -> Result<f64> {
    check_dims(delta, sigma_x, sigma_y)?;
    let sxd = sigma_x * delta;
    let syd = sigma_y * delta;
    let dsy = delta * sigma_y;
    let dsx = delta * sigma_x;
    let quad = 0.25 * (inner(&sxd, &dsy) + inner(&syd, &dsx));
    Ok(quad - inner(delta, &(sigma_x - sigma_y)))
}

/// `(Σ_X Δ Σ_Y + Σ_Y Δ Σ_X)/2 − (Σ_X − Σ_Y)`
pub fn dtrace_gradient(
    delta: &DMatrix<f64>,
    sigma_x: &DMatrix<f64>,
    sigma_y: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    check_dims(delta, sigma_x, sigma_y)?;
    let sym = (sigma_x * delta * sigma_y + sigma_y * delta * sigma_x) * 0.5;
    Ok(sym - (sigma_x - sigma_y))
}

/// `L_D(Δ) + λ‖Δ‖₁`
pub fn penalized_objective(delta: &DMatrix<f64>, pair: &CovariancePair, lam: f64) -> Result<f64> {
    Ok(dtrace_loss(delta, &pair.sigma_x, &pair.sigma_y)? + lam * norm_l1(delta))
}

/// Largest violation of the subgradient optimality conditions of the
/// penalized loss. Zero exactly at a minimizer.
pub fn kkt_check(delta: &DMatrix<f64>, pair: &CovariancePair, lam: f64) -> Result<f64> {
    let g = dtrace_gradient(delta, &pair.sigma_x, &pair.sigma_y)?;
    let worst = delta
        .iter()
        .zip(g.iter())
        .map(|(&d, &gij)| {
            if d != 0.0 {
                (gij + lam * d.signum()).abs()
            } else {
                (gij.abs() - lam).max(0.0)
            }
        })
        .fold(0.0, f64::max);
    Ok(worst)
}

/// ADMM solver bound to one covariance pair. The eigendecompositions of
/// `Σ̂_X` and `Σ̂_Y` are computed once and reused for every λ.
#[derive(Debug, Clone)]
pub struct DtraceAdmm<'a> {
    pair: &'a CovariancePair,
    cfg: SolverConfig,
    /// Solves `Σ̂_X X Σ̂_Y + 4ρ X = C`.
    kernel_xy: SylvesterKernel,
    /// Solves `Σ̂_Y X Σ̂_X + 4ρ X = C`.
    kernel_yx: SylvesterKernel,
    diff: DMatrix<f64>,
}

impl<'a> DtraceAdmm<'a> {
    pub fn new(pair: &'a CovariancePair, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let eig_x = psd_eig(&pair.sigma_x, "sigma_x")?;
        let eig_y = psd_eig(&pair.sigma_y, "sigma_y")?;
        let gamma = 4.0 * cfg.rho;
        Ok(DtraceAdmm {
            pair,
            cfg,
            kernel_xy: SylvesterKernel::from_eigen(&eig_x, &eig_y, gamma)?,
            kernel_yx: SylvesterKernel::from_eigen(&eig_y, &eig_x, gamma)?,
            diff: pair.difference(),
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    /// `‖Σ̂_X − Σ̂_Y‖_∞`: the smallest λ at which zero is optimal.
    pub fn lambda_max(&self) -> f64 {
        norm_linf(&self.diff)
    }

    /// Cold start: every `Δⱼ = (diag(Σ̂_Y) + I)⁻¹ − (diag(Σ̂_X) + I)⁻¹`, multipliers zero.
    pub fn initial_state(&self) -> SolverState {
        let p = self.pair.dim();
        let d = DMatrix::from_fn(p, p, |i, j| {
            if i == j {
                1.0 / (self.pair.sigma_y[(i, i)] + 1.0) - 1.0 / (self.pair.sigma_x[(i, i)] + 1.0)
            } else {
                0.0
            }
        });
        SolverState {
            delta1: d.clone(),
            delta2: d.clone(),
            delta3: d,
            lambda1: DMatrix::zeros(p, p),
            lambda2: DMatrix::zeros(p, p),
            lambda3: DMatrix::zeros(p, p),
            iter: 0,
        }
    }

    /// The exact ADMM fixed point for `Δ = 0`: all blocks zero,
    /// `Λ₁ = −(Σ̂_X − Σ̂_Y)/2`, `Λ₂ = (Σ̂_X − Σ̂_Y)/2`, `Λ₃ = 0`.
    fn zero_fixed_point(&self) -> SolverState {
        let p = self.pair.dim();
        SolverState {
            delta1: DMatrix::zeros(p, p),
            delta2: DMatrix::zeros(p, p),
            delta3: DMatrix::zeros(p, p),
            lambda1: &self.diff * -0.5,
            lambda2: &self.diff * 0.5,
            lambda3: DMatrix::zeros(p, p),
            iter: 0,
        }
    }

    pub fn solve(&self, lam: f64, warm: Option<&SolverState>) -> Result<(DeltaEstimate, SolverState)> {
        if !(lam >= 0.0) || !lam.is_finite() {
            return Err(Error::precondition(format!(
                "lambda must be nonnegative and finite, got {lam}"
            )));
        }
        let p = self.pair.dim();
        if let Some(w) = warm {
            if w.dim() != p {
                return Err(Error::shape("warm start", (p, p), w.delta1.shape()));
            }
        }

        // Zero satisfies the optimality conditions whenever λ ≥ ‖Σ̂_X − Σ̂_Y‖_∞.
        if lam >= self.lambda_max() {
            let state = self.zero_fixed_point();
            let estimate = DeltaEstimate {
                delta: DMatrix::zeros(p, p),
                lambda: lam,
                iterations: 0,
                converged: true,
                objective: 0.0,
            };
            return Ok((estimate, state));
        }

        let mut state = match warm {
            Some(w) => SolverState { iter: 0, ..w.clone() },
            None => self.initial_state(),
        };
        let rho = self.cfg.rho;
        let threshold = lam / (2.0 * rho);
        let mut converged = false;

        while state.iter < self.cfg.max_iter {
            let prev1 = &state.delta1;
            let prev2 = &state.delta2;
            let prev3 = &state.delta3;

            // (a)
            let c1 = (prev3 + prev2) * (2.0 * rho) + &self.diff + (&state.lambda1 - &state.lambda3) * 2.0;
            let d1 = self.kernel_xy.solve(&c1)?;
            // (b)
            let c2 = (prev3 + &d1) * (2.0 * rho) + &self.diff + (&state.lambda3 - &state.lambda2) * 2.0;
            let d2 = self.kernel_yx.solve(&c2)?;
            // (c)
            let mut d3 = (&d1 + &d2) * rho - &state.lambda1 + &state.lambda2;
            d3.apply(|v| *v = shrink(*v / (2.0 * rho), threshold));
            // (d)-(f)
            state.lambda1 += (&d3 - &d1) * rho;
            state.lambda2 += (&d2 - &d3) * rho;
            state.lambda3 += (&d1 - &d2) * rho;

            let small = |new: &DMatrix<f64>, old: &DMatrix<f64>| {
                let change = norm_frobenius(&(new - old));
                change < self.cfg.tol * 1f64.max(norm_frobenius(old)).max(norm_frobenius(new))
            };
            converged = small(&d1, prev1) && small(&d2, prev2) && small(&d3, prev3);

            state.delta1 = d1;
            state.delta2 = d2;
            state.delta3 = d3;
            state.iter += 1;

            let norm = state.max_norm();
            if !(norm <= DIVERGENCE_LIMIT) {
                return Err(Error::Divergence {
                    iteration: state.iter,
                    norm,
                });
            }
            if converged {
                break;
            }
        }

        let delta = if self.cfg.symmetrize_output {
            (&state.delta3 + state.delta3.transpose()) * 0.5
        } else {
            state.delta3.clone()
        };
        let objective = penalized_objective(&delta, self.pair, lam)?;
        let estimate = DeltaEstimate {
            delta,
            lambda: lam,
            iterations: state.iter,
            converged,
            objective,
        };
        Ok((estimate, state))
    }
}

/// Minimizes the lasso-penalized D-trace loss for one λ.
pub fn admm_solve(
    pair: &CovariancePair,
    lam: f64,
    cfg: &SolverConfig,
    warm: Option<&SolverState>,
) -> Result<(DeltaEstimate, SolverState)> {
    DtraceAdmm::new(pair, *cfg)?.solve(lam, warm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SymMatrix;
    use approx::assert_abs_diff_eq;

    fn diag_pair(x: &[f64], y: &[f64]) -> CovariancePair {
        CovariancePair::new(SymMatrix::from_diagonal(x), SymMatrix::from_diagonal(y), 100, 100).unwrap()
    }

    #[test]
    fn loss_at_zero_is_zero() {
        let p = diag_pair(&[1.0, 2.0], &[3.0, 1.0]);
        assert_eq!(dtrace_loss(&DMatrix::zeros(2, 2), &p.sigma_x, &p.sigma_y).unwrap(), 0.0);
    }

    #[test]
    fn loss_with_identity_covariances_is_half_frobenius() {
        let i = DMatrix::identity(3, 3);
        let d = DMatrix::from_row_slice(3, 3, &[1.0, -2.0, 0.5, 0.0, 3.0, 1.0, -1.0, 0.25, 2.0]);
        let l = dtrace_loss(&d, &i, &i).unwrap();
        assert_abs_diff_eq!(l, 0.5 * norm_frobenius(&d).powi(2), epsilon = 1e-12);
    }

    #[test]
    fn loss_diagonal_example() {
        let p = diag_pair(&[1.0, 2.0], &[3.0, 1.0]);
        let l = dtrace_loss(&DMatrix::identity(2, 2), &p.sigma_x, &p.sigma_y).unwrap();
        assert_abs_diff_eq!(l, 3.5, epsilon = 1e-14);
    }

    #[test]
    fn gradient_at_zero() {
        let p = diag_pair(&[1.0, 2.0], &[3.0, 1.0]);
        let g = dtrace_gradient(&DMatrix::zeros(2, 2), &p.sigma_x, &p.sigma_y).unwrap();
        assert_eq!(g, -p.difference());
    }

    #[test]
    fn gradient_vanishes_at_precision_difference() {
        let sx = SymMatrix::from_rows(&[&[2.0, 0.3, 0.1], &[0.3, 1.5, -0.2], &[0.1, -0.2, 1.0]]).unwrap();
        let sy = SymMatrix::from_rows(&[&[1.0, -0.1, 0.0], &[-0.1, 2.0, 0.4], &[0.0, 0.4, 1.2]]).unwrap();
        let d = sy.as_matrix().clone().try_inverse().unwrap() - sx.as_matrix().clone().try_inverse().unwrap();
        let g = dtrace_gradient(&d, &sx, &sy).unwrap();
        assert!(norm_linf(&g) < 1e-10);
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let i3 = DMatrix::<f64>::identity(3, 3);
        assert!(dtrace_loss(&i3, &i2, &i2).is_err());
        assert!(dtrace_gradient(&i2, &i2, &i3).is_err());
    }

    #[test]
    fn identical_groups_give_zero() {
        let s = SymMatrix::from_rows(&[&[1.0, 0.2], &[0.2, 0.5]]).unwrap();
        let pair = CovariancePair::new(s.clone(), s, 50, 50).unwrap();
        let (est, _) = admm_solve(&pair, 0.01, &SolverConfig::default(), None).unwrap();
        assert_eq!(est.delta, DMatrix::zeros(2, 2));
        assert!(est.converged);
    }

    #[test]
    fn diagonal_unpenalized() {
        let pair = diag_pair(&[1.0, 2.0], &[2.0, 1.0]);
        let cfg = SolverConfig {
            tol: 1e-10,
            max_iter: 100_000,
            ..SolverConfig::default()
        };
        let (est, _) = admm_solve(&pair, 0.0, &cfg, None).unwrap();
        assert!(est.converged);
        assert_abs_diff_eq!(est.delta[(0, 0)], -0.5, epsilon = 1e-4);
        assert_abs_diff_eq!(est.delta[(1, 1)], 0.5, epsilon = 1e-4);
        assert_abs_diff_eq!(est.delta[(0, 1)], 0.0, epsilon = 1e-4);
    }

    #[test]
    fn kkt_examples() {
        let sx = SymMatrix::from_rows(&[&[2.0, 0.3], &[0.3, 1.5]]).unwrap();
        let sy = SymMatrix::from_rows(&[&[1.0, -0.1], &[-0.1, 2.0]]).unwrap();
        let pair = CovariancePair::new(sx.clone(), sy.clone(), 10, 10).unwrap();
        let lmax = norm_linf(&pair.difference());
        assert_eq!(kkt_check(&DMatrix::zeros(2, 2), &pair, lmax).unwrap(), 0.0);

        let truth = sy.as_matrix().clone().try_inverse().unwrap() - sx.as_matrix().clone().try_inverse().unwrap();
        assert!(kkt_check(&truth, &pair, 0.0).unwrap() < 1e-10);

        let mut off = truth.clone();
        off[(0, 1)] += 0.1;
        assert!(kkt_check(&off, &pair, 0.0).unwrap() > 0.0);
    }

    #[test]
    fn invalid_config_and_lambda() {
        let pair = diag_pair(&[1.0, 2.0], &[2.0, 1.0]);
        let bad = SolverConfig {
            rho: 0.0,
            ..SolverConfig::default()
        };
        assert!(admm_solve(&pair, 0.1, &bad, None).is_err());
        assert!(admm_solve(&pair, -1.0, &SolverConfig::default(), None).is_err());
    }

    #[test]
    fn max_iter_reports_not_converged() {
        let pair = diag_pair(&[1.0, 2.0], &[2.0, 1.0]);
        let cfg = SolverConfig {
            max_iter: 2,
            tol: 1e-12,
            ..SolverConfig::default()
        };
        let (est, state) = admm_solve(&pair, 0.0, &cfg, None).unwrap();
        assert!(!est.converged);
        assert_eq!(est.iterations, 2);
        assert_eq!(state.iter, 2);
    }
}
