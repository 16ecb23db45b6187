//! Dense symmetric kernels: eigendecomposition, entrywise norms, the
//! closed-form solver for `A X B + γ X = C`, and soft-thresholding.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenvalues in `[-PSD_TOLERANCE, 0)` are treated as round-off and clamped to zero.
pub const PSD_TOLERANCE: f64 = 1e-8;

/// A dense, square, symmetric matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Symmetrizes `m` as `(m + mᵀ) / 2`.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::shape(
                "SymMatrix",
                (m.nrows(), m.nrows()),
                (m.nrows(), m.ncols()),
            ));
        }
        check_finite("matrix", &m)?;
        let t = m.transpose();
        Ok(SymMatrix((m + t) * 0.5))
    }

    pub fn identity(p: usize) -> Self {
        SymMatrix(DMatrix::identity(p, p))
    }

    pub fn zeros(p: usize) -> Self {
        SymMatrix(DMatrix::zeros(p, p))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    /// Builds from row-major nested rows, symmetrizing.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let p = rows.len();
        let mut m = DMatrix::zeros(p, p);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::shape("SymMatrix::from_rows", (p, p), (i, row.len())));
            }
            for (j, v) in row.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        Self::from_matrix(m)
    }

    /// Wraps a matrix that is symmetric by construction. Only the shape is checked.
    pub(crate) fn from_symmetric_unchecked(m: DMatrix<f64>) -> Self {
        debug_assert!(m.is_square());
        SymMatrix(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        SymmetricEigen::new(self.0.clone()).eigenvalues.min()
    }

    /// Adds `shift` to every diagonal entry.
    pub fn shift_diagonal(&mut self, shift: f64) {
        for i in 0..self.dim() {
            self.0[(i, i)] += shift;
        }
    }
}

impl Deref for SymMatrix {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Orthogonal eigendecomposition `A = U diag(σ) Uᵀ`, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub vectors: DMatrix<f64>,
    pub values: DVector<f64>,
}

impl EigenPair {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let scaled = &self.vectors * DMatrix::from_diagonal(&self.values);
        scaled * self.vectors.transpose()
    }
}

pub(crate) fn check_finite(what: &str, m: &DMatrix<f64>) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(Error::NonFinite {
                    what: what.to_string(),
                    row: i,
                    col: j,
                });
            }
        }
    }
    Ok(())
}

pub fn sym_eig(a: &SymMatrix) -> Result<EigenPair> {
    sym_eig_named(a, "matrix")
}

pub(crate) fn sym_eig_named(a: &SymMatrix, name: &str) -> Result<EigenPair> {
    check_finite(name, a)?;
    let p = a.dim();
    let eig = SymmetricEigen::try_new(a.as_matrix().clone(), f64::EPSILON, 0).ok_or_else(|| {
        Error::Factorization {
            name: name.to_string(),
        }
    })?;

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

    let mut vectors = DMatrix::zeros(p, p);
    let mut values = DVector::zeros(p);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = eig.eigenvalues[src];
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(EigenPair { vectors, values })
}

/// Eigendecomposition of a matrix that must be PSD up to [`PSD_TOLERANCE`];
/// small negative eigenvalues are clamped to zero.
pub(crate) fn psd_eig(a: &SymMatrix, name: &str) -> Result<EigenPair> {
    let mut eig = sym_eig_named(a, name)?;
    for v in eig.values.iter_mut() {
        if *v < -PSD_TOLERANCE {
            return Err(Error::NotPositiveSemidefinite {
                name: name.to_string(),
                min_eigenvalue: *v,
            });
        }
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(eig)
}

/// Precomputed solver for `A X B + γ X = C` with fixed `A`, `B`, `γ`.
///
/// With `A = U_A Σ_A U_Aᵀ` and `B = U_B Σ_B U_Bᵀ`, the substitution
/// `Y = U_Aᵀ X U_B` diagonalizes the equation into
/// `σᵢᴬ σⱼᴮ Yᵢⱼ + γ Yᵢⱼ = (U_Aᵀ C U_B)ᵢⱼ`.
#[derive(Debug, Clone)]
pub struct SylvesterKernel {
    u_a: DMatrix<f64>,
    u_a_t: DMatrix<f64>,
    u_b: DMatrix<f64>,
    u_b_t: DMatrix<f64>,
    /// `inv_divisor[(i, j)] = 1 / (σᵢᴬ σⱼᴮ + γ)`
    inv_divisor: DMatrix<f64>,
    #[cfg(debug_assertions)]
    a: DMatrix<f64>,
    #[cfg(debug_assertions)]
    b: DMatrix<f64>,
    #[cfg(debug_assertions)]
    gamma: f64,
}

impl SylvesterKernel {
    pub fn new(a: &SymMatrix, b: &SymMatrix, gamma: f64) -> Result<Self> {
        let eig_a = psd_eig(a, "A")?;
        let eig_b = psd_eig(b, "B")?;
        Self::from_eigen(&eig_a, &eig_b, gamma)
    }

    /// Builds from eigendecompositions whose eigenvalues are already nonnegative.
    pub fn from_eigen(eig_a: &EigenPair, eig_b: &EigenPair, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::precondition(format!(
                "gamma must be positive and finite, got {gamma}"
            )));
        }
        let (pa, pb) = (eig_a.values.len(), eig_b.values.len());
        let inv_divisor =
            DMatrix::from_fn(pa, pb, |i, j| 1.0 / (eig_a.values[i] * eig_b.values[j] + gamma));
        Ok(SylvesterKernel {
            u_a: eig_a.vectors.clone(),
            u_a_t: eig_a.vectors.transpose(),
            u_b: eig_b.vectors.clone(),
            u_b_t: eig_b.vectors.transpose(),
            inv_divisor,
            #[cfg(debug_assertions)]
            a: eig_a.reconstruct(),
            #[cfg(debug_assertions)]
            b: eig_b.reconstruct(),
            #[cfg(debug_assertions)]
            gamma,
        })
    }

    pub fn solve(&self, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let expected = (self.u_a.nrows(), self.u_b.nrows());
        if c.shape() != expected {
            return Err(Error::shape("solve_axb_plus_gx", expected, c.shape()));
        }
        let rotated = &self.u_a_t * c * &self.u_b;
        let scaled = rotated.component_mul(&self.inv_divisor);
        let x = &self.u_a * scaled * &self.u_b_t;

        #[cfg(debug_assertions)]
        {
            let residual = &self.a * &x * &self.b + &x * self.gamma - c;
            let bound = 1e-8 * norm_linf(c).max(1.0) * self.conditioning_scale();
            debug_assert!(
                norm_linf(&residual) <= bound,
                "AXB + γX = C residual {} exceeds {}",
                norm_linf(&residual),
                bound
            );
        }
        Ok(x)
    }

    /// Scale factor for the debug residual check: round-off grows with the
    /// magnitude of `A` and `B` relative to `γ`.
    #[cfg(debug_assertions)]
    fn conditioning_scale(&self) -> f64 {
        let a = norm_linf(&self.a).max(1.0);
        let b = norm_linf(&self.b).max(1.0);
        (a * b / self.gamma.min(1.0)).max(1.0)
    }
}

/// Solves `A X B + γ X = C` for symmetric PSD `A`, `B` and `γ > 0`.
pub fn solve_axb_plus_gx(
    a: &SymMatrix,
    b: &SymMatrix,
    c: &DMatrix<f64>,
    gamma: f64,
) -> Result<DMatrix<f64>> {
    if !(gamma > 0.0) {
        return Err(Error::precondition(format!("gamma must be positive, got {gamma}")));
    }
    SylvesterKernel::new(a, b, gamma)?.solve(c)
}

/// Entrywise soft-thresholding, the proximal map of `λ‖·‖₁`.
pub fn soft_threshold(a: &DMatrix<f64>, lam: f64) -> Result<DMatrix<f64>> {
    if !(lam >= 0.0) {
        return Err(Error::precondition(format!(
            "threshold must be nonnegative, got {lam}"
        )));
    }
    Ok(a.map(|v| shrink(v, lam)))
}

#[inline]
pub(crate) fn shrink(v: f64, lam: f64) -> f64 {
    if v > lam {
        v - lam
    } else if v < -lam {
        v + lam
    } else {
        0.0
    }
}

pub fn hadamard(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.shape() != b.shape() {
        return Err(Error::shape("hadamard", a.shape(), b.shape()));
    }
    Ok(a.component_mul(b))
}

/// `Σ |aᵢⱼ|`
pub fn norm_l1(a: &DMatrix<f64>) -> f64 {
    a.iter().map(|v| v.abs()).sum()
}

/// `max |aᵢⱼ|`
pub fn norm_linf(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn norm_frobenius(a: &DMatrix<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Maximum absolute row sum.
pub fn norm_l1_inf(a: &DMatrix<f64>) -> f64 {
    a.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Number of entries that are exactly nonzero.
pub fn count_nonzero(a: &DMatrix<f64>) -> usize {
    a.iter().filter(|v| **v != 0.0).count()
}

/// `⟨A, B⟩ = tr(A Bᵀ)`
pub fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub fn spd_inverse(a: &SymMatrix, name: &str) -> Result<SymMatrix> {
    let chol = a
        .as_matrix()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite {
            name: name.to_string(),
        })?;
    let inv = chol.inverse();
    let t = inv.transpose();
    Ok(SymMatrix((inv + t) * 0.5))
}
