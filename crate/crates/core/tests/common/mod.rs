//! Independent oracles shared by the integration tests. Nothing here calls
//! into the eigen-based kernels of the library.

#![allow(dead_code)]

use difftrace::covariance::CovariancePair;
use difftrace::linalg::SymMatrix;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal))
}

/// Random SPD matrix `Q diag(λ) Qᵀ` with eigenvalues drawn from `[lo, hi]`.
pub fn random_spd(p: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let q = gaussian_matrix(p, p, rng).qr().q();
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(p, |_, _| rng.random_range(lo..=hi)));
    let m = &q * d * q.transpose();
    (&m + m.transpose()) * 0.5
}

/// Random PSD matrix `G Gᵀ / k` that may be rank deficient when `k < p`.
pub fn random_psd(p: usize, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = gaussian_matrix(p, k, rng);
    let m = &g * g.transpose() / k as f64;
    (&m + m.transpose()) * 0.5
}

pub fn random_pair(p: usize, rng: &mut ChaCha8Rng) -> CovariancePair {
    let sx = SymMatrix::from_matrix(random_spd(p, 0.5, 2.0, rng)).unwrap();
    let sy = SymMatrix::from_matrix(random_spd(p, 0.5, 2.0, rng)).unwrap();
    CovariancePair::new(sx, sy, 100, 100).unwrap()
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// Column-major vectorization.
pub fn vec_of(m: &DMatrix<f64>) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_column_slice(m.as_slice())
}

/// Solves `A X B + γX = C` through the `p²×p²` system
/// `(Bᵀ ⊗ A + γI) vec X = vec C` with an LU factorization.
pub fn kronecker_sylvester(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, gamma: f64) -> DMatrix<f64> {
    let p = a.nrows();
    let q = b.nrows();
    let mut k = b.transpose().kronecker(a);
    for i in 0..p * q {
        k[(i, i)] += gamma;
    }
    let x = k.lu().solve(&vec_of(c)).expect("kronecker system is singular");
    DMatrix::from_column_slice(p, q, x.as_slice())
}

/// Hessian of the D-trace loss acting on `vec Δ`:
/// `(Σ_Y ⊗ Σ_X + Σ_X ⊗ Σ_Y) / 2`.
pub fn dtrace_hessian(sx: &DMatrix<f64>, sy: &DMatrix<f64>) -> DMatrix<f64> {
    (sy.kronecker(sx) + sx.kronecker(sy)) * 0.5
}

/// Loss evaluated from its vectorized quadratic form, independent of the
/// library's trace formula: `½ vᵀHv − ⟨v, vec(Σ_X − Σ_Y)⟩`.
pub fn quadratic_loss(h: &DMatrix<f64>, d: &DMatrix<f64>, delta: &DMatrix<f64>) -> f64 {
    let v = vec_of(delta);
    0.5 * v.dot(&(h * &v)) - v.dot(&vec_of(d))
}

/// Proximal gradient (ISTA) on the penalized loss with step `1/L`, `L` the
/// largest eigenvalue of the Kronecker Hessian. Runs until the objective
/// changes by less than `obj_tol` between iterations.
pub fn prox_gradient(sx: &DMatrix<f64>, sy: &DMatrix<f64>, lam: f64, obj_tol: f64) -> DMatrix<f64> {
    let p = sx.nrows();
    let h = dtrace_hessian(sx, sy);
    let l = h.clone().symmetric_eigenvalues().max();
    let d = sx - sy;
    let d_vec = vec_of(&d);
    let objective = |v: &nalgebra::DVector<f64>| {
        0.5 * v.dot(&(&h * v)) - v.dot(&d_vec) + lam * v.iter().map(|x| x.abs()).sum::<f64>()
    };
    let mut v = nalgebra::DVector::zeros(p * p);
    let mut f = objective(&v);
    for _ in 0..1_000_000 {
        let grad = &h * &v - &d_vec;
        let step = &v - grad / l;
        let t = lam / l;
        v = step.map(|x| x.signum() * (x.abs() - t).max(0.0));
        let f_new = objective(&v);
        let change = (f - f_new).abs();
        f = f_new;
        if change < obj_tol {
            break;
        }
    }
    DMatrix::from_column_slice(p, p, v.as_slice())
}

/// `Γ = (Σ_X ⊗ Σ_Y + Σ_Y ⊗ Σ_X)/2` assembled entry by entry with row index
/// `(j,k) ↦ j·p + k`.
pub fn gamma_entrywise(sx: &DMatrix<f64>, sy: &DMatrix<f64>) -> DMatrix<f64> {
    let p = sx.nrows();
    DMatrix::from_fn(p * p, p * p, |r, c| {
        let (j, k) = (r / p, r % p);
        let (l, m) = (c / p, c % p);
        0.5 * (sx[(j, l)] * sy[(k, m)] + sy[(j, l)] * sx[(k, m)])
    })
}

/// `(α, κ)` of the irrepresentability condition from the entrywise Γ.
pub fn alpha_kappa_oracle(sx: &DMatrix<f64>, sy: &DMatrix<f64>, support: &[(usize, usize)]) -> (f64, f64) {
    let p = sx.nrows();
    let g = gamma_entrywise(sx, sy);
    let mut on: Vec<usize> = support.iter().map(|&(i, j)| i * p + j).collect();
    on.sort_unstable();
    on.dedup();
    let off: Vec<usize> = (0..p * p).filter(|k| !on.contains(k)).collect();
    let s = on.len();
    let g_ss = DMatrix::from_fn(s, s, |a, b| g[(on[a], on[b])]);
    let inv = g_ss.try_inverse().expect("singular Gamma_SS");
    let row_l1 = |m: &DMatrix<f64>| {
        (0..m.nrows())
            .map(|r| m.row(r).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let kappa = row_l1(&inv);
    let worst = if off.is_empty() {
        0.0
    } else {
        let g_es = DMatrix::from_fn(off.len(), s, |a, b| g[(off[a], on[b])]);
        row_l1(&(g_es * &inv))
    };
    (1.0 - worst, kappa)
}
