//! Support-recovery scoring, ROC / precision-recall curves, a naive
//! inverse-difference baseline, and the irrepresentability diagnostic.

use std::io::Write;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::covariance::CovariancePair;
use crate::error::{Error, Result};
use crate::linalg::{norm_l1_inf, norm_linf, spd_inverse, SymMatrix};
use crate::model_selection::{log_grid, RegPath};

/// Largest `p` for which the `p² × p²` Kronecker matrix is built.
pub const MAX_DIAGNOSTIC_DIM: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsReport {
    pub tp_rate: f64,
    pub tn_rate: f64,
    /// True discovery rate (precision); 1 when nothing is detected.
    pub td_rate: f64,
    pub sign_consistent: bool,
    pub nnz_est: usize,
    pub nnz_true: usize,
    pub true_positives: usize,
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// TP / TN / TD rates over all `p²` entries.
pub fn support_metrics(est: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<MetricsReport> {
    if est.shape() != truth.shape() {
        return Err(Error::shape("support_metrics", truth.shape(), est.shape()));
    }
    let (mut tp, mut tn, mut nnz_est, mut nnz_true) = (0, 0, 0, 0);
    let mut sign_consistent = true;
    for (&e, &t) in est.iter().zip(truth.iter()) {
        let (de, dt) = (e != 0.0, t != 0.0);
        nnz_est += de as usize;
        nnz_true += dt as usize;
        tp += (de && dt) as usize;
        tn += (!de && !dt) as usize;
        sign_consistent &= sign(e) == sign(t);
    }
    let zeros_true = est.len() - nnz_true;
    Ok(MetricsReport {
        tp_rate: ratio(tp, nnz_true),
        tn_rate: ratio(tn, zeros_true),
        td_rate: ratio(tp, nnz_est),
        sign_consistent,
        nnz_est,
        nnz_true,
        true_positives: tp,
    })
}

/// True when every nonzero of `est` is also nonzero in `truth`.
pub fn support_contained(est: &DMatrix<f64>, truth: &DMatrix<f64>) -> bool {
    est.iter().zip(truth.iter()).all(|(&e, &t)| e == 0.0 || t != 0.0)
}

/// True when `est` and `truth` agree in sign on the support of `truth`.
pub fn signs_agree_on_support(est: &DMatrix<f64>, truth: &DMatrix<f64>) -> bool {
    est.iter()
        .zip(truth.iter())
        .all(|(&e, &t)| t == 0.0 || sign(e) == sign(t))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    /// Penalty (or hard threshold, for the baseline) that produced the point.
    pub lambda: f64,
    pub tp_rate: f64,
    pub fp_rate: f64,
    /// TD rate.
    pub precision: f64,
}

impl CurvePoint {
    fn from_metrics(lambda: f64, m: &MetricsReport) -> Self {
        CurvePoint {
            lambda,
            tp_rate: m.tp_rate,
            fp_rate: 1.0 - m.tn_rate,
            precision: m.td_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub points: Vec<CurvePoint>,
    pub auc: f64,
}

impl Curve {
    /// Columns `lambda,tp,fp,precision`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write_curve_points(&self.points, &mut out)
    }
}

pub fn write_curve_points<W: Write>(points: &[CurvePoint], mut out: W) -> Result<()> {
    writeln!(out, "lambda,tp,fp,precision")?;
    for pt in points {
        writeln!(out, "{},{},{},{}", pt.lambda, pt.tp_rate, pt.fp_rate, pt.precision)?;
    }
    Ok(())
}

/// ROC area by the trapezoid rule over points sorted by false-positive
/// rate, with `(0, 0)` and `(1, 1)` appended.
pub fn roc_auc(points: &[CurvePoint]) -> f64 {
    let mut xy: Vec<(f64, f64)> = points.iter().map(|p| (p.fp_rate, p.tp_rate)).collect();
    xy.push((0.0, 0.0));
    xy.push((1.0, 1.0));
    xy.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    xy.windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) * 0.5)
        .sum()
}

fn curve_from_estimates<'a>(
    items: impl Iterator<Item = (f64, &'a DMatrix<f64>)>,
    truth: &DMatrix<f64>,
) -> Result<Curve> {
    let mut points = Vec::new();
    for (lambda, est) in items {
        points.push(CurvePoint::from_metrics(lambda, &support_metrics(est, truth)?));
    }
    let auc = roc_auc(&points);
    Ok(Curve { points, auc })
}

/// One curve point per λ of the path.
pub fn curve_from_path(path: &RegPath, truth: &DMatrix<f64>) -> Result<Curve> {
    if path.is_empty() {
        return Err(Error::precondition("curve of an empty path"));
    }
    curve_from_estimates(
        path.lambdas.iter().copied().zip(path.estimates.iter().map(|e| &e.delta)),
        truth,
    )
}

/// `(Σ̂_Y + rI)⁻¹ − (Σ̂_X + rI)⁻¹`
pub fn naive_baseline(pair: &CovariancePair, ridge: f64) -> Result<SymMatrix> {
    if !(ridge >= 0.0) {
        return Err(Error::precondition(format!("ridge must be nonnegative, got {ridge}")));
    }
    let mut sx = pair.sigma_x.clone();
    let mut sy = pair.sigma_y.clone();
    sx.shift_diagonal(ridge);
    sy.shift_diagonal(ridge);
    let diff = spd_inverse(&sy, "sigma_y + ridge")?.into_inner() - spd_inverse(&sx, "sigma_x + ridge")?.into_inner();
    SymMatrix::from_matrix(diff)
}

/// Keeps entries with `|b| > t`.
pub fn hard_threshold(b: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    b.map(|v| if v.abs() > t { v } else { 0.0 })
}

/// Curve of the baseline hard-thresholded at `count` log-spaced levels
/// from `max |b|` down to `ratio · max |b|`.
pub fn naive_curve(baseline: &DMatrix<f64>, truth: &DMatrix<f64>, count: usize, ratio: f64) -> Result<Curve> {
    let top = norm_linf(baseline);
    if top == 0.0 {
        let zero = DMatrix::zeros(baseline.nrows(), baseline.ncols());
        return curve_from_estimates(std::iter::once((0.0, &zero)), truth);
    }
    let levels = log_grid(top, count, ratio)?;
    let thresholded: Vec<DMatrix<f64>> = levels.iter().map(|&t| hard_threshold(baseline, t)).collect();
    curve_from_estimates(levels.iter().copied().zip(thresholded.iter()), truth)
}

/// `Γ = (Σ_X ⊗ Σ_Y + Σ_Y ⊗ Σ_X) / 2`, rows and columns indexed by `(j, k) ↦ j·p + k`.
pub fn gamma_matrix(sigma_x: &DMatrix<f64>, sigma_y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if sigma_x.shape() != sigma_y.shape() || !sigma_x.is_square() {
        return Err(Error::shape("gamma_matrix", sigma_x.shape(), sigma_y.shape()));
    }
    let p = sigma_x.nrows();
    if p > MAX_DIAGNOSTIC_DIM {
        return Err(Error::TooLarge {
            p,
            max: MAX_DIAGNOSTIC_DIM,
            reason: "the Kronecker matrix has p^4 entries",
        });
    }
    Ok((sigma_x.kronecker(sigma_y) + sigma_y.kronecker(sigma_x)) * 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Irrepresentability {
    /// `1 − max_{e ∉ S} ‖Γ_{e,S} Γ_{S,S}⁻¹‖₁`; the condition holds when positive.
    pub alpha: f64,
    /// `‖Γ_{S,S}⁻¹‖_{1,∞}`
    pub kappa: f64,
}

impl Irrepresentability {
    pub fn holds(&self) -> bool {
        self.alpha > 0.0
    }
}

/// Irrepresentability slack and `κ_Γ` for covariances `sigma_x`, `sigma_y`
/// and support `support` (0-based `(row, col)` pairs).
pub fn irrepresentability_alpha(
    sigma_x: &DMatrix<f64>,
    sigma_y: &DMatrix<f64>,
    support: &[(usize, usize)],
) -> Result<Irrepresentability> {
    let gamma = gamma_matrix(sigma_x, sigma_y)?;
    let p = sigma_x.nrows();
    let mut on: Vec<usize> = Vec::with_capacity(support.len());
    for &(i, j) in support {
        if i >= p || j >= p {
            return Err(Error::precondition(format!(
                "support entry ({i}, {j}) is outside a {p}x{p} matrix"
            )));
        }
        on.push(i * p + j);
    }
    on.sort_unstable();
    on.dedup();
    if on.is_empty() {
        return Err(Error::precondition("support must be nonempty"));
    }
    let mut is_on = vec![false; p * p];
    for &k in &on {
        is_on[k] = true;
    }
    let off: Vec<usize> = (0..p * p).filter(|&k| !is_on[k]).collect();

    let g_ss = gamma.select_rows(&on).select_columns(&on);
    let g_ss_inv = g_ss
        .clone()
        .lu()
        .try_inverse()
        .filter(|m| m.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Factorization {
            name: "Gamma_SS".to_string(),
        })?;
    let kappa = norm_l1_inf(&g_ss_inv);
    let max_term = if off.is_empty() {
        0.0
    } else {
        let g_es = gamma.select_rows(&off).select_columns(&on);
        norm_l1_inf(&(g_es * &g_ss_inv))
    };
    Ok(Irrepresentability {
        alpha: 1.0 - max_term,
        kappa,
    })
}

/// Writes a [`MetricsReport`] as a header plus one CSV row.
pub fn write_metrics_csv<W: Write>(m: &MetricsReport, mut out: W) -> Result<()> {
    writeln!(out, "tp,tn,td,sign_consistent,nnz_est,nnz_true")?;
    writeln!(
        out,
        "{},{},{},{},{},{}",
        m.tp_rate, m.tn_rate, m.td_rate, m.sign_consistent, m.nnz_est, m.nnz_true
    )?;
    Ok(())
}
