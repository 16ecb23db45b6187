//! Sample covariances for the two groups.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{check_finite, SymMatrix, PSD_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    X,
    Y,
}

impl std::fmt::Display for Group {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Group::X => f.write_str("X"),
            Group::Y => f.write_str("Y"),
        }
    }
}

/// `n × p` observations of one group, one row per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMatrix {
    values: DMatrix<f64>,
    group: Group,
}

impl ObservationMatrix {
    pub fn new(values: DMatrix<f64>, group: Group) -> Result<Self> {
        if values.nrows() < 2 {
            return Err(Error::precondition(format!(
                "group {group} needs at least 2 observations, got {}",
                values.nrows()
            )));
        }
        if values.ncols() == 0 {
            return Err(Error::precondition(format!("group {group} has no variables")));
        }
        check_finite(&format!("observations of group {group}"), &values)?;
        Ok(ObservationMatrix { values, group })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn group(&self) -> Group {
        self.group
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }
}

/// Divisor applied to the centered cross-product matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// `1/n`
    #[default]
    MaximumLikelihood,
    /// `1/(n-1)`
    Unbiased,
}

/// Maximum-likelihood (`1/n`) sample covariance of column-centered data.
pub fn sample_covariance(data: &ObservationMatrix) -> SymMatrix {
    sample_covariance_with(data, Normalization::MaximumLikelihood)
}

pub fn sample_covariance_with(data: &ObservationMatrix, norm: Normalization) -> SymMatrix {
    let n = data.n();
    let mut centered = data.values.clone();
    for mut col in centered.column_iter_mut() {
        let mean = col.sum() / n as f64;
        col.add_scalar_mut(-mean);
    }
    let divisor = match norm {
        Normalization::MaximumLikelihood => n as f64,
        Normalization::Unbiased => (n - 1) as f64,
    };
    let mut cov = centered.tr_mul(&centered) / divisor;
    let p = cov.nrows();
    for i in 0..p {
        for j in (i + 1)..p {
            let v = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    SymMatrix::from_symmetric_unchecked(cov)
}

/// The two covariance estimates fed to the solver, with their sample sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariancePair {
    pub sigma_x: SymMatrix,
    pub sigma_y: SymMatrix,
    pub n_x: usize,
    pub n_y: usize,
}

impl CovariancePair {
    /// Validates equal dimension and positive semidefiniteness (to tolerance).
    pub fn new(sigma_x: SymMatrix, sigma_y: SymMatrix, n_x: usize, n_y: usize) -> Result<Self> {
        if sigma_x.dim() != sigma_y.dim() {
            return Err(Error::shape("CovariancePair", sigma_x.shape(), sigma_y.shape()));
        }
        for (name, s) in [("sigma_x", &sigma_x), ("sigma_y", &sigma_y)] {
            let min = s.min_eigenvalue();
            if min < -PSD_TOLERANCE {
                return Err(Error::NotPositiveSemidefinite {
                    name: name.to_string(),
                    min_eigenvalue: min,
                });
            }
        }
        Ok(CovariancePair {
            sigma_x,
            sigma_y,
            n_x,
            n_y,
        })
    }

    pub fn dim(&self) -> usize {
        self.sigma_x.dim()
    }

    /// `Σ̂_X − Σ̂_Y`
    pub fn difference(&self) -> DMatrix<f64> {
        self.sigma_x.as_matrix() - self.sigma_y.as_matrix()
    }
}

pub fn build_pair(x: &ObservationMatrix, y: &ObservationMatrix) -> Result<CovariancePair> {
    build_pair_with(x, y, Normalization::MaximumLikelihood)
}

pub fn build_pair_with(
    x: &ObservationMatrix,
    y: &ObservationMatrix,
    norm: Normalization,
) -> Result<CovariancePair> {
    if x.p() != y.p() {
        return Err(Error::DimensionMismatch {
            context: "build_pair",
            expected: format!("p = {}", x.p()),
            found: format!("p = {}", y.p()),
        });
    }
    Ok(CovariancePair {
        sigma_x: sample_covariance_with(x, norm),
        sigma_y: sample_covariance_with(y, norm),
        n_x: x.n(),
        n_y: y.n(),
    })
}
