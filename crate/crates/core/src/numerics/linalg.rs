use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative size of a QR pivot below which a column counts as dependent.
const RANK_TOL: f64 = 1e-10;

/// An `n x k` regression design whose first column is the intercept.
///
/// The thin QR factors are computed once on construction; full column rank
/// is checked there, so every `DesignMatrix` in circulation is usable.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    values: DMatrix<f64>,
    q: DMatrix<f64>,
}

impl DesignMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        let (n, k) = values.shape();
        if k == 0 || n <= k {
            return Err(Error::InvalidArgument(format!(
                "design needs n > k >= 1, got n = {n}, k = {k}"
            )));
        }
        // Scale columns to unit norm so the pivot test is scale free.
        let mut scaled = values.clone();
        for j in 0..k {
            let norm = scaled.column(j).norm();
            if norm == 0.0 {
                return Err(Error::RankDeficient { column: j });
            }
            scaled.column_mut(j).unscale_mut(norm);
        }
        let qr = scaled.qr();
        let r = qr.r();
        for j in 0..k {
            if r[(j, j)].abs() < RANK_TOL {
                return Err(Error::RankDeficient { column: j });
            }
        }
        let q = qr.q();
        Ok(Self { values, q })
    }

    /// Intercept plus the given predictor columns.
    pub fn with_intercept(columns: &[&[f64]]) -> Result<Self> {
        let n = columns.first().map_or(0, |c| c.len());
        for c in columns {
            if c.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: c.len() });
            }
        }
        let k = columns.len() + 1;
        let m = DMatrix::from_fn(n, k, |i, j| if j == 0 { 1.0 } else { columns[j - 1][i] });
        Self::new(m)
    }

    /// The simple-regression design `[1, x]`.
    pub fn simple(x: &[f64]) -> Result<Self> {
        Self::with_intercept(&[x])
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Orthonormal basis of the column space (thin `Q`).
    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// Diagonal of the hat matrix `X (X'X)^-1 X'`.
    pub fn leverages(&self) -> Vec<f64> {
        self.q.row_iter().map(|row| row.norm_squared()).collect()
    }

    /// Projects `v` onto the orthogonal complement of the column space.
    pub fn residualize(&self, v: &[f64]) -> Vec<f64> {
        let y = DVector::from_column_slice(v);
        let proj = &self.q * (self.q.transpose() * &y);
        (y - proj).iter().copied().collect()
    }

    /// Appends columns (no intercept added) and re-checks rank.
    pub fn augment(&self, columns: &[Vec<f64>]) -> Result<Self> {
        let (n, k) = self.values.shape();
        for c in columns {
            if c.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: c.len() });
            }
        }
        let m = DMatrix::from_fn(n, k + columns.len(), |i, j| {
            if j < k {
                self.values[(i, j)]
            } else {
                columns[j - k][i]
            }
        });
        Self::new(m)
    }
}

/// Result of an ordinary least squares fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rss: f64,
    pub df_residual: usize,
}

pub fn ols_fit(x: &DesignMatrix, y: &[f64]) -> Result<OlsFit> {
    let n = x.nrows();
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    let yv = DVector::from_column_slice(y);
    let qty = x.q.transpose() * &yv;
    let fitted_v = &x.q * &qty;
    let resid_v = &yv - &fitted_v;

    // Coefficients from the unscaled system; QR of X itself keeps this
    // independent of the scaled factorisation used for projections.
    let qr = x.values.clone().qr();
    let rhs = qr.q().transpose() * &yv;
    let coef = qr
        .r()
        .solve_upper_triangular(&rhs)
        .ok_or(Error::RankDeficient { column: 0 })?;

    let residuals: Vec<f64> = resid_v.iter().copied().collect();
    let rss = residuals.iter().map(|e| e * e).sum();
    Ok(OlsFit {
        coefficients: coef.iter().copied().collect(),
        fitted: fitted_v.iter().copied().collect(),
        residuals,
        rss,
        df_residual: n - x.ncols(),
    })
}

/// The symmetric idempotent projector `I - X (X'X)^-1 X'`.
#[derive(Debug, Clone)]
pub struct ResidualOperator {
    pub matrix: DMatrix<f64>,
}

pub fn residual_operator(x: &DesignMatrix) -> ResidualOperator {
    let n = x.nrows();
    let matrix = DMatrix::identity(n, n) - &x.q * x.q.transpose();
    ResidualOperator { matrix }
}

impl ResidualOperator {
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let out = &self.matrix * DVector::from_column_slice(v);
        out.iter().copied().collect()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normal_equations(x: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
        let xt = x.transpose();
        let xtx = &xt * x;
        let xty = &xt * DVector::from_column_slice(y);
        let chol = xtx.cholesky().unwrap();
        chol.solve(&xty).iter().copied().collect()
    }

    #[test]
    fn exact_linear_fit_has_zero_residuals() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 + 0.5 * v).collect();
        let fit = ols_fit(&DesignMatrix::simple(&x).unwrap(), &y).unwrap();
        assert!(fit.rss < 1e-24);
        assert!(fit.residuals.iter().all(|e| e.abs() < 1e-12));
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-12);
        assert!((fit.coefficients[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn intercept_only_is_the_mean() {
        let x = DesignMatrix::new(DMatrix::from_element(3, 1, 1.0)).unwrap();
        let fit = ols_fit(&x, &[1.0, 2.0, 3.0]).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-12);
        assert!((fit.rss - 2.0).abs() < 1e-12);
        assert_eq!(fit.df_residual, 2);
    }

    #[test]
    fn matches_normal_equations_oracle() {
        let mut rng = crate::numerics::RandomStream::new(7);
        let n = 50;
        let m = DMatrix::from_fn(n, 3, |_, j| if j == 0 { 1.0 } else { rng.normal() });
        let beta = [1.0, -2.0, 0.5];
        let y: Vec<f64> = (0..n)
            .map(|i| (0..3).map(|j| m[(i, j)] * beta[j]).sum::<f64>() + rng.normal())
            .collect();
        let oracle = normal_equations(&m, &y);
        let fit = ols_fit(&DesignMatrix::new(m).unwrap(), &y).unwrap();
        for (a, b) in fit.coefficients.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn rank_deficiency_is_detected() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let twice: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let err = DesignMatrix::with_intercept(&[&x, &twice]).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { column: 2 }));
        let constant = [5.0; 4];
        assert!(DesignMatrix::simple(&constant).is_err());
    }

    #[test]
    fn dimension_mismatch() {
        let x = DesignMatrix::simple(&[0.0, 1.0, 2.0]).unwrap();
        assert!(matches!(
            ols_fit(&x, &[1.0, 2.0]),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn centering_matrix_for_intercept_only() {
        let x = DesignMatrix::new(DMatrix::from_element(3, 1, 1.0)).unwrap();
        let r = residual_operator(&x);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 - 1.0 / 3.0 } else { -1.0 / 3.0 };
                assert!((r.matrix[(i, j)] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn operator_residuals_match_fit() {
        let mut rng = crate::numerics::RandomStream::new(11);
        let xs: Vec<f64> = (0..10).map(|_| rng.normal()).collect();
        let y: Vec<f64> = (0..10).map(|_| rng.normal()).collect();
        let d = DesignMatrix::simple(&xs).unwrap();
        let r = residual_operator(&d);
        let fit = ols_fit(&d, &y).unwrap();
        for (a, b) in r.apply(&y).iter().zip(&fit.residuals) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!((r.trace() - 8.0).abs() < 1e-6);
    }
}
