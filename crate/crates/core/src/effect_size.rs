//! Kullback-Leibler effect size of a residual departure.
//!
//! With `R` the residual operator, `V` the true error covariance, `sigma2`
//! the variance assumed under the null and `mu = R Z beta_z`,
//!
//! ```text
//! E = 1/2 ( log |diag(RVR')| / |diag(R sigma2)| - n
//!           + tr(diag(RVR')^-1 diag(R sigma2)) + mu' (RVR')^+ mu )
//! ```
//!
//! `RVR'` has rank `n - k`, so the quadratic form uses its Moore-Penrose
//! pseudo-inverse; `mu` always lies in its range.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{residual_operator, DesignMatrix};
use crate::simulate::SimulatedDataset;

/// Relative eigenvalue cutoff for the pseudo-inverse.
pub const PINV_CUTOFF: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct EffectSizeInputs {
    pub x: DesignMatrix,
    /// Diagonal of the true covariance `V`.
    pub variances: Vec<f64>,
    pub sigma2: f64,
    /// Columns of the omitted-term matrix `Z`.
    pub z: Vec<Vec<f64>>,
    pub beta_z: Vec<f64>,
}

impl EffectSizeInputs {
    pub fn from_dataset(ds: &SimulatedDataset) -> Result<Self> {
        Ok(Self {
            x: ds.design()?,
            variances: ds.variances.clone(),
            sigma2: ds.sigma2,
            z: ds.z_design.clone(),
            beta_z: ds.beta_z.clone(),
        })
    }

    fn validate(&self) -> Result<()> {
        let n = self.x.nrows();
        if self.variances.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: self.variances.len() });
        }
        if self.z.len() != self.beta_z.len() {
            return Err(Error::DimensionMismatch { expected: self.z.len(), got: self.beta_z.len() });
        }
        if let Some(c) = self.z.iter().find(|c| c.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: c.len() });
        }
        if !(self.sigma2 > 0.0) || self.variances.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidArgument("variances must be strictly positive".into()));
        }
        Ok(())
    }

    /// `mu_z = R Z beta_z`.
    pub fn omitted_mean(&self) -> Vec<f64> {
        let n = self.x.nrows();
        let mut zb = vec![0.0; n];
        for (col, b) in self.z.iter().zip(&self.beta_z) {
            for (o, z) in zb.iter_mut().zip(col) {
                *o += z * b;
            }
        }
        self.x.residualize(&zb)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectSize {
    pub value: f64,
    /// Natural log of `value`; `None` when `value` is zero.
    pub log_value: Option<f64>,
}

/// How `mu' (RVR')^+ mu` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadraticRoute {
    /// Eigendecomposition of `RVR'` with relative cutoff [`PINV_CUTOFF`].
    PseudoInverse,
    /// Cholesky solve of `(RVR' + H) w = mu`, `H` the hat matrix. The added
    /// projector makes the system nonsingular without touching the range
    /// of `R`, so `mu' w` is the same quadratic form.
    Subspace,
}

fn rvr(x: &DesignMatrix, variances: &[f64]) -> DMatrix<f64> {
    let r = residual_operator(x).matrix;
    let rv = DMatrix::from_fn(r.nrows(), r.ncols(), |i, j| r[(i, j)] * variances[j]);
    &rv * &r
}

pub fn quadratic_form(inputs: &EffectSizeInputs, mu: &[f64], route: QuadraticRoute) -> Result<f64> {
    let a = rvr(&inputs.x, &inputs.variances);
    let mu = DVector::from_column_slice(mu);
    let mu_norm = mu.norm();
    if mu_norm == 0.0 {
        return Ok(0.0);
    }
    match route {
        QuadraticRoute::PseudoInverse => {
            let eig = SymmetricEigen::new(a);
            let lmax = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let cut = PINV_CUTOFF * lmax;
            let coords = eig.eigenvectors.transpose() * &mu;
            let mut quad = 0.0;
            let mut outside = 0.0;
            for (c, l) in coords.iter().zip(eig.eigenvalues.iter()) {
                if *l > cut {
                    quad += c * c / l;
                } else {
                    outside += c * c;
                }
            }
            if outside.sqrt() > 1e-6 * mu_norm {
                return Err(Error::SingularQuadraticForm);
            }
            Ok(quad)
        }
        QuadraticRoute::Subspace => {
            let q = inputs.x.q();
            let system = a + q * q.transpose();
            let chol = system.cholesky().ok_or(Error::SingularQuadraticForm)?;
            let w = chol.solve(&mu);
            Ok(mu.dot(&w))
        }
    }
}

pub fn effect_size(inputs: &EffectSizeInputs) -> Result<EffectSize> {
    inputs.validate()?;
    let x = &inputs.x;
    let n = x.nrows();
    let q = x.q();
    let k = q.ncols();

    // diag(RVR')_ii = V_i (1 - 2 h_ii) + q_i' (Q' V Q) q_i
    let m = DMatrix::from_fn(k, k, |a, b| (0..n).map(|i| q[(i, a)] * inputs.variances[i] * q[(i, b)]).sum());
    let mut log_term = 0.0;
    let mut trace_term = 0.0;
    for i in 0..n {
        let qi = q.row(i).transpose();
        let h = qi.norm_squared();
        let r_ii = 1.0 - h;
        if r_ii <= 1e-12 {
            return Err(Error::LeverageOne(i));
        }
        let d_v = inputs.variances[i] * (1.0 - 2.0 * h) + (qi.transpose() * &m * &qi)[(0, 0)];
        let d_0 = inputs.sigma2 * r_ii;
        log_term += (d_v / d_0).ln();
        trace_term += d_0 / d_v;
    }

    let mu = inputs.omitted_mean();
    let mu_sq: f64 = mu.iter().map(|v| v * v).sum();
    let quad = if mu_sq == 0.0 {
        0.0
    } else if inputs.variances.iter().all(|&v| v == inputs.variances[0]) {
        // RVR' = v R and R^+ = R, with mu already in the range of R.
        mu_sq / inputs.variances[0]
    } else {
        quadratic_form(inputs, &mu, QuadraticRoute::PseudoInverse)?
    };

    let mut value = 0.5 * (log_term - n as f64 + trace_term + quad);
    if value < 0.0 && value > -1e-8 {
        value = 0.0;
    }
    let log_value = (value > 0.0).then(|| value.ln());
    Ok(EffectSize { value, log_value })
}
