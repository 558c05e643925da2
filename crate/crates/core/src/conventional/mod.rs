//! Conventional residual tests: Ramsey's RESET, Breusch-Pagan and
//! Shapiro-Wilk.

mod shapiro;

pub use shapiro::{shapiro_wilk_coefficients, sw_test};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ols_fit, tail_probability, DesignMatrix, Distribution, OlsFit};

/// RESET power recommended by Ramsey and used as the default.
pub const DEFAULT_RESET_POWER: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TestKind {
    #[serde(rename = "RESET")]
    Reset,
    #[serde(rename = "BP")]
    Bp,
    #[serde(rename = "SW")]
    Sw,
}

impl TestKind {
    pub const ALL: [TestKind; 3] = [TestKind::Reset, TestKind::Bp, TestKind::Sw];

    pub fn name(self) -> &'static str {
        match self {
            TestKind::Reset => "RESET",
            TestKind::Bp => "BP",
            TestKind::Sw => "SW",
        }
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "RESET" => Ok(TestKind::Reset),
            "BP" => Ok(TestKind::Bp),
            "SW" => Ok(TestKind::Sw),
            _ => Err(Error::InvalidArgument(format!("unknown test `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub test: TestKind,
    pub statistic: f64,
    /// `[d1, d2]` for F statistics, `[df]` for chi-square, empty for SW.
    pub df: Vec<f64>,
    pub p_value: f64,
    pub parameters: BTreeMap<String, String>,
}

impl TestResult {
    pub fn df_label(&self) -> String {
        self.df.iter().map(|d| format!("{d}")).collect::<Vec<_>>().join(",")
    }
}

/// An auxiliary least-squares regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxiliaryFit {
    pub coefficients: Vec<f64>,
    pub rss: f64,
    pub r_squared: f64,
    pub residual_variance: f64,
}

pub fn auxiliary_fit(design: &DesignMatrix, response: &[f64]) -> Result<AuxiliaryFit> {
    let fit = ols_fit(design, response)?;
    let n = response.len() as f64;
    let mean = response.iter().sum::<f64>() / n;
    let tss: f64 = response.iter().map(|v| (v - mean).powi(2)).sum();
    let r_squared = if tss > 0.0 { (1.0 - fit.rss / tss).clamp(0.0, 1.0) } else { 0.0 };
    Ok(AuxiliaryFit {
        coefficients: fit.coefficients,
        rss: fit.rss,
        r_squared,
        residual_variance: fit.rss / fit.df_residual as f64,
    })
}

/// Powers 2..=`power_max` of the standardized fitted values. Together with
/// an intercept and the fitted values themselves these span the same space
/// as the raw powers, so the F test is unchanged.
fn fitted_powers(fitted: &[f64], response: &[f64], power_max: u32) -> Result<Vec<Vec<f64>>> {
    let n = fitted.len() as f64;
    let mean = fitted.iter().sum::<f64>() / n;
    let sd = (fitted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let scale = response.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(sd > 1e-12 * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::ConstantFitted);
    }
    let z: Vec<f64> = fitted.iter().map(|v| (v - mean) / sd).collect();
    Ok((2..=power_max as i32)
        .map(|p| z.iter().map(|v| v.powi(p)).collect())
        .collect())
}

/// Ramsey RESET: F test on the powers 2..=`power_max` of the fitted values
/// added to the original design.
pub fn reset_test(fit: &OlsFit, x: &DesignMatrix, power_max: u32) -> Result<TestResult> {
    if power_max < 2 {
        return Err(Error::InvalidArgument(format!("RESET power must be >= 2, got {power_max}")));
    }
    let n = x.nrows();
    let k = x.ncols();
    let q = (power_max - 1) as usize;
    if n <= k + q {
        return Err(Error::InsufficientData(format!(
            "RESET with power {power_max} needs n > {}, got {n}",
            k + q
        )));
    }
    let y: Vec<f64> = fit.fitted.iter().zip(&fit.residuals).map(|(f, e)| f + e).collect();
    let extra = fitted_powers(&fit.fitted, &y, power_max)?;
    let augmented = x.augment(&extra).map_err(|e| match e {
        Error::RankDeficient { .. } => Error::ConstantFitted,
        other => other,
    })?;
    let full = ols_fit(&augmented, &y)?;
    let d2 = (n - k - q) as f64;
    if !(full.rss > 0.0) {
        return Err(Error::InsufficientData("augmented RESET model fits exactly".into()));
    }
    let stat = ((fit.rss - full.rss).max(0.0) / q as f64) / (full.rss / d2);
    let p = tail_probability(stat, Distribution::F { d1: q as f64, d2 })?;
    let mut parameters = BTreeMap::new();
    parameters.insert("power".into(), power_max.to_string());
    Ok(TestResult { test: TestKind::Reset, statistic: stat, df: vec![q as f64, d2], p_value: p, parameters })
}

/// Regressors of the Breusch-Pagan auxiliary regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BpAuxiliary {
    /// The original predictors.
    Linear,
    /// The original predictors and their squares.
    Quadratic,
}

impl std::str::FromStr for BpAuxiliary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(BpAuxiliary::Linear),
            "quadratic" => Ok(BpAuxiliary::Quadratic),
            _ => Err(Error::InvalidArgument(format!("unknown BP auxiliary design `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BpOptions {
    /// Koenker's studentized statistic `n R^2` rather than `ESS / 2`.
    pub studentized: bool,
    pub auxiliary: BpAuxiliary,
}

impl Default for BpOptions {
    fn default() -> Self {
        Self { studentized: true, auxiliary: BpAuxiliary::Quadratic }
    }
}

fn bp_design(x: &DesignMatrix, auxiliary: BpAuxiliary) -> Result<DesignMatrix> {
    match auxiliary {
        BpAuxiliary::Linear => Ok(x.clone()),
        BpAuxiliary::Quadratic => {
            let m = x.matrix();
            let squares: Vec<Vec<f64>> = (1..m.ncols())
                .map(|j| m.column(j).iter().map(|v| v * v).collect())
                .collect();
            // A two-point predictor has a constant square; fall back.
            match x.augment(&squares) {
                Ok(d) => Ok(d),
                Err(Error::RankDeficient { .. }) => Ok(x.clone()),
                Err(e) => Err(e),
            }
        }
    }
}

/// Breusch-Pagan test with default options (studentized).
pub fn bp_test(fit: &OlsFit, x: &DesignMatrix, studentized: bool) -> Result<TestResult> {
    bp_test_with(fit, x, BpOptions { studentized, ..BpOptions::default() })
}

pub fn bp_test_with(fit: &OlsFit, x: &DesignMatrix, opts: BpOptions) -> Result<TestResult> {
    let n = x.nrows();
    let aux_design = bp_design(x, opts.auxiliary)?;
    let p = aux_design.ncols();
    if n <= p {
        return Err(Error::InsufficientData(format!("BP needs n > {p}, got {n}")));
    }
    let sigma2 = fit.rss / n as f64;
    if !(sigma2 > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let sq: Vec<f64> = fit.residuals.iter().map(|e| e * e).collect();
    let (stat, aux) = if opts.studentized {
        let aux = auxiliary_fit(&aux_design, &sq)?;
        (n as f64 * aux.r_squared, aux)
    } else {
        let g: Vec<f64> = sq.iter().map(|v| v / sigma2).collect();
        let aux = auxiliary_fit(&aux_design, &g)?;
        let mean = g.iter().sum::<f64>() / n as f64;
        let tss: f64 = g.iter().map(|v| (v - mean).powi(2)).sum();
        ((tss - aux.rss).max(0.0) / 2.0, aux)
    };
    let df = (p - 1) as f64;
    let p_value = tail_probability(stat, Distribution::ChiSq { df })?;
    let mut parameters = BTreeMap::new();
    parameters.insert("studentized".into(), opts.studentized.to_string());
    parameters.insert(
        "auxiliary".into(),
        match opts.auxiliary {
            BpAuxiliary::Linear => "linear".into(),
            BpAuxiliary::Quadratic => "quadratic".into(),
        },
    );
    parameters.insert("aux_r_squared".into(), format!("{:?}", aux.r_squared));
    Ok(TestResult { test: TestKind::Bp, statistic: stat, df: vec![df], p_value, parameters })
}

/// Options for [`test_battery_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatteryOptions {
    pub reset_power: u32,
    pub bp: BpOptions,
}

impl Default for BatteryOptions {
    fn default() -> Self {
        Self { reset_power: DEFAULT_RESET_POWER, bp: BpOptions::default() }
    }
}

/// RESET, BP and SW in that order; each entry fails independently.
pub fn test_battery(fit: &OlsFit, x: &DesignMatrix) -> Vec<(TestKind, Result<TestResult>)> {
    test_battery_with(fit, x, BatteryOptions::default())
}

pub fn test_battery_with(fit: &OlsFit, x: &DesignMatrix, opts: BatteryOptions) -> Vec<(TestKind, Result<TestResult>)> {
    vec![
        (TestKind::Reset, reset_test(fit, x, opts.reset_power)),
        (TestKind::Bp, bp_test_with(fit, x, opts.bp)),
        (TestKind::Sw, sw_test(&fit.residuals)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RandomStream;
    use crate::simulate::{sample_predictor, PredictorDist};

    fn linear_data(seed: u64, n: usize) -> (DesignMatrix, OlsFit) {
        let mut rng = RandomStream::new(seed);
        let x = sample_predictor(PredictorDist::Uniform, n, &mut rng).unwrap();
        let y: Vec<f64> = x.iter().map(|v| v + rng.normal()).collect();
        let d = DesignMatrix::simple(&x).unwrap();
        let fit = ols_fit(&d, &y).unwrap();
        (d, fit)
    }

    #[test]
    fn reset_invariant_to_power_standardization() {
        let (d, fit) = linear_data(4, 80);
        let ours = reset_test(&fit, &d, 4).unwrap();
        // Raw powers of the fitted values.
        let raw: Vec<Vec<f64>> = (2..=4).map(|p| fit.fitted.iter().map(|v| v.powi(p)).collect()).collect();
        let y: Vec<f64> = fit.fitted.iter().zip(&fit.residuals).map(|(f, e)| f + e).collect();
        let full = ols_fit(&d.augment(&raw).unwrap(), &y).unwrap();
        let f = ((fit.rss - full.rss) / 3.0) / (full.rss / 75.0);
        assert!((ours.statistic - f).abs() < 1e-8 * f.max(1.0));
        assert_eq!(ours.df, vec![3.0, 75.0]);
    }

    #[test]
    fn reset_rejects_insufficient_df() {
        let x = [0.1, 0.5, 0.7, 0.9];
        let y = [1.0, 0.0, 2.0, 1.0];
        let d = DesignMatrix::simple(&x).unwrap();
        let fit = ols_fit(&d, &y).unwrap();
        let battery = test_battery(&fit, &d);
        assert!(matches!(battery[0].1, Err(Error::InsufficientData(_))));
        assert!(battery[1].1.is_ok());
        assert!(battery[2].1.is_ok());
    }

    #[test]
    fn reset_constant_fitted() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
        let y = [1.0, -1.0, 1.0, -1.0, -1.0, 1.0, -1.0, 1.0];
        let d = DesignMatrix::simple(&x).unwrap();
        let fit = ols_fit(&d, &y).unwrap();
        assert!(matches!(reset_test(&fit, &d, 4), Err(Error::ConstantFitted)));
    }

    #[test]
    fn bp_scale_invariance() {
        let (d, fit) = linear_data(6, 60);
        let scaled = OlsFit {
            residuals: fit.residuals.iter().map(|e| 3.7 * e).collect(),
            rss: fit.rss * 3.7 * 3.7,
            ..fit.clone()
        };
        for studentized in [true, false] {
            let a = bp_test(&fit, &d, studentized).unwrap();
            let b = bp_test(&scaled, &d, studentized).unwrap();
            assert!((a.statistic - b.statistic).abs() < 1e-9 * a.statistic.max(1.0));
            assert!((a.p_value - b.p_value).abs() < 1e-12);
        }
    }

    #[test]
    fn bp_permutation_invariance() {
        let mut rng = RandomStream::new(8);
        let x = sample_predictor(PredictorDist::Uniform, 40, &mut rng).unwrap();
        let y: Vec<f64> = x.iter().map(|v| v + (1.0 + v.abs()) * rng.normal()).collect();
        let stat = |x: &[f64], y: &[f64]| {
            let d = DesignMatrix::simple(x).unwrap();
            bp_test(&ols_fit(&d, y).unwrap(), &d, true).unwrap().statistic
        };
        let a = stat(&x, &y);
        let xr: Vec<f64> = x.iter().rev().copied().collect();
        let yr: Vec<f64> = y.iter().rev().copied().collect();
        assert!((a - stat(&xr, &yr)).abs() < 1e-9 * a.max(1.0));
    }

    #[test]
    fn bp_linear_degrees_of_freedom() {
        let (d, fit) = linear_data(9, 50);
        let lin = bp_test_with(&fit, &d, BpOptions { studentized: true, auxiliary: BpAuxiliary::Linear }).unwrap();
        assert_eq!(lin.df, vec![1.0]);
        let quad = bp_test(&fit, &d, true).unwrap();
        assert_eq!(quad.df, vec![2.0]);
    }

    #[test]
    fn bp_on_two_point_predictor_uses_linear_design() {
        let mut rng = RandomStream::new(10);
        let x = sample_predictor(PredictorDist::Discrete, 50, &mut rng).unwrap();
        let y: Vec<f64> = x.iter().map(|v| v + rng.normal()).collect();
        let d = DesignMatrix::simple(&x).unwrap();
        let r = bp_test(&ols_fit(&d, &y).unwrap(), &d, true).unwrap();
        assert_eq!(r.df, vec![1.0]);
    }

    #[test]
    fn reset_null_calibration_n300() {
        let mut rejects = 0;
        for s in 0..500 {
            let (d, fit) = linear_data(1000 + s, 300);
            if reset_test(&fit, &d, 4).unwrap().p_value < 0.05 {
                rejects += 1;
            }
        }
        let rate = rejects as f64 / 500.0;
        assert!((0.03..=0.07).contains(&rate), "rate {rate}");
    }

    #[test]
    fn bp_null_calibration() {
        let mut rejects = 0;
        for s in 0..500 {
            let (d, fit) = linear_data(5000 + s, 300);
            if bp_test(&fit, &d, true).unwrap().p_value < 0.05 {
                rejects += 1;
            }
        }
        let rate = rejects as f64 / 500.0;
        assert!((0.03..=0.07).contains(&rate), "rate {rate}");
    }
}
