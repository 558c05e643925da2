use serde::{Deserialize, Serialize};

use super::DecisionRecord;
use crate::error::{Error, Result};
use crate::numerics::RandomStream;

pub const NOMINAL_LEVEL: f64 = 0.05;
/// Fixed intercept `ln(0.05 / 0.95)`: predicted power at `E = 0` is the nominal level.
pub const INTERCEPT: f64 = -2.944_438_979_166_440_3;
pub const CURVE_POINTS: usize = 200;
pub const CURVE_LOG_E_RANGE: (f64, f64) = (-1.0, 6.0);

const TOLERANCE: f64 = 1e-9;
const MAX_ITERATIONS: usize = 500;

/// Standard logistic function.
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let ez = z.exp();
        ez / (1.0 + ez)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub log_e: f64,
    pub effect_size: f64,
    pub power: f64,
}

/// `P(reject | E) = logistic(INTERCEPT + beta1 * E)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub beta1: f64,
    pub intercept: f64,
    /// Inverse square root of the observed information at `beta1`.
    pub std_error: f64,
    pub records: usize,
    pub rejections: usize,
    pub curve: Vec<CurvePoint>,
    pub bootstrap_beta1: Vec<f64>,
    pub bootstrap_skipped: usize,
    pub warnings: Vec<String>,
}

impl PowerCurve {
    pub fn power_at(&self, effect_size: f64) -> f64 {
        // logistic(ln(p / (1 - p))) = p; evaluating it in floating point is off by an ulp.
        if effect_size == 0.0 {
            return NOMINAL_LEVEL;
        }
        logistic(self.intercept + self.beta1 * effect_size)
    }

    pub fn power_at_log(&self, log_e: f64) -> f64 {
        self.power_at(log_e.exp())
    }

    /// Empirical quantile of the bootstrap slopes.
    pub fn bootstrap_quantile(&self, q: f64) -> Option<f64> {
        if self.bootstrap_beta1.is_empty() {
            return None;
        }
        let mut v = self.bootstrap_beta1.clone();
        v.sort_by(f64::total_cmp);
        let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        Some(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
    }
}

struct Likelihood<'a> {
    points: &'a [(f64, bool)],
}

impl Likelihood<'_> {
    /// Score and information at `beta`.
    fn derivatives(&self, beta: f64) -> (f64, f64) {
        let mut score = 0.0;
        let mut info = 0.0;
        for &(e, y) in self.points {
            let p = logistic(INTERCEPT + beta * e);
            score += e * (f64::from(u8::from(y)) - p);
            info += e * e * p * (1.0 - p);
        }
        (score, info)
    }
}

/// Maximum-likelihood slope for `(E, reject)` pairs.
fn fit_slope(points: &[(f64, bool)]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!("{} records, need at least 2", points.len())));
    }
    if let Some(&(e, _)) = points.iter().find(|(e, _)| !(e.is_finite() && *e >= 0.0)) {
        return Err(Error::InvalidArgument(format!("effect size {e} is not a finite non-negative number")));
    }
    let rejects = points.iter().filter(|p| p.1).count();
    if rejects == 0 || rejects == points.len() {
        return Err(Error::Separation { all_reject: rejects > 0 });
    }
    let max_e = points.iter().map(|p| p.0).fold(0.0, f64::max);
    if max_e == 0.0 {
        return Err(Error::InsufficientData("every record has E = 0; the slope is not identified".into()));
    }
    // With the intercept fixed, the slope diverges exactly when one outcome
    // occurs only at E = 0.
    if points.iter().all(|&(e, y)| y || e == 0.0) {
        return Err(Error::Separation { all_reject: true });
    }
    if points.iter().all(|&(e, y)| !y || e == 0.0) {
        return Err(Error::Separation { all_reject: false });
    }
    let lik = Likelihood { points };
    // Beyond this slope every logistic term is saturated in double precision.
    let limit = 1e6 / max_e;

    // Newton from zero, safeguarded by a bracket on the (decreasing) score.
    let (mut lo, mut hi) = (-limit, limit);
    let mut beta = 0.0;
    for _ in 0..MAX_ITERATIONS {
        let (score, info) = lik.derivatives(beta);
        if score > 0.0 {
            lo = beta;
        } else {
            hi = beta;
        }
        let newton = beta + score / info;
        let next = if info > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - beta).abs() < TOLERANCE {
            if next.abs() >= limit * (1.0 - 1e-6) {
                return Err(Error::Separation { all_reject: next > 0.0 });
            }
            let (_, info) = lik.derivatives(next);
            return Ok((next, info));
        }
        beta = next;
    }
    Err(Error::NonConvergent(format!("power-curve slope after {MAX_ITERATIONS} iterations")))
}

fn points_of(records: &[DecisionRecord]) -> Vec<(f64, bool)> {
    records.iter().map(|r| (r.effect_size, r.reject)).collect()
}

fn curve_grid(beta1: f64) -> Vec<CurvePoint> {
    let (lo, hi) = CURVE_LOG_E_RANGE;
    (0..CURVE_POINTS)
        .map(|i| {
            let log_e = lo + (hi - lo) * i as f64 / (CURVE_POINTS - 1) as f64;
            let effect_size = log_e.exp();
            CurvePoint { log_e, effect_size, power: logistic(INTERCEPT + beta1 * effect_size) }
        })
        .collect()
}

/// Fits the one-parameter logistic power curve to accept/reject records.
pub fn fit_power_curve(records: &[DecisionRecord]) -> Result<PowerCurve> {
    let points = points_of(records);
    let (beta1, info) = fit_slope(&points)?;
    let mut warnings = Vec::new();
    if beta1 < 0.0 {
        warnings.push(format!("negative slope {beta1:.4}: power falls below the nominal level as E grows"));
    }
    Ok(PowerCurve {
        beta1,
        intercept: INTERCEPT,
        std_error: if info > 0.0 { info.sqrt().recip() } else { f64::INFINITY },
        records: points.len(),
        rejections: points.iter().filter(|p| p.1).count(),
        curve: curve_grid(beta1),
        bootstrap_beta1: Vec::new(),
        bootstrap_skipped: 0,
        warnings,
    })
}

pub(crate) fn bootstrap_with<I>(records: &[DecisionRecord], resamples: I) -> Result<PowerCurve>
where
    I: IntoIterator<Item = Vec<usize>>,
{
    let mut curve = fit_power_curve(records)?;
    let points = points_of(records);
    for idx in resamples {
        let sample: Vec<(f64, bool)> = idx.iter().map(|&i| points[i]).collect();
        match fit_slope(&sample) {
            Ok((b, _)) => curve.bootstrap_beta1.push(b),
            Err(Error::Separation { .. }) | Err(Error::InsufficientData(_)) => curve.bootstrap_skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if curve.bootstrap_beta1.is_empty() {
        return Err(Error::AllDegenerate);
    }
    Ok(curve)
}

/// Point fit plus `b` refits on resamples drawn with replacement.
/// Degenerate resamples are skipped and counted.
pub fn bootstrap_power(records: &[DecisionRecord], b: usize, rng: &mut RandomStream) -> Result<PowerCurve> {
    if b == 0 {
        return Err(Error::InvalidArgument("bootstrap needs at least one resample".into()));
    }
    let n = records.len();
    let resamples: Vec<Vec<usize>> = (0..b).map(|_| (0..n).map(|_| rng.below(n)).collect()).collect();
    bootstrap_with(records, resamples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::power::DecisionSource;
    use crate::simulate::{ExperimentFactors, PredictorDist};

    fn record(e: f64, reject: bool) -> DecisionRecord {
        DecisionRecord {
            id: String::new(),
            cell: 0,
            replicate: 0,
            source: DecisionSource::Visual,
            effect_size: e,
            log_e: e.ln(),
            p_value: if reject { 0.01 } else { 0.5 },
            reject,
            factors: ExperimentFactors::nonlinear(2, 1.0, 50, PredictorDist::Uniform),
        }
    }

    fn synthetic(beta: f64, n: usize, seed: u64) -> Vec<DecisionRecord> {
        let mut rng = RandomStream::new(seed);
        (0..n)
            .map(|_| {
                let e = rng.uniform_range(0.0, 6.0);
                record(e, rng.uniform() < logistic(INTERCEPT + beta * e))
            })
            .collect()
    }

    #[test]
    fn intercept_constant() {
        assert_eq!(INTERCEPT, (0.05f64 / 0.95).ln());
        assert!((logistic(INTERCEPT) - 0.05).abs() < 1e-16);
    }

    #[test]
    fn recovers_slope() {
        let curve = fit_power_curve(&synthetic(1.2, 5000, 1)).unwrap();
        assert!((curve.beta1 - 1.2).abs() <= 0.15, "{}", curve.beta1);
        assert_eq!(curve.power_at(0.0), 0.05);
        assert_eq!(curve.curve.len(), CURVE_POINTS);
        assert!(curve.warnings.is_empty());
    }

    #[test]
    fn score_vanishes_at_estimate() {
        let data = synthetic(0.7, 400, 2);
        let curve = fit_power_curve(&data).unwrap();
        let (score, info) = Likelihood { points: &points_of(&data) }.derivatives(curve.beta1);
        assert!(score.abs() < 1e-6 * info.sqrt().max(1.0));
    }

    #[test]
    fn separation() {
        let all: Vec<_> = (1..10).map(|i| record(i as f64, true)).collect();
        assert!(matches!(fit_power_curve(&all), Err(Error::Separation { all_reject: true })));
        let none: Vec<_> = (1..10).map(|i| record(i as f64, false)).collect();
        assert!(matches!(fit_power_curve(&none), Err(Error::Separation { all_reject: false })));
        // Non-rejections only at E = 0: the slope runs off to +infinity.
        let split = vec![record(0.0, false), record(0.0, false), record(1.0, true), record(2.0, true)];
        assert!(matches!(fit_power_curve(&split), Err(Error::Separation { all_reject: true })));
    }

    #[test]
    fn negative_slope_is_flagged() {
        let mut data: Vec<_> = (0..30).map(|_| record(1.0, false)).collect();
        data.push(record(1.0, true));
        let curve = fit_power_curve(&data).unwrap();
        assert!(curve.beta1 < 0.0);
        assert_eq!(curve.warnings.len(), 1);
    }

    #[test]
    fn identity_resample_reproduces_point_estimate() {
        let data = synthetic(1.2, 300, 3);
        let curve = bootstrap_with(&data, vec![(0..data.len()).collect()]).unwrap();
        assert_eq!(curve.bootstrap_beta1, vec![curve.beta1]);
    }

    #[test]
    fn bootstrap_brackets_estimate_and_matches_information() {
        let data = synthetic(1.2, 5000, 4);
        let curve = bootstrap_power(&data, 200, &mut RandomStream::new(5)).unwrap();
        assert_eq!(curve.bootstrap_beta1.len() + curve.bootstrap_skipped, 200);
        let (lo, hi) = (curve.bootstrap_quantile(0.025).unwrap(), curve.bootstrap_quantile(0.975).unwrap());
        assert!(lo <= curve.beta1 && curve.beta1 <= hi);
        let k = curve.bootstrap_beta1.len() as f64;
        let mean = curve.bootstrap_beta1.iter().sum::<f64>() / k;
        let sd = (curve.bootstrap_beta1.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt();
        assert!((sd / curve.std_error - 1.0).abs() < 0.3, "bootstrap {sd} vs information {}", curve.std_error);
    }

    #[test]
    fn all_degenerate_bootstrap() {
        let data = vec![record(0.0, false), record(1.0, true), record(2.0, false)];
        let resamples = vec![vec![1, 1, 1], vec![0, 2, 0]];
        assert!(matches!(bootstrap_with(&data, resamples), Err(Error::AllDegenerate)));
    }

    #[test]
    fn curve_is_monotone_for_positive_slope() {
        let curve = fit_power_curve(&synthetic(0.9, 500, 6)).unwrap();
        assert!(curve.curve.windows(2).all(|w| w[1].power >= w[0].power));
    }
}
