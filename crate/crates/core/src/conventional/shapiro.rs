//! Shapiro-Wilk W with Royston's (1995) coefficient and p-value
//! approximations, following algorithm AS R94.

use std::collections::BTreeMap;

use super::{TestKind, TestResult};
use crate::error::{Error, Result};
use crate::numerics::special::{normal_quantile, normal_sf};

const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056];
const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
const C3: [f64; 4] = [0.544, -0.39978, 0.025054, -6.714e-4];
const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];
const G: [f64; 2] = [-2.273, 0.459];

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

/// The antisymmetric weights `a_1..a_n` (ascending order statistics).
pub fn shapiro_wilk_coefficients(n: usize) -> Result<Vec<f64>> {
    if !(3..=5000).contains(&n) {
        return Err(Error::SampleSizeOutOfRange(n));
    }
    let half = n / 2;
    let mut upper = vec![0.0; half];
    if n == 3 {
        upper[0] = std::f64::consts::FRAC_1_SQRT_2;
    } else {
        let an25 = n as f64 + 0.25;
        let m: Vec<f64> = (1..=half)
            .map(|i| normal_quantile((i as f64 - 0.375) / an25))
            .collect();
        let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
        let ssumm2 = summ2.sqrt();
        let rsn = 1.0 / (n as f64).sqrt();
        let a1 = poly(&C1, rsn) - m[0] / ssumm2;
        let (first, fac) = if n > 5 {
            let a2 = -m[1] / ssumm2 + poly(&C2, rsn);
            let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1])
                / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2))
                .sqrt();
            upper[1] = a2;
            (2, fac)
        } else {
            let fac = ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt();
            (1, fac)
        };
        upper[0] = a1;
        for i in first..half {
            upper[i] = -m[i] / fac;
        }
    }
    // upper[i] weights the (n - i)-th order statistic; mirror with sign.
    let mut a = vec![0.0; n];
    for (i, &w) in upper.iter().enumerate() {
        a[n - 1 - i] = w;
        a[i] = -w;
    }
    Ok(a)
}

/// Shapiro-Wilk normality test of `residuals`.
pub fn sw_test(residuals: &[f64]) -> Result<TestResult> {
    let n = residuals.len();
    let a = shapiro_wilk_coefficients(n)?;
    let mut x = residuals.to_vec();
    x.sort_by(f64::total_cmp);
    let range = x[n - 1] - x[0];
    if !(range > 1e-19 * x[n - 1].abs().max(x[0].abs()).max(f64::MIN_POSITIVE)) {
        return Err(Error::ZeroVariance);
    }
    // W is the squared correlation between the weights and the ordered
    // sample; computing it on range-scaled values avoids overflow.
    let xs: Vec<f64> = x.iter().map(|v| v / range).collect();
    let mean_x = xs.iter().sum::<f64>() / n as f64;
    let mean_a = a.iter().sum::<f64>() / n as f64;
    let (mut ssa, mut ssx, mut sax) = (0.0, 0.0, 0.0);
    for (ai, xi) in a.iter().zip(&xs) {
        let da = ai - mean_a;
        let dx = xi - mean_x;
        ssa += da * da;
        ssx += dx * dx;
        sax += da * dx;
    }
    let ssassx = (ssa * ssx).sqrt();
    let w1 = (ssassx - sax) * (ssassx + sax) / (ssa * ssx);
    let w = 1.0 - w1;
    let p = sw_p_value(n, w, w1);
    let mut parameters = BTreeMap::new();
    parameters.insert("n".into(), n.to_string());
    Ok(TestResult { test: TestKind::Sw, statistic: w, df: Vec::new(), p_value: p.clamp(0.0, 1.0), parameters })
}

fn sw_p_value(n: usize, w: f64, w1: f64) -> f64 {
    if n == 3 {
        const PI6: f64 = 6.0 / std::f64::consts::PI;
        const STQR: f64 = std::f64::consts::FRAC_PI_3;
        return (PI6 * (w.sqrt().asin() - STQR)).max(0.0);
    }
    let an = n as f64;
    let mut y = w1.ln();
    let (m, s) = if n <= 11 {
        let gamma = poly(&G, an);
        if y >= gamma {
            return 1e-99;
        }
        y = -(gamma - y).ln();
        (poly(&C3, an), poly(&C4, an).exp())
    } else {
        let xx = an.ln();
        (poly(&C5, xx), poly(&C6, xx).exp())
    };
    normal_sf((y - m) / s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RandomStream;

    #[test]
    fn coefficients_are_unit_norm_and_antisymmetric() {
        for n in [3, 4, 5, 6, 11, 12, 50, 300, 5000] {
            let a = shapiro_wilk_coefficients(n).unwrap();
            let norm: f64 = a.iter().map(|v| v * v).sum();
            assert!((norm - 1.0).abs() < 1e-3, "n = {n}: {norm}");
            for i in 0..n {
                assert!((a[i] + a[n - 1 - i]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn size_limits() {
        assert!(matches!(sw_test(&[1.0, 2.0]), Err(Error::SampleSizeOutOfRange(2))));
        assert!(matches!(sw_test(&vec![0.0; 5001]), Err(Error::SampleSizeOutOfRange(5001))));
        assert!(matches!(sw_test(&[2.0; 10]), Err(Error::ZeroVariance)));
    }

    #[test]
    fn affine_invariance() {
        let mut rng = RandomStream::new(3);
        let x: Vec<f64> = (0..40).map(|_| rng.normal()).collect();
        let y: Vec<f64> = x.iter().map(|v| 5.0 + 2.5 * v).collect();
        let a = sw_test(&x).unwrap();
        let b = sw_test(&y).unwrap();
        assert!((a.statistic - b.statistic).abs() < 1e-12);
        assert!((a.p_value - b.p_value).abs() < 1e-10);
        assert!(a.statistic > 0.0 && a.statistic <= 1.0);
    }

    #[test]
    fn skewed_sample_is_rejected() {
        let mut rng = RandomStream::new(4);
        let x: Vec<f64> = (0..300).map(|_| rng.normal().exp()).collect();
        assert!(sw_test(&x).unwrap().p_value < 1e-3);
    }

    #[test]
    fn null_calibration_n300() {
        let mut rng = RandomStream::new(5);
        let mut rejects = 0;
        for _ in 0..500 {
            let x: Vec<f64> = (0..300).map(|_| rng.normal()).collect();
            if sw_test(&x).unwrap().p_value < 0.05 {
                rejects += 1;
            }
        }
        let rate = rejects as f64 / 500.0;
        assert!((0.03..=0.07).contains(&rate), "rate {rate}");
    }
}
