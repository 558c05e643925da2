use serde::{Deserialize, Serialize};

use super::special::{beta_reg, gamma_reg, normal_cdf, normal_sf};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tail {
    Upper,
    Lower,
    TwoSided,
}

/// Reference distributions for test statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Distribution {
    F { d1: f64, d2: f64 },
    ChiSq { df: f64 },
    Normal { tail: Tail },
}

/// Tail probability of `stat`: upper tail for F and chi-square, the
/// requested tail for the standard normal.
pub fn tail_probability(stat: f64, dist: Distribution) -> Result<f64> {
    if !stat.is_finite() {
        return Err(Error::InvalidArgument(format!("statistic {stat} is not finite")));
    }
    let p = match dist {
        Distribution::F { d1, d2 } => {
            if !(d1 > 0.0 && d2 > 0.0 && d1.is_finite() && d2.is_finite()) {
                return Err(Error::InvalidDegreesOfFreedom(format!("F({d1}, {d2})")));
            }
            if stat <= 0.0 {
                1.0
            } else {
                // P(F >= f) = I_{d2 / (d2 + d1 f)}(d2/2, d1/2)
                let z = d2 / (d2 + d1 * stat);
                beta_reg(d2 / 2.0, d1 / 2.0, z).0
            }
        }
        Distribution::ChiSq { df } => {
            if !(df > 0.0 && df.is_finite()) {
                return Err(Error::InvalidDegreesOfFreedom(format!("ChiSq({df})")));
            }
            if stat <= 0.0 {
                1.0
            } else {
                gamma_reg(df / 2.0, stat / 2.0).1
            }
        }
        Distribution::Normal { tail } => match tail {
            Tail::Upper => normal_sf(stat),
            Tail::Lower => normal_cdf(stat),
            Tail::TwoSided => (2.0 * normal_sf(stat.abs())).min(1.0),
        },
    };
    Ok(p.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chisq_one_critical_value() {
        let p = tail_probability(3.841459, Distribution::ChiSq { df: 1.0 }).unwrap();
        assert!((p - 0.05).abs() < 1e-4);
    }

    #[test]
    fn chisq_two_is_exponential() {
        for &t in &[0.1, 1.0, 5.0, 20.0, 60.0] {
            let p = tail_probability(t, Distribution::ChiSq { df: 2.0 }).unwrap();
            let exact = (-t / 2.0f64).exp();
            assert!(((p - exact) / exact).abs() < 1e-12, "t = {t}: {p} vs {exact}");
        }
    }

    #[test]
    fn zero_statistic_gives_one() {
        assert_eq!(tail_probability(0.0, Distribution::F { d1: 3.0, d2: 10.0 }).unwrap(), 1.0);
        assert_eq!(tail_probability(0.0, Distribution::ChiSq { df: 4.0 }).unwrap(), 1.0);
    }

    #[test]
    fn f_with_d1_two_closed_form() {
        // P(F(2, d2) >= f) = (1 + 2f/d2)^(-d2/2)
        for &(f, d2) in &[(0.5, 7.0), (3.0, 20.0), (40.0, 95.0)] {
            let p = tail_probability(f, Distribution::F { d1: 2.0, d2 }).unwrap();
            let exact = (1.0 + 2.0 * f / d2).powf(-d2 / 2.0);
            assert!(((p - exact) / exact).abs() < 1e-10, "{p} vs {exact}");
        }
    }

    #[test]
    fn bad_degrees_of_freedom() {
        assert!(matches!(
            tail_probability(1.0, Distribution::F { d1: 0.0, d2: 3.0 }),
            Err(Error::InvalidDegreesOfFreedom(_))
        ));
        assert!(tail_probability(1.0, Distribution::ChiSq { df: -1.0 }).is_err());
    }

    #[test]
    fn normal_tails() {
        let two = tail_probability(1.959_963_984_540_054, Distribution::Normal { tail: Tail::TwoSided }).unwrap();
        assert!((two - 0.05).abs() < 1e-12);
        let lo = tail_probability(0.0, Distribution::Normal { tail: Tail::Lower }).unwrap();
        assert!((lo - 0.5).abs() < 1e-15);
    }
}
