use serde::{Deserialize, Serialize};

use super::EvaluationRecord;
use crate::error::{Error, Result};
use crate::numerics::special::ln_gamma;

/// Search interval for alpha.
pub const ALPHA_BOUNDS: (f64, f64) = (1e-3, 1e4);
/// Estimates at or above this are reported as approximately uniform.
const UNIFORM_THRESHOLD: f64 = 10.0;
const GRID_POINTS: usize = 141;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaEstimate {
    pub alpha: f64,
    pub log_likelihood: f64,
    pub lineups: usize,
    pub evaluations: usize,
    /// The likelihood kept increasing up to the upper search bound.
    pub at_upper_bound: bool,
    pub approximately_uniform: bool,
    /// `(ln alpha, log-likelihood)` on the search grid.
    pub profile: Vec<(f64, f64)>,
}

/// Per-panel selection counts; an evaluation selecting `s` panels adds
/// `1/s` to each of them.
fn weighted_counts(evals: &[EvaluationRecord], m: usize) -> Vec<f64> {
    let mut counts = vec![0.0; m];
    for e in evals {
        let w = 1.0 / e.size() as f64;
        for &s in &e.selections {
            if let Some(c) = counts.get_mut(s as usize - 1) {
                *c += w;
            }
        }
    }
    counts
}

fn log_likelihood(tables: &[Vec<f64>], alpha: f64) -> f64 {
    let mut ll = 0.0;
    let lg_alpha = ln_gamma(alpha);
    for counts in tables {
        let m = counts.len() as f64;
        let n: f64 = counts.iter().sum();
        ll += ln_gamma(m * alpha) - ln_gamma(n + m * alpha);
        ll += counts.iter().map(|&c| ln_gamma(c + alpha) - lg_alpha).sum::<f64>();
    }
    ll
}

/// Maximum-likelihood alpha of the symmetric Dirichlet-multinomial model
/// for panel selection counts in null lineups.
///
/// `null_lineups` holds the evaluations of each null lineup; all lineups
/// have `m` panels.
pub fn estimate_alpha(null_lineups: &[Vec<EvaluationRecord>], m: usize) -> Result<AlphaEstimate> {
    if null_lineups.len() < 2 {
        return Err(Error::InsufficientNullData(format!("{} null lineups, need at least 2", null_lineups.len())));
    }
    if let Some(small) = null_lineups.iter().find(|l| l.len() < 2) {
        return Err(Error::InsufficientNullData(format!(
            "null lineup {} has {} evaluations, need at least 2",
            small.first().map_or("?", |e| e.lineup_id.as_str()),
            small.len()
        )));
    }
    let tables: Vec<Vec<f64>> = null_lineups.iter().map(|l| weighted_counts(l, m)).collect();
    let (lo, hi) = (ALPHA_BOUNDS.0.ln(), ALPHA_BOUNDS.1.ln());
    let step = (hi - lo) / (GRID_POINTS - 1) as f64;
    let profile: Vec<(f64, f64)> = (0..GRID_POINTS)
        .map(|i| {
            let t = lo + step * i as f64;
            (t, log_likelihood(&tables, t.exp()))
        })
        .collect();
    let best = profile
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(i, _)| i)
        .expect("non-empty grid");
    if best == 0 {
        return Err(Error::NonConvergent(format!("alpha search hit the lower bound {}", ALPHA_BOUNDS.0)));
    }
    let evaluations = null_lineups.iter().map(Vec::len).sum();
    if best == GRID_POINTS - 1 {
        return Ok(AlphaEstimate {
            alpha: ALPHA_BOUNDS.1,
            log_likelihood: profile[best].1,
            lineups: null_lineups.len(),
            evaluations,
            at_upper_bound: true,
            approximately_uniform: true,
            profile,
        });
    }
    // Golden-section refinement between the neighbouring grid points.
    let f = |t: f64| log_likelihood(&tables, t.exp());
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (profile[best - 1].0, profile[best + 1].0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-10 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let t = (a + b) / 2.0;
    let alpha = t.exp();
    Ok(AlphaEstimate {
        alpha,
        log_likelihood: f(t),
        lineups: null_lineups.len(),
        evaluations,
        at_upper_bound: false,
        approximately_uniform: alpha >= UNIFORM_THRESHOLD,
        profile,
    })
}
