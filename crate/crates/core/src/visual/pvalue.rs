use serde::{Deserialize, Serialize};

use super::EvaluationRecord;
use crate::error::{Error, Result};
use crate::fsutil::sha256_hex;
use crate::numerics::RandomStream;

pub const DEFAULT_REPLICATIONS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PValueMode {
    /// Every panel equally attractive under H0; exact.
    UniformNull,
    /// Panel attractiveness drawn from a symmetric Dirichlet(alpha); Monte Carlo.
    AlphaAdjusted,
}

impl std::str::FromStr for PValueMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" | "uniformnull" | "uniform_null" => Ok(Self::UniformNull),
            "alpha" | "alphaadjusted" | "alpha_adjusted" => Ok(Self::AlphaAdjusted),
            _ => Err(Error::InvalidArgument(format!("unknown p-value mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PValueOptions {
    pub mode: PValueMode,
    pub alpha: Option<f64>,
    pub replications: usize,
    /// Monte Carlo seed; each lineup id gets its own child stream.
    pub seed: u64,
}

impl PValueOptions {
    pub fn uniform() -> Self {
        Self { mode: PValueMode::UniformNull, alpha: None, replications: DEFAULT_REPLICATIONS, seed: 0 }
    }

    pub fn alpha_adjusted(alpha: f64, seed: u64) -> Self {
        Self { mode: PValueMode::AlphaAdjusted, alpha: Some(alpha), replications: DEFAULT_REPLICATIONS, seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisualTestResult {
    pub lineup_id: String,
    pub k: usize,
    pub c_obs: usize,
    pub p_value: f64,
    pub mode: PValueMode,
    pub alpha: Option<f64>,
    /// Monte Carlo standard error; `None` for exact modes.
    pub mc_se: Option<f64>,
    pub replications: Option<usize>,
}

/// `P(C >= c)` for a sum of independent Bernoulli(p_i), by dynamic programming.
pub fn poisson_binomial_sf(probs: &[f64], c: usize) -> f64 {
    if c == 0 {
        return 1.0;
    }
    if c > probs.len() {
        return 0.0;
    }
    // dist[j] = P(j successes so far); only counts below c are tracked, the
    // remainder is absorbed into `tail`.
    let mut dist = vec![0.0; c];
    dist[0] = 1.0;
    let mut tail = 0.0;
    for &p in probs {
        tail += dist[c - 1] * p;
        for j in (1..c).rev() {
            dist[j] = dist[j] * (1.0 - p) + dist[j - 1] * p;
        }
        dist[0] *= 1.0 - p;
    }
    tail.clamp(0.0, 1.0)
}

fn lineup_stream(seed: u64, lineup_id: &str) -> RandomStream {
    let digest = sha256_hex(lineup_id.as_bytes());
    let index = u64::from_str_radix(&digest[..16], 16).expect("hex digest");
    RandomStream::new(seed).split(index)
}

/// Whether a size-`s` weighted draw without replacement includes panel 0.
fn includes_first(weights: &[f64], total: f64, s: usize, rng: &mut RandomStream, taken: &mut Vec<bool>) -> bool {
    let m = weights.len();
    if s >= m {
        return true;
    }
    taken.iter_mut().for_each(|t| *t = false);
    let mut remaining = total;
    for _ in 0..s {
        let mut u = rng.uniform() * remaining;
        let mut pick = m - 1;
        for (j, &w) in weights.iter().enumerate() {
            if taken[j] {
                continue;
            }
            if u < w {
                pick = j;
                break;
            }
            u -= w;
            pick = j;
        }
        if pick == 0 {
            return true;
        }
        taken[pick] = true;
        remaining -= weights[pick];
    }
    false
}

/// Visual p-value for one lineup: the probability under H0 that at least
/// `c_obs` evaluations include the data panel.
pub fn visual_pvalue(
    evals: &[EvaluationRecord],
    data_position: usize,
    m: usize,
    opts: &PValueOptions,
) -> Result<VisualTestResult> {
    if evals.is_empty() {
        return Err(Error::NoEvaluations);
    }
    if data_position == 0 || data_position > m {
        return Err(Error::InvalidArgument(format!("data position {data_position} outside 1..={m}")));
    }
    let lineup_id = evals[0].lineup_id.clone();
    let k = evals.len();
    let c_obs = evals.iter().filter(|e| e.contains(data_position)).count();
    let sizes: Vec<usize> = evals.iter().map(|e| e.size().clamp(1, m)).collect();

    match opts.mode {
        PValueMode::UniformNull => {
            let probs: Vec<f64> = sizes.iter().map(|&s| s as f64 / m as f64).collect();
            Ok(VisualTestResult {
                lineup_id,
                k,
                c_obs,
                p_value: poisson_binomial_sf(&probs, c_obs),
                mode: PValueMode::UniformNull,
                alpha: None,
                mc_se: None,
                replications: None,
            })
        }
        PValueMode::AlphaAdjusted => {
            let alpha = opts.alpha.ok_or(Error::AlphaRequired)?;
            if !(alpha > 0.0 && alpha.is_finite()) {
                return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
            }
            if opts.replications == 0 {
                return Err(Error::InvalidArgument("replications must be positive".into()));
            }
            let mut rng = lineup_stream(opts.seed, &lineup_id);
            let mut weights = vec![0.0; m];
            let mut taken = vec![false; m];
            let mut hits = 0usize;
            // Panels are exchangeable under H0, so the data panel is panel 0.
            for _ in 0..opts.replications {
                let mut total = 0.0;
                for w in weights.iter_mut() {
                    *w = rng.gamma(alpha);
                    total += *w;
                }
                if total <= 0.0 {
                    // Every gamma draw underflowed (tiny alpha): one panel takes all mass.
                    weights.iter_mut().for_each(|w| *w = 0.0);
                    weights[rng.below(m)] = 1.0;
                    total = 1.0;
                }
                let mut c = 0;
                for (i, &s) in sizes.iter().enumerate() {
                    if includes_first(&weights, total, s, &mut rng, &mut taken) {
                        c += 1;
                    }
                    // Remaining evaluations cannot reach c_obs.
                    if c >= c_obs || c + (k - i - 1) < c_obs {
                        break;
                    }
                }
                if c >= c_obs {
                    hits += 1;
                }
            }
            let r = opts.replications as f64;
            let p = hits as f64 / r;
            Ok(VisualTestResult {
                lineup_id,
                k,
                c_obs,
                // P(C >= c_obs) is strictly positive; report at least one hit's worth.
                p_value: p.max(1.0 / r),
                mode: PValueMode::AlphaAdjusted,
                alpha: Some(alpha),
                mc_se: Some((p * (1.0 - p) / r).sqrt()),
                replications: Some(opts.replications),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn brute_force(probs: &[f64], c: usize) -> f64 {
        let k = probs.len();
        let mut total = 0.0;
        for mask in 0u32..(1 << k) {
            if (mask.count_ones() as usize) < c {
                continue;
            }
            let mut p = 1.0;
            for (i, &q) in probs.iter().enumerate() {
                p *= if mask & (1 << i) != 0 { q } else { 1.0 - q };
            }
            total += p;
        }
        total
    }

    fn evals(sets: &[&[u32]]) -> Vec<EvaluationRecord> {
        sets.iter()
            .enumerate()
            .map(|(i, s)| EvaluationRecord {
                lineup_id: "L".into(),
                participant_id: format!("p{i}"),
                selections: s.iter().copied().collect::<BTreeSet<_>>(),
                reason: "r".into(),
                rating: 3,
                submitted_at: String::new(),
                zero_selection: s.len() == 20,
            })
            .collect()
    }

    #[test]
    fn worked_examples() {
        let p = |sets: &[&[u32]]| visual_pvalue(&evals(sets), 1, 20, &PValueOptions::uniform()).unwrap().p_value;
        assert_eq!(p(&[&[2], &[3], &[4]]), 1.0);
        assert!((p(&[&[1], &[3], &[4]]) - (1.0 - 0.95f64.powi(3))).abs() < 1e-15);
        assert!((p(&[&[1], &[3], &[4]]) - 0.142625).abs() < 1e-12);
        assert!((p(&[&[1], &[1], &[1]]) - 1.25e-4).abs() < 1e-15);
    }

    #[test]
    fn dp_matches_enumeration() {
        let mut rng = RandomStream::new(5);
        for k in 1..=12 {
            for _ in 0..20 {
                let probs: Vec<f64> = (0..k).map(|_| (1 + rng.below(20)) as f64 / 20.0).collect();
                for c in 0..=k + 1 {
                    assert!((poisson_binomial_sf(&probs, c) - brute_force(&probs, c)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_selection_hit_leaves_p_unchanged() {
        let base = evals(&[&[1], &[5], &[1, 2]]);
        let before = visual_pvalue(&base, 1, 20, &PValueOptions::uniform()).unwrap();
        let mut more = base.clone();
        more.extend(evals(&[&(1..=20).collect::<Vec<_>>()]));
        let after = visual_pvalue(&more, 1, 20, &PValueOptions::uniform()).unwrap();
        assert_eq!(after.c_obs, before.c_obs + 1);
        assert_eq!(after.p_value, before.p_value);
    }

    #[test]
    fn errors() {
        assert!(matches!(visual_pvalue(&[], 1, 20, &PValueOptions::uniform()), Err(Error::NoEvaluations)));
        let mut opts = PValueOptions::uniform();
        opts.mode = PValueMode::AlphaAdjusted;
        assert!(matches!(visual_pvalue(&evals(&[&[1]]), 1, 20, &opts), Err(Error::AlphaRequired)));
    }

    #[test]
    fn large_alpha_approaches_uniform() {
        let e = evals(&[&[1], &[1, 4], &[3], &[7, 8, 9], &[1], &[2]]);
        let exact = visual_pvalue(&e, 1, 20, &PValueOptions::uniform()).unwrap().p_value;
        let mc = visual_pvalue(&e, 1, 20, &PValueOptions::alpha_adjusted(1e6, 3)).unwrap();
        let se = mc.mc_se.unwrap();
        assert!((mc.p_value - exact).abs() < 4.0 * se.max(1e-4), "{} vs {exact}", mc.p_value);
    }

    #[test]
    fn small_alpha_inflates_p() {
        // Concentrated attractiveness makes coincident picks likelier under H0.
        let e = evals(&[&[1], &[1], &[1], &[2], &[3]]);
        let exact = visual_pvalue(&e, 1, 20, &PValueOptions::uniform()).unwrap().p_value;
        let mut opts = PValueOptions::alpha_adjusted(0.5, 9);
        opts.replications = 20_000;
        let mc = visual_pvalue(&e, 1, 20, &opts).unwrap();
        assert!(mc.p_value > 5.0 * exact);
    }

    #[test]
    fn alpha_adjusted_is_seeded() {
        let e = evals(&[&[1], &[2, 1], &[3]]);
        let mut opts = PValueOptions::alpha_adjusted(2.0, 4);
        opts.replications = 5000;
        assert_eq!(visual_pvalue(&e, 1, 20, &opts).unwrap(), visual_pvalue(&e, 1, 20, &opts).unwrap());
    }

    #[test]
    fn null_rejection_rate_is_bounded() {
        let mut rng = RandomStream::new(77);
        let trials = 4000;
        let mut rejections = 0;
        for _ in 0..trials {
            let k = 5 + rng.below(16);
            let e: Vec<EvaluationRecord> = (0..k)
                .map(|i| {
                    let s = if rng.uniform() < 0.8 { 1 } else { 2 + rng.below(4) };
                    let mut set = BTreeSet::new();
                    while set.len() < s {
                        set.insert(1 + rng.below(20) as u32);
                    }
                    EvaluationRecord {
                        lineup_id: "N".into(),
                        participant_id: format!("p{i}"),
                        selections: set,
                        reason: "r".into(),
                        rating: 1,
                        submitted_at: String::new(),
                        zero_selection: false,
                    }
                })
                .collect();
            let pos = 1 + rng.below(20);
            if visual_pvalue(&e, pos, 20, &PValueOptions::uniform()).unwrap().p_value <= 0.05 {
                rejections += 1;
            }
        }
        assert!((rejections as f64 / trials as f64) <= 0.06);
    }
}
