use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Conventional significance levels revisited in the agreement sweep.
pub const SWEEP_LEVELS: [f64; 8] = [0.05, 0.01, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub conventional_level: f64,
    pub conventional_reject_rate: f64,
    pub visual_given_conventional_reject: Option<f64>,
    pub conventional_given_visual_reject: Option<f64>,
    /// Fraction of lineups where both tests reach the same decision.
    pub agreement: f64,
}

/// Cross-tabulation of conventional and visual decisions over lineups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementTable {
    pub level: f64,
    /// `counts[c][v]`: c = conventional rejects, v = visual rejects (0 = no, 1 = yes).
    pub counts: [[usize; 2]; 2],
    pub total: usize,
    pub conventional_reject_rate: f64,
    pub visual_reject_rate: f64,
    pub visual_given_conventional_reject: Option<f64>,
    pub visual_given_conventional_accept: Option<f64>,
    pub conventional_given_visual_reject: Option<f64>,
    pub sweep: Vec<SweepRow>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn crosstab(pairs: &[(f64, f64)], conv_level: f64, vis_level: f64) -> [[usize; 2]; 2] {
    let mut counts = [[0; 2]; 2];
    for &(c, v) in pairs {
        counts[usize::from(c < conv_level)][usize::from(v < vis_level)] += 1;
    }
    counts
}

/// Compares per-lineup conventional and visual p-values at `level`, then
/// repeats the comparison with stricter conventional levels.
pub fn agreement_report(
    conventional: &BTreeMap<String, f64>,
    visual: &BTreeMap<String, f64>,
    level: f64,
) -> Result<AgreementTable> {
    let missing: Vec<&str> = conventional
        .keys()
        .filter(|k| !visual.contains_key(*k))
        .chain(visual.keys().filter(|k| !conventional.contains_key(*k)))
        .map(String::as_str)
        .collect();
    if !missing.is_empty() {
        return Err(Error::IdMismatch(missing.join(", ")));
    }
    if conventional.is_empty() {
        return Err(Error::NoEvaluations);
    }
    let pairs: Vec<(f64, f64)> = conventional.iter().map(|(k, &c)| (c, visual[k])).collect();
    let total = pairs.len();
    let counts = crosstab(&pairs, level, level);
    let conv_rejects = counts[1][0] + counts[1][1];
    let vis_rejects = counts[0][1] + counts[1][1];

    let sweep = SWEEP_LEVELS
        .iter()
        .map(|&cl| {
            let t = crosstab(&pairs, cl, level);
            let cr = t[1][0] + t[1][1];
            SweepRow {
                conventional_level: cl,
                conventional_reject_rate: cr as f64 / total as f64,
                visual_given_conventional_reject: ratio(t[1][1], cr),
                conventional_given_visual_reject: ratio(t[1][1], t[0][1] + t[1][1]),
                agreement: (t[0][0] + t[1][1]) as f64 / total as f64,
            }
        })
        .collect();

    Ok(AgreementTable {
        level,
        counts,
        total,
        conventional_reject_rate: conv_rejects as f64 / total as f64,
        visual_reject_rate: vis_rejects as f64 / total as f64,
        visual_given_conventional_reject: ratio(counts[1][1], conv_rejects),
        visual_given_conventional_accept: ratio(counts[0][1], total - conv_rejects),
        conventional_given_visual_reject: ratio(counts[1][1], vis_rejects),
        sweep,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(v: &[(&str, f64)]) -> BTreeMap<String, f64> {
        v.iter().map(|(k, p)| (k.to_string(), *p)).collect()
    }

    #[test]
    fn strong_signal_has_no_disagreement() {
        let conv = map(&[("a", 1e-9), ("b", 1e-12), ("c", 0.0)]);
        let vis = map(&[("a", 1e-4), ("b", 0.01), ("c", 0.001)]);
        let t = agreement_report(&conv, &vis, 0.05).unwrap();
        assert_eq!(t.counts, [[0, 0], [0, 3]]);
        assert_eq!(t.total, 3);
        assert_eq!(t.visual_given_conventional_reject, Some(1.0));
        assert_eq!(t.visual_given_conventional_accept, None);
    }

    #[test]
    fn rates_and_sweep() {
        let conv = map(&[("a", 1e-6), ("b", 0.01), ("c", 0.2), ("d", 0.03)]);
        let vis = map(&[("a", 0.01), ("b", 0.3), ("c", 0.6), ("d", 0.04)]);
        let t = agreement_report(&conv, &vis, 0.05).unwrap();
        assert_eq!(t.counts.iter().flatten().sum::<usize>(), 4);
        assert_eq!(t.conventional_reject_rate, 0.75);
        assert_eq!(t.visual_reject_rate, 0.5);
        assert_eq!(t.visual_given_conventional_reject, Some(2.0 / 3.0));
        assert_eq!(t.conventional_given_visual_reject, Some(1.0));
        let strict = t.sweep.iter().find(|r| r.conventional_level == 1e-3).unwrap();
        assert_eq!(strict.conventional_reject_rate, 0.25);
        assert_eq!(strict.visual_given_conventional_reject, Some(1.0));
        assert_eq!(t.sweep[0].conventional_reject_rate, t.conventional_reject_rate);
    }

    #[test]
    fn id_mismatch() {
        let conv = map(&[("a", 0.1)]);
        let vis = map(&[("a", 0.1), ("b", 0.2)]);
        assert!(matches!(agreement_report(&conv, &vis, 0.05), Err(Error::IdMismatch(ids)) if ids == "b"));
    }
}
