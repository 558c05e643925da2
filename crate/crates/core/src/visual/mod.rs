//! Human lineup evaluations and the visual test built on them.

mod alpha;
mod pvalue;

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use alpha::{estimate_alpha, AlphaEstimate, ALPHA_BOUNDS};
pub use pvalue::{
    poisson_binomial_sf, visual_pvalue, PValueMode, PValueOptions, VisualTestResult, DEFAULT_REPLICATIONS,
};

/// A submission as it arrives from a judge, before normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawEvaluation {
    pub lineup_id: String,
    pub participant_id: String,
    #[serde(default)]
    pub selections: Vec<u32>,
    #[serde(default)]
    pub reason: String,
    pub rating: u8,
    pub submitted_at: String,
}

/// A normalized evaluation. `selections` is never empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub lineup_id: String,
    pub participant_id: String,
    pub selections: BTreeSet<u32>,
    pub reason: String,
    pub rating: u8,
    pub submitted_at: String,
    /// The judge selected nothing; `selections` holds all `m` panels.
    #[serde(default)]
    pub zero_selection: bool,
}

impl EvaluationRecord {
    pub fn contains(&self, panel: usize) -> bool {
        u32::try_from(panel).is_ok_and(|p| self.selections.contains(&p))
    }

    pub fn size(&self) -> usize {
        self.selections.len()
    }
}

/// Deduplicates selections and maps the empty selection to all `m` panels.
pub fn normalize_evaluation(raw: RawEvaluation, m: usize) -> Result<EvaluationRecord> {
    let m32 = u32::try_from(m).map_err(|_| Error::InvalidArgument(format!("m = {m}")))?;
    if let Some(&bad) = raw.selections.iter().find(|&&s| s == 0 || s > m32) {
        return Err(Error::OutOfRangeSelection { selection: bad, m: m32 });
    }
    if !(1..=5).contains(&raw.rating) {
        return Err(Error::InvalidRating(raw.rating));
    }
    let zero_selection = raw.selections.is_empty();
    if !zero_selection && raw.reason.trim().is_empty() {
        return Err(Error::MissingReason);
    }
    let selections = if zero_selection { (1..=m32).collect() } else { raw.selections.into_iter().collect() };
    Ok(EvaluationRecord {
        lineup_id: raw.lineup_id,
        participant_id: raw.participant_id,
        selections,
        reason: raw.reason,
        rating: raw.rating,
        submitted_at: raw.submitted_at,
        zero_selection,
    })
}

/// Participants who found the data panel in at least one attention check.
///
/// `attention` maps attention-check lineup ids to their data positions.
/// A zero-selection contains every panel and therefore passes.
pub fn filter_participants(records: &[EvaluationRecord], attention: &BTreeMap<String, usize>) -> BTreeSet<String> {
    records
        .iter()
        .filter(|r| attention.get(&r.lineup_id).is_some_and(|&pos| r.contains(pos)))
        .map(|r| r.participant_id.clone())
        .collect()
}

/// Groups records by lineup id.
pub fn group_by_lineup(records: &[EvaluationRecord]) -> BTreeMap<String, Vec<EvaluationRecord>> {
    let mut out: BTreeMap<String, Vec<EvaluationRecord>> = BTreeMap::new();
    for r in records {
        out.entry(r.lineup_id.clone()).or_default().push(r.clone());
    }
    out
}

/// Reads a newline-delimited evaluation log.
///
/// Lines carrying a `kind` other than `"evaluation"` (study headers,
/// participant verdicts in an export) are skipped, as are blank lines.
pub fn read_evaluation_log(path: &Path) -> Result<Vec<EvaluationRecord>> {
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        match value.get("kind").and_then(|k| k.as_str()) {
            None | Some("evaluation") => {}
            Some(_) => continue,
        }
        let record: EvaluationRecord =
            serde_json::from_value(value).map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        if record.selections.is_empty() {
            return Err(Error::Parse(format!("line {}: empty selection set", lineno + 1)));
        }
        out.push(record);
    }
    Ok(out)
}

/// Appends one record to a log and flushes it to disk.
pub fn append_evaluation(path: &Path, record: &EvaluationRecord) -> Result<()> {
    let mut file = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    let mut line = serde_json::to_string(record).map_err(|e| Error::Parse(e.to_string()))?;
    line.push('\n');
    file.write_all(line.as_bytes())?;
    file.sync_data()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(selections: &[u32], reason: &str) -> RawEvaluation {
        RawEvaluation {
            lineup_id: "L1".into(),
            participant_id: "p".into(),
            selections: selections.to_vec(),
            reason: reason.into(),
            rating: 3,
            submitted_at: "2026-01-01T00:00:00Z".into(),
        }
    }

    #[test]
    fn zero_selection_means_all_panels() {
        let r = normalize_evaluation(raw(&[], ""), 20).unwrap();
        assert_eq!(r.selections, (1..=20).collect());
        assert!(r.zero_selection);
    }

    #[test]
    fn selections_are_sets() {
        assert_eq!(normalize_evaluation(raw(&[6], "x"), 20).unwrap().selections, BTreeSet::from([6]));
        assert_eq!(normalize_evaluation(raw(&[3, 3, 7], "x"), 20).unwrap().selections, BTreeSet::from([3, 7]));
    }

    #[test]
    fn rejects_bad_submissions() {
        assert!(matches!(
            normalize_evaluation(raw(&[21], "x"), 20),
            Err(Error::OutOfRangeSelection { selection: 21, m: 20 })
        ));
        assert!(matches!(normalize_evaluation(raw(&[0], "x"), 20), Err(Error::OutOfRangeSelection { .. })));
        assert!(matches!(normalize_evaluation(raw(&[4], "  "), 20), Err(Error::MissingReason)));
        let mut r = raw(&[4], "x");
        r.rating = 6;
        assert!(matches!(normalize_evaluation(r, 20), Err(Error::InvalidRating(6))));
    }

    #[test]
    fn attention_filter() {
        let mk = |p: &str, l: &str, sel: &[u32]| {
            let mut r = normalize_evaluation(raw(sel, "x"), 20).unwrap();
            r.participant_id = p.into();
            r.lineup_id = l.into();
            r
        };
        let attention = BTreeMap::from([("A1".to_string(), 17), ("A2".to_string(), 4)]);
        let records = vec![
            mk("kept", "A1", &[17]),
            mk("kept", "A2", &[1]),
            mk("failed", "A1", &[2]),
            mk("failed", "A2", &[3, 5]),
            mk("zero", "A1", &[]),
            mk("unchecked", "L9", &[1]),
        ];
        let kept = filter_participants(&records, &attention);
        assert_eq!(kept, BTreeSet::from(["kept".to_string(), "zero".to_string()]));
    }

    #[test]
    fn log_round_trip_skips_other_kinds() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.ndjson");
        std::fs::write(&path, "{\"kind\":\"study\",\"id\":\"s\"}\n\n").unwrap();
        let a = normalize_evaluation(raw(&[2, 9], "shape"), 20).unwrap();
        let b = normalize_evaluation(raw(&[], ""), 20).unwrap();
        append_evaluation(&path, &a).unwrap();
        append_evaluation(&path, &b).unwrap();
        assert_eq!(read_evaluation_log(&path).unwrap(), vec![a, b]);
    }
}
