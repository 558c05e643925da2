//! Study state: configuration, assignment ledger and evaluation log.
//!
//! Everything here is synchronous; the HTTP layer serializes access to a
//! study through one mutex, which makes each study log single-writer.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::http::StatusCode;
use serde::{Deserialize, Serialize};
use vislineup::fsutil::{sha256_hex, write_atomic};
use vislineup::lineup::{load_bundle, read_panel_svgs};
use vislineup::numerics::RandomStream;
use vislineup::visual::{
    filter_participants, normalize_evaluation, visual_pvalue, EvaluationRecord, PValueMode, PValueOptions,
    RawEvaluation, VisualTestResult, DEFAULT_REPLICATIONS,
};

use crate::error::ApiError;

pub const STUDY_FILE: &str = "study.json";
pub const ASSIGNMENTS_FILE: &str = "assignments.jsonl";
pub const EVALUATIONS_FILE: &str = "evaluations.jsonl";

pub const DEFAULT_BLOCK_SIZE: usize = 20;
pub const DEFAULT_CHECKS_PER_BLOCK: usize = 2;
pub const DEFAULT_TARGET: usize = 11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StudyState {
    Open,
    Closed,
}

/// A bundle reference in a study request: a bare id or an id with its own target.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum BundleRef {
    Id(String),
    WithTarget { id: String, target: usize },
}

impl BundleRef {
    fn id(&self) -> &str {
        match self {
            BundleRef::Id(id) | BundleRef::WithTarget { id, .. } => id,
        }
    }
}

/// Body of `POST /api/studies`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyRequest {
    #[serde(default)]
    pub id: Option<String>,
    pub bundles: Vec<BundleRef>,
    #[serde(default)]
    pub attention_checks: Vec<String>,
    #[serde(default)]
    pub target_evaluations: Option<usize>,
    #[serde(default)]
    pub block_size: Option<usize>,
    #[serde(default)]
    pub checks_per_block: Option<usize>,
    /// Enables alpha-adjusted p-values.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub mc_seed: Option<u64>,
}

/// One lineup of a study. `data_position` never leaves the server unless revealed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyLineup {
    pub id: String,
    pub m: usize,
    pub target: usize,
    pub attention_check: bool,
    pub data_position: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Study {
    pub id: String,
    pub state: StudyState,
    pub lineups: Vec<StudyLineup>,
    pub block_size: usize,
    pub checks_per_block: usize,
    pub alpha: Option<f64>,
    pub mc_seed: u64,
    pub created_at: String,
}

impl Study {
    fn lineup(&self, id: &str) -> Option<&StudyLineup> {
        self.lineups.iter().find(|l| l.id == id)
    }

    fn attention_positions(&self) -> BTreeMap<String, usize> {
        self.lineups.iter().filter(|l| l.attention_check).map(|l| (l.id.clone(), l.data_position)).collect()
    }

    fn has_attention_checks(&self) -> bool {
        self.lineups.iter().any(|l| l.attention_check)
    }

    /// Lineups shown to one participant: attention checks plus regular lineups.
    fn block_len(&self) -> (usize, usize) {
        let checks = self.lineups.iter().filter(|l| l.attention_check).count();
        let regular = self.lineups.len() - checks;
        let c = self.checks_per_block.min(checks).min(self.block_size);
        let r = (self.block_size - c).min(regular);
        (c + r, c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub participant_id: String,
    pub lineup_id: String,
    pub assignment_token: String,
    pub slot: usize,
    pub assigned_at: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StoredEvaluation {
    #[serde(flatten)]
    record: EvaluationRecord,
    assignment_token: String,
}

/// Body of `POST /api/studies/{id}/evaluations`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Submission {
    pub participant_id: String,
    pub lineup_id: String,
    pub assignment_token: String,
    #[serde(default)]
    pub selections: Vec<u32>,
    #[serde(default)]
    pub reason: String,
    pub rating: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Progress {
    pub completed: usize,
    pub total: usize,
}

/// What a participant sees. Carries no secret fields.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum NextResponse {
    Lineup {
        lineup_id: String,
        m: usize,
        panels: Arc<Vec<String>>,
        assignment_token: String,
        progress: Progress,
    },
    Done {
        progress: Progress,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineupResult {
    #[serde(flatten)]
    pub result: VisualTestResult,
    pub target: usize,
    pub target_met: bool,
    pub attention_filter: bool,
    pub revealed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_position: Option<usize>,
}

#[derive(Serialize)]
struct ExportStudy<'a> {
    kind: &'static str,
    id: &'a str,
    state: StudyState,
    block_size: usize,
    checks_per_block: usize,
    alpha: Option<f64>,
    mc_seed: u64,
    created_at: &'a str,
    lineups: Vec<ExportLineup<'a>>,
}

#[derive(Serialize)]
struct ExportLineup<'a> {
    id: &'a str,
    m: usize,
    target: usize,
    attention_check: bool,
}

#[derive(Serialize)]
struct ExportEvaluation<'a> {
    kind: &'static str,
    #[serde(flatten)]
    record: &'a EvaluationRecord,
    attention_check: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    attention_passed: Option<bool>,
}

#[derive(Serialize)]
struct ExportParticipant<'a> {
    kind: &'static str,
    participant_id: &'a str,
    evaluations: usize,
    attention_checks: usize,
    attention_passed: usize,
    kept: bool,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn conflict(code: &'static str, message: impl Into<String>) -> ApiError {
    ApiError::new(StatusCode::CONFLICT, code, message)
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

/// Reads a JSON-lines file, tolerating a torn final line from a crash.
fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, ApiError> {
    let file = match std::fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(ApiError::io(e)),
    };
    let lines: Vec<String> = BufReader::new(file).lines().collect::<Result<_, _>>().map_err(ApiError::io)?;
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(v) => out.push(v),
            Err(_) if i + 1 == lines.len() => break,
            Err(e) => {
                return Err(ApiError::config(format!("{}:{}: {e}", path.display(), i + 1)));
            }
        }
    }
    Ok(out)
}

fn append_jsonl<T: Serialize>(path: &Path, value: &T) -> Result<(), ApiError> {
    let mut line = serde_json::to_vec(value).map_err(|e| ApiError::config(e.to_string()))?;
    line.push(b'\n');
    let mut file = std::fs::OpenOptions::new().create(true).append(true).open(path).map_err(ApiError::io)?;
    file.write_all(&line).map_err(ApiError::io)?;
    file.sync_data().map_err(ApiError::io)
}

/// A study plus its replayed logs.
#[derive(Debug)]
pub struct StudyData {
    pub study: Study,
    dir: PathBuf,
    panels: HashMap<String, Arc<Vec<String>>>,
    assignments: Vec<Assignment>,
    evaluations: Vec<StoredEvaluation>,
    /// Assignment indices per participant, in order.
    by_participant: HashMap<String, Vec<usize>>,
    answered: HashSet<String>,
    /// Assignments per lineup, used to balance load.
    load: HashMap<String, usize>,
}

impl StudyData {
    /// Validates a request against the bundle store and persists the new study.
    pub fn create(request: StudyRequest, bundles_dir: &Path, data_dir: &Path) -> Result<Self, ApiError> {
        let id = match &request.id {
            Some(id) if !valid_id(id) => {
                return Err(ApiError::bad_request(format!("study id {id:?} must be 1-128 of [A-Za-z0-9_-]")));
            }
            Some(id) => id.clone(),
            None => format!("S{}", &uuid::Uuid::new_v4().simple().to_string()[..12]),
        };
        if request.bundles.is_empty() {
            return Err(ApiError::bad_request("a study needs at least one bundle"));
        }
        let mut seen = BTreeSet::new();
        let refs = request.bundles.iter().map(|b| {
            let target = match b {
                BundleRef::WithTarget { target, .. } => Some(*target),
                BundleRef::Id(_) => None,
            };
            (b.id(), target, false)
        });
        let checks = request.attention_checks.iter().map(|id| (id.as_str(), None, true));
        let default_target = request.target_evaluations.unwrap_or(DEFAULT_TARGET);
        let mut lineups = Vec::new();
        let mut panels = HashMap::new();
        for (bundle_id, target, attention) in refs.chain(checks) {
            if !seen.insert(bundle_id.to_string()) {
                return Err(ApiError::new(
                    StatusCode::BAD_REQUEST,
                    "DUPLICATE_BUNDLE",
                    format!("bundle {bundle_id:?} listed twice"),
                ));
            }
            let dir = bundles_dir.join(bundle_id);
            if !valid_id(bundle_id) || !dir.join(vislineup::lineup::BUNDLE_MANIFEST).is_file() {
                return Err(ApiError::new(
                    StatusCode::UNPROCESSABLE_ENTITY,
                    "MISSING_BUNDLE",
                    format!("no bundle {bundle_id:?}"),
                ));
            }
            let bundle = load_bundle(&dir)?;
            if bundle.id != bundle_id {
                return Err(ApiError::new(
                    StatusCode::UNPROCESSABLE_ENTITY,
                    "MISSING_BUNDLE",
                    format!("directory {bundle_id:?} holds bundle {:?}", bundle.id),
                ));
            }
            panels.insert(bundle.id.clone(), Arc::new(read_panel_svgs(&dir, bundle.m)?));
            let target = target.unwrap_or(default_target);
            lineups.push(StudyLineup {
                id: bundle.id,
                m: bundle.m,
                target,
                attention_check: attention || bundle.attention_check,
                data_position: bundle.data_position,
            });
        }
        let block_size = request.block_size.unwrap_or(DEFAULT_BLOCK_SIZE);
        if block_size == 0 {
            return Err(ApiError::bad_request("block_size must be positive"));
        }
        if let Some(a) = request.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(ApiError::bad_request(format!("alpha must be positive, got {a}")));
            }
        }
        let study = Study {
            id,
            state: StudyState::Open,
            lineups,
            block_size,
            checks_per_block: request.checks_per_block.unwrap_or(DEFAULT_CHECKS_PER_BLOCK),
            alpha: request.alpha,
            mc_seed: request.mc_seed.unwrap_or(0),
            created_at: now(),
        };
        let dir = data_dir.join(&study.id);
        if dir.join(STUDY_FILE).exists() {
            return Err(conflict("STUDY_EXISTS", format!("study {:?} already exists", study.id)));
        }
        std::fs::create_dir_all(&dir).map_err(ApiError::io)?;
        let data = Self::from_parts(study, dir, panels, Vec::new(), Vec::new());
        data.write_manifest()?;
        Ok(data)
    }

    /// Reloads a study directory, replaying its logs.
    pub fn open(dir: &Path, bundles_dir: &Path) -> Result<Self, ApiError> {
        let text = std::fs::read_to_string(dir.join(STUDY_FILE)).map_err(ApiError::io)?;
        let study: Study = serde_json::from_str(&text).map_err(|e| ApiError::config(e.to_string()))?;
        let mut panels = HashMap::new();
        for l in &study.lineups {
            panels.insert(l.id.clone(), Arc::new(read_panel_svgs(&bundles_dir.join(&l.id), l.m)?));
        }
        let assignments = read_jsonl(&dir.join(ASSIGNMENTS_FILE))?;
        let evaluations = read_jsonl(&dir.join(EVALUATIONS_FILE))?;
        Ok(Self::from_parts(study, dir.to_path_buf(), panels, assignments, evaluations))
    }

    fn from_parts(
        study: Study,
        dir: PathBuf,
        panels: HashMap<String, Arc<Vec<String>>>,
        assignments: Vec<Assignment>,
        evaluations: Vec<StoredEvaluation>,
    ) -> Self {
        let mut data = Self {
            study,
            dir,
            panels,
            assignments: Vec::new(),
            evaluations: Vec::new(),
            by_participant: HashMap::new(),
            answered: HashSet::new(),
            load: HashMap::new(),
        };
        for a in assignments {
            data.index_assignment(a);
        }
        for e in evaluations {
            data.answered.insert(e.assignment_token.clone());
            data.evaluations.push(e);
        }
        data
    }

    fn index_assignment(&mut self, a: Assignment) {
        *self.load.entry(a.lineup_id.clone()).or_default() += 1;
        self.by_participant.entry(a.participant_id.clone()).or_default().push(self.assignments.len());
        self.assignments.push(a);
    }

    fn write_manifest(&self) -> Result<(), ApiError> {
        let text = serde_json::to_string_pretty(&self.study).map_err(|e| ApiError::config(e.to_string()))?;
        Ok(write_atomic(&self.dir.join(STUDY_FILE), format!("{text}\n").as_bytes())?)
    }

    pub fn close(&mut self) -> Result<(), ApiError> {
        self.study.state = StudyState::Closed;
        self.write_manifest()
    }

    fn progress(&self, participant: &str) -> Progress {
        let completed = self
            .by_participant
            .get(participant)
            .map_or(0, |v| v.iter().filter(|&&i| self.answered.contains(&self.assignments[i].assignment_token)).count());
        Progress { completed, total: self.study.block_len().0 }
    }

    fn payload(&self, a: &Assignment) -> NextResponse {
        let lineup = self.study.lineup(&a.lineup_id).expect("assigned lineups belong to the study");
        NextResponse::Lineup {
            lineup_id: a.lineup_id.clone(),
            m: lineup.m,
            panels: self.panels[&a.lineup_id].clone(),
            assignment_token: a.assignment_token.clone(),
            progress: self.progress(&a.participant_id),
        }
    }

    /// Slots of the block that hold attention checks; fixed per participant.
    fn check_slots(&self, participant: &str) -> BTreeSet<usize> {
        let (len, checks) = self.study.block_len();
        let digest = sha256_hex(format!("{}\n{participant}", self.study.id).as_bytes());
        let mut rng = RandomStream::new(u64::from_str_radix(&digest[..16], 16).expect("hex digest"));
        let mut slots = BTreeSet::new();
        while slots.len() < checks {
            slots.insert(rng.below(len));
        }
        slots
    }

    fn pick(&self, participant: &str, seen: &HashSet<&str>, attention: bool) -> Option<&StudyLineup> {
        let tiebreak = |id: &str| sha256_hex(format!("{participant}\n{id}").as_bytes());
        self.study
            .lineups
            .iter()
            .filter(|l| l.attention_check == attention && !seen.contains(l.id.as_str()))
            .min_by_key(|l| {
                let load = self.load.get(&l.id).copied().unwrap_or(0);
                // Lineups below target first, then the least served.
                (load >= l.target, load, tiebreak(&l.id))
            })
    }

    /// Returns the participant's open assignment, or schedules the next one.
    pub fn next(&mut self, participant: &str) -> Result<NextResponse, ApiError> {
        if !valid_id(participant) {
            return Err(ApiError::bad_request("participant id must be 1-128 of [A-Za-z0-9_-]"));
        }
        let own: Vec<usize> = self.by_participant.get(participant).cloned().unwrap_or_default();
        if let Some(&open) = own.iter().find(|&&i| !self.answered.contains(&self.assignments[i].assignment_token)) {
            return Ok(self.payload(&self.assignments[open]));
        }
        if self.study.state == StudyState::Closed {
            return Err(conflict("STUDY_CLOSED", format!("study {:?} is closed", self.study.id)));
        }
        let (len, _) = self.study.block_len();
        let slot = own.len();
        if slot >= len {
            return Ok(NextResponse::Done { progress: self.progress(participant) });
        }
        let seen: HashSet<&str> = own.iter().map(|&i| self.assignments[i].lineup_id.as_str()).collect();
        let attention = self.check_slots(participant).contains(&slot);
        let chosen = self
            .pick(participant, &seen, attention)
            .or_else(|| self.pick(participant, &seen, !attention))
            .map(|l| l.id.clone());
        let Some(lineup_id) = chosen else {
            return Ok(NextResponse::Done { progress: self.progress(participant) });
        };
        let assignment = Assignment {
            participant_id: participant.to_string(),
            lineup_id,
            assignment_token: uuid::Uuid::new_v4().to_string(),
            slot,
            assigned_at: now(),
        };
        // Durable before it is served.
        append_jsonl(&self.dir.join(ASSIGNMENTS_FILE), &assignment)?;
        self.index_assignment(assignment.clone());
        Ok(self.payload(&assignment))
    }

    pub fn submit(&mut self, submission: Submission) -> Result<EvaluationRecord, ApiError> {
        let assignment = self
            .by_participant
            .get(&submission.participant_id)
            .and_then(|v| {
                v.iter()
                    .map(|&i| &self.assignments[i])
                    .find(|a| a.assignment_token == submission.assignment_token)
            })
            .filter(|a| a.lineup_id == submission.lineup_id)
            .ok_or_else(|| conflict("NOT_ASSIGNED", "no such assignment for this participant and lineup"))?;
        if self.answered.contains(&assignment.assignment_token) {
            return Err(conflict("ALREADY_ANSWERED", "this assignment has already been answered"));
        }
        let m = self.study.lineup(&submission.lineup_id).map(|l| l.m).expect("assigned lineups belong to the study");
        let record = normalize_evaluation(
            RawEvaluation {
                lineup_id: submission.lineup_id,
                participant_id: submission.participant_id,
                selections: submission.selections,
                reason: submission.reason,
                rating: submission.rating,
                submitted_at: now(),
            },
            m,
        )?;
        let stored = StoredEvaluation { record, assignment_token: submission.assignment_token };
        let line = ExportEvaluationLine { kind: "evaluation", stored: &stored };
        append_jsonl(&self.dir.join(EVALUATIONS_FILE), &line)?;
        self.answered.insert(stored.assignment_token.clone());
        let record = stored.record.clone();
        self.evaluations.push(stored);
        Ok(record)
    }

    fn records(&self) -> Vec<EvaluationRecord> {
        self.evaluations.iter().map(|e| e.record.clone()).collect()
    }

    pub fn result(&self, lineup_id: &str, reveal: bool, admin: bool) -> Result<LineupResult, ApiError> {
        let lineup = self.study.lineup(lineup_id).ok_or_else(|| ApiError::unknown_lineup(lineup_id))?;
        let records = self.records();
        let attention_filter = self.study.has_attention_checks() && !lineup.attention_check;
        let kept = attention_filter.then(|| filter_participants(&records, &self.study.attention_positions()));
        let evals: Vec<EvaluationRecord> = records
            .into_iter()
            .filter(|r| r.lineup_id == lineup_id)
            .filter(|r| kept.as_ref().is_none_or(|k| k.contains(&r.participant_id)))
            .collect();
        let opts = match self.study.alpha {
            Some(alpha) => PValueOptions {
                mode: PValueMode::AlphaAdjusted,
                alpha: Some(alpha),
                replications: DEFAULT_REPLICATIONS,
                seed: self.study.mc_seed,
            },
            None => PValueOptions::uniform(),
        };
        let result = visual_pvalue(&evals, lineup.data_position, lineup.m, &opts)?;
        let target_met = result.k >= lineup.target;
        let revealed = reveal && (target_met || admin);
        Ok(LineupResult {
            result,
            target: lineup.target,
            target_met,
            attention_filter,
            revealed,
            data_position: revealed.then_some(lineup.data_position),
        })
    }

    /// Study line, evaluations in submission order, participant verdicts.
    pub fn export(&self) -> Result<Vec<u8>, ApiError> {
        let mut out = Vec::new();
        let s = &self.study;
        push_line(&mut out, &ExportStudy {
            kind: "study",
            id: &s.id,
            state: s.state,
            block_size: s.block_size,
            checks_per_block: s.checks_per_block,
            alpha: s.alpha,
            mc_seed: s.mc_seed,
            created_at: &s.created_at,
            lineups: s
                .lineups
                .iter()
                .map(|l| ExportLineup { id: &l.id, m: l.m, target: l.target, attention_check: l.attention_check })
                .collect(),
        })?;
        let attention = s.attention_positions();
        let mut verdicts: BTreeMap<&str, (usize, usize, usize)> = BTreeMap::new();
        for e in &self.evaluations {
            let r = &e.record;
            let passed = attention.get(&r.lineup_id).map(|&pos| r.contains(pos));
            let v = verdicts.entry(&r.participant_id).or_default();
            v.0 += 1;
            if let Some(p) = passed {
                v.1 += 1;
                v.2 += usize::from(p);
            }
            push_line(&mut out, &ExportEvaluation { kind: "evaluation", record: r, attention_check: passed.is_some(), attention_passed: passed })?;
        }
        let filter = s.has_attention_checks();
        for (participant_id, (evaluations, attention_checks, attention_passed)) in verdicts {
            push_line(&mut out, &ExportParticipant {
                kind: "participant",
                participant_id,
                evaluations,
                attention_checks,
                attention_passed,
                kept: !filter || attention_passed > 0,
            })?;
        }
        Ok(out)
    }
}

#[derive(Serialize)]
struct ExportEvaluationLine<'a> {
    kind: &'static str,
    #[serde(flatten)]
    stored: &'a StoredEvaluation,
}

fn push_line<T: Serialize>(out: &mut Vec<u8>, value: &T) -> Result<(), ApiError> {
    serde_json::to_writer(&mut *out, value).map_err(|e| ApiError::config(e.to_string()))?;
    out.push(b'\n');
    Ok(())
}
