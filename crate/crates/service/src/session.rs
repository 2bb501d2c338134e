//! Per-session state and its on-disk record.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use taxoalign::analysis::ReductionSession;
use taxoalign::engine::Enumeration;
use taxoalign::model::{ConstraintFlags, Diagnosis};
use taxoalign::{parse_alignment, Alignment, ConceptRef, RelationMask};

use crate::error::ApiError;

pub const RECORD_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub left: ConceptRef,
    pub right: ConceptRef,
    pub mask: RelationMask,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum HistoryEntry {
    Repair { disable: Vec<usize>, enable: Vec<usize> },
    Answer(AnswerRecord),
    ResetAnswers,
}

/// Everything needed to rebuild a session; caches are recomputed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub format: u32,
    pub id: String,
    pub source: String,
    pub flags: ConstraintFlags,
    pub disabled: BTreeSet<usize>,
    pub answers: Vec<AnswerRecord>,
    pub history: Vec<HistoryEntry>,
}

pub struct SessionState {
    pub record: SessionRecord,
    pub alignment: Alignment,
    /// Bumped on every edit of the effective alignment.
    pub version: u64,
    pub consistent: Option<bool>,
    pub diagnosis: Option<Arc<Diagnosis>>,
    pub worlds: Option<Arc<Enumeration>>,
    pub reduction: Option<ReductionSession>,
    pub running_job: Option<String>,
}

impl SessionState {
    pub fn from_record(record: SessionRecord) -> Result<SessionState, ApiError> {
        let mut alignment = parse_alignment(&record.source).map_err(|errs| ApiError::CorruptRecord {
            id: record.id.clone(),
            reason: format!("stored source no longer parses ({} errors)", errs.len()),
        })?;
        alignment.flags = record.flags;
        Ok(SessionState {
            record,
            alignment,
            version: 0,
            consistent: None,
            diagnosis: None,
            worlds: None,
            reduction: None,
            running_job: None,
        })
    }

    /// The alignment with disabled articulations left out.
    pub fn effective(&self) -> Alignment {
        self.alignment.without(&self.record.disabled)
    }

    pub fn invalidate(&mut self) {
        self.version += 1;
        self.consistent = None;
        self.diagnosis = None;
        self.worlds = None;
        self.reduction = None;
    }

    /// Stores a finished enumeration and replays recorded answers on it.
    pub fn install_worlds(&mut self, e: Enumeration) {
        let mut reduction = ReductionSession::new(e.worlds.clone());
        for a in &self.record.answers {
            let _ = reduction.apply_answer(&a.left, &a.right, a.mask);
        }
        self.consistent = Some(!e.worlds.is_empty());
        self.worlds = Some(Arc::new(e));
        self.reduction = Some(reduction);
    }
}

pub fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-')
}

fn record_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.json"))
}

pub fn save_record(dir: &Path, record: &SessionRecord) -> Result<(), ApiError> {
    let storage = |e: std::io::Error| ApiError::Storage(e.to_string());
    std::fs::create_dir_all(dir).map_err(storage)?;
    let text = serde_json::to_string_pretty(record).map_err(|e| ApiError::Storage(e.to_string()))?;
    let tmp = dir.join(format!(".{}.tmp", record.id));
    std::fs::write(&tmp, text).map_err(storage)?;
    std::fs::rename(&tmp, record_path(dir, &record.id)).map_err(storage)
}

/// `Ok(None)` when no record exists.
pub fn load_record(dir: &Path, id: &str) -> Result<Option<SessionRecord>, ApiError> {
    if !valid_id(id) {
        return Ok(None);
    }
    let text = match std::fs::read_to_string(record_path(dir, id)) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(ApiError::Storage(e.to_string())),
    };
    let record: SessionRecord = serde_json::from_str(&text).map_err(|e| ApiError::CorruptRecord {
        id: id.to_string(),
        reason: e.to_string(),
    })?;
    if record.format != RECORD_FORMAT || record.id != id {
        return Err(ApiError::CorruptRecord {
            id: id.to_string(),
            reason: "record header does not match".into(),
        });
    }
    Ok(Some(record))
}
