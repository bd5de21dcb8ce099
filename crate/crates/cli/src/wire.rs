//! JSON shapes exchanged with HTTP clients. Atoms travel in `p(a,b)` syntax.

use serde::{Deserialize, Serialize};

use qasp_core::session::{QueryResult, SessionError, Snapshot, Status};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreateSession {
    /// Encoding text; the service default is used when absent.
    pub encoding: Option<String>,
    /// Setup text; the service default is used when absent.
    pub setup: Option<String>,
    pub cap: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmitQuery {
    pub query: String,
    pub cap: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub message: String,
    pub source: Option<String>,
    pub line: Option<usize>,
    pub column: Option<usize>,
}

impl ErrorBody {
    pub fn plain(message: impl Into<String>) -> Self {
        ErrorBody {
            message: message.into(),
            source: None,
            line: None,
            column: None,
        }
    }
}

impl From<&SessionError> for ErrorBody {
    fn from(e: &SessionError) -> Self {
        match e {
            SessionError::Parse { source_name, error } => ErrorBody {
                message: error.message.clone(),
                source: Some(source_name.clone()),
                line: Some(error.pos.line),
                column: Some(error.pos.column),
            },
            other => ErrorBody::plain(other.to_string()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QueryResponse {
    /// `satisfiable`, `unsatisfiable` or `error`.
    pub status: String,
    pub step: i64,
    pub models: Vec<Vec<String>>,
    pub active_labels: Vec<String>,
    pub exhausted: bool,
    pub error: Option<ErrorBody>,
}

impl QueryResponse {
    pub fn from_result(result: &QueryResult) -> Self {
        QueryResponse {
            status: match result.status {
                Status::Satisfiable => "satisfiable",
                Status::Unsatisfiable => "unsatisfiable",
            }
            .to_string(),
            step: result.step,
            models: result
                .models
                .iter()
                .map(|m| m.iter().map(ToString::to_string).collect())
                .collect(),
            active_labels: result.active_labels.iter().map(ToString::to_string).collect(),
            exhausted: result.exhausted,
            error: None,
        }
    }

    pub fn failure(step: i64, active_labels: Vec<String>, error: ErrorBody) -> Self {
        QueryResponse {
            status: "error".to_string(),
            step,
            models: Vec::new(),
            active_labels,
            exhausted: true,
            error: Some(error),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveLabel {
    pub label: String,
    pub since: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetractedLabel {
    pub label: String,
    pub at: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LastResult {
    pub step: i64,
    pub status: String,
    pub models: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StatsBody {
    pub atoms: usize,
    pub rules: usize,
    pub decisions: u64,
    pub conflicts: u64,
    pub loop_nogoods: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionResponse {
    pub id: String,
    pub step: i64,
    pub active_labels: Vec<ActiveLabel>,
    pub retracted_labels: Vec<RetractedLabel>,
    pub shows: Vec<String>,
    pub last: Option<LastResult>,
    pub stats: StatsBody,
    pub stopped: bool,
}

impl SessionResponse {
    pub fn new(id: &str, s: &Snapshot) -> Self {
        SessionResponse {
            id: id.to_string(),
            step: s.q,
            active_labels: s
                .active
                .iter()
                .map(|(l, since)| ActiveLabel {
                    label: l.to_string(),
                    since: *since,
                })
                .collect(),
            retracted_labels: s
                .retracted
                .iter()
                .map(|(l, at)| RetractedLabel {
                    label: l.to_string(),
                    at: *at,
                })
                .collect(),
            shows: s.shows.iter().map(ToString::to_string).collect(),
            last: s.last.as_ref().map(|l| LastResult {
                step: l.step,
                status: match l.status {
                    Status::Satisfiable => "satisfiable",
                    Status::Unsatisfiable => "unsatisfiable",
                }
                .to_string(),
                models: l.models,
            }),
            stats: StatsBody {
                atoms: s.stats.atoms,
                rules: s.stats.rules,
                decisions: s.stats.sat.decisions,
                conflicts: s.stats.sat.conflicts,
                loop_nogoods: s.stats.loop_nogoods,
            },
            stopped: s.stopped,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptResponse {
    pub id: String,
    pub step: i64,
    pub transcript: String,
}

/// Body of failures that are not tied to one query.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub step: Option<i64>,
    pub error: ErrorBody,
}
