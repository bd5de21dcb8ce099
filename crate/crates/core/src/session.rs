//! One interactive session: an encoding and a setup script, then a stream
//! of query blocks, each answered from everything asserted so far.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::compile::{compile_query, compile_setup, render_online_step, CompileError, ReactiveProgram};
use crate::ground::{GroundError, Grounder};
use crate::lang::{GroundAtom, Guard, Label, LangError, Signature};
use crate::parser::{parse_program, parse_query_block, parse_setup, ParseError, Program, QueryBlock};
use crate::solver::{Projection, Solver, SolverError, Stats};

pub const DEFAULT_CAP: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("{source_name}:{error}")]
    Parse { source_name: String, error: ParseError },
    #[error("encoding: {0}")]
    Const(LangError),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Ground(#[from] GroundError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("label {0} is already active")]
    LabelActive(Label),
    #[error("label {0} was retracted and cannot be reused")]
    LabelRetracted(Label),
    #[error("cannot retract unknown label {0}")]
    UnknownLabel(Label),
    #[error("label {0} is already retracted")]
    AlreadyRetracted(Label),
    #[error("session is stopped")]
    Stopped,
}

impl SessionError {
    fn parse(source_name: &str, error: ParseError) -> Self {
        SessionError::Parse {
            source_name: source_name.to_string(),
            error,
        }
    }

    /// Source position, for errors that come straight from parsing.
    pub fn position(&self) -> Option<crate::parser::Position> {
        match self {
            SessionError::Parse { error, .. } => Some(error.pos),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelState {
    Active { since: i64 },
    Retracted { since: i64, at: i64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Satisfiable,
    Unsatisfiable,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Satisfiable => "SAT",
            Status::Unsatisfiable => "UNSAT",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryResult {
    pub status: Status,
    /// Distinct projected models, each sorted, in sorted order.
    pub models: Vec<Vec<GroundAtom>>,
    pub step: i64,
    pub active_labels: Vec<Label>,
    /// False when enumeration stopped at the cap.
    pub exhausted: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResultSummary {
    pub step: i64,
    pub status: Status,
    pub models: usize,
}

/// Read-only view of a session. Labels are ordered by the step they were
/// asserted or retracted at.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Snapshot {
    pub q: i64,
    pub active: Vec<(Label, i64)>,
    pub retracted: Vec<(Label, i64)>,
    pub shows: Vec<Signature>,
    pub last: Option<ResultSummary>,
    pub stats: Stats,
    pub stopped: bool,
}

#[derive(Clone, Debug)]
pub struct Session {
    encoding: Program,
    reactive: ReactiveProgram,
    grounder: Grounder,
    solver: Solver,
    q: i64,
    ledger: BTreeMap<Label, LabelState>,
    shows: BTreeSet<Signature>,
    transcript: Vec<String>,
    stopped: bool,
    cap: usize,
    last: Option<ResultSummary>,
}

impl Session {
    pub fn open(encoding_text: &str, setup_text: &str) -> Result<Session, SessionError> {
        let encoding = parse_program(encoding_text).map_err(|e| SessionError::parse("encoding", e))?;
        let setup = parse_setup(setup_text).map_err(|e| SessionError::parse("setup", e))?;
        let consts = encoding.const_values().map_err(SessionError::Const)?;
        let reactive = compile_setup(&setup);
        let mut grounder = Grounder::new(consts);
        let (slice, _) = grounder.ground_base(&encoding, &reactive)?;
        let mut solver = Solver::new();
        solver.add_slice(&slice)?;
        let shows = encoding.shows.iter().cloned().chain(reactive.shows.iter().cloned()).collect();
        Ok(Session {
            encoding,
            reactive,
            grounder,
            solver,
            q: 0,
            ledger: BTreeMap::new(),
            shows,
            transcript: Vec::new(),
            stopped: false,
            cap: DEFAULT_CAP,
            last: None,
        })
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap.max(1);
        self
    }

    pub fn q(&self) -> i64 {
        self.q
    }

    pub fn is_stopped(&self) -> bool {
        self.stopped
    }

    pub fn encoding(&self) -> &Program {
        &self.encoding
    }

    pub fn reactive(&self) -> &ReactiveProgram {
        &self.reactive
    }

    pub fn shows(&self) -> &BTreeSet<Signature> {
        &self.shows
    }

    pub fn ledger(&self) -> &BTreeMap<Label, LabelState> {
        &self.ledger
    }

    pub fn active_labels(&self) -> Vec<Label> {
        self.ledger
            .iter()
            .filter(|(_, s)| matches!(s, LabelState::Active { .. }))
            .map(|(l, _)| l.clone())
            .collect()
    }

    /// Parses one query block and runs it.
    pub fn run_query_text(&mut self, text: &str, cap: Option<usize>) -> Result<QueryResult, SessionError> {
        if self.stopped {
            return Err(SessionError::Stopped);
        }
        let block = parse_query_block(text).map_err(|e| SessionError::parse("query", e))?;
        self.run_query(&block, cap)
    }

    /// Runs one query block as the next step. On error nothing changes.
    pub fn run_query(&mut self, block: &QueryBlock, cap: Option<usize>) -> Result<QueryResult, SessionError> {
        if self.stopped {
            return Err(SessionError::Stopped);
        }
        let step = self.q + 1;

        let mut ledger = self.ledger.clone();
        for label in &block.retracts {
            match ledger.get(label).copied() {
                Some(LabelState::Active { since }) => {
                    ledger.insert(label.clone(), LabelState::Retracted { since, at: step });
                }
                Some(LabelState::Retracted { .. }) => return Err(SessionError::AlreadyRetracted(label.clone())),
                None => return Err(SessionError::UnknownLabel(label.clone())),
            }
        }
        for label in block.sections.iter().filter_map(|s| s.label.as_ref()) {
            match ledger.get(label) {
                None => {
                    ledger.insert(label.clone(), LabelState::Active { since: step });
                }
                // several sections of one block may share a label
                Some(LabelState::Active { since }) if *since == step => {}
                Some(LabelState::Active { .. }) => return Err(SessionError::LabelActive(label.clone())),
                Some(LabelState::Retracted { .. }) => return Err(SessionError::LabelRetracted(label.clone())),
            }
        }

        let online = compile_query(block, step, &self.reactive)?;
        let mut grounder = self.grounder.clone();
        let slice = grounder.ground_step(&self.reactive, &online, step)?;
        self.solver.check_slice(&slice)?;

        self.grounder = grounder;
        self.ledger = ledger;
        for label in &block.retracts {
            self.solver.fix_false(&Guard::Hold(label.clone()));
        }
        self.solver.add_slice(&slice)?;
        self.solver.forget_externals(online.forget);
        self.q = step;
        self.transcript.push(render_online_step(&online));

        let mut assumptions: Vec<Guard> = self.active_labels().into_iter().map(Guard::Hold).collect();
        assumptions.push(Guard::Expire(step + 1));
        let projection = Projection::Signatures(self.shows.clone());
        let solved = self.solver.solve(&assumptions, &projection, cap.unwrap_or(self.cap).max(1));
        let mut models = solved.models;
        models.sort();
        models.dedup();
        let status = if models.is_empty() {
            Status::Unsatisfiable
        } else {
            Status::Satisfiable
        };
        self.last = Some(ResultSummary {
            step,
            status,
            models: models.len(),
        });
        Ok(QueryResult {
            status,
            models,
            step,
            active_labels: self.active_labels(),
            exhausted: solved.exhausted,
        })
    }

    /// Closes the session. Later queries are rejected; stopping twice is a
    /// no-op.
    pub fn stop(&mut self) {
        if !self.stopped {
            self.stopped = true;
            self.transcript.push("#stop.\n".to_string());
        }
    }

    pub fn transcript(&self) -> String {
        self.transcript.concat()
    }

    pub fn state(&self) -> Snapshot {
        let mut active = Vec::new();
        let mut retracted = Vec::new();
        for (label, state) in &self.ledger {
            match *state {
                LabelState::Active { since } => active.push((label.clone(), since)),
                LabelState::Retracted { at, .. } => retracted.push((label.clone(), at)),
            }
        }
        active.sort_by(|a, b| (a.1, &a.0).cmp(&(b.1, &b.0)));
        retracted.sort_by(|a, b| (a.1, &a.0).cmp(&(b.1, &b.0)));
        Snapshot {
            q: self.q,
            active,
            retracted,
            shows: self.shows.iter().cloned().collect(),
            last: self.last.clone(),
            stats: self.solver.stats(),
            stopped: self.stopped,
        }
    }
}
