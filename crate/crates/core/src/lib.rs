//! Interactive query answering for answer set programs.
//!
//! A session combines an encoding with a setup script declaring which
//! predicates may be asserted. Each query block is compiled into one step of
//! an online progression: persistent rules accumulate, per-step rules are
//! guarded by assumption literals and retired afterwards, and the
//! incremental solver enumerates the stable models of what is active.

pub mod lang;
pub mod parser;
pub mod compile;
pub mod ground;
pub mod solver;
pub mod session;
