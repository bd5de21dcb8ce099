//! Front ends for interactive query answering: a line-oriented REPL that
//! also runs query streams in batch, and an HTTP/JSON session service.

pub mod config;
pub mod repl;
pub mod server;
pub mod wire;
