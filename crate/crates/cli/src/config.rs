use std::path::PathBuf;

use clap::Parser;
use qasp_core::session::DEFAULT_CAP;

#[derive(Parser, Debug, Clone, PartialEq, Eq)]
#[command(name = "qasp", version, about = "Answer streams of queries against an answer set program")]
pub struct Config {
    /// Encoding (logic program) file
    #[arg(short = 'o', long = "encoding", value_name = "FILE")]
    pub encoding: PathBuf,

    /// Setup script declaring which predicates queries may assert
    #[arg(short = 'c', long = "setup", value_name = "FILE")]
    pub setup: PathBuf,

    /// Query stream to run in batch; standard input is read when absent
    #[arg(short = 'q', long = "queries", value_name = "FILE", conflicts_with = "serve")]
    pub queries: Option<PathBuf>,

    /// Maximum number of models reported per query
    #[arg(long, default_value_t = DEFAULT_CAP, value_parser = parse_cap)]
    pub cap: usize,

    /// Write the rendered online steps to FILE when the stream ends
    #[arg(long, value_name = "FILE")]
    pub transcript: Option<PathBuf>,

    /// Run the HTTP session service instead of reading queries
    #[arg(long)]
    pub serve: bool,

    /// Address for the HTTP service
    #[arg(long, env = "QASP_BIND", default_value = "127.0.0.1:8080")]
    pub bind: String,
}

fn parse_cap(text: &str) -> Result<usize, String> {
    match text.parse::<usize>() {
        Ok(0) => Err("the cap must be at least 1".to_string()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}
