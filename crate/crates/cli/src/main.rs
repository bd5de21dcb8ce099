use std::fs;
use std::io::{self, BufReader, IsTerminal};
use std::process::ExitCode;

use clap::Parser;

use qasp_cli::config::Config;
use qasp_cli::{repl, server};
use qasp_core::session::Session;

fn read(path: &std::path::Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

fn run(config: Config) -> Result<(), String> {
    let encoding = read(&config.encoding)?;
    let setup = read(&config.setup)?;
    if config.serve {
        let state = server::AppState::new(Some((encoding, setup)), config.cap);
        let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
        return runtime
            .block_on(server::serve(&config.bind, state))
            .map_err(|e| format!("cannot serve on {}: {e}", config.bind));
    }

    let mut session = Session::open(&encoding, &setup).map_err(|e| e.to_string())?.with_cap(config.cap);
    let stdout = io::stdout();
    let stderr = io::stderr();
    let result = match &config.queries {
        Some(path) => {
            let file = fs::File::open(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            repl::run(&mut session, BufReader::new(file), &mut stdout.lock(), &mut stderr.lock(), false)
        }
        None => {
            let stdin = io::stdin();
            let prompt = stdin.is_terminal();
            repl::run(&mut session, stdin.lock(), &mut stdout.lock(), &mut stderr.lock(), prompt)
        }
    };
    result.map_err(|e| e.to_string())?;
    if let Some(path) = &config.transcript {
        fs::write(path, session.transcript()).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Config::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
