//! Reads query blocks line by line and prints one report per query.

use std::io::{self, BufRead, Write};

use qasp_core::parser::{block_is_complete, parse_stream, StreamEvent};
use qasp_core::session::{QueryResult, Session};

/// Writes the report for one answered query.
pub fn print_result(out: &mut dyn Write, result: &QueryResult) -> io::Result<()> {
    writeln!(out, "step {}: {}", result.step, status_word(result))?;
    if result.exhausted {
        writeln!(out, "models: {}", result.models.len())?;
    } else {
        writeln!(out, "models: {} (stopped at the cap)", result.models.len())?;
    }
    for (i, model) in result.models.iter().enumerate() {
        write!(out, "model {}:", i + 1)?;
        for atom in model {
            write!(out, " {atom}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

fn status_word(result: &QueryResult) -> &'static str {
    if result.models.is_empty() {
        "UNSATISFIABLE"
    } else {
        "SATISFIABLE"
    }
}

/// Runs blocks from `input` until `#stop.` or end of input, then stops the
/// session. Errors are reported on `err` and do not end the loop.
pub fn run(
    session: &mut Session,
    input: impl BufRead,
    out: &mut dyn Write,
    err: &mut dyn Write,
    prompt: bool,
) -> io::Result<()> {
    let mut buffer = String::new();
    let mut start_line = 1;
    let mut line_no = 0;
    if prompt {
        write!(err, "?- ")?;
        err.flush()?;
    }
    for line in input.lines() {
        let line = line?;
        line_no += 1;
        if buffer.trim().is_empty() {
            buffer.clear();
            start_line = line_no;
        }
        buffer.push_str(&line);
        buffer.push('\n');
        if !block_is_complete(&buffer) {
            continue;
        }
        let text = std::mem::take(&mut buffer);
        match parse_stream(&text) {
            Err(mut e) => {
                e.pos.line += start_line - 1;
                writeln!(err, "error: query:{e}")?;
            }
            Ok(events) => {
                for event in events {
                    match event {
                        StreamEvent::Query(block) => match session.run_query(&block, None) {
                            Ok(result) => print_result(out, &result)?,
                            Err(e) => writeln!(err, "error: {e}")?,
                        },
                        StreamEvent::Stop => {
                            session.stop();
                            return Ok(());
                        }
                    }
                }
            }
        }
        out.flush()?;
        if prompt {
            write!(err, "?- ")?;
            err.flush()?;
        }
    }
    if !buffer.trim().is_empty() && !only_comments(&buffer) {
        writeln!(err, "error: incomplete query block at end of input")?;
    }
    session.stop();
    Ok(())
}

fn only_comments(text: &str) -> bool {
    qasp_core::parser::parse_stream(text).is_ok_and(|events| events.is_empty())
}

#[cfg(test)]
mod tests {
    use super::*;

    const ENCODING: &str = include_str!("../../../demo/coloring/encoding.lp");
    const SETUP: &str = include_str!("../../../demo/coloring/setup.ini");

    fn drive(input: &str) -> (Session, String, String) {
        let mut session = Session::open(ENCODING, SETUP).unwrap();
        let mut out = Vec::new();
        let mut err = Vec::new();
        run(&mut session, input.as_bytes(), &mut out, &mut err, false).unwrap();
        (session, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn immediate_stop() {
        let (session, out, err) = drive("#stop.\n");
        assert_eq!((session.q(), out.as_str(), err.as_str()), (0, "", ""));
        assert!(session.is_stopped());
    }

    #[test]
    fn malformed_block_then_valid_block() {
        let input = "#query.\n#assert : e(1).\nedge(1,2)\n#endquery.\n#query.\n#assert : e(1).\nedge(1,2).\n#endquery.\n";
        let (session, out, err) = drive(input);
        assert!(err.starts_with("error: query:4:1:"), "{err}");
        assert_eq!(session.q(), 1);
        assert!(out.starts_with("step 1: SATISFIABLE\nmodels: 6\n"), "{out}");
    }

    #[test]
    fn semantic_errors_keep_the_loop_going() {
        let (session, out, err) = drive("#query. #assert. edge(9,9). #endquery.\n#query. #endquery.\n");
        assert!(err.contains("outside the declared domain"), "{err}");
        assert_eq!(session.q(), 1);
        assert_eq!(out, "step 1: SATISFIABLE\nmodels: 1\nmodel 1:\n");
    }

    #[test]
    fn unfinished_input() {
        let (session, _, err) = drive("#query.\n#assert.\n");
        assert!(err.contains("incomplete"));
        assert!(session.is_stopped());
        let (_, _, err) = drive("% just a comment\n");
        assert_eq!(err, "");
    }
}
