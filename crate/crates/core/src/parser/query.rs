//! Query streams: a sequence of `#query. ... #endquery.` blocks closed by
//! `#stop.`.
//!
//! Inside a block, rules given before the first `#assert` are passed on
//! untouched. `#assert.` opens a section that expires after the current
//! query; `#assert : label.` opens one that persists until
//! `#retract : label.`.

use std::fmt;

use super::{tokenize, Cursor, ParseError, ParseOptions, Tok, Token};
use crate::lang::{Label, Rule};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AssertSection {
    pub label: Option<Label>,
    pub rules: Vec<Rule>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct QueryBlock {
    /// Rules before the first `#assert`, kept as written.
    pub plain: Vec<Rule>,
    pub sections: Vec<AssertSection>,
    pub retracts: Vec<Label>,
}

impl fmt::Display for QueryBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "#query.")?;
        for label in &self.retracts {
            writeln!(f, "#retract : {label}.")?;
        }
        for rule in &self.plain {
            writeln!(f, "{rule}")?;
        }
        for section in &self.sections {
            match &section.label {
                Some(label) => writeln!(f, "#assert : {label}.")?,
                None => writeln!(f, "#assert.")?,
            }
            for rule in &section.rules {
                writeln!(f, "{rule}")?;
            }
        }
        writeln!(f, "#endquery.")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StreamEvent {
    Query(QueryBlock),
    Stop,
}

/// Parses exactly one `#query. ... #endquery.` block.
pub fn parse_query_block(text: &str) -> Result<QueryBlock, ParseError> {
    let tokens = tokenize(text)?;
    let mut cur = Cursor::new(&tokens, ParseOptions::default());
    expect_directive(&mut cur, "query")?;
    let block = block_body(&mut cur)?;
    if !cur.at_end() {
        return Err(cur.unexpected("end of input after `#endquery.`"));
    }
    Ok(block)
}

/// Parses a whole stream. Nothing may follow `#stop.`; a missing `#stop.`
/// is accepted so partial streams can be replayed.
pub fn parse_stream(text: &str) -> Result<Vec<StreamEvent>, ParseError> {
    let tokens = tokenize(text)?;
    let mut cur = Cursor::new(&tokens, ParseOptions::default());
    let mut events = Vec::new();
    while !cur.at_end() {
        match cur.peek() {
            Some(Tok::Directive(d)) if d == "query" => {
                expect_directive(&mut cur, "query")?;
                events.push(StreamEvent::Query(block_body(&mut cur)?));
            }
            Some(Tok::Directive(d)) if d == "stop" => {
                expect_directive(&mut cur, "stop")?;
                events.push(StreamEvent::Stop);
                if !cur.at_end() {
                    return Err(cur.unexpected("end of stream after `#stop.`"));
                }
            }
            _ => return Err(cur.unexpected("`#query.` or `#stop.`")),
        }
    }
    Ok(events)
}

/// True once `text` ends with `#endquery.` or `#stop.`, or cannot be
/// tokenized at all (so the caller gets to report the error).
pub fn block_is_complete(text: &str) -> bool {
    match tokenize(text) {
        Ok(tokens) => ends_with_terminator(&tokens),
        Err(_) => true,
    }
}

fn ends_with_terminator(tokens: &[Token]) -> bool {
    match tokens {
        [.., a, b] => {
            matches!(&a.tok, Tok::Directive(d) if d == "endquery" || d == "stop") && b.tok == Tok::Dot
        }
        _ => false,
    }
}

fn expect_directive(cur: &mut Cursor<'_>, name: &str) -> Result<(), ParseError> {
    match cur.peek() {
        Some(Tok::Directive(d)) if d == name => {
            cur.bump();
            cur.expect(Tok::Dot)
        }
        _ => Err(cur.unexpected(&format!("`#{name}.`"))),
    }
}

fn label(cur: &mut Cursor<'_>) -> Result<Label, ParseError> {
    cur.expect(Tok::Colon)?;
    let pos = cur.pos();
    let atom = cur.atom(false)?;
    let ground = atom
        .to_ground()
        .map_err(|e| ParseError::new(pos, format!("malformed label `{atom}`: {e}")))?;
    cur.expect(Tok::Dot)?;
    Ok(Label(ground))
}

fn block_body(cur: &mut Cursor<'_>) -> Result<QueryBlock, ParseError> {
    let mut block = QueryBlock::default();
    loop {
        let pos = cur.pos();
        match cur.peek() {
            None => return Err(cur.unexpected("`#endquery.`")),
            Some(Tok::Directive(d)) => {
                let d = d.clone();
                match d.as_str() {
                    "endquery" => {
                        expect_directive(cur, "endquery")?;
                        return Ok(block);
                    }
                    "assert" => {
                        cur.bump();
                        let label = if cur.peek() == Some(&Tok::Colon) {
                            Some(label(cur)?)
                        } else {
                            cur.expect(Tok::Dot)?;
                            None
                        };
                        block.sections.push(AssertSection {
                            label,
                            rules: Vec::new(),
                        });
                    }
                    "retract" => {
                        cur.bump();
                        block.retracts.push(label(cur)?);
                    }
                    other => {
                        return Err(ParseError::new(
                            pos,
                            format!("unexpected `#{other}` inside a query block"),
                        ))
                    }
                }
            }
            Some(_) => {
                let rule = cur.rule()?;
                match block.sections.last_mut() {
                    Some(section) => section.rules.push(rule),
                    None => block.plain.push(rule),
                }
            }
        }
    }
}
