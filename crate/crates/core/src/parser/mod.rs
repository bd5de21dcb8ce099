//! Parsers for the three input languages: encoding programs (`.lp`), setup
//! scripts (`.ini`), and query streams (`.qtr`).
//!
//! All three share the rule grammar below. Statements end with `.`, and `%`
//! starts a comment running to the end of the line (`%* ... *%` spans lines).

mod lexer;
mod query;
mod setup;

use std::fmt;

use thiserror::Error;

use crate::lang::{
    evaluate_term, is_reserved_name, unsafe_variable, ArithOp, Atom, ChoiceElement, Head, LangError, Literal,
    Relation, Rule, Signature, Term, Value,
};

pub use lexer::{tokenize, Tok, Token};
pub use query::{block_is_complete, parse_query_block, parse_stream, AssertSection, QueryBlock, StreamEvent};
pub use setup::{parse_setup, SetupInstruction, SetupScript};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Position {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{pos}: {message}")]
pub struct ParseError {
    pub pos: Position,
    pub message: String,
}

impl ParseError {
    pub fn new(pos: Position, message: impl Into<String>) -> Self {
        ParseError {
            pos,
            message: message.into(),
        }
    }
}

/// Parser switches. The defaults describe user-authored input.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParseOptions {
    /// Accept `_`-prefixed predicate names.
    pub allow_reserved: bool,
    /// Read `t` as the step constant rather than a symbol.
    pub step_constant: bool,
    pub check_safety: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            allow_reserved: false,
            step_constant: false,
            check_safety: true,
        }
    }
}

impl ParseOptions {
    /// Options for compiler-internal rules (reserved names, `t` as step).
    pub fn internal() -> Self {
        ParseOptions {
            allow_reserved: true,
            step_constant: true,
            check_safety: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Statement {
    pub rule: Rule,
    pub pos: Position,
}

/// A parsed encoding: rules with their source positions, `#show`
/// signatures, and `#const` definitions.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Program {
    pub statements: Vec<Statement>,
    pub shows: Vec<Signature>,
    pub consts: Vec<(String, Term)>,
}

impl Program {
    pub fn rules(&self) -> impl Iterator<Item = &Rule> {
        self.statements.iter().map(|s| &s.rule)
    }

    /// Evaluates `#const` definitions in order; later ones may refer to
    /// earlier ones.
    pub fn const_values(&self) -> Result<Vec<(String, Value)>, LangError> {
        let mut values: Vec<(String, Value)> = Vec::new();
        for (name, term) in &self.consts {
            let value = evaluate_term(&term.replace_consts(&values))?;
            values.push((name.clone(), value));
        }
        Ok(values)
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, term) in &self.consts {
            writeln!(f, "#const {name} = {term}.")?;
        }
        for stmt in &self.statements {
            writeln!(f, "{}", stmt.rule)?;
        }
        for sig in &self.shows {
            writeln!(f, "#show {sig}.")?;
        }
        Ok(())
    }
}

/// Parses an encoding program.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    parse_program_with(text, ParseOptions::default())
}

pub fn parse_program_with(text: &str, options: ParseOptions) -> Result<Program, ParseError> {
    let tokens = tokenize(text)?;
    let mut cur = Cursor::new(&tokens, options);
    let mut program = Program::default();
    while !cur.at_end() {
        let pos = cur.pos();
        match cur.peek() {
            Some(Tok::Directive(name)) => {
                let name = name.clone();
                cur.bump();
                match name.as_str() {
                    "show" => {
                        let sig = cur.signature()?;
                        cur.expect(Tok::Dot)?;
                        if !program.shows.contains(&sig) {
                            program.shows.push(sig);
                        }
                    }
                    "const" => {
                        let ident = cur.ident()?;
                        cur.expect(Tok::Eq)?;
                        let term = cur.term(false)?;
                        cur.expect(Tok::Dot)?;
                        if !term.is_ground() {
                            return Err(ParseError::new(pos, format!("constant `{ident}` must be ground")));
                        }
                        program.consts.push((ident, term));
                    }
                    other => return Err(ParseError::new(pos, format!("unknown directive `#{other}`"))),
                }
            }
            _ => {
                let rule = cur.rule()?;
                program.statements.push(Statement { rule, pos });
            }
        }
    }
    Ok(program)
}

/// Parses a single rule (with its terminating `.`).
pub fn parse_rule(text: &str, options: ParseOptions) -> Result<Rule, ParseError> {
    let tokens = tokenize(text)?;
    let mut cur = Cursor::new(&tokens, options);
    let rule = cur.rule()?;
    if !cur.at_end() {
        return Err(cur.unexpected("end of input"));
    }
    Ok(rule)
}

pub(crate) struct Cursor<'a> {
    tokens: &'a [Token],
    idx: usize,
    options: ParseOptions,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(tokens: &'a [Token], options: ParseOptions) -> Self {
        Cursor { tokens, idx: 0, options }
    }

    pub(crate) fn at_end(&self) -> bool {
        self.idx >= self.tokens.len()
    }

    pub(crate) fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.idx).map(|t| &t.tok)
    }

    fn peek_at(&self, offset: usize) -> Option<&Tok> {
        self.tokens.get(self.idx + offset).map(|t| &t.tok)
    }

    pub(crate) fn pos(&self) -> Position {
        match self.tokens.get(self.idx) {
            Some(t) => t.pos,
            None => self
                .tokens
                .last()
                .map(|t| Position {
                    line: t.pos.line,
                    column: t.pos.column + 1,
                })
                .unwrap_or(Position { line: 1, column: 1 }),
        }
    }

    pub(crate) fn bump(&mut self) -> Option<&Tok> {
        let tok = self.tokens.get(self.idx).map(|t| &t.tok);
        self.idx += 1;
        tok
    }

    pub(crate) fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.idx += 1;
            true
        } else {
            false
        }
    }

    pub(crate) fn unexpected(&self, expected: &str) -> ParseError {
        match self.peek() {
            Some(tok) => ParseError::new(self.pos(), format!("expected {expected}, found {}", tok.describe())),
            None => ParseError::new(self.pos(), format!("expected {expected}, found end of input")),
        }
    }

    pub(crate) fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if self.eat(&tok) {
            Ok(())
        } else {
            Err(self.unexpected(&tok.describe()))
        }
    }

    pub(crate) fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Ident(name)) => {
                let name = name.clone();
                self.idx += 1;
                Ok(name)
            }
            _ => Err(self.unexpected("a name")),
        }
    }

    fn integer(&mut self) -> Result<i64, ParseError> {
        let negative = self.eat(&Tok::Minus);
        match self.peek() {
            Some(Tok::Int(i)) => {
                let i = *i;
                self.idx += 1;
                Ok(if negative { -i } else { i })
            }
            _ => Err(self.unexpected("an integer")),
        }
    }

    /// `name/arity`
    pub(crate) fn signature(&mut self) -> Result<Signature, ParseError> {
        let pos = self.pos();
        let name = self.ident()?;
        self.expect(Tok::Slash)?;
        let arity = self.integer()?;
        if arity < 0 {
            return Err(ParseError::new(pos, "arity must be non-negative"));
        }
        Ok(Signature::new(&name, arity as usize))
    }

    pub(crate) fn rule(&mut self) -> Result<Rule, ParseError> {
        let start = self.pos();
        let head = match self.peek() {
            Some(Tok::If) => Head::Constraint,
            Some(Tok::LBrace) | Some(Tok::Int(_)) => self.choice_head()?,
            Some(Tok::Minus) if matches!(self.peek_at(1), Some(Tok::Int(_))) => self.choice_head()?,
            _ => Head::Atom(self.atom(true)?),
        };
        let body = if self.eat(&Tok::If) { self.body()? } else { Vec::new() };
        self.expect(Tok::Dot)?;
        let rule = Rule { head, body };
        if self.options.check_safety {
            if let Some(var) = unsafe_variable(&rule) {
                return Err(ParseError::new(start, format!("unsafe variable `{var}` in rule `{rule}`")));
            }
        }
        Ok(rule)
    }

    fn choice_head(&mut self) -> Result<Head, ParseError> {
        let pos = self.pos();
        let lower = if self.peek() == Some(&Tok::LBrace) {
            None
        } else {
            Some(self.integer()?)
        };
        self.expect(Tok::LBrace)?;
        let mut elements = Vec::new();
        if self.peek() != Some(&Tok::RBrace) {
            loop {
                let atom = self.atom(true)?;
                let condition = if self.eat(&Tok::Colon) { self.literals(&[Tok::Semi, Tok::RBrace])? } else { Vec::new() };
                elements.push(ChoiceElement { atom, condition });
                if !self.eat(&Tok::Semi) {
                    break;
                }
            }
        }
        self.expect(Tok::RBrace)?;
        let upper = match self.peek() {
            Some(Tok::Int(_)) | Some(Tok::Minus) => Some(self.integer()?),
            _ => None,
        };
        let bound = |b: Option<i64>| -> Result<Option<u32>, ParseError> {
            b.map(|v| u32::try_from(v).map_err(|_| ParseError::new(pos, format!("invalid choice bound `{v}`"))))
                .transpose()
        };
        let lower = bound(lower)?.unwrap_or(0);
        let upper = bound(upper)?;
        if let Some(u) = upper {
            if lower > u {
                return Err(ParseError::new(
                    pos,
                    format!("choice lower bound {lower} exceeds upper bound {u}"),
                ));
            }
        }
        Ok(Head::Choice { lower, upper, elements })
    }

    fn body(&mut self) -> Result<Vec<Literal>, ParseError> {
        self.literals(&[Tok::Dot])
    }

    /// Comma-separated literals, stopping before any of `stops`.
    pub(crate) fn literals(&mut self, stops: &[Tok]) -> Result<Vec<Literal>, ParseError> {
        let mut lits = Vec::new();
        if self.peek().is_some_and(|t| stops.contains(t)) {
            return Ok(lits);
        }
        loop {
            lits.push(self.literal()?);
            if !self.eat(&Tok::Comma) {
                return Ok(lits);
            }
        }
    }

    pub(crate) fn literal(&mut self) -> Result<Literal, ParseError> {
        if let Some(Tok::Ident(word)) = self.peek() {
            if word == "not" && matches!(self.peek_at(1), Some(Tok::Ident(_))) {
                self.idx += 1;
                return Ok(Literal::Negative(self.atom(false)?));
            }
            let is_comparison = match self.peek_at(1) {
                Some(tok) => is_relation(tok) || matches!(tok, Tok::Plus | Tok::Minus | Tok::Star),
                None => false,
            };
            let is_step = self.options.step_constant && word == "t";
            if !is_comparison && !is_step {
                return Ok(Literal::Positive(self.atom(false)?));
            }
        }
        let left = self.term(false)?;
        let rel = match self.bump() {
            Some(Tok::Eq) => Relation::Eq,
            Some(Tok::Ne) => Relation::Ne,
            Some(Tok::Lt) => Relation::Lt,
            Some(Tok::Le) => Relation::Le,
            Some(Tok::Gt) => Relation::Gt,
            Some(Tok::Ge) => Relation::Ge,
            _ => {
                self.idx -= 1;
                return Err(self.unexpected("a comparison operator"));
            }
        };
        let right = self.term(rel == Relation::Eq)?;
        Ok(Literal::Comparison(left, rel, right))
    }

    pub(crate) fn atom(&mut self, allow_range: bool) -> Result<Atom, ParseError> {
        let pos = self.pos();
        let name = self.ident()?;
        if name == "not" {
            return Err(ParseError::new(pos, "expected an atom after `not`"));
        }
        if is_reserved_name(&name) && !self.options.allow_reserved {
            return Err(ParseError::new(
                pos,
                format!("predicate name `{name}` is reserved for internal use"),
            ));
        }
        let mut args = Vec::new();
        if self.eat(&Tok::LParen) {
            loop {
                args.push(self.term(allow_range)?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            self.expect(Tok::RParen)?;
        }
        Ok(Atom::new(&name, args))
    }

    /// `sum [.. sum]`; the range form only when `allow_range`.
    pub(crate) fn term(&mut self, allow_range: bool) -> Result<Term, ParseError> {
        let pos = self.pos();
        let low = self.sum()?;
        if self.peek() == Some(&Tok::DotDot) {
            if !allow_range {
                return Err(ParseError::new(
                    pos,
                    "ranges are only supported in head atoms and `=` comparisons",
                ));
            }
            self.idx += 1;
            let high = self.sum()?;
            return Ok(Term::range(low, high));
        }
        Ok(low)
    }

    fn sum(&mut self) -> Result<Term, ParseError> {
        let mut left = self.product()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => ArithOp::Add,
                Some(Tok::Minus) => ArithOp::Sub,
                _ => return Ok(left),
            };
            self.idx += 1;
            left = Term::arith(op, left, self.product()?);
        }
    }

    fn product(&mut self) -> Result<Term, ParseError> {
        let mut left = self.unary()?;
        while self.eat(&Tok::Star) {
            left = Term::arith(ArithOp::Mul, left, self.unary()?);
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<Term, ParseError> {
        if self.eat(&Tok::Minus) {
            let pos = self.pos();
            return Ok(match self.unary()? {
                Term::Integer(i) => Term::Integer(
                    i.checked_neg()
                        .ok_or_else(|| ParseError::new(pos, "integer out of range"))?,
                ),
                other => Term::arith(ArithOp::Sub, Term::Integer(0), other),
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Term, ParseError> {
        let pos = self.pos();
        match self.bump().cloned() {
            Some(Tok::Int(i)) => Ok(Term::Integer(i)),
            Some(Tok::Var(v)) => Ok(Term::Variable(v)),
            Some(Tok::Ident(name)) => {
                if self.peek() == Some(&Tok::LParen) {
                    return Err(ParseError::new(pos, "function terms are not supported"));
                }
                if self.options.step_constant && name == "t" {
                    Ok(Term::Step)
                } else {
                    Ok(Term::Symbol(name))
                }
            }
            Some(Tok::LParen) => {
                let inner = self.sum()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            _ => {
                self.idx -= 1;
                Err(self.unexpected("a term"))
            }
        }
    }
}

fn is_relation(tok: &Tok) -> bool {
    matches!(tok, Tok::Eq | Tok::Ne | Tok::Lt | Tok::Le | Tok::Gt | Tok::Ge)
}
