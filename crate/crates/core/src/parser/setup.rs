//! Setup scripts declare which predicates queries may assert.
//!
//! ```text
//! #domain edge(X1,X2) : X1=1..4, X2=1..4, X1!=X2.
//! #choice edge/2.
//! #define edge/2.
//! #query mark/2.
//! #show edge/2.
//! ```

use std::collections::BTreeSet;

use super::{tokenize, Cursor, ParseError, ParseOptions, Position, Tok};
use crate::lang::{unsafe_variable, Atom, Literal, Rule, Signature, Term};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SetupInstruction {
    /// `#domain p(V1,...,Vk) : c1, ..., cm.`
    Domain { schema: Atom, conditions: Vec<Literal> },
    /// `#choice p/k.` opens the predicate to free choice over its domain.
    Choice(Signature),
    /// `#define p/k.` makes the predicate hold exactly where asserted.
    Define(Signature),
    /// `#query p/k.` requires asserted atoms to hold.
    Query(Signature),
    Show(Signature),
}

impl SetupInstruction {
    fn signature(&self) -> Signature {
        match self {
            SetupInstruction::Domain { schema, .. } => schema.signature(),
            SetupInstruction::Choice(s)
            | SetupInstruction::Define(s)
            | SetupInstruction::Query(s)
            | SetupInstruction::Show(s) => s.clone(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SetupScript {
    pub instructions: Vec<SetupInstruction>,
    pub positions: Vec<Position>,
}

impl SetupScript {
    pub fn domain(&self, sig: &Signature) -> Option<(&Atom, &[Literal])> {
        self.instructions.iter().find_map(|i| match i {
            SetupInstruction::Domain { schema, conditions } if &schema.signature() == sig => {
                Some((schema, conditions.as_slice()))
            }
            _ => None,
        })
    }

    fn validate(&self) -> Result<(), ParseError> {
        let mut domains = BTreeSet::new();
        let mut defines = BTreeSet::new();
        let mut queries = BTreeSet::new();
        for (instr, pos) in self.instructions.iter().zip(&self.positions) {
            if let SetupInstruction::Domain { schema, conditions } = instr {
                let sig = schema.signature();
                if !domains.insert(sig.clone()) {
                    return Err(ParseError::new(*pos, format!("duplicate #domain for {sig}")));
                }
                let mut seen = BTreeSet::new();
                for arg in &schema.args {
                    match arg {
                        Term::Variable(v) if seen.insert(v.clone()) => {}
                        _ => {
                            return Err(ParseError::new(
                                *pos,
                                format!("#domain schema `{schema}` must list distinct variables"),
                            ))
                        }
                    }
                }
                let rule = Rule::normal(schema.clone(), conditions.clone());
                if let Some(var) = unsafe_variable(&rule) {
                    return Err(ParseError::new(
                        *pos,
                        format!("variable `{var}` of #domain {sig} is not bound by its conditions"),
                    ));
                }
            }
        }
        for (instr, pos) in self.instructions.iter().zip(&self.positions) {
            let sig = instr.signature();
            let kind = match instr {
                SetupInstruction::Domain { .. } => continue,
                SetupInstruction::Choice(_) => "#choice",
                SetupInstruction::Define(_) => {
                    if queries.contains(&sig) {
                        return Err(ParseError::new(*pos, format!("{sig} is declared both #query and #define")));
                    }
                    defines.insert(sig.clone());
                    "#define"
                }
                SetupInstruction::Query(_) => {
                    if defines.contains(&sig) {
                        return Err(ParseError::new(*pos, format!("{sig} is declared both #define and #query")));
                    }
                    queries.insert(sig.clone());
                    "#query"
                }
                SetupInstruction::Show(_) => "#show",
            };
            if !domains.contains(&sig) {
                return Err(ParseError::new(*pos, format!("{kind} {sig} has no matching #domain")));
            }
        }
        Ok(())
    }
}

pub fn parse_setup(text: &str) -> Result<SetupScript, ParseError> {
    let tokens = tokenize(text)?;
    let mut cur = Cursor::new(&tokens, ParseOptions::default());
    let mut script = SetupScript::default();
    while !cur.at_end() {
        let pos = cur.pos();
        let name = match cur.peek() {
            Some(Tok::Directive(name)) => name.clone(),
            _ => return Err(cur.unexpected("a setup instruction")),
        };
        cur.bump();
        let instr = match name.as_str() {
            "domain" => {
                let schema = cur.atom(false)?;
                let conditions = if cur.eat(&Tok::Colon) { cur.literals(&[Tok::Dot])? } else { Vec::new() };
                SetupInstruction::Domain { schema, conditions }
            }
            "choice" => SetupInstruction::Choice(cur.signature()?),
            "define" => SetupInstruction::Define(cur.signature()?),
            "query" => SetupInstruction::Query(cur.signature()?),
            "show" => SetupInstruction::Show(cur.signature()?),
            other => return Err(ParseError::new(pos, format!("unknown setup directive `#{other}`"))),
        };
        cur.expect(Tok::Dot)?;
        script.instructions.push(instr);
        script.positions.push(pos);
    }
    script.validate()?;
    Ok(script)
}
