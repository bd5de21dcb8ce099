//! Compilation of setup scripts into reactive program parts, and of query
//! blocks into online steps.
//!
//! For every assertable predicate `p/k` the setup compiler introduces three
//! internal families: `_domain_p/k` (what may be asserted), `_assert_p/k+1`
//! (step-indexed inputs fed by queries), and `_derive_p/k+1` (assertions
//! still active at a step). Stepwise rules mention the step constant `t`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::lang::{ArithOp, Atom, ChoiceElement, Guard, Head, Label, Literal, Rule, Signature, Term};
use crate::parser::{QueryBlock, SetupInstruction, SetupScript};

pub const DOMAIN_PREFIX: &str = "_domain_";
pub const ASSERT_PREFIX: &str = "_assert_";
pub const DERIVE_PREFIX: &str = "_derive_";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error("query {query}: {predicate} is not assertable (declare it with #define or #query)")]
    NotAssertable { predicate: Signature, query: i64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AssertMode {
    /// Asserted atoms must hold, and nothing else of the predicate may.
    Define,
    /// Asserted atoms must hold.
    Query,
}

/// `#external _assert_p(X1,...,Xk,t) : _domain_p(X1,...,Xk).`
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExternalDecl {
    pub schema: Atom,
    pub guard: Atom,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReactiveProgram {
    pub base: Vec<Rule>,
    pub cumulative: Vec<Rule>,
    pub externals: Vec<ExternalDecl>,
    pub volatile: Vec<Rule>,
    pub shows: BTreeSet<Signature>,
    pub assertable: BTreeMap<Signature, AssertMode>,
}

impl ReactiveProgram {
    /// Renders the three parts in the `#base` / `#cumulative t` /
    /// `#volatile t` layout of a reactive program.
    pub fn render(&self) -> String {
        let mut out = String::from("#base.\n");
        for rule in &self.base {
            let _ = writeln!(out, "{rule}");
        }
        for sig in &self.shows {
            let _ = writeln!(out, "#show {sig}.");
        }
        out.push_str("\n#cumulative t.\n");
        for ext in &self.externals {
            let _ = writeln!(out, "#external {} : {}.", ext.schema, ext.guard);
        }
        for rule in &self.cumulative {
            let _ = writeln!(out, "{rule}");
        }
        out.push_str("\n#volatile t.\n");
        for rule in &self.volatile {
            let _ = writeln!(out, "{rule}");
        }
        out
    }
}

pub fn domain_name(predicate: &str) -> String {
    format!("{DOMAIN_PREFIX}{predicate}")
}

pub fn assert_name(predicate: &str) -> String {
    format!("{ASSERT_PREFIX}{predicate}")
}

pub fn derive_name(predicate: &str) -> String {
    format!("{DERIVE_PREFIX}{predicate}")
}

fn schema_vars(arity: usize) -> Vec<Term> {
    (1..=arity).map(|i| Term::Variable(format!("X{i}"))).collect()
}

fn with_last(mut args: Vec<Term>, last: Term) -> Vec<Term> {
    args.push(last);
    args
}

pub fn compile_setup(script: &SetupScript) -> ReactiveProgram {
    let mut program = ReactiveProgram::default();
    for instr in &script.instructions {
        match instr {
            SetupInstruction::Domain { schema, conditions } => {
                program.base.push(Rule::normal(
                    Atom::new(&domain_name(&schema.predicate), schema.args.clone()),
                    conditions.clone(),
                ));
            }
            SetupInstruction::Choice(sig) => {
                let vars = schema_vars(sig.arity);
                program.base.push(Rule {
                    head: Head::Choice {
                        lower: 0,
                        upper: None,
                        elements: vec![ChoiceElement {
                            atom: Atom::new(&sig.name, vars.clone()),
                            condition: Vec::new(),
                        }],
                    },
                    body: vec![Literal::Positive(Atom::new(&domain_name(&sig.name), vars))],
                });
            }
            SetupInstruction::Show(sig) => {
                program.shows.insert(sig.clone());
            }
            SetupInstruction::Define(sig) => compile_assertable(&mut program, sig, AssertMode::Define),
            SetupInstruction::Query(sig) => compile_assertable(&mut program, sig, AssertMode::Query),
        }
    }
    program
}

fn compile_assertable(program: &mut ReactiveProgram, sig: &Signature, mode: AssertMode) {
    let vars = schema_vars(sig.arity);
    let user = Atom::new(&sig.name, vars.clone());
    let domain = Atom::new(&domain_name(&sig.name), vars.clone());
    let asserted = Atom::new(&assert_name(&sig.name), with_last(vars.clone(), Term::Step));
    let derived = Atom::new(&derive_name(&sig.name), with_last(vars.clone(), Term::Step));
    let previous = Atom::new(
        &derive_name(&sig.name),
        with_last(vars, Term::arith(ArithOp::Sub, Term::Step, Term::Integer(1))),
    );

    program.externals.push(ExternalDecl {
        schema: asserted.clone(),
        guard: domain,
    });
    program
        .cumulative
        .push(Rule::normal(derived.clone(), vec![Literal::Positive(asserted)]));
    program
        .cumulative
        .push(Rule::normal(derived.clone(), vec![Literal::Positive(previous)]));
    program.volatile.push(Rule::constraint(vec![
        Literal::Positive(derived.clone()),
        Literal::Negative(user.clone()),
    ]));
    if mode == AssertMode::Define {
        program
            .volatile
            .push(Rule::constraint(vec![Literal::Positive(user), Literal::Negative(derived)]));
    }
    program.assertable.insert(sig.clone(), mode);
}

/// A compiled assertion section: rewritten rules sharing one guard.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompiledSection {
    pub label: Option<Label>,
    pub guard: Guard,
    pub rules: Vec<Rule>,
}

/// One query block rewritten for step `q`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OnlineStep {
    pub q: i64,
    pub forget: i64,
    pub plain: Vec<Rule>,
    pub sections: Vec<CompiledSection>,
    pub retracts: Vec<Label>,
}

impl OnlineStep {
    pub fn assertion_rules(&self) -> impl Iterator<Item = (&Rule, &Guard)> {
        self.sections
            .iter()
            .flat_map(|s| s.rules.iter().map(move |r| (r, &s.guard)))
    }
}

pub fn compile_query(block: &QueryBlock, q: i64, reactive: &ReactiveProgram) -> Result<OnlineStep, CompileError> {
    let mut sections = Vec::with_capacity(block.sections.len());
    for section in &block.sections {
        let guard = match &section.label {
            Some(label) => Guard::Hold(label.clone()),
            None => Guard::Expire(q + 1),
        };
        let rules = section
            .rules
            .iter()
            .map(|rule| rewrite_heads(rule, q, reactive))
            .collect::<Result<_, _>>()?;
        sections.push(CompiledSection {
            label: section.label.clone(),
            guard,
            rules,
        });
    }
    Ok(OnlineStep {
        q,
        forget: q - 1,
        plain: block.plain.clone(),
        sections,
        retracts: block.retracts.clone(),
    })
}

fn rewrite_atom(atom: &Atom, q: i64, reactive: &ReactiveProgram) -> Result<Atom, CompileError> {
    let sig = atom.signature();
    if !reactive.assertable.contains_key(&sig) {
        return Err(CompileError::NotAssertable { predicate: sig, query: q });
    }
    Ok(Atom::new(
        &assert_name(&atom.predicate),
        with_last(atom.args.clone(), Term::Integer(q)),
    ))
}

fn rewrite_heads(rule: &Rule, q: i64, reactive: &ReactiveProgram) -> Result<Rule, CompileError> {
    let head = match &rule.head {
        Head::Atom(a) => Head::Atom(rewrite_atom(a, q, reactive)?),
        Head::Choice { lower, upper, elements } => Head::Choice {
            lower: *lower,
            upper: *upper,
            elements: elements
                .iter()
                .map(|e| {
                    Ok(ChoiceElement {
                        atom: rewrite_atom(&e.atom, q, reactive)?,
                        condition: e.condition.clone(),
                    })
                })
                .collect::<Result<_, CompileError>>()?,
        },
        Head::Constraint => Head::Constraint,
    };
    Ok(Rule {
        head,
        body: rule.body.clone(),
    })
}

/// Renders an online step in the stream syntax of a reactive solver
/// front-end. Guards appear as trailing body literals.
pub fn render_online_step(step: &OnlineStep) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "#step {} : 0.", step.q);
    let _ = writeln!(out, "#forget {}.", step.forget);
    for label in &step.retracts {
        let _ = writeln!(out, "#retract : {label}.");
    }
    for rule in &step.plain {
        let _ = writeln!(out, "{rule}");
    }
    for section in &step.sections {
        match &section.label {
            Some(label) => {
                let _ = writeln!(out, "#assert : {label}.");
            }
            None => out.push_str("#volatile : 1.\n"),
        }
        let guard = [section.guard.to_string()];
        for rule in &section.rules {
            let _ = writeln!(out, "{}", rule.render_with(&guard));
        }
    }
    out.push_str("#endstep.\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{GroundAtom, Value};
    use crate::parser::{parse_query_block, parse_setup};

    const SETUP: &str = "\
#domain edge(X1,X2) : X1=1..4, X2=1..4, X1!=X2.
#domain mark(X1,X2) : X1=1..4, color(X2).
#choice edge/2.
#define edge/2.
#query mark/2.
#show edge/2.
";

    fn coloring() -> ReactiveProgram {
        compile_setup(&parse_setup(SETUP).unwrap())
    }

    #[test]
    fn coloring_setup_shape() {
        let p = coloring();
        assert_eq!(p.base.len(), 3);
        assert_eq!(p.base.iter().filter(|r| matches!(r.head, Head::Choice { .. })).count(), 1);
        assert_eq!(p.shows.len(), 1);
        assert_eq!(p.externals.len(), 2);
        assert_eq!(p.cumulative.len(), 4);
        assert_eq!(p.volatile.len(), 3);
        assert_eq!(p.assertable[&Signature::new("edge", 2)], AssertMode::Define);
        assert_eq!(p.assertable[&Signature::new("mark", 2)], AssertMode::Query);
    }

    #[test]
    fn coloring_setup_rules() {
        let rendered = coloring().render();
        for expected in [
            "_domain_edge(X1,X2) :- X1=1..4, X2=1..4, X1!=X2.",
            "_domain_mark(X1,X2) :- X1=1..4, color(X2).",
            "{ edge(X1,X2) } :- _domain_edge(X1,X2).",
            "#show edge/2.",
            "#external _assert_edge(X1,X2,t) : _domain_edge(X1,X2).",
            "_derive_edge(X1,X2,t) :- _assert_edge(X1,X2,t).",
            "_derive_edge(X1,X2,t) :- _derive_edge(X1,X2,t-1).",
            "#external _assert_mark(X1,X2,t) : _domain_mark(X1,X2).",
            "_derive_mark(X1,X2,t) :- _assert_mark(X1,X2,t).",
            "_derive_mark(X1,X2,t) :- _derive_mark(X1,X2,t-1).",
            ":- _derive_mark(X1,X2,t), not mark(X1,X2).",
            ":- _derive_edge(X1,X2,t), not edge(X1,X2).",
            ":- edge(X1,X2), not _derive_edge(X1,X2,t).",
        ] {
            assert!(rendered.contains(expected), "missing `{expected}` in\n{rendered}");
        }
    }

    #[test]
    fn emitted_rules_are_safe() {
        let p = coloring();
        for rule in p.base.iter().chain(&p.cumulative).chain(&p.volatile) {
            assert_eq!(crate::lang::unsafe_variable(rule), None, "{rule}");
        }
    }

    #[test]
    fn only_choice_rules_define_user_predicates() {
        let p = coloring();
        for rule in p.base.iter().chain(&p.cumulative).chain(&p.volatile) {
            for atom in rule.head_atoms() {
                if !atom.predicate.starts_with('_') {
                    assert!(matches!(rule.head, Head::Choice { .. }), "{rule}");
                }
            }
        }
    }

    #[test]
    fn empty_setup() {
        assert_eq!(compile_setup(&SetupScript::default()), ReactiveProgram::default());
    }

    #[test]
    fn single_query_predicate() {
        let p = compile_setup(&parse_setup("#domain p(X) : X=1..2.\n#query p/1.").unwrap());
        assert_eq!(p.externals.len(), 1);
        assert_eq!(p.cumulative.len(), 2);
        assert_eq!(p.volatile.len(), 1);
        assert_eq!(p.base.len(), 1);
        assert!(!p.base.iter().any(|r| matches!(r.head, Head::Choice { .. })));
    }

    fn e(i: i64) -> Label {
        Label(GroundAtom::new("e", vec![Value::Int(i)]))
    }

    #[test]
    fn labeled_query() {
        let block = parse_query_block(
            "#query. #assert : e(1). edge(1,2). edge(1,3). edge(2,3). edge(2,4). edge(3,4). #endquery.",
        )
        .unwrap();
        let step = compile_query(&block, 1, &coloring()).unwrap();
        assert_eq!(step.forget, 0);
        let rules: Vec<_> = step.assertion_rules().collect();
        assert_eq!(rules.len(), 5);
        assert!(rules.iter().all(|(_, g)| **g == Guard::Hold(e(1))));
        assert_eq!(rules[0].0.to_string(), "_assert_edge(1,2,1).");
        let text = render_online_step(&step);
        assert!(text.starts_with("#step 1 : 0."));
        assert!(text.contains("_assert_edge(1,2,1)"));
        assert!(text.contains("#assert : e(1).\n_assert_edge(1,2,1) :- _hold(e(1))."));
    }

    #[test]
    fn unlabeled_query_expires_next_step() {
        let block = parse_query_block("#query. #assert. mark(1,1). #endquery.").unwrap();
        for (q, expire) in [(2, 3), (4, 5)] {
            let step = compile_query(&block, q, &coloring()).unwrap();
            let (rule, guard) = step.assertion_rules().next().unwrap();
            assert_eq!(*guard, Guard::Expire(expire));
            assert_eq!(rule.to_string(), format!("_assert_mark(1,1,{q})."));
        }
        let text = render_online_step(&compile_query(&block, 2, &coloring()).unwrap());
        assert!(text.contains("#volatile : 1.\n_assert_mark(1,1,2) :- _expire(3)."), "{text}");
    }

    #[test]
    fn empty_block_rendering() {
        let step = compile_query(&QueryBlock::default(), 7, &coloring()).unwrap();
        let text = render_online_step(&step);
        assert_eq!(
            text.split_whitespace().collect::<Vec<_>>().join(" "),
            "#step 7 : 0. #forget 6. #endstep."
        );
    }

    #[test]
    fn rejects_unassertable_heads() {
        let block = parse_query_block("#query. #assert. color(1). #endquery.").unwrap();
        let err = compile_query(&block, 3, &coloring()).unwrap_err();
        assert_eq!(
            err,
            CompileError::NotAssertable {
                predicate: Signature::new("color", 1),
                query: 3
            }
        );
        assert!(err.to_string().contains("query 3"));
    }

    #[test]
    fn distinct_steps_never_share_assert_atoms() {
        let block = parse_query_block("#query. #assert. mark(1,1). #assert : e(9). edge(1,2). #endquery.").unwrap();
        let heads = |q| -> BTreeSet<String> {
            compile_query(&block, q, &coloring())
                .unwrap()
                .assertion_rules()
                .flat_map(|(r, _)| r.head_atoms().into_iter().map(ToString::to_string).collect::<Vec<_>>())
                .collect()
        };
        for q1 in 1..6 {
            for q2 in (q1 + 1)..6 {
                assert!(heads(q1).is_disjoint(&heads(q2)));
            }
        }
    }

    #[test]
    fn rule_bodies_and_constraints_are_kept() {
        let block = parse_query_block("#query. p(1). #assert. mark(X,1) :- p(X). :- mark(2,2). #endquery.").unwrap();
        let step = compile_query(&block, 2, &coloring()).unwrap();
        assert_eq!(step.plain.len(), 1);
        let rules: Vec<String> = step.assertion_rules().map(|(r, _)| r.to_string()).collect();
        assert_eq!(rules, vec!["_assert_mark(X,1,2) :- p(X).", ":- mark(2,2)."]);
    }
}
