//! Bottom-up instantiation of the base part once and of the stepwise parts
//! per step.
//!
//! Grounding over-approximates: every atom that some rule could derive
//! (choice heads and declared externals included) counts as possible, and
//! negative literals never prune. Possible atoms are computed semi-naively;
//! constraints and choice rules are emitted once the fixpoint is reached.
//!
//! Rules grounded at an earlier step are never re-instantiated. A query's
//! plain rules therefore may not define predicates that earlier rules
//! already read; the assertion mechanism exists for exactly that case.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use thiserror::Error;

use crate::compile::{OnlineStep, ReactiveProgram, ASSERT_PREFIX, DOMAIN_PREFIX};
use crate::lang::{
    evaluate_term, Atom, Binding, GroundAtom, GroundElement, GroundHead, GroundRule, Guard, Head, LangError, Literal,
    Relation, Rule, Signature, Term, Value,
};
use crate::parser::Program;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroundError {
    #[error("in rule `{rule}`: {source}")]
    Lang { rule: String, source: LangError },
    #[error("in rule `{rule}`: range `{range}` needs integer bounds")]
    RangeBounds { rule: String, range: String },
    #[error("step {step}: {atom} lies outside the declared domain of {predicate}")]
    DomainViolation {
        atom: GroundAtom,
        predicate: Signature,
        step: i64,
    },
    #[error("step {step}: plain rule defines {predicate}, which earlier program parts already read; assert it instead")]
    Modularity { predicate: Signature, step: i64 },
    #[error("cannot ground step {step} after step {last}")]
    StepOrder { step: i64, last: i64 },
    #[error("the base program must be grounded exactly once, before any step")]
    BaseOrder,
    #[error("in rule `{rule}`: no literal can bind the remaining variables")]
    Unsafe { rule: String },
}

/// A rule together with the assumption literals guarding its instances.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GuardedRule {
    pub rule: Rule,
    pub guards: Vec<Guard>,
}

impl GuardedRule {
    pub fn plain(rule: Rule) -> Self {
        GuardedRule {
            rule,
            guards: Vec::new(),
        }
    }
}

/// Ground rules produced for one step.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GroundSlice {
    pub step: i64,
    pub rules: Vec<GroundRule>,
    /// External atoms declared at this step.
    pub externals: Vec<GroundAtom>,
    /// Guards to falsify permanently before this slice becomes active.
    pub retired: Vec<Guard>,
}

/// Possible tuples of every `_domain_p` predicate after base grounding.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DomainFacts {
    map: BTreeMap<Signature, BTreeSet<Vec<Value>>>,
}

impl DomainFacts {
    pub fn get(&self, sig: &Signature) -> Option<&BTreeSet<Vec<Value>>> {
        self.map.get(sig)
    }

    pub fn len(&self, sig: &Signature) -> usize {
        self.map.get(sig).map_or(0, BTreeSet::len)
    }

    pub fn is_empty(&self) -> bool {
        self.map.values().all(BTreeSet::is_empty)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Signature, &BTreeSet<Vec<Value>>)> {
        self.map.iter()
    }
}

#[derive(Clone, Debug, Default)]
struct Table {
    tuples: Vec<Vec<Value>>,
    index: HashSet<Vec<Value>>,
}

#[derive(Clone, Debug, Default)]
struct AtomStore {
    tables: HashMap<Signature, Table>,
}

impl AtomStore {
    fn insert(&mut self, atom: &GroundAtom) -> bool {
        let table = self.tables.entry(atom.signature()).or_default();
        if table.index.insert(atom.args.clone()) {
            table.tuples.push(atom.args.clone());
            true
        } else {
            false
        }
    }

    fn contains(&self, sig: &Signature, args: &[Value]) -> bool {
        self.tables.get(sig).is_some_and(|t| t.index.contains(args))
    }

    fn tuples(&self, sig: &Signature) -> &[Vec<Value>] {
        self.tables.get(sig).map_or(&[], |t| t.tuples.as_slice())
    }

    fn checkpoint(&self) -> HashMap<Signature, usize> {
        self.tables.iter().map(|(s, t)| (s.clone(), t.tuples.len())).collect()
    }

    fn rollback(&mut self, checkpoint: &HashMap<Signature, usize>) {
        self.tables.retain(|sig, _| checkpoint.contains_key(sig));
        for (sig, table) in self.tables.iter_mut() {
            let keep = checkpoint[sig];
            for tuple in table.tuples.drain(keep..) {
                table.index.remove(&tuple);
            }
        }
    }
}

/// Incremental grounder. Holds the possible atoms of everything grounded
/// so far.
#[derive(Clone, Debug, Default)]
pub struct Grounder {
    consts: Vec<(String, Value)>,
    store: AtomStore,
    domains: DomainFacts,
    read_predicates: HashSet<Signature>,
    last_step: Option<i64>,
}

impl Grounder {
    pub fn new(consts: Vec<(String, Value)>) -> Self {
        Grounder {
            consts,
            ..Default::default()
        }
    }

    pub fn domains(&self) -> &DomainFacts {
        &self.domains
    }

    pub fn last_step(&self) -> Option<i64> {
        self.last_step
    }

    /// Grounds the encoding together with the base part of `reactive`.
    pub fn ground_base(
        &mut self,
        encoding: &Program,
        reactive: &ReactiveProgram,
    ) -> Result<(GroundSlice, DomainFacts), GroundError> {
        if self.last_step.is_some() {
            return Err(GroundError::BaseOrder);
        }
        let rules: Vec<GuardedRule> = encoding
            .rules()
            .chain(&reactive.base)
            .cloned()
            .map(GuardedRule::plain)
            .collect();
        let ground = self.instantiate(&rules, &[])?;
        let mut domains = DomainFacts::default();
        for (sig, table) in &self.store.tables {
            if sig.name.starts_with(DOMAIN_PREFIX) {
                domains.map.insert(sig.clone(), table.tuples.iter().cloned().collect());
            }
        }
        self.domains = domains.clone();
        self.note_reads(&rules);
        self.last_step = Some(0);
        Ok((
            GroundSlice {
                step: 0,
                rules: ground,
                externals: Vec::new(),
                retired: Vec::new(),
            },
            domains,
        ))
    }

    /// Grounds the stepwise parts at `step` together with a compiled query.
    /// On error the grounder is left as it was.
    pub fn ground_step(
        &mut self,
        reactive: &ReactiveProgram,
        online: &OnlineStep,
        step: i64,
    ) -> Result<GroundSlice, GroundError> {
        match self.last_step {
            None => return Err(GroundError::BaseOrder),
            Some(last) if step <= last => return Err(GroundError::StepOrder { step, last }),
            _ => {}
        }
        for rule in &online.plain {
            for atom in rule.head_atoms() {
                let sig = atom.signature();
                if self.read_predicates.contains(&sig) {
                    return Err(GroundError::Modularity { predicate: sig, step });
                }
            }
        }

        let checkpoint = self.store.checkpoint();
        let result = self.ground_step_inner(reactive, online, step);
        if result.is_err() {
            self.store.rollback(&checkpoint);
        }
        result
    }

    fn ground_step_inner(
        &mut self,
        reactive: &ReactiveProgram,
        online: &OnlineStep,
        step: i64,
    ) -> Result<GroundSlice, GroundError> {
        let externals = self.external_instances(reactive, step)?;
        let rules = step_rules(reactive, online, step)?;
        let ground = self.instantiate(&rules, &externals)?;

        let declared: HashSet<&GroundAtom> = externals.iter().collect();
        for rule in &ground {
            for atom in rule.head_atoms() {
                if atom.predicate.starts_with(ASSERT_PREFIX) && !declared.contains(atom) {
                    let user = GroundAtom::new(
                        &atom.predicate[ASSERT_PREFIX.len()..],
                        atom.args[..atom.args.len().saturating_sub(1)].to_vec(),
                    );
                    let predicate = user.signature();
                    return Err(GroundError::DomainViolation {
                        atom: user,
                        predicate,
                        step,
                    });
                }
            }
        }

        self.note_reads(&rules);
        self.last_step = Some(step);
        Ok(GroundSlice {
            step,
            rules: ground,
            externals,
            retired: if step > 1 { vec![Guard::Expire(step)] } else { Vec::new() },
        })
    }

    fn external_instances(&self, reactive: &ReactiveProgram, step: i64) -> Result<Vec<GroundAtom>, GroundError> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        for ext in &reactive.externals {
            let lits = [Literal::Positive(ext.guard.clone())];
            let schema = ext.schema.substitute(&Binding::new(), Some(step)).map_err(|e| lang_err(&ext.schema, e))?;
            let rule_text = format!("#external {} : {}", ext.schema, ext.guard);
            let mut binding = Binding::new();
            Join::new(&self.store, &rule_text)
                .run(&lits, &mut binding, None, &mut |b| {
                    for atom in expand_atom(&schema, b, &rule_text)? {
                        if seen.insert(atom.clone()) {
                            out.push(atom);
                        }
                    }
                    Ok(())
                })?;
        }
        Ok(out)
    }

    fn note_reads(&mut self, rules: &[GuardedRule]) {
        for gr in rules {
            let rule = &gr.rule;
            let conditions = match &rule.head {
                Head::Choice { elements, .. } => elements.iter().flat_map(|e| e.condition.iter()).collect(),
                _ => Vec::new(),
            };
            for lit in rule.body.iter().chain(conditions) {
                if let Some(atom) = lit.atom() {
                    self.read_predicates.insert(atom.signature());
                }
            }
        }
    }

    /// Instantiates `rules` against the possible atoms, adding everything
    /// they can derive. `seeds` are made possible first.
    fn instantiate(&mut self, rules: &[GuardedRule], seeds: &[GroundAtom]) -> Result<Vec<GroundRule>, GroundError> {
        for atom in seeds {
            self.store.insert(atom);
        }
        let rules: Vec<GuardedRule> = rules
            .iter()
            .map(|r| GuardedRule {
                rule: r.rule.replace_consts(&self.consts),
                guards: r.guards.clone(),
            })
            .collect();

        let mut emitted = Emitted::default();
        let derivers = derivers(&rules);

        // Round 0 joins everything; later rounds need one delta atom.
        let mut delta = AtomStore::default();
        for d in &derivers {
            self.derive(d, None, &delta, &mut emitted)?;
        }
        loop {
            let mut next = AtomStore::default();
            for atom in emitted.pending.drain(..) {
                if self.store.insert(&atom) {
                    next.insert(&atom);
                }
            }
            if next.tables.is_empty() {
                break;
            }
            delta = next;
            for d in &derivers {
                for (i, lit) in d.body.iter().enumerate() {
                    if let Literal::Positive(atom) = lit {
                        if !delta.tuples(&atom.signature()).is_empty() {
                            self.derive(d, Some(i), &delta, &mut emitted)?;
                        }
                    }
                }
            }
        }

        for gr in &rules {
            match &gr.rule.head {
                Head::Constraint => self.emit_constraint(gr, &mut emitted)?,
                Head::Choice { .. } => self.emit_choice(gr, &mut emitted)?,
                Head::Atom(_) => {}
            }
        }
        Ok(emitted.rules)
    }

    fn derive(
        &self,
        d: &Deriver<'_>,
        delta_index: Option<usize>,
        delta: &AtomStore,
        emitted: &mut Emitted,
    ) -> Result<(), GroundError> {
        let text = d.source.rule.to_string();
        let mut binding = Binding::new();
        let delta = delta_index.map(|i| (i, delta));
        Join::new(&self.store, &text).run(&d.body, &mut binding, delta, &mut |b| {
            let heads = expand_atom(d.head, b, &text)?;
            if d.emit {
                let (positive, negative) = ground_body(&d.source.rule.body, b, &text)?;
                for head in &heads {
                    emitted.push(GroundRule {
                        head: GroundHead::Atom(head.clone()),
                        positive: positive.clone(),
                        negative: negative.clone(),
                        guards: d.source.guards.clone(),
                    });
                }
            }
            emitted.pending.extend(heads);
            Ok(())
        })
    }

    fn emit_constraint(&self, gr: &GuardedRule, emitted: &mut Emitted) -> Result<(), GroundError> {
        let text = gr.rule.to_string();
        let mut binding = Binding::new();
        Join::new(&self.store, &text).run(&gr.rule.body, &mut binding, None, &mut |b| {
            let (positive, negative) = ground_body(&gr.rule.body, b, &text)?;
            emitted.push(GroundRule {
                head: GroundHead::Constraint,
                positive,
                negative,
                guards: gr.guards.clone(),
            });
            Ok(())
        })
    }

    fn emit_choice(&self, gr: &GuardedRule, emitted: &mut Emitted) -> Result<(), GroundError> {
        let Head::Choice { lower, upper, elements } = &gr.rule.head else {
            unreachable!()
        };
        let text = gr.rule.to_string();
        let join = Join::new(&self.store, &text);
        let mut binding = Binding::new();
        join.run(&gr.rule.body, &mut binding, None, &mut |b| {
            let (positive, negative) = ground_body(&gr.rule.body, b, &text)?;
            let mut ground_elements: Vec<GroundElement> = Vec::new();
            for element in elements {
                let mut local = b.clone();
                join.run(&element.condition, &mut local, None, &mut |lb| {
                    let (cond_pos, cond_neg) = ground_body(&element.condition, lb, &text)?;
                    for atom in expand_atom(&element.atom, lb, &text)? {
                        let ge = GroundElement {
                            atom,
                            positive: cond_pos.clone(),
                            negative: cond_neg.clone(),
                        };
                        if !ground_elements.contains(&ge) {
                            ground_elements.push(ge);
                        }
                    }
                    Ok(())
                })?;
            }
            emitted.push(GroundRule {
                head: GroundHead::Choice {
                    lower: *lower,
                    upper: *upper,
                    elements: ground_elements,
                },
                positive,
                negative,
                guards: gr.guards.clone(),
            });
            Ok(())
        })
    }
}

/// All rules of one step, with the step constant replaced and guards set.
pub fn step_rules(reactive: &ReactiveProgram, online: &OnlineStep, step: i64) -> Result<Vec<GuardedRule>, GroundError> {
    let at_step = |rule: &Rule| rule.substitute_partial(&Binding::new(), Some(step)).map_err(|e| lang_err(rule, e));
    let mut rules = Vec::new();
    for rule in &reactive.cumulative {
        rules.push(GuardedRule::plain(at_step(rule)?));
    }
    for rule in &reactive.volatile {
        rules.push(GuardedRule {
            rule: at_step(rule)?,
            guards: vec![Guard::Expire(step + 1)],
        });
    }
    for rule in &online.plain {
        rules.push(GuardedRule::plain(rule.clone()));
    }
    for (rule, guard) in online.assertion_rules() {
        rules.push(GuardedRule {
            rule: rule.clone(),
            guards: vec![guard.clone()],
        });
    }
    Ok(rules)
}

/// Grounds a program in one shot, with `externals` treated as possible.
pub fn ground_program(
    rules: &[GuardedRule],
    consts: Vec<(String, Value)>,
    externals: &[GroundAtom],
) -> Result<Vec<GroundRule>, GroundError> {
    Grounder::new(consts).instantiate(rules, externals)
}

fn lang_err(rule: &impl ToString, source: LangError) -> GroundError {
    GroundError::Lang {
        rule: rule.to_string(),
        source,
    }
}

#[derive(Default)]
struct Emitted {
    rules: Vec<GroundRule>,
    seen: HashSet<GroundRule>,
    pending: Vec<GroundAtom>,
}

impl Emitted {
    fn push(&mut self, rule: GroundRule) {
        if self.seen.insert(rule.clone()) {
            self.rules.push(rule);
        }
    }
}

/// A head atom with the body it can be derived from. Choice elements
/// contribute their condition to the body.
struct Deriver<'a> {
    source: &'a GuardedRule,
    head: &'a Atom,
    body: Vec<Literal>,
    emit: bool,
}

fn derivers(rules: &[GuardedRule]) -> Vec<Deriver<'_>> {
    let mut out = Vec::new();
    for gr in rules {
        match &gr.rule.head {
            Head::Atom(head) => out.push(Deriver {
                source: gr,
                head,
                body: gr.rule.body.clone(),
                emit: true,
            }),
            Head::Choice { elements, .. } => {
                for e in elements {
                    let mut body = gr.rule.body.clone();
                    body.extend(e.condition.iter().cloned());
                    out.push(Deriver {
                        source: gr,
                        head: &e.atom,
                        body,
                        emit: false,
                    });
                }
            }
            Head::Constraint => {}
        }
    }
    out
}

fn eval(term: &Term, binding: &Binding) -> Option<Value> {
    match term {
        Term::Variable(v) => binding.get(v).cloned(),
        Term::Integer(i) => Some(Value::Int(*i)),
        Term::Symbol(s) => Some(Value::sym(s)),
        _ => evaluate_term(&term.substitute(binding, None).ok()?).ok(),
    }
}

fn vars_bound(term: &Term, binding: &Binding) -> bool {
    let mut vars = BTreeSet::new();
    term.collect_vars(&mut vars);
    vars.iter().all(|v| binding.get(v).is_some())
}

fn int_bounds(low: &Term, high: &Term, binding: &Binding, rule: &str) -> Result<Option<(i64, i64)>, GroundError> {
    match (eval(low, binding), eval(high, binding)) {
        (Some(Value::Int(l)), Some(Value::Int(h))) => Ok(Some((l, h))),
        (Some(_), Some(_)) => Err(GroundError::RangeBounds {
            rule: rule.to_string(),
            range: Term::range(low.clone(), high.clone()).to_string(),
        }),
        _ => Ok(None),
    }
}

/// Ground instances of `atom` under `binding`, expanding ranges.
/// Arguments whose arithmetic is undefined yield no instance.
fn expand_atom(atom: &Atom, binding: &Binding, rule: &str) -> Result<Vec<GroundAtom>, GroundError> {
    let mut tuples: Vec<Vec<Value>> = vec![Vec::with_capacity(atom.args.len())];
    for arg in &atom.args {
        let values: Vec<Value> = match arg {
            Term::Range(low, high) => match int_bounds(low, high, binding, rule)? {
                Some((l, h)) => (l..=h).map(Value::Int).collect(),
                None => Vec::new(),
            },
            other => eval(other, binding).into_iter().collect(),
        };
        tuples = tuples
            .into_iter()
            .flat_map(|t| {
                values.iter().map(move |v| {
                    let mut t = t.clone();
                    t.push(v.clone());
                    t
                })
            })
            .collect();
    }
    Ok(tuples
        .into_iter()
        .map(|args| GroundAtom {
            predicate: atom.predicate.as_str().into(),
            args,
        })
        .collect())
}

fn ground_body(
    body: &[Literal],
    binding: &Binding,
    rule: &str,
) -> Result<(Vec<GroundAtom>, Vec<GroundAtom>), GroundError> {
    let mut positive = Vec::new();
    let mut negative = Vec::new();
    for lit in body {
        let (atom, target) = match lit {
            Literal::Positive(a) => (a, &mut positive),
            Literal::Negative(a) => (a, &mut negative),
            Literal::Comparison(..) => continue,
        };
        let mut ground = expand_atom(atom, binding, rule)?;
        if ground.len() != 1 {
            return Err(GroundError::Unsafe { rule: rule.to_string() });
        }
        let ground = ground.pop().unwrap();
        if !target.contains(&ground) {
            target.push(ground);
        }
    }
    Ok((positive, negative))
}

/// Nested-loop join of body literals over the possible atoms, choosing the
/// next literal dynamically: cheap checks first, then bindings.
struct Join<'a> {
    store: &'a AtomStore,
    rule: &'a str,
}

enum Pick {
    Check(usize),
    Bind(usize),
    Match(usize),
}

impl<'a> Join<'a> {
    fn new(store: &'a AtomStore, rule: &'a str) -> Self {
        Join { store, rule }
    }

    fn run(
        &self,
        lits: &[Literal],
        binding: &mut Binding,
        delta: Option<(usize, &AtomStore)>,
        out: &mut dyn FnMut(&Binding) -> Result<(), GroundError>,
    ) -> Result<(), GroundError> {
        let mut done = vec![false; lits.len()];
        self.step(lits, &mut done, binding, delta, out)
    }

    fn pick(&self, lits: &[Literal], done: &[bool], binding: &Binding, delta: Option<usize>) -> Option<Pick> {
        let open = || lits.iter().enumerate().filter(|(i, _)| !done[*i]);
        for (i, lit) in open() {
            let ready = match lit {
                Literal::Positive(_) => false,
                Literal::Negative(a) => a.args.iter().all(|t| vars_bound(t, binding)),
                Literal::Comparison(l, _, r) => vars_bound(l, binding) && vars_bound(r, binding),
            };
            if ready {
                return Some(Pick::Check(i));
            }
        }
        for (i, lit) in open() {
            if let Literal::Comparison(l, Relation::Eq, r) = lit {
                let binds = |var: &Term, other: &Term| matches!(var, Term::Variable(_)) && vars_bound(other, binding);
                if binds(l, r) || binds(r, l) {
                    return Some(Pick::Bind(i));
                }
            }
        }
        if let Some(i) = delta.filter(|i| !done[*i]) {
            return Some(Pick::Match(i));
        }
        let matchable = |a: &Atom| {
            a.args
                .iter()
                .all(|t| matches!(t, Term::Variable(_)) || vars_bound(t, binding))
        };
        for (i, lit) in open() {
            if let Literal::Positive(a) = lit {
                if matchable(a) {
                    return Some(Pick::Match(i));
                }
            }
        }
        None
    }

    fn step(
        &self,
        lits: &[Literal],
        done: &mut Vec<bool>,
        binding: &mut Binding,
        delta: Option<(usize, &AtomStore)>,
        out: &mut dyn FnMut(&Binding) -> Result<(), GroundError>,
    ) -> Result<(), GroundError> {
        if done.iter().all(|d| *d) {
            return out(binding);
        }
        let pick = self
            .pick(lits, done, binding, delta.map(|(i, _)| i))
            .ok_or_else(|| GroundError::Unsafe {
                rule: self.rule.to_string(),
            })?;
        let mark = binding.len();
        match pick {
            Pick::Check(i) => {
                let holds = match &lits[i] {
                    Literal::Comparison(l, rel, r) => self.compare(l, *rel, r, binding)?,
                    // negative literals never prune during instantiation
                    _ => true,
                };
                if holds {
                    done[i] = true;
                    self.step(lits, done, binding, delta, out)?;
                    done[i] = false;
                }
            }
            Pick::Bind(i) => {
                let Literal::Comparison(l, _, r) = &lits[i] else { unreachable!() };
                let (var, other) = match l {
                    Term::Variable(v) if binding.get(v).is_none() => (v, r),
                    _ => match r {
                        Term::Variable(v) => (v, l),
                        _ => unreachable!(),
                    },
                };
                let values: Vec<Value> = match other {
                    Term::Range(low, high) => match int_bounds(low, high, binding, self.rule)? {
                        Some((lo, hi)) => (lo..=hi).map(Value::Int).collect(),
                        None => Vec::new(),
                    },
                    t => eval(t, binding).into_iter().collect(),
                };
                done[i] = true;
                for v in values {
                    binding.bind(var, v);
                    self.step(lits, done, binding, delta, out)?;
                    binding.truncate(mark);
                }
                done[i] = false;
            }
            Pick::Match(i) => {
                let Literal::Positive(atom) = &lits[i] else { unreachable!() };
                let sig = atom.signature();
                let source = match delta {
                    Some((d, store)) if d == i => store,
                    _ => self.store,
                };
                done[i] = true;
                if atom.args.iter().all(|t| vars_bound(t, binding)) {
                    let args: Option<Vec<Value>> = atom.args.iter().map(|t| eval(t, binding)).collect();
                    if let Some(args) = args {
                        if source.contains(&sig, &args) {
                            self.step(lits, done, binding, delta, out)?;
                        }
                    }
                } else {
                    for tuple in source.tuples(&sig) {
                        if unify(&atom.args, tuple, binding) {
                            self.step(lits, done, binding, delta, out)?;
                        }
                        binding.truncate(mark);
                    }
                }
                done[i] = false;
            }
        }
        Ok(())
    }

    fn compare(&self, l: &Term, rel: Relation, r: &Term, binding: &Binding) -> Result<bool, GroundError> {
        let Some(left) = eval(l, binding) else { return Ok(false) };
        if let Term::Range(low, high) = r {
            return Ok(match int_bounds(low, high, binding, self.rule)? {
                Some((lo, hi)) => matches!(left, Value::Int(v) if lo <= v && v <= hi) && rel == Relation::Eq,
                None => false,
            });
        }
        Ok(match eval(r, binding) {
            Some(right) => rel.holds(&left, &right),
            None => false,
        })
    }
}

fn unify(pattern: &[Term], tuple: &[Value], binding: &mut Binding) -> bool {
    for (term, value) in pattern.iter().zip(tuple) {
        match term {
            Term::Variable(v) => match binding.get(v) {
                Some(bound) if bound != value => return false,
                Some(_) => {}
                None => binding.bind(v, value.clone()),
            },
            other => {
                if eval(other, binding).as_ref() != Some(value) {
                    return false;
                }
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compile::{compile_query, compile_setup};
    use crate::parser::{parse_program, parse_query_block, parse_setup, QueryBlock};

    const ENCODING: &str = "\
#const n = 3.
node(X) :- edge(X,Y).
node(Y) :- edge(X,Y).
color(1..n).
1 { mark(X,C) : color(C) } 1 :- node(X).
:- edge(X,Y), mark(X,C), mark(Y,C).
#show mark/2.
";
    const SETUP: &str = "\
#domain edge(X1,X2) : X1=1..4, X2=1..4, X1!=X2.
#domain mark(X1,X2) : X1=1..4, color(X2).
#choice edge/2.
#define edge/2.
#query mark/2.
#show edge/2.
";

    fn setup() -> (Program, ReactiveProgram, Grounder) {
        let encoding = parse_program(ENCODING).unwrap();
        let reactive = compile_setup(&parse_setup(SETUP).unwrap());
        let grounder = Grounder::new(encoding.const_values().unwrap());
        (encoding, reactive, grounder)
    }

    fn sig(name: &str, arity: usize) -> Signature {
        Signature::new(name, arity)
    }

    /// Enumerates the domains straight from their descriptions.
    fn enumerated_domains() -> (usize, usize) {
        let edges = (1..=4).flat_map(|a| (1..=4).map(move |b| (a, b))).filter(|(a, b)| a != b).count();
        let marks = (1..=4).flat_map(|a| (1..=3).map(move |c| (a, c))).count();
        (edges, marks)
    }

    #[test]
    fn base_domains() {
        let (encoding, reactive, mut grounder) = setup();
        let (slice, domains) = grounder.ground_base(&encoding, &reactive).unwrap();
        let (edges, marks) = enumerated_domains();
        assert_eq!(domains.len(&sig("_domain_edge", 2)), edges);
        assert_eq!(domains.len(&sig("_domain_mark", 2)), marks);
        assert_eq!((edges, marks), (12, 12));
        let choices = slice
            .rules
            .iter()
            .filter(|r| matches!(&r.head, GroundHead::Choice { elements, .. }
                if elements.len() == 1 && &*elements[0].atom.predicate == "edge"))
            .count();
        assert_eq!(choices, 12);
        let mark_choices: Vec<_> = slice
            .rules
            .iter()
            .filter(|r| matches!(&r.head, GroundHead::Choice { elements, .. }
                if elements.iter().any(|e| &*e.atom.predicate == "mark")))
            .collect();
        assert_eq!(mark_choices.len(), 4);
        assert!(mark_choices.iter().all(|r| matches!(&r.head, GroundHead::Choice { lower: 1, upper: Some(1), elements } if elements.len() == 3)));
    }

    #[test]
    fn empty_base() {
        let mut grounder = Grounder::default();
        let (slice, domains) = grounder
            .ground_base(&Program::default(), &ReactiveProgram::default())
            .unwrap();
        assert!(slice.rules.is_empty());
        assert!(domains.is_empty());
    }

    fn count(slice: &GroundSlice, f: impl Fn(&GroundRule) -> bool) -> usize {
        slice.rules.iter().filter(|r| f(r)).count()
    }

    #[test]
    fn first_step() {
        let (encoding, reactive, mut grounder) = setup();
        grounder.ground_base(&encoding, &reactive).unwrap();
        let block = parse_query_block(
            "#query. #assert : e(1). edge(1,2). edge(1,3). edge(2,3). edge(2,4). edge(3,4). #endquery.",
        )
        .unwrap();
        let online = compile_query(&block, 1, &reactive).unwrap();
        let slice = grounder.ground_step(&reactive, &online, 1).unwrap();
        assert_eq!(slice.externals.len(), 24);
        assert!(slice.retired.is_empty());
        let assert_edge = GroundAtom::new("_assert_edge", vec![Value::Int(1), Value::Int(2), Value::Int(1)]);
        assert!(slice.rules.iter().any(|r| r.head == GroundHead::Atom(assert_edge.clone())
            && r.guards == vec![Guard::Hold(block.sections[0].label.clone().unwrap())]));
        // pass-on rules at step 1 refer to step 0, which has no atoms
        let derives = count(&slice, |r| matches!(&r.head, GroundHead::Atom(a) if a.predicate.starts_with("_derive_")));
        assert_eq!(derives, 24);
        let volatile = count(&slice, |r| r.guards == vec![Guard::Expire(2)]);
        assert_eq!(volatile, 3 * 12);
        assert_eq!(count(&slice, |r| matches!(r.head, GroundHead::Constraint) && r.guards.is_empty()), 0);
    }

    #[test]
    fn later_steps_chain_and_retire() {
        let (encoding, reactive, mut grounder) = setup();
        grounder.ground_base(&encoding, &reactive).unwrap();
        for step in 1..=3 {
            let online = compile_query(&QueryBlock::default(), step, &reactive).unwrap();
            let slice = grounder.ground_step(&reactive, &online, step).unwrap();
            // machinery is present even for empty queries
            assert_eq!(slice.externals.len(), 24);
            let derives = count(&slice, |r| matches!(&r.head, GroundHead::Atom(a) if a.predicate.starts_with("_derive_")));
            assert_eq!(derives, if step == 1 { 24 } else { 48 });
            assert_eq!(count(&slice, |r| r.guards == vec![Guard::Expire(step + 1)]), 36);
            assert_eq!(slice.retired, if step > 1 { vec![Guard::Expire(step)] } else { vec![] });
        }
    }

    #[test]
    fn domain_violation_leaves_state_untouched() {
        let (encoding, reactive, mut grounder) = setup();
        grounder.ground_base(&encoding, &reactive).unwrap();
        let block = parse_query_block("#query. #assert. edge(5,1). #endquery.").unwrap();
        let online = compile_query(&block, 1, &reactive).unwrap();
        match grounder.ground_step(&reactive, &online, 1) {
            Err(GroundError::DomainViolation { atom, predicate, step }) => {
                assert_eq!(atom.to_string(), "edge(5,1)");
                assert_eq!(predicate, sig("edge", 2));
                assert_eq!(step, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(grounder.last_step(), Some(0));
        assert!(grounder.store.tuples(&sig("_assert_edge", 3)).is_empty());
        let online = compile_query(&QueryBlock::default(), 1, &reactive).unwrap();
        assert!(grounder.ground_step(&reactive, &online, 1).is_ok());
    }

    #[test]
    fn step_order() {
        let (encoding, reactive, mut grounder) = setup();
        let online = compile_query(&QueryBlock::default(), 1, &reactive).unwrap();
        assert_eq!(grounder.ground_step(&reactive, &online, 1), Err(GroundError::BaseOrder));
        grounder.ground_base(&encoding, &reactive).unwrap();
        assert!(grounder.ground_base(&encoding, &reactive).is_err());
        grounder.ground_step(&reactive, &online, 2).unwrap();
        assert_eq!(
            grounder.ground_step(&reactive, &online, 2),
            Err(GroundError::StepOrder { step: 2, last: 2 })
        );
    }

    #[test]
    fn plain_rules_cannot_extend_read_predicates() {
        let (encoding, reactive, mut grounder) = setup();
        grounder.ground_base(&encoding, &reactive).unwrap();
        let block = parse_query_block("#query. edge(1,2). #endquery.").unwrap();
        let online = compile_query(&block, 1, &reactive).unwrap();
        assert!(matches!(
            grounder.ground_step(&reactive, &online, 1),
            Err(GroundError::Modularity { .. })
        ));
        let block = parse_query_block("#query. fresh(1). #assert. mark(X,1) :- fresh(X). #endquery.").unwrap();
        let online = compile_query(&block, 1, &reactive).unwrap();
        let slice = grounder.ground_step(&reactive, &online, 1).unwrap();
        let mark = GroundAtom::new("_assert_mark", vec![Value::Int(1), Value::Int(1), Value::Int(1)]);
        assert!(slice.rules.iter().any(|r| r.head == GroundHead::Atom(mark.clone())));
    }

    #[test]
    fn semi_naive_recursion() {
        let program = parse_program("e(1,2). e(2,3). e(3,4). r(X,Y) :- e(X,Y). r(X,Z) :- r(X,Y), e(Y,Z).").unwrap();
        let rules: Vec<GuardedRule> = program.rules().cloned().map(GuardedRule::plain).collect();
        let ground = ground_program(&rules, vec![], &[]).unwrap();
        let reach = ground
            .iter()
            .filter_map(|r| match &r.head {
                GroundHead::Atom(a) if &*a.predicate == "r" => Some(a.to_string()),
                _ => None,
            })
            .collect::<BTreeSet<_>>();
        assert_eq!(reach.len(), 6);
        // 3 facts + 3 base instances + 3 recursive instances
        assert_eq!(ground.len(), 9);
    }

    #[test]
    fn comparisons_are_evaluated_away() {
        let program = parse_program("p(1..3). q(X,Y) :- p(X), Y = X*2, Y > 2, not p(Y).").unwrap();
        let rules: Vec<GuardedRule> = program.rules().cloned().map(GuardedRule::plain).collect();
        let ground = ground_program(&rules, vec![], &[]).unwrap();
        let qs: Vec<String> = ground
            .iter()
            .filter(|r| matches!(&r.head, GroundHead::Atom(a) if &*a.predicate == "q"))
            .map(ToString::to_string)
            .collect();
        assert_eq!(qs, vec!["q(2,4) :- p(2), not p(4).", "q(3,6) :- p(3), not p(6)."]);
    }

    #[test]
    fn non_integer_range_bounds() {
        let program = parse_program("p(X) :- X = 1..a.").unwrap();
        let rules: Vec<GuardedRule> = program.rules().cloned().map(GuardedRule::plain).collect();
        assert!(matches!(
            ground_program(&rules, vec![], &[]),
            Err(GroundError::RangeBounds { .. })
        ));
    }

    #[test]
    fn incremental_matches_one_shot() {
        let (encoding, reactive, mut grounder) = setup();
        let (base, _) = grounder.ground_base(&encoding, &reactive).unwrap();
        let blocks = [
            "#query. #assert : e(1). edge(1,2). edge(2,3). #endquery.",
            "#query. #assert. mark(1,1). #endquery.",
            "#query. #assert : e(2). edge(1,4). #endquery.",
        ];
        let mut incremental: HashSet<GroundRule> = base.rules.into_iter().collect();
        let mut all_rules: Vec<GuardedRule> = encoding
            .rules()
            .chain(&reactive.base)
            .cloned()
            .map(GuardedRule::plain)
            .collect();
        let mut externals = Vec::new();
        for (i, text) in blocks.iter().enumerate() {
            let step = i as i64 + 1;
            let online = compile_query(&parse_query_block(text).unwrap(), step, &reactive).unwrap();
            let slice = grounder.ground_step(&reactive, &online, step).unwrap();
            externals.extend(slice.externals.iter().cloned());
            incremental.extend(slice.rules);
            all_rules.extend(step_rules(&reactive, &online, step).unwrap());
        }
        let one_shot: HashSet<GroundRule> = ground_program(&all_rules, encoding.const_values().unwrap(), &externals)
            .unwrap()
            .into_iter()
            .collect();
        assert_eq!(incremental, one_shot);
    }

    #[test]
    fn volatile_rules_carry_one_expire_guard() {
        let (encoding, reactive, mut grounder) = setup();
        grounder.ground_base(&encoding, &reactive).unwrap();
        let block = parse_query_block("#query. #assert : e(1). edge(1,2). #endquery.").unwrap();
        let online = compile_query(&block, 1, &reactive).unwrap();
        let slice = grounder.ground_step(&reactive, &online, 1).unwrap();
        for rule in &slice.rules {
            match &rule.head {
                GroundHead::Constraint => assert_eq!(rule.guards, vec![Guard::Expire(2)]),
                GroundHead::Atom(a) if a.predicate.starts_with("_assert_") => assert_eq!(rule.guards.len(), 1),
                _ => assert!(rule.guards.is_empty(), "{rule}"),
            }
        }
    }
}
