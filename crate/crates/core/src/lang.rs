//! Abstract syntax for the supported logic-program fragment and its ground
//! counterparts.
//!
//! Non-ground syntax ([`Term`], [`Atom`], [`Literal`], [`Rule`]) is what the
//! parsers produce and the compiler rewrites. Ground syntax ([`Value`],
//! [`GroundAtom`], [`GroundRule`]) is what the grounder hands to the solver.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Errors raised while evaluating or instantiating non-ground syntax.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LangError {
    #[error("type error: cannot apply `{op}` to symbolic constant `{operand}`")]
    Type { op: ArithOp, operand: String },
    #[error("usage error: {0}")]
    Usage(String),
    #[error("arithmetic overflow in `{0}`")]
    Overflow(String),
    #[error("grounding error: variable `{var}` is unbound in rule `{rule}`")]
    Unbound { var: String, rule: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
}

impl ArithOp {
    fn precedence(self) -> u8 {
        match self {
            ArithOp::Add | ArithOp::Sub => 1,
            ArithOp::Mul => 2,
        }
    }

    fn apply(self, left: i64, right: i64) -> Option<i64> {
        match self {
            ArithOp::Add => left.checked_add(right),
            ArithOp::Sub => left.checked_sub(right),
            ArithOp::Mul => left.checked_mul(right),
        }
    }
}

impl fmt::Display for ArithOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Variable(String),
    Symbol(String),
    Integer(i64),
    /// The step constant `t` of stepwise program parts.
    Step,
    Arith(ArithOp, Box<Term>, Box<Term>),
    Range(Box<Term>, Box<Term>),
}

/// A ground, fully evaluated term. Integers order before symbols.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Int(i64),
    Sym(Arc<str>),
}

impl Value {
    pub fn sym(name: &str) -> Value {
        Value::Sym(Arc::from(name))
    }

    pub fn to_term(&self) -> Term {
        match self {
            Value::Int(i) => Term::Integer(*i),
            Value::Sym(s) => Term::Symbol(s.to_string()),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Sym(s) => f.write_str(s),
        }
    }
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Variable(name.to_string())
    }

    pub fn sym(name: &str) -> Term {
        Term::Symbol(name.to_string())
    }

    pub fn arith(op: ArithOp, left: Term, right: Term) -> Term {
        Term::Arith(op, Box::new(left), Box::new(right))
    }

    pub fn range(low: Term, high: Term) -> Term {
        Term::Range(Box::new(low), Box::new(high))
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Variable(_) | Term::Step => false,
            Term::Symbol(_) | Term::Integer(_) => true,
            Term::Arith(_, l, r) | Term::Range(l, r) => l.is_ground() && r.is_ground(),
        }
    }

    pub fn contains_step(&self) -> bool {
        match self {
            Term::Step => true,
            Term::Variable(_) | Term::Symbol(_) | Term::Integer(_) => false,
            Term::Arith(_, l, r) | Term::Range(l, r) => l.contains_step() || r.contains_step(),
        }
    }

    pub fn contains_range(&self) -> bool {
        match self {
            Term::Range(..) => true,
            Term::Arith(_, l, r) => l.contains_range() || r.contains_range(),
            _ => false,
        }
    }

    pub fn collect_vars<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Term::Variable(v) => {
                out.insert(v.as_str());
            }
            Term::Arith(_, l, r) | Term::Range(l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
            _ => {}
        }
    }

    /// Replaces bound variables and the step constant, folding arithmetic
    /// whose operands became ground. Unbound variables are left in place.
    pub fn substitute(&self, binding: &Binding, step: Option<i64>) -> Result<Term, LangError> {
        Ok(match self {
            Term::Variable(v) => match binding.get(v) {
                Some(value) => value.to_term(),
                None => self.clone(),
            },
            Term::Step => match step {
                Some(s) => Term::Integer(s),
                None => Term::Step,
            },
            Term::Symbol(_) | Term::Integer(_) => self.clone(),
            Term::Arith(op, l, r) => {
                let folded = Term::arith(*op, l.substitute(binding, step)?, r.substitute(binding, step)?);
                if folded.is_ground() {
                    evaluate_term(&folded)?.to_term()
                } else {
                    folded
                }
            }
            Term::Range(l, r) => Term::range(l.substitute(binding, step)?, r.substitute(binding, step)?),
        })
    }

    /// Replaces symbolic constants named in `consts`.
    pub fn replace_consts(&self, consts: &[(String, Value)]) -> Term {
        match self {
            Term::Symbol(name) => consts
                .iter()
                .find(|(c, _)| c == name)
                .map(|(_, v)| v.to_term())
                .unwrap_or_else(|| self.clone()),
            Term::Arith(op, l, r) => Term::arith(*op, l.replace_consts(consts), r.replace_consts(consts)),
            Term::Range(l, r) => Term::range(l.replace_consts(consts), r.replace_consts(consts)),
            _ => self.clone(),
        }
    }

    fn fmt_operand(&self, f: &mut fmt::Formatter<'_>, parent: ArithOp, right: bool) -> fmt::Result {
        let wrap = match self {
            Term::Arith(op, ..) => {
                op.precedence() < parent.precedence() || (right && op.precedence() == parent.precedence())
            }
            Term::Integer(i) => *i < 0,
            Term::Range(..) => true,
            _ => false,
        };
        if wrap {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Variable(v) | Term::Symbol(v) => f.write_str(v),
            Term::Integer(i) => write!(f, "{i}"),
            Term::Step => f.write_str("t"),
            Term::Arith(op, l, r) => {
                l.fmt_operand(f, *op, false)?;
                write!(f, "{op}")?;
                r.fmt_operand(f, *op, true)
            }
            Term::Range(l, r) => write!(f, "{l}..{r}"),
        }
    }
}

/// Folds a ground term to a value.
pub fn evaluate_term(term: &Term) -> Result<Value, LangError> {
    match term {
        Term::Integer(i) => Ok(Value::Int(*i)),
        Term::Symbol(s) => Ok(Value::sym(s)),
        Term::Variable(v) => Err(LangError::Usage(format!("cannot evaluate variable `{v}`"))),
        Term::Step => Err(LangError::Usage("cannot evaluate the step constant `t` outside a step".into())),
        Term::Range(..) => Err(LangError::Usage(format!(
            "range `{term}` can only be expanded during grounding"
        ))),
        Term::Arith(op, l, r) => {
            let left = evaluate_term(l)?;
            let right = evaluate_term(r)?;
            match (&left, &right) {
                (Value::Int(a), Value::Int(b)) => op
                    .apply(*a, *b)
                    .map(Value::Int)
                    .ok_or_else(|| LangError::Overflow(term.to_string())),
                (Value::Sym(s), _) | (_, Value::Sym(s)) => Err(LangError::Type {
                    op: *op,
                    operand: s.to_string(),
                }),
            }
        }
    }
}

/// Variable assignment used during instantiation. Rules are small, so a
/// vector with linear lookup beats hashing here.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Binding {
    entries: Vec<(String, Value)>,
}

impl Binding {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, var: &str) -> Option<&Value> {
        self.entries.iter().rev().find(|(v, _)| v == var).map(|(_, value)| value)
    }

    pub fn bind(&mut self, var: &str, value: Value) {
        self.entries.push((var.to_string(), value));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn truncate(&mut self, len: usize) {
        self.entries.truncate(len);
    }
}

impl<S: Into<String>> FromIterator<(S, Value)> for Binding {
    fn from_iter<I: IntoIterator<Item = (S, Value)>>(iter: I) -> Self {
        Binding {
            entries: iter.into_iter().map(|(k, v)| (k.into(), v)).collect(),
        }
    }
}

/// Predicate identity: name and arity.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Signature {
    pub name: String,
    pub arity: usize,
}

impl Signature {
    pub fn new(name: &str, arity: usize) -> Self {
        Signature {
            name: name.to_string(),
            arity,
        }
    }

    pub fn is_reserved(&self) -> bool {
        is_reserved_name(&self.name)
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

/// Names starting with `_` belong to compiler-internal predicates.
pub fn is_reserved_name(name: &str) -> bool {
    name.starts_with('_')
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: &str, args: Vec<Term>) -> Self {
        Atom {
            predicate: predicate.to_string(),
            args,
        }
    }

    pub fn signature(&self) -> Signature {
        Signature::new(&self.predicate, self.args.len())
    }

    pub fn collect_vars<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        for arg in &self.args {
            arg.collect_vars(out);
        }
    }

    pub fn substitute(&self, binding: &Binding, step: Option<i64>) -> Result<Atom, LangError> {
        Ok(Atom {
            predicate: self.predicate.clone(),
            args: self
                .args
                .iter()
                .map(|a| a.substitute(binding, step))
                .collect::<Result<_, _>>()?,
        })
    }

    pub fn replace_consts(&self, consts: &[(String, Value)]) -> Atom {
        Atom {
            predicate: self.predicate.clone(),
            args: self.args.iter().map(|a| a.replace_consts(consts)).collect(),
        }
    }

    pub fn contains_step(&self) -> bool {
        self.args.iter().any(Term::contains_step)
    }

    /// Evaluates a ground atom without ranges.
    pub fn to_ground(&self) -> Result<GroundAtom, LangError> {
        Ok(GroundAtom::new(
            &self.predicate,
            self.args.iter().map(evaluate_term).collect::<Result<_, _>>()?,
        ))
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        write_args(f, &self.args)
    }
}

fn write_args<T: fmt::Display>(f: &mut fmt::Formatter<'_>, args: &[T]) -> fmt::Result {
    if args.is_empty() {
        return Ok(());
    }
    f.write_str("(")?;
    for (i, arg) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{arg}")?;
    }
    f.write_str(")")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Relation {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Relation {
    pub fn holds(self, left: &Value, right: &Value) -> bool {
        match self {
            Relation::Eq => left == right,
            Relation::Ne => left != right,
            Relation::Lt => left < right,
            Relation::Le => left <= right,
            Relation::Gt => left > right,
            Relation::Ge => left >= right,
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Eq => "=",
            Relation::Ne => "!=",
            Relation::Lt => "<",
            Relation::Le => "<=",
            Relation::Gt => ">",
            Relation::Ge => ">=",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Literal {
    Positive(Atom),
    Negative(Atom),
    Comparison(Term, Relation, Term),
}

impl Literal {
    pub fn substitute(&self, binding: &Binding, step: Option<i64>) -> Result<Literal, LangError> {
        Ok(match self {
            Literal::Positive(a) => Literal::Positive(a.substitute(binding, step)?),
            Literal::Negative(a) => Literal::Negative(a.substitute(binding, step)?),
            Literal::Comparison(l, rel, r) => {
                Literal::Comparison(l.substitute(binding, step)?, *rel, r.substitute(binding, step)?)
            }
        })
    }

    pub fn replace_consts(&self, consts: &[(String, Value)]) -> Literal {
        match self {
            Literal::Positive(a) => Literal::Positive(a.replace_consts(consts)),
            Literal::Negative(a) => Literal::Negative(a.replace_consts(consts)),
            Literal::Comparison(l, rel, r) => {
                Literal::Comparison(l.replace_consts(consts), *rel, r.replace_consts(consts))
            }
        }
    }

    pub fn collect_vars<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Literal::Positive(a) | Literal::Negative(a) => a.collect_vars(out),
            Literal::Comparison(l, _, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
        }
    }

    pub fn contains_step(&self) -> bool {
        match self {
            Literal::Positive(a) | Literal::Negative(a) => a.contains_step(),
            Literal::Comparison(l, _, r) => l.contains_step() || r.contains_step(),
        }
    }

    pub fn atom(&self) -> Option<&Atom> {
        match self {
            Literal::Positive(a) | Literal::Negative(a) => Some(a),
            Literal::Comparison(..) => None,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Positive(a) => write!(f, "{a}"),
            Literal::Negative(a) => write!(f, "not {a}"),
            Literal::Comparison(l, rel, r) => write!(f, "{l}{rel}{r}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ChoiceElement {
    pub atom: Atom,
    pub condition: Vec<Literal>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Head {
    Atom(Atom),
    /// `lower { a : c; ... } upper`; an absent upper bound means unbounded.
    Choice {
        lower: u32,
        upper: Option<u32>,
        elements: Vec<ChoiceElement>,
    },
    Constraint,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Rule {
    pub head: Head,
    pub body: Vec<Literal>,
}

impl Rule {
    pub fn fact(atom: Atom) -> Rule {
        Rule {
            head: Head::Atom(atom),
            body: Vec::new(),
        }
    }

    pub fn normal(head: Atom, body: Vec<Literal>) -> Rule {
        Rule {
            head: Head::Atom(head),
            body,
        }
    }

    pub fn constraint(body: Vec<Literal>) -> Rule {
        Rule {
            head: Head::Constraint,
            body,
        }
    }

    /// Atoms appearing in the head (choice element atoms included).
    pub fn head_atoms(&self) -> Vec<&Atom> {
        match &self.head {
            Head::Atom(a) => vec![a],
            Head::Choice { elements, .. } => elements.iter().map(|e| &e.atom).collect(),
            Head::Constraint => Vec::new(),
        }
    }

    /// Variables whose scope is the whole rule: head atom, body, and the
    /// variables of choice elements that also occur in the body.
    pub fn global_vars(&self) -> BTreeSet<&str> {
        let mut vars = BTreeSet::new();
        for lit in &self.body {
            lit.collect_vars(&mut vars);
        }
        if let Head::Atom(a) = &self.head {
            a.collect_vars(&mut vars);
        }
        vars
    }

    pub fn all_vars(&self) -> BTreeSet<&str> {
        let mut vars = self.global_vars();
        if let Head::Choice { elements, .. } = &self.head {
            for e in elements {
                e.atom.collect_vars(&mut vars);
                for lit in &e.condition {
                    lit.collect_vars(&mut vars);
                }
            }
        }
        vars
    }

    pub fn contains_step(&self) -> bool {
        let head = match &self.head {
            Head::Atom(a) => a.contains_step(),
            Head::Choice { elements, .. } => elements
                .iter()
                .any(|e| e.atom.contains_step() || e.condition.iter().any(Literal::contains_step)),
            Head::Constraint => false,
        };
        head || self.body.iter().any(Literal::contains_step)
    }

    /// Substitutes bound variables and the step constant, leaving unbound
    /// variables untouched (used for choice-element-local variables).
    pub fn substitute_partial(&self, binding: &Binding, step: Option<i64>) -> Result<Rule, LangError> {
        let head = match &self.head {
            Head::Atom(a) => Head::Atom(a.substitute(binding, step)?),
            Head::Choice { lower, upper, elements } => Head::Choice {
                lower: *lower,
                upper: *upper,
                elements: elements
                    .iter()
                    .map(|e| {
                        Ok(ChoiceElement {
                            atom: e.atom.substitute(binding, step)?,
                            condition: e
                                .condition
                                .iter()
                                .map(|l| l.substitute(binding, step))
                                .collect::<Result<_, LangError>>()?,
                        })
                    })
                    .collect::<Result<_, LangError>>()?,
            },
            Head::Constraint => Head::Constraint,
        };
        Ok(Rule {
            head,
            body: self
                .body
                .iter()
                .map(|l| l.substitute(binding, step))
                .collect::<Result<_, _>>()?,
        })
    }

    pub fn replace_consts(&self, consts: &[(String, Value)]) -> Rule {
        if consts.is_empty() {
            return self.clone();
        }
        let head = match &self.head {
            Head::Atom(a) => Head::Atom(a.replace_consts(consts)),
            Head::Choice { lower, upper, elements } => Head::Choice {
                lower: *lower,
                upper: *upper,
                elements: elements
                    .iter()
                    .map(|e| ChoiceElement {
                        atom: e.atom.replace_consts(consts),
                        condition: e.condition.iter().map(|l| l.replace_consts(consts)).collect(),
                    })
                    .collect(),
            },
            Head::Constraint => Head::Constraint,
        };
        Rule {
            head,
            body: self.body.iter().map(|l| l.replace_consts(consts)).collect(),
        }
    }

    /// Renders the rule with extra body literals appended, given as text.
    pub fn render_with(&self, extra: &[String]) -> String {
        let mut out = String::new();
        match &self.head {
            Head::Atom(a) => out.push_str(&a.to_string()),
            Head::Choice { lower, upper, elements } => {
                if *lower > 0 {
                    out.push_str(&format!("{lower} "));
                }
                out.push_str("{ ");
                for (i, e) in elements.iter().enumerate() {
                    if i > 0 {
                        out.push_str("; ");
                    }
                    out.push_str(&e.atom.to_string());
                    if !e.condition.is_empty() {
                        out.push_str(" : ");
                        out.push_str(&join(&e.condition, ", "));
                    }
                }
                out.push_str(" }");
                if let Some(u) = upper {
                    out.push_str(&format!(" {u}"));
                }
            }
            Head::Constraint => {}
        }
        let mut body: Vec<String> = self.body.iter().map(ToString::to_string).collect();
        body.extend(extra.iter().cloned());
        if !body.is_empty() {
            if matches!(self.head, Head::Constraint) {
                out.push_str(":- ");
            } else {
                out.push_str(" :- ");
            }
            out.push_str(&body.join(", "));
        } else if matches!(self.head, Head::Constraint) {
            out.push_str(":-");
        }
        out.push('.');
        out
    }
}

fn join<T: fmt::Display>(items: &[T], sep: &str) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(sep)
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render_with(&[]))
    }
}

/// Instantiates `rule` under `binding`, replacing the step constant by `step`.
///
/// Every variable of the rule must be bound; comparisons are left for the
/// grounder to evaluate.
pub fn substitute(rule: &Rule, binding: &Binding, step: i64) -> Result<Rule, LangError> {
    if let Some(var) = rule.all_vars().into_iter().find(|v| binding.get(v).is_none()) {
        return Err(LangError::Unbound {
            var: var.to_string(),
            rule: rule.to_string(),
        });
    }
    rule.substitute_partial(binding, Some(step))
}

/// Reports the first variable that violates the safety condition, if any.
///
/// A variable is bound when it occurs as a plain argument of a positive body
/// atom, or as one side of an `=` comparison whose other side is bound
/// (ranges included). Everything else must only use bound variables.
pub fn unsafe_variable(rule: &Rule) -> Option<String> {
    let bound = bound_vars(&rule.body, &BTreeSet::new());
    let mut needed = BTreeSet::new();
    for lit in &rule.body {
        lit.collect_vars(&mut needed);
    }
    match &rule.head {
        Head::Atom(a) => a.collect_vars(&mut needed),
        Head::Choice { elements, .. } => {
            for e in elements {
                let local = bound_vars(&e.condition, &bound);
                let mut local_needed = BTreeSet::new();
                e.atom.collect_vars(&mut local_needed);
                for lit in &e.condition {
                    lit.collect_vars(&mut local_needed);
                }
                if let Some(v) = local_needed.into_iter().find(|v| !local.contains(*v)) {
                    return Some(v.to_string());
                }
            }
        }
        Head::Constraint => {}
    }
    needed.into_iter().find(|v| !bound.contains(*v)).map(str::to_string)
}

/// Fixpoint of the binding relation over `lits`, starting from `initial`.
pub fn bound_vars(lits: &[Literal], initial: &BTreeSet<String>) -> BTreeSet<String> {
    let mut bound: BTreeSet<String> = initial.clone();
    for lit in lits {
        if let Literal::Positive(a) = lit {
            for arg in &a.args {
                if let Term::Variable(v) = arg {
                    bound.insert(v.clone());
                }
            }
        }
    }
    loop {
        let mut changed = false;
        for lit in lits {
            if let Literal::Comparison(l, Relation::Eq, r) = lit {
                for (var_side, other) in [(l, r), (r, l)] {
                    if let Term::Variable(v) = var_side {
                        if !bound.contains(v) && term_vars_bound(other, &bound) {
                            bound.insert(v.clone());
                            changed = true;
                        }
                    }
                }
            }
        }
        if !changed {
            return bound;
        }
    }
}

fn term_vars_bound(term: &Term, bound: &BTreeSet<String>) -> bool {
    let mut vars = BTreeSet::new();
    term.collect_vars(&mut vars);
    vars.iter().all(|v| bound.contains(*v))
}

/// A ground atom, e.g. `mark(1,2)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundAtom {
    pub predicate: Arc<str>,
    pub args: Vec<Value>,
}

impl GroundAtom {
    pub fn new(predicate: &str, args: Vec<Value>) -> Self {
        GroundAtom {
            predicate: Arc::from(predicate),
            args,
        }
    }

    pub fn signature(&self) -> Signature {
        Signature::new(&self.predicate, self.args.len())
    }

    pub fn to_atom(&self) -> Atom {
        Atom::new(&self.predicate, self.args.iter().map(Value::to_term).collect())
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        write_args(f, &self.args)
    }
}

/// A label naming a persistent assertion, e.g. `e(1)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label(pub GroundAtom);

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// An assumption literal guarding transient ground rules.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Guard {
    /// Holds while the labeled assertion is active.
    Hold(Label),
    /// Holds during the step before the given one.
    Expire(i64),
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Guard::Hold(label) => write!(f, "_hold({label})"),
            Guard::Expire(step) => write!(f, "_expire({step})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GroundElement {
    pub atom: GroundAtom,
    pub positive: Vec<GroundAtom>,
    pub negative: Vec<GroundAtom>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum GroundHead {
    Atom(GroundAtom),
    Choice {
        lower: u32,
        upper: Option<u32>,
        elements: Vec<GroundElement>,
    },
    Constraint,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GroundRule {
    pub head: GroundHead,
    pub positive: Vec<GroundAtom>,
    pub negative: Vec<GroundAtom>,
    pub guards: Vec<Guard>,
}

impl GroundRule {
    pub fn head_atoms(&self) -> Vec<&GroundAtom> {
        match &self.head {
            GroundHead::Atom(a) => vec![a],
            GroundHead::Choice { elements, .. } => elements.iter().map(|e| &e.atom).collect(),
            GroundHead::Constraint => Vec::new(),
        }
    }

    /// Every atom mentioned anywhere in the rule.
    pub fn atoms(&self) -> impl Iterator<Item = &GroundAtom> {
        let elements: Vec<&GroundAtom> = match &self.head {
            GroundHead::Choice { elements, .. } => elements
                .iter()
                .flat_map(|e| std::iter::once(&e.atom).chain(&e.positive).chain(&e.negative))
                .collect(),
            GroundHead::Atom(a) => vec![a],
            GroundHead::Constraint => Vec::new(),
        };
        elements.into_iter().chain(&self.positive).chain(&self.negative)
    }
}

impl fmt::Display for GroundRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.head {
            GroundHead::Atom(a) => write!(f, "{a}")?,
            GroundHead::Choice { lower, upper, elements } => {
                if *lower > 0 {
                    write!(f, "{lower} ")?;
                }
                f.write_str("{ ")?;
                for (i, e) in elements.iter().enumerate() {
                    if i > 0 {
                        f.write_str("; ")?;
                    }
                    write!(f, "{}", e.atom)?;
                    let cond: Vec<String> = e
                        .positive
                        .iter()
                        .map(ToString::to_string)
                        .chain(e.negative.iter().map(|a| format!("not {a}")))
                        .collect();
                    if !cond.is_empty() {
                        write!(f, " : {}", cond.join(", "))?;
                    }
                }
                f.write_str(" }")?;
                if let Some(u) = upper {
                    write!(f, " {u}")?;
                }
            }
            GroundHead::Constraint => {}
        }
        let body: Vec<String> = self
            .positive
            .iter()
            .map(ToString::to_string)
            .chain(self.negative.iter().map(|a| format!("not {a}")))
            .chain(self.guards.iter().map(ToString::to_string))
            .collect();
        if !body.is_empty() {
            let sep = if matches!(self.head, GroundHead::Constraint) { ":- " } else { " :- " };
            write!(f, "{sep}{}", body.join(", "))?;
        } else if matches!(self.head, GroundHead::Constraint) {
            f.write_str(":-")?;
        }
        f.write_str(".")
    }
}
