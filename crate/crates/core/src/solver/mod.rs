//! Stable-model search over ground slices.
//!
//! Each slice is translated into clauses: rule bodies become auxiliary
//! variables, choice bounds become sequential counters, and every atom
//! closed by the slice gets its completion. Positive loops are handled
//! lazily: whenever the clause solver reaches a total assignment, atoms that
//! are true but cannot be derived from outside yield loop nogoods.
//!
//! Guards are plain variables. Solving assumes the requested guards true and
//! every other guard false; retired guards are falsified for good.

mod cdcl;
pub mod stable;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use thiserror::Error;

pub use cdcl::{Lit, Stats as SatStats, Var};
use cdcl::{Cdcl, Outcome};
pub use stable::{check_stable, Stability};

use crate::ground::GroundSlice;
use crate::lang::{GroundAtom, GroundHead, GroundRule, Guard, Signature};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolverError {
    #[error("slice {step} defines {atom}, which an earlier slice already fixed")]
    Redefinition { atom: GroundAtom, step: i64 },
    #[error("cannot add slice {step} after slice {last}")]
    StepOrder { step: i64, last: i64 },
}

/// Which atoms a model reports and distinguishes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Projection {
    /// Every atom whose predicate is not reserved.
    All,
    Signatures(BTreeSet<Signature>),
}

impl Projection {
    fn includes(&self, atom: &GroundAtom) -> bool {
        match self {
            Projection::All => !atom.predicate.starts_with('_'),
            Projection::Signatures(sigs) => sigs.contains(&atom.signature()),
        }
    }
}

/// Models found by one call to [`Solver::solve`], each sorted.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SolveResult {
    pub models: Vec<Vec<GroundAtom>>,
    /// False if enumeration stopped at the cap.
    pub exhausted: bool,
}

impl SolveResult {
    pub fn is_satisfiable(&self) -> bool {
        !self.models.is_empty()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    pub atoms: usize,
    pub guards: usize,
    pub rules: usize,
    pub loop_nogoods: u64,
    pub models: u64,
    pub sat: SatStats,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
enum Status {
    Closed,
    /// Declared external at the given step and not defined so far.
    External(i64),
}

#[derive(Clone, Debug)]
struct Support {
    head: Var,
    body: Lit,
    positive: Vec<Var>,
}

/// Positive supports of every closed atom; enough to find unfounded sets.
#[derive(Clone, Debug, Default)]
struct Supports {
    list: Vec<Support>,
    by_head: HashMap<Var, Vec<usize>>,
    by_positive: HashMap<Var, Vec<usize>>,
    atoms: Vec<Var>,
}

impl Supports {
    fn add(&mut self, head: Var, body: Lit, mut positive: Vec<Var>) {
        positive.sort_unstable();
        positive.dedup();
        let index = self.list.len();
        self.by_head.entry(head).or_default().push(index);
        for &p in &positive {
            self.by_positive.entry(p).or_default().push(index);
        }
        self.list.push(Support { head, body, positive });
    }

    /// Loop nogoods for the atoms that are true under `sat` but not
    /// derivable through supports with true bodies.
    fn check(&self, sat: &Cdcl) -> Vec<Vec<Lit>> {
        let mut founded: HashSet<Var> = HashSet::new();
        let mut missing: Vec<usize> = vec![usize::MAX; self.list.len()];
        let mut queue: Vec<Var> = Vec::new();
        for (i, s) in self.list.iter().enumerate() {
            if sat.current_value(s.body) {
                missing[i] = s.positive.len();
                if s.positive.is_empty() && founded.insert(s.head) {
                    queue.push(s.head);
                }
            }
        }
        while let Some(v) = queue.pop() {
            for &i in self.by_positive.get(&v).into_iter().flatten() {
                if missing[i] == usize::MAX {
                    continue;
                }
                missing[i] -= 1;
                let head = self.list[i].head;
                if missing[i] == 0 && founded.insert(head) {
                    queue.push(head);
                }
            }
        }
        let unfounded: BTreeSet<Var> = self
            .atoms
            .iter()
            .copied()
            .filter(|v| sat.current_value(Lit::pos(*v)) && !founded.contains(v))
            .collect();
        if unfounded.is_empty() {
            return Vec::new();
        }
        let mut external: Vec<Lit> = Vec::new();
        for v in &unfounded {
            for &i in self.by_head.get(v).into_iter().flatten() {
                let s = &self.list[i];
                if !s.positive.iter().any(|p| unfounded.contains(p)) {
                    external.push(s.body);
                }
            }
        }
        external.sort_unstable();
        external.dedup();
        unfounded
            .iter()
            .map(|&v| {
                let mut clause = vec![Lit::neg(v)];
                clause.extend(&external);
                clause
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct Solver {
    sat: Cdcl,
    truth: Lit,
    atoms: HashMap<GroundAtom, Var>,
    atom_order: Vec<(Var, GroundAtom)>,
    status: HashMap<Var, Status>,
    guards: BTreeMap<Guard, Var>,
    bodies: HashMap<Vec<Lit>, Lit>,
    supports: Supports,
    externals: BTreeMap<i64, Vec<Var>>,
    last_step: Option<i64>,
    rules: usize,
    loop_nogoods: u64,
    models: u64,
}

impl Default for Solver {
    fn default() -> Self {
        Self::new()
    }
}

impl Solver {
    pub fn new() -> Self {
        let mut sat = Cdcl::new();
        let truth = Lit::pos(sat.new_var());
        sat.add_clause(&[truth]);
        Solver {
            sat,
            truth,
            atoms: HashMap::new(),
            atom_order: Vec::new(),
            status: HashMap::new(),
            guards: BTreeMap::new(),
            bodies: HashMap::new(),
            supports: Supports::default(),
            externals: BTreeMap::new(),
            last_step: None,
            rules: 0,
            loop_nogoods: 0,
            models: 0,
        }
    }

    pub fn stats(&self) -> Stats {
        Stats {
            atoms: self.atom_order.len(),
            guards: self.guards.len(),
            rules: self.rules,
            loop_nogoods: self.loop_nogoods,
            models: self.models,
            sat: self.sat.stats().clone(),
        }
    }

    /// Atoms known to the solver, in the order they were introduced.
    pub fn atoms(&self) -> impl Iterator<Item = &GroundAtom> {
        self.atom_order.iter().map(|(_, a)| a)
    }

    pub fn is_external(&self, atom: &GroundAtom) -> bool {
        self.atoms
            .get(atom)
            .is_some_and(|v| matches!(self.status.get(v), Some(Status::External(_))))
    }

    fn atom_var(&mut self, atom: &GroundAtom) -> (Var, bool) {
        if let Some(&v) = self.atoms.get(atom) {
            return (v, false);
        }
        let v = self.sat.new_var();
        self.atoms.insert(atom.clone(), v);
        self.atom_order.push((v, atom.clone()));
        (v, true)
    }

    fn guard_var(&mut self, guard: &Guard) -> Var {
        if let Some(&v) = self.guards.get(guard) {
            return v;
        }
        let v = self.sat.new_var();
        self.guards.insert(guard.clone(), v);
        v
    }

    /// Falsifies `guard` permanently.
    pub fn fix_false(&mut self, guard: &Guard) {
        let v = self.guard_var(guard);
        self.sat.add_clause(&[Lit::neg(v)]);
    }

    pub fn is_fixed_false(&self, guard: &Guard) -> bool {
        self.guards.get(guard).is_some_and(|&v| self.sat.fixed_true(Lit::neg(v)))
    }

    /// Falsifies for good the externals of `step` that never got rules.
    pub fn forget_externals(&mut self, step: i64) {
        for v in self.externals.remove(&step).unwrap_or_default() {
            if self.status.get(&v) == Some(&Status::External(step)) {
                self.status.insert(v, Status::Closed);
                self.supports.atoms.push(v);
                self.sat.add_clause(&[Lit::neg(v)]);
            }
        }
    }

    fn body(&mut self, lits: &[Lit]) -> Lit {
        let mut key = lits.to_vec();
        key.sort_unstable();
        key.dedup();
        if key.windows(2).any(|w| w[0] == !w[1]) {
            return !self.truth;
        }
        match key.len() {
            0 => return self.truth,
            1 => return key[0],
            _ => {}
        }
        if let Some(&b) = self.bodies.get(&key) {
            return b;
        }
        let b = Lit::pos(self.sat.new_var());
        let mut long = vec![b];
        for &l in &key {
            self.sat.add_clause(&[!b, l]);
            long.push(!l);
        }
        self.sat.add_clause(&long);
        self.bodies.insert(key, b);
        b
    }

    fn disjunction(&mut self, lits: &[Lit]) -> Lit {
        if lits.len() == 1 {
            return lits[0];
        }
        let o = Lit::pos(self.sat.new_var());
        let mut long = vec![!o];
        for &l in lits {
            self.sat.add_clause(&[!l, o]);
            long.push(l);
        }
        self.sat.add_clause(&long);
        o
    }

    fn literals(&mut self, positive: &[GroundAtom], negative: &[GroundAtom], guards: &[Guard]) -> (Vec<Lit>, Vec<Var>) {
        let mut lits = Vec::new();
        let mut pos = Vec::new();
        for a in positive {
            let v = self.atoms[a];
            lits.push(Lit::pos(v));
            pos.push(v);
        }
        for a in negative {
            lits.push(Lit::neg(self.atoms[a]));
        }
        for g in guards {
            lits.push(Lit::pos(self.guard_var(g)));
        }
        (lits, pos)
    }

    /// Checks that `slice` may follow the slices added so far.
    pub fn check_slice(&self, slice: &GroundSlice) -> Result<(), SolverError> {
        if let Some(last) = self.last_step {
            if slice.step <= last {
                return Err(SolverError::StepOrder { step: slice.step, last });
            }
        }
        let heads = slice.rules.iter().flat_map(GroundRule::head_atoms);
        for atom in heads.chain(&slice.externals) {
            if let Some(v) = self.atoms.get(atom) {
                if self.status.get(v) == Some(&Status::Closed) {
                    return Err(SolverError::Redefinition {
                        atom: atom.clone(),
                        step: slice.step,
                    });
                }
            }
        }
        Ok(())
    }

    /// Adds the rules of a slice. Retired guards are falsified first. Fails
    /// without changing anything if [`Solver::check_slice`] fails.
    pub fn add_slice(&mut self, slice: &GroundSlice) -> Result<(), SolverError> {
        self.check_slice(slice)?;
        let heads: BTreeSet<&GroundAtom> = slice.rules.iter().flat_map(GroundRule::head_atoms).collect();
        self.last_step = Some(slice.step);
        for guard in &slice.retired {
            self.fix_false(guard);
        }

        // atoms whose completion this slice provides
        let mut closing: Vec<Var> = Vec::new();
        for atom in &slice.externals {
            let (v, fresh) = self.atom_var(atom);
            if heads.contains(atom) {
                closing.push(v);
            } else if fresh {
                self.status.insert(v, Status::External(slice.step));
                self.externals.entry(slice.step).or_default().push(v);
            }
        }
        for rule in &slice.rules {
            for atom in rule.atoms() {
                let (v, fresh) = self.atom_var(atom);
                let reopened = matches!(self.status.get(&v), Some(Status::External(_))) && heads.contains(atom);
                if fresh || reopened {
                    closing.push(v);
                }
            }
        }
        let mut seen = HashSet::new();
        closing.retain(|v| seen.insert(*v));

        let mut supports: HashMap<Var, Vec<Lit>> = HashMap::new();
        for rule in &slice.rules {
            self.rules += 1;
            let (lits, pos) = self.literals(&rule.positive, &rule.negative, &rule.guards);
            match &rule.head {
                GroundHead::Atom(head) => {
                    let h = self.atoms[head];
                    let b = self.body(&lits);
                    self.sat.add_clause(&[!b, Lit::pos(h)]);
                    supports.entry(h).or_default().push(b);
                    self.supports.add(h, b, pos);
                }
                GroundHead::Constraint => {
                    let clause: Vec<Lit> = lits.iter().map(|&l| !l).collect();
                    self.sat.add_clause(&clause);
                }
                GroundHead::Choice { lower, upper, elements } => {
                    let b = self.body(&lits);
                    let mut counted: Vec<(Var, Vec<Lit>, bool)> = Vec::new();
                    for e in elements {
                        let (cond, cond_pos) = self.literals(&e.positive, &e.negative, &[]);
                        let mut all = lits.clone();
                        all.extend(&cond);
                        let sigma = self.body(&all);
                        let h = self.atoms[&e.atom];
                        supports.entry(h).or_default().push(sigma);
                        let mut positive = pos.clone();
                        positive.extend(cond_pos);
                        self.supports.add(h, sigma, positive);

                        let c = self.body(&cond);
                        match counted.iter_mut().find(|(v, _, _)| *v == h) {
                            Some(entry) => {
                                entry.1.push(c);
                                entry.2 |= cond.is_empty();
                            }
                            None => counted.push((h, vec![c], cond.is_empty())),
                        }
                    }
                    if *lower > 0 || upper.is_some() {
                        let xs: Vec<Lit> = counted
                            .into_iter()
                            .map(|(h, conds, unconditional)| {
                                if unconditional {
                                    Lit::pos(h)
                                } else {
                                    let c = self.disjunction(&conds);
                                    self.body(&[Lit::pos(h), c])
                                }
                            })
                            .collect();
                        self.cardinality(b, &xs, *lower as usize, upper.map(|u| u as usize));
                    }
                }
            }
        }

        for v in closing {
            self.status.insert(v, Status::Closed);
            self.supports.atoms.push(v);
            let mut clause = vec![Lit::neg(v)];
            clause.extend(supports.get(&v).into_iter().flatten());
            self.sat.add_clause(&clause);
        }
        Ok(())
    }

    /// `body` implies `lower <= |{x in xs : x}| <= upper`, by a sequential
    /// counter whose register `r[j]` means at least `j+1` inputs so far.
    fn cardinality(&mut self, body: Lit, xs: &[Lit], lower: usize, upper: Option<usize>) {
        let n = xs.len();
        if lower > n {
            self.sat.add_clause(&[!body]);
            return;
        }
        let upper = upper.filter(|&u| u < n);
        let width = lower.max(upper.map_or(0, |u| u + 1));
        if width == 0 {
            return;
        }
        let f = !self.truth;
        let mut prev: Vec<Lit> = vec![f; width];
        for &x in xs {
            let mut cur = Vec::with_capacity(width);
            for j in 0..width {
                let r = Lit::pos(self.sat.new_var());
                self.sat.add_clause(&[!prev[j], r]);
                if j == 0 {
                    self.sat.add_clause(&[!x, r]);
                } else {
                    self.sat.add_clause(&[!x, !prev[j - 1], r]);
                    self.sat.add_clause(&[!r, prev[j], prev[j - 1]]);
                }
                self.sat.add_clause(&[!r, prev[j], x]);
                cur.push(r);
            }
            prev = cur;
        }
        if lower > 0 {
            self.sat.add_clause(&[!body, prev[lower - 1]]);
        }
        if let Some(u) = upper {
            self.sat.add_clause(&[!body, !prev[u]]);
        }
    }

    fn assumptions(&mut self, active: &[Guard]) -> Vec<Lit> {
        let active: BTreeSet<&Guard> = active.iter().collect();
        for g in &active {
            self.guard_var(g);
        }
        let mut lits: Vec<Lit> = self
            .guards
            .iter()
            .map(|(g, &v)| Lit::new(v, active.contains(g)))
            .collect();
        for vars in self.externals.values() {
            for &v in vars {
                if matches!(self.status.get(&v), Some(Status::External(_))) {
                    lits.push(Lit::neg(v));
                }
            }
        }
        lits
    }

    /// Enumerates up to `cap` stable models, distinct on the projected
    /// atoms, with `active` guards true and all other guards false.
    pub fn solve(&mut self, active: &[Guard], projection: &Projection, cap: usize) -> SolveResult {
        let mut assumptions = self.assumptions(active);
        let shown: Vec<(Var, GroundAtom)> = self
            .atom_order
            .iter()
            .filter(|(_, a)| projection.includes(a))
            .cloned()
            .collect();
        let enumeration = Lit::pos(self.sat.new_var());
        assumptions.push(enumeration);

        let mut result = SolveResult {
            models: Vec::new(),
            exhausted: true,
        };
        let Solver {
            sat,
            supports,
            loop_nogoods,
            ..
        } = self;
        loop {
            if result.models.len() >= cap {
                result.exhausted = false;
                break;
            }
            let outcome = sat.solve(&assumptions, &mut |s| {
                let nogoods = supports.check(s);
                *loop_nogoods += nogoods.len() as u64;
                nogoods
            });
            if outcome == Outcome::Unsat {
                break;
            }
            let mut model: Vec<GroundAtom> = Vec::new();
            let mut block = vec![!enumeration];
            for (v, atom) in &shown {
                let holds = sat.model_value(Lit::pos(*v));
                if holds {
                    model.push(atom.clone());
                }
                block.push(Lit::new(*v, !holds));
            }
            model.sort();
            result.models.push(model);
            if !sat.add_clause(&block) {
                break;
            }
        }
        self.models += result.models.len() as u64;
        self.sat.add_clause(&[!enumeration]);
        result
    }
}
