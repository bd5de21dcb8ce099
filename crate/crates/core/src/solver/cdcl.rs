//! Conflict-driven clause learning over propositional clauses, with
//! MiniSat-style assumptions and a hook that may reject total assignments.

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub u32);

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit(u32);

impl Lit {
    pub fn new(var: Var, positive: bool) -> Lit {
        Lit(var.0 * 2 + u32::from(!positive))
    }

    pub fn pos(var: Var) -> Lit {
        Lit::new(var, true)
    }

    pub fn neg(var: Var) -> Lit {
        Lit::new(var, false)
    }

    pub fn var(self) -> Var {
        Var(self.0 / 2)
    }

    pub fn is_positive(self) -> bool {
        self.0 % 2 == 0
    }

    fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;

    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
enum Value {
    True,
    False,
    Unassigned,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    pub decisions: u64,
    pub propagations: u64,
    pub conflicts: u64,
    pub learnt_clauses: u64,
    /// Clauses handed back by the total-assignment check.
    pub lazy_clauses: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Sat,
    Unsat,
}

#[derive(Clone, Debug)]
struct Clause {
    lits: Vec<Lit>,
}

#[derive(Clone, Debug, Default)]
pub struct Cdcl {
    assigns: Vec<Option<bool>>,
    levels: Vec<u32>,
    reasons: Vec<Option<usize>>,
    activity: Vec<f64>,
    seen: Vec<bool>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    clauses: Vec<Clause>,
    watches: Vec<Vec<usize>>,
    var_inc: f64,
    unsat: bool,
    model: Vec<bool>,
    stats: Stats,
}

impl Cdcl {
    pub fn new() -> Self {
        Cdcl {
            var_inc: 1.0,
            ..Default::default()
        }
    }

    pub fn new_var(&mut self) -> Var {
        let v = Var(self.assigns.len() as u32);
        self.assigns.push(None);
        self.levels.push(0);
        self.reasons.push(None);
        self.activity.push(0.0);
        self.seen.push(false);
        self.watches.push(Vec::new());
        self.watches.push(Vec::new());
        v
    }

    pub fn stats(&self) -> &Stats {
        &self.stats
    }

    fn value(&self, lit: Lit) -> Value {
        match self.assigns[lit.var().0 as usize] {
            None => Value::Unassigned,
            Some(b) if b == lit.is_positive() => Value::True,
            Some(_) => Value::False,
        }
    }

    /// Value of `lit` in the last model found.
    pub fn model_value(&self, lit: Lit) -> bool {
        self.model[lit.var().0 as usize] == lit.is_positive()
    }

    /// Value of `lit` in the current (total) assignment.
    pub fn current_value(&self, lit: Lit) -> bool {
        self.value(lit) == Value::True
    }

    /// True if `lit` holds at the top level.
    pub fn fixed_true(&self, lit: Lit) -> bool {
        self.value(lit) == Value::True && self.levels[lit.var().0 as usize] == 0
    }

    fn decision_level(&self) -> usize {
        self.trail_lim.len()
    }

    fn enqueue(&mut self, lit: Lit, reason: Option<usize>) {
        let v = lit.var().0 as usize;
        self.assigns[v] = Some(lit.is_positive());
        self.levels[v] = self.decision_level() as u32;
        self.reasons[v] = reason;
        self.trail.push(lit);
    }

    fn cancel_until(&mut self, level: usize) {
        if self.decision_level() <= level {
            return;
        }
        let keep = self.trail_lim[level];
        for lit in self.trail.drain(keep..) {
            let v = lit.var().0 as usize;
            self.assigns[v] = None;
            self.reasons[v] = None;
        }
        self.trail_lim.truncate(level);
        self.qhead = self.trail.len();
    }

    fn attach(&mut self, lits: Vec<Lit>) -> usize {
        let index = self.clauses.len();
        self.watches[lits[0].index()].push(index);
        self.watches[lits[1].index()].push(index);
        self.clauses.push(Clause { lits });
        index
    }

    /// Adds a clause at the top level. Returns false once the clause set is
    /// unsatisfiable.
    pub fn add_clause(&mut self, lits: &[Lit]) -> bool {
        self.cancel_until(0);
        if self.unsat {
            return false;
        }
        let mut lits = lits.to_vec();
        lits.sort_unstable();
        lits.dedup();
        if lits.windows(2).any(|w| w[0] == !w[1]) {
            return true;
        }
        if lits.iter().any(|&l| self.value(l) == Value::True) {
            return true;
        }
        lits.retain(|&l| self.value(l) == Value::Unassigned);
        match lits.len() {
            0 => {
                self.unsat = true;
                false
            }
            1 => {
                self.enqueue(lits[0], None);
                if self.propagate().is_some() {
                    self.unsat = true;
                }
                !self.unsat
            }
            _ => {
                self.attach(lits);
                true
            }
        }
    }

    fn propagate(&mut self) -> Option<usize> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            self.stats.propagations += 1;
            let false_lit = !p;
            let mut ws = std::mem::take(&mut self.watches[false_lit.index()]);
            let mut conflict = None;
            let mut i = 0;
            let mut j = 0;
            'watches: while i < ws.len() {
                let ci = ws[i];
                i += 1;
                let lits = &mut self.clauses[ci].lits;
                if lits[0] == false_lit {
                    lits.swap(0, 1);
                }
                let first = lits[0];
                if self.assigns[first.var().0 as usize] == Some(first.is_positive()) {
                    ws[j] = ci;
                    j += 1;
                    continue;
                }
                for k in 2..lits.len() {
                    let l = lits[k];
                    let falsified = self.assigns[l.var().0 as usize] == Some(!l.is_positive());
                    if !falsified {
                        lits.swap(1, k);
                        self.watches[l.index()].push(ci);
                        continue 'watches;
                    }
                }
                ws[j] = ci;
                j += 1;
                if self.value(first) == Value::False {
                    conflict = Some(ci);
                    while i < ws.len() {
                        ws[j] = ws[i];
                        i += 1;
                        j += 1;
                    }
                } else {
                    self.enqueue(first, Some(ci));
                }
            }
            ws.truncate(j);
            self.watches[false_lit.index()] = ws;
            if conflict.is_some() {
                return conflict;
            }
        }
        None
    }

    fn bump(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
    }

    fn analyze(&mut self, mut conflict: usize) -> (Vec<Lit>, usize) {
        let mut learnt = vec![Lit(0)];
        let mut path = 0;
        let mut p: Option<Lit> = None;
        let mut index = self.trail.len();
        let level = self.decision_level() as u32;
        loop {
            let lits = self.clauses[conflict].lits.clone();
            for &q in lits.iter().skip(usize::from(p.is_some())) {
                let v = q.var().0 as usize;
                if !self.seen[v] && self.levels[v] > 0 {
                    self.bump(v);
                    self.seen[v] = true;
                    if self.levels[v] == level {
                        path += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                index -= 1;
                if self.seen[self.trail[index].var().0 as usize] {
                    break;
                }
            }
            let lit = self.trail[index];
            let v = lit.var().0 as usize;
            self.seen[v] = false;
            path -= 1;
            p = Some(lit);
            if path == 0 {
                break;
            }
            conflict = self.reasons[v].expect("implied literal has a reason");
        }
        learnt[0] = !p.unwrap();
        for l in &learnt[1..] {
            self.seen[l.var().0 as usize] = false;
        }
        let mut back = 0;
        if learnt.len() > 1 {
            let mut best = 1;
            for k in 2..learnt.len() {
                if self.levels[learnt[k].var().0 as usize] > self.levels[learnt[best].var().0 as usize] {
                    best = k;
                }
            }
            learnt.swap(1, best);
            back = self.levels[learnt[1].var().0 as usize] as usize;
        }
        (learnt, back)
    }

    fn pick_branch(&self) -> Option<Var> {
        let mut best: Option<usize> = None;
        for v in 0..self.assigns.len() {
            if self.assigns[v].is_none() && best.is_none_or(|b| self.activity[v] > self.activity[b]) {
                best = Some(v);
            }
        }
        best.map(|v| Var(v as u32))
    }

    fn search(&mut self, assumptions: &[Lit]) -> Outcome {
        loop {
            if let Some(conflict) = self.propagate() {
                self.stats.conflicts += 1;
                if self.decision_level() == 0 {
                    self.unsat = true;
                    return Outcome::Unsat;
                }
                let (learnt, back) = self.analyze(conflict);
                self.cancel_until(back);
                self.stats.learnt_clauses += 1;
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], None);
                } else {
                    let first = learnt[0];
                    let ci = self.attach(learnt);
                    self.enqueue(first, Some(ci));
                }
                self.var_inc /= 0.95;
                continue;
            }
            let mut next = None;
            while self.decision_level() < assumptions.len() {
                let a = assumptions[self.decision_level()];
                match self.value(a) {
                    Value::True => self.trail_lim.push(self.trail.len()),
                    Value::False => return Outcome::Unsat,
                    Value::Unassigned => {
                        next = Some(a);
                        break;
                    }
                }
            }
            let next = match next {
                Some(a) => a,
                None => match self.pick_branch() {
                    Some(v) => {
                        self.stats.decisions += 1;
                        Lit::neg(v)
                    }
                    None => return Outcome::Sat,
                },
            };
            self.trail_lim.push(self.trail.len());
            self.enqueue(next, None);
        }
    }

    /// Searches for a total assignment satisfying the clauses and the
    /// assumptions that `check` accepts. `check` sees the total assignment
    /// and returns clauses that exclude it, or nothing to accept it.
    pub fn solve(&mut self, assumptions: &[Lit], check: &mut dyn FnMut(&Cdcl) -> Vec<Vec<Lit>>) -> Outcome {
        self.cancel_until(0);
        if self.unsat {
            return Outcome::Unsat;
        }
        loop {
            match self.search(assumptions) {
                Outcome::Unsat => {
                    self.cancel_until(0);
                    return Outcome::Unsat;
                }
                Outcome::Sat => {
                    let extra = check(self);
                    if extra.is_empty() {
                        self.model = self.assigns.iter().map(|a| a.unwrap_or(false)).collect();
                        self.cancel_until(0);
                        return Outcome::Sat;
                    }
                    self.stats.lazy_clauses += extra.len() as u64;
                    for clause in extra {
                        if !self.add_clause(&clause) {
                            return Outcome::Unsat;
                        }
                    }
                }
            }
        }
    }
}
