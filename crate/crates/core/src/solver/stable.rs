//! Direct check of a candidate interpretation against a ground program.

use std::collections::BTreeSet;

use crate::lang::{GroundAtom, GroundHead, GroundRule, Guard};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Stability {
    Stable,
    /// The interpretation violates the rule at this index.
    Violated(usize),
    /// True atoms the reduct does not derive.
    Unfounded(BTreeSet<GroundAtom>),
}

fn body_holds(rule: &GroundRule, atoms: &BTreeSet<GroundAtom>, guards: &BTreeSet<Guard>) -> bool {
    rule.positive.iter().all(|a| atoms.contains(a))
        && !rule.negative.iter().any(|a| atoms.contains(a))
        && rule.guards.iter().all(|g| guards.contains(g))
}

/// Checks whether `atoms` is a stable model of `rules` when exactly the
/// `guards` hold.
pub fn check_stable(rules: &[GroundRule], atoms: &BTreeSet<GroundAtom>, guards: &BTreeSet<Guard>) -> Stability {
    for (i, rule) in rules.iter().enumerate() {
        if !body_holds(rule, atoms, guards) {
            continue;
        }
        let ok = match &rule.head {
            GroundHead::Atom(h) => atoms.contains(h),
            GroundHead::Constraint => false,
            GroundHead::Choice { lower, upper, elements } => {
                let chosen: BTreeSet<&GroundAtom> = elements
                    .iter()
                    .filter(|e| {
                        atoms.contains(&e.atom)
                            && e.positive.iter().all(|a| atoms.contains(a))
                            && !e.negative.iter().any(|a| atoms.contains(a))
                    })
                    .map(|e| &e.atom)
                    .collect();
                let n = chosen.len() as u32;
                *lower <= n && upper.is_none_or(|u| n <= u)
            }
        };
        if !ok {
            return Stability::Violated(i);
        }
    }

    // Least model of the reduct; choice heads count only where chosen.
    let mut reduct: Vec<(&GroundAtom, Vec<&GroundAtom>)> = Vec::new();
    for rule in rules {
        let applies = !rule.negative.iter().any(|a| atoms.contains(a)) && rule.guards.iter().all(|g| guards.contains(g));
        if !applies {
            continue;
        }
        match &rule.head {
            GroundHead::Atom(h) => reduct.push((h, rule.positive.iter().collect())),
            GroundHead::Constraint => {}
            GroundHead::Choice { elements, .. } => {
                for e in elements {
                    if atoms.contains(&e.atom) && !e.negative.iter().any(|a| atoms.contains(a)) {
                        reduct.push((&e.atom, rule.positive.iter().chain(&e.positive).collect()));
                    }
                }
            }
        }
    }
    let mut derived: BTreeSet<&GroundAtom> = BTreeSet::new();
    loop {
        let before = derived.len();
        for (head, body) in &reduct {
            if !derived.contains(head) && body.iter().all(|a| derived.contains(a)) {
                derived.insert(head);
            }
        }
        if derived.len() == before {
            break;
        }
    }
    let unfounded: BTreeSet<GroundAtom> = atoms.iter().filter(|a| !derived.contains(a)).cloned().collect();
    if unfounded.is_empty() {
        Stability::Stable
    } else {
        Stability::Unfounded(unfounded)
    }
}
