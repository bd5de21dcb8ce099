//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qasp_core::compile::{compile_query, compile_setup};
use qasp_core::ground::{ground_program, step_rules, GroundSlice, Grounder, GuardedRule};
use qasp_core::lang::{Binding, GroundAtom, GroundElement, GroundHead, GroundRule, Label, Term, Value};
use qasp_core::parser::{parse_program, parse_query_block, parse_setup, parse_stream, QueryBlock, StreamEvent};
use qasp_core::session::{Session, Status};
use qasp_core::solver::{Projection, Solver};

type Outcome = Result<String, String>;

fn demo_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../demo/coloring")
}

fn demo(name: &str) -> String {
    std::fs::read_to_string(demo_dir().join(name)).unwrap()
}

fn demo_blocks() -> Vec<QueryBlock> {
    parse_stream(&demo("queries.qtr"))
        .unwrap()
        .into_iter()
        .filter_map(|e| match e {
            StreamEvent::Query(b) => Some(b),
            StreamEvent::Stop => None,
        })
        .collect()
}

fn demo_session() -> Session {
    Session::open(&demo("encoding.lp"), &demo("setup.ini")).unwrap()
}

fn ensure(cond: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(message())
    }
}

// 1 ------------------------------------------------------------------------

fn golden_counts() -> Outcome {
    let mut session = demo_session();
    let mut seen = Vec::new();
    for block in demo_blocks() {
        let r = session.run_query(&block, None).map_err(|e| e.to_string())?;
        seen.push(match r.status {
            Status::Unsatisfiable => "UNSAT".to_string(),
            Status::Satisfiable if r.models == vec![vec![]] => "1-empty".to_string(),
            Status::Satisfiable => r.models.len().to_string(),
        });
    }
    let expected = ["6", "2", "UNSAT", "1", "1-empty"];
    ensure(seen == expected, || format!("got {seen:?}, expected {expected:?}"))?;
    Ok(seen.join(", "))
}

// 2 ------------------------------------------------------------------------

fn first_query_structure() -> Outcome {
    let mut session = demo_session();
    let result = session.run_query(&demo_blocks()[0], None).map_err(|e| e.to_string())?;
    ensure(result.models.len() == 6, || format!("{} models", result.models.len()))?;
    for model in &result.models {
        let color = |node: i64| -> Vec<i64> {
            model
                .iter()
                .filter(|a| &*a.predicate == "mark" && a.args[0] == Value::Int(node))
                .filter_map(|a| match a.args[1] {
                    Value::Int(c) => Some(c),
                    _ => None,
                })
                .collect()
        };
        let (c1, c2, c3, c4) = (color(1), color(2), color(3), color(4));
        let single = [&c1, &c2, &c3, &c4].iter().all(|c| c.len() == 1);
        ensure(single, || format!("node without a unique color in {model:?}"))?;
        let shared = c1[0];
        let rest: BTreeSet<i64> = [c2[0], c3[0]].into_iter().collect();
        let remaining: BTreeSet<i64> = (1..=3).filter(|&c| c != shared).collect();
        ensure(c4[0] == shared && rest == remaining, || {
            format!("nodes 1,4 = {},{}; nodes 2,3 = {:?}", c1[0], c4[0], rest)
        })?;
    }
    Ok("6/6 models: nodes 1 and 4 share C, nodes 2 and 3 take the other two colors".into())
}

// 3 ------------------------------------------------------------------------

#[derive(Clone, Debug)]
enum R {
    Normal(usize, Vec<usize>, Vec<usize>),
    Constraint(Vec<usize>, Vec<usize>),
    Choice(u32, Option<u32>, Vec<(usize, Vec<usize>, Vec<usize>)>, Vec<usize>, Vec<usize>),
}

fn random_ground_program(rng: &mut ChaCha8Rng) -> (usize, Vec<R>) {
    let n = rng.gen_range(1..=12);
    let lits = |rng: &mut ChaCha8Rng, max: usize| -> Vec<usize> { (0..rng.gen_range(0..=max)).map(|_| rng.gen_range(0..n)).collect() };
    let rules = (0..rng.gen_range(1..=16))
        .map(|_| match rng.gen_range(0..10) {
            0..=5 => R::Normal(rng.gen_range(0..n), lits(rng, 2), lits(rng, 2)),
            6..=7 => {
                let elems = (0..rng.gen_range(1..=3)).map(|_| (rng.gen_range(0..n), lits(rng, 1), lits(rng, 1))).collect();
                let lower = rng.gen_range(0..=2);
                let upper = if rng.gen_bool(0.5) { None } else { Some(lower + rng.gen_range(0..=1)) };
                R::Choice(lower, upper, elems, lits(rng, 1), lits(rng, 1))
            }
            _ => {
                let mut pos = lits(rng, 2);
                pos.push(rng.gen_range(0..n));
                R::Constraint(pos, lits(rng, 1))
            }
        })
        .collect();
    (n, rules)
}

fn atom(i: usize) -> GroundAtom {
    GroundAtom::new("a", vec![Value::Int(i as i64)])
}

fn to_ground(rules: &[R]) -> Vec<GroundRule> {
    let atoms = |v: &[usize]| v.iter().map(|&i| atom(i)).collect::<Vec<_>>();
    let rule = |head, pos: &[usize], neg: &[usize]| GroundRule {
        head,
        positive: atoms(pos),
        negative: atoms(neg),
        guards: vec![],
    };
    rules
        .iter()
        .map(|r| match r {
            R::Normal(h, pos, neg) => rule(GroundHead::Atom(atom(*h)), pos, neg),
            R::Constraint(pos, neg) => rule(GroundHead::Constraint, pos, neg),
            R::Choice(lower, upper, elems, pos, neg) => {
                let elements = elems
                    .iter()
                    .map(|(a, cp, cn)| GroundElement {
                        atom: atom(*a),
                        positive: atoms(cp),
                        negative: atoms(cn),
                    })
                    .collect();
                rule(
                    GroundHead::Choice {
                        lower: *lower,
                        upper: *upper,
                        elements,
                    },
                    pos,
                    neg,
                )
            }
        })
        .collect()
}

/// Stable models by truth tables: an interpretation is stable when it is a
/// model and equals the least model of its reduct.
fn brute_force(n: usize, rules: &[R]) -> BTreeSet<u32> {
    let t = |m: u32, i: &usize| m >> i & 1 == 1;
    let sat = |m: u32, pos: &[usize], neg: &[usize]| pos.iter().all(|i| t(m, i)) && !neg.iter().any(|i| t(m, i));
    (0..1u32 << n)
        .filter(|&m| {
            let model = rules.iter().all(|r| match r {
                R::Normal(h, pos, neg) => !sat(m, pos, neg) || t(m, h),
                R::Constraint(pos, neg) => !sat(m, pos, neg),
                R::Choice(lower, upper, elems, pos, neg) => {
                    let chosen: BTreeSet<usize> = elems.iter().filter(|(a, cp, cn)| t(m, a) && sat(m, cp, cn)).map(|e| e.0).collect();
                    let k = chosen.len() as u32;
                    !sat(m, pos, neg) || (*lower <= k && upper.is_none_or(|u| k <= u))
                }
            });
            if !model {
                return false;
            }
            let mut least = 0u32;
            loop {
                let mut next = least;
                for r in rules {
                    match r {
                        R::Normal(h, pos, neg) if pos.iter().all(|i| t(least, i)) && !neg.iter().any(|i| t(m, i)) => {
                            next |= 1 << h;
                        }
                        R::Choice(_, _, elems, pos, neg) if !neg.iter().any(|i| t(m, i)) => {
                            for (a, cp, cn) in elems {
                                if t(m, a) && !cn.iter().any(|i| t(m, i)) && pos.iter().chain(cp).all(|i| t(least, i)) {
                                    next |= 1 << a;
                                }
                            }
                        }
                        _ => {}
                    }
                }
                if next == least {
                    return least == m;
                }
                least = next;
            }
        })
        .collect()
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let programs = 600;
    let mut total_models = 0;
    for i in 0..programs {
        let (n, rules) = random_ground_program(&mut rng);
        let expected = brute_force(n, &rules);
        let mut solver = Solver::new();
        solver
            .add_slice(&GroundSlice {
                step: 0,
                rules: to_ground(&rules),
                ..Default::default()
            })
            .map_err(|e| e.to_string())?;
        let result = solver.solve(&[], &Projection::All, usize::MAX);
        let got: BTreeSet<u32> = result
            .models
            .iter()
            .map(|m| {
                m.iter()
                    .map(|a| match a.args[0] {
                        Value::Int(i) => 1u32 << i,
                        _ => 0,
                    })
                    .sum()
            })
            .collect();
        ensure(got.len() == result.models.len(), || format!("program {i}: duplicate models"))?;
        ensure(got == expected, || format!("program {i}: {rules:?}\n got {got:?}\n expected {expected:?}"))?;
        total_models += got.len();
    }
    Ok(format!("{programs} programs, {total_models} stable models, all equal"))
}

// 4, 5 ---------------------------------------------------------------------

struct Family {
    name: &'static str,
    encoding: &'static str,
    setup: &'static str,
    facts: fn(&mut ChaCha8Rng) -> String,
}

fn families() -> Vec<Family> {
    vec![
        Family {
            name: "coloring",
            encoding: "#const n = 2.
node(X) :- edge(X,Y).
node(Y) :- edge(X,Y).
color(1..n).
1 { mark(X,C) : color(C) } 1 :- node(X).
:- edge(X,Y), mark(X,C), mark(Y,C).
#show mark/2.",
            setup: "#domain edge(X1,X2) : X1=1..3, X2=1..3, X1!=X2.
#domain mark(X1,X2) : X1=1..3, color(X2).
#choice edge/2.
#define edge/2.
#query mark/2.
#show edge/2.",
            facts: |rng| {
                if rng.gen_bool(0.6) {
                    let a = rng.gen_range(1..=3);
                    let b = (a + rng.gen_range(1..=2) - 1) % 3 + 1;
                    format!("edge({a},{b}).")
                } else {
                    format!("mark({},{}).", rng.gen_range(1..=3), rng.gen_range(1..=2))
                }
            },
        },
        Family {
            name: "reachability",
            encoding: "node(1..3).
reach(X,Y) :- link(X,Y).
reach(X,Z) :- reach(X,Y), link(Y,Z).
#show reach/2.",
            setup: "#domain link(X,Y) : node(X), node(Y).
#domain reach(X,Y) : node(X), node(Y).
#choice link/2.
#define link/2.
#query reach/2.
#show link/2.",
            facts: |rng| {
                let (a, b) = (rng.gen_range(1..=3), rng.gen_range(1..=3));
                match rng.gen_range(0..10) {
                    0..=5 => format!("link({a},{b})."),
                    6..=7 => format!("reach({a},{b})."),
                    _ => format!("reach({a},Y) :- link({b},Y)."),
                }
            },
        },
        Family {
            name: "free links",
            encoding: "node(1..3).
{ link(X,Y) : node(X), node(Y), X != Y }.
reach(X,Y) :- link(X,Y).
reach(X,Z) :- reach(X,Y), link(Y,Z).
:- reach(X,X), blocked(X).",
            setup: "#domain link(X,Y) : node(X), node(Y), X != Y.
#domain blocked(X) : node(X).
#query link/2.
#choice blocked/1.
#define blocked/1.
#show link/2.
#show blocked/1.",
            facts: |rng| {
                let a = rng.gen_range(1..=3);
                if rng.gen_bool(0.6) {
                    let b = (a + rng.gen_range(1..=2) - 1) % 3 + 1;
                    format!("link({a},{b}).")
                } else {
                    format!("blocked({a}).")
                }
            },
        },
    ]
}

fn label(i: usize) -> Label {
    Label(GroundAtom::new("l", vec![Value::Int(i as i64)]))
}

/// A stream of 1..=5 blocks with fresh labels and retracts of active ones.
fn random_stream(rng: &mut ChaCha8Rng, family: &Family) -> Vec<QueryBlock> {
    let mut next_label = 0;
    let mut active: Vec<Label> = Vec::new();
    let steps = rng.gen_range(1..=5);
    let mut blocks = Vec::new();
    for step in 1..=steps {
        let mut text = String::from("#query.\n");
        if !active.is_empty() && rng.gen_bool(0.4) {
            let l = active.remove(rng.gen_range(0..active.len()));
            text.push_str(&format!("#retract : {l}.\n"));
        }
        let helper = rng.gen_bool(0.15);
        if helper {
            text.push_str(&format!("aux{step}(1).\n"));
        }
        for _ in 0..rng.gen_range(0..=2) {
            if rng.gen_bool(0.5) {
                let l = label(next_label);
                next_label += 1;
                text.push_str(&format!("#assert : {l}.\n"));
                active.push(l);
            } else {
                text.push_str("#assert.\n");
            }
            for _ in 0..rng.gen_range(1..=2) {
                text.push_str(&(family.facts)(rng));
                text.push('\n');
            }
            if helper && rng.gen_bool(0.5) {
                let fact = (family.facts)(rng);
                let head = fact.split(" :-").next().unwrap().trim_end_matches('.');
                if !head.contains('Y') {
                    text.push_str(&format!("{head} :- aux{step}(1).\n"));
                }
            }
        }
        text.push_str("#endquery.");
        blocks.push(parse_query_block(&text).unwrap_or_else(|e| panic!("{text}: {e}")));
    }
    blocks
}

type Answer = (Status, Vec<Vec<GroundAtom>>);

fn run_stream(family: &Family, blocks: &[QueryBlock]) -> Result<Vec<Answer>, String> {
    let mut session = Session::open(family.encoding, family.setup).map_err(|e| e.to_string())?;
    blocks
        .iter()
        .map(|b| {
            session
                .run_query(b, None)
                .map(|r| (r.status, r.models))
                .map_err(|e| format!("{b}: {e}"))
        })
        .collect()
}

/// Rebuilds the program in force after the first `q` blocks from scratch:
/// the base, stepwise rules for every step up to `q`, volatile rules of `q`
/// only, assertions of labels still active and unlabeled ones of `q`.
fn one_shot(family: &Family, blocks: &[QueryBlock], q: usize) -> Result<Answer, String> {
    let encoding = parse_program(family.encoding).map_err(|e| e.to_string())?;
    let reactive = compile_setup(&parse_setup(family.setup).map_err(|e| e.to_string())?);
    let consts = encoding.const_values().map_err(|e| e.to_string())?;
    let (_, domains) = Grounder::new(consts.clone())
        .ground_base(&encoding, &reactive)
        .map_err(|e| e.to_string())?;

    let retracted: BTreeSet<&Label> = blocks[..q].iter().flat_map(|b| &b.retracts).collect();
    let mut rules: Vec<GuardedRule> = encoding.rules().chain(&reactive.base).cloned().map(GuardedRule::plain).collect();
    let mut externals = Vec::new();
    for (i, block) in blocks[..q].iter().enumerate() {
        let t = i as i64 + 1;
        let online = compile_query(block, t, &reactive).map_err(|e| e.to_string())?;
        let mut unguarded = online.clone();
        unguarded.sections.clear();
        for rule in step_rules(&reactive, &unguarded, t).map_err(|e| e.to_string())? {
            let volatile = !rule.guards.is_empty();
            if !volatile || i + 1 == q {
                rules.push(GuardedRule::plain(rule.rule));
            }
        }
        for section in &online.sections {
            let keep = match &section.label {
                Some(l) => !retracted.contains(l),
                None => i + 1 == q,
            };
            if keep {
                rules.extend(section.rules.iter().cloned().map(GuardedRule::plain));
            }
        }
        for ext in &reactive.externals {
            let vars: Vec<&str> = ext
                .guard
                .args
                .iter()
                .map(|a| match a {
                    Term::Variable(v) => v.as_str(),
                    _ => unreachable!(),
                })
                .collect();
            for tuple in domains.get(&ext.guard.signature()).into_iter().flatten() {
                let mut binding = Binding::new();
                for (v, value) in vars.iter().zip(tuple) {
                    binding.bind(v, value.clone());
                }
                let instance = ext.schema.substitute(&binding, Some(t)).map_err(|e| e.to_string())?;
                externals.push(instance.to_ground().map_err(|e| e.to_string())?);
            }
        }
    }
    let ground = ground_program(&rules, consts, &externals).map_err(|e| e.to_string())?;
    let mut solver = Solver::new();
    solver
        .add_slice(&GroundSlice {
            step: 0,
            rules: ground,
            externals,
            retired: vec![],
        })
        .map_err(|e| e.to_string())?;
    let shows = encoding.shows.iter().cloned().chain(reactive.shows.iter().cloned()).collect();
    let mut models = solver.solve(&[], &Projection::Signatures(shows), usize::MAX).models;
    models.sort();
    let status = if models.is_empty() { Status::Unsatisfiable } else { Status::Satisfiable };
    Ok((status, models))
}

fn streams() -> Vec<(usize, Vec<QueryBlock>)> {
    let families = families();
    let mut rng = ChaCha8Rng::seed_from_u64(0xa11ce);
    (0..120)
        .map(|i| {
            let f = i % families.len();
            (f, random_stream(&mut rng, &families[f]))
        })
        .collect()
}

fn one_shot_equivalence() -> Outcome {
    let families = families();
    let mut steps = 0;
    let mut unsat = 0;
    for (n, (f, blocks)) in streams().iter().enumerate() {
        let family = &families[*f];
        let answers = run_stream(family, blocks)?;
        for q in 1..=blocks.len() {
            let expected = one_shot(family, blocks, q)?;
            ensure(answers[q - 1] == expected, || {
                let text: Vec<String> = blocks[..q].iter().map(ToString::to_string).collect();
                format!(
                    "stream {n} ({}) step {q}:\n{}\n incremental {:?}\n one-shot {:?}",
                    family.name,
                    text.join(""),
                    answers[q - 1],
                    expected
                )
            })?;
            steps += 1;
            unsat += usize::from(expected.0 == Status::Unsatisfiable);
        }
    }
    Ok(format!("120 streams, {steps} steps ({unsat} unsatisfiable), all equal"))
}

fn expiry_and_retraction() -> Outcome {
    let families = families();
    let mut rng = ChaCha8Rng::seed_from_u64(0xb0b);
    let (mut expiry_checks, mut retraction_checks) = (0, 0);
    for (n, (f, blocks)) in streams().iter().enumerate() {
        let family = &families[*f];
        let answers = run_stream(family, blocks)?;

        // an extra unlabeled assertion changes nothing after its own step
        if blocks.len() > 1 {
            let i = rng.gen_range(0..blocks.len() - 1);
            let mut extended = blocks.clone();
            let extra = parse_query_block(&format!("#query. #assert. {} #endquery.", (family.facts)(&mut rng))).unwrap();
            extended[i].sections.extend(extra.sections);
            let other = run_stream(family, &extended)?;
            ensure(answers[i + 1..] == other[i + 1..], || {
                format!("stream {n}: unlabeled assertion at step {} still visible later", i + 1)
            })?;
            expiry_checks += blocks.len() - i - 1;
        }

        // a retracted label leaves results as if it was never asserted
        let retracted: Vec<(usize, Label)> = blocks
            .iter()
            .enumerate()
            .flat_map(|(j, b)| b.retracts.iter().map(move |l| (j, l.clone())))
            .collect();
        if let Some((j, l)) = retracted.choose(&mut rng).cloned() {
            let mut without = blocks.clone();
            for b in &mut without {
                b.sections.retain(|s| s.label.as_ref() != Some(&l));
                b.retracts.retain(|r| r != &l);
            }
            let other = run_stream(family, &without)?;
            ensure(answers[j..] == other[j..], || format!("stream {n}: retracting {l} at step {} differs", j + 1))?;
            retraction_checks += blocks.len() - j;
        }
    }
    ensure(expiry_checks >= 100 && retraction_checks >= 30, || {
        format!("too few checks: {expiry_checks} expiry, {retraction_checks} retraction")
    })?;
    Ok(format!("{expiry_checks} expiry and {retraction_checks} retraction step comparisons, all equal"))
}

// 6 ------------------------------------------------------------------------

fn transcript_fidelity() -> Outcome {
    let mut session = demo_session();
    for block in demo_blocks() {
        session.run_query(&block, None).map_err(|e| e.to_string())?;
    }
    session.stop();
    let transcript = session.transcript();
    for needle in ["#step 1 : 0.", "_assert_edge(1,2,1)", "_assert_mark(1,1,2)", "_assert_mark(1,1,4)"] {
        ensure(transcript.contains(needle), || format!("missing `{needle}`"))?;
    }
    ensure(transcript.trim_end().ends_with("#stop."), || "does not end with `#stop.`".into())?;
    Ok("all fragments present, ends with #stop.".into())
}

// 7 ------------------------------------------------------------------------

fn determinism() -> Outcome {
    let dir = std::env::temp_dir().join(format!("qasp-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let mut runs = Vec::new();
    for i in 0..2 {
        let transcript = dir.join(format!("run{i}.str"));
        let output = Command::new(env!("CARGO_BIN_EXE_qasp"))
            .arg("-o")
            .arg(demo_dir().join("encoding.lp"))
            .arg("-c")
            .arg(demo_dir().join("setup.ini"))
            .arg("-q")
            .arg(demo_dir().join("queries.qtr"))
            .arg("--transcript")
            .arg(&transcript)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(output.status.success(), || String::from_utf8_lossy(&output.stderr).into_owned())?;
        let written = std::fs::read(&transcript).map_err(|e| e.to_string())?;
        runs.push((output.stdout, written));
    }
    let _ = std::fs::remove_dir_all(&dir);
    ensure(!runs[0].0.is_empty(), || "no output".into())?;
    ensure(runs[0] == runs[1], || "outputs differ between runs".into())?;
    let text = String::from_utf8_lossy(&runs[0].0);
    let counts: Vec<&str> = text.lines().filter(|l| l.starts_with("models:")).collect();
    ensure(counts == ["models: 6", "models: 2", "models: 0", "models: 1", "models: 1"], || format!("{counts:?}"))?;
    Ok(format!("{} stdout bytes and {} transcript bytes identical", runs[0].0.len(), runs[0].1.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("golden stream counts", golden_counts),
        ("structure of the first query's models", first_query_structure),
        ("solver equals brute-force oracle", oracle_equivalence),
        ("incremental equals one-shot reconstruction", one_shot_equivalence),
        ("expiry and retraction", expiry_and_retraction),
        ("transcript fragments", transcript_fidelity),
        ("deterministic batch output", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name} ({detail}) [{secs:.2}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why} [{secs:.2}s]", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
