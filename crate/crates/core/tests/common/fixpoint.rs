//! Random stratified programs and a grounding bottom-up evaluator.

use std::collections::{BTreeSet, HashSet};

use rand::rngs::StdRng;
use rand::Rng;
use reactor_core::kb::{AddPolicy, KnowledgeBase};
use reactor_core::parser::{parse_program, parse_query};
use reactor_core::solver::{solve, SolverConfig};
use reactor_core::term::Term;
use reactor_core::Runtime;

pub const CONSTS: [&str; 3] = ["a", "b", "c"];
const VARS: [&str; 3] = ["X", "Y", "Z"];

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Arg {
    Var(usize),
    Const(usize),
}

#[derive(Clone, Debug)]
pub struct Atom {
    pub pred: usize,
    pub args: Vec<Arg>,
}

#[derive(Clone, Debug)]
pub struct Rule {
    pub head: Atom,
    pub pos: Vec<Atom>,
    pub neg: Vec<Atom>,
}

#[derive(Clone, Debug)]
pub struct Program {
    pub arity: Vec<usize>,
    pub rules: Vec<Rule>,
}

pub type Fact = (usize, Vec<usize>);

fn atom_text(a: &Atom) -> String {
    let args: Vec<&str> = a
        .args
        .iter()
        .map(|x| match x {
            Arg::Var(v) => VARS[*v],
            Arg::Const(c) => CONSTS[*c],
        })
        .collect();
    format!("p{}({})", a.pred, args.join(","))
}

impl Program {
    pub fn text(&self) -> String {
        let mut out = String::new();
        for r in &self.rules {
            out.push_str(&atom_text(&r.head));
            let mut body: Vec<String> = r.pos.iter().map(atom_text).collect();
            body.extend(r.neg.iter().map(|a| format!("not({})", atom_text(a))));
            if !body.is_empty() {
                out.push_str(" :- ");
                out.push_str(&body.join(", "));
            }
            out.push_str(".\n");
        }
        out
    }

    /// Every ground atom over the constants, for every predicate.
    pub fn ground_atoms(&self) -> Vec<Fact> {
        let mut out = Vec::new();
        for (p, &n) in self.arity.iter().enumerate() {
            for code in 0..CONSTS.len().pow(n as u32) {
                let args = (0..n).map(|i| code / CONSTS.len().pow(i as u32) % CONSTS.len()).collect();
                out.push((p, args));
            }
        }
        out
    }
}

pub fn fact_text((p, args): &Fact) -> String {
    let args: Vec<&str> = args.iter().map(|&c| CONSTS[c]).collect();
    format!("p{p}({})", args.join(","))
}

fn random_atom(rng: &mut StdRng, pred: usize, arity: usize, nvars: usize, ground: bool) -> Atom {
    let args = (0..arity)
        .map(|_| {
            if ground || rng.gen_bool(0.3) {
                Arg::Const(rng.gen_range(0..CONSTS.len()))
            } else {
                Arg::Var(rng.gen_range(0..nvars))
            }
        })
        .collect();
    Atom { pred, args }
}

fn vars_of(a: &Atom) -> impl Iterator<Item = usize> + '_ {
    a.args.iter().filter_map(|x| match x {
        Arg::Var(v) => Some(*v),
        Arg::Const(_) => None,
    })
}

/// A program whose predicate dependencies point strictly downwards, so
/// every `not` refers to a completed lower stratum. Head and negated
/// variables all occur in a positive body literal.
pub fn random_program(rng: &mut StdRng) -> Program {
    let preds = rng.gen_range(2..=5);
    let arity: Vec<usize> = (0..preds).map(|_| rng.gen_range(0..=2)).collect();
    let n = rng.gen_range(1..=12);
    let mut rules = Vec::new();
    while rules.len() < n {
        let head_pred = rng.gen_range(0..preds);
        if head_pred == 0 || rng.gen_bool(0.35) {
            rules.push(Rule { head: random_atom(rng, head_pred, arity[head_pred], 1, true), pos: vec![], neg: vec![] });
            continue;
        }
        let nvars = rng.gen_range(1..=3);
        let pos: Vec<Atom> = (0..rng.gen_range(1..=2))
            .map(|_| {
                let p = rng.gen_range(0..head_pred);
                random_atom(rng, p, arity[p], nvars, false)
            })
            .collect();
        let bound: BTreeSet<usize> = pos.iter().flat_map(vars_of).collect();
        let pick = |rng: &mut StdRng, p: usize| Atom {
            pred: p,
            args: (0..arity[p])
                .map(|_| {
                    let vs: Vec<usize> = bound.iter().copied().collect();
                    if vs.is_empty() || rng.gen_bool(0.3) {
                        Arg::Const(rng.gen_range(0..CONSTS.len()))
                    } else {
                        Arg::Var(vs[rng.gen_range(0..vs.len())])
                    }
                })
                .collect(),
        };
        let mut neg = Vec::new();
        for _ in 0..rng.gen_range(0..=1) {
            let p = rng.gen_range(0..head_pred);
            neg.push(pick(rng, p));
        }
        let head = pick(rng, head_pred);
        rules.push(Rule { head, pos, neg });
    }
    Program { arity, rules }
}

fn ground(a: &Atom, sub: &[usize]) -> Fact {
    let args = a
        .args
        .iter()
        .map(|x| match x {
            Arg::Var(v) => sub[*v],
            Arg::Const(c) => *c,
        })
        .collect();
    (a.pred, args)
}

/// The perfect model, computed predicate by predicate in dependency order
/// by trying every assignment of constants to the three variables.
pub fn perfect_model(p: &Program) -> HashSet<Fact> {
    let mut model: HashSet<Fact> = HashSet::new();
    let k = CONSTS.len();
    for pred in 0..p.arity.len() {
        loop {
            let mut grew = false;
            for r in p.rules.iter().filter(|r| r.head.pred == pred) {
                for code in 0..k * k * k {
                    let sub = [code % k, code / k % k, code / (k * k) % k];
                    let ok = r.pos.iter().all(|a| model.contains(&ground(a, &sub)))
                        && r.neg.iter().all(|a| !model.contains(&ground(a, &sub)));
                    if ok && model.insert(ground(&r.head, &sub)) {
                        grew = true;
                    }
                }
            }
            if !grew {
                break;
            }
        }
    }
    model
}

/// Ground atoms where the solver and the model disagree, as text.
pub fn disagreements(p: &Program) -> Vec<String> {
    let src = parse_program(&p.text(), Term::atom("prog")).unwrap();
    let mut kb = KnowledgeBase::new();
    kb.add_module(Term::atom("prog"), src.clauses, AddPolicy::Append).unwrap();
    let rt = Runtime::default();
    let model = perfect_model(p);
    let mut out = Vec::new();
    for f in p.ground_atoms() {
        let q = parse_query(&format!("{}?", fact_text(&f))).unwrap();
        let proved = match solve(&mut kb, &rt, &q, SolverConfig::default()).next() {
            Some(Ok(_)) => true,
            None => false,
            Some(Err(e)) => {
                out.push(format!("{}: {e}", fact_text(&f)));
                continue;
            }
        };
        if proved != model.contains(&f) {
            out.push(format!("{} solver={proved}", fact_text(&f)));
        }
    }
    out
}
