//! Brute-force event algebra evaluator over a list of point occurrences,
//! written from the operator definitions without reference to the engine.

use reactor_core::kb::KnowledgeBase;
use reactor_core::parser::parse_term;
use reactor_core::term::Term;
use reactor_core::{ec, Runtime};

/// A tiny expression AST; leaves are single-letter event types.
#[derive(Clone, Debug)]
pub enum Ex {
    Leaf(char),
    Seq(Vec<Ex>),
    Or(Vec<Ex>),
    Xor(Vec<Ex>),
    And(Vec<Ex>),
    Conc(Vec<Ex>),
    Neg(Vec<char>, char, char),
    Any(usize, Box<Ex>),
    Aperiodic(Box<Ex>, char, char),
}

impl Ex {
    pub fn text(&self) -> String {
        let list = |xs: &[Ex]| xs.iter().map(Ex::text).collect::<Vec<_>>().join(",");
        match self {
            Ex::Leaf(c) => c.to_string(),
            Ex::Seq(xs) => format!("sequence({})", list(xs)),
            Ex::Or(xs) => format!("or({})", list(xs)),
            Ex::Xor(xs) => format!("xor({})", list(xs)),
            Ex::And(xs) => format!("and({})", list(xs)),
            Ex::Conc(xs) => format!("concurrent({})", list(xs)),
            Ex::Neg(ts, a, b) => {
                let ts: Vec<String> = ts.iter().map(char::to_string).collect();
                format!("neg([{}],[{a},{b}])", ts.join(","))
            }
            Ex::Any(n, e) => format!("any({n},{})", e.text()),
            Ex::Aperiodic(e, a, b) => format!("aperiodic({},[{a},{b}])", e.text()),
        }
    }
}

pub type Iv = (i64, i64);

fn cartesian(parts: &[Vec<Iv>]) -> Vec<Vec<Iv>> {
    let mut acc: Vec<Vec<Iv>> = vec![vec![]];
    for p in parts {
        let mut next = Vec::new();
        for prefix in &acc {
            for iv in p {
                let mut v = prefix.clone();
                v.push(*iv);
                next.push(v);
            }
        }
        acc = next;
    }
    acc
}

fn env(xs: &[Iv]) -> Iv {
    (xs.iter().map(|x| x.0).min().unwrap(), xs.iter().map(|x| x.1).max().unwrap())
}

fn le(a: Iv, b: Iv) -> bool {
    a.0 <= b.0 && a.1 <= b.1
}

fn inside(x: Iv, w: Iv) -> bool {
    w.0 < x.0 && x.1 < w.1
}

fn windows(eis: &[(char, i64)], a: char, b: char) -> Vec<Iv> {
    let mut out = Vec::new();
    for x in eval(eis, &Ex::Leaf(a)) {
        for y in eval(eis, &Ex::Leaf(b)) {
            if le(x, y) {
                out.push((x.0, y.1));
            }
        }
    }
    out
}

/// Every detection interval of `e` under pointwise interval ordering.
pub fn eval(eis: &[(char, i64)], e: &Ex) -> Vec<Iv> {
    match e {
        Ex::Leaf(c) => eis.iter().filter(|(t, _)| t == c).map(|&(_, t)| (t, t)).collect(),
        Ex::Seq(xs) => {
            let parts: Vec<Vec<Iv>> = xs.iter().map(|x| eval(eis, x)).collect();
            cartesian(&parts)
                .into_iter()
                .filter(|v| v.windows(2).all(|w| le(w[0], w[1])))
                .map(|v| (v[0].0, v[v.len() - 1].1))
                .collect()
        }
        Ex::Or(xs) => xs.iter().flat_map(|x| eval(eis, x)).collect(),
        Ex::Xor(xs) => {
            let per: Vec<Vec<Iv>> = xs.iter().map(|x| eval(eis, x)).collect();
            let live: Vec<&Vec<Iv>> = per.iter().filter(|p| !p.is_empty()).collect();
            if live.len() == 1 {
                live[0].clone()
            } else {
                Vec::new()
            }
        }
        Ex::And(xs) => {
            let parts: Vec<Vec<Iv>> = xs.iter().map(|x| eval(eis, x)).collect();
            cartesian(&parts).iter().map(|v| env(v)).collect()
        }
        Ex::Conc(xs) => {
            let parts: Vec<Vec<Iv>> = xs.iter().map(|x| eval(eis, x)).collect();
            cartesian(&parts).into_iter().filter(|v| v.iter().all(|x| *x == v[0])).map(|v| v[0]).collect()
        }
        Ex::Neg(ts, a, b) => {
            let blockers: Vec<Iv> = ts.iter().flat_map(|t| eval(eis, &Ex::Leaf(*t))).collect();
            windows(eis, *a, *b).into_iter().filter(|w| !blockers.iter().any(|x| inside(*x, *w))).collect()
        }
        Ex::Any(n, x) => {
            let ds = eval(eis, x);
            let mut out = Vec::new();
            for mask in 0u32..(1 << ds.len()) {
                if mask.count_ones() as usize == *n {
                    let sel: Vec<Iv> = (0..ds.len()).filter(|i| mask & (1 << i) != 0).map(|i| ds[i]).collect();
                    out.push(env(&sel));
                }
            }
            out
        }
        Ex::Aperiodic(x, a, b) => {
            let inner = eval(eis, x);
            let mut out = Vec::new();
            for w in windows(eis, *a, *b) {
                out.extend(inner.iter().copied().filter(|d| inside(*d, w)));
            }
            out
        }
    }
}

/// Snoop-style evaluation: a composite occurs at the time of its terminator
/// and a sequence only compares those points.
pub fn eval_snoop(eis: &[(char, i64)], e: &Ex) -> Vec<i64> {
    match e {
        Ex::Leaf(c) => eis.iter().filter(|(t, _)| t == c).map(|&(_, t)| t).collect(),
        Ex::Seq(xs) => {
            let parts: Vec<Vec<Iv>> =
                xs.iter().map(|x| eval_snoop(eis, x).into_iter().map(|t| (t, t)).collect()).collect();
            cartesian(&parts)
                .into_iter()
                .filter(|v| v.windows(2).all(|w| w[0].1 < w[1].1))
                .map(|v| v[v.len() - 1].1)
                .collect()
        }
        _ => unimplemented!("only sequences are compared under terminator-time semantics"),
    }
}

/// The engine's detections of `e`, as sorted integer intervals.
pub fn engine_eval(eis: &[(char, i64)], e: &Ex) -> Vec<Iv> {
    let mut kb = KnowledgeBase::new();
    for (c, t) in eis {
        ec::record_occurrence(&mut kb, &Term::atom(c.to_string()), &Term::int(*t)).unwrap();
    }
    let expr = parse_term(&e.text()).unwrap();
    let mut got: Vec<Iv> = ec::detect(&mut kb, &Runtime::default(), &expr)
        .unwrap()
        .iter()
        .map(|d| (d.start.as_int().unwrap(), d.end.as_int().unwrap()))
        .collect();
    got.sort();
    got
}

pub fn sorted(mut v: Vec<Iv>) -> Vec<Iv> {
    v.sort();
    v
}

/// Every sequence of 1..=max_len events over `types`, at times 1, 2, ..
pub fn all_eis(types: &[char], max_len: usize) -> Vec<Vec<(char, i64)>> {
    let mut out = Vec::new();
    let mut level: Vec<Vec<char>> = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for seq in &level {
            for t in types {
                let mut s = seq.clone();
                s.push(*t);
                next.push(s);
            }
        }
        for s in &next {
            out.push(s.iter().enumerate().map(|(i, c)| (*c, i as i64 + 1)).collect());
        }
        level = next;
    }
    out
}

/// Expressions covering all eight operators, nested and flat.
pub fn catalogue() -> Vec<Ex> {
    use Ex::*;
    let l = Leaf;
    vec![
        Seq(vec![l('a'), l('b')]),
        Seq(vec![l('a'), l('b'), l('c')]),
        Seq(vec![l('b'), Seq(vec![l('a'), l('c')])]),
        Seq(vec![Seq(vec![l('a'), l('b')]), l('c')]),
        Seq(vec![l('a'), l('a')]),
        Or(vec![l('a'), l('b')]),
        Or(vec![l('c'), Seq(vec![l('a'), l('b')])]),
        Xor(vec![l('a'), l('b')]),
        Xor(vec![l('a'), l('b'), l('c')]),
        And(vec![l('a'), l('b')]),
        And(vec![l('a'), l('b'), l('c')]),
        And(vec![l('c'), Seq(vec![l('a'), l('b')])]),
        Conc(vec![l('a'), l('b')]),
        Conc(vec![l('a'), l('a')]),
        Neg(vec!['c'], 'a', 'b'),
        Neg(vec!['b', 'c'], 'a', 'a'),
        Any(1, Box::new(l('a'))),
        Any(2, Box::new(l('a'))),
        Any(2, Box::new(Or(vec![l('b'), l('c')]))),
        Aperiodic(Box::new(l('c')), 'a', 'b'),
        Aperiodic(Box::new(l('b')), 'a', 'a'),
    ]
}
