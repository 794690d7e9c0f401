//! Native evaluation of event algebra expressions over the stored
//! `occurs/2` facts.

use super::Detection;
use crate::solver::{SolveError, Solver};
use crate::term::{unify, Bindings, Term, Var};

const NARY: &[&str] = &["sequence", "or", "xor", "and", "concurrent"];

/// Whether `t` is an event algebra expression rather than a plain event.
pub fn is_algebra(t: &Term) -> bool {
    match t.functor() {
        Some((n, a)) if NARY.contains(&n) => a >= 1,
        Some(("neg", 2)) | Some(("any", 2)) | Some(("aperiodic", 2)) => true,
        _ => false,
    }
}

fn ord(t: &Term) -> f64 {
    t.time_ordinal().unwrap_or(f64::NAN)
}

fn leq(a: &Detection, b: &Detection) -> bool {
    ord(&a.start) <= ord(&b.start) && ord(&a.end) <= ord(&b.end)
}

fn strictly_inside(d: &Detection, w: &Detection) -> bool {
    ord(&w.start) < ord(&d.start) && ord(&d.end) < ord(&w.end)
}

fn envelope<'d>(ds: impl IntoIterator<Item = &'d Detection>) -> (Term, Term) {
    let mut it = ds.into_iter();
    let first = it.next().expect("non-empty selection");
    let (mut s, mut e) = (first.start.clone(), first.end.clone());
    for d in it {
        if ord(&d.start) < ord(&s) {
            s = d.start.clone();
        }
        if ord(&d.end) > ord(&e) {
            e = d.end.clone();
        }
    }
    (s, e)
}

/// Keep `inst` only when it is consistent with the expression pattern.
fn consistent(pattern: &Term, inst: &Term) -> bool {
    unify(pattern, inst, &Bindings::new()).is_some()
}

fn leaf(s: &mut Solver<'_>, e: &Term) -> Result<Vec<Detection>, SolveError> {
    let t0 = Term::Var(Var::fresh("T"));
    let template = Term::list(vec![e.clone(), t0.clone()]);
    let rows = s.find_all(&template, vec![Term::compound("occurs", vec![e.clone(), t0])], None)?;
    Ok(rows
        .into_iter()
        .filter_map(|r| {
            let mut v = r.as_list()?;
            let time = v.pop()?;
            let event = v.pop()?;
            let (start, end) = match time.as_list() {
                Some(iv) if iv.len() == 2 => (iv[0].clone(), iv[1].clone()),
                _ => (time.clone(), time),
            };
            Some(Detection { event, start, end })
        })
        .collect())
}

fn leaf_types(e: &Term, out: &mut Vec<Term>) {
    if is_algebra(e) {
        let args = e.args();
        let children: &[Term] = match e.name() {
            Some("neg") | Some("aperiodic") | Some("any") => &args[1..],
            _ => args,
        };
        if e.name() == Some("aperiodic") {
            leaf_types(&args[0], out);
        }
        for c in children {
            match c.as_list() {
                Some(items) => items.iter().for_each(|i| leaf_types(i, out)),
                None => leaf_types(c, out),
            }
        }
    } else if let Some(n) = e.name() {
        let ty = Term::atom(n);
        if !out.contains(&ty) {
            out.push(ty);
        }
    }
}

/// Checks the `broken/4` axiom between two adjacent sequence members.
struct BrokenCheck {
    active: bool,
    scope: Term,
}

impl BrokenCheck {
    fn new(s: &mut Solver<'_>, e: &Term) -> Self {
        let active = !s.kb().clauses_for("terminates", 3).is_empty();
        let mut types = Vec::new();
        leaf_types(e, &mut types);
        BrokenCheck { active, scope: Term::list(types) }
    }

    fn broken(&self, s: &mut Solver<'_>, a: &Detection, b: &Detection) -> Result<bool, SolveError> {
        if !self.active {
            return Ok(false);
        }
        let goal = Term::compound(
            "broken",
            vec![
                a.end.clone(),
                Term::list(vec![a.event.clone(), b.event.clone()]),
                b.start.clone(),
                self.scope.clone(),
            ],
        );
        Ok(!s.find_all(&Term::atom("true"), vec![goal], Some(1))?.is_empty())
    }
}

fn malformed(e: &Term) -> SolveError {
    SolveError::MalformedExpr(e.clone())
}

fn window_pair(e: &Term, w: &Term) -> Result<(Term, Term), SolveError> {
    match w.as_list() {
        Some(v) if v.len() == 2 => Ok((v[0].clone(), v[1].clone())),
        _ => Err(malformed(e)),
    }
}

/// Detect `[E1,E2]` windows: sequences of the two members.
fn windows(s: &mut Solver<'_>, e: &Term, w: &Term) -> Result<Vec<(Detection, Detection)>, SolveError> {
    let (e1, e2) = window_pair(e, w)?;
    let d1 = detect(s, &e1)?;
    let d2 = detect(s, &e2)?;
    let check = BrokenCheck::new(s, e);
    let mut out = Vec::new();
    for a in &d1 {
        for b in &d2 {
            if leq(a, b) && !check.broken(s, a, b)? {
                out.push((a.clone(), b.clone()));
            }
        }
    }
    Ok(out)
}

/// Every detection of `e` in the current knowledge base.
pub(crate) fn detect(s: &mut Solver<'_>, e: &Term) -> Result<Vec<Detection>, SolveError> {
    if !is_algebra(e) {
        return leaf(s, e);
    }
    let (name, arity) = e.functor().expect("algebra terms are compound");
    let args = e.args();
    if NARY.contains(&name) && arity < 2 {
        return Err(malformed(e));
    }
    let name = name.to_string();
    let mut out = Vec::new();
    match name.as_str() {
        "sequence" | "and" | "concurrent" => {
            let mut parts = Vec::with_capacity(args.len());
            for c in args {
                parts.push(detect(s, c)?);
            }
            let check = if name == "sequence" { Some(BrokenCheck::new(s, e)) } else { None };
            let mut chosen: Vec<&Detection> = Vec::new();
            product(s, &name, e, &parts, &mut chosen, check.as_ref(), &mut out)?;
        }
        "or" => {
            for (i, c) in args.iter().enumerate() {
                for d in detect(s, c)? {
                    let mut inst_args = args.to_vec();
                    inst_args[i] = d.event.clone();
                    let inst = Term::compound("or", inst_args);
                    if consistent(e, &inst) {
                        out.push(Detection { event: inst, ..d });
                    }
                }
            }
        }
        "xor" => {
            let mut per: Vec<Vec<Detection>> = Vec::new();
            for c in args {
                per.push(detect(s, c)?);
            }
            let live: Vec<usize> = (0..per.len()).filter(|&i| !per[i].is_empty()).collect();
            if let [i] = live[..] {
                for d in per.swap_remove(i) {
                    let mut inst_args = args.to_vec();
                    inst_args[i] = d.event.clone();
                    out.push(Detection { event: Term::compound("xor", inst_args), ..d });
                }
            }
        }
        "neg" => {
            let types = args[0].as_list().ok_or_else(|| malformed(e))?;
            let mut blockers = Vec::new();
            for t in &types {
                blockers.extend(detect(s, t)?);
            }
            for (a, b) in windows(s, e, &args[1])? {
                let w = Detection { event: Term::Nil, start: a.start.clone(), end: b.end.clone() };
                if blockers.iter().any(|x| strictly_inside(x, &w)) {
                    continue;
                }
                let inst = Term::compound("neg", vec![args[0].clone(), Term::list(vec![a.event, b.event])]);
                if consistent(e, &inst) {
                    out.push(Detection { event: inst, start: w.start, end: w.end });
                }
            }
        }
        "any" => {
            let n = match args[0].as_int() {
                Some(n) if n >= 1 => n as usize,
                _ => return Err(malformed(e)),
            };
            let ds = detect(s, &args[1])?;
            let mut idx: Vec<usize> = Vec::new();
            combinations(ds.len(), n, 0, &mut idx, &mut |sel| {
                let (start, end) = envelope(sel.iter().map(|&i| &ds[i]));
                out.push(Detection { event: e.clone(), start, end });
            });
        }
        "aperiodic" => {
            let inner = detect(s, &args[0])?;
            for (a, b) in windows(s, e, &args[1])? {
                let w = Detection { event: Term::Nil, start: a.start.clone(), end: b.end.clone() };
                for d in inner.iter().filter(|d| strictly_inside(d, &w)) {
                    let inst = Term::compound(
                        "aperiodic",
                        vec![d.event.clone(), Term::list(vec![a.event.clone(), b.event.clone()])],
                    );
                    if consistent(e, &inst) {
                        out.push(Detection { event: inst, start: d.start.clone(), end: d.end.clone() });
                    }
                }
            }
        }
        _ => return Err(malformed(e)),
    }
    Ok(out)
}

/// Depth-first choice of one detection per member for `sequence`, `and`
/// and `concurrent`.
fn product<'d>(
    s: &mut Solver<'_>,
    op: &str,
    e: &Term,
    parts: &'d [Vec<Detection>],
    chosen: &mut Vec<&'d Detection>,
    check: Option<&BrokenCheck>,
    out: &mut Vec<Detection>,
) -> Result<(), SolveError> {
    let k = chosen.len();
    if k == parts.len() {
        let inst = Term::compound(op, chosen.iter().map(|d| d.event.clone()).collect());
        if !consistent(e, &inst) {
            return Ok(());
        }
        let (start, end) = match op {
            "sequence" => (chosen[0].start.clone(), chosen[k - 1].end.clone()),
            _ => envelope(chosen.iter().copied()),
        };
        out.push(Detection { event: inst, start, end });
        return Ok(());
    }
    for d in &parts[k] {
        if let Some(prev) = chosen.last() {
            let ok = match op {
                "sequence" => leq(prev, d),
                "concurrent" => ord(&prev.start) == ord(&d.start) && ord(&prev.end) == ord(&d.end),
                _ => true,
            };
            if !ok {
                continue;
            }
            if let Some(c) = check {
                if c.broken(s, prev, d)? {
                    continue;
                }
            }
        }
        chosen.push(d);
        product(s, op, e, parts, chosen, check, out)?;
        chosen.pop();
    }
    Ok(())
}

fn combinations(n: usize, k: usize, from: usize, idx: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if idx.len() == k {
        f(idx);
        return;
    }
    for i in from..n {
        idx.push(i);
        combinations(n, k, i + 1, idx, f);
        idx.pop();
    }
}
