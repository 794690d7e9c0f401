use std::collections::HashMap;

use super::{Term, TimePoint, Var};

/// Variable store consulted and extended by unification.
pub trait Subst {
    fn lookup(&self, v: &Var) -> Option<&Term>;
    fn bind(&mut self, v: Var, t: Term);
}

/// Follow variable bindings at the top of `t` only.
pub(crate) fn deref<S: Subst + ?Sized>(t: &Term, s: &S) -> Term {
    let mut cur = t;
    while let Term::Var(v) = cur {
        match s.lookup(v) {
            Some(next) => cur = next,
            None => break,
        }
    }
    cur.clone()
}

/// Fully substitute bound variables in `t`.
pub(crate) fn resolve<S: Subst + ?Sized>(t: &Term, s: &S) -> Term {
    match t {
        Term::Var(_) => {
            let d = deref(t, s);
            if d.is_var() {
                d
            } else {
                resolve(&d, s)
            }
        }
        Term::Compound(c) => {
            if t.is_ground() {
                return t.clone();
            }
            Term::compound(c.functor.clone(), c.args.iter().map(|a| resolve(a, s)).collect())
        }
        Term::Cons(_) => {
            // Iterate along the spine so long lists do not recurse deeply.
            let mut items = Vec::new();
            let mut cur = t.clone();
            loop {
                match cur {
                    Term::Cons(cell) => {
                        items.push(resolve(&cell.0, s));
                        cur = deref(&cell.1, s);
                    }
                    Term::Nil => break Term::list(items),
                    other => break Term::list_with_tail(items, resolve(&other, s)),
                }
            }
        }
        other => other.clone(),
    }
}

/// Whether `v` occurs in `t` under the store `s`.
pub fn occurs_in<S: Subst + ?Sized>(v: &Var, t: &Term, s: &S) -> bool {
    let mut stack = vec![t.clone()];
    while let Some(t) = stack.pop() {
        match deref(&t, s) {
            Term::Var(w) => {
                if &w == v {
                    return true;
                }
            }
            Term::Compound(c) => stack.extend(c.args.iter().cloned()),
            Term::Cons(cell) => {
                stack.push(cell.0.clone());
                stack.push(cell.1.clone());
            }
            _ => {}
        }
    }
    false
}

fn datetime_pattern(t: &Term) -> Option<usize> {
    match t.functor() {
        Some(("datetime", n @ (6 | 7))) => Some(n),
        _ => None,
    }
}

/// Unify `a` with `b`, extending `s`. On failure `s` may hold partial
/// bindings; callers that need atomicity undo through their own trail.
pub fn unify_with<S: Subst + ?Sized>(a: &Term, b: &Term, s: &mut S, occurs_check: bool) -> bool {
    let mut stack = vec![(a.clone(), b.clone())];
    while let Some((x, y)) = stack.pop() {
        let x = deref(&x, s);
        let y = deref(&y, s);
        match (&x, &y) {
            (Term::Var(v), Term::Var(w)) if v == w => {}
            (Term::Var(v), t) | (t, Term::Var(v)) => {
                if occurs_check && !t.is_var() && occurs_in(v, t, s) {
                    return false;
                }
                s.bind(v.clone(), t.clone());
            }
            (Term::Atom(p), Term::Atom(q)) | (Term::Str(p), Term::Str(q)) => {
                if p != q {
                    return false;
                }
            }
            (Term::Int(p), Term::Int(q)) => {
                if p != q {
                    return false;
                }
            }
            (Term::Float(_), Term::Float(_)) => {
                if x != y {
                    return false;
                }
            }
            (Term::Time(p), Term::Time(q)) => {
                if p != q {
                    return false;
                }
            }
            (Term::Nil, Term::Nil) => {}
            (Term::Time(t), c @ Term::Compound(_)) | (c @ Term::Compound(_), Term::Time(t)) => {
                match datetime_pattern(c) {
                    Some(n) => stack.push((t.to_compound_arity(n), c.clone())),
                    None => return false,
                }
            }
            (Term::Compound(p), Term::Compound(q)) => {
                if p.functor != q.functor || p.args.len() != q.args.len() {
                    return false;
                }
                stack.extend(p.args.iter().cloned().zip(q.args.iter().cloned()).rev());
            }
            (Term::Cons(p), Term::Cons(q)) => {
                stack.push((p.1.clone(), q.1.clone()));
                stack.push((p.0.clone(), q.0.clone()));
            }
            _ => return false,
        }
    }
    true
}

/// Equality up to consistent renaming of variables.
pub fn variant_eq(a: &Term, b: &Term) -> bool {
    fn go(a: &Term, b: &Term, fwd: &mut HashMap<Var, Var>, back: &mut HashMap<Var, Var>) -> bool {
        match (a, b) {
            (Term::Var(v), Term::Var(w)) => {
                let f = fwd.entry(v.clone()).or_insert_with(|| w.clone()).clone();
                let g = back.entry(w.clone()).or_insert_with(|| v.clone()).clone();
                &f == w && &g == v
            }
            (Term::Compound(p), Term::Compound(q)) => {
                p.functor == q.functor
                    && p.args.len() == q.args.len()
                    && p.args.iter().zip(&q.args).all(|(x, y)| go(x, y, fwd, back))
            }
            (Term::Cons(p), Term::Cons(q)) => go(&p.0, &q.0, fwd, back) && go(&p.1, &q.1, fwd, back),
            (Term::Time(t), c) | (c, Term::Time(t)) if !matches!(c, Term::Time(_)) => {
                TimePoint::from_term(c) == Some(*t)
            }
            _ => a == b,
        }
    }
    go(a, b, &mut HashMap::new(), &mut HashMap::new())
}
