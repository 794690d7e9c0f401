//! The term universe shared by every other module: variables, constants,
//! numbers, time points, compound terms and lists, plus substitutions and
//! unification.

mod time;
mod unify;

use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

pub use time::{interval_leq, TimeInterval, TimePoint};
pub use unify::{occurs_in, unify_with, variant_eq, Subst};

/// Interned-ish symbol text. Cheap to clone and share across threads.
pub type Sym = Arc<str>;

/// Indices at or above this value are produced by renaming; below it they are
/// clause- or query-local indices assigned by the parser.
pub const FRESH_BASE: u64 = 1 << 32;

static NEXT_FRESH: AtomicU64 = AtomicU64::new(FRESH_BASE);

/// Reserve `n` consecutive fresh variable indices and return the first.
pub(crate) fn fresh_block(n: u64) -> u64 {
    NEXT_FRESH.fetch_add(n.max(1), Ordering::Relaxed)
}

/// A logic variable, identified by `(name, index)`.
#[derive(Clone, Debug)]
pub struct Var {
    name: Sym,
    index: u64,
}

impl Var {
    pub fn new(name: impl Into<Sym>, index: u64) -> Self {
        Var { name: name.into(), index }
    }

    /// A variable that is distinct from every other variable in the process.
    pub fn fresh(name: impl Into<Sym>) -> Self {
        Var { name: name.into(), index: fresh_block(1) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn is_anonymous(&self) -> bool {
        &*self.name == "_"
    }

    pub(crate) fn with_index(&self, index: u64) -> Var {
        Var { name: self.name.clone(), index }
    }
}

impl PartialEq for Var {
    fn eq(&self, other: &Self) -> bool {
        self.index == other.index && self.name == other.name
    }
}

impl Eq for Var {}

impl Hash for Var {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.index.hash(state);
    }
}

#[derive(Clone, Debug)]
pub struct Compound {
    pub functor: Sym,
    pub args: Vec<Term>,
}

/// A term of the rule language.
///
/// Lists are cons cells ending in [`Term::Nil`] or in an arbitrary tail (a
/// variable for partial lists). Zero-argument compounds never exist: `f()` is
/// the constant `f`.
#[derive(Clone, Debug)]
pub enum Term {
    Var(Var),
    Atom(Sym),
    Int(i64),
    Float(f64),
    Str(Sym),
    Time(TimePoint),
    Compound(Arc<Compound>),
    Cons(Arc<ConsCell>),
    Nil,
}

/// A list cell `(head, tail)`. Dropping unlinks the spine iteratively so very
/// long lists do not exhaust the stack.
#[derive(Clone, Debug)]
pub struct ConsCell(pub Term, pub Term);

impl Drop for ConsCell {
    fn drop(&mut self) {
        let mut tail = std::mem::replace(&mut self.1, Term::Nil);
        while let Term::Cons(arc) = tail {
            match Arc::try_unwrap(arc) {
                Ok(mut cell) => tail = std::mem::replace(&mut cell.1, Term::Nil),
                Err(_) => break,
            }
        }
    }
}

impl Term {
    pub fn atom(name: impl Into<Sym>) -> Term {
        Term::Atom(name.into())
    }

    pub fn string(text: impl Into<Sym>) -> Term {
        Term::Str(text.into())
    }

    pub fn int(v: i64) -> Term {
        Term::Int(v)
    }

    pub fn var(name: impl Into<Sym>, index: u64) -> Term {
        Term::Var(Var::new(name, index))
    }

    /// Build `functor(args..)`. With no arguments this yields the constant.
    pub fn compound(functor: impl Into<Sym>, args: Vec<Term>) -> Term {
        let functor = functor.into();
        if args.is_empty() {
            Term::Atom(functor)
        } else {
            Term::Compound(Arc::new(Compound { functor, args }))
        }
    }

    pub fn cons(head: Term, tail: Term) -> Term {
        Term::Cons(Arc::new(ConsCell(head, tail)))
    }

    pub fn list(items: impl IntoIterator<Item = Term>) -> Term {
        Self::list_with_tail(items, Term::Nil)
    }

    pub fn list_with_tail(items: impl IntoIterator<Item = Term>, tail: Term) -> Term {
        let items: Vec<Term> = items.into_iter().collect();
        items.into_iter().rev().fold(tail, |acc, item| Term::cons(item, acc))
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn is_callable(&self) -> bool {
        matches!(self, Term::Atom(_) | Term::Compound(_))
    }

    /// Name and arity for atoms and compounds.
    pub fn functor(&self) -> Option<(&str, usize)> {
        match self {
            Term::Atom(a) => Some((a, 0)),
            Term::Compound(c) => Some((&c.functor, c.args.len())),
            _ => None,
        }
    }

    pub fn name(&self) -> Option<&str> {
        self.functor().map(|(n, _)| n)
    }

    pub fn args(&self) -> &[Term] {
        match self {
            Term::Compound(c) => &c.args,
            _ => &[],
        }
    }

    pub fn is_functor(&self, name: &str, arity: usize) -> bool {
        self.functor() == Some((name, arity))
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Term::Atom(a) => Some(a),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Term::Int(i) => Some(*i),
            _ => None,
        }
    }

    /// Text of an atom or a string.
    pub fn as_text(&self) -> Option<&str> {
        match self {
            Term::Atom(a) | Term::Str(a) => Some(a),
            _ => None,
        }
    }

    /// Items of a proper list; `None` for partial lists and non-lists.
    pub fn as_list(&self) -> Option<Vec<Term>> {
        let (items, tail) = self.list_parts()?;
        matches!(tail, Term::Nil).then_some(items)
    }

    /// Items and tail of a (possibly partial) list. `Nil` yields no items.
    pub fn list_parts(&self) -> Option<(Vec<Term>, Term)> {
        if !matches!(self, Term::Cons(_) | Term::Nil) {
            return None;
        }
        let mut items = Vec::new();
        let mut cur = self;
        while let Term::Cons(cell) = cur {
            items.push(cell.0.clone());
            cur = &cell.1;
        }
        Some((items, cur.clone()))
    }

    pub fn is_ground(&self) -> bool {
        let mut cur = self;
        loop {
            match cur {
                Term::Var(_) => return false,
                Term::Compound(c) => return c.args.iter().all(Term::is_ground),
                Term::Cons(cell) => {
                    if !cell.0.is_ground() {
                        return false;
                    }
                    cur = &cell.1;
                }
                _ => return true,
            }
        }
    }

    /// Distinct variables in depth-first, left-to-right order.
    pub fn variables(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    pub(crate) fn collect_vars(&self, out: &mut Vec<Var>) {
        match self {
            Term::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Term::Compound(c) => c.args.iter().for_each(|a| a.collect_vars(out)),
            Term::Cons(_) => {
                let mut cur = self;
                while let Term::Cons(cell) = cur {
                    cell.0.collect_vars(out);
                    cur = &cell.1;
                }
                cur.collect_vars(out);
            }
            _ => {}
        }
    }

    /// Rebuild the term with every variable passed through `f`.
    pub fn map_vars(&self, f: &mut impl FnMut(&Var) -> Term) -> Term {
        match self {
            Term::Var(v) => f(v),
            Term::Compound(c) => Term::Compound(Arc::new(Compound {
                functor: c.functor.clone(),
                args: c.args.iter().map(|a| a.map_vars(f)).collect(),
            })),
            Term::Cons(_) => {
                let (items, tail) = self.list_parts().unwrap_or((Vec::new(), Term::Nil));
                let items: Vec<Term> = items.iter().map(|i| i.map_vars(f)).collect();
                Term::list_with_tail(items, tail.map_vars(f))
            }
            other => other.clone(),
        }
    }

    /// Numeric or temporal ordinal used for time comparisons.
    pub fn time_ordinal(&self) -> Option<f64> {
        match self {
            Term::Int(i) => Some(*i as f64),
            Term::Float(f) => Some(*f),
            Term::Time(t) => Some(t.millis() as f64),
            _ => None,
        }
    }
}

impl PartialEq for Term {
    fn eq(&self, other: &Self) -> bool {
        use Term::*;
        match (self, other) {
            (Var(a), Var(b)) => a == b,
            (Atom(a), Atom(b)) | (Str(a), Str(b)) => a == b,
            (Int(a), Int(b)) => a == b,
            (Float(a), Float(b)) => a == b || a.to_bits() == b.to_bits(),
            (Time(a), Time(b)) => a == b,
            (Compound(a), Compound(b)) => {
                Arc::ptr_eq(a, b) || (a.functor == b.functor && a.args == b.args)
            }
            (Cons(_), Cons(_)) => {
                let (mut x, mut y) = (self, other);
                loop {
                    match (x, y) {
                        (Cons(a), Cons(b)) => {
                            if Arc::ptr_eq(a, b) {
                                return true;
                            }
                            if a.0 != b.0 {
                                return false;
                            }
                            x = &a.1;
                            y = &b.1;
                        }
                        _ => return x == y,
                    }
                }
            }
            (Nil, Nil) => true,
            _ => false,
        }
    }
}

impl Eq for Term {}

impl Hash for Term {
    fn hash<H: Hasher>(&self, state: &mut H) {
        std::mem::discriminant(self).hash(state);
        match self {
            Term::Var(v) => v.hash(state),
            Term::Atom(a) | Term::Str(a) => a.hash(state),
            Term::Int(i) => i.hash(state),
            Term::Float(f) => {
                let norm = if *f == 0.0 { 0.0f64 } else { *f };
                norm.to_bits().hash(state)
            }
            Term::Time(t) => t.hash(state),
            Term::Compound(c) => {
                c.functor.hash(state);
                c.args.hash(state);
            }
            Term::Cons(_) => {
                let mut cur = self;
                while let Term::Cons(cell) = cur {
                    cell.0.hash(state);
                    cur = &cell.1;
                }
                cur.hash(state);
            }
            Term::Nil => {}
        }
    }
}

impl From<TimePoint> for Term {
    fn from(t: TimePoint) -> Self {
        Term::Time(t)
    }
}

impl From<i64> for Term {
    fn from(v: i64) -> Self {
        Term::Int(v)
    }
}

impl From<&str> for Term {
    fn from(v: &str) -> Self {
        Term::atom(v)
    }
}

/// A substitution from variables to terms.
///
/// Values are stored as bound (not pre-resolved); [`Bindings::apply`] follows
/// chains, so applying twice equals applying once.
#[derive(Clone, Debug, PartialEq)]
pub struct Bindings {
    map: HashMap<Var, Term>,
    occurs_check: bool,
}

impl Default for Bindings {
    fn default() -> Self {
        Bindings::new()
    }
}

impl Bindings {
    pub fn new() -> Self {
        Bindings { map: HashMap::new(), occurs_check: true }
    }

    /// Bindings that skip the occurs check during unification.
    pub fn without_occurs_check() -> Self {
        Bindings { map: HashMap::new(), occurs_check: false }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&self, v: &Var) -> Option<&Term> {
        self.map.get(v)
    }

    /// Look a variable up by name (first match).
    pub fn get_by_name(&self, name: &str) -> Option<&Term> {
        self.map.iter().find(|(v, _)| v.name() == name).map(|(_, t)| t)
    }

    pub fn insert(&mut self, v: Var, t: Term) {
        self.map.insert(v, t);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &Term)> {
        self.map.iter()
    }

    /// Most general unifier of `a` and `b` extending `self`, or `None`.
    pub fn unify(&self, a: &Term, b: &Term) -> Option<Bindings> {
        let mut next = self.clone();
        let oc = self.occurs_check;
        unify_with(a, b, &mut next, oc).then_some(next)
    }

    /// Replace every bound variable in `t`, transitively.
    pub fn apply(&self, t: &Term) -> Term {
        unify::resolve(t, self)
    }
}

impl Subst for Bindings {
    fn lookup(&self, v: &Var) -> Option<&Term> {
        self.map.get(v)
    }

    fn bind(&mut self, v: Var, t: Term) {
        self.map.insert(v, t);
    }
}

/// Convenience wrapper matching the functional form `unify(t1, t2, b)`.
pub fn unify(a: &Term, b: &Term, bindings: &Bindings) -> Option<Bindings> {
    bindings.unify(a, b)
}

/// Convenience wrapper matching `apply(b, t)`.
pub fn apply(bindings: &Bindings, t: &Term) -> Term {
    bindings.apply(t)
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.index >= FRESH_BASE {
            write!(f, "_G{}", self.index - FRESH_BASE)
        } else {
            f.write_str(&self.name)
        }
    }
}
