//! Interval-based Event Calculus.
//!
//! The axioms live in a small prelude of clauses consulted ahead of the
//! knowledge base. Event algebra expressions are evaluated natively by
//! [`algebra`], which the `event/2` builtin calls.

mod algebra;

use std::cmp::Ordering;
use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use crate::kb::{AddPolicy, ClauseRef, KnowledgeBase, Marker};
use crate::parser::{parse_program, Clause, Query};
use crate::runtime::Runtime;
use crate::solver::{Builtin, SolveError, Solver, SolverConfig};
use crate::term::{Term, Var};

pub use algebra::is_algebra;

const PRELUDE: &str = r#"
holdsInterval([E1,E2],[T11,T22]) :-
    event([E1],[T11,T12]), event([E2],[T21,T22]),
    [T11,T12] =< [T21,T22], not(broken(T12,[E1,E2],T21)).
holdsInterval([E1,E2],[T11,T22],Scope) :-
    event([E1],[T11,T12]), event([E2],[T21,T22]),
    [T11,T12] =< [T21,T22], not(broken(T12,[E1,E2],T21,Scope)).
broken(T1,Interval,T2) :-
    terminates(Terminator,Interval,[T1,T2]),
    event([Terminator],[T11,T12]), T1 < T11, T12 < T2.
broken(T1,Interval,T2,Scope) :-
    terminates(Terminator,Interval,[T1,T2]),
    '$event_type'(Terminator,Ty), member(Ty,Scope),
    event([Terminator],[T11,T12]), T1 < T11, T12 < T2.
holdsAt(F,T) :-
    '$happened'(E,T1), T1 =< T, initiates(E,F,T1), not('$clipped'(T1,F,T)).
'$clipped'(T1,F,T) :-
    '$happened'(E,T2), T1 < T2, T2 =< T, terminates(E,F,T2).
'$happened'(E,T) :- happens(E,T0), '$point'(T0,T).
'$happened'(E,T) :- occurs(E,T0), '$point'(T0,T).
detect(E,T) :- '$event_expr'(E), event(E,T).
"#;

fn prelude() -> &'static HashMap<(String, usize), Arc<[ClauseRef]>> {
    static PRELUDE_INDEX: OnceLock<HashMap<(String, usize), Arc<[ClauseRef]>>> = OnceLock::new();
    PRELUDE_INDEX.get_or_init(|| {
        let src = parse_program(PRELUDE, Term::atom("$ec")).expect("prelude parses");
        let mut grouped: HashMap<(String, usize), Vec<ClauseRef>> = HashMap::new();
        for c in src.clauses {
            let (n, a) = c.key();
            let key = (n.to_string(), a);
            grouped.entry(key).or_default().push(Arc::new(c.with_serial(crate::kb::next_serial())));
        }
        grouped.into_iter().map(|(k, v)| (k, v.into())).collect()
    })
}

/// Prelude clauses for `name/arity`, if the prelude defines it.
pub(crate) fn prelude_clauses(name: &str, arity: usize) -> Option<Arc<[ClauseRef]>> {
    if !matches!(name, "holdsInterval" | "broken" | "holdsAt" | "detect") && !name.starts_with('$') {
        return None;
    }
    prelude().get(&(name.to_string(), arity)).cloned()
}

#[derive(Debug, thiserror::Error)]
pub enum EcError {
    #[error("event {0} is not ground")]
    NonGroundEvent(Term),
    #[error("time {0} is neither a time point nor an interval")]
    BadTime(Term),
    #[error(transparent)]
    Kb(#[from] crate::kb::KbError),
}

/// Which occurrences `consume` removes from an event instance sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConsumePolicy {
    All,
    First,
    Last,
}

impl ConsumePolicy {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "all" => Some(ConsumePolicy::All),
            "first" => Some(ConsumePolicy::First),
            "last" => Some(ConsumePolicy::Last),
            _ => None,
        }
    }
}

/// One detection of a complex event: the instantiated expression and its
/// occurrence interval.
#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    pub event: Term,
    pub start: Term,
    pub end: Term,
}

impl Detection {
    pub fn interval(&self) -> Term {
        Term::list(vec![self.start.clone(), self.end.clone()])
    }
}

/// The event instance sequence key of an event: `eis(functor)`.
pub fn eis_key(event: &Term) -> Term {
    let name = event.name().unwrap_or("event");
    Term::compound("eis", vec![Term::atom(name)])
}

fn is_time(t: &Term) -> bool {
    t.time_ordinal().is_some()
}

fn valid_time(t: &Term) -> bool {
    match t.as_list() {
        Some(v) if v.len() == 2 => {
            is_time(&v[0]) && is_time(&v[1]) && v[0].time_ordinal() <= v[1].time_ordinal()
        }
        _ => is_time(t),
    }
}

/// Append `occurs(Event, Time)` to the event's instance sequence. `time` is a
/// time point or a two-element interval list.
pub fn record_occurrence(kb: &mut KnowledgeBase, event: &Term, time: &Term) -> Result<Marker, EcError> {
    if !event.is_ground() {
        return Err(EcError::NonGroundEvent(event.clone()));
    }
    if !valid_time(time) {
        return Err(EcError::BadTime(time.clone()));
    }
    let fact = Clause::fact(Term::compound("occurs", vec![event.clone(), time.clone()]));
    Ok(kb.add_module(eis_key(event), vec![fact], AddPolicy::Append)?)
}

fn start_ordinal(t: &Term) -> Option<f64> {
    match t.as_list() {
        Some(v) if v.len() == 2 => v[0].time_ordinal(),
        _ => t.time_ordinal(),
    }
}

/// Remove occurrences from the instance sequence `key`. A no-op returning
/// `None` when the key names no live module.
pub fn consume(kb: &mut KnowledgeBase, key: &Term, policy: ConsumePolicy) -> Option<Marker> {
    let module = kb.module(key)?;
    let pick = |ord: Ordering| {
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in module.clauses.iter().enumerate() {
            if !c.head.is_functor("occurs", 2) {
                continue;
            }
            let Some(t) = start_ordinal(&c.head.args()[1]) else { continue };
            if best.is_none_or(|(_, b)| t.partial_cmp(&b) == Some(ord)) {
                best = Some((i, t));
            }
        }
        best.map(|(i, _)| i)
    };
    match policy {
        ConsumePolicy::All => kb.remove_module(key).ok(),
        ConsumePolicy::First => {
            let i = pick(Ordering::Less)?;
            kb.remove_clauses(key, &[i]).ok()
        }
        ConsumePolicy::Last => {
            let i = pick(Ordering::Greater)?;
            kb.remove_clauses(key, &[i]).ok()
        }
    }
}

fn query_values(
    kb: &mut KnowledgeBase,
    rt: &Runtime,
    goal: Term,
    template: &Term,
) -> Result<Vec<Term>, SolveError> {
    let q = Query::from_goals(vec![Term::atom("true")]);
    let mut s = Solver::new(kb, rt, &q, SolverConfig::default());
    s.find_all(template, vec![goal], None)
}

/// Intervals `[T1,T2]` over which the event pair `[e1,e2]` holds.
pub fn holds_interval(
    kb: &mut KnowledgeBase,
    rt: &Runtime,
    pair: (&Term, &Term),
    scope: Option<&[Term]>,
) -> Result<Vec<Term>, SolveError> {
    let i = Term::Var(Var::fresh("I"));
    let mut args = vec![Term::list(vec![pair.0.clone(), pair.1.clone()]), i.clone()];
    if let Some(sc) = scope {
        args.push(Term::list(sc.to_vec()));
    }
    query_values(kb, rt, Term::compound("holdsInterval", args), &i)
}

/// Whether `fluent` holds at `t` under the initiates/terminates clauses.
pub fn holds_at(kb: &mut KnowledgeBase, rt: &Runtime, fluent: &Term, t: &Term) -> Result<bool, SolveError> {
    let goal = Term::compound("holdsAt", vec![fluent.clone(), t.clone()]);
    Ok(!query_values(kb, rt, goal, &Term::atom("true"))?.is_empty())
}

/// All detections of an event algebra expression over the current EIS.
pub fn detect(kb: &mut KnowledgeBase, rt: &Runtime, expr: &Term) -> Result<Vec<Detection>, SolveError> {
    let q = Query::from_goals(vec![Term::atom("true")]);
    let mut s = Solver::new(kb, rt, &q, SolverConfig::default());
    algebra::detect(&mut s, expr)
}

// ---- builtins ----

pub(crate) fn builtins() -> Vec<(&'static str, usize, Builtin)> {
    vec![
        ("event", 2, b_event as Builtin),
        ("$event_expr", 1, b_event_expr),
        ("$as_interval", 2, b_as_interval),
        ("$point", 2, b_point),
        ("$event_type", 2, b_event_type),
    ]
}

fn unwrap_single(t: Term) -> Term {
    match t.as_list() {
        Some(mut v) if v.len() == 1 => v.remove(0),
        _ => t,
    }
}

/// `event(E, [T1,T2])`: an algebra expression is detected natively, any other
/// term is looked up as an `occurs/2` fact.
fn b_event(s: &mut Solver<'_>, a: &[Term]) -> Result<bool, SolveError> {
    let e = unwrap_single(s.resolve(&a[0]));
    if is_algebra(&e) {
        let found = algebra::detect(s, &e)?;
        let values = found.into_iter().map(|d| Term::list(vec![d.event.clone(), d.interval()])).collect();
        return Ok(s.unify_alternatives(Term::list(vec![e, a[1].clone()]), values));
    }
    let t0 = Term::Var(Var::fresh("T0"));
    let goal = Term::compound(
        ",",
        vec![
            Term::compound("occurs", vec![e, t0.clone()]),
            Term::compound("$as_interval", vec![t0, a[1].clone()]),
        ],
    );
    s.push_goal(goal);
    Ok(true)
}

fn b_event_expr(s: &mut Solver<'_>, a: &[Term]) -> Result<bool, SolveError> {
    Ok(is_algebra(&s.resolve(&a[0])))
}

fn b_as_interval(s: &mut Solver<'_>, a: &[Term]) -> Result<bool, SolveError> {
    let t = s.resolve(&a[0]);
    let i = match t.as_list() {
        Some(v) if v.len() == 2 => t,
        _ => Term::list(vec![t.clone(), t]),
    };
    Ok(s.unify(&a[1], &i))
}

fn b_point(s: &mut Solver<'_>, a: &[Term]) -> Result<bool, SolveError> {
    let t = s.resolve(&a[0]);
    let p = match t.as_list() {
        Some(mut v) if v.len() == 2 => v.remove(1),
        _ => t,
    };
    Ok(s.unify(&a[1], &p))
}

fn b_event_type(s: &mut Solver<'_>, a: &[Term]) -> Result<bool, SolveError> {
    let t = s.resolve(&a[0]);
    match t.name() {
        Some(n) => {
            let ty = Term::atom(n);
            Ok(s.unify(&a[1], &ty))
        }
        None => Ok(false),
    }
}
