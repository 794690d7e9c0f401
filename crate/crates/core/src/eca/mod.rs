//! The ECA interpreter: collects `eca` rules from the knowledge base and
//! evaluates them as the goal `T, E, ((C, A, P) ; EL)`, left to right, with
//! backtracking, a rolled-back transaction per failed evaluation, and an
//! outcome per rule.

use std::fmt;

use crate::kb::{KnowledgeBase, TransitionRecord};
use crate::parser::{Clause, Literal, Query};
use crate::runtime::Runtime;
use crate::solver::{SolveError, Solver, SolverConfig};
use crate::term::{Bindings, Term, Var};

#[derive(Debug, thiserror::Error)]
pub enum EcaError {
    #[error("eca/{0} is not a reaction rule (expected arity 2, 3, 4 or 6)")]
    MalformedEca(usize),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// A reaction rule normalized to six parts; `None` is a blank part.
#[derive(Clone, Debug, PartialEq)]
pub struct EcaRule {
    pub time: Option<Term>,
    pub event: Option<Term>,
    pub condition: Option<Term>,
    pub action: Option<Term>,
    pub post: Option<Term>,
    pub else_action: Option<Term>,
    pub source_oid: Term,
}

fn part(t: &Term) -> Option<Term> {
    match t {
        Term::Var(v) if v.is_anonymous() => None,
        other => Some(other.clone()),
    }
}

fn blank_or(p: &Option<Term>) -> Term {
    p.clone().unwrap_or_else(|| Term::Var(Var::fresh("_")))
}

impl EcaRule {
    /// Normalize `eca(C,A)`, `eca(E,C,A)`, `eca(E,C,A,P)` or
    /// `eca(T,E,C,A,P,EL)`.
    pub fn from_term(t: &Term, source_oid: Term) -> Result<EcaRule, EcaError> {
        let arity = match t.functor() {
            Some(("eca", n)) => n,
            _ => return Err(EcaError::MalformedEca(0)),
        };
        let a = t.args();
        let blank = || None;
        let (time, event, condition, action, post, else_action) = match arity {
            2 => (blank(), blank(), part(&a[0]), part(&a[1]), blank(), blank()),
            3 => (blank(), part(&a[0]), part(&a[1]), part(&a[2]), blank(), blank()),
            4 => (blank(), part(&a[0]), part(&a[1]), part(&a[2]), part(&a[3]), blank()),
            6 => (part(&a[0]), part(&a[1]), part(&a[2]), part(&a[3]), part(&a[4]), part(&a[5])),
            n => return Err(EcaError::MalformedEca(n)),
        };
        Ok(EcaRule { time, event, condition, action, post, else_action, source_oid })
    }

    /// The shortest `eca/N` fact that normalizes back to this rule.
    pub fn to_term(&self) -> Term {
        let b = blank_or;
        let args = if self.time.is_none() && self.else_action.is_none() {
            if self.post.is_some() {
                vec![b(&self.event), b(&self.condition), b(&self.action), b(&self.post)]
            } else if self.event.is_some() {
                vec![b(&self.event), b(&self.condition), b(&self.action)]
            } else {
                vec![b(&self.condition), b(&self.action)]
            }
        } else {
            vec![
                b(&self.time),
                b(&self.event),
                b(&self.condition),
                b(&self.action),
                b(&self.post),
                b(&self.else_action),
            ]
        };
        Term::compound("eca", args)
    }

    /// `T, $progress(1), E, $progress(2), ((C, A, P, Flag = fired) ; (EL, Flag = else_fired))`
    fn goal(&self, flag: &Term) -> Term {
        let truth = |p: &Option<Term>| p.clone().unwrap_or_else(|| Term::atom("true"));
        let and = |a: Term, b: Term| Term::compound(",", vec![a, b]);
        let progress = |n| Term::compound("$progress", vec![Term::int(n)]);
        let set = |v: &str| Term::compound("=", vec![flag.clone(), Term::atom(v)]);
        let main = and(
            truth(&self.condition),
            and(truth(&self.action), and(truth(&self.post), set("fired"))),
        );
        let alt = and(truth(&self.else_action), set("else_fired"));
        and(
            truth(&self.time),
            and(progress(1), and(truth(&self.event), and(progress(2), Term::compound(";", vec![main, alt])))),
        )
    }
}

/// A rule as collected for one tick.
#[derive(Clone, Debug, PartialEq)]
pub struct ActiveRule {
    /// Position in collection order.
    pub id: usize,
    /// The rule term with canonical variables; stable across ticks while the
    /// rule is unchanged, and used as the activation identity.
    pub key: Term,
    pub rule: EcaRule,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EcaStatus {
    Fired,
    ElseFired,
    TimeSkip,
    EventSkip,
    Failed,
}

impl fmt::Display for EcaStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EcaStatus::Fired => "fired",
            EcaStatus::ElseFired => "else_fired",
            EcaStatus::TimeSkip => "time_skip",
            EcaStatus::EventSkip => "event_skip",
            EcaStatus::Failed => "failed",
        })
    }
}

#[derive(Clone, Debug)]
pub struct EcaOutcome {
    pub rule_id: usize,
    pub key: Term,
    pub status: EcaStatus,
    /// Bindings of the rule's named variables for the taken solution.
    pub bindings: Bindings,
    /// Knowledge-base transitions kept by this evaluation.
    pub transitions: Vec<TransitionRecord>,
    pub error: Option<String>,
}

impl fmt::Display for EcaOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rule {} {} {}", self.rule_id, self.status, self.key)?;
        let mut vars: Vec<(&Var, &Term)> = self.bindings.iter().collect();
        vars.sort_by(|a, b| a.0.name().cmp(b.0.name()));
        for (v, t) in vars {
            write!(f, " {}={}", v.name(), t)?;
        }
        if let Some(e) = &self.error {
            write!(f, " error: {e}")?;
        }
        Ok(())
    }
}

const ECA_ARITIES: [usize; 4] = [2, 3, 4, 6];

/// Every derivable `eca` rule, in knowledge-base clause order. Facts are
/// taken as written; `eca` heads with a body contribute one rule per
/// solution of the body. Clauses of other arities are reported.
pub fn collect_eca_rules_lenient(kb: &mut KnowledgeBase, rt: &Runtime) -> (Vec<ActiveRule>, Vec<EcaError>) {
    let mut found: Vec<(Term, Term)> = Vec::new();
    let mut errors = Vec::new();
    let mut sources: Vec<(Term, Clause)> = Vec::new();
    for m in kb.modules() {
        for c in &m.clauses {
            if let Some(("eca", n)) = c.head.functor() {
                if ECA_ARITIES.contains(&n) {
                    sources.push((m.oid.clone(), (**c).clone()));
                } else {
                    errors.push(EcaError::MalformedEca(n));
                }
            }
        }
    }
    for (oid, c) in sources {
        if c.is_fact() {
            found.push((oid, c.head.clone()));
            continue;
        }
        let (head, body) = c.rename();
        let goals: Vec<Term> = body.iter().map(Literal::to_goal).collect();
        let mut s = Solver::new(kb, rt, &Query::from_goals(Vec::new()), SolverConfig::default());
        match s.find_all(&head, goals, None) {
            Ok(heads) => found.extend(heads.into_iter().map(|h| (oid.clone(), h))),
            Err(e) => errors.push(e.into()),
        }
    }
    let rules = found
        .into_iter()
        .enumerate()
        .filter_map(|(id, (oid, head))| {
            let key = Clause::fact(head.clone()).head;
            EcaRule::from_term(&key, oid).ok().map(|rule| ActiveRule { id, key, rule })
        })
        .collect();
    (rules, errors)
}

/// Strict form of [`collect_eca_rules_lenient`]: any malformed rule is an error.
pub fn collect_eca_rules(kb: &mut KnowledgeBase, rt: &Runtime) -> Result<Vec<ActiveRule>, EcaError> {
    let (rules, mut errors) = collect_eca_rules_lenient(kb, rt);
    match errors.is_empty() {
        true => Ok(rules),
        false => Err(errors.remove(0)),
    }
}

/// Evaluate one rule against `kb`. Updates of a successful evaluation are
/// committed; a failed one leaves the knowledge base as it found it.
pub fn evaluate_eca(rule: &ActiveRule, kb: &mut KnowledgeBase, rt: &Runtime) -> EcaOutcome {
    let flag = Term::Var(Var::fresh("Flag$"));
    let goal = rule.rule.goal(&flag);
    let mark = kb.checkpoint();
    let cfg = SolverConfig { commit_on_yield: true, activation: Some(rule.key.clone()), ..SolverConfig::default() };
    let mut outcome = EcaOutcome {
        rule_id: rule.id,
        key: rule.key.clone(),
        status: EcaStatus::Failed,
        bindings: Bindings::new(),
        transitions: Vec::new(),
        error: None,
    };
    let query = Query::from_goals(vec![goal]);
    let mut s = Solver::new(kb, rt, &query, cfg);
    let first = s.next_solution();
    let progress = s.progress();
    drop(s);
    match first {
        Some(Ok(sol)) => {
            let flag_val = sol.bindings.iter().find(|(v, _)| v.name() == "Flag$").map(|(_, t)| t.clone());
            outcome.status = match flag_val.as_ref().and_then(Term::as_atom) {
                Some("fired") => EcaStatus::Fired,
                _ => EcaStatus::ElseFired,
            };
            for (v, t) in sol.bindings.iter() {
                if v.name() != "Flag$" {
                    outcome.bindings.insert(v.clone(), t.clone());
                }
            }
            outcome.transitions = sol.side_effect_log;
        }
        other => {
            // The solver has already undone its own updates; this also
            // covers updates it could not see.
            let _ = kb.rollback_to(mark);
            outcome.status = match progress {
                0 => EcaStatus::TimeSkip,
                1 => EcaStatus::EventSkip,
                _ => EcaStatus::Failed,
            };
            if let Some(Err(e)) = other {
                log::warn!("eca rule {}: {e}", rule.key);
                outcome.status = EcaStatus::Failed;
                outcome.error = Some(e.to_string());
            }
        }
    }
    log::debug!("{outcome}");
    outcome
}

/// One sequential tick: collect, then evaluate each rule in order against the
/// live knowledge base.
pub fn step(kb: &mut KnowledgeBase, rt: &Runtime) -> Vec<EcaOutcome> {
    let (rules, errors) = collect_eca_rules_lenient(kb, rt);
    for e in errors {
        log::warn!("{e}");
    }
    rules.iter().map(|r| evaluate_eca(r, kb, rt)).collect()
}

/// One parallel tick: every rule is evaluated against its own copy of the
/// knowledge base as it stood at the start of the tick, on up to `workers`
/// threads. The kept transitions are then applied to `kb` in rule order.
pub fn step_parallel(kb: &mut KnowledgeBase, rt: &Runtime, workers: usize) -> Vec<EcaOutcome> {
    let (rules, errors) = collect_eca_rules_lenient(kb, rt);
    for e in errors {
        log::warn!("{e}");
    }
    if rules.is_empty() {
        return Vec::new();
    }
    let snapshot: &KnowledgeBase = kb;
    let workers = workers.clamp(1, rules.len());
    let mut slots: Vec<Option<EcaOutcome>> = vec![None; rules.len()];
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let rules = &rules;
                scope.spawn(move || {
                    rules
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| i % workers == w)
                        .map(|(i, r)| {
                            let mut local = snapshot.clone();
                            (i, evaluate_eca(r, &mut local, rt))
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, o) in h.join().expect("eca worker panicked") {
                slots[i] = Some(o);
            }
        }
    });
    let outcomes: Vec<EcaOutcome> = slots.into_iter().map(|o| o.expect("every rule evaluated")).collect();
    for o in &outcomes {
        kb.apply_foreign(&o.transitions);
    }
    kb.commit();
    outcomes
}
