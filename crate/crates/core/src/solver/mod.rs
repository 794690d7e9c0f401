//! SLDNF resolution as an explicit machine: a linked goal list, a choice-point
//! stack and a trail. The trail records both variable bindings and knowledge
//! base markers, so backtracking over an update builtin also rolls the update
//! back.

pub(crate) mod arith;
mod builtins;

use std::collections::HashMap;
use std::rc::Rc;
use std::sync::Arc;

use crate::kb::{AddPolicy, ClauseRef, KbError, KnowledgeBase, Marker, TransitionRecord};
use crate::messaging::MessagingError;
use crate::parser::{parse_program, substitute_placeholders, Literal, Query};
use crate::runtime::{Runtime, StubOutcome, StubTable};
use crate::term::{unify_with, Bindings, Subst, Term, Var};

pub use builtins::builtin_names;
pub(crate) use builtins::Builtin;

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub max_depth: usize,
    pub occurs_check: bool,
    /// Seal the transition log each time a top-level solution is produced,
    /// so later backtracking keeps that path's updates.
    pub commit_on_yield: bool,
    /// Identity of the enclosing activation (an ECA rule or conversation);
    /// part of the key for per-call-site timer state.
    pub activation: Option<Term>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { max_depth: 10_000, occurs_check: true, commit_on_yield: false, activation: None }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error("depth limit {0} exceeded")]
    DepthExceeded(usize),
    #[error("not/1 called on non-ground goal {0}")]
    FlounderingNaf(Term),
    #[error("arguments insufficiently instantiated in {0}")]
    Instantiation(Term),
    #[error("{builtin}: expected {expected}, got {got}")]
    BuiltinType { builtin: String, expected: String, got: Term },
    #[error("unhandled exception {0}")]
    Exception(Term),
    #[error("malformed event expression {0}")]
    MalformedExpr(Term),
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Messaging(#[from] MessagingError),
}

impl From<crate::parser::SyntaxError> for SolveError {
    fn from(e: crate::parser::SyntaxError) -> Self {
        SolveError::Kb(KbError::Syntax(e))
    }
}

/// One answer: bindings of the query variables plus the knowledge-base
/// transitions performed since the solve started.
#[derive(Clone, Debug)]
pub struct Solution {
    pub bindings: Bindings,
    pub side_effect_log: Vec<TransitionRecord>,
}

impl Solution {
    pub fn get(&self, name: &str) -> Option<&Term> {
        self.bindings.get_by_name(name)
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Frame {
    pub depth: usize,
    /// Choice-stack height a `!` in this body cuts back to.
    pub cut: usize,
    /// Height `rollback/0` cuts back to.
    pub txn: usize,
}

/// `(clause serial, literal index)` of a body literal; serial 0 for query goals.
pub(crate) type Site = (u64, u32);

#[derive(Clone, Debug)]
enum Goal {
    Call { term: Term, frame: Frame, site: Site },
    CutTo(usize),
    Fail,
}

#[derive(Debug)]
struct GoalNode {
    goal: Goal,
    next: Goals,
}

type Goals = Option<Rc<GoalNode>>;

fn push(goal: Goal, next: Goals) -> Goals {
    Some(Rc::new(GoalNode { goal, next }))
}

enum Alt {
    Clauses { goal: Term, clauses: Arc<[ClauseRef]>, next: usize, frame: Frame, cont: Goals },
    Values { target: Term, values: Vec<Term>, next: usize, cont: Goals },
    Goals(Goals),
}

struct Choice {
    trail_len: usize,
    alt: Alt,
}

enum TrailEntry {
    Bind(Var),
    Kb(Marker),
    Handler,
}

#[derive(Default)]
struct Store {
    map: HashMap<Var, Term>,
    trail: Vec<TrailEntry>,
}

impl Subst for Store {
    fn lookup(&self, v: &Var) -> Option<&Term> {
        self.map.get(v)
    }

    fn bind(&mut self, v: Var, t: Term) {
        self.map.insert(v.clone(), t);
        self.trail.push(TrailEntry::Bind(v));
    }
}

/// A goal of a suspended derivation, detached from any machine.
#[derive(Clone, Debug, PartialEq)]
pub enum ContGoal {
    Call(Term),
    Cut,
    Fail,
}

/// A lazy stream of solutions for one query.
pub struct Solver<'a> {
    kb: &'a mut KnowledgeBase,
    rt: &'a Runtime,
    cfg: SolverConfig,
    store: Store,
    goals: Goals,
    choices: Vec<Choice>,
    query: Vec<(Var, Term)>,
    started: bool,
    done: bool,
    start: Marker,
    handlers: Vec<(Term, Term)>,
    progress: u8,
    current: Frame,
    site: Site,
    steps: u64,
}

const TOP: Frame = Frame { depth: 0, cut: 0, txn: 0 };

impl<'a> Solver<'a> {
    pub fn new(kb: &'a mut KnowledgeBase, rt: &'a Runtime, query: &Query, cfg: SolverConfig) -> Self {
        // Query variables are renamed apart so continuations and nested
        // solves can never capture them by accident.
        let mut renamed: HashMap<Var, Term> = HashMap::new();
        let mut fresh = |t: &Term| {
            t.map_vars(&mut |v| renamed.entry(v.clone()).or_insert_with(|| Term::Var(Var::fresh(v.name()))).clone())
        };
        let goals: Vec<Term> = query.goals.iter().map(&mut fresh).collect();
        let vars: Vec<(Var, Term)> = query
            .variables
            .iter()
            .map(|v| (v.clone(), fresh(&Term::Var(v.clone()))))
            .collect();
        let mut goal_list: Goals = None;
        for (i, g) in goals.into_iter().enumerate().rev() {
            goal_list = push(Goal::Call { term: g, frame: TOP, site: (0, i as u32) }, goal_list);
        }
        Self::from_parts(kb, rt, cfg, goal_list, vars)
    }

    fn from_parts(
        kb: &'a mut KnowledgeBase,
        rt: &'a Runtime,
        cfg: SolverConfig,
        goals: Goals,
        query: Vec<(Var, Term)>,
    ) -> Self {
        let start = kb.checkpoint();
        Solver {
            kb,
            rt,
            cfg,
            store: Store::default(),
            goals,
            choices: Vec::new(),
            query,
            started: false,
            done: false,
            start,
            handlers: Vec::new(),
            progress: 0,
            current: TOP,
            site: (0, 0),
            steps: 0,
        }
    }

    /// Resume a suspended derivation: first the `pre` goals, then `cont`.
    pub fn resume(
        kb: &'a mut KnowledgeBase,
        rt: &'a Runtime,
        cfg: SolverConfig,
        pre: Vec<Term>,
        cont: &[ContGoal],
    ) -> Self {
        let mut goals: Goals = None;
        for g in cont.iter().rev() {
            let goal = match g {
                ContGoal::Call(t) => Goal::Call { term: t.clone(), frame: TOP, site: (0, 0) },
                ContGoal::Cut => Goal::CutTo(0),
                ContGoal::Fail => Goal::Fail,
            };
            goals = push(goal, goals);
        }
        for (i, t) in pre.into_iter().enumerate().rev() {
            goals = push(Goal::Call { term: t, frame: TOP, site: (0, i as u32) }, goals);
        }
        Self::from_parts(kb, rt, cfg, goals, Vec::new())
    }

    /// Highest `$progress(N)` marker reached so far.
    pub fn progress(&self) -> u8 {
        self.progress
    }

    /// Resolution steps performed so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn runtime(&self) -> &'a Runtime {
        self.rt
    }

    pub fn kb(&mut self) -> &mut KnowledgeBase {
        self.kb
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn next_solution(&mut self) -> Option<Result<Solution, SolveError>> {
        if self.done {
            return None;
        }
        let found = if self.started {
            match self.backtrack() {
                Ok(true) => self.run(),
                Ok(false) => Ok(false),
                Err(e) => Err(e),
            }
        } else {
            self.started = true;
            self.run()
        };
        match found {
            Ok(true) => {
                let mut bindings = Bindings::new();
                for (v, t) in &self.query {
                    bindings.insert(v.clone(), self.resolve(t));
                }
                let side_effect_log = self.kb.records_since(self.start).to_vec();
                if self.cfg.commit_on_yield {
                    self.kb.commit();
                }
                Some(Ok(Solution { bindings, side_effect_log }))
            }
            Ok(false) => {
                self.finish();
                None
            }
            Err(e) => {
                self.finish();
                Some(Err(e))
            }
        }
    }

    fn finish(&mut self) {
        self.done = true;
        self.choices.clear();
        self.goals = None;
        self.undo_to(0);
    }

    // ---- store access used by builtins ----

    pub fn deref(&self, t: &Term) -> Term {
        let mut cur = t;
        while let Term::Var(v) = cur {
            match self.store.map.get(v) {
                Some(n) => cur = n,
                None => break,
            }
        }
        cur.clone()
    }

    pub fn resolve(&self, t: &Term) -> Term {
        if t.is_ground() {
            return t.clone();
        }
        t.map_vars(&mut |v| {
            let d = self.deref(&Term::Var(v.clone()));
            if d.is_var() {
                d
            } else {
                self.resolve(&d)
            }
        })
    }

    /// Unify under the current store; on failure no bindings remain.
    pub fn unify(&mut self, a: &Term, b: &Term) -> bool {
        let mark = self.store.trail.len();
        if unify_with(a, b, &mut self.store, self.cfg.occurs_check) {
            true
        } else {
            self.undo_to(mark);
            false
        }
    }

    /// Whether `a` and `b` unify, leaving no bindings behind.
    pub fn unifiable(&mut self, a: &Term, b: &Term) -> bool {
        let mark = self.store.trail.len();
        let ok = unify_with(a, b, &mut self.store, self.cfg.occurs_check);
        self.undo_to(mark);
        ok
    }

    fn undo_to(&mut self, len: usize) {
        while self.store.trail.len() > len {
            match self.store.trail.pop() {
                Some(TrailEntry::Bind(v)) => {
                    self.store.map.remove(&v);
                }
                Some(TrailEntry::Kb(m)) => {
                    // A sealed marker means the update was committed.
                    let _ = self.kb.rollback_to(m);
                }
                Some(TrailEntry::Handler) => {
                    self.handlers.pop();
                }
                None => break,
            }
        }
    }

    fn cut_to(&mut self, height: usize) {
        self.choices.truncate(height);
    }

    // ---- helpers for builtins ----

    /// Record that the knowledge base was changed after `marker`.
    pub(crate) fn note_update(&mut self, marker: Marker) {
        self.store.trail.push(TrailEntry::Kb(marker));
    }

    pub(crate) fn site(&self) -> Site {
        self.site
    }

    pub(crate) fn push_handler(&mut self, exception: Term, handler: Term) {
        self.handlers.push((exception, handler));
        self.store.trail.push(TrailEntry::Handler);
    }

    /// Run `goal` next as an opaque call (cuts inside stay local).
    pub fn push_goal(&mut self, goal: Term) {
        let frame = Frame { cut: self.choices.len(), ..self.current };
        self.goals = push(Goal::Call { term: goal, frame, site: self.site }, self.goals.take());
    }

    fn push_raw(&mut self, goal: Goal) {
        self.goals = push(goal, self.goals.take());
    }

    /// Unify `target` with each of `values` in turn on backtracking.
    pub fn unify_alternatives(&mut self, target: Term, values: Vec<Term>) -> bool {
        let cont = self.goals.clone();
        self.try_values(target, values, 0, cont)
    }

    fn try_values(&mut self, target: Term, values: Vec<Term>, start: usize, cont: Goals) -> bool {
        for i in start..values.len() {
            let mark = self.store.trail.len();
            if self.unify(&target, &values[i]) {
                if i + 1 < values.len() {
                    self.choices.push(Choice {
                        trail_len: mark,
                        alt: Alt::Values { target, values, next: i + 1, cont: cont.clone() },
                    });
                }
                self.goals = cont;
                return true;
            }
        }
        false
    }

    /// Every instance of `template` for which `goals` succeed, using a nested
    /// solve over the same knowledge base. Updates made by the nested solve
    /// are undone before returning.
    pub fn find_all(&mut self, template: &Term, goals: Vec<Term>, limit: Option<usize>) -> Result<Vec<Term>, SolveError> {
        let template = self.resolve(template);
        let goals: Vec<Term> = goals.iter().map(|g| self.resolve(g)).collect();
        let mut q = Query::from_goals(goals);
        q.variables = template.variables();
        let cfg = SolverConfig { commit_on_yield: false, ..self.cfg.clone() };
        let mut out = Vec::new();
        let mut inner = Solver::new(self.kb, self.rt, &q, cfg);
        while let Some(sol) = inner.next_solution() {
            out.push(sol?.bindings.apply(&template));
            if limit.is_some_and(|l| out.len() >= l) {
                break;
            }
        }
        inner.finish();
        Ok(out)
    }

    /// Run `goal` to its first solution in a nested solve whose updates persist.
    pub(crate) fn run_once(&mut self, goal: Term) -> Result<bool, SolveError> {
        let goal = self.resolve(&goal);
        let q = Query::from_goals(vec![goal]);
        let cfg = SolverConfig { commit_on_yield: false, ..self.cfg.clone() };
        let mut inner = Solver::new(self.kb, self.rt, &q, cfg);
        match inner.next_solution() {
            Some(Ok(_)) => Ok(true),
            Some(Err(e)) => Err(e),
            None => Ok(false),
        }
    }

    /// The remaining goals with current bindings applied.
    pub(crate) fn capture_continuation(&self) -> Vec<ContGoal> {
        let mut out = Vec::new();
        let mut cur = self.goals.clone();
        while let Some(node) = cur {
            match &node.goal {
                Goal::Call { term, .. } => out.push(ContGoal::Call(self.resolve(term))),
                Goal::CutTo(_) => out.push(ContGoal::Cut),
                Goal::Fail => out.push(ContGoal::Fail),
            }
            cur = node.next.clone();
        }
        out
    }

    /// Parse module text and add it, then run its directives in order.
    pub(crate) fn load_module(
        &mut self,
        oid: Term,
        text: &str,
        args: &[Term],
        policy: AddPolicy,
    ) -> Result<(), SolveError> {
        let text = if args.is_empty() { text.to_string() } else { substitute_placeholders(text, args) };
        let src = parse_program(&text, oid.clone())?;
        let marker = self.kb.add_module(oid, src.clauses, policy)?;
        self.note_update(marker);
        for d in src.directives {
            if !self.run_once(d.clone())? {
                log::warn!("directive {d} failed during load");
            }
        }
        Ok(())
    }

    /// Raise `exception`: run the innermost matching handler in place of the
    /// raising call, or fail the solve with an error.
    pub(crate) fn raise(&mut self, exception: Term) -> Result<bool, SolveError> {
        let name = exception.name().unwrap_or("").to_string();
        let handler = self.handlers.iter().rev().find(|(ty, _)| match ty {
            Term::Var(_) => true,
            t => {
                let tn = t.name().unwrap_or("");
                tn == name || tn == "Exception" || tn.ends_with(".Exception") || tn.ends_with(".Throwable")
            }
        });
        match handler {
            Some((_, goal)) => {
                let goal = goal.clone();
                self.push_goal(goal);
                Ok(true)
            }
            None => Err(SolveError::Exception(exception)),
        }
    }

    // ---- the machine ----

    fn run(&mut self) -> Result<bool, SolveError> {
        loop {
            let Some(node) = self.goals.take() else { return Ok(true) };
            self.goals = node.next.clone();
            self.steps += 1;
            let ok = match &node.goal {
                Goal::Call { term, frame, site } => self.call(term, *frame, *site)?,
                Goal::CutTo(h) => {
                    self.cut_to(*h);
                    true
                }
                Goal::Fail => false,
            };
            if !ok && !self.backtrack()? {
                return Ok(false);
            }
        }
    }

    fn backtrack(&mut self) -> Result<bool, SolveError> {
        while let Some(ch) = self.choices.pop() {
            self.undo_to(ch.trail_len);
            match ch.alt {
                Alt::Goals(g) => {
                    self.goals = g;
                    return Ok(true);
                }
                Alt::Clauses { goal, clauses, next, frame, cont } => {
                    if self.try_clauses(goal, clauses, next, frame, cont)? {
                        return Ok(true);
                    }
                }
                Alt::Values { target, values, next, cont } => {
                    if self.try_values(target, values, next, cont) {
                        return Ok(true);
                    }
                }
            }
        }
        Ok(false)
    }

    fn first_arg_key(&self, goal: &Term) -> Option<Term> {
        let a = goal.args().first()?;
        match self.deref(a) {
            t @ (Term::Atom(_) | Term::Int(_) | Term::Str(_)) => Some(t),
            _ => None,
        }
    }

    fn try_clauses(
        &mut self,
        goal: Term,
        clauses: Arc<[ClauseRef]>,
        start: usize,
        frame: Frame,
        cont: Goals,
    ) -> Result<bool, SolveError> {
        let key = self.first_arg_key(&goal);
        for i in start..clauses.len() {
            let c = &clauses[i];
            if let (Some(k), Some(h)) = (&key, c.head.args().first()) {
                if matches!(h, Term::Atom(_) | Term::Int(_) | Term::Str(_)) && h != k {
                    continue;
                }
            }
            let mark = self.store.trail.len();
            let (head, body) = c.rename();
            if !self.unify(&goal, &head) {
                self.undo_to(mark);
                continue;
            }
            let depth = frame.depth + 1;
            if depth > self.cfg.max_depth {
                return Err(SolveError::DepthExceeded(self.cfg.max_depth));
            }
            let h = self.choices.len();
            if i + 1 < clauses.len() {
                let clauses = clauses.clone();
                self.choices.push(Choice {
                    trail_len: mark,
                    alt: Alt::Clauses { goal, clauses, next: i + 1, frame, cont: cont.clone() },
                });
            }
            let body_frame = Frame { depth, cut: h, txn: frame.txn };
            let serial = c.serial();
            let mut goals = cont;
            for (idx, lit) in body.into_iter().enumerate().rev() {
                let site = (serial, idx as u32);
                let g = match lit {
                    Literal::Cut => Goal::CutTo(h),
                    other => Goal::Call { term: other.to_goal(), frame: body_frame, site },
                };
                goals = push(g, goals);
            }
            self.goals = goals;
            return Ok(true);
        }
        Ok(false)
    }

    fn call(&mut self, term: &Term, frame: Frame, site: Site) -> Result<bool, SolveError> {
        let t = self.deref(term);
        let (name, arity) = match t.functor() {
            Some((n, a)) => (n.to_string(), a),
            None if t.is_var() => return Err(SolveError::Instantiation(t)),
            None => {
                return Err(SolveError::BuiltinType {
                    builtin: "call/1".into(),
                    expected: "callable".into(),
                    got: t,
                })
            }
        };
        let args: Vec<Term> = t.args().to_vec();
        self.current = frame;
        self.site = site;
        match (name.as_str(), arity) {
            ("true", 0) => return Ok(true),
            ("fail", 0) | ("false", 0) => return Ok(false),
            ("!", 0) => {
                self.cut_to(frame.cut);
                return Ok(true);
            }
            (",", 2) => {
                self.push_raw(Goal::Call { term: args[1].clone(), frame, site });
                self.push_raw(Goal::Call { term: args[0].clone(), frame, site });
                return Ok(true);
            }
            (";", 2) => {
                let alt = push(Goal::Call { term: args[1].clone(), frame, site }, self.goals.clone());
                self.choices.push(Choice { trail_len: self.store.trail.len(), alt: Alt::Goals(alt) });
                self.push_raw(Goal::Call { term: args[0].clone(), frame, site });
                return Ok(true);
            }
            ("call", n) if n >= 1 => {
                let mut g = self.deref(&args[0]);
                if n > 1 {
                    let (gn, mut gargs) = match g.functor() {
                        Some((gn, _)) => (gn.to_string(), g.args().to_vec()),
                        None => return Err(SolveError::Instantiation(t.clone())),
                    };
                    gargs.extend(args[1..].iter().cloned());
                    g = Term::compound(gn, gargs);
                }
                let inner = Frame { cut: self.choices.len(), ..frame };
                self.push_raw(Goal::Call { term: g, frame: inner, site });
                return Ok(true);
            }
            ("not", 1) | ("\\+", 1) => {
                let g = self.resolve(&args[0]);
                if !g.is_ground() {
                    return Err(SolveError::FlounderingNaf(g));
                }
                let h = self.choices.len();
                self.choices.push(Choice { trail_len: self.store.trail.len(), alt: Alt::Goals(self.goals.clone()) });
                let inner = Frame { cut: h + 1, depth: frame.depth + 1, ..frame };
                self.goals = push(Goal::Call { term: g, frame: inner, site }, push(Goal::CutTo(h), push(Goal::Fail, None)));
                return Ok(true);
            }
            ("first", 1) | ("once", 1) => {
                let h = self.choices.len();
                self.push_raw(Goal::CutTo(h));
                self.push_raw(Goal::Call { term: args[0].clone(), frame: Frame { cut: h, ..frame }, site });
                return Ok(true);
            }
            ("transaction", 1) => {
                let h = self.choices.len();
                self.push_raw(Goal::Call { term: Term::atom("$check_integrity"), frame, site });
                self.push_raw(Goal::Call { term: args[0].clone(), frame: Frame { cut: h, txn: h, ..frame }, site });
                return Ok(true);
            }
            ("rollback", 0) => {
                self.cut_to(frame.txn);
                return Ok(false);
            }
            ("findall", 3) => {
                let found = self.find_all(&args[0], vec![args[1].clone()], None)?;
                return Ok(self.unify(&args[2], &Term::list(found)));
            }
            _ => {}
        }
        if let Some(f) = builtins::lookup(&name, arity) {
            return f(self, &args);
        }
        if let Some(f) = self.rt.user_builtin(&name, arity) {
            return f(self, &args);
        }
        let configured = self.rt.stubs.is_configured(&name);
        let prelude = crate::ec::prelude_clauses(&name, arity);
        let kb_clauses = self.kb.clauses_for(&name, arity);
        if configured || (StubTable::is_default_stub(&name) && kb_clauses.is_empty() && prelude.is_none()) {
            let resolved: Vec<Term> = args.iter().map(|a| self.resolve(a)).collect();
            return match self.rt.stubs.invoke(&name, resolved) {
                StubOutcome::Succeed => Ok(true),
                StubOutcome::Fail => Ok(false),
                StubOutcome::Raise(e) => self.raise(e),
            };
        }
        let clauses: Arc<[ClauseRef]> = match prelude {
            None => kb_clauses,
            Some(p) if kb_clauses.is_empty() => p,
            Some(p) => p.iter().chain(kb_clauses.iter()).cloned().collect(),
        };
        if clauses.is_empty() {
            log::trace!("no clauses for {name}/{arity}");
            return Ok(false);
        }
        let cont = self.goals.take();
        self.try_clauses(t, clauses, 0, frame, cont)
    }
}

impl Iterator for Solver<'_> {
    type Item = Result<Solution, SolveError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_solution()
    }
}

/// Lazily enumerate the solutions of `query`.
pub fn solve<'a>(kb: &'a mut KnowledgeBase, rt: &'a Runtime, query: &Query, cfg: SolverConfig) -> Solver<'a> {
    Solver::new(kb, rt, query, cfg)
}

/// Collect every solution; stops at the first error.
pub fn solve_all(
    kb: &mut KnowledgeBase,
    rt: &Runtime,
    query: &Query,
    cfg: SolverConfig,
) -> Result<Vec<Solution>, SolveError> {
    Solver::new(kb, rt, query, cfg).collect()
}

#[cfg(test)]
mod tests;
