//! All-or-nothing batches of updates checked against integrity constraints.

use super::{normalize_oid, resolve_import, AddPolicy, IcKind, IntegrityConstraint, KbError, KnowledgeBase};
use crate::parser::{parse_program, substitute_placeholders, Clause, Query};
use crate::runtime::Runtime;
use crate::solver::{solve, SolverConfig};
use crate::term::Term;

/// One update of a transaction.
#[derive(Clone, Debug, PartialEq)]
pub enum Update {
    /// Parse `text` (with `_N` placeholders filled from `args`) and append it
    /// to `oid`, or to a fresh `auto(n)` module.
    Add { oid: Option<Term>, text: String, args: Vec<Term> },
    AddClauses { oid: Term, clauses: Vec<Clause> },
    Remove(Term),
    Import(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum TransactionOutcome {
    Committed,
    RolledBack(String),
}

fn holds(kb: &mut KnowledgeBase, rt: &Runtime, goal: &Term) -> Result<bool, KbError> {
    let q = Query::from_goals(vec![goal.clone()]);
    let mut s = solve(kb, rt, &q, SolverConfig::default());
    match s.next_solution() {
        Some(Ok(_)) => Ok(true),
        Some(Err(e)) => Err(KbError::Solve(e.to_string())),
        None => Ok(false),
    }
}

fn apply(kb: &mut KnowledgeBase, update: &Update) -> Result<(), KbError> {
    match update {
        Update::Add { oid, text, args } => {
            let text = if args.is_empty() { text.clone() } else { substitute_placeholders(text, args) };
            let oid = match oid {
                Some(o) => normalize_oid(o),
                None => kb.next_auto_oid(),
            };
            let src = parse_program(&text, oid.clone())?;
            kb.add_module(oid, src.clauses, AddPolicy::Append)?;
        }
        Update::AddClauses { oid, clauses } => {
            kb.add_module(oid.clone(), clauses.clone(), AddPolicy::Append)?;
        }
        Update::Remove(oid) => {
            kb.remove_module(oid)?;
        }
        Update::Import(locator) => {
            let text = resolve_import(locator)?;
            let oid = Term::atom(locator.trim());
            let src = parse_program(&text, oid.clone())?;
            kb.add_module(oid, src.clauses, AddPolicy::Append)?;
        }
    }
    Ok(())
}

/// Apply `updates` in order, then check the knowledge base's own constraints
/// and `extra`. Any failure restores the state from before the first update.
pub fn run_transaction(
    kb: &mut KnowledgeBase,
    rt: &Runtime,
    updates: &[Update],
    extra: &[IntegrityConstraint],
) -> TransactionOutcome {
    let mark = kb.checkpoint();
    let restore = |kb: &mut KnowledgeBase, reason: String| {
        kb.rollback_to(mark).expect("transaction marker is live");
        TransactionOutcome::RolledBack(reason)
    };
    for u in updates {
        if let Err(e) = apply(kb, u) {
            return restore(kb, e.to_string());
        }
    }
    let ics: Vec<IntegrityConstraint> = kb.integrity_constraints().iter().chain(extra).cloned().collect();
    for ic in ics {
        match holds(kb, rt, &ic.goal) {
            Ok(h) if h == (ic.kind == IcKind::MustHold) => {}
            Ok(_) => return restore(kb, KbError::IntegrityViolation(ic.goal.to_string()).to_string()),
            Err(e) => return restore(kb, e.to_string()),
        }
    }
    TransactionOutcome::Committed
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn violation_restores_state() {
        let rt = Runtime::default();
        let mut kb = KnowledgeBase::new();
        kb.add_integrity_constraint(IntegrityConstraint::must_fail(crate::parser::parse_term("bad").unwrap()));
        let before = kb.render();
        let out = run_transaction(
            &mut kb,
            &rt,
            &[
                Update::Add { oid: Some(Term::atom("m")), text: "ok.".into(), args: vec![] },
                Update::Add { oid: None, text: "bad.".into(), args: vec![] },
            ],
            &[],
        );
        assert!(matches!(out, TransactionOutcome::RolledBack(_)));
        assert_eq!(kb.render(), before);
        let out = run_transaction(
            &mut kb,
            &rt,
            &[Update::Add { oid: Some(Term::atom("m")), text: "p(_0).".into(), args: vec![Term::int(3)] }],
            &[],
        );
        assert_eq!(out, TransactionOutcome::Committed);
        assert!(kb.render().contains("p(3)."));
    }

    #[test]
    fn failed_update_rolls_back_earlier_ones() {
        let rt = Runtime::default();
        let mut kb = KnowledgeBase::new();
        let out = run_transaction(
            &mut kb,
            &rt,
            &[Update::Add { oid: Some(Term::atom("m")), text: "a.".into(), args: vec![] }, Update::Remove(Term::atom("zz"))],
            &[],
        );
        assert!(matches!(out, TransactionOutcome::RolledBack(_)));
        assert_eq!(kb.module_count(), 0);
    }
}
