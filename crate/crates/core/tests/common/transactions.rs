//! Randomized transactions for the atomicity checks.

use rand::rngs::StdRng;
use rand::Rng;
use reactor_core::kb::{run_transaction, AddPolicy, IntegrityConstraint, KnowledgeBase, TransactionOutcome, Update};
use reactor_core::parser::{parse_program, parse_term};
use reactor_core::term::Term;
use reactor_core::Runtime;

#[derive(Default, Debug)]
pub struct Tally {
    pub committed: usize,
    pub rolled_back: usize,
    pub failures: Vec<String>,
}

fn oid(rng: &mut StdRng) -> Term {
    Term::atom(format!("m{}", rng.gen_range(0..5)))
}

fn random_update(rng: &mut StdRng) -> Update {
    match rng.gen_range(0..10) {
        0..=4 => {
            // One add in ten inserts a fact the constraint forbids.
            let fact = if rng.gen_bool(0.1) { "bad(1).".to_string() } else { format!("f({}).", rng.gen_range(0..50)) };
            Update::Add { oid: Some(oid(rng)), text: fact, args: vec![] }
        }
        5 => Update::Add { oid: None, text: "g(_0, _1).".into(), args: vec![Term::int(rng.gen_range(0..9)), Term::atom("x")] },
        6 => Update::Add { oid: Some(oid(rng)), text: "broken(".into(), args: vec![] },
        _ => Update::Remove(oid(rng)),
    }
}

/// Runs `n` random transactions against one evolving knowledge base. Every
/// rollback must restore the pre-state exactly; every commit must be
/// reproducible by replaying the transition log from empty.
pub fn run(rng: &mut StdRng, n: usize) -> Tally {
    let rt = Runtime::default();
    let mut kb = KnowledgeBase::new();
    let seed = parse_program("f(0).", Term::atom("m0")).unwrap();
    kb.add_module(Term::atom("m0"), seed.clauses, AddPolicy::Append).unwrap();
    kb.add_integrity_constraint(IntegrityConstraint::must_fail(parse_term("bad(_)").unwrap()));
    let mut tally = Tally::default();
    for i in 0..n {
        let updates: Vec<Update> = (0..rng.gen_range(1..=6)).map(|_| random_update(rng)).collect();
        let extra = if rng.gen_bool(0.1) {
            vec![IntegrityConstraint::must_hold(parse_term("f(0)").unwrap())]
        } else {
            vec![]
        };
        let pre = kb.render();
        let pre_log = kb.transition_log().len();
        match run_transaction(&mut kb, &rt, &updates, &extra) {
            TransactionOutcome::RolledBack(_) => {
                tally.rolled_back += 1;
                if kb.render() != pre || kb.transition_log().len() != pre_log {
                    tally.failures.push(format!("transaction {i} rolled back to a different state"));
                }
            }
            TransactionOutcome::Committed => {
                tally.committed += 1;
                let replayed = KnowledgeBase::replay(kb.transition_log());
                if replayed.render() != kb.render() {
                    tally.failures.push(format!("transaction {i} does not replay"));
                }
            }
        }
    }
    tally
}
