use proptest::prelude::*;
use reactor_core::kb::{AddPolicy, KnowledgeBase};
use reactor_core::parser::{format_term, parse_program, parse_query};
use reactor_core::solver::{solve_all, SolverConfig};
use reactor_core::term::Term;
use reactor_core::Runtime;

#[derive(Clone, Debug)]
enum Op {
    Append(u8, u8),
    Replace(u8, u8),
    Remove(u8),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        3 => (0u8..4, 0u8..100).prop_map(|(m, v)| Op::Append(m, v)),
        1 => (0u8..4, 0u8..100).prop_map(|(m, v)| Op::Replace(m, v)),
        1 => (0u8..4).prop_map(Op::Remove),
    ]
}

fn apply(kb: &mut KnowledgeBase, op: &Op) {
    let oid = |m: u8| Term::atom(format!("m{m}"));
    let clauses = |v: u8| parse_program(&format!("f({v})."), Term::atom("x")).unwrap().clauses;
    let _ = match op {
        Op::Append(m, v) => kb.add_module(oid(*m), clauses(*v), AddPolicy::Append),
        Op::Replace(m, v) => kb.add_module(oid(*m), clauses(*v), AddPolicy::Replace),
        Op::Remove(m) => kb.remove_module(&oid(*m)),
    };
}

/// Expected `f/1` answers: modules in first-insertion order, clauses in
/// insertion order within each module.
fn model(ops: &[Op]) -> Vec<String> {
    let mut mods: Vec<(u8, Vec<u8>)> = Vec::new();
    for op in ops {
        match op {
            Op::Append(m, v) => match mods.iter_mut().find(|(k, _)| k == m) {
                Some((_, vs)) => vs.push(*v),
                None => mods.push((*m, vec![*v])),
            },
            Op::Replace(m, v) => match mods.iter_mut().find(|(k, _)| k == m) {
                Some((_, vs)) => *vs = vec![*v],
                None => mods.push((*m, vec![*v])),
            },
            Op::Remove(m) => mods.retain(|(k, _)| k != m),
        }
    }
    mods.into_iter().flat_map(|(_, vs)| vs).map(|v| v.to_string()).collect()
}

proptest! {
    #[test]
    fn single_transition_inverts(pre in prop::collection::vec(op(), 0..10), last in op()) {
        let mut kb = KnowledgeBase::new();
        pre.iter().for_each(|o| apply(&mut kb, o));
        let before = kb.render();
        let mark = kb.checkpoint();
        apply(&mut kb, &last);
        kb.rollback_to(mark).unwrap();
        prop_assert_eq!(kb.render(), before);
    }

    #[test]
    fn replay_reproduces_live_state(ops in prop::collection::vec(op(), 0..20), seal_at in 0usize..20) {
        let mut kb = KnowledgeBase::new();
        for (i, o) in ops.iter().enumerate() {
            if i == seal_at {
                kb.commit();
            }
            apply(&mut kb, o);
        }
        prop_assert_eq!(KnowledgeBase::replay(kb.transition_log()).render(), kb.render());
    }

    #[test]
    fn clause_order_is_module_then_insertion(ops in prop::collection::vec(op(), 0..20)) {
        let mut kb = KnowledgeBase::new();
        ops.iter().for_each(|o| apply(&mut kb, o));
        let q = parse_query("f(X)?").unwrap();
        let got: Vec<String> = solve_all(&mut kb, &Runtime::default(), &q, SolverConfig::default())
            .unwrap()
            .iter()
            .map(|s| format_term(s.get("X").unwrap()))
            .collect();
        prop_assert_eq!(got, model(&ops));
    }
}
