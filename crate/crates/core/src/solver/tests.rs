use super::*;
use crate::parser::{format_term, parse_program, parse_query};
use crate::runtime::StubBehavior;

fn kb_of(text: &str) -> KnowledgeBase {
    let mut kb = KnowledgeBase::new();
    let src = parse_program(text, Term::atom("test")).unwrap();
    kb.add_module(Term::atom("test"), src.clauses, crate::kb::AddPolicy::Append).unwrap();
    kb.commit();
    kb
}

fn answers(kb: &mut KnowledgeBase, rt: &Runtime, q: &str, var: &str) -> Vec<String> {
    let q = parse_query(q).unwrap();
    solve_all(kb, rt, &q, SolverConfig::default())
        .unwrap()
        .iter()
        .map(|s| format_term(s.get(var).unwrap()))
        .collect()
}

fn succeeds(kb: &mut KnowledgeBase, rt: &Runtime, q: &str) -> bool {
    let q = parse_query(q).unwrap();
    solve(kb, rt, &q, SolverConfig::default()).next().transpose().unwrap().is_some()
}

#[test]
fn rule_resolves_through_fact() {
    let rt = Runtime::default();
    let mut kb = kb_of("f(1). r(X) :- f(X).");
    assert_eq!(answers(&mut kb, &rt, "r(Y)?", "Y"), vec!["1"]);
}

#[test]
fn solutions_follow_clause_order() {
    let rt = Runtime::default();
    let mut kb = kb_of("p(3). p(1). p(2). q(X) :- p(X), X > 1.");
    assert_eq!(answers(&mut kb, &rt, "q(X)?", "X"), vec!["3", "2"]);
}

#[test]
fn cut_prunes_clause_alternatives() {
    let rt = Runtime::default();
    let mut kb = kb_of("p(1). p(2). p(3). first_p(X) :- p(X), !. m(a) :- !. m(b).");
    assert_eq!(answers(&mut kb, &rt, "first_p(X)?", "X"), vec!["1"]);
    assert_eq!(answers(&mut kb, &rt, "m(X)?", "X"), vec!["a"]);
}

#[test]
fn cut_inside_callee_stays_local() {
    let rt = Runtime::default();
    let mut kb = kb_of("p(1). p(2). one(X) :- p(X), !. both(X, Y) :- p(X), one(Y).");
    assert_eq!(answers(&mut kb, &rt, "both(X, Y)?", "X"), vec!["1", "2"]);
}

#[test]
fn naf_on_missing_predicate_succeeds() {
    let rt = Runtime::default();
    let mut kb = kb_of("available(service1) :- not(ping(service1)).");
    assert!(succeeds(&mut kb, &rt, "available(service1)?"));
}

#[test]
fn naf_on_nonground_goal_flounders() {
    let rt = Runtime::default();
    let mut kb = kb_of("p(1).");
    let q = parse_query("not(p(X))?").unwrap();
    match solve(&mut kb, &rt, &q, SolverConfig::default()).next() {
        Some(Err(SolveError::FlounderingNaf(_))) => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn explicit_negation_uses_neg_heads() {
    let rt = Runtime::default();
    let mut kb = kb_of("neg(flies(tweety)). bird(tweety). bird(polly).");
    assert!(succeeds(&mut kb, &rt, "neg(flies(tweety))?"));
    assert!(!succeeds(&mut kb, &rt, "neg(flies(polly))?"));
    assert!(succeeds(&mut kb, &rt, "not(flies(polly))?"));
}

#[test]
fn occurs_check_is_on_by_default() {
    let rt = Runtime::default();
    let mut kb = KnowledgeBase::new();
    assert!(!succeeds(&mut kb, &rt, "X = f(X)?"));
}

#[test]
fn depth_limit_reports_runaway_recursion() {
    let rt = Runtime::default();
    let mut kb = kb_of("loop(X) :- loop(X).");
    let q = parse_query("loop(1)?").unwrap();
    let cfg = SolverConfig { max_depth: 50, ..SolverConfig::default() };
    match solve(&mut kb, &rt, &q, cfg).next() {
        Some(Err(SolveError::DepthExceeded(50))) => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn first_keeps_only_the_first_answer() {
    let rt = Runtime::default();
    let mut kb = kb_of("s(a). s(b). s(c).");
    assert_eq!(answers(&mut kb, &rt, "first(s(X))?", "X"), vec!["a"]);
}

#[test]
fn findall_collects_in_order() {
    let rt = Runtime::default();
    let mut kb = kb_of("s(a). s(b). s(c).");
    assert_eq!(answers(&mut kb, &rt, "findall(X, s(X), L)?", "L"), vec!["[a,b,c]"]);
}

#[test]
fn arithmetic_and_comparison() {
    let rt = Runtime::default();
    let mut kb = KnowledgeBase::new();
    assert_eq!(answers(&mut kb, &rt, "X is 2 + 3 * 4?", "X"), vec!["14"]);
    assert!(succeeds(&mut kb, &rt, "3 >= 3, 2 < 3, 1 =< 1?"));
    assert!(!succeeds(&mut kb, &rt, "3 < 2?"));
}

#[test]
fn derive_builds_goal_from_list() {
    let rt = Runtime::default();
    let mut kb = kb_of("consult(x, 42).");
    assert_eq!(answers(&mut kb, &rt, "derive([consult, x, V])?", "V"), vec!["42"]);
}

#[test]
fn add_with_placeholders_then_query() {
    let rt = Runtime::default();
    let mut kb = KnowledgeBase::new();
    let q = parse_query("add(key(s1), \"happens(loading(_0),_1).\", [s1, 7]), happens(loading(S), T)?").unwrap();
    let sols = solve_all(&mut kb, &rt, &q, SolverConfig { commit_on_yield: true, ..SolverConfig::default() }).unwrap();
    assert_eq!(sols.len(), 1);
    assert_eq!(format_term(sols[0].get("S").unwrap()), "s1");
    assert_eq!(sols[0].side_effect_log.len(), 1);
    assert!(kb.contains(&Term::compound("key", vec![Term::atom("s1")])));
}

#[test]
fn failing_path_rolls_back_its_updates() {
    let rt = Runtime::default();
    let mut kb = kb_of("p :- add(u1, \"a(1).\"), add(u2, \"a(2).\"), add(u3, \"a(3).\"), fail.");
    let before = kb.render();
    assert!(!succeeds(&mut kb, &rt, "p?"));
    assert_eq!(kb.render(), before);
}

#[test]
fn succeeding_path_keeps_only_its_transitions() {
    let rt = Runtime::default();
    let mut kb = kb_of(
        "p :- add(bad, \"b(1).\"), fail.\n\
         p :- add(good, \"g(1).\").",
    );
    let q = parse_query("p?").unwrap();
    let sol = solve(&mut kb, &rt, &q, SolverConfig { commit_on_yield: true, ..SolverConfig::default() })
        .next()
        .unwrap()
        .unwrap();
    assert_eq!(sol.side_effect_log.len(), 1);
    assert!(kb.contains(&Term::atom("good")));
    assert!(!kb.contains(&Term::atom("bad")));
}

#[test]
fn transaction_checks_integrity_facts() {
    let rt = Runtime::default();
    let mut kb = kb_of("integrity(must_fail, g(2)).");
    let before = kb.render();
    assert!(!succeeds(&mut kb, &rt, "transaction((add(a, \"f(1).\"), add(b, \"g(2).\")))?"));
    assert_eq!(kb.render(), before);
    assert!(succeeds(&mut kb, &rt, "transaction(add(a, \"f(1).\"))?"));
}

#[test]
fn rollback_abandons_enclosing_transaction() {
    let rt = Runtime::default();
    let mut kb = KnowledgeBase::new();
    let before = kb.render();
    assert!(!succeeds(&mut kb, &rt, "transaction((add(a, \"f(1).\"), rollback))?"));
    assert_eq!(kb.render(), before);
}

#[test]
fn sql_select_enumerates_rows() {
    let rt = Runtime::default();
    rt.tables.define("flights", "flights", vec!["flight".into(), "dest".into()]);
    rt.tables.insert_row("flights", "flights", vec![Term::atom("lh1"), Term::atom("paris")]);
    rt.tables.insert_row("flights", "flights", vec![Term::atom("lh2"), Term::atom("rome")]);
    let mut kb = KnowledgeBase::new();
    let got = answers(&mut kb, &rt, "dbopen(flights, D), sql_select(D, flights, [flight, F], [where, dest = rome])?", "F");
    assert_eq!(got, vec!["lh2"]);
    let all = answers(&mut kb, &rt, "dbopen(flights, D), sql_select(D, flights, [flight, F])?", "F");
    assert_eq!(all, vec!["lh1", "lh2"]);
}

#[test]
fn exception_handler_runs_when_stub_raises() {
    let rt = Runtime::default();
    rt.stubs.set("svc.call", StubBehavior::raise("java.io.IOException"));
    let mut kb = KnowledgeBase::new();
    let q = parse_query("on_exception('java.io.IOException', println(recovered)), svc.call(1)?").unwrap();
    let r: Vec<_> = solve(&mut kb, &rt, &q, SolverConfig::default()).collect();
    assert_eq!(rt.output.take(), vec!["recovered".to_string()]);
    assert!(r.iter().all(|r| r.is_ok()));
}

#[test]
fn unhandled_exception_is_an_error() {
    let rt = Runtime::default();
    rt.stubs.set("svc.call", StubBehavior::raise("boom"));
    let mut kb = KnowledgeBase::new();
    let q = parse_query("svc.call(1)?").unwrap();
    assert!(matches!(solve(&mut kb, &rt, &q, SolverConfig::default()).next(), Some(Err(SolveError::Exception(_)))));
}

#[test]
fn interval_fires_once_per_span() {
    let clock = std::sync::Arc::new(crate::runtime::ManualClock::new(crate::term::TimePoint::from_millis(0)));
    let rt = Runtime::with_clock("me", clock.clone());
    let mut kb = kb_of("tick :- sysTime(T), interval(timespan(0,0,0,10), T).");
    assert!(succeeds(&mut kb, &rt, "tick?"));
    clock.advance(5_000);
    assert!(!succeeds(&mut kb, &rt, "tick?"));
    clock.advance(5_000);
    assert!(succeeds(&mut kb, &rt, "tick?"));
}

#[test]
fn first_solution_is_lazy() {
    let rt = Runtime::default();
    let mut kb = kb_of("g(1) :- println(one). g(2) :- println(two).");
    let q = parse_query("g(X)?").unwrap();
    let mut s = solve(&mut kb, &rt, &q, SolverConfig::default());
    assert!(s.next().unwrap().is_ok());
    drop(s);
    assert_eq!(rt.output.take(), vec!["one".to_string()]);
}
