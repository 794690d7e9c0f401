use proptest::prelude::*;
use reactor_core::eca::{self, EcaStatus};
use reactor_core::kb::{AddPolicy, KnowledgeBase};
use reactor_core::parser::parse_program;
use reactor_core::term::Term;
use reactor_core::Runtime;

fn kb_of(text: &str) -> KnowledgeBase {
    let mut kb = KnowledgeBase::new();
    let src = parse_program(text, Term::atom("m")).unwrap();
    kb.add_module(Term::atom("m"), src.clauses, AddPolicy::Append).unwrap();
    kb.commit();
    kb
}

fn part(name: &str, ok: bool) -> String {
    format!("(add({name}, \"{name}.\"), {})", if ok { "true" } else { "fail" })
}

proptest! {
    #[test]
    fn status_follows_the_declarative_reading(t: bool, e: bool, c: bool, a: bool, p: bool, el: bool) {
        let rule = format!(
            "eca({}, {}, {}, {}, {}, {}).",
            part("pt", t), part("pe", e), part("pc", c), part("pa", a), part("pp", p), part("pel", el)
        );
        let mut kb = kb_of(&rule);
        let before = kb.render();
        let rt = Runtime::default();
        let out = eca::step(&mut kb, &rt);
        let want = if !t {
            EcaStatus::TimeSkip
        } else if !e {
            EcaStatus::EventSkip
        } else if c && a && p {
            EcaStatus::Fired
        } else if el {
            EcaStatus::ElseFired
        } else {
            EcaStatus::Failed
        };
        prop_assert_eq!(out[0].status, want);
        let kept: Vec<String> = out[0].transitions.iter().map(|r| r.oid.to_string()).collect();
        let expect: Vec<&str> = match want {
            EcaStatus::Fired => vec!["pt", "pe", "pc", "pa", "pp"],
            EcaStatus::ElseFired => vec!["pt", "pe", "pel"],
            _ => vec![],
        };
        // Transitions appear in part order: T before E, C before A.
        prop_assert_eq!(kept, expect);
        if matches!(want, EcaStatus::Failed | EcaStatus::TimeSkip | EcaStatus::EventSkip) {
            prop_assert_eq!(kb.render(), before);
        }
    }

    #[test]
    fn collecting_twice_gives_the_same_rules(n in 0usize..6, derived in 0usize..3) {
        let mut text: String = (0..n).map(|i| format!("eca(c({i}), println({i})).\n")).collect();
        for i in 0..derived {
            text.push_str(&format!("w({i}).\n"));
        }
        text.push_str("eca(w(X), println(X)) :- w(X).\n");
        let mut kb = kb_of(&text);
        let rt = Runtime::default();
        let a = eca::collect_eca_rules(&mut kb, &rt).unwrap();
        let b = eca::collect_eca_rules(&mut kb, &rt).unwrap();
        prop_assert_eq!(a.len(), n + derived);
        prop_assert_eq!(a, b);
    }
}
