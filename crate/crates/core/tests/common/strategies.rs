//! proptest strategies for terms.

use proptest::prelude::*;
use reactor_core::term::{Term, TimePoint};

pub fn atom_name() -> impl Strategy<Value = String> {
    prop_oneof![
        4 => "[a-z][a-zA-Z0-9_]{0,6}",
        1 => "[A-Z_ ][a-z .'\\\\-]{0,5}",
        1 => Just("[]".to_string()),
        1 => prop::sample::select(vec!["is", "not", "mod", "neg", "+", "-", "=<", ";", ",", "!", "|", "e", "true"])
            .prop_map(str::to_string),
    ]
}

pub fn ground_leaf() -> impl Strategy<Value = Term> {
    prop_oneof![
        atom_name().prop_map(Term::atom),
        "[ -~]{0,8}".prop_map(Term::string),
        any::<i64>().prop_map(Term::Int),
        (-1_000_000i64..1_000_000).prop_map(|n| Term::Float(n as f64 / 8.0)),
        (0i64..4_102_444_800).prop_map(|s| Term::Time(TimePoint::from_millis(s * 1000))),
        Just(Term::Nil),
    ]
}

fn grow(leaf: BoxedStrategy<Term>) -> BoxedStrategy<Term> {
    leaf.prop_recursive(4, 32, 4, |inner| {
        prop_oneof![
            ("[a-z][a-zA-Z0-9_]{0,5}", prop::collection::vec(inner.clone(), 1..4))
                .prop_map(|(f, args)| Term::compound(f, args)),
            (atom_name(), prop::collection::vec(inner.clone(), 1..3)).prop_map(|(f, args)| Term::compound(f, args)),
            prop::collection::vec(inner.clone(), 0..4).prop_map(Term::list),
        ]
    })
    .boxed()
}

pub fn ground_term() -> BoxedStrategy<Term> {
    grow(ground_leaf().boxed())
}

/// Terms over a small variable pool, so unification has something to do.
pub fn open_term() -> BoxedStrategy<Term> {
    let leaf = prop_oneof![
        2 => prop::sample::select(vec!["a", "b", "c"]).prop_map(Term::atom),
        1 => (0i64..3).prop_map(Term::Int),
        3 => prop::sample::select(vec!["X", "Y", "Z", "W"]).prop_map(|v| Term::var(v, 0)),
    ];
    leaf.boxed()
        .prop_recursive(3, 16, 3, |inner| {
            prop_oneof![
                (prop::sample::select(vec!["f", "g"]), prop::collection::vec(inner.clone(), 1..3))
                    .prop_map(|(f, args)| Term::compound(f, args)),
                prop::collection::vec(inner, 0..3).prop_map(Term::list),
            ]
        })
        .boxed()
}
