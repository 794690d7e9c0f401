mod common;

use common::ec_oracle::*;
use Ex::Leaf;

#[test]
fn detect_matches_brute_force_exhaustively() {
    let mut mismatches = Vec::new();
    let mut checked = 0;
    let mut nonempty = 0;
    for eis in all_eis(&['a', 'b', 'c'], 4) {
        for e in catalogue() {
            checked += 1;
            let want = sorted(eval(&eis, &e));
            let got = engine_eval(&eis, &e);
            nonempty += usize::from(!got.is_empty());
            if got != want {
                mismatches.push(format!("{} over {eis:?}: got {got:?}, want {want:?}", e.text()));
            }
        }
    }
    assert_eq!(checked, 120 * catalogue().len());
    assert!(nonempty > checked / 4, "only {nonempty} non-empty cases");
    assert!(mismatches.is_empty(), "{} mismatches, first: {}", mismatches.len(), mismatches[0]);
}

#[test]
fn nesting_discriminates_order() {
    let nested = Ex::Seq(vec![Leaf('b'), Ex::Seq(vec![Leaf('a'), Leaf('c')])]);
    let bac = [('b', 1), ('a', 2), ('c', 3)];
    let abc = [('a', 1), ('b', 2), ('c', 3)];
    assert_eq!(engine_eval(&bac, &nested), vec![(1, 3)]);
    assert!(engine_eval(&abc, &nested).is_empty());
    // Terminator-time semantics cannot tell the two apart.
    assert_eq!(eval_snoop(&bac, &nested), vec![3]);
    assert_eq!(eval_snoop(&abc, &nested), vec![3]);
}

#[test]
fn any_two_of_three() {
    let eis = [('a', 1), ('a', 2), ('a', 3)];
    let got = engine_eval(&eis, &Ex::Any(2, Box::new(Leaf('a'))));
    assert_eq!(got, vec![(1, 2), (1, 3), (2, 3)]);
}
