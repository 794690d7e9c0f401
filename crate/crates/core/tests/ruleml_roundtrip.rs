mod common;

use rand::rngs::StdRng;
use rand::SeedableRng;
use reactor_core::ruleml::{export, import, validate, Item};

const CBE: &str = include_str!("fixtures/cbe_message.xml");
const IDL: &str = include_str!("fixtures/idl_add.xml");

fn check(items: &[Item]) -> Result<(), String> {
    let xml = export(items).map_err(|e| e.to_string())?;
    let unknown = validate(&xml).map_err(|e| e.to_string())?;
    if !unknown.is_empty() {
        return Err(format!("unknown elements {unknown:?}"));
    }
    let back = import(&xml).map_err(|e| e.to_string())?;
    if back.len() != items.len() {
        return Err(format!("{} items came back as {}", items.len(), back.len()));
    }
    for (a, b) in items.iter().zip(&back) {
        if !a.equivalent(b) {
            return Err(format!("{} became {}", a.to_term(), b.to_term()));
        }
    }
    Ok(())
}

#[test]
fn five_hundred_generated_items() {
    let mut rng = StdRng::seed_from_u64(7);
    for i in 0..500 {
        let it = common::ruleml_gen::item(&mut rng);
        if let Err(e) = check(std::slice::from_ref(&it)) {
            panic!("item {i}: {e}\n{it:?}");
        }
    }
}

#[test]
fn generated_batches() {
    let mut rng = StdRng::seed_from_u64(8);
    for _ in 0..20 {
        let items: Vec<Item> = (0..25).map(|_| common::ruleml_gen::item(&mut rng)).collect();
        check(&items).unwrap();
    }
}

#[test]
fn fixture_documents() {
    for doc in [CBE, IDL] {
        let items = import(doc).unwrap();
        assert_eq!(items.len(), 1);
        check(&items).unwrap();
    }
}
