//! Random rules, events, messages and interfaces for interchange round trips.

use rand::rngs::StdRng;
use rand::Rng;
use reactor_core::eca::EcaRule;
use reactor_core::messaging::Message;
use reactor_core::parser::{Clause, Literal};
use reactor_core::ruleml::{ArgMode, Eval, Execution, InterfaceArg, InterfaceDecl, Item, Mode, RuleMeta, XmlMessage};
use reactor_core::term::{Term, TimePoint};

const NAMES: &[&str] = &["a", "b", "flight", "paris", "x1", "status", "loaded", "Upper Case", "it's"];
const VARS: &[&str] = &["X", "Y", "Flight", "T"];

fn pick<'a>(rng: &mut StdRng, xs: &[&'a str]) -> &'a str {
    xs[rng.gen_range(0..xs.len())]
}

pub fn term(rng: &mut StdRng, depth: u32) -> Term {
    let leaf = depth == 0 || rng.gen_bool(0.4);
    if leaf {
        return match rng.gen_range(0..7) {
            0 => Term::atom(pick(rng, NAMES)),
            1 => Term::var(pick(rng, VARS), 0),
            2 => Term::Int(rng.gen_range(-1000..1000)),
            3 => Term::Float(rng.gen_range(-400..400) as f64 / 4.0),
            4 => Term::string(["", "hello world", "a<b>&\"c\"", "line\nbreak", "_0 placeholder"][rng.gen_range(0..5)]),
            5 => Term::Time(TimePoint::from_datetime(2005, 1, 1, 0, 0, rng.gen_range(0..60)).unwrap()),
            _ => Term::Nil,
        };
    }
    match rng.gen_range(0..3) {
        0 => Term::list((0..rng.gen_range(1..4)).map(|_| term(rng, depth - 1))),
        1 => Term::list_with_tail((0..rng.gen_range(1..3)).map(|_| term(rng, depth - 1)), Term::var("Rest", 0)),
        _ => Term::compound(pick(rng, &["f", "g", "request", "book"]), (0..rng.gen_range(1..4)).map(|_| term(rng, depth - 1)).collect()),
    }
}

fn goal(rng: &mut StdRng) -> Term {
    match rng.gen_range(0..6) {
        0 => Term::compound(">", vec![Term::var("X", 0), Term::Int(rng.gen_range(0..9))]),
        1 => Term::compound("is", vec![Term::var("Y", 0), Term::compound("+", vec![Term::var("X", 0), Term::Int(1)])]),
        2 => Term::compound(";", vec![Term::compound("p", vec![term(rng, 1)]), Term::compound("q", vec![term(rng, 1)])]),
        _ => Term::compound(pick(rng, &["p", "q", "find", "notify"]), (0..rng.gen_range(1..3)).map(|_| term(rng, 2)).collect()),
    }
}

fn meta(rng: &mut StdRng, execution: Execution) -> RuleMeta {
    RuleMeta {
        execution,
        eval: [None, Some(Eval::Weak), Some(Eval::Strong)][rng.gen_range(0..3)],
        label: if rng.gen_bool(0.3) { Some(Term::atom(format!("r{}", rng.gen_range(0..9)))) } else { None },
    }
}

fn clause(rng: &mut StdRng) -> Item {
    let head = Term::compound(pick(rng, &["r", "available", "booked"]), (0..rng.gen_range(1..4)).map(|_| term(rng, 2)).collect());
    let body = (0..rng.gen_range(0..4))
        .map(|_| match rng.gen_range(0..6) {
            0 => Literal::Naf(Term::compound("g", vec![term(rng, 1)])),
            1 => Literal::Neg(Term::compound("h", vec![term(rng, 1)])),
            2 => Literal::Cut,
            _ => Literal::Pos(goal(rng)),
        })
        .collect();
    Item::Clause(Clause::new(head, body), meta(rng, Execution::Reasoning))
}

/// An event expression; the outermost node is always an operator.
pub fn event(rng: &mut StdRng, depth: u32) -> Term {
    operand(rng, depth, true)
}

fn operand(rng: &mut StdRng, depth: u32, top: bool) -> Term {
    let leaf = |rng: &mut StdRng| Term::atom(pick(rng, &["a", "b", "c", "request"]));
    if !top && (depth == 0 || rng.gen_bool(0.3)) {
        return leaf(rng);
    }
    let window = |rng: &mut StdRng| Term::list(vec![leaf(rng), leaf(rng)]);
    match rng.gen_range(0..8) {
        n @ 0..=4 => {
            let op = ["sequence", "or", "and", "xor", "concurrent"][n];
            Term::compound(op, (0..rng.gen_range(2..4)).map(|_| operand(rng, depth - 1, false)).collect())
        }
        5 => Term::compound("neg", vec![Term::list(vec![leaf(rng)]), window(rng)]),
        6 => Term::compound("any", vec![Term::Int(rng.gen_range(1..4)), operand(rng, depth - 1, false)]),
        _ => Term::compound("aperiodic", vec![operand(rng, depth - 1, false), window(rng)]),
    }
}

fn eca(rng: &mut StdRng) -> Item {
    let slot = |rng: &mut StdRng, p: f64| if rng.gen_bool(p) { Some(goal(rng)) } else { None };
    let rule = EcaRule {
        time: slot(rng, 0.5),
        event: if rng.gen_bool(0.5) { Some(Term::compound("detect", vec![event(rng, 2), Term::var("T", 0)])) } else { None },
        condition: slot(rng, 0.7),
        action: Some(goal(rng)),
        post: slot(rng, 0.3),
        else_action: slot(rng, 0.4),
        source_oid: Term::atom(pick(rng, &["m", "flights", "manager"])),
    };
    Item::Eca(rule, meta(rng, Execution::Active))
}

fn message(rng: &mut StdRng) -> Item {
    let mut m = Message::new(
        Term::atom(format!("xid_{}", rng.gen_range(1..100))),
        pick(rng, &["self", "loopback", "tcp", "jms"]),
        pick(rng, &["agent", "manager", "p1"]),
        pick(rng, &["agent", "manager", "p2"]),
        pick(rng, &["inform", "query", "reply", "request"]),
        Term::compound("heartbeat", vec![term(rng, 2), term(rng, 1)]),
    );
    if rng.gen_bool(0.3) {
        m.context = (0..rng.gen_range(1..3)).map(|_| term(rng, 1)).collect();
    }
    let mode = if rng.gen_bool(0.5) { Mode::Inbound } else { Mode::Outbound };
    Item::Message(XmlMessage { mode, message: m })
}

fn interface(rng: &mut StdRng) -> Item {
    let n = rng.gen_range(1..4);
    let args = (0..n)
        .map(|i| InterfaceArg {
            name: ["Result", "Arg1", "Arg2"][i].to_string(),
            type_tag: if rng.gen_bool(0.5) { Some("xsd:int".into()) } else { None },
            mode: [ArgMode::In, ArgMode::Out, ArgMode::Any][rng.gen_range(0..3)],
        })
        .collect();
    Item::Interface(InterfaceDecl { functor: pick(rng, &["add", "book", "ping"]).into(), args, description: "Definition of the operation".into() })
}

pub fn item(rng: &mut StdRng) -> Item {
    match rng.gen_range(0..5) {
        0 => clause(rng),
        1 => eca(rng),
        2 => Item::Event(event(rng, 3)),
        3 => message(rng),
        _ => interface(rng),
    }
}
