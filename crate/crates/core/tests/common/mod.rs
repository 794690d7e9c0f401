//! Scenario drivers shared by the integration suites.
#![allow(dead_code)]

pub mod ec_oracle;
pub mod fixpoint;
pub mod transactions;
pub mod strategies;
pub mod ruleml_gen;

use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use reactor_core::messaging::{transport, Message};
use reactor_core::term::Term;
use reactor_core::{DaemonConfig, Engine, Runtime};

pub const WORKFLOW: &str = include_str!("../fixtures/workflow.rr");
pub const PARTITIONS: &str = include_str!("../fixtures/partitions.rr");
pub const MANAGER: &str = include_str!("../fixtures/manager.rr");
pub const AGENT: &str = include_str!("../fixtures/agent.rr");
pub const FLIGHT: &str = include_str!("../fixtures/flight.rr");
pub const EC_DEMO: &str = include_str!("../fixtures/ec_demo.rr");

pub fn engine(agent: &str, text: &str) -> Engine {
    let e = Engine::new(Runtime::new(agent));
    e.load_text(Term::atom("main"), text).expect("fixture loads");
    e
}

/// Runs the fork/join program and delivers the replies in `order`
/// (each of "a", "b", "c"). Returns the printed lines.
pub fn workflow(order: &[&str]) -> Vec<String> {
    let e = engine("wf", WORKFLOW);
    let (_, sols) = e.query("process_join()?", None).expect("query runs");
    assert!(sols.is_empty(), "the receive suspends the query");
    for p in order {
        let payload = Term::compound(*p, vec![Term::int(1)]);
        e.dispatch(&Message::new(Term::atom("xid_1"), "self", "wf", "wf", "reply", payload));
        e.pump();
    }
    e.runtime().output.take()
}

/// Feeds the partition program the inform payloads in `order` on one
/// conversation. Returns the printed lines and the reactions left over.
pub fn partitions(order: &[&str]) -> (Vec<String>, usize) {
    let e = engine("p", PARTITIONS);
    for p in order {
        e.dispatch(&Message::new(Term::atom("c1"), "self", "peer", "p", "inform", Term::atom(*p)));
    }
    (e.runtime().output.take(), e.runtime().bus.reaction_count())
}

/// Result of a two-node heartbeat run.
pub struct Failover {
    pub lines: Vec<String>,
    pub failover_after: Option<Duration>,
    pub loaded: bool,
    pub loading_added: bool,
    pub loopback_sent: bool,
}

/// An agent heartbeats a manager over TCP, then stops. Waits up to `limit`
/// for the manager to fail the controller over.
pub fn heartbeat(limit: Duration) -> Failover {
    let manager = engine("manager", MANAGER);
    let listener = transport::listen("127.0.0.1:0", manager.runtime().bus.inbox()).expect("listen");
    let dispatcher = manager.start_dispatcher();
    let tick = DaemonConfig { tick_millis: 50, ..DaemonConfig::default() };
    let daemon = manager.start_daemon(tick.clone(), Arc::new(|_| {}));

    let agent = engine("agent", AGENT);
    agent.runtime().bus.add_peer("manager", listener.addr);
    let beats = agent.start_daemon(DaemonConfig { tick_millis: 100, ..tick }, Arc::new(|_| {}));
    std::thread::sleep(Duration::from_millis(600));
    beats.stop();
    let stopped = Instant::now();

    let lines = Arc::new(Mutex::new(Vec::new()));
    let mut failover_after = None;
    while stopped.elapsed() < limit {
        let out = manager.runtime().output.take();
        let hit = out.iter().any(|l| l.starts_with("failover"));
        lines.lock().unwrap().extend(out);
        if hit {
            failover_after = Some(stopped.elapsed());
            break;
        }
        std::thread::sleep(Duration::from_millis(20));
    }
    daemon.stop();
    dispatcher.stop();
    listener.stop();

    let (_, sols) = manager.query("sysTime(T), holdsAt(status(backup,loaded),T)?", Some(1)).expect("query runs");
    let loading_added = manager.kb().contains(&Term::compound("key", vec![Term::atom("backup")]));
    let loopback_sent = manager
        .runtime()
        .bus
        .sent()
        .iter()
        .any(|m| m.protocol == "loopback" && m.performative == "initiate");
    let lines = lines.lock().unwrap().clone();
    Failover { lines, failover_after, loaded: !sols.is_empty(), loading_added, loopback_sent }
}

/// Starts `n` request/reply conversations before any reply is dispatched,
/// then drains them through the single dispatch loop. Returns the elapsed
/// time and the printed lines.
pub fn conversations(n: usize) -> (Duration, Vec<String>, usize) {
    let e = engine(
        "srv",
        "start(N) :- sendMsg(XID,self,srv,query,ask(N)), rcvMsg(XID,self,S,reply,answer(N,V)), println([N,\" \",V,\" \",XID]).\n\
         rcvMsg(XID,self,S,query,ask(N)) :- V is N * 2, sendMsg(XID,self,S,reply,answer(N,V)).",
    );
    let started = Instant::now();
    for i in 0..n {
        e.query(&format!("start({i})?"), Some(1)).expect("start");
    }
    let peak = e.runtime().bus.reaction_count();
    e.pump();
    (started.elapsed(), e.runtime().output.take(), peak)
}

/// Result of one flight-booking tick.
pub struct Booking {
    pub status: reactor_core::eca::EcaStatus,
    pub flight: Option<String>,
    pub attempts: usize,
    pub notices: Vec<String>,
}

/// One daemon tick of the flight program over a table of `rows` flights to
/// paris, with the booking stub failing its first call.
pub fn flight(rows: &[&str]) -> Booking {
    use reactor_core::runtime::{StubBehavior, StubOutcome};
    let rt = Runtime::new("travel");
    rt.tables.define("flights", "flights", vec!["flight".into(), "dest".into()]);
    for f in rows {
        rt.tables.insert_row("flights", "flights", vec![Term::atom(*f), Term::atom("paris")]);
    }
    rt.stubs.set("flight.BookingSystem.book", StubBehavior::Script(vec![StubOutcome::Fail, StubOutcome::Succeed]));
    let e = Engine::new(rt);
    e.load_text(Term::atom("flights"), FLIGHT).expect("fixture loads");
    let out = e.step(&DaemonConfig::default());
    let rt = e.runtime();
    Booking {
        status: out[0].status,
        flight: out[0].bindings.get_by_name("Flight").map(|t| t.to_string()),
        attempts: rt.stubs.calls_to("flight.BookingSystem.book").len(),
        notices: rt.stubs.calls_to("sendMessage").iter().map(|c| c.args[1].to_string()).collect(),
    }
}

/// Live threads of this process.
pub fn thread_count() -> Option<usize> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    status.lines().find_map(|l| l.strip_prefix("Threads:")).and_then(|n| n.trim().parse().ok())
}

/// `n` request/reply conversations started while one dispatcher thread is
/// already serving replies. Returns elapsed time, printed lines and the
/// largest number of threads added while they ran.
pub fn conversations_live(n: usize, limit: Duration) -> (Duration, Vec<String>, Option<usize>) {
    let e = engine(
        "srv",
        "start(N) :- sendMsg(XID,self,srv,query,ask(N)), rcvMsg(XID,self,S,reply,answer(N,V)), println([N,\" \",V,\" \",XID]).\n\
         rcvMsg(XID,self,S,query,ask(N)) :- V is N * 2, sendMsg(XID,self,S,reply,answer(N,V)).",
    );
    let base = thread_count();
    let mut peak = 0;
    let started = Instant::now();
    let dispatcher = e.start_dispatcher();
    for i in 0..n {
        e.query(&format!("start({i})?"), Some(1)).expect("start");
        if i % 100 == 0 {
            peak = peak.max(thread_count().unwrap_or(0));
        }
    }
    let mut lines = Vec::new();
    while lines.len() < n && started.elapsed() < limit {
        lines.extend(e.runtime().output.take());
        peak = peak.max(thread_count().unwrap_or(0));
        std::thread::sleep(Duration::from_millis(5));
    }
    let elapsed = started.elapsed();
    dispatcher.stop();
    (elapsed, lines, base.map(|b| peak.saturating_sub(b)))
}

/// Checks the printed lines of `conversations*`: one per conversation, each
/// with the doubled value and a distinct conversation id.
pub fn conversation_lines_ok(lines: &[String], n: usize) -> bool {
    let mut ids = std::collections::HashSet::new();
    let mut ns = std::collections::HashSet::new();
    lines.len() == n
        && lines.iter().all(|l| {
            let parts: Vec<&str> = l.split(' ').collect();
            let (Some(a), Some(b)) = (parts.first().and_then(|x| x.parse::<i64>().ok()), parts.get(1).and_then(|x| x.parse::<i64>().ok())) else {
                return false;
            };
            parts.len() == 3 && b == a * 2 && ns.insert(a) && ids.insert(parts[2].to_string())
        })
}
