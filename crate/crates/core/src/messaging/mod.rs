//! Conversation-scoped messaging.
//!
//! Outbound messages go through [`Bus::send`]; inbound messages queue on the
//! bus and are matched by [`dispatch`] against suspended inline receives
//! (temporal reaction rules) and then against global `rcvMsg` clauses. A
//! suspended receive holds its captured continuation, not a thread, so any
//! number of conversations share one dispatch loop.

pub mod transport;

use std::collections::HashMap;
use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use crossbeam_channel::{unbounded, Receiver, Sender};

use crate::kb::KnowledgeBase;
use crate::parser::Literal;
use crate::runtime::Runtime;
use crate::solver::{Builtin, ContGoal, SolveError, Solver, SolverConfig};
use crate::term::{unify, Bindings, Term};

#[derive(Debug, thiserror::Error)]
pub enum MessagingError {
    #[error("unknown protocol {0}")]
    UnknownProtocol(String),
    #[error("cannot resolve agent {agent} under protocol {protocol}")]
    UnresolvableAgent { protocol: String, agent: String },
    #[error("unknown partition {0}")]
    UnknownPartition(Term),
    #[error("no join barrier {name} for conversation {xid}")]
    UnknownBarrier { xid: Term, name: Term },
    #[error("duplicate arrival for join slot {0}")]
    DuplicateArrival(Term),
    #[error("transport error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed message: {0}")]
    Malformed(String),
}

/// A conversation-scoped event message.
#[derive(Clone, Debug, PartialEq)]
pub struct Message {
    pub xid: Term,
    pub protocol: String,
    pub sender: String,
    pub receiver: String,
    pub performative: String,
    pub payload: Term,
    pub context: Vec<Term>,
}

impl Message {
    pub fn new(xid: Term, protocol: &str, sender: &str, receiver: &str, performative: &str, payload: Term) -> Self {
        Message {
            xid,
            protocol: protocol.into(),
            sender: sender.into(),
            receiver: receiver.into(),
            performative: performative.into(),
            payload,
            context: Vec::new(),
        }
    }

    /// The inbound view `rcvMsg(XID, Protocol, Sender, Performative, Payload, Context..)`.
    pub fn to_term(&self) -> Term {
        let mut args = vec![
            self.xid.clone(),
            Term::atom(self.protocol.as_str()),
            Term::atom(self.sender.as_str()),
            Term::atom(self.performative.as_str()),
            self.payload.clone(),
        ];
        args.extend(self.context.iter().cloned());
        Term::compound("rcvMsg", args)
    }
}

/// Whether the protocol is delivered in-process.
fn is_local(protocol: &str) -> bool {
    matches!(protocol, "self" | "loopback")
}

fn is_remote(protocol: &str) -> bool {
    matches!(protocol, "tcp" | "jms" | "http" | "soap" | "esb")
}

/// A suspended receive: fires its continuation when a message unifies with
/// `pattern`.
#[derive(Clone, Debug)]
pub struct Reaction {
    pub id: u64,
    pub pattern: Term,
    pub continuation: Vec<ContGoal>,
    pub one_shot: bool,
    pub inbound: Vec<Term>,
    pub outbound: Vec<Term>,
}

#[derive(Debug)]
struct JoinBarrier {
    expected: Vec<Term>,
    arrived: Vec<Option<Term>>,
    fired: bool,
}

#[derive(Default)]
struct BusState {
    reactions: Vec<Reaction>,
    partitions: HashMap<Term, bool>,
    joins: HashMap<(Term, Term), JoinBarrier>,
    peers: HashMap<String, SocketAddr>,
    connections: HashMap<SocketAddr, TcpStream>,
    sent: Vec<Message>,
}

/// The inbound queue plus the reaction, partition and join registries of one
/// engine.
pub struct Bus {
    agent: String,
    tx: Sender<Message>,
    rx: Receiver<Message>,
    state: Mutex<BusState>,
    next_id: AtomicU64,
    alias_warned: AtomicBool,
}

impl Bus {
    pub fn new(agent: &str) -> Self {
        let (tx, rx) = unbounded();
        Bus {
            agent: agent.to_string(),
            tx,
            rx,
            state: Mutex::new(BusState::default()),
            next_id: AtomicU64::new(1),
            alias_warned: AtomicBool::new(false),
        }
    }

    fn state(&self) -> std::sync::MutexGuard<'_, BusState> {
        self.state.lock().expect("bus state poisoned")
    }

    pub fn agent(&self) -> &str {
        &self.agent
    }

    fn next(&self) -> u64 {
        self.next_id.fetch_add(1, Ordering::Relaxed)
    }

    /// A fresh conversation id `xid_<n>`.
    pub fn fresh_xid(&self) -> Term {
        Term::atom(format!("xid_{}", self.next()))
    }

    pub fn add_peer(&self, name: &str, addr: SocketAddr) {
        self.state().peers.insert(name.to_string(), addr);
    }

    fn resolve_peer(&self, agent: &str) -> Option<SocketAddr> {
        if let Some(a) = self.state().peers.get(agent) {
            return Some(*a);
        }
        agent.to_socket_addrs().ok()?.next()
    }

    /// Put a message on this engine's inbound queue.
    pub fn deliver(&self, msg: Message) {
        // The receiver lives as long as the bus, so this cannot fail.
        let _ = self.tx.send(msg);
    }

    /// Route an outbound message by protocol.
    pub fn send(&self, msg: Message) -> Result<(), MessagingError> {
        let protocol = msg.protocol.clone();
        if is_local(&protocol) {
            self.state().sent.push(msg.clone());
            self.deliver(msg);
            return Ok(());
        }
        if !is_remote(&protocol) {
            return Err(MessagingError::UnknownProtocol(protocol));
        }
        if protocol != "tcp" && !self.alias_warned.swap(true, Ordering::Relaxed) {
            log::warn!("protocol {protocol} is carried over tcp");
        }
        if msg.receiver == self.agent {
            self.state().sent.push(msg.clone());
            self.deliver(msg);
            return Ok(());
        }
        let addr = self.resolve_peer(&msg.receiver).ok_or_else(|| MessagingError::UnresolvableAgent {
            protocol: protocol.clone(),
            agent: msg.receiver.clone(),
        })?;
        let body = crate::ruleml::message_to_xml(&msg);
        let mut st = self.state();
        let result = match st.connections.get_mut(&addr) {
            Some(conn) => transport::write_frame(conn, body.as_bytes()),
            None => Err(std::io::Error::new(std::io::ErrorKind::NotConnected, "no connection")),
        };
        if result.is_err() {
            st.connections.remove(&addr);
            let mut conn = TcpStream::connect_timeout(&addr, Duration::from_secs(2))?;
            transport::write_frame(&mut conn, body.as_bytes())?;
            st.connections.insert(addr, conn);
        }
        st.sent.push(msg);
        Ok(())
    }

    /// A sender feeding this bus's inbound queue, for transports.
    pub fn inbox(&self) -> Sender<Message> {
        self.tx.clone()
    }

    pub fn try_recv(&self) -> Option<Message> {
        self.rx.try_recv().ok()
    }

    pub fn recv_timeout(&self, d: Duration) -> Option<Message> {
        self.rx.recv_timeout(d).ok()
    }

    pub fn pending_messages(&self) -> usize {
        self.rx.len()
    }

    /// Messages sent so far, oldest first.
    pub fn sent(&self) -> Vec<Message> {
        self.state().sent.clone()
    }

    pub fn register(&self, mut r: Reaction) -> u64 {
        r.id = self.next();
        let id = r.id;
        self.state().reactions.push(r);
        id
    }

    pub fn reactions(&self) -> Vec<Reaction> {
        self.state().reactions.clone()
    }

    pub fn reaction_count(&self) -> usize {
        self.state().reactions.len()
    }

    /// A fresh, active partition id.
    pub fn new_partition(&self) -> Term {
        let id = Term::compound("pid", vec![Term::Int(self.next() as i64)]);
        self.state().partitions.insert(id.clone(), true);
        id
    }

    pub fn partition_active(&self, id: &Term) -> Option<bool> {
        self.state().partitions.get(id).copied()
    }

    /// Deactivate a partition and drop reactions that depended on it.
    pub fn deactivate(&self, id: &Term) {
        let mut st = self.state();
        if let Some(a) = st.partitions.get_mut(id) {
            *a = false;
        }
        let parts = std::mem::take(&mut st.partitions);
        st.reactions.retain(|r| r.inbound.iter().all(|p| parts.get(p) == Some(&true)));
        st.partitions = parts;
    }

    pub fn init_join(&self, xid: Term, name: Term, expected: Vec<Term>) {
        let arrived = vec![None; expected.len()];
        self.state().joins.insert((xid, name), JoinBarrier { expected, arrived, fired: false });
    }

    /// Record an arrival. Returns the arrived values, in expected order, the
    /// one time the barrier completes.
    pub fn join(&self, xid: &Term, name: &Term, value: &Term) -> Result<Option<Vec<Term>>, MessagingError> {
        let mut st = self.state();
        let barrier = st
            .joins
            .get_mut(&(xid.clone(), name.clone()))
            .ok_or_else(|| MessagingError::UnknownBarrier { xid: xid.clone(), name: name.clone() })?;
        let matches: Vec<usize> = (0..barrier.expected.len())
            .filter(|&i| unify(&barrier.expected[i], value, &Bindings::new()).is_some())
            .collect();
        match matches.iter().find(|&&i| barrier.arrived[i].is_none()) {
            Some(&i) => barrier.arrived[i] = Some(value.clone()),
            None if !matches.is_empty() => return Err(MessagingError::DuplicateArrival(value.clone())),
            None => return Ok(None),
        }
        if barrier.fired || barrier.arrived.iter().any(Option::is_none) {
            return Ok(None);
        }
        barrier.fired = true;
        Ok(Some(barrier.arrived.iter().flatten().cloned().collect()))
    }

    /// Reactions matching `msg`, in registration order. One-shot reactions are
    /// removed, outbound partitions deactivated, and reactions with an
    /// inactive inbound partition dropped.
    fn take_matches(&self, msg: &Message) -> Vec<Reaction> {
        let mut st = self.state();
        let mut fired = Vec::new();
        let mut i = 0;
        while i < st.reactions.len() {
            let live = st.reactions[i].inbound.iter().all(|p| st.partitions.get(p) == Some(&true));
            if !live {
                st.reactions.remove(i);
                continue;
            }
            let pattern = &st.reactions[i].pattern;
            if unify(pattern, &message_view(pattern, msg), &Bindings::new()).is_none() {
                i += 1;
                continue;
            }
            let r = if st.reactions[i].one_shot {
                st.reactions.remove(i)
            } else {
                i += 1;
                st.reactions[i - 1].clone()
            };
            for p in &r.outbound {
                if let Some(a) = st.partitions.get_mut(p) {
                    *a = false;
                }
            }
            fired.push(r);
        }
        fired
    }
}

/// The message term as seen by `pattern`: a list payload pattern `[P|Args]`
/// receives the payload decomposed into functor and arguments.
fn message_view(pattern: &Term, msg: &Message) -> Term {
    let wants_list = matches!(pattern.args().get(4), Some(Term::Cons(_)));
    if wants_list && msg.payload.as_list().is_none() && msg.payload.is_callable() {
        let mut items = vec![Term::atom(msg.payload.name().unwrap_or(""))];
        items.extend(msg.payload.args().iter().cloned());
        let mut m = msg.clone();
        m.payload = Term::list(items);
        return m.to_term();
    }
    msg.to_term()
}

/// Result of dispatching one inbound message.
#[derive(Debug, Default)]
pub struct DispatchReport {
    pub fired: usize,
    pub errors: Vec<SolveError>,
}

fn run_continuation(
    kb: &mut KnowledgeBase,
    rt: &Runtime,
    activation: Term,
    pre: Term,
    cont: &[ContGoal],
    report: &mut DispatchReport,
) {
    let cfg = SolverConfig { activation: Some(activation), ..SolverConfig::default() };
    let mut s = Solver::resume(kb, rt, cfg, vec![pre], cont);
    if let Some(Err(e)) = s.next_solution() {
        log::warn!("reaction failed: {e}");
        report.errors.push(e);
    }
}

/// Match `msg` against suspended receives, then against global `rcvMsg`
/// clauses, running each match's continuation once.
pub fn dispatch(kb: &mut KnowledgeBase, rt: &Runtime, msg: &Message) -> DispatchReport {
    let mut report = DispatchReport::default();
    for r in rt.bus.take_matches(msg) {
        report.fired += 1;
        let pre = Term::compound("=", vec![r.pattern.clone(), message_view(&r.pattern, msg)]);
        let activation = Term::compound("reaction", vec![Term::Int(r.id as i64)]);
        run_continuation(kb, rt, activation, pre, &r.continuation, &mut report);
    }
    let arity = 5 + msg.context.len();
    let clauses = kb.clauses_for("rcvMsg", arity);
    for c in clauses.iter() {
        let (head, body) = c.rename();
        let view = message_view(&head, msg);
        if unify(&head, &view, &Bindings::new()).is_none() {
            continue;
        }
        report.fired += 1;
        let cont: Vec<ContGoal> = body
            .into_iter()
            .map(|l| match l {
                Literal::Cut => ContGoal::Cut,
                other => ContGoal::Call(other.to_goal()),
            })
            .collect();
        let activation = Term::compound("rule", vec![Term::Int(c.serial() as i64)]);
        run_continuation(kb, rt, activation, Term::compound("=", vec![head, view]), &cont, &mut report);
    }
    if report.fired == 0 {
        log::debug!("dropped unmatched message {}", msg.to_term());
    }
    report
}

// ---- builtins ----

pub(crate) fn builtins() -> Vec<(&'static str, usize, Builtin)> {
    vec![
        ("iam", 1, b_iam as Builtin),
        ("partition_id", 1, b_partition_id),
        ("rcvMsgP", 3, b_rcv_msg_p),
        ("init_join", 3, b_init_join),
        ("join", 4, b_join),
    ]
}

pub(crate) fn variadic_builtin(name: &str, arity: usize) -> Option<Builtin> {
    if arity < 5 {
        return None;
    }
    match name {
        "sendMsg" => Some(b_send_msg),
        "rcvMsg" => Some(b_rcv_msg),
        "rcvMult" => Some(b_rcv_mult),
        _ => None,
    }
}

fn name_of(s: &Solver<'_>, t: &Term, what: &str) -> Result<String, SolveError> {
    match s.resolve(t) {
        Term::Atom(a) | Term::Str(a) => Ok(a.to_string()),
        v @ Term::Var(_) => Err(SolveError::Instantiation(v)),
        other => Err(SolveError::BuiltinType { builtin: what.into(), expected: "name".into(), got: other }),
    }
}

fn b_iam(s: &mut Solver<'_>, a: &[Term]) -> Result<bool, SolveError> {
    let me = Term::atom(s.runtime().bus.agent());
    Ok(s.unify(&a[0], &me))
}

/// `sendMsg(XID, Protocol, Agent, Performative, Payload | Context)`.
fn b_send_msg(s: &mut Solver<'_>, a: &[Term]) -> Result<bool, SolveError> {
    let bus = &s.runtime().bus;
    let mut xid = s.resolve(&a[0]);
    if xid.is_var() {
        let fresh = bus.fresh_xid();
        if !s.unify(&a[0], &fresh) {
            return Ok(false);
        }
        xid = fresh;
    }
    let protocol = name_of(s, &a[1], "sendMsg")?;
    let receiver = name_of(s, &a[2], "sendMsg")?;
    let performative = name_of(s, &a[3], "sendMsg")?;
    let payload = s.resolve(&a[4]);
    let mut msg = Message::new(xid, &protocol, bus.agent(), &receiver, &performative, payload);
    msg.context = a[5..].iter().map(|t| s.resolve(t)).collect();
    bus.send(msg)?;
    Ok(true)
}

fn suspend(
    s: &mut Solver<'_>,
    pattern: Term,
    one_shot: bool,
    inbound: Vec<Term>,
    outbound: Vec<Term>,
) -> Result<bool, SolveError> {
    let pattern = s.resolve(&pattern);
    let continuation = s.capture_continuation();
    // Updates made before the receive belong to the conversation and must
    // survive the backtracking that follows the suspension.
    s.kb().commit();
    s.runtime().bus.register(Reaction { id: 0, pattern, continuation, one_shot, inbound, outbound });
    Ok(false)
}

fn b_rcv_msg(s: &mut Solver<'_>, a: &[Term]) -> Result<bool, SolveError> {
    suspend(s, Term::compound("rcvMsg", a.to_vec()), true, Vec::new(), Vec::new())
}

fn b_rcv_mult(s: &mut Solver<'_>, a: &[Term]) -> Result<bool, SolveError> {
    suspend(s, Term::compound("rcvMsg", a.to_vec()), false, Vec::new(), Vec::new())
}

fn partition_list(s: &Solver<'_>, t: &Term) -> Result<Vec<Term>, SolveError> {
    let r = s.resolve(t);
    let ids = r.as_list().ok_or_else(|| SolveError::BuiltinType {
        builtin: "rcvMsgP/3".into(),
        expected: "partition id list".into(),
        got: r.clone(),
    })?;
    for id in &ids {
        if s.runtime().bus.partition_active(id).is_none() {
            return Err(MessagingError::UnknownPartition(id.clone()).into());
        }
    }
    Ok(ids)
}

/// `rcvMsgP(Inbound, Outbound, rcvMsg(...))`.
fn b_rcv_msg_p(s: &mut Solver<'_>, a: &[Term]) -> Result<bool, SolveError> {
    let inbound = partition_list(s, &a[0])?;
    let outbound = partition_list(s, &a[1])?;
    let pattern = s.resolve(&a[2]);
    match pattern.functor() {
        Some(("rcvMsg", n)) | Some(("rcvMult", n)) if n >= 5 => {}
        _ => {
            return Err(SolveError::BuiltinType {
                builtin: "rcvMsgP/3".into(),
                expected: "rcvMsg pattern".into(),
                got: pattern,
            })
        }
    }
    let one_shot = pattern.name() == Some("rcvMsg");
    let pattern = Term::compound("rcvMsg", pattern.args().to_vec());
    suspend(s, pattern, one_shot, inbound, outbound)
}

fn b_partition_id(s: &mut Solver<'_>, a: &[Term]) -> Result<bool, SolveError> {
    let id = s.runtime().bus.new_partition();
    Ok(s.unify(&a[0], &id))
}

/// `init_join(XID, Name, Expected)`; binds a fresh XID when unbound.
fn b_init_join(s: &mut Solver<'_>, a: &[Term]) -> Result<bool, SolveError> {
    let bus = &s.runtime().bus;
    let mut xid = s.resolve(&a[0]);
    if xid.is_var() {
        let fresh = bus.fresh_xid();
        if !s.unify(&a[0], &fresh) {
            return Ok(false);
        }
        xid = fresh;
    }
    let name = s.resolve(&a[1]);
    let expected_t = s.resolve(&a[2]);
    let expected = expected_t.as_list().ok_or_else(|| SolveError::BuiltinType {
        builtin: "init_join/3".into(),
        expected: "pattern list".into(),
        got: expected_t.clone(),
    })?;
    bus.init_join(xid, name, expected);
    Ok(true)
}

/// `join(Me, XID, Name, Value)`: when the barrier completes, calls
/// `Name(Me, XID, Inputs)`.
fn b_join(s: &mut Solver<'_>, a: &[Term]) -> Result<bool, SolveError> {
    let me = s.resolve(&a[0]);
    let xid = s.resolve(&a[1]);
    let name = s.resolve(&a[2]);
    let value = s.resolve(&a[3]);
    if let Some(inputs) = s.runtime().bus.join(&xid, &name, &value)? {
        let pred = name.as_text().unwrap_or("join").to_string();
        s.push_goal(Term::compound(pred, vec![me, xid, Term::list(inputs)]));
    }
    Ok(true)
}
