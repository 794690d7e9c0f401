//! Process-level services shared by solvers: the clock, the stub table for
//! host-language calls, in-memory SQL tables, output capture, periodic timer
//! state, the message bus and user builtins.

use std::collections::HashMap;
use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use crate::messaging::Bus;
use crate::solver::{SolveError, Solver};
use crate::term::{Term, TimePoint};

pub trait Clock: Send + Sync {
    fn now(&self) -> TimePoint;
}

#[derive(Debug, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> TimePoint {
        TimePoint::from_millis(chrono::Utc::now().timestamp_millis())
    }
}

/// A clock advanced by hand, for tests and simulations.
#[derive(Debug, Default)]
pub struct ManualClock(AtomicI64);

impl ManualClock {
    pub fn new(start: TimePoint) -> Self {
        ManualClock(AtomicI64::new(start.millis()))
    }

    pub fn set(&self, t: TimePoint) {
        self.0.store(t.millis(), Ordering::SeqCst);
    }

    pub fn advance(&self, ms: i64) {
        self.0.fetch_add(ms, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now(&self) -> TimePoint {
        TimePoint::from_millis(self.0.load(Ordering::SeqCst))
    }
}

impl<C: Clock + ?Sized> Clock for Arc<C> {
    fn now(&self) -> TimePoint {
        (**self).now()
    }
}

/// Outcome of one stubbed call.
#[derive(Clone, Debug, PartialEq)]
pub enum StubOutcome {
    Succeed,
    Fail,
    /// Raise an exception named by the term, e.g. `'java.sql.SQLException'`.
    Raise(Term),
}

/// Behaviour of a stubbed host call. A script plays its outcomes in order
/// and repeats the last one.
#[derive(Clone, Debug, PartialEq)]
pub enum StubBehavior {
    Fixed(StubOutcome),
    Script(Vec<StubOutcome>),
}

impl StubBehavior {
    pub fn succeed() -> Self {
        StubBehavior::Fixed(StubOutcome::Succeed)
    }

    pub fn fail() -> Self {
        StubBehavior::Fixed(StubOutcome::Fail)
    }

    pub fn raise(exception: &str) -> Self {
        StubBehavior::Fixed(StubOutcome::Raise(Term::atom(exception)))
    }

    /// Parse `succeed`, `fail`, `raise:Name` or a comma-separated script.
    pub fn parse(spec: &str) -> Option<Self> {
        let outcomes: Option<Vec<StubOutcome>> = spec
            .split(',')
            .map(|s| {
                let s = s.trim();
                match s {
                    "succeed" | "ok" | "true" => Some(StubOutcome::Succeed),
                    "fail" | "false" => Some(StubOutcome::Fail),
                    _ => s.strip_prefix("raise:").map(|e| StubOutcome::Raise(Term::atom(e.trim()))),
                }
            })
            .collect();
        let mut outcomes = outcomes?;
        match outcomes.len() {
            0 => None,
            1 => Some(StubBehavior::Fixed(outcomes.remove(0))),
            _ => Some(StubBehavior::Script(outcomes)),
        }
    }
}

/// A recorded stub call with its arguments as they were at call time.
#[derive(Clone, Debug, PartialEq)]
pub struct StubCall {
    pub name: String,
    pub args: Vec<Term>,
}

#[derive(Default)]
struct StubState {
    behaviors: HashMap<String, StubBehavior>,
    counters: HashMap<String, usize>,
    calls: Vec<StubCall>,
}

/// Names that are stubs even without a dot in them.
const DEFAULT_STUBS: &[&str] = &["sendMessage", "fopen", "copy"];

/// Host-call stubs. Unconfigured dotted names record the call and succeed.
#[derive(Default)]
pub struct StubTable {
    state: Mutex<StubState>,
}

impl StubTable {
    pub fn set(&self, name: &str, behavior: StubBehavior) {
        let mut st = self.state.lock().expect("stub table poisoned");
        st.behaviors.insert(name.to_string(), behavior);
        st.counters.remove(name);
    }

    pub fn is_configured(&self, name: &str) -> bool {
        self.state.lock().expect("stub table poisoned").behaviors.contains_key(name)
    }

    pub fn is_default_stub(name: &str) -> bool {
        name.contains('.') || DEFAULT_STUBS.contains(&name)
    }

    /// Record a call and return its outcome.
    pub fn invoke(&self, name: &str, args: Vec<Term>) -> StubOutcome {
        let mut st = self.state.lock().expect("stub table poisoned");
        st.calls.push(StubCall { name: name.to_string(), args });
        let n = {
            let c = st.counters.entry(name.to_string()).or_insert(0);
            *c += 1;
            *c - 1
        };
        match st.behaviors.get(name) {
            None => StubOutcome::Succeed,
            Some(StubBehavior::Fixed(o)) => o.clone(),
            Some(StubBehavior::Script(v)) => v.get(n).or(v.last()).cloned().unwrap_or(StubOutcome::Succeed),
        }
    }

    pub fn calls(&self) -> Vec<StubCall> {
        self.state.lock().expect("stub table poisoned").calls.clone()
    }

    pub fn calls_to(&self, name: &str) -> Vec<StubCall> {
        self.calls().into_iter().filter(|c| c.name == name).collect()
    }

    pub fn clear_calls(&self) {
        self.state.lock().expect("stub table poisoned").calls.clear();
    }
}

/// A named in-memory table.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Term>>,
}

/// Databases of tables used by `dbopen/2` and `sql_select/4`.
#[derive(Default)]
pub struct TableRegistry {
    dbs: RwLock<HashMap<String, HashMap<String, Table>>>,
}

impl TableRegistry {
    pub fn define(&self, db: &str, table: &str, columns: Vec<String>) {
        let mut dbs = self.dbs.write().expect("table registry poisoned");
        dbs.entry(db.to_string())
            .or_default()
            .insert(table.to_string(), Table { columns, rows: Vec::new() });
    }

    pub fn insert_row(&self, db: &str, table: &str, row: Vec<Term>) -> bool {
        let mut dbs = self.dbs.write().expect("table registry poisoned");
        match dbs.get_mut(db).and_then(|d| d.get_mut(table)) {
            Some(t) if t.columns.len() == row.len() => {
                t.rows.push(row);
                true
            }
            _ => false,
        }
    }

    pub fn has_db(&self, db: &str) -> bool {
        self.dbs.read().expect("table registry poisoned").contains_key(db)
    }

    pub fn table(&self, db: &str, table: &str) -> Option<Table> {
        self.dbs.read().expect("table registry poisoned").get(db)?.get(table).cloned()
    }
}

/// Collects `println` output; optionally echoes to stdout.
#[derive(Default)]
pub struct OutputSink {
    lines: Mutex<Vec<String>>,
    echo: std::sync::atomic::AtomicBool,
}

impl OutputSink {
    pub fn set_echo(&self, on: bool) {
        self.echo.store(on, Ordering::Relaxed);
    }

    pub fn write_line(&self, line: String) {
        if self.echo.load(Ordering::Relaxed) {
            println!("{line}");
        }
        self.lines.lock().expect("output poisoned").push(line);
    }

    pub fn lines(&self) -> Vec<String> {
        self.lines.lock().expect("output poisoned").clone()
    }

    pub fn take(&self) -> Vec<String> {
        std::mem::take(&mut *self.lines.lock().expect("output poisoned"))
    }
}

pub type BuiltinFn = Arc<dyn Fn(&mut Solver<'_>, &[Term]) -> Result<bool, SolveError> + Send + Sync>;

/// Shared services for every solver of one engine.
pub struct Runtime {
    pub clock: Arc<dyn Clock>,
    pub stubs: StubTable,
    pub tables: TableRegistry,
    pub output: OutputSink,
    pub bus: Bus,
    timers: Mutex<HashMap<Term, TimePoint>>,
    builtins: RwLock<HashMap<(String, usize), BuiltinFn>>,
}

impl Runtime {
    pub fn new(agent: &str) -> Self {
        Runtime::with_clock(agent, Arc::new(SystemClock))
    }

    pub fn with_clock(agent: &str, clock: Arc<dyn Clock>) -> Self {
        Runtime {
            clock,
            stubs: StubTable::default(),
            tables: TableRegistry::default(),
            output: OutputSink::default(),
            bus: Bus::new(agent),
            timers: Mutex::new(HashMap::new()),
            builtins: RwLock::new(HashMap::new()),
        }
    }

    pub fn now(&self) -> TimePoint {
        self.clock.now()
    }

    /// Register a user builtin. It takes precedence over clauses but not
    /// over the standard builtins.
    pub fn register_builtin(&self, name: &str, arity: usize, f: BuiltinFn) {
        self.builtins.write().expect("builtins poisoned").insert((name.to_string(), arity), f);
    }

    pub(crate) fn user_builtin(&self, name: &str, arity: usize) -> Option<BuiltinFn> {
        let map = self.builtins.read().expect("builtins poisoned");
        if map.is_empty() {
            return None;
        }
        map.get(&(name.to_string(), arity)).cloned()
    }

    /// Timestamp of the last success at a periodic-timer call site.
    pub(crate) fn timer_last(&self, key: &Term) -> Option<TimePoint> {
        self.timers.lock().expect("timers poisoned").get(key).copied()
    }

    pub(crate) fn timer_set(&self, key: Term, t: TimePoint) {
        self.timers.lock().expect("timers poisoned").insert(key, t);
    }

    pub fn reset_timers(&self) {
        self.timers.lock().expect("timers poisoned").clear();
    }
}

impl Default for Runtime {
    fn default() -> Self {
        Runtime::new("self")
    }
}
