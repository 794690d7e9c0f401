//! An engine bundles one knowledge base with its runtime and drives the ECA
//! daemon and the message dispatcher over it.

use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::JoinHandle;
use std::time::Duration;

use crate::eca::{self, EcaOutcome};
use crate::kb::{AddPolicy, KbError, KnowledgeBase};
use crate::messaging::{self, DispatchReport, Message};
use crate::parser::{parse_program, parse_query, Query, SyntaxError};
use crate::runtime::Runtime;
use crate::solver::{solve, Solution, SolveError, SolverConfig};
use crate::term::Term;

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DaemonMode {
    Sequential,
    Parallel,
}

#[derive(Clone, Debug)]
pub struct DaemonConfig {
    pub tick_millis: u64,
    pub parallelism: usize,
    pub mode: DaemonMode,
}

impl Default for DaemonConfig {
    fn default() -> Self {
        DaemonConfig {
            tick_millis: 100,
            parallelism: std::thread::available_parallelism().map_or(1, |n| n.get()),
            mode: DaemonMode::Sequential,
        }
    }
}

pub type Observer = Arc<dyn Fn(&EcaOutcome) + Send + Sync>;

/// A background loop; `stop` ends it and waits for the thread.
pub struct LoopHandle {
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl LoopHandle {
    pub fn stop(mut self) {
        self.halt();
    }

    fn halt(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for LoopHandle {
    fn drop(&mut self) {
        self.halt();
    }
}

#[derive(Clone)]
pub struct Engine {
    kb: Arc<Mutex<KnowledgeBase>>,
    rt: Arc<Runtime>,
}

impl Engine {
    pub fn new(rt: Runtime) -> Self {
        Engine { kb: Arc::new(Mutex::new(KnowledgeBase::new())), rt: Arc::new(rt) }
    }

    pub fn kb(&self) -> MutexGuard<'_, KnowledgeBase> {
        self.kb.lock().expect("knowledge base poisoned")
    }

    pub fn runtime(&self) -> &Arc<Runtime> {
        &self.rt
    }

    /// Load program text as module `oid` (appending when it exists), then run
    /// its directives once each, in order.
    pub fn load_text(&self, oid: Term, text: &str) -> Result<(), EngineError> {
        let src = parse_program(text, oid.clone())?;
        let mut kb = self.kb();
        kb.add_module(oid, src.clauses, AddPolicy::Append)?;
        for d in src.directives {
            let q = Query::from_goals(vec![d.clone()]);
            let mut s = solve(&mut kb, &self.rt, &q, SolverConfig { commit_on_yield: true, ..SolverConfig::default() });
            match s.next_solution() {
                Some(Ok(_)) => {}
                Some(Err(e)) => return Err(e.into()),
                None => log::warn!("directive {d} failed"),
            }
        }
        kb.commit();
        Ok(())
    }

    /// Load a file; its path is the module oid.
    pub fn load_file(&self, path: &Path) -> Result<(), EngineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| EngineError::Io { path: path.display().to_string(), source })?;
        self.load_text(Term::atom(path.display().to_string()), &text)
    }

    /// Up to `limit` solutions of a query given as text.
    pub fn query(&self, text: &str, limit: Option<usize>) -> Result<(Query, Vec<Solution>), EngineError> {
        let q = parse_query(text)?;
        let mut kb = self.kb();
        let mut s = solve(&mut kb, &self.rt, &q, SolverConfig { commit_on_yield: true, ..SolverConfig::default() });
        let mut out = Vec::new();
        while limit.is_none_or(|n| out.len() < n) {
            match s.next_solution() {
                Some(Ok(sol)) => out.push(sol),
                Some(Err(e)) => return Err(e.into()),
                None => break,
            }
        }
        drop(s);
        kb.commit();
        Ok((q, out))
    }

    /// One daemon tick, synchronously.
    pub fn step(&self, cfg: &DaemonConfig) -> Vec<EcaOutcome> {
        let mut kb = self.kb();
        match cfg.mode {
            DaemonMode::Sequential => eca::step(&mut kb, &self.rt),
            DaemonMode::Parallel => eca::step_parallel(&mut kb, &self.rt, cfg.parallelism),
        }
    }

    pub fn dispatch(&self, msg: &Message) -> DispatchReport {
        messaging::dispatch(&mut self.kb(), &self.rt, msg)
    }

    /// Dispatch every queued inbound message, including ones queued by the
    /// reactions themselves. Returns the number dispatched.
    pub fn pump(&self) -> usize {
        let mut n = 0;
        while let Some(msg) = self.rt.bus.try_recv() {
            self.dispatch(&msg);
            n += 1;
        }
        n
    }

    /// Run the daemon: one tick every `tick_millis`, outcomes to `observer`.
    pub fn start_daemon(&self, cfg: DaemonConfig, observer: Observer) -> LoopHandle {
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let engine = self.clone();
        let handle = std::thread::Builder::new()
            .name("eca-daemon".into())
            .spawn(move || {
                let tick = Duration::from_millis(cfg.tick_millis.max(1));
                while !flag.load(Ordering::SeqCst) {
                    let started = std::time::Instant::now();
                    for o in engine.step(&cfg) {
                        observer(&o);
                    }
                    let elapsed = started.elapsed();
                    if elapsed < tick {
                        sleep_unless(&flag, tick - elapsed);
                    }
                }
            })
            .expect("spawn daemon thread");
        LoopHandle { stop, handle: Some(handle) }
    }

    /// Run the dispatcher: a single thread taking inbound messages in
    /// arrival order.
    pub fn start_dispatcher(&self) -> LoopHandle {
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let engine = self.clone();
        let handle = std::thread::Builder::new()
            .name("dispatcher".into())
            .spawn(move || {
                while !flag.load(Ordering::SeqCst) {
                    if let Some(msg) = engine.rt.bus.recv_timeout(Duration::from_millis(20)) {
                        engine.dispatch(&msg);
                    }
                }
            })
            .expect("spawn dispatcher thread");
        LoopHandle { stop, handle: Some(handle) }
    }
}

fn sleep_unless(flag: &AtomicBool, total: Duration) {
    let slice = Duration::from_millis(10);
    let deadline = std::time::Instant::now() + total;
    while !flag.load(Ordering::SeqCst) {
        let now = std::time::Instant::now();
        if now >= deadline {
            return;
        }
        std::thread::sleep(slice.min(deadline - now));
    }
}
