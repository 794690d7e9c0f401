//! The ordered, modular knowledge base and its transition log.
//!
//! Every change is recorded as a [`TransitionRecord`] carrying a snapshot of
//! the clauses involved, so each record can be inverted exactly. Rolling back
//! pops and inverts records; committing seals the log up to its current length.

mod import;
mod transaction;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use indexmap::IndexMap;

use crate::parser::{format_clause, format_term, Clause, SyntaxError};
use crate::term::{Sym, Term};

pub use import::{is_locator, resolve_import};
pub use transaction::{run_transaction, TransactionOutcome, Update};

static NEXT_SERIAL: AtomicU64 = AtomicU64::new(1);

/// A process-unique clause serial.
pub(crate) fn next_serial() -> u64 {
    NEXT_SERIAL.fetch_add(1, Ordering::Relaxed)
}

pub type ClauseRef = Arc<Clause>;

#[derive(Debug, thiserror::Error)]
pub enum KbError {
    #[error("module {0} already exists")]
    DuplicateOid(Term),
    #[error("no module named {0}")]
    UnknownOid(Term),
    #[error("marker refers to a sealed or discarded state")]
    StaleMarker,
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("cannot locate {0}")]
    NotFound(String),
    #[error("fetching {locator} failed: {reason}")]
    Fetch { locator: String, reason: String },
    #[error("integrity constraint violated: {0}")]
    IntegrityViolation(String),
    #[error("solver error: {0}")]
    Solve(String),
}

/// A named collection of clauses with a stable identifier.
#[derive(Clone, Debug, PartialEq)]
pub struct Module {
    pub oid: Term,
    pub clauses: Vec<ClauseRef>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Polarity {
    Add,
    Remove,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Change {
    /// Clauses appended to `oid`; `created` when the module did not exist
    /// before and was inserted at `position`.
    Add { clauses: Vec<ClauseRef>, created: bool, position: usize },
    /// Clauses removed with their former indices, ascending. When
    /// `module_removed` the whole module (at `position`) went away.
    Remove { removed: Vec<(usize, ClauseRef)>, module_removed: bool, position: usize },
}

/// One logged update; the clause snapshot makes it invertible.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionRecord {
    pub seq: u64,
    pub oid: Term,
    pub change: Change,
}

impl TransitionRecord {
    pub fn polarity(&self) -> Polarity {
        match self.change {
            Change::Add { .. } => Polarity::Add,
            Change::Remove { .. } => Polarity::Remove,
        }
    }

    pub fn clauses(&self) -> Vec<ClauseRef> {
        match &self.change {
            Change::Add { clauses, .. } => clauses.clone(),
            Change::Remove { removed, .. } => removed.iter().map(|(_, c)| c.clone()).collect(),
        }
    }
}

/// A position in the transition log that can be rolled back to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Marker {
    len: usize,
    last_seq: u64,
}

/// How `add_module` treats an oid that is already live.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AddPolicy {
    Reject,
    Replace,
    Append,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IcKind {
    MustHold,
    MustFail,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegrityConstraint {
    pub kind: IcKind,
    pub goal: Term,
}

impl IntegrityConstraint {
    pub fn must_hold(goal: Term) -> Self {
        IntegrityConstraint { kind: IcKind::MustHold, goal }
    }

    pub fn must_fail(goal: Term) -> Self {
        IntegrityConstraint { kind: IcKind::MustFail, goal }
    }
}

/// Module oids given as strings address the same module as the atom.
pub fn normalize_oid(oid: &Term) -> Term {
    match oid {
        Term::Str(s) => Term::Atom(s.clone()),
        other => other.clone(),
    }
}

#[derive(Clone, Debug, Default)]
pub struct KnowledgeBase {
    modules: IndexMap<Term, Module>,
    integrity: Vec<IntegrityConstraint>,
    log: Vec<TransitionRecord>,
    sealed: usize,
    next_seq: u64,
    auto_counter: u64,
    index: HashMap<(Sym, usize), Arc<[ClauseRef]>>,
}

impl PartialEq for KnowledgeBase {
    /// Compares module maps only.
    fn eq(&self, other: &Self) -> bool {
        self.modules.len() == other.modules.len()
            && self.modules.iter().zip(other.modules.iter()).all(|((k1, m1), (k2, m2))| {
                k1 == k2
                    && m1.clauses.len() == m2.clauses.len()
                    && m1.clauses.iter().zip(&m2.clauses).all(|(a, b)| **a == **b)
            })
    }
}

impl KnowledgeBase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn modules(&self) -> impl Iterator<Item = &Module> {
        self.modules.values()
    }

    pub fn module(&self, oid: &Term) -> Option<&Module> {
        self.modules.get(&normalize_oid(oid))
    }

    pub fn contains(&self, oid: &Term) -> bool {
        self.modules.contains_key(&normalize_oid(oid))
    }

    pub fn module_count(&self) -> usize {
        self.modules.len()
    }

    pub fn clause_count(&self) -> usize {
        self.modules.values().map(|m| m.clauses.len()).sum()
    }

    pub fn transition_log(&self) -> &[TransitionRecord] {
        &self.log
    }

    /// Records after `marker`, in order.
    pub fn records_since(&self, marker: Marker) -> &[TransitionRecord] {
        &self.log[marker.len.min(self.log.len())..]
    }

    pub fn integrity_constraints(&self) -> &[IntegrityConstraint] {
        &self.integrity
    }

    pub fn add_integrity_constraint(&mut self, ic: IntegrityConstraint) {
        self.integrity.push(ic);
    }

    /// A fresh oid `auto(n)` for anonymous additions.
    pub fn next_auto_oid(&mut self) -> Term {
        loop {
            self.auto_counter += 1;
            let oid = Term::compound("auto", vec![Term::Int(self.auto_counter as i64)]);
            if !self.modules.contains_key(&oid) {
                return oid;
            }
        }
    }

    /// All clauses whose head has the given name and arity, in module order.
    pub fn clauses_for(&mut self, name: &str, arity: usize) -> Arc<[ClauseRef]> {
        let key: (Sym, usize) = (name.into(), arity);
        if let Some(hit) = self.index.get(&key) {
            return hit.clone();
        }
        let found: Arc<[ClauseRef]> = self
            .modules
            .values()
            .flat_map(|m| m.clauses.iter())
            .filter(|c| c.key() == (name, arity))
            .cloned()
            .collect();
        self.index.insert(key, found.clone());
        found
    }

    /// Non-caching lookup for shared references.
    pub fn clauses_matching(&self, name: &str, arity: usize) -> Vec<ClauseRef> {
        self.modules
            .values()
            .flat_map(|m| m.clauses.iter())
            .filter(|c| c.key() == (name, arity))
            .cloned()
            .collect()
    }

    fn touch(&mut self) {
        self.index.clear();
    }

    fn push_record(&mut self, oid: Term, change: Change) {
        self.next_seq += 1;
        self.log.push(TransitionRecord { seq: self.next_seq, oid, change });
        self.touch();
    }

    fn stamp(clauses: Vec<Clause>) -> Vec<ClauseRef> {
        clauses
            .into_iter()
            .map(|c| Arc::new(c.with_serial(NEXT_SERIAL.fetch_add(1, Ordering::Relaxed))))
            .collect()
    }

    /// Add a module. Returns the marker taken before the change.
    pub fn add_module(
        &mut self,
        oid: Term,
        clauses: Vec<Clause>,
        policy: AddPolicy,
    ) -> Result<Marker, KbError> {
        let oid = normalize_oid(&oid);
        let before = self.checkpoint();
        // A replaced module keeps its place in the module order.
        let mut slot = self.modules.len();
        if let Some(i) = self.modules.get_index_of(&oid) {
            match policy {
                AddPolicy::Reject => return Err(KbError::DuplicateOid(oid)),
                AddPolicy::Replace => {
                    self.remove_module(&oid)?;
                    slot = i;
                }
                AddPolicy::Append => {}
            }
        }
        let stamped = Self::stamp(clauses);
        let created = !self.modules.contains_key(&oid);
        let position = if created {
            self.modules.shift_insert(slot, oid.clone(), Module { oid: oid.clone(), clauses: Vec::new() });
            slot
        } else {
            self.modules.get_index_of(&oid).unwrap_or(0)
        };
        if let Some(m) = self.modules.get_mut(&oid) {
            m.clauses.extend(stamped.iter().cloned());
        }
        self.push_record(oid, Change::Add { clauses: stamped, created, position });
        Ok(before)
    }

    pub fn remove_module(&mut self, oid: &Term) -> Result<Marker, KbError> {
        let oid = normalize_oid(oid);
        let before = self.checkpoint();
        let position = self.modules.get_index_of(&oid).ok_or_else(|| KbError::UnknownOid(oid.clone()))?;
        let module = self.modules.shift_remove(&oid).expect("checked above");
        let removed = module.clauses.into_iter().enumerate().collect();
        self.push_record(oid, Change::Remove { removed, module_removed: true, position });
        Ok(before)
    }

    /// Remove individual clauses of a module by index.
    pub fn remove_clauses(&mut self, oid: &Term, indices: &[usize]) -> Result<Marker, KbError> {
        let oid = normalize_oid(oid);
        let before = self.checkpoint();
        let position = self.modules.get_index_of(&oid).ok_or_else(|| KbError::UnknownOid(oid.clone()))?;
        let mut idx: Vec<usize> = indices.to_vec();
        idx.sort_unstable();
        idx.dedup();
        let module = self.modules.get_mut(&oid).expect("checked above");
        idx.retain(|i| *i < module.clauses.len());
        if idx.is_empty() {
            return Ok(before);
        }
        let removed: Vec<(usize, ClauseRef)> = idx.iter().map(|&i| (i, module.clauses[i].clone())).collect();
        for &i in idx.iter().rev() {
            module.clauses.remove(i);
        }
        self.push_record(oid, Change::Remove { removed, module_removed: false, position });
        Ok(before)
    }

    /// Remove the clauses for which `pred` holds, module by module.
    pub fn remove_where(&mut self, mut pred: impl FnMut(&Term, &Clause) -> bool) -> Marker {
        let before = self.checkpoint();
        let targets: Vec<(Term, Vec<usize>)> = self
            .modules
            .values()
            .map(|m| {
                let idx = m
                    .clauses
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| pred(&m.oid, c))
                    .map(|(i, _)| i)
                    .collect::<Vec<_>>();
                (m.oid.clone(), idx)
            })
            .filter(|(_, idx)| !idx.is_empty())
            .collect();
        for (oid, idx) in targets {
            let _ = self.remove_clauses(&oid, &idx);
        }
        before
    }

    pub fn checkpoint(&self) -> Marker {
        Marker { len: self.log.len(), last_seq: self.log.last().map_or(0, |r| r.seq) }
    }

    fn marker_valid(&self, m: Marker) -> bool {
        m.len >= self.sealed
            && m.len <= self.log.len()
            && (m.len == 0 || self.log[m.len - 1].seq == m.last_seq)
    }

    /// Undo every transition after `marker` in reverse order.
    pub fn rollback_to(&mut self, marker: Marker) -> Result<(), KbError> {
        if !self.marker_valid(marker) {
            return Err(KbError::StaleMarker);
        }
        while self.log.len() > marker.len {
            let rec = self.log.pop().expect("length checked");
            self.invert(&rec);
        }
        self.touch();
        Ok(())
    }

    /// Seal the log: earlier markers can no longer be rolled back to.
    pub fn commit(&mut self) {
        self.sealed = self.log.len();
    }

    pub fn sealed_len(&self) -> usize {
        self.sealed
    }

    fn invert(&mut self, rec: &TransitionRecord) {
        match &rec.change {
            Change::Add { clauses, created, .. } => {
                if *created {
                    self.modules.shift_remove(&rec.oid);
                } else if let Some(m) = self.modules.get_mut(&rec.oid) {
                    let keep = m.clauses.len().saturating_sub(clauses.len());
                    m.clauses.truncate(keep);
                }
            }
            Change::Remove { removed, module_removed, position } => {
                if *module_removed {
                    let module = Module {
                        oid: rec.oid.clone(),
                        clauses: removed.iter().map(|(_, c)| c.clone()).collect(),
                    };
                    let pos = (*position).min(self.modules.len());
                    self.modules.shift_insert(pos, rec.oid.clone(), module);
                } else if let Some(m) = self.modules.get_mut(&rec.oid) {
                    for (i, c) in removed {
                        let at = (*i).min(m.clauses.len());
                        m.clauses.insert(at, c.clone());
                    }
                }
            }
        }
    }

    fn apply_forward(&mut self, rec: &TransitionRecord) {
        match &rec.change {
            Change::Add { clauses, created, position } => {
                if *created || !self.modules.contains_key(&rec.oid) {
                    let pos = (*position).min(self.modules.len());
                    let m = Module { oid: rec.oid.clone(), clauses: Vec::new() };
                    self.modules.shift_insert(pos, rec.oid.clone(), m);
                }
                if let Some(m) = self.modules.get_mut(&rec.oid) {
                    m.clauses.extend(clauses.iter().cloned());
                }
            }
            Change::Remove { removed, module_removed, .. } => {
                if *module_removed {
                    self.modules.shift_remove(&rec.oid);
                } else if let Some(m) = self.modules.get_mut(&rec.oid) {
                    for (i, _) in removed.iter().rev() {
                        if *i < m.clauses.len() {
                            m.clauses.remove(*i);
                        }
                    }
                }
            }
        }
    }

    /// Rebuild a knowledge base by applying `records` to the empty one.
    pub fn replay(records: &[TransitionRecord]) -> KnowledgeBase {
        let mut kb = KnowledgeBase::new();
        for rec in records {
            kb.apply_forward(rec);
            kb.log.push(rec.clone());
            kb.next_seq = kb.next_seq.max(rec.seq);
        }
        kb.touch();
        kb
    }

    /// Re-apply updates made against a snapshot of this knowledge base.
    ///
    /// Adds append to the named module, removals delete equal clauses (or the
    /// module). Later calls win over earlier ones.
    pub fn apply_foreign(&mut self, records: &[TransitionRecord]) {
        for rec in records {
            match &rec.change {
                Change::Add { clauses, .. } => {
                    let cs = clauses.iter().map(|c| (**c).clone()).collect();
                    let _ = self.add_module(rec.oid.clone(), cs, AddPolicy::Append);
                }
                Change::Remove { module_removed: true, .. } => {
                    let _ = self.remove_module(&rec.oid);
                }
                Change::Remove { removed, .. } => {
                    if let Some(m) = self.modules.get(&rec.oid) {
                        let mut idx = Vec::new();
                        for (_, c) in removed {
                            if let Some(i) = m
                                .clauses
                                .iter()
                                .enumerate()
                                .position(|(i, mc)| **mc == **c && !idx.contains(&i))
                            {
                                idx.push(i);
                            }
                        }
                        let oid = rec.oid.clone();
                        let _ = self.remove_clauses(&oid, &idx);
                    }
                }
            }
        }
    }

    /// Module map as text, one clause per line under a `% module` header.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for m in self.modules.values() {
            let _ = writeln!(out, "% module {}", format_term(&m.oid));
            for c in &m.clauses {
                let _ = writeln!(out, "{}", format_clause(c));
            }
        }
        out
    }
}
