//! A reaction-rule engine: backward-chaining derivation rules, an
//! event-condition-action daemon, interval-based event calculus, transactional
//! knowledge-base updates, message-driven reactions, and XML interchange.

pub mod term;
pub mod parser;
pub mod kb;
pub mod runtime;
pub mod solver;
pub mod ec;
pub mod messaging;
pub mod eca;
pub mod ruleml;
pub mod engine;
pub mod config;

pub use engine::{DaemonConfig, DaemonMode, Engine};
pub use runtime::Runtime;
