//! Optional `key = value` configuration: stub behaviours, in-memory SQL
//! tables and the peer registry.
//!
//! ```text
//! # comment
//! stub.flight.BookingSystem.book = fail, succeed
//! db.flights.flights.columns = flight, dest
//! db.flights.flights.row = lh123, paris
//! peer.manager = 127.0.0.1:7001
//! ```

use std::net::{SocketAddr, ToSocketAddrs};

use crate::parser::parse_term;
use crate::runtime::{Runtime, StubBehavior};
use crate::term::Term;

#[derive(Debug, thiserror::Error)]
#[error("config line {line}: {message}")]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    pub stubs: Vec<(String, StubBehavior)>,
    /// `(db, table, columns)`
    pub tables: Vec<(String, String, Vec<String>)>,
    /// `(db, table, row)`
    pub rows: Vec<(String, String, Vec<Term>)>,
    pub peers: Vec<(String, SocketAddr)>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        let mut cfg = Config::default();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| ConfigError { line: no + 1, message };
            let (key, value) = line.split_once('=').ok_or_else(|| err("expected key = value".into()))?;
            let (key, value) = (key.trim(), value.trim());
            if let Some(name) = key.strip_prefix("stub.") {
                let b = StubBehavior::parse(value).ok_or_else(|| err(format!("bad stub behaviour {value}")))?;
                cfg.stubs.push((name.to_string(), b));
            } else if let Some(rest) = key.strip_prefix("db.") {
                let parts: Vec<&str> = rest.rsplitn(3, '.').collect();
                let [what, table, db] = parts[..] else {
                    return Err(err(format!("expected db.<db>.<table>.columns|row, got {key}")));
                };
                match what {
                    "columns" => cfg.tables.push((
                        db.to_string(),
                        table.to_string(),
                        value.split(',').map(|c| c.trim().to_string()).collect(),
                    )),
                    "row" => {
                        let list = parse_term(&format!("[{value}]")).map_err(|e| err(e.to_string()))?;
                        let items = list.as_list().ok_or_else(|| err("row is not a value list".into()))?;
                        cfg.rows.push((db.to_string(), table.to_string(), items));
                    }
                    other => return Err(err(format!("unknown table key {other}"))),
                }
            } else if let Some(name) = key.strip_prefix("peer.") {
                let addr = value
                    .to_socket_addrs()
                    .ok()
                    .and_then(|mut a| a.next())
                    .ok_or_else(|| err(format!("cannot resolve {value}")))?;
                cfg.peers.push((name.to_string(), addr));
            } else {
                return Err(err(format!("unknown key {key}")));
            }
        }
        Ok(cfg)
    }

    pub fn apply(&self, rt: &Runtime) {
        for (name, b) in &self.stubs {
            rt.stubs.set(name, b.clone());
        }
        for (db, table, cols) in &self.tables {
            rt.tables.define(db, table, cols.clone());
        }
        for (db, table, row) in &self.rows {
            if !rt.tables.insert_row(db, table, row.clone()) {
                log::warn!("row for undefined table {db}.{table} ignored");
            }
        }
        for (name, addr) in &self.peers {
            rt.bus.add_peer(name, *addr);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_section() {
        let cfg = Config::parse(
            "# flights\nstub.flight.BookingSystem.book = fail, succeed\n\
             db.flights.flights.columns = flight, dest\n\
             db.flights.flights.row = lh1, paris\n\
             peer.manager = 127.0.0.1:7001\n",
        )
        .unwrap();
        assert_eq!(cfg.stubs[0].0, "flight.BookingSystem.book");
        assert_eq!(cfg.tables[0], ("flights".into(), "flights".into(), vec!["flight".into(), "dest".into()]));
        assert_eq!(cfg.rows[0].2, vec![Term::atom("lh1"), Term::atom("paris")]);
        assert_eq!(cfg.peers[0].1.port(), 7001);
        let rt = Runtime::default();
        cfg.apply(&rt);
        assert_eq!(rt.tables.table("flights", "flights").unwrap().rows.len(), 1);
    }

    #[test]
    fn reports_line_numbers() {
        let e = Config::parse("\nnonsense\n").unwrap_err();
        assert_eq!(e.line, 2);
    }
}
