//! `reactor`: load rule files, query them, step or run the ECA daemon, send
//! event messages and translate between rule text and RuleML.

use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use reactor_core::config::Config;
use reactor_core::messaging::{transport, Message};
use reactor_core::parser::{format_term, parse_term};
use reactor_core::ruleml::{message_to_xml, rr_to_ruleml, ruleml_to_rr};
use reactor_core::term::Term;
use reactor_core::{DaemonConfig, DaemonMode, Engine, Runtime};

#[derive(Parser)]
#[command(name = "reactor", version, about = "Reaction rule engine")]
struct Cli {
    /// key = value file with stub behaviours, tables and peers.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load rule files and serve: ECA daemon, message dispatcher and,
    /// with --port, a TCP listener. Stops on Ctrl-C.
    Run {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Daemon tick in milliseconds.
        #[arg(long, default_value_t = 100)]
        tick: u64,
        /// Evaluate rules on this many workers per tick.
        #[arg(long)]
        parallel: Option<usize>,
        #[arg(long)]
        port: Option<u16>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Comma-separated name=host:port pairs.
        #[arg(long)]
        peers: Option<String>,
        /// Agent name used as the sender of outgoing messages.
        #[arg(long, default_value = "reactor")]
        name: String,
    },
    /// Answer a query against rule files.
    Query {
        files: Vec<PathBuf>,
        #[arg(short, long)]
        query: String,
        /// Print every solution instead of the first.
        #[arg(long)]
        all: bool,
    },
    /// Run a fixed number of daemon ticks and print each rule outcome.
    Step {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(short = 'n', default_value_t = 1)]
        ticks: u64,
    },
    /// Send one event message over TCP.
    Send {
        #[arg(long)]
        to: String,
        #[arg(long)]
        xid: String,
        #[arg(long, default_value = "inform")]
        performative: String,
        #[arg(long)]
        payload: String,
        #[arg(long, default_value = "reactor")]
        from: String,
    },
    /// Convert between rule text and RuleML on stdout.
    Translate {
        #[arg(long, value_enum)]
        to: Option<Format>,
        file: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Ruleml,
    Rr,
}

/// A failure reported on stderr with exit status 2.
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("REACTOR_LOG", "warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(Failure(msg)) => {
            eprintln!("reactor: {msg}");
            ExitCode::from(2)
        }
    }
}

fn execute(cli: Cli) -> Result<ExitCode, Failure> {
    let config = match &cli.config {
        Some(p) => Some(Config::parse(&read(p)?)?),
        None => None,
    };
    match cli.command {
        Command::Run { files, tick, parallel, port, host, peers, name } => {
            let engine = load(&name, config.as_ref(), &files)?;
            if let Some(spec) = peers {
                for (peer, addr) in parse_peers(&spec)? {
                    engine.runtime().bus.add_peer(&peer, addr);
                }
            }
            let daemon = DaemonConfig {
                tick_millis: tick.max(1),
                parallelism: parallel.unwrap_or(1).max(1),
                mode: if parallel.is_some() { DaemonMode::Parallel } else { DaemonMode::Sequential },
            };
            serve(&engine, daemon, port.map(|p| format!("{host}:{p}")))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Query { files, query, all } => {
            let engine = load("reactor", config.as_ref(), &files)?;
            let (q, sols) = engine.query(&query, if all { None } else { Some(1) })?;
            for s in &sols {
                let groups: Vec<String> = q
                    .variables
                    .iter()
                    .filter(|v| !v.name().starts_with('_'))
                    .filter_map(|v| s.get(v.name()).map(|t| format!("{}={}", v.name(), format_term(t))))
                    .collect();
                println!("{}", if groups.is_empty() { "true".to_string() } else { groups.join(", ") });
            }
            Ok(if sols.is_empty() { ExitCode::from(1) } else { ExitCode::SUCCESS })
        }
        Command::Step { files, ticks } => {
            let engine = load("reactor", config.as_ref(), &files)?;
            let cfg = DaemonConfig { mode: DaemonMode::Sequential, ..DaemonConfig::default() };
            for tick in 1..=ticks {
                for outcome in engine.step(&cfg) {
                    println!("tick {tick} {outcome}");
                }
                engine.pump();
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Send { to, xid, performative, payload, from } => {
            let payload = parse_term(&payload)?;
            let addr = resolve(&to)?;
            let msg = Message::new(Term::atom(xid), "tcp", &from, &to, &performative, payload);
            let mut conn = TcpStream::connect_timeout(&addr, Duration::from_secs(5))?;
            transport::write_frame(&mut conn, message_to_xml(&msg).as_bytes())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Translate { to, file } => {
            let text = read(&file)?;
            let to = to.unwrap_or(if text.trim_start().starts_with('<') { Format::Rr } else { Format::Ruleml });
            let out = match to {
                Format::Ruleml => rr_to_ruleml(&text)?,
                Format::Rr => ruleml_to_rr(&text)?,
            };
            print!("{out}");
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn resolve(addr: &str) -> Result<SocketAddr, Failure> {
    addr.to_socket_addrs()?.next().ok_or_else(|| Failure(format!("cannot resolve {addr}")))
}

fn parse_peers(spec: &str) -> Result<Vec<(String, SocketAddr)>, Failure> {
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let (name, addr) = pair.split_once('=').ok_or_else(|| Failure(format!("bad peer {pair}, want name=host:port")))?;
            Ok((name.trim().to_string(), resolve(addr.trim())?))
        })
        .collect()
}

/// An engine with the configuration applied and every file loaded under its
/// path as module oid. Rule output goes to stdout as it is printed.
fn load(agent: &str, config: Option<&Config>, files: &[PathBuf]) -> Result<Engine, Failure> {
    let rt = Runtime::new(agent);
    if let Some(c) = config {
        c.apply(&rt);
    }
    rt.output.set_echo(true);
    let engine = Engine::new(rt);
    for f in files {
        engine.load_file(f)?;
    }
    Ok(engine)
}

fn serve(engine: &Engine, daemon: DaemonConfig, listen_on: Option<String>) -> Result<(), Failure> {
    let stop = Arc::new(AtomicBool::new(false));
    let flag = stop.clone();
    ctrlc::set_handler(move || flag.store(true, Ordering::SeqCst))?;
    let listener = match listen_on {
        Some(addr) => {
            let l = transport::listen(&addr, engine.runtime().bus.inbox())?;
            eprintln!("listening on {}", l.addr);
            Some(l)
        }
        None => None,
    };
    let dispatcher = engine.start_dispatcher();
    let ticker = engine.start_daemon(
        daemon,
        Arc::new(|o| {
            if o.error.is_some() {
                log::warn!("{o}");
            } else {
                log::debug!("{o}");
            }
        }),
    );
    while !stop.load(Ordering::SeqCst) {
        std::thread::sleep(Duration::from_millis(50));
    }
    log::info!("shutting down");
    ticker.stop();
    dispatcher.stop();
    if let Some(l) = listener {
        l.stop();
    }
    Ok(())
}
