//! The `refmon` command line.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};

use refmon_core::model::DEFAULT_BUDGET;
use refmon_core::sandbox::{Monitor, QueryResult};
use refmon_core::value::Value;
use refmon_core::wiring::parse_wirings;

use crate::bundle::{self, render_error};
use crate::{service, soundness};

#[derive(Debug, Parser)]
#[command(name = "refmon", version, about = "Reference monitor for component ecosystems")]
pub struct Cli {
    /// Store file holding integrated components, data and the graph.
    #[arg(long, global = true, env = "REFMON_STORE", default_value = "refmon-store.json")]
    pub store: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate an app bundle's f-units, wirings, activations and seeds.
    Integrate {
        bundle: PathBuf,
        /// Integrate only this f-unit.
        #[arg(long)]
        funit: Option<String>,
        /// Replace an already integrated f-unit.
        #[arg(long)]
        force: bool,
    },
    /// Apply a wiring file.
    Wire { file: PathBuf },
    /// Run one SQL statement as (funit, user).
    Query {
        #[arg(long)]
        funit: String,
        #[arg(long)]
        user: String,
        sql: String,
    },
    /// Print the combined graph.
    Graph,
    /// Print the components made stale by a change in FUNIT and their
    /// rebuild order.
    SimulateChange {
        #[arg(long)]
        funit: String,
    },
    /// Serve the line protocol.
    Serve {
        #[arg(long, default_value = "127.0.0.1:7878")]
        socket: String,
    },
    /// Check sandbox decisions against request validity on random
    /// ecosystems.
    Soundness {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Model requests evaluated per trial before giving up.
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
        /// Corrupt stored provenance; violations are expected.
        #[arg(long)]
        corrupt: bool,
    },
}

/// Escapes a field for tab-separated output.
fn field(v: &Value) -> String {
    match v.render() {
        None => "NULL".to_owned(),
        Some(s) => s.replace('\\', "\\\\").replace('\t', "\\t").replace('\n', "\\n").replace('\r', "\\r"),
    }
}

fn open(store: &Path, err: &mut dyn Write) -> Option<Monitor> {
    match Monitor::open(store) {
        Ok(m) => Some(m),
        Err(e) => {
            let _ = writeln!(err, "{}: {e}", store.display());
            None
        }
    }
}

/// Runs one invocation and returns the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return 2;
            }
            let _ = write!(out, "{e}");
            return 0;
        }
    };
    match execute(cli, out, err) {
        Ok(status) => status,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            1
        }
    }
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> std::io::Result<i32> {
    if let Command::Soundness { trials, seed, budget, corrupt } = cli.command {
        return Ok(match soundness::run(soundness::Config { trials, seed, budget, corrupt }) {
            Ok(s) => {
                write!(out, "{}", s.render())?;
                i32::from(!s.violations.is_empty())
            }
            Err(e) => {
                writeln!(err, "{e}")?;
                1
            }
        });
    }
    let Some(m) = open(&cli.store, err) else { return Ok(1) };
    match cli.command {
        Command::Integrate { bundle: root, funit, force } => {
            let result = bundle::load(&root).and_then(|b| bundle::integrate(&m, &b, funit.as_deref(), force));
            match result {
                Ok(lines) => {
                    for l in lines {
                        writeln!(out, "{l}")?;
                    }
                    Ok(0)
                }
                Err(e) => {
                    writeln!(err, "{e}")?;
                    Ok(e.status)
                }
            }
        }
        Command::Wire { file } => {
            let text = std::fs::read_to_string(&file).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", file.display())))?;
            let specs = match parse_wirings(&text) {
                Ok(s) => s,
                Err(e) => {
                    writeln!(err, "{}:{}: {}", file.display(), e.pos, e.message)?;
                    return Ok(2);
                }
            };
            // All or nothing: wire a fork and adopt it once every spec passed.
            let stage = m.fork();
            for spec in &specs {
                if let Err(e) = stage.wire(spec) {
                    let e = render_error(&e, &file);
                    writeln!(err, "{e}")?;
                    return Ok(e.status);
                }
                writeln!(out, "wired {} -> {}", spec.source, spec.target)?;
            }
            if let Err(e) = m.adopt(stage) {
                writeln!(err, "{e}")?;
                return Ok(1);
            }
            writeln!(out, "{} wiring(s) applied", specs.len())?;
            Ok(0)
        }
        Command::Query { funit, user, sql } => {
            let result = m.open_session(&funit, &user).and_then(|s| m.execute(&s, &sql));
            match result {
                Ok(o) => {
                    match o.result {
                        QueryResult::Rows { columns, rows } => {
                            writeln!(out, "{}", columns.join("\t"))?;
                            for r in rows {
                                writeln!(out, "{}", r.iter().map(field).collect::<Vec<_>>().join("\t"))?;
                            }
                        }
                        QueryResult::Affected(n) => {
                            writeln!(out, "affected: {n}")?;
                            writeln!(out, "rebuild: {}", o.rebuild.join(", "))?;
                            for c in &o.cascaded {
                                writeln!(err, "cascade: {}#{} {}", c.table, c.rowid, c.reason)?;
                            }
                        }
                    }
                    Ok(0)
                }
                Err(e) => {
                    writeln!(err, "{e}")?;
                    Ok(e.code.exit_status())
                }
            }
        }
        Command::Graph => {
            write!(out, "{}", m.graph().export())?;
            Ok(0)
        }
        Command::SimulateChange { funit } => {
            let g = m.graph();
            match g.stale_closure(&funit) {
                Ok(stale) => {
                    let order = g.rebuild_order(&stale);
                    let sorted: BTreeSet<&String> = stale.iter().collect();
                    let sorted: Vec<&str> = sorted.into_iter().map(String::as_str).collect();
                    writeln!(out, "stale: {}", sorted.join(", "))?;
                    writeln!(out, "rebuild: {}", order.join(", "))?;
                    Ok(0)
                }
                Err(e) => {
                    writeln!(err, "{e}")?;
                    Ok(1)
                }
            }
        }
        Command::Serve { socket } => {
            service::serve(Arc::new(m), &socket)?;
            Ok(0)
        }
        Command::Soundness { .. } => unreachable!("handled before the store is opened"),
    }
}
