//! Newline-delimited JSON service. One request object per line, one
//! response object per line:
//!
//! ```text
//! {"open": "LiveSearch", "uid": "alice"}         -> {"session": "<token>"}
//! {"query": "<token>", "sql": "SELECT ..."}      -> {"columns": [...], "rows": [[...]]}
//!                                                 | {"affected": n, "rebuild": [...]}
//!                                                 | {"error": "E_...", "message": "..."}
//! {"close": "<token>"}                           -> {"closed": true}
//! ```
//!
//! A line that is not one of these objects is answered with
//! `{"error": "E_PROTOCOL", ...}` and the connection is closed.

use std::collections::HashMap;
use std::io::{self, BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;

use serde_json::{json, Value as Json};

use refmon_core::sandbox::{EngineError, ErrorCode, Monitor, QueryResult, Session};

pub struct Service {
    monitor: Arc<Monitor>,
    sessions: Mutex<HashMap<String, Session>>,
}

fn error(e: &EngineError) -> Json {
    json!({ "error": e.code.as_str(), "message": e.message })
}

fn protocol(message: &str) -> Json {
    json!({ "error": "E_PROTOCOL", "message": message })
}

fn token() -> String {
    format!("{:032x}", rand::random::<u128>())
}

impl Service {
    pub fn new(monitor: Arc<Monitor>) -> Self {
        Self { monitor, sessions: Mutex::new(HashMap::new()) }
    }

    fn session(&self, token: &str) -> Result<Session, EngineError> {
        self.sessions
            .lock()
            .unwrap()
            .get(token)
            .cloned()
            .ok_or_else(|| EngineError::new(ErrorCode::Identity, "unknown session token"))
    }

    /// Answers one request line. The flag is false when the connection
    /// must be closed.
    pub fn handle(&self, line: &str) -> (Json, bool) {
        let Ok(Json::Object(req)) = serde_json::from_str::<Json>(line) else {
            return (protocol("expected one JSON object per line"), false);
        };
        let text = |k: &str| req.get(k).and_then(Json::as_str);
        if let Some(funit) = text("open") {
            let Some(uid) = text("uid") else { return (protocol("`open` needs `uid`"), false) };
            return match self.monitor.open_session(funit, uid) {
                Ok(s) => {
                    let t = token();
                    self.sessions.lock().unwrap().insert(t.clone(), s);
                    (json!({ "session": t }), true)
                }
                Err(e) => (error(&e), true),
            };
        }
        if let Some(t) = text("query") {
            let Some(sql) = text("sql") else { return (protocol("`query` needs `sql`"), false) };
            let out = self.session(t).and_then(|s| self.monitor.execute(&s, sql));
            return match out {
                Ok(o) => match o.result {
                    QueryResult::Rows { columns, rows } => (json!({ "columns": columns, "rows": rows }), true),
                    QueryResult::Affected(n) => (json!({ "affected": n, "rebuild": o.rebuild }), true),
                },
                Err(e) => (error(&e), true),
            };
        }
        if let Some(t) = text("close") {
            return match self.sessions.lock().unwrap().remove(t) {
                Some(_) => (json!({ "closed": true }), true),
                None => (error(&EngineError::new(ErrorCode::Identity, "unknown session token")), true),
            };
        }
        (protocol("expected `open`, `query` or `close`"), false)
    }

    fn connection(&self, stream: TcpStream) -> io::Result<()> {
        let mut out = stream.try_clone()?;
        for line in BufReader::new(stream).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (resp, open) = self.handle(&line);
            writeln!(out, "{resp}")?;
            if !open {
                break;
            }
        }
        Ok(())
    }
}

/// Binds `addr` and serves connections on background threads. Returns the
/// bound address, which resolves port 0.
pub fn spawn(monitor: Arc<Monitor>, addr: &str) -> io::Result<SocketAddr> {
    let listener = TcpListener::bind(addr)?;
    let local = listener.local_addr()?;
    let service = Arc::new(Service::new(monitor));
    thread::spawn(move || accept(listener, service));
    Ok(local)
}

/// Serves `addr` until the process ends.
pub fn serve(monitor: Arc<Monitor>, addr: &str) -> io::Result<()> {
    let listener = TcpListener::bind(addr)?;
    println!("listening on {}", listener.local_addr()?);
    accept(listener, Arc::new(Service::new(monitor)));
    Ok(())
}

fn accept(listener: TcpListener, service: Arc<Service>) {
    for stream in listener.incoming().flatten() {
        let service = Arc::clone(&service);
        thread::spawn(move || {
            let _ = service.connection(stream);
        });
    }
}
