//! The reference monitor: integrates components, opens uid-bound sessions
//! and runs their statements inside the component's own namespace with
//! the owner guard enforced on every row change.

pub mod auth;
mod eval;
mod guard;
pub mod names;
pub mod store;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{RwLock, RwLockReadGuard, RwLockWriteGuard};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use auth::{digest, SecretKey, Session};
pub(crate) use eval::Ctx;
pub use eval::{Relation, ViewRow};
pub use guard::owner_guard;
pub use names::{physical_name, split_physical, PhysicalName};
pub use store::{AuditRecord, StoreError};

use eval::Scope;
use store::Db;
use crate::graph::{EcosystemGraph, GraphError};
use crate::model::{DataItem, ModelError, Op, Request, Selection, Universe};
use crate::schema::{
    output_signature, parse_db_file, valid_name, validate_schema, Catalog, Diagnostic, SchemaDecl, SchemaError, TableKind,
};
use crate::sql::{parse_query, SqlError, Statement};
use crate::value::{ColumnType, Value};
use crate::wiring::{check_wiring, compile_restriction, fk, WiringSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ErrorCode {
    #[serde(rename = "E_SYNTAX")]
    Syntax,
    #[serde(rename = "E_UNSUPPORTED")]
    Unsupported,
    #[serde(rename = "E_UNKNOWN_TABLE")]
    UnknownTable,
    #[serde(rename = "E_OWNER")]
    Owner,
    #[serde(rename = "E_IDENTITY")]
    Identity,
    #[serde(rename = "E_PERMISSION")]
    Permission,
    /// Key uniqueness, foreign keys and column types.
    #[serde(rename = "E_CONSTRAINT")]
    Constraint,
    /// Runtime failures such as a scalar subquery yielding several rows.
    #[serde(rename = "E_EVAL")]
    Eval,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::Syntax => "E_SYNTAX",
            ErrorCode::Unsupported => "E_UNSUPPORTED",
            ErrorCode::UnknownTable => "E_UNKNOWN_TABLE",
            ErrorCode::Owner => "E_OWNER",
            ErrorCode::Identity => "E_IDENTITY",
            ErrorCode::Permission => "E_PERMISSION",
            ErrorCode::Constraint => "E_CONSTRAINT",
            ErrorCode::Eval => "E_EVAL",
        }
    }

    /// Process exit status for a CLI run failing with this code.
    pub fn exit_status(self) -> i32 {
        match self {
            ErrorCode::Syntax | ErrorCode::Unsupported => 2,
            ErrorCode::UnknownTable => 3,
            ErrorCode::Owner => 4,
            ErrorCode::Identity => 5,
            ErrorCode::Permission => 6,
            ErrorCode::Constraint => 7,
            ErrorCode::Eval => 1,
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{code}: {message}")]
pub struct EngineError {
    pub code: ErrorCode,
    pub message: String,
}

impl EngineError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

impl From<SqlError> for EngineError {
    fn from(e: SqlError) -> Self {
        match e {
            SqlError::Syntax(s) => EngineError::new(ErrorCode::Syntax, format!("{}: {}", s.pos, s.message)),
            SqlError::Unsupported { pos, construct } => {
                EngineError::new(ErrorCode::Unsupported, format!("{pos}: unsupported construct: {construct}"))
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum MonitorError {
    #[error("invalid component name `{0}`")]
    Name(String),
    #[error("{0}")]
    Schema(#[from] SchemaError),
    #[error("component `{funit}` rejected")]
    Invalid { funit: String, diagnostics: Vec<Diagnostic> },
    #[error("component `{0}` is already integrated")]
    Exists(String),
    #[error("unknown component `{0}`")]
    UnknownComponent(String),
    #[error("state belongs to a different monitor")]
    ForeignFork,
    #[error("wiring rejected")]
    Wiring(Vec<Diagnostic>),
    #[error("{0}")]
    Graph(#[from] GraphError),
    #[error("{0}")]
    Store(#[from] StoreError),
    #[error("{0}")]
    Engine(#[from] EngineError),
}

impl MonitorError {
    pub fn diagnostics(&self) -> &[Diagnostic] {
        match self {
            MonitorError::Invalid { diagnostics, .. } | MonitorError::Wiring(diagnostics) => diagnostics,
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputReport {
    pub name: String,
    pub signature: Vec<(String, ColumnType)>,
    pub invariant: String,
    /// The invariant as a row condition over `__row`.
    pub restriction: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegrationReport {
    pub funit: String,
    /// Local tables with their physical names.
    pub tables: Vec<(String, String)>,
    pub inputs: Vec<(String, Vec<(String, ColumnType)>)>,
    pub outputs: Vec<OutputReport>,
    /// Wirings dropped by a forced re-integration.
    pub dropped_wirings: usize,
}

/// A statement's result set or affected-row count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryResult {
    Rows { columns: Vec<String>, rows: Vec<Vec<Value>> },
    Affected(usize),
}

/// A statement's replay as model requests: the main request followed by
/// one SEL per embedded sub-select.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub result: QueryResult,
    pub trace: Vec<Request>,
    /// Components made stale by a modification, in rebuild order.
    pub rebuild: Vec<String>,
    /// Rows deleted by the dangling-reference sweep.
    pub cascaded: Vec<AuditRecord>,
}

/// Model id of a component's table as seen by `uid`.
pub fn model_table_id(component: &str, table: &str, kind: TableKind, uid: &str) -> String {
    match kind {
        TableKind::Input => format!("{component}.{table}@{uid}"),
        _ => format!("{component}.{table}"),
    }
}

pub struct Monitor {
    sk: SecretKey,
    db: RwLock<Db>,
    store: Option<PathBuf>,
    sessions: AtomicU64,
}

impl Default for Monitor {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for Monitor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Monitor").field("store", &self.store).finish_non_exhaustive()
    }
}

impl Monitor {
    pub fn new() -> Self {
        Self::with_secret_key(SecretKey::generate())
    }

    pub fn with_secret_key(sk: SecretKey) -> Self {
        Self { sk, db: RwLock::new(Db::default()), store: None, sessions: AtomicU64::new(0) }
    }

    /// Opens the store at `path`, creating an empty one with a fresh key
    /// when the file does not exist. Every accepted change is written back.
    pub fn open(path: &Path) -> Result<Self, MonitorError> {
        let mut m = if path.exists() {
            let (db, sk) = Db::load(path)?;
            Self { sk, db: RwLock::new(db), store: None, sessions: AtomicU64::new(0) }
        } else {
            let m = Self::new();
            m.read().save(&m.sk, path)?;
            m
        };
        m.store = Some(path.to_owned());
        Ok(m)
    }

    fn read(&self) -> RwLockReadGuard<'_, Db> {
        self.db.read().unwrap_or_else(|e| e.into_inner())
    }

    fn write(&self) -> RwLockWriteGuard<'_, Db> {
        self.db.write().unwrap_or_else(|e| e.into_inner())
    }

    /// Persists `next` (when backed by a file) and makes it current.
    fn commit(&self, current: &mut Db, next: Db) -> Result<(), StoreError> {
        if let Some(p) = &self.store {
            next.save(&self.sk, p)?;
        }
        *current = next;
        Ok(())
    }

    /// An in-memory copy sharing this monitor's key, for staging a batch
    /// of changes that must land together or not at all.
    pub fn fork(&self) -> Monitor {
        Monitor {
            sk: self.sk.clone(),
            db: RwLock::new(self.read().clone()),
            store: None,
            sessions: AtomicU64::new(self.sessions.load(Ordering::Relaxed)),
        }
    }

    /// Replaces this monitor's state with that of one of its forks.
    pub fn adopt(&self, fork: Monitor) -> Result<(), MonitorError> {
        if fork.sk != self.sk {
            return Err(MonitorError::ForeignFork);
        }
        self.sessions.fetch_max(fork.sessions.load(Ordering::Relaxed), Ordering::Relaxed);
        let next = fork.db.into_inner().unwrap_or_else(|e| e.into_inner());
        let mut db = self.write();
        self.commit(&mut db, next)?;
        Ok(())
    }

    /// Serialised state with the secret key blanked; equal snapshots mean
    /// equal stores.
    pub fn snapshot(&self) -> String {
        self.read().to_json(&SecretKey::from_bytes([0; 32]))
    }

    pub fn components(&self) -> Vec<String> {
        self.read().schemas.keys().cloned().collect()
    }

    pub fn schema(&self, funit: &str) -> Option<SchemaDecl> {
        self.read().schemas.get(funit).cloned()
    }

    pub fn source(&self, funit: &str) -> Option<String> {
        self.read().sources.get(funit).cloned()
    }

    pub fn wirings(&self) -> Vec<WiringSpec> {
        self.read().wirings.clone()
    }

    pub fn graph(&self) -> EcosystemGraph {
        self.read().graph.clone()
    }

    pub fn audit_log(&self) -> Vec<AuditRecord> {
        self.read().audit.clone()
    }

    /// Validates and installs a component. With `force` an existing
    /// component is replaced, wirings touching it are dropped and local
    /// tables whose declaration is unchanged keep their rows. A rejected
    /// integration changes nothing.
    pub fn integrate(&self, funit: &str, text: &str, force: bool) -> Result<IntegrationReport, MonitorError> {
        if !valid_name(funit) {
            return Err(MonitorError::Name(funit.to_owned()));
        }
        let decl = parse_db_file(funit, text)?;
        let mut db = self.write();
        if db.schemas.contains_key(funit) && !force {
            return Err(MonitorError::Exists(funit.to_owned()));
        }
        let catalog: Catalog = db
            .schemas
            .iter()
            .filter(|(n, _)| *n != funit)
            .map(|(n, s)| (n.clone(), s.table_names().into_iter().map(str::to_owned).collect()))
            .collect();
        let diagnostics = validate_schema(&decl, &catalog);
        if !diagnostics.is_empty() {
            return Err(MonitorError::Invalid { funit: funit.to_owned(), diagnostics });
        }
        let mut report = IntegrationReport {
            funit: funit.to_owned(),
            tables: decl.locals.iter().map(|t| (t.name.clone(), physical_name(funit, &t.name))).collect(),
            inputs: decl
                .inputs
                .iter()
                .map(|t| (t.name.clone(), t.columns.iter().map(|c| (c.name.clone(), c.ty)).collect()))
                .collect(),
            outputs: Vec::new(),
            dropped_wirings: 0,
        };
        for o in &decl.outputs {
            let signature = output_signature(&decl, o)?;
            let restriction = compile_restriction(&o.invariant, &o.columns(), &decl)
                .map_err(|e| MonitorError::Invalid { funit: funit.to_owned(), diagnostics: vec![Diagnostic { pos: o.pos, message: e.to_string() }] })?;
            report.outputs.push(OutputReport { name: o.name.clone(), signature, invariant: o.invariant.to_string(), restriction: restriction.to_string() });
        }
        let mut next = db.clone();
        let before = next.wirings.len();
        next.wirings.retain(|w| w.source.component != funit && w.target.component != funit);
        report.dropped_wirings = before - next.wirings.len();
        let kept: BTreeSet<(String, String)> =
            next.wirings.iter().map(|w| (w.source.component.clone(), w.target.component.clone())).collect();
        let edges: Vec<(String, String)> = next.graph.sharing_edge_set().iter().cloned().collect();
        for (a, b) in edges {
            if !kept.contains(&(a.clone(), b.clone())) && (a == funit || b == funit) {
                next.graph.remove_sharing(&a, &b);
            }
        }
        next.install(decl, text);
        fk::sweep(&mut next, &BTreeSet::new(), ("", ""))?;
        self.commit(&mut db, next)?;
        Ok(report)
    }

    /// Adds a graph node for a component that declares no tables.
    pub fn add_node(&self, name: &str) -> Result<(), MonitorError> {
        if !valid_name(name) {
            return Err(MonitorError::Name(name.to_owned()));
        }
        let mut db = self.write();
        let mut next = db.clone();
        next.graph.add_node(name);
        self.commit(&mut db, next)?;
        Ok(())
    }

    pub fn add_activation(&self, parent: &str, child: &str) -> Result<(), MonitorError> {
        let mut db = self.write();
        let mut next = db.clone();
        next.graph.add_activation(parent, child)?;
        self.commit(&mut db, next)?;
        Ok(())
    }

    /// Validates and installs a wiring, adding its sharing edge.
    pub fn wire(&self, spec: &WiringSpec) -> Result<(), MonitorError> {
        let mut db = self.write();
        let diagnostics = check_wiring(spec, &db.schemas, &db.graph);
        if !diagnostics.is_empty() {
            return Err(MonitorError::Wiring(diagnostics));
        }
        let mut next = db.clone();
        next.graph.add_sharing(&spec.source.component, &spec.target.component)?;
        next.wirings.push(spec.clone());
        fk::sweep(&mut next, &BTreeSet::new(), ("", ""))?;
        self.commit(&mut db, next)?;
        Ok(())
    }

    /// Opens a session for `uid` on behalf of integrated component `funit`.
    pub fn open_session(&self, funit: &str, uid: &str) -> Result<Session, EngineError> {
        if !self.read().schemas.contains_key(funit) {
            return Err(EngineError::new(ErrorCode::Identity, format!("unknown component `{funit}`")));
        }
        if !auth::valid_uid(uid) {
            return Err(EngineError::new(ErrorCode::Identity, "invalid uid"));
        }
        let id = self.sessions.fetch_add(1, Ordering::Relaxed) + 1;
        Ok(Session::open(id, funit, uid, &self.sk))
    }

    /// Whether the session's digest authenticates its uid for `funit`.
    pub fn verify_uid(&self, session: &Session, funit: &str) -> bool {
        auth::verify(&self.sk, session, funit)
    }

    /// The guard for one row change on a table of `component`.
    pub fn guard_owner(&self, session: &Session, component: &str, op: Op, old: Option<&Value>, new: Option<&Value>) -> Result<(), EngineError> {
        if !self.verify_uid(session, component) {
            return Err(EngineError::new(ErrorCode::Identity, "uid digest does not verify"));
        }
        if !owner_guard(op, session.uid(), old, new) {
            return Err(EngineError::new(ErrorCode::Owner, format!("{op} would touch a row not owned by the session user")));
        }
        Ok(())
    }

    /// Runs one statement for `session`.
    pub fn execute(&self, session: &Session, text: &str) -> Result<Outcome, EngineError> {
        if !self.verify_uid(session, session.funit()) {
            return Err(EngineError::new(ErrorCode::Identity, "uid digest does not verify"));
        }
        let mut ast = parse_query(text)?;
        let funit = session.funit().to_owned();
        let uid = session.uid().to_owned();
        let resolve = |db: &Db| -> Result<BTreeMap<String, TableKind>, EngineError> {
            let schema = db
                .schemas
                .get(&funit)
                .ok_or_else(|| EngineError::new(ErrorCode::Identity, format!("unknown component `{funit}`")))?;
            let mut kinds = BTreeMap::new();
            for t in ast.tables() {
                match schema.kind(&t) {
                    None => return Err(EngineError::new(ErrorCode::UnknownTable, format!("unknown table `{t}` in component {funit}"))),
                    Some(TableKind::Output) => {
                        return Err(EngineError::new(ErrorCode::Permission, format!("output table `{t}` is not readable by its component")))
                    }
                    Some(k) => {
                        kinds.insert(t, k);
                    }
                }
            }
            if let Some(target) = ast.target() {
                if kinds.get(target) != Some(&TableKind::Local) {
                    return Err(EngineError::new(ErrorCode::Permission, format!("{} on input table `{target}`", ast.op)));
                }
            }
            Ok(kinds)
        };
        let ids = |kinds: &BTreeMap<String, TableKind>, tables: Vec<String>| -> Vec<String> {
            tables.iter().map(|t| model_table_id(&funit, t, kinds[t], &uid)).collect()
        };

        if let Statement::Select(_) = &ast.statement {
            let db = self.read();
            let kinds = resolve(&db)?;
            let trace = vec![Request::new(Op::Sel, ids(&kinds, ast.tables()), Selection::All, &uid, &funit)];
            ast.rename_tables(&mut |t| physical_name(&funit, t));
            let Statement::Select(sel) = &ast.statement else { unreachable!() };
            let rel = Ctx::new(&db, &uid, session.uid_h()).select(sel, None)?;
            return Ok(Outcome {
                result: QueryResult::Rows { columns: rel.columns, rows: rel.rows },
                trace,
                rebuild: Vec::new(),
                cascaded: Vec::new(),
            });
        }

        let mut db = self.write();
        let kinds = resolve(&db)?;
        let logical = ast.target().unwrap().to_owned();
        let mut trace: Vec<Request> = ast.sub_requests().iter().map(|s| Request::new(Op::Sel, ids(&kinds, s.tables()), Selection::All, &uid, &funit)).collect();
        ast.rename_tables(&mut |t| physical_name(&funit, t));
        let physical = physical_name(&funit, &logical);
        let decl = db.local_decl(&funit, &logical).unwrap().clone();
        let columns: Vec<String> = decl.columns.iter().map(|c| c.name.clone()).collect();
        let key_idx = columns.iter().position(|c| c == decl.key_column()).unwrap();
        let owner_idx = columns.iter().position(|c| c == decl.owner_column()).unwrap();
        let model_table = model_table_id(&funit, &logical, TableKind::Local, &uid);
        let item_id = |rowid: u64| format!("{model_table}#{rowid}");
        let coerce = |col: usize, v: Value| {
            decl.columns[col].ty.coerce(v).map_err(|e| EngineError::new(ErrorCode::Constraint, format!("column `{}`: {e}", columns[col])))
        };
        let unknown_col = |c: &str| EngineError::new(ErrorCode::Syntax, format!("unknown column `{c}` in `{logical}`"));

        let mut next = db.clone();
        let mut written: BTreeSet<(String, u64)> = BTreeSet::new();
        let affected;
        let main;
        {
            let ctx = Ctx::new(&db, &uid, session.uid_h());
            let committed = db.tables.get(&physical).cloned().unwrap_or_default();
            let table = next.tables.entry(physical.clone()).or_default();
            match &ast.statement {
                Statement::Insert(ins) => {
                    let targets: Vec<usize> = if ins.columns.is_empty() {
                        (0..columns.len()).collect()
                    } else {
                        let mut v = Vec::new();
                        for c in &ins.columns {
                            let i = columns.iter().position(|x| x == c).ok_or_else(|| unknown_col(c))?;
                            if v.contains(&i) {
                                return Err(EngineError::new(ErrorCode::Syntax, format!("column `{c}` listed twice")));
                            }
                            v.push(i);
                        }
                        v
                    };
                    let mut pending = Vec::new();
                    for exprs in &ins.rows {
                        if exprs.len() != targets.len() {
                            return Err(EngineError::new(ErrorCode::Syntax, format!("{} values for {} columns", exprs.len(), targets.len())));
                        }
                        let mut row = vec![Value::Null; columns.len()];
                        for (i, e) in targets.iter().zip(exprs) {
                            row[*i] = coerce(*i, ctx.eval(e, &Scope::empty())?)?;
                        }
                        if row[key_idx].is_null() {
                            let max = table.rows.iter().filter_map(|r| r.values[key_idx].as_int()).max().unwrap_or(0);
                            row[key_idx] = Value::Text((max + 1).to_string());
                        }
                        self.guard_owner(session, &funit, Op::Ins, None, Some(&row[owner_idx]))?;
                        let key = row[key_idx].clone();
                        if table.rows.iter().any(|r| r.values[key_idx] == key) {
                            return Err(EngineError::new(ErrorCode::Constraint, format!("duplicate key '{key}' in `{logical}`")));
                        }
                        let mut item = DataItem::new("", &model_table, &row[owner_idx].render().unwrap_or_default(), &funit);
                        for (c, v) in columns.iter().zip(&row) {
                            item = item.with_value(c, v.clone());
                        }
                        let rowid = table.push(row);
                        item.id = item_id(rowid);
                        written.insert((physical.clone(), rowid));
                        pending.push(item);
                    }
                    affected = pending.len();
                    main = Request::new(Op::Ins, [model_table.clone()], Selection::Pending(pending), &uid, &funit);
                }
                Statement::Update(upd) => {
                    let mut assigns = Vec::new();
                    for (c, e) in &upd.assignments {
                        assigns.push((columns.iter().position(|x| x == c).ok_or_else(|| unknown_col(c))?, e));
                    }
                    let mut hit = BTreeSet::new();
                    for (pos, row) in committed.rows.iter().enumerate() {
                        let sc = Scope::row(&logical, &columns, &row.values);
                        if let Some(w) = &upd.selection {
                            if !ctx.holds(w, &sc)? {
                                continue;
                            }
                        }
                        let mut new = row.values.clone();
                        for (i, e) in &assigns {
                            new[*i] = coerce(*i, ctx.eval(e, &sc)?)?;
                        }
                        self.guard_owner(session, &funit, Op::Upd, Some(&row.values[owner_idx]), Some(&new[owner_idx]))?;
                        if new[key_idx].is_null() {
                            return Err(EngineError::new(ErrorCode::Constraint, format!("KEY of `{logical}` cannot be NULL")));
                        }
                        table.rows[pos].values = new;
                        hit.insert(item_id(row.rowid));
                        written.insert((physical.clone(), row.rowid));
                    }
                    let mut keys = BTreeSet::new();
                    if let Some(r) = table.rows.iter().find(|r| !keys.insert(r.values[key_idx].clone())) {
                        return Err(EngineError::new(ErrorCode::Constraint, format!("duplicate key '{}' in `{logical}`", r.values[key_idx])));
                    }
                    affected = hit.len();
                    main = Request::new(Op::Upd, [model_table.clone()], Selection::Items(hit), &uid, &funit);
                }
                Statement::Delete(del) => {
                    let mut hit = BTreeSet::new();
                    let mut gone = BTreeSet::new();
                    for row in &committed.rows {
                        let sc = Scope::row(&logical, &columns, &row.values);
                        if let Some(w) = &del.selection {
                            if !ctx.holds(w, &sc)? {
                                continue;
                            }
                        }
                        self.guard_owner(session, &funit, Op::Del, Some(&row.values[owner_idx]), None)?;
                        hit.insert(item_id(row.rowid));
                        gone.insert(row.rowid);
                    }
                    table.rows.retain(|r| !gone.contains(&r.rowid));
                    affected = hit.len();
                    main = Request::new(Op::Del, [model_table.clone()], Selection::Items(hit), &uid, &funit);
                }
                Statement::Select(_) => unreachable!(),
            }
        }
        trace.insert(0, main);
        let cascaded = fk::sweep(&mut next, &written, (&funit, &uid))?;
        let mut changed: BTreeSet<String> = BTreeSet::from([funit.clone()]);
        for c in &cascaded {
            if let Some((comp, _)) = split_physical(&c.table) {
                changed.insert(comp.to_owned());
            }
        }
        let mut stale = BTreeSet::new();
        for c in &changed {
            stale.extend(next.graph.stale_closure(c).unwrap_or_default());
        }
        let rebuild = next.graph.rebuild_order(&stale);
        self.commit(&mut db, next).map_err(|e| EngineError::new(ErrorCode::Eval, e.to_string()))?;
        Ok(Outcome { result: QueryResult::Affected(affected), trace, rebuild, cascaded })
    }

    /// Rows of `funit`'s input table as `uid` sees them, with provenance.
    pub fn input_view(&self, funit: &str, table: &str, uid: &str) -> Result<Vec<ViewRow>, EngineError> {
        let db = self.read();
        match db.schemas.get(funit).and_then(|s| s.kind(table)) {
            Some(TableKind::Input) => {}
            _ => return Err(EngineError::new(ErrorCode::UnknownTable, format!("`{funit}.{table}` is not an input table"))),
        }
        Ok(Ctx::new(&db, uid, "").input_view(funit, table)?.as_ref().clone())
    }

    /// The restricted view of an output table for `uid`: the rows a
    /// consumer wired to it would receive, before column mapping.
    pub fn output_view(&self, funit: &str, table: &str, uid: &str) -> Result<Relation, EngineError> {
        let db = self.read();
        let schema = db.schemas.get(funit).ok_or_else(|| EngineError::new(ErrorCode::UnknownTable, format!("unknown component `{funit}`")))?;
        let (query, cond) = crate::wiring::restricted_view(schema, table).map_err(|e| EngineError::new(ErrorCode::UnknownTable, e.to_string()))?;
        let ctx = Ctx::new(&db, uid, "");
        let rel = ctx.select(&query, None)?;
        let mut rows = Vec::new();
        for r in rel.rows {
            if ctx.holds(&cond, &Scope::row(crate::wiring::ROW_BINDING, &rel.columns, &r))? {
                rows.push(r);
            }
        }
        Ok(Relation { columns: rel.columns, rows })
    }

    /// Projects the store onto the formal model for the given users. Input
    /// tables are materialised per user; owners found in the data join the
    /// user dimension. A NULL owner appears as `<null>`.
    pub fn universe<S: AsRef<str>>(&self, users: &[S]) -> Result<Universe, ModelError> {
        let db = self.read();
        let owner_of = |v: &Value| v.render().unwrap_or_else(|| "<null>".to_owned());
        let mut all_users: BTreeSet<String> = users.iter().map(|u| u.as_ref().to_owned()).collect();
        for (p, t) in &db.tables {
            let Some((comp, table)) = split_physical(p) else { continue };
            let Some(decl) = db.local_decl(comp, table) else { continue };
            let oi = decl.columns.iter().position(|c| c.name == decl.owner_column()).unwrap();
            all_users.extend(t.rows.iter().map(|r| owner_of(&r.values[oi])));
        }
        let mut u = Universe::two_dimensional(all_users.iter().cloned(), db.schemas.keys().cloned())?;
        for (comp, schema) in &db.schemas {
            for t in &schema.locals {
                let id = model_table_id(comp, &t.name, TableKind::Local, "");
                u.add_local_table(comp, &id);
                let oi = t.columns.iter().position(|c| c.name == t.owner_column()).unwrap();
                for r in db.table(comp, &t.name).map(|t| t.rows.as_slice()).unwrap_or_default() {
                    let src = r.src.clone().unwrap_or_else(|| comp.clone());
                    let mut item = DataItem::new(&format!("{id}#{}", r.rowid), &id, &owner_of(&r.values[oi]), &src);
                    for (c, v) in t.columns.iter().zip(&r.values) {
                        item = item.with_value(&c.name, v.clone());
                    }
                    u.insert(item)?;
                }
            }
            for t in &schema.inputs {
                let oi = t.columns.iter().position(|c| c.name == t.owner_column()).unwrap();
                for user in &all_users {
                    let id = model_table_id(comp, &t.name, TableKind::Input, user);
                    u.add_input_table(comp, user, &id);
                    let rows = Ctx::new(&db, user, "").input_view(comp, &t.name).map_err(|e| ModelError::Universe(e.to_string()))?;
                    for (n, r) in rows.iter().enumerate() {
                        let mut item = DataItem::new(&format!("{id}#{}", n + 1), &id, &owner_of(&r.values[oi]), &r.src);
                        for (c, v) in t.columns.iter().zip(&r.values) {
                            item = item.with_value(&c.name, v.clone());
                        }
                        u.insert(item)?;
                    }
                }
            }
        }
        for w in &db.wirings {
            u.add_wiring(&w.source.component, &w.target.component);
        }
        Ok(u)
    }

    /// Stores a row without the guard or constraint checks. For tests that
    /// need states no guarded statement can produce.
    #[doc(hidden)]
    pub fn raw_insert(&self, funit: &str, table: &str, values: Vec<Value>) -> Result<u64, EngineError> {
        let mut db = self.write();
        let width = db.local_decl(funit, table).map(|d| d.columns.len());
        match width {
            Some(w) if w == values.len() => {}
            _ => return Err(EngineError::new(ErrorCode::UnknownTable, format!("`{funit}.{table}`"))),
        }
        Ok(db.tables.entry(physical_name(funit, table)).or_default().push(values))
    }

    /// Overrides a stored row's provenance. For tests that must observe a
    /// corrupted store.
    #[doc(hidden)]
    pub fn corrupt_src(&self, funit: &str, table: &str, rowid: u64, src: &str) -> bool {
        let mut db = self.write();
        let Some(t) = db.tables.get_mut(&physical_name(funit, table)) else { return false };
        match t.rows.iter_mut().find(|r| r.rowid == rowid) {
            Some(r) => {
                r.src = Some(src.to_owned());
                true
            }
            None => false,
        }
    }
}

#[cfg(test)]
mod tests;
