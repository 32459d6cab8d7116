//! In-memory store of integrated components and their local rows, persisted
//! as one JSON document.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::auth::SecretKey;
use super::names::physical_name;
use crate::graph::EcosystemGraph;
use crate::schema::{parse_db_file, SchemaDecl, TableDecl};
use crate::value::Value;
use crate::wiring::{Schemas, WiringSpec};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredRow {
    pub rowid: u64,
    pub values: Vec<Value>,
    /// Provenance override, set only by the corruption test hook.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub src: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhysicalTable {
    pub rows: Vec<StoredRow>,
    pub next_rowid: u64,
}

impl PhysicalTable {
    pub fn push(&mut self, values: Vec<Value>) -> u64 {
        self.next_rowid += 1;
        let rowid = self.next_rowid;
        self.rows.push(StoredRow { rowid, values, src: None });
        rowid
    }
}

/// A row removed by the dangling-reference sweep rather than by a guarded
/// statement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub seq: u64,
    pub actor_component: String,
    pub actor_uid: String,
    pub table: String,
    pub rowid: u64,
    pub key: Value,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Db {
    pub schemas: Schemas,
    pub sources: BTreeMap<String, String>,
    /// Local tables by physical name.
    pub tables: BTreeMap<String, PhysicalTable>,
    pub wirings: Vec<WiringSpec>,
    pub graph: EcosystemGraph,
    pub audit: Vec<AuditRecord>,
}

#[derive(Serialize, Deserialize)]
struct Persisted {
    version: u32,
    secret_key: String,
    sources: BTreeMap<String, String>,
    tables: BTreeMap<String, PhysicalTable>,
    wirings: Vec<WiringSpec>,
    graph: EcosystemGraph,
    audit: Vec<AuditRecord>,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("store i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt store: {0}")]
    Corrupt(String),
}

impl Db {
    pub fn local_decl(&self, component: &str, table: &str) -> Option<&TableDecl> {
        self.schemas.get(component)?.local(table)
    }

    pub fn table(&self, component: &str, table: &str) -> Option<&PhysicalTable> {
        self.tables.get(&physical_name(component, table))
    }

    pub fn wirings_into(&self, component: &str, table: &str) -> Vec<&WiringSpec> {
        self.wirings.iter().filter(|w| w.target.component == component && w.target.table == table).collect()
    }

    pub(crate) fn to_json(&self, sk: &SecretKey) -> String {
        let p = Persisted {
            version: 1,
            secret_key: sk.to_hex(),
            sources: self.sources.clone(),
            tables: self.tables.clone(),
            wirings: self.wirings.clone(),
            graph: self.graph.clone(),
            audit: self.audit.clone(),
        };
        serde_json::to_string_pretty(&p).expect("store serializes")
    }

    pub(crate) fn from_json(text: &str) -> Result<(Db, SecretKey), StoreError> {
        let p: Persisted = serde_json::from_str(text).map_err(|e| StoreError::Corrupt(e.to_string()))?;
        let sk = SecretKey::from_hex(&p.secret_key).ok_or_else(|| StoreError::Corrupt("bad secret key".into()))?;
        let mut schemas = Schemas::new();
        for (name, src) in &p.sources {
            let decl = parse_db_file(name, src).map_err(|e| StoreError::Corrupt(format!("{name}: {e}")))?;
            schemas.insert(name.clone(), decl);
        }
        let db = Db { schemas, sources: p.sources, tables: p.tables, wirings: p.wirings, graph: p.graph, audit: p.audit };
        Ok((db, sk))
    }

    /// Writes through a temporary file renamed into place, readable only by
    /// the owner since it holds the secret key.
    pub(crate) fn save(&self, sk: &SecretKey, path: &Path) -> Result<(), StoreError> {
        let tmp = path.with_extension("tmp");
        {
            let mut opts = fs::OpenOptions::new();
            opts.write(true).create(true).truncate(true);
            #[cfg(unix)]
            {
                use std::os::unix::fs::OpenOptionsExt;
                opts.mode(0o600);
            }
            let mut f = opts.open(&tmp)?;
            f.write_all(self.to_json(sk).as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub(crate) fn load(path: &Path) -> Result<(Db, SecretKey), StoreError> {
        Db::from_json(&fs::read_to_string(path)?)
    }

    pub(crate) fn install(&mut self, decl: SchemaDecl, source: &str) {
        let keep: BTreeMap<String, PhysicalTable> = match self.schemas.get(&decl.funit) {
            Some(old) => old
                .locals
                .iter()
                .filter(|t| decl.local(&t.name) == Some(*t))
                .filter_map(|t| {
                    let p = physical_name(&decl.funit, &t.name);
                    self.tables.get(&p).map(|rows| (p, rows.clone()))
                })
                .collect(),
            None => BTreeMap::new(),
        };
        let prefix = physical_name(&decl.funit, "");
        self.tables.retain(|p, _| !p.starts_with(&prefix));
        for t in &decl.locals {
            let p = physical_name(&decl.funit, &t.name);
            let table = keep.get(&p).cloned().unwrap_or_default();
            self.tables.insert(p, table);
        }
        self.graph.add_node(&decl.funit);
        self.sources.insert(decl.funit.clone(), source.to_owned());
        self.schemas.insert(decl.funit.clone(), decl);
    }
}
