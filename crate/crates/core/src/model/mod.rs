//! Executable formal model: n-dimensional principals, affected-principal
//! maps, sharing relations, request validity and the abstract two-dimensional
//! sandbox decision, plus a brute-force soundness checker.
//!
//! The model is the ground-truth oracle for the enforcement engine. It works
//! on an immutable [`Universe`] snapshot and never mutates it, so every
//! function here can be called concurrently.
//!
//! The user and component dimensions are interpreted as follows:
//!
//! * the affected user of an item is its `owner`;
//! * the affected component is its `src` (for rows of a local table that is
//!   the component the table belongs to; for rows of an input table the
//!   providing component);
//! * user sharing holds for every stored item (local tables are public in
//!   their component's scope, and input tables shift the responsibility to
//!   the providing component);
//! * component sharing holds from `src(d)` to `c` when `d` is in the content
//!   of an input table of `c` and a wiring from `src(d)` into `c` exists.
//!
//! Further dimensions are carried in [`DataItem::extra`] and shared through
//! explicit [`Grant`]s.

mod fixture;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::value::Value;

pub use fixture::parse_fixture;

pub type PrincipalId = String;
pub type TableId = String;
pub type ItemId = String;

pub const USERS: &str = "users";
pub const COMPONENTS: &str = "components";

/// Default number of request evaluations a single soundness run may spend.
pub const DEFAULT_BUDGET: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("unknown dimension `{0}`")]
    Dimension(String),
    #[error("scope error: {0}")]
    Scope(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("malformed universe: {0}")]
    Universe(String),
    #[error("fixture line {line}: {message}")]
    Fixture { line: usize, message: String },
    #[error("evaluation budget of {limit} exceeded after {} requests", partial.evaluated)]
    Budget { limit: usize, partial: SoundnessReport },
}

/// Operation class of a request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Op {
    Sel,
    Ins,
    Upd,
    Del,
}

impl Op {
    pub const ALL: [Op; 4] = [Op::Sel, Op::Ins, Op::Upd, Op::Del];

    pub fn is_modification(self) -> bool {
        !matches!(self, Op::Sel)
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Op::Sel => "SEL",
            Op::Ins => "INS",
            Op::Upd => "UPD",
            Op::Del => "DEL",
        })
    }
}

/// One principal class such as users or components.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dimension {
    pub name: String,
    pub principals: BTreeSet<PrincipalId>,
}

impl Dimension {
    pub fn new<I, S>(name: &str, principals: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = S>,
        S: Into<PrincipalId>,
    {
        let mut set = BTreeSet::new();
        for p in principals {
            let p = p.into();
            if !set.insert(p.clone()) {
                return Err(ModelError::Universe(format!("duplicate principal `{p}` in dimension `{name}`")));
            }
        }
        Ok(Self { name: name.to_owned(), principals: set })
    }

    pub fn principal(&self, id: &str) -> Option<Principal> {
        self.principals.contains(id).then(|| Principal { dimension: self.name.clone(), id: id.to_owned() })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Principal {
    pub dimension: String,
    pub id: PrincipalId,
}

/// One stored row with its provenance in both dimensions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataItem {
    pub id: ItemId,
    pub home_table: TableId,
    pub values: BTreeMap<String, Value>,
    pub owner: PrincipalId,
    pub src: PrincipalId,
    /// Affected principals in dimensions beyond users and components.
    pub extra: BTreeMap<String, PrincipalId>,
}

impl DataItem {
    pub fn new(id: &str, home_table: &str, owner: &str, src: &str) -> Self {
        Self {
            id: id.to_owned(),
            home_table: home_table.to_owned(),
            values: BTreeMap::new(),
            owner: owner.to_owned(),
            src: src.to_owned(),
            extra: BTreeMap::new(),
        }
    }

    pub fn with_value(mut self, column: &str, value: impl Into<Value>) -> Self {
        self.values.insert(column.to_owned(), value.into());
        self
    }
}

/// Which rows of the scope tables a request touches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selection {
    All,
    /// Explicit item ids.
    Items(BTreeSet<ItemId>),
    /// Conjunctive column equality against committed values.
    Equals(Vec<(String, Value)>),
    /// Rows an INS is about to write.
    Pending(Vec<DataItem>),
}

impl Selection {
    fn matches(&self, item: &DataItem) -> bool {
        match self {
            Selection::All => true,
            Selection::Items(ids) => ids.contains(&item.id),
            Selection::Equals(conds) => conds
                .iter()
                .all(|(col, v)| item.values.get(col).is_some_and(|x| x.sql_eq(v) == Some(true))),
            Selection::Pending(_) => false,
        }
    }
}

/// A single-operation request issued by one principal per dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Request {
    pub op: Op,
    pub scope_tables: BTreeSet<TableId>,
    pub selection: Selection,
    pub issuer_user: PrincipalId,
    pub issuer_component: PrincipalId,
    /// Issuers in further dimensions.
    pub extra_issuers: BTreeMap<String, PrincipalId>,
}

impl Request {
    pub fn new<I, S>(op: Op, tables: I, selection: Selection, user: &str, component: &str) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<TableId>,
    {
        Self {
            op,
            scope_tables: tables.into_iter().map(Into::into).collect(),
            selection,
            issuer_user: user.to_owned(),
            issuer_component: component.to_owned(),
            extra_issuers: BTreeMap::new(),
        }
    }

    fn issuer(&self, dimension: &str) -> Result<&str, ModelError> {
        match dimension {
            USERS => Ok(&self.issuer_user),
            COMPONENTS => Ok(&self.issuer_component),
            other => self
                .extra_issuers
                .get(other)
                .map(String::as_str)
                .ok_or_else(|| ModelError::Dimension(other.to_owned())),
        }
    }
}

impl fmt::Display for Request {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tables: Vec<&str> = self.scope_tables.iter().map(String::as_str).collect();
        write!(f, "{} [{}] by ({}, {})", self.op, tables.join(", "), self.issuer_user, self.issuer_component)?;
        match &self.selection {
            Selection::All => Ok(()),
            Selection::Items(ids) => write!(f, " items={}", ids.iter().cloned().collect::<Vec<_>>().join(",")),
            Selection::Equals(c) => {
                let parts: Vec<String> = c.iter().map(|(k, v)| format!("{k}={}", v.to_literal())).collect();
                write!(f, " where {}", parts.join(" AND "))
            }
            Selection::Pending(items) => write!(f, " pending={}", items.len()),
        }
    }
}

/// Explicit sharing of one item between two principals of a dimension
/// other than users and components.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Grant {
    pub dimension: String,
    pub from: PrincipalId,
    pub to: PrincipalId,
    pub item: ItemId,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Universe {
    pub dimensions: Vec<Dimension>,
    pub tables: BTreeSet<TableId>,
    pub data: BTreeMap<TableId, Vec<DataItem>>,
    pub lt: BTreeMap<PrincipalId, BTreeSet<TableId>>,
    pub it: BTreeMap<(PrincipalId, PrincipalId), BTreeSet<TableId>>,
    /// Wired (provider, consumer) component pairs.
    pub wirings: BTreeSet<(PrincipalId, PrincipalId)>,
    pub grants: BTreeSet<Grant>,
}

impl Universe {
    /// An empty ⟨users, components⟩ universe.
    pub fn two_dimensional<U, C, S, T>(users: U, components: C) -> Result<Self, ModelError>
    where
        U: IntoIterator<Item = S>,
        C: IntoIterator<Item = T>,
        S: Into<PrincipalId>,
        T: Into<PrincipalId>,
    {
        Ok(Self {
            dimensions: vec![Dimension::new(USERS, users)?, Dimension::new(COMPONENTS, components)?],
            ..Self::default()
        })
    }

    pub fn dimension(&self, name: &str) -> Result<&Dimension, ModelError> {
        self.dimensions.iter().find(|d| d.name == name).ok_or_else(|| ModelError::Dimension(name.to_owned()))
    }

    pub fn users(&self) -> impl Iterator<Item = &PrincipalId> {
        self.dimension(USERS).into_iter().flat_map(|d| d.principals.iter())
    }

    pub fn components(&self) -> impl Iterator<Item = &PrincipalId> {
        self.dimension(COMPONENTS).into_iter().flat_map(|d| d.principals.iter())
    }

    pub fn add_local_table(&mut self, component: &str, table: &str) {
        self.tables.insert(table.to_owned());
        self.data.entry(table.to_owned()).or_default();
        self.lt.entry(component.to_owned()).or_default().insert(table.to_owned());
    }

    pub fn add_input_table(&mut self, component: &str, user: &str, table: &str) {
        self.tables.insert(table.to_owned());
        self.data.entry(table.to_owned()).or_default();
        self.it.entry((component.to_owned(), user.to_owned())).or_default().insert(table.to_owned());
    }

    pub fn add_wiring(&mut self, provider: &str, consumer: &str) {
        self.wirings.insert((provider.to_owned(), consumer.to_owned()));
    }

    /// Stores `item` in its home table, which must already be declared.
    pub fn insert(&mut self, item: DataItem) -> Result<(), ModelError> {
        match self.data.get_mut(&item.home_table) {
            Some(rows) => {
                rows.push(item);
                Ok(())
            }
            None => Err(ModelError::Scope(format!("unknown table `{}`", item.home_table))),
        }
    }

    pub fn is_local(&self, table: &str) -> bool {
        self.lt.values().any(|ts| ts.contains(table))
    }

    pub fn is_input(&self, table: &str) -> bool {
        self.it.values().any(|ts| ts.contains(table))
    }

    pub fn items(&self) -> impl Iterator<Item = &DataItem> {
        self.data.values().flatten()
    }

    fn table_contains(&self, table: &str, item: &DataItem) -> bool {
        self.data.get(table).is_some_and(|rows| rows.iter().any(|d| d.id == item.id))
    }

    /// Checks the table-ownership partition and data completeness.
    pub fn check_invariants(&self) -> Result<(), ModelError> {
        for d in &self.dimensions {
            if d.principals.is_empty() && !self.tables.is_empty() {
                return Err(ModelError::Universe(format!("dimension `{}` has no principals", d.name)));
            }
        }
        for t in &self.tables {
            let locals = self.lt.values().filter(|ts| ts.contains(t)).count();
            let inputs: BTreeSet<&PrincipalId> =
                self.it.iter().filter(|(_, ts)| ts.contains(t)).map(|((c, _), _)| c).collect();
            match (locals, inputs.len()) {
                (1, 0) | (0, 1) => {}
                _ => {
                    return Err(ModelError::Universe(format!(
                        "table `{t}` must belong to exactly one component's local or input tables"
                    )))
                }
            }
        }
        for (t, rows) in &self.data {
            if !self.tables.contains(t) {
                return Err(ModelError::Universe(format!("data for undeclared table `{t}`")));
            }
            let mut ids = BTreeSet::new();
            for d in rows {
                if d.home_table != *t {
                    return Err(ModelError::Universe(format!("item `{}` filed under `{t}`", d.id)));
                }
                if !ids.insert(&d.id) {
                    return Err(ModelError::Universe(format!("duplicate item `{}` in `{t}`", d.id)));
                }
            }
        }
        Ok(())
    }

    /// Affected principal of `item` in dimension `dim`.
    pub fn affected_principal(&self, item: &DataItem, dim: &str) -> Result<Principal, ModelError> {
        let dimension = self.dimension(dim)?;
        let id = match dim {
            USERS => item.owner.clone(),
            COMPONENTS => item.src.clone(),
            other => item
                .extra
                .get(other)
                .cloned()
                .ok_or_else(|| ModelError::Dimension(format!("item `{}` has no principal in `{other}`", item.id)))?,
        };
        Ok(Principal { dimension: dimension.name.clone(), id })
    }

    /// Items of the scope tables selected by the request. For INS these are
    /// the pending rows.
    pub fn scope_data<'a>(&'a self, r: &'a Request) -> Result<Vec<&'a DataItem>, ModelError> {
        for t in &r.scope_tables {
            if !self.tables.contains(t) {
                return Err(ModelError::Scope(format!("unknown table `{t}`")));
            }
        }
        if let Selection::Pending(items) = &r.selection {
            for d in items {
                if !r.scope_tables.contains(&d.home_table) {
                    return Err(ModelError::Scope(format!(
                        "pending item `{}` targets `{}` outside the request scope",
                        d.id, d.home_table
                    )));
                }
            }
            return Ok(items.iter().collect());
        }
        Ok(r
            .scope_tables
            .iter()
            .flat_map(|t| self.data.get(t).into_iter().flatten())
            .filter(|d| r.selection.matches(d))
            .collect())
    }

    /// User sharing: holds for every item stored in a local or input table.
    pub fn shares_user(&self, from: &str, _to: &str, d: &DataItem) -> Result<bool, ModelError> {
        if from != d.owner {
            return Err(ModelError::Precondition(format!("user sharing of `{}` must start at its owner", d.id)));
        }
        let stored = self
            .lt
            .values()
            .chain(self.it.values())
            .flatten()
            .any(|t| self.table_contains(t, d));
        Ok(stored)
    }

    /// Component sharing: `from` shares `d` with `to` when `d` is in the
    /// content of an input table of `to` and `from` is wired into `to`.
    /// Single hop only.
    pub fn shares_component(&self, from: &str, to: &str, d: &DataItem) -> Result<bool, ModelError> {
        if from != d.src {
            return Err(ModelError::Precondition(format!("component sharing of `{}` must start at its source", d.id)));
        }
        if !self.wirings.contains(&(from.to_owned(), to.to_owned())) {
            return Ok(false);
        }
        Ok(self
            .it
            .iter()
            .filter(|((c, _), _)| c == to)
            .flat_map(|(_, ts)| ts)
            .any(|t| self.table_contains(t, d)))
    }

    pub fn shares(&self, dim: &str, from: &str, to: &str, d: &DataItem) -> Result<bool, ModelError> {
        match dim {
            USERS => self.shares_user(from, to, d),
            COMPONENTS => self.shares_component(from, to, d),
            other => {
                self.dimension(other)?;
                Ok(self.grants.contains(&Grant {
                    dimension: other.to_owned(),
                    from: from.to_owned(),
                    to: to.to_owned(),
                    item: d.id.clone(),
                }))
            }
        }
    }

    /// A request is valid iff, for every item in scope and every dimension,
    /// the affected principal is the issuer or has shared the item with it.
    pub fn req_valid(&self, r: &Request) -> Result<bool, ModelError> {
        Ok(self.invalid_items(r)?.is_empty())
    }

    /// Items of the scope that make `r` invalid, with the failing dimension.
    pub fn invalid_items(&self, r: &Request) -> Result<Vec<(ItemId, String)>, ModelError> {
        let mut bad = Vec::new();
        for d in self.scope_data(r)? {
            for dim in &self.dimensions {
                let issuer = r.issuer(&dim.name)?;
                let aff = self.affected_principal(d, &dim.name)?;
                if aff.id != issuer && !self.shares(&dim.name, &aff.id, issuer, d)? {
                    bad.push((d.id.clone(), dim.name.clone()));
                    break;
                }
            }
        }
        Ok(bad)
    }

    /// The abstract sandbox decision for ⟨users, components⟩.
    pub fn sb(&self, r: &Request) -> Result<bool, ModelError> {
        let c = &r.issuer_component;
        let u = &r.issuer_user;
        let empty = BTreeSet::new();
        let local = self.lt.get(c).unwrap_or(&empty);
        if r.op.is_modification() {
            if !r.scope_tables.iter().all(|t| local.contains(t)) {
                return Ok(false);
            }
            Ok(self.scope_data(r)?.iter().all(|d| &d.owner == u))
        } else {
            let input = self.it.get(&(c.clone(), u.clone())).unwrap_or(&empty);
            // Unknown tables still surface as a scope error.
            self.scope_data(r)?;
            Ok(r.scope_tables.iter().all(|t| local.contains(t) || input.contains(t)))
        }
    }

    /// Lists every request with `sb` true but `req_valid` false.
    pub fn soundness_check<'r, I>(&self, requests: I, budget: usize) -> Result<SoundnessReport, ModelError>
    where
        I: IntoIterator<Item = &'r Request>,
    {
        let mut report = SoundnessReport::default();
        for r in requests {
            if report.evaluated >= budget {
                return Err(ModelError::Budget { limit: budget, partial: report });
            }
            report.evaluated += 1;
            if self.sb(r)? {
                report.permitted += 1;
                let bad = self.invalid_items(r)?;
                if !bad.is_empty() {
                    report.violations.push(Violation { request: r.to_string(), items: bad });
                }
            }
        }
        Ok(report)
    }

    /// Every request over this universe: each op, each non-empty set of up to
    /// `max_tables` tables, each issuer pair, selecting all rows or a single
    /// item. INS requests carry one pending row per scope table owned by the
    /// issuer and one owned by someone else.
    pub fn enumerate_requests(&self, max_tables: usize) -> Vec<Request> {
        let tables: Vec<&TableId> = self.tables.iter().collect();
        let mut subsets: Vec<Vec<&TableId>> = Vec::new();
        for mask in 1u32..(1u32 << tables.len().min(16)) {
            if mask.count_ones() as usize <= max_tables {
                subsets.push(tables.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, t)| *t).collect());
            }
        }
        let users: Vec<&PrincipalId> = self.users().collect();
        let comps: Vec<&PrincipalId> = self.components().collect();
        let mut out = Vec::new();
        for op in Op::ALL {
            for subset in &subsets {
                let mut selections = vec![Selection::All];
                if op != Op::Ins {
                    for t in subset {
                        for d in self.data.get(*t).into_iter().flatten() {
                            selections.push(Selection::Items([d.id.clone()].into()));
                        }
                    }
                }
                for u in &users {
                    for c in &comps {
                        if op == Op::Ins {
                            for owner in users.iter() {
                                let pending = subset
                                    .iter()
                                    .map(|t| DataItem::new(&format!("{t}#pending"), t, owner, c))
                                    .collect();
                                out.push(Request::new(op, subset.iter().cloned().cloned(), Selection::Pending(pending), u, c));
                            }
                            continue;
                        }
                        for s in &selections {
                            out.push(Request::new(op, subset.iter().cloned().cloned(), s.clone(), u, c));
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SoundnessReport {
    /// Requests evaluated.
    pub evaluated: usize,
    /// Requests the sandbox admitted.
    pub permitted: usize,
    pub violations: Vec<Violation>,
}

impl SoundnessReport {
    pub fn is_sound(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn merge(&mut self, other: SoundnessReport) {
        self.evaluated += other.evaluated;
        self.permitted += other.permitted;
        self.violations.extend(other.violations);
    }
}

/// A request the sandbox admits although the model rejects it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub request: String,
    /// Offending items with the first dimension that failed.
    pub items: Vec<(ItemId, String)>,
}
