//! Wirings from output tables into input tables: validation, restricted
//! views compiled from output-table invariants, and input tables compiled
//! into a union of mapped branches.

pub(crate) mod fk;
mod restriction;
mod spec;

use std::collections::BTreeMap;

use crate::graph::EcosystemGraph;
use crate::schema::{output_signature, ColumnDecl, Diagnostic, SchemaDecl};
use crate::sandbox::names::physical_name;
use crate::sql::{Expr, Select};
use crate::value::ColumnType;

pub use restriction::{compile_restriction, RestrictionError, PRED_BINDING, ROW_BINDING};
pub use spec::{parse_wirings, Endpoint, Mapping, WiringSpec};

/// Integrated schemas by component name.
pub type Schemas = BTreeMap<String, SchemaDecl>;

fn compatible(target: ColumnType, source: ColumnType) -> bool {
    match target {
        ColumnType::Int => source == ColumnType::Int,
        _ => true,
    }
}

/// Checks that `spec` maps every target column exactly once with
/// compatible types, that KEY and OWNER carry the source's key and owner,
/// and that the implied sharing edge keeps the combined graph acyclic.
pub fn check_wiring(spec: &WiringSpec, schemas: &Schemas, graph: &EcosystemGraph) -> Vec<Diagnostic> {
    let d = |m: String| Diagnostic { pos: spec.pos, message: m };
    let mut out = Vec::new();
    let source = schemas.get(&spec.source.component);
    let target = schemas.get(&spec.target.component);
    let Some(source) = source else {
        return vec![d(format!("unknown component `{}`", spec.source.component))];
    };
    let Some(target) = target else {
        return vec![d(format!("unknown component `{}`", spec.target.component))];
    };
    let Some(output) = source.output(&spec.source.table) else {
        return vec![d(format!("`{}` is not an output table", spec.source))];
    };
    let Some(input) = target.input(&spec.target.table) else {
        return vec![d(format!("`{}` is not an input table", spec.target))];
    };
    let signature = match output_signature(source, output) {
        Ok(s) => s,
        Err(e) => return vec![d(e.to_string())],
    };
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for (col, _) in &spec.column_map {
        *counts.entry(col).or_default() += 1;
        if input.column(col).is_none() {
            out.push(d(format!("`{col}` is not a column of {}", spec.target)));
        }
    }
    for (col, n) in counts {
        if n > 1 {
            out.push(d(format!("`{col}` mapped {n} times")));
        }
    }
    for tc in &input.columns {
        let Some(m) = spec.mapping(&tc.name) else {
            out.push(d(format!("unmapped column `{}` of {}", tc.name, spec.target)));
            continue;
        };
        match (tc.ty, m) {
            (ColumnType::Key | ColumnType::Owner, Mapping::Constant(_)) => {
                out.push(d(format!("{} column `{}` must map a source column, not a constant", tc.ty, tc.name)));
            }
            (ColumnType::Key, Mapping::Column(c)) if c != "key" => {
                out.push(d(format!("KEY column `{}` must map the source's `key`, not `{c}`", tc.name)));
            }
            (ColumnType::Owner, Mapping::Column(c)) if c != "owner" => {
                out.push(d(format!("OWNER column `{}` must map the source's `owner`, not `{c}`", tc.name)));
            }
            (ty, Mapping::Constant(v)) => {
                if let Err(e) = ty.coerce(v.clone()) {
                    out.push(d(format!("type mismatch for `{}`: {e}", tc.name)));
                }
            }
            (ty, Mapping::Column(c)) => match signature.iter().find(|(n, _)| n == c) {
                None => out.push(d(format!("`{c}` is not a column of {}", spec.source))),
                Some((_, st)) if !compatible(ty, *st) => {
                    out.push(d(format!("type mismatch: `{}` is {ty} but `{c}` is {st}", tc.name)));
                }
                Some(_) => {}
            },
        }
    }
    if let Err(e) = graph.check_sharing(&spec.source.component, &spec.target.component) {
        out.push(d(e.to_string()));
    }
    out
}

/// One wiring's contribution to an input view.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub source: Endpoint,
    /// Prefix of namespaced keys: the source component, suffixed `#n` when
    /// the component feeds this input through more than one wiring.
    pub key_prefix: String,
    /// The source's output query over physical tables.
    pub query: Select,
    pub output_columns: Vec<String>,
    /// Row condition from the output table's invariant, over physical
    /// tables, with the output row bound as [`ROW_BINDING`].
    pub restriction: Expr,
    /// Target columns in declaration order with their feed. Constants are
    /// already coerced to the target type.
    pub columns: Vec<(String, Mapping)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledInputView {
    pub target: Endpoint,
    pub columns: Vec<ColumnDecl>,
    pub key_column: String,
    pub owner_column: String,
    pub branches: Vec<Branch>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CompileError {
    #[error("unknown table {0}")]
    Unknown(String),
    #[error("{0}")]
    Restriction(#[from] RestrictionError),
    #[error("{0}")]
    Invalid(String),
}

/// The restricted view of an output table: its query and invariant
/// condition with tables prefixed for the declaring component.
pub fn restricted_view(schema: &SchemaDecl, output: &str) -> Result<(Select, Expr), CompileError> {
    let o = schema.output(output).ok_or_else(|| CompileError::Unknown(format!("{}.{output}", schema.funit)))?;
    let mut query = o.query.clone();
    let funit = schema.funit.clone();
    query.rename_tables(&mut |t| physical_name(&funit, t));
    let mut cond = compile_restriction(&o.invariant, &o.columns(), schema)?;
    prefix_expr(&mut cond, &funit);
    Ok((query, cond))
}

fn prefix_expr(e: &mut Expr, funit: &str) {
    e.sub_selects_mut(&mut |s| s.rename_tables(&mut |t| physical_name(funit, t)));
}

/// Compiles `target` into one branch per wiring, in the given order.
pub fn compile_input_view(target: &Endpoint, wirings: &[&WiringSpec], schemas: &Schemas) -> Result<CompiledInputView, CompileError> {
    let schema = schemas.get(&target.component).ok_or_else(|| CompileError::Unknown(target.to_string()))?;
    let decl = schema.input(&target.table).ok_or_else(|| CompileError::Unknown(target.to_string()))?;
    let mut branches = Vec::new();
    for (i, w) in wirings.iter().enumerate() {
        if &w.target != target {
            return Err(CompileError::Invalid(format!("wiring into {} compiled for {target}", w.target)));
        }
        let source = schemas.get(&w.source.component).ok_or_else(|| CompileError::Unknown(w.source.to_string()))?;
        let (query, restriction) = restricted_view(source, &w.source.table)?;
        let same: Vec<usize> = wirings.iter().enumerate().filter(|(_, x)| x.source.component == w.source.component).map(|(j, _)| j).collect();
        let key_prefix = if same.len() > 1 {
            format!("{}#{}", w.source.component, same.iter().position(|j| *j == i).unwrap() + 1)
        } else {
            w.source.component.clone()
        };
        let mut columns = Vec::new();
        for c in &decl.columns {
            let m = w.mapping(&c.name).ok_or_else(|| CompileError::Invalid(format!("unmapped column `{}`", c.name)))?;
            let m = match m {
                Mapping::Constant(v) => Mapping::Constant(c.ty.coerce(v.clone()).map_err(CompileError::Invalid)?),
                m => m.clone(),
            };
            columns.push((c.name.clone(), m));
        }
        let output_columns = source.output(&w.source.table).unwrap().columns();
        branches.push(Branch { source: w.source.clone(), key_prefix, query, output_columns, restriction, columns });
    }
    Ok(CompiledInputView {
        target: target.clone(),
        columns: decl.columns.clone(),
        key_column: decl.key_column().to_owned(),
        owner_column: decl.owner_column().to_owned(),
        branches,
    })
}

#[cfg(test)]
mod tests;
