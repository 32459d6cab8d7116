//! The `.db`-file dialect: local, input and output table declarations,
//! foreign keys, and the invariant-expression language guarding output
//! tables.
//!
//! ```text
//! TABLE groups ( gid KEY, name TINYTEXT, owner OWNER, public INT )
//!
//! INPUT TABLE data ( text TEXT  type VARCHAR(20)  key KEY  owner OWNER )
//!
//! OUTPUT TABLE all_groups (
//!   SELECT name, gid AS key, owner FROM groups
//!   INVARIANT ALL )
//! ```
//!
//! An output table without an `INVARIANT` clause is given `is(@uid, owner)`.

mod invariant;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::lex::{tokenize, Cursor, LexOptions, Pos, SyntaxError, Tok, Token};
use crate::sql::{self, Expr, Select, SelectItem, SqlError};
use crate::value::ColumnType;

pub use invariant::{parse_invariant, Arg, InvariantExpr};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("{0}")]
    Syntax(#[from] SyntaxError),
    #[error("{pos}: unsupported construct: {construct}")]
    Unsupported { pos: Pos, construct: String },
    #[error("{pos}: duplicate table `{name}`")]
    DuplicateTable { pos: Pos, name: String },
    #[error("{pos}: table `{table}`: {message}")]
    Markers { pos: Pos, table: String, message: String },
    #[error("{pos}: {message}")]
    Signature { pos: Pos, message: String },
}

impl SchemaError {
    pub fn pos(&self) -> Pos {
        match self {
            SchemaError::Syntax(e) => e.pos,
            SchemaError::Unsupported { pos, .. }
            | SchemaError::DuplicateTable { pos, .. }
            | SchemaError::Markers { pos, .. }
            | SchemaError::Signature { pos, .. } => *pos,
        }
    }
}

impl From<SqlError> for SchemaError {
    fn from(e: SqlError) -> Self {
        match e {
            SqlError::Syntax(s) => SchemaError::Syntax(s),
            SqlError::Unsupported { pos, construct } => SchemaError::Unsupported { pos, construct },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnDecl {
    pub name: String,
    pub ty: ColumnType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForeignKeyDecl {
    pub column: String,
    pub parent_table: String,
    pub parent_column: String,
    pub pos: Pos,
}

/// A local or input table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableDecl {
    pub name: String,
    pub columns: Vec<ColumnDecl>,
    pub foreign_keys: Vec<ForeignKeyDecl>,
    pub pos: Pos,
}

impl TableDecl {
    pub fn column(&self, name: &str) -> Option<&ColumnDecl> {
        self.columns.iter().find(|c| c.name == name)
    }

    fn marker(&self, ty: ColumnType) -> &str {
        self.columns.iter().find(|c| c.ty == ty).map(|c| c.name.as_str()).expect("validated marker column")
    }

    pub fn key_column(&self) -> &str {
        self.marker(ColumnType::Key)
    }

    pub fn owner_column(&self) -> &str {
        self.marker(ColumnType::Owner)
    }

    /// Columns a table predicate binds positionally: all but the KEY column.
    pub fn predicate_columns(&self) -> Vec<&str> {
        self.columns.iter().filter(|c| c.ty != ColumnType::Key).map(|c| c.name.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputTableDecl {
    pub name: String,
    pub query: Select,
    pub invariant: InvariantExpr,
    pub pos: Pos,
}

impl OutputTableDecl {
    /// Result column names in projection order.
    pub fn columns(&self) -> Vec<String> {
        self.query.projection.iter().filter_map(SelectItem::output_name).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SchemaDecl {
    pub funit: String,
    pub locals: Vec<TableDecl>,
    pub inputs: Vec<TableDecl>,
    pub outputs: Vec<OutputTableDecl>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    Local,
    Input,
    Output,
}

impl SchemaDecl {
    pub fn local(&self, name: &str) -> Option<&TableDecl> {
        self.locals.iter().find(|t| t.name == name)
    }

    pub fn input(&self, name: &str) -> Option<&TableDecl> {
        self.inputs.iter().find(|t| t.name == name)
    }

    pub fn output(&self, name: &str) -> Option<&OutputTableDecl> {
        self.outputs.iter().find(|t| t.name == name)
    }

    /// A local or input table; these are the tables queries may read.
    pub fn stored(&self, name: &str) -> Option<(&TableDecl, TableKind)> {
        self.local(name)
            .map(|t| (t, TableKind::Local))
            .or_else(|| self.input(name).map(|t| (t, TableKind::Input)))
    }

    pub fn kind(&self, name: &str) -> Option<TableKind> {
        self.stored(name).map(|(_, k)| k).or_else(|| self.output(name).map(|_| TableKind::Output))
    }

    pub fn table_names(&self) -> Vec<&str> {
        self.locals
            .iter()
            .chain(&self.inputs)
            .map(|t| t.name.as_str())
            .chain(self.outputs.iter().map(|o| o.name.as_str()))
            .collect()
    }

    /// Copy with every source position cleared, for structural comparison.
    pub fn normalized(&self) -> SchemaDecl {
        let mut d = self.clone();
        for t in d.locals.iter_mut().chain(d.inputs.iter_mut()) {
            t.pos = Pos::default();
            for fk in &mut t.foreign_keys {
                fk.pos = Pos::default();
            }
        }
        for o in &mut d.outputs {
            o.pos = Pos::default();
        }
        d
    }
}

fn write_table(f: &mut fmt::Formatter<'_>, t: &TableDecl) -> fmt::Result {
    writeln!(f, " (")?;
    let mut lines: Vec<String> = t.columns.iter().map(|c| format!("  {} {}", quote_ident(&c.name), c.ty)).collect();
    for fk in &t.foreign_keys {
        lines.push(format!(
            "  FOREIGN KEY ({}) REFERENCES {}({})",
            quote_ident(&fk.column),
            quote_ident(&fk.parent_table),
            quote_ident(&fk.parent_column)
        ));
    }
    writeln!(f, "{}", lines.join(",\n"))?;
    writeln!(f, ")")
}

impl fmt::Display for SchemaDecl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.locals {
            write!(f, "TABLE {}", quote_ident(&t.name))?;
            write_table(f, t)?;
        }
        for t in &self.inputs {
            write!(f, "INPUT TABLE {}", quote_ident(&t.name))?;
            write_table(f, t)?;
        }
        for o in &self.outputs {
            writeln!(f, "OUTPUT TABLE {} (", quote_ident(&o.name))?;
            writeln!(f, "  {}", o.query)?;
            writeln!(f, "  INVARIANT {} )", o.invariant)?;
        }
        Ok(())
    }
}

/// Backticks identifiers that would otherwise lex as keywords or operators.
pub(crate) fn quote_ident(name: &str) -> String {
    let plain = !name.is_empty()
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !name.starts_with(|c: char| c.is_ascii_digit())
        && !sql::is_reserved(name)
        && !["ALL", "TABLE", "INPUT", "OUTPUT", "LOCAL", "FOREIGN", "REFERENCES"]
            .iter()
            .any(|k| k.eq_ignore_ascii_case(name));
    if plain {
        name.to_owned()
    } else {
        format!("`{}`", name.replace('`', "``"))
    }
}

const STARTERS: &[&str] = &["TABLE", "LOCAL", "INPUT", "OUTPUT"];

/// Parses a `.db` file for component `funit`. Checks syntax, duplicate
/// table names and the KEY/OWNER marker rules; everything else is left to
/// [`validate_schema`].
pub fn parse_db_file(funit: &str, text: &str) -> Result<SchemaDecl, SchemaError> {
    let toks = tokenize(text, LexOptions { hash_comments: true, arrows: false })?;
    let mut c = Cursor::new(&toks, text);
    let mut decl = SchemaDecl { funit: funit.to_owned(), ..Default::default() };
    let mut seen: BTreeSet<String> = BTreeSet::new();
    while !c.at_end() {
        if c.eat(&Tok::Semi) {
            continue;
        }
        let pos = c.pos();
        let kind = if c.eat_kw("INPUT") {
            TableKind::Input
        } else if c.eat_kw("OUTPUT") {
            TableKind::Output
        } else {
            c.eat_kw("LOCAL");
            TableKind::Local
        };
        c.expect_kw("TABLE")?;
        let name = c.ident("table name")?;
        if !seen.insert(name.clone()) {
            return Err(SchemaError::DuplicateTable { pos, name });
        }
        match kind {
            TableKind::Output => decl.outputs.push(output_table(&mut c, &toks, text, name, pos)?),
            TableKind::Local | TableKind::Input => {
                let t = stored_table(&mut c, name, pos)?;
                check_markers(&t, kind)?;
                if kind == TableKind::Local {
                    decl.locals.push(t)
                } else {
                    decl.inputs.push(t)
                }
            }
        }
    }
    Ok(decl)
}

fn column_type(c: &mut Cursor<'_>) -> Result<ColumnType, SchemaError> {
    let pos = c.pos();
    let word = c.ident("column type")?;
    Ok(match word.to_ascii_uppercase().as_str() {
        "INT" | "INTEGER" => ColumnType::Int,
        "TINYTEXT" => ColumnType::TinyText,
        "TEXT" => ColumnType::Text,
        "KEY" => ColumnType::Key,
        "OWNER" => ColumnType::Owner,
        "VARCHAR" => {
            c.expect(&Tok::LParen)?;
            let n = match c.next() {
                Some(Token { tok: Tok::Int(n), pos, .. }) => {
                    u32::try_from(*n).ok().filter(|n| *n > 0).ok_or_else(|| SyntaxError::new(*pos, "VARCHAR length must be positive"))?
                }
                _ => return Err(c.unexpected("VARCHAR length").into()),
            };
            c.expect(&Tok::RParen)?;
            ColumnType::Varchar(n)
        }
        other => return Err(SyntaxError::new(pos, format!("unknown column type `{other}`")).into()),
    })
}

fn stored_table(c: &mut Cursor<'_>, name: String, pos: Pos) -> Result<TableDecl, SchemaError> {
    c.expect(&Tok::LParen)?;
    let mut t = TableDecl { name, columns: Vec::new(), foreign_keys: Vec::new(), pos };
    while !c.eat(&Tok::RParen) {
        if c.at_end() {
            return Err(c.unexpected("`)`").into());
        }
        if c.is_kw("FOREIGN") && c.peek_at(1).is_some_and(|t| t.is_kw("KEY")) {
            let pos = c.pos();
            c.next();
            c.next();
            c.expect(&Tok::LParen)?;
            let column = c.ident("column name")?;
            c.expect(&Tok::RParen)?;
            c.expect_kw("REFERENCES")?;
            let parent_table = c.ident("table name")?;
            c.expect(&Tok::LParen)?;
            let parent_column = c.ident("column name")?;
            c.expect(&Tok::RParen)?;
            t.foreign_keys.push(ForeignKeyDecl { column, parent_table, parent_column, pos });
        } else {
            let pos = c.pos();
            let name = c.ident("column name")?;
            if t.column(&name).is_some() {
                return Err(SchemaError::Markers { pos, table: t.name.clone(), message: format!("duplicate column `{name}`") });
            }
            let ty = column_type(c)?;
            t.columns.push(ColumnDecl { name, ty });
        }
        c.eat(&Tok::Comma);
    }
    Ok(t)
}

fn check_markers(t: &TableDecl, kind: TableKind) -> Result<(), SchemaError> {
    let what = if kind == TableKind::Input { "input table" } else { "table" };
    for (marker, label) in [(ColumnType::Key, "KEY"), (ColumnType::Owner, "OWNER")] {
        let n = t.columns.iter().filter(|c| c.ty == marker).count();
        if n != 1 {
            return Err(SchemaError::Markers {
                pos: t.pos,
                table: t.name.clone(),
                message: format!("{what} must declare exactly one {label} column, found {n}"),
            });
        }
    }
    Ok(())
}

fn output_table(
    c: &mut Cursor<'_>,
    toks: &[Token],
    text: &str,
    name: String,
    pos: Pos,
) -> Result<OutputTableDecl, SchemaError> {
    if c.eat(&Tok::LParen) {
        let query = sql::parse_select_at(c)?;
        let invariant = if c.eat_kw("INVARIANT") { invariant::parse_at(c)? } else { InvariantExpr::default_for_owner() };
        c.expect(&Tok::RParen)?;
        return Ok(OutputTableDecl { name, query, invariant, pos });
    }
    c.expect(&Tok::Eq)?;
    // The body runs to a `;` or to the next declaration starting a line.
    let start = c.i;
    let mut end = start;
    let mut depth = 0i32;
    while end < toks.len() {
        let t = &toks[end];
        match t.tok {
            Tok::LParen => depth += 1,
            Tok::RParen => depth -= 1,
            Tok::Semi if depth == 0 => break,
            _ => {}
        }
        let line_start = end == start || toks[end - 1].pos.line != t.pos.line;
        if depth == 0 && end > start && line_start && STARTERS.iter().any(|k| t.is_kw(k)) {
            break;
        }
        end += 1;
    }
    let body = &toks[start..end];
    let mut sub = Cursor::new(body, text);
    let query = sql::parse_select_at(&mut sub)?;
    let invariant = if sub.eat_kw("INVARIANT") { invariant::parse_at(&mut sub)? } else { InvariantExpr::default_for_owner() };
    if !sub.at_end() {
        return Err(sub.unexpected("INVARIANT or end of output table").into());
    }
    c.i = end;
    Ok(OutputTableDecl { name, query, invariant, pos })
}

/// One validation finding, rendered as `file:line:col: message`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub pos: Pos,
    pub message: String,
}

impl Diagnostic {
    fn new(pos: Pos, message: impl Into<String>) -> Self {
        Self { pos, message: message.into() }
    }

    pub fn render(&self, file: &str) -> String {
        format!("{file}:{}: {}", self.pos, self.message)
    }
}

/// Tables of already-integrated components, by component.
pub type Catalog = BTreeMap<String, BTreeSet<String>>;

/// Component and table names must stay within `[A-Za-z0-9_]`, be non-empty,
/// avoid `__` and neither start nor end with `_`, which keeps the physical
/// prefixing scheme injective.
pub fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !name.contains("__")
        && !name.starts_with('_')
        && !name.ends_with('_')
}

pub fn validate_schema(decl: &SchemaDecl, catalog: &Catalog) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if !valid_name(&decl.funit) {
        out.push(Diagnostic::new(Pos::default(), format!("component name `{}` is not a valid identifier", decl.funit)));
    }
    for (t, kind) in decl.locals.iter().map(|t| (t, TableKind::Local)).chain(decl.inputs.iter().map(|t| (t, TableKind::Input))) {
        if !valid_name(&t.name) {
            out.push(Diagnostic::new(t.pos, format!("table name `{}` is not a valid identifier", t.name)));
        }
        if let Err(e) = check_markers(t, kind) {
            out.push(Diagnostic::new(e.pos(), e.to_string()));
        }
        if kind == TableKind::Input && !t.foreign_keys.is_empty() {
            out.push(Diagnostic::new(t.foreign_keys[0].pos, format!("input table `{}` cannot declare foreign keys", t.name)));
        }
        for fk in &t.foreign_keys {
            if t.column(&fk.column).is_none() {
                out.push(Diagnostic::new(fk.pos, format!("foreign key column `{}` is not a column of `{}`", fk.column, t.name)));
            }
            match decl.stored(&fk.parent_table) {
                None => out.push(Diagnostic::new(
                    fk.pos,
                    format!("foreign key parent `{}` is not a local or input table of {}", fk.parent_table, decl.funit),
                )),
                Some((parent, _)) => {
                    if parent.columns.iter().filter(|c| c.ty == ColumnType::Key).all(|c| c.name != fk.parent_column) {
                        out.push(Diagnostic::new(
                            fk.pos,
                            format!("foreign key must reference the KEY column of `{}`", fk.parent_table),
                        ));
                    }
                }
            }
        }
    }
    if let Some(cycle) = fk_cycle(decl) {
        out.push(Diagnostic::new(Pos::default(), format!("foreign key cycle: {}", cycle.join(" -> "))));
    }
    for o in &decl.outputs {
        if !valid_name(&o.name) {
            out.push(Diagnostic::new(o.pos, format!("table name `{}` is not a valid identifier", o.name)));
        }
        validate_output(decl, o, catalog, &mut out);
    }
    out
}

fn fk_cycle(decl: &SchemaDecl) -> Option<Vec<String>> {
    let edges: BTreeMap<&str, Vec<&str>> = decl
        .locals
        .iter()
        .map(|t| (t.name.as_str(), t.foreign_keys.iter().map(|f| f.parent_table.as_str()).collect()))
        .collect();
    fn visit<'a>(
        n: &'a str,
        edges: &BTreeMap<&'a str, Vec<&'a str>>,
        state: &mut BTreeMap<&'a str, u8>,
        stack: &mut Vec<&'a str>,
    ) -> Option<Vec<String>> {
        match state.get(n) {
            Some(2) => return None,
            Some(1) => {
                let from = stack.iter().position(|s| *s == n).unwrap();
                let mut cyc: Vec<String> = stack[from..].iter().map(|s| s.to_string()).collect();
                cyc.push(n.to_owned());
                return Some(cyc);
            }
            _ => {}
        }
        state.insert(n, 1);
        stack.push(n);
        for m in edges.get(n).into_iter().flatten() {
            if let Some(c) = visit(m, edges, state, stack) {
                return Some(c);
            }
        }
        stack.pop();
        state.insert(n, 2);
        None
    }
    let mut state = BTreeMap::new();
    for n in edges.keys() {
        if let Some(c) = visit(n, &edges, &mut state, &mut Vec::new()) {
            return Some(c);
        }
    }
    None
}

fn validate_output(decl: &SchemaDecl, o: &OutputTableDecl, catalog: &Catalog, out: &mut Vec<Diagnostic>) {
    let q = &o.query;
    let mut sources = Vec::new();
    for f in &q.from {
        match decl.stored(&f.table) {
            Some((t, _)) => sources.push((f.binding().to_owned(), t)),
            None => {
                let owner = catalog.iter().find(|(c, ts)| *c != &decl.funit && ts.contains(&f.table)).map(|(c, _)| c);
                let message = match (owner, decl.output(&f.table)) {
                    (Some(c), _) => format!(
                        "output table `{}` reads `{}` of component {c}; queries are restricted to {}'s own tables",
                        o.name, f.table, decl.funit
                    ),
                    (None, Some(_)) => format!("output table `{}` cannot read output table `{}`", o.name, f.table),
                    (None, None) => format!("output table `{}` reads unknown table `{}`", o.name, f.table),
                };
                out.push(Diagnostic::new(o.pos, message));
            }
        }
    }
    if q.has_nested_select() {
        out.push(Diagnostic::new(o.pos, format!("output table `{}` must not contain nested SELECTs", o.name)));
    }
    if q.is_aggregate() {
        out.push(Diagnostic::new(o.pos, format!("output table `{}` must not aggregate rows", o.name)));
    }
    if q.projection.iter().any(|p| matches!(p, SelectItem::Wildcard)) {
        out.push(Diagnostic::new(o.pos, format!("output table `{}` must list its columns explicitly", o.name)));
    }
    if sources.len() == q.from.len() {
        for e in q.exprs() {
            e.walk(&mut |e| match e {
                Expr::Column(c) => {
                    let found = match &c.qualifier {
                        Some(qual) => sources.iter().any(|(b, t)| b == qual && t.column(&c.name).is_some()),
                        None => sources.iter().any(|(_, t)| t.column(&c.name).is_some()),
                    };
                    if !found {
                        out.push(Diagnostic::new(o.pos, format!("output table `{}`: unknown column `{}`", o.name, c.name)));
                    }
                }
                Expr::Var(v) if !v.eq_ignore_ascii_case("uid") => {
                    out.push(Diagnostic::new(o.pos, format!("output table `{}`: unknown variable `@{v}`", o.name)));
                }
                _ => {}
            });
        }
    }
    let cols = o.columns();
    let mut seen = BTreeSet::new();
    for c in &cols {
        if !seen.insert(c) {
            out.push(Diagnostic::new(o.pos, format!("output table `{}` projects `{c}` twice", o.name)));
        }
    }
    for required in ["key", "owner"] {
        if !cols.iter().any(|c| c == required) {
            out.push(Diagnostic::new(o.pos, format!("output table `{}` must project a `{required}` column", o.name)));
        }
    }
    o.invariant.visit(&mut |node| match node {
        InvariantExpr::Is(a, b) => {
            for arg in [a, b] {
                if let Arg::Column(c) = arg {
                    if !cols.contains(c) {
                        out.push(Diagnostic::new(
                            o.pos,
                            format!("invariant of `{}` names column `{c}` absent from the projection", o.name),
                        ));
                    }
                }
            }
        }
        InvariantExpr::Pred { table, args, .. } => {
            for arg in args {
                if let Arg::Column(c) = arg {
                    if !cols.contains(c) {
                        out.push(Diagnostic::new(
                            o.pos,
                            format!("invariant of `{}` names column `{c}` absent from the projection", o.name),
                        ));
                    }
                }
            }
            match decl.stored(table) {
                None => out.push(Diagnostic::new(
                    o.pos,
                    format!("invariant predicate `{table}` is not a local or input table of {}", decl.funit),
                )),
                Some((t, _)) => {
                    let arity = t.predicate_columns().len();
                    if arity != args.len() {
                        out.push(Diagnostic::new(
                            o.pos,
                            format!("invariant predicate `{table}` takes {arity} arguments, given {}", args.len()),
                        ));
                    }
                }
            }
        }
        _ => {}
    });
    if out.is_empty() {
        if let Err(e) = output_signature(decl, o) {
            out.push(Diagnostic::new(e.pos(), e.to_string()));
        }
    }
}

/// Column names and inferred types of an output table.
pub fn output_signature(decl: &SchemaDecl, o: &OutputTableDecl) -> Result<Vec<(String, ColumnType)>, SchemaError> {
    let sources: Vec<(&str, &TableDecl)> =
        o.query.from.iter().filter_map(|f| decl.stored(&f.table).map(|(t, _)| (f.binding(), t))).collect();
    let err = |message: String| SchemaError::Signature { pos: o.pos, message };
    let mut sig = Vec::new();
    for item in &o.query.projection {
        let SelectItem::Expr { expr, .. } = item else {
            return Err(err(format!("output table `{}`: cannot infer the type of `*`", o.name)));
        };
        let name = item.output_name().unwrap();
        let ty = infer(expr, &sources).ok_or_else(|| err(format!("output table `{}`: cannot infer the type of `{name}`", o.name)))?;
        sig.push((name, ty));
    }
    Ok(sig)
}

fn infer(e: &Expr, sources: &[(&str, &TableDecl)]) -> Option<ColumnType> {
    use crate::value::Value;
    match e {
        Expr::Literal(Value::Text(_)) => Some(ColumnType::Text),
        Expr::Literal(Value::Int(_)) => Some(ColumnType::Int),
        Expr::Literal(Value::Null) => None,
        Expr::Column(c) => sources
            .iter()
            .filter(|(b, _)| c.qualifier.as_deref().is_none_or(|q| q == *b))
            .find_map(|(_, t)| t.column(&c.name))
            .map(|c| c.ty),
        Expr::Var(_) => Some(ColumnType::Text),
        Expr::Call { func: sql::Func::Length, .. } | Expr::Count(_) | Expr::Neg(_) => Some(ColumnType::Int),
        Expr::Call { func: sql::Func::Coalesce, args } => args.iter().find_map(|a| infer(a, sources)),
        Expr::Call { .. } => Some(ColumnType::Text),
        Expr::Binary { .. } | Expr::Not(_) | Expr::Like { .. } | Expr::IsNull { .. } | Expr::InList { .. } => {
            Some(ColumnType::Int)
        }
        Expr::InSelect { .. } | Expr::Exists { .. } | Expr::Subquery(_) => None,
    }
}
