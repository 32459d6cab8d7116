//! The SQL subset accepted by the monitor: SELECT (single table or joins of
//! own tables, WHERE, aliases, LIKE/LOWER/UPPER/CONCAT, scalar, EXISTS and IN
//! sub-selects, ORDER BY, LIMIT, COUNT), INSERT ... VALUES, UPDATE ... SET
//! and DELETE. Anything else is rejected with an explicit unsupported error.

use std::fmt;

use thiserror::Error;

use crate::lex::{tokenize, Cursor, LexOptions, Pos, SyntaxError, Tok, Token};
use crate::model::Op;
use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SqlError {
    #[error("syntax error at {0}")]
    Syntax(#[from] SyntaxError),
    #[error("unsupported construct at {pos}: {construct}")]
    Unsupported { pos: Pos, construct: String },
}

/// Words that never parse as bare identifiers.
const RESERVED: &[&str] = &[
    "SELECT", "FROM", "WHERE", "AND", "OR", "NOT", "AS", "INSERT", "INTO", "VALUES", "UPDATE", "SET",
    "DELETE", "NULL", "LIKE", "IS", "IN", "EXISTS", "JOIN", "INNER", "ON", "ORDER", "BY", "ASC", "DESC",
    "LIMIT", "INVARIANT", "GROUP", "HAVING", "UNION", "DISTINCT", "LEFT", "RIGHT", "OUTER", "CROSS", "FULL",
    "OFFSET", "INTERSECT", "EXCEPT",
];

/// Statement keywords outside the subset.
const UNSUPPORTED_STATEMENTS: &[&str] = &[
    "CREATE", "DROP", "ALTER", "GRANT", "REVOKE", "TRUNCATE", "REPLACE", "CALL", "SHOW", "USE", "LOCK",
    "UNLOCK", "BEGIN", "COMMIT", "ROLLBACK", "START", "WITH", "EXPLAIN", "DESCRIBE", "LOAD", "HANDLER", "DO",
];

pub fn is_reserved(word: &str) -> bool {
    RESERVED.iter().any(|k| k.eq_ignore_ascii_case(word))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnRef {
    pub qualifier: Option<String>,
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Or,
    And,
    Eq,
    NotEq,
    Lt,
    LtEq,
    Gt,
    GtEq,
    NullSafeEq,
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Or => "OR",
            BinOp::And => "AND",
            BinOp::Eq => "=",
            BinOp::NotEq => "<>",
            BinOp::Lt => "<",
            BinOp::LtEq => "<=",
            BinOp::Gt => ">",
            BinOp::GtEq => ">=",
            BinOp::NullSafeEq => "<=>",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Concat,
    Lower,
    Upper,
    Length,
    Coalesce,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name.to_ascii_uppercase().as_str() {
            "CONCAT" => Func::Concat,
            "LOWER" | "LCASE" => Func::Lower,
            "UPPER" | "UCASE" => Func::Upper,
            "LENGTH" | "CHAR_LENGTH" => Func::Length,
            "COALESCE" | "IFNULL" => Func::Coalesce,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Concat => "CONCAT",
            Func::Lower => "LOWER",
            Func::Upper => "UPPER",
            Func::Length => "LENGTH",
            Func::Coalesce => "COALESCE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Literal(Value),
    Column(ColumnRef),
    /// Session variable such as `@uid`.
    Var(String),
    Not(Box<Expr>),
    Neg(Box<Expr>),
    Binary { op: BinOp, left: Box<Expr>, right: Box<Expr> },
    Like { expr: Box<Expr>, pattern: Box<Expr>, negated: bool },
    IsNull { expr: Box<Expr>, negated: bool },
    InList { expr: Box<Expr>, list: Vec<Expr>, negated: bool },
    InSelect { expr: Box<Expr>, select: Box<Select>, negated: bool },
    Exists { select: Box<Select>, negated: bool },
    Subquery(Box<Select>),
    Call { func: Func, args: Vec<Expr> },
    /// `COUNT(*)` when the argument is `None`.
    Count(Option<Box<Expr>>),
}

impl Expr {
    pub fn column(name: &str) -> Self {
        Expr::Column(ColumnRef { qualifier: None, name: name.to_owned() })
    }

    pub fn binary(op: BinOp, left: Expr, right: Expr) -> Self {
        Expr::Binary { op, left: Box::new(left), right: Box::new(right) }
    }

    pub fn is_aggregate(&self) -> bool {
        matches!(self, Expr::Count(_))
    }

    fn contains_aggregate(&self) -> bool {
        let mut found = false;
        self.walk(&mut |e| found |= e.is_aggregate());
        found
    }

    /// Visits this expression and every sub-expression, not descending into
    /// sub-selects.
    pub fn walk(&self, f: &mut dyn FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Literal(_) | Expr::Column(_) | Expr::Var(_) | Expr::Subquery(_) | Expr::Exists { .. } => {}
            Expr::Not(e) | Expr::Neg(e) | Expr::IsNull { expr: e, .. } | Expr::InSelect { expr: e, .. } => e.walk(f),
            Expr::Count(e) => {
                if let Some(e) = e {
                    e.walk(f)
                }
            }
            Expr::Binary { left, right, .. } => {
                left.walk(f);
                right.walk(f);
            }
            Expr::Like { expr, pattern, .. } => {
                expr.walk(f);
                pattern.walk(f);
            }
            Expr::InList { expr, list, .. } => {
                expr.walk(f);
                list.iter().for_each(|e| e.walk(f));
            }
            Expr::Call { args, .. } => args.iter().for_each(|e| e.walk(f)),
        }
    }

    /// Direct sub-selects of this expression tree (not nested ones).
    pub fn sub_selects(&self) -> Vec<&Select> {
        fn go<'a>(e: &'a Expr, out: &mut Vec<&'a Select>) {
            match e {
                Expr::Subquery(s) | Expr::Exists { select: s, .. } => out.push(s),
                Expr::InSelect { expr, select, .. } => {
                    go(expr, out);
                    out.push(select);
                }
                Expr::Literal(_) | Expr::Column(_) | Expr::Var(_) => {}
                Expr::Not(e) | Expr::Neg(e) | Expr::IsNull { expr: e, .. } => go(e, out),
                Expr::Count(e) => {
                    if let Some(e) = e {
                        go(e, out)
                    }
                }
                Expr::Binary { left, right, .. } => {
                    go(left, out);
                    go(right, out);
                }
                Expr::Like { expr, pattern, .. } => {
                    go(expr, out);
                    go(pattern, out);
                }
                Expr::InList { expr, list, .. } => {
                    go(expr, out);
                    list.iter().for_each(|e| go(e, out));
                }
                Expr::Call { args, .. } => args.iter().for_each(|e| go(e, out)),
            }
        }
        let mut out = Vec::new();
        go(self, &mut out);
        out
    }

    pub(crate) fn sub_selects_mut(&mut self, f: &mut dyn FnMut(&mut Select)) {
        match self {
            Expr::Subquery(s) | Expr::Exists { select: s, .. } => f(s),
            Expr::InSelect { expr, select, .. } => {
                expr.sub_selects_mut(f);
                f(select);
            }
            Expr::Literal(_) | Expr::Column(_) | Expr::Var(_) => {}
            Expr::Not(e) | Expr::Neg(e) | Expr::IsNull { expr: e, .. } => e.sub_selects_mut(f),
            Expr::Count(e) => {
                if let Some(e) = e {
                    e.sub_selects_mut(f)
                }
            }
            Expr::Binary { left, right, .. } => {
                left.sub_selects_mut(f);
                right.sub_selects_mut(f);
            }
            Expr::Like { expr, pattern, .. } => {
                expr.sub_selects_mut(f);
                pattern.sub_selects_mut(f);
            }
            Expr::InList { expr, list, .. } => {
                expr.sub_selects_mut(f);
                list.iter_mut().for_each(|e| e.sub_selects_mut(f));
            }
            Expr::Call { args, .. } => args.iter_mut().for_each(|e| e.sub_selects_mut(f)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SelectItem {
    Wildcard,
    Expr { expr: Expr, alias: Option<String> },
}

impl SelectItem {
    /// Result column name: the alias, else the column name, else the
    /// rendered expression.
    pub fn output_name(&self) -> Option<String> {
        match self {
            SelectItem::Wildcard => None,
            SelectItem::Expr { alias: Some(a), .. } => Some(a.clone()),
            SelectItem::Expr { expr: Expr::Column(c), .. } => Some(c.name.clone()),
            SelectItem::Expr { expr, .. } => Some(expr.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FromItem {
    pub table: String,
    pub alias: Option<String>,
    /// Join condition for `JOIN ... ON`; comma joins carry `None`.
    pub on: Option<Expr>,
}

impl FromItem {
    /// Name used to qualify columns of this item.
    pub fn binding(&self) -> &str {
        self.alias.as_deref().unwrap_or(&self.table)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderItem {
    pub expr: Expr,
    pub desc: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Select {
    pub projection: Vec<SelectItem>,
    pub from: Vec<FromItem>,
    pub selection: Option<Expr>,
    pub order_by: Vec<OrderItem>,
    pub limit: Option<u64>,
}

impl Select {
    pub fn is_aggregate(&self) -> bool {
        self.projection
            .iter()
            .any(|p| matches!(p, SelectItem::Expr { expr, .. } if expr.contains_aggregate()))
    }

    /// Every expression owned directly by this select.
    pub fn exprs(&self) -> Vec<&Expr> {
        let mut out = Vec::new();
        for p in &self.projection {
            if let SelectItem::Expr { expr, .. } = p {
                out.push(expr);
            }
        }
        for f in &self.from {
            if let Some(on) = &f.on {
                out.push(on);
            }
        }
        out.extend(self.selection.iter());
        out.extend(self.order_by.iter().map(|o| &o.expr));
        out
    }

    fn exprs_mut(&mut self) -> Vec<&mut Expr> {
        let mut out = Vec::new();
        for p in &mut self.projection {
            if let SelectItem::Expr { expr, .. } = p {
                out.push(expr);
            }
        }
        for f in &mut self.from {
            if let Some(on) = &mut f.on {
                out.push(on);
            }
        }
        out.extend(self.selection.iter_mut());
        out.extend(self.order_by.iter_mut().map(|o| &mut o.expr));
        out
    }

    /// Tables named anywhere in this select, including nested sub-selects.
    pub fn tables(&self) -> Vec<String> {
        let mut out: Vec<String> = self.from.iter().map(|f| f.table.clone()).collect();
        for e in self.exprs() {
            for s in e.sub_selects() {
                out.extend(s.tables());
            }
        }
        out
    }

    /// Applies `f` to every table name, including nested sub-selects.
    pub fn rename_tables(&mut self, f: &mut dyn FnMut(&str) -> String) {
        for item in &mut self.from {
            if item.alias.is_none() {
                item.alias = Some(item.table.clone());
            }
            item.table = f(&item.table);
        }
        for e in self.exprs_mut() {
            e.sub_selects_mut(&mut |s| s.rename_tables(f));
        }
    }

    pub fn has_nested_select(&self) -> bool {
        self.exprs().iter().any(|e| !e.sub_selects().is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Insert {
    pub table: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Expr>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Update {
    pub table: String,
    pub assignments: Vec<(String, Expr)>,
    pub selection: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delete {
    pub table: String,
    pub selection: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Statement {
    Select(Select),
    Insert(Insert),
    Update(Update),
    Delete(Delete),
}

/// A parsed statement with its operation class. Modifying statements carry
/// their embedded sub-selects as separate SEL sub-requests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryAst {
    pub op: Op,
    pub statement: Statement,
}

impl QueryAst {
    /// The single target table of a modification, or `None` for SEL.
    pub fn target(&self) -> Option<&str> {
        match &self.statement {
            Statement::Select(_) => None,
            Statement::Insert(i) => Some(&i.table),
            Statement::Update(u) => Some(&u.table),
            Statement::Delete(d) => Some(&d.table),
        }
    }

    /// Sub-selects embedded in a modifying statement, each a SEL sub-request.
    /// A SELECT is already single-valued and yields none.
    pub fn sub_requests(&self) -> Vec<&Select> {
        let exprs: Vec<&Expr> = match &self.statement {
            Statement::Select(_) => return Vec::new(),
            Statement::Insert(i) => i.rows.iter().flatten().collect(),
            Statement::Update(u) => u.assignments.iter().map(|(_, e)| e).chain(u.selection.iter()).collect(),
            Statement::Delete(d) => d.selection.iter().collect(),
        };
        exprs.into_iter().flat_map(|e| e.sub_selects()).collect()
    }

    /// Every logical table the statement touches, in first-seen order.
    pub fn tables(&self) -> Vec<String> {
        let mut out = Vec::new();
        match &self.statement {
            Statement::Select(s) => out.extend(s.tables()),
            _ => {
                out.push(self.target().unwrap().to_owned());
                for s in self.sub_requests() {
                    out.extend(s.tables());
                }
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        out.retain(|t| seen.insert(t.clone()));
        out
    }

    /// Rewrites every table name; used by the query sandbox.
    pub fn rename_tables(&mut self, f: &mut dyn FnMut(&str) -> String) {
        let exprs: Vec<&mut Expr> = match &mut self.statement {
            Statement::Select(s) => {
                s.rename_tables(f);
                return;
            }
            Statement::Insert(i) => {
                i.table = f(&i.table);
                i.rows.iter_mut().flatten().collect()
            }
            Statement::Update(u) => {
                u.table = f(&u.table);
                u.assignments.iter_mut().map(|(_, e)| e).chain(u.selection.iter_mut()).collect()
            }
            Statement::Delete(d) => {
                d.table = f(&d.table);
                d.selection.iter_mut().collect()
            }
        };
        for e in exprs {
            e.sub_selects_mut(&mut |s| s.rename_tables(f));
        }
    }
}

pub fn parse_query(text: &str) -> Result<QueryAst, SqlError> {
    let toks = tokenize(text, LexOptions::default())?;
    let mut p = Parser { c: Cursor::new(&toks, text) };
    let first = p.c.peek().ok_or_else(|| SqlError::Syntax(p.c.error("empty statement")))?;
    let statement = if first.is_kw("SELECT") {
        Statement::Select(p.select()?)
    } else if first.is_kw("INSERT") {
        Statement::Insert(p.insert()?)
    } else if first.is_kw("UPDATE") {
        Statement::Update(p.update()?)
    } else if first.is_kw("DELETE") {
        Statement::Delete(p.delete()?)
    } else if let Tok::Ident(w) = &first.tok {
        if UNSUPPORTED_STATEMENTS.iter().any(|k| k.eq_ignore_ascii_case(w)) {
            return Err(unsupported(first.pos, format!("{} statement", w.to_ascii_uppercase())));
        }
        return Err(p.c.unexpected("SELECT, INSERT, UPDATE or DELETE").into());
    } else {
        return Err(p.c.unexpected("SELECT, INSERT, UPDATE or DELETE").into());
    };
    p.c.eat(&Tok::Semi);
    if let Some(t) = p.c.peek() {
        if p.c.i > 0 && toks[p.c.i - 1].tok == Tok::Semi {
            return Err(unsupported(t.pos, "multiple statements"));
        }
        if t.is_kw("UNION") || t.is_kw("INTERSECT") || t.is_kw("EXCEPT") {
            return Err(unsupported(t.pos, t.tok.to_string()));
        }
        if t.is_kw("GROUP") || t.is_kw("HAVING") || t.is_kw("OFFSET") {
            return Err(unsupported(t.pos, t.tok.to_string()));
        }
        return Err(p.c.unexpected("end of statement").into());
    }
    let op = match &statement {
        Statement::Select(_) => Op::Sel,
        Statement::Insert(_) => Op::Ins,
        Statement::Update(_) => Op::Upd,
        Statement::Delete(_) => Op::Del,
    };
    Ok(QueryAst { op, statement })
}

pub fn parse_expr(text: &str) -> Result<Expr, SqlError> {
    let toks = tokenize(text, LexOptions::default())?;
    let mut p = Parser { c: Cursor::new(&toks, text) };
    let e = p.expr()?;
    if !p.c.at_end() {
        return Err(p.c.unexpected("end of expression").into());
    }
    Ok(e)
}

/// Parses a SELECT starting at `c`, stopping before the first token that
/// cannot continue it (e.g. `INVARIANT` or an unbalanced `)`).
pub(crate) fn parse_select_at(c: &mut Cursor<'_>) -> Result<Select, SqlError> {
    let mut p = Parser { c: c.clone() };
    let s = p.select()?;
    *c = p.c;
    Ok(s)
}

fn unsupported(pos: Pos, construct: impl Into<String>) -> SqlError {
    SqlError::Unsupported { pos, construct: construct.into() }
}

struct Parser<'t> {
    c: Cursor<'t>,
}

impl Parser<'_> {
    fn name(&mut self, what: &str) -> Result<String, SqlError> {
        match self.c.peek() {
            Some(Token { tok: Tok::Ident(s), .. }) if !is_reserved(s) => {
                self.c.next();
                Ok(s.clone())
            }
            Some(Token { tok: Tok::QuotedIdent(s), .. }) => {
                self.c.next();
                Ok(s.clone())
            }
            _ => Err(self.c.unexpected(what).into()),
        }
    }

    fn select(&mut self) -> Result<Select, SqlError> {
        self.c.expect_kw("SELECT")?;
        if self.c.is_kw("DISTINCT") {
            return Err(unsupported(self.c.pos(), "DISTINCT"));
        }
        let mut projection = Vec::new();
        loop {
            if self.c.eat(&Tok::Star) {
                projection.push(SelectItem::Wildcard);
            } else {
                let expr = self.expr()?;
                let alias = if self.c.eat_kw("AS") || self.c.peek().is_some_and(is_name) {
                    Some(self.name("alias")?)
                } else {
                    None
                };
                projection.push(SelectItem::Expr { expr, alias });
            }
            if !self.c.eat(&Tok::Comma) {
                break;
            }
        }
        let mut from = Vec::new();
        if self.c.eat_kw("FROM") {
            from.push(self.table_ref()?);
            loop {
                if self.c.eat(&Tok::Comma) {
                    from.push(self.table_ref()?);
                } else if self.c.is_kw("JOIN") || self.c.is_kw("INNER") {
                    self.c.eat_kw("INNER");
                    self.c.expect_kw("JOIN")?;
                    let mut item = self.table_ref()?;
                    self.c.expect_kw("ON")?;
                    item.on = Some(self.expr()?);
                    from.push(item);
                } else if self.c.is_kw("LEFT") || self.c.is_kw("RIGHT") || self.c.is_kw("CROSS") || self.c.is_kw("FULL") {
                    return Err(unsupported(self.c.pos(), "outer or cross join"));
                } else {
                    break;
                }
            }
        }
        let selection = if self.c.eat_kw("WHERE") { Some(self.expr()?) } else { None };
        if self.c.is_kw("GROUP") || self.c.is_kw("HAVING") {
            return Err(unsupported(self.c.pos(), "GROUP BY / HAVING"));
        }
        let mut order_by = Vec::new();
        if self.c.eat_kw("ORDER") {
            self.c.expect_kw("BY")?;
            loop {
                let expr = self.expr()?;
                let desc = if self.c.eat_kw("DESC") {
                    true
                } else {
                    self.c.eat_kw("ASC");
                    false
                };
                order_by.push(OrderItem { expr, desc });
                if !self.c.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        let limit = if self.c.eat_kw("LIMIT") {
            match self.c.next() {
                Some(Token { tok: Tok::Int(n), .. }) if *n >= 0 => Some(*n as u64),
                _ => return Err(self.c.error("expected non-negative LIMIT count").into()),
            }
        } else {
            None
        };
        let s = Select { projection, from, selection, order_by, limit };
        if s.is_aggregate() {
            let plain = s.projection.iter().any(|p| match p {
                SelectItem::Wildcard => true,
                SelectItem::Expr { expr, .. } => !expr.is_aggregate(),
            });
            if plain {
                return Err(unsupported(self.c.pos(), "aggregate mixed with plain columns (no GROUP BY)"));
            }
        }
        Ok(s)
    }

    fn table_ref(&mut self) -> Result<FromItem, SqlError> {
        if self.c.is(&Tok::LParen) {
            return Err(unsupported(self.c.pos(), "derived table in FROM"));
        }
        let table = self.name("table name")?;
        if self.c.is(&Tok::Dot) {
            return Err(unsupported(self.c.pos(), "schema-qualified table name"));
        }
        let alias = if self.c.eat_kw("AS") || self.c.peek().is_some_and(is_name) {
            Some(self.name("table alias")?)
        } else {
            None
        };
        Ok(FromItem { table, alias, on: None })
    }

    fn insert(&mut self) -> Result<Insert, SqlError> {
        self.c.expect_kw("INSERT")?;
        self.c.expect_kw("INTO")?;
        let table = self.name("table name")?;
        let mut columns = Vec::new();
        if self.c.eat(&Tok::LParen) {
            loop {
                columns.push(self.name("column name")?);
                if !self.c.eat(&Tok::Comma) {
                    break;
                }
            }
            self.c.expect(&Tok::RParen)?;
        }
        if self.c.is_kw("SELECT") {
            return Err(unsupported(self.c.pos(), "INSERT ... SELECT"));
        }
        if self.c.is_kw("SET") {
            return Err(unsupported(self.c.pos(), "INSERT ... SET"));
        }
        self.c.expect_kw("VALUES")?;
        let mut rows = Vec::new();
        loop {
            self.c.expect(&Tok::LParen)?;
            let mut row = Vec::new();
            loop {
                row.push(self.expr()?);
                if !self.c.eat(&Tok::Comma) {
                    break;
                }
            }
            self.c.expect(&Tok::RParen)?;
            rows.push(row);
            if !self.c.eat(&Tok::Comma) {
                break;
            }
        }
        Ok(Insert { table, columns, rows })
    }

    fn update(&mut self) -> Result<Update, SqlError> {
        self.c.expect_kw("UPDATE")?;
        let table = self.name("table name")?;
        if self.c.is(&Tok::Comma) || self.c.is_kw("JOIN") {
            return Err(unsupported(self.c.pos(), "multi-table UPDATE"));
        }
        self.c.expect_kw("SET")?;
        let mut assignments = Vec::new();
        loop {
            let col = self.name("column name")?;
            self.c.expect(&Tok::Eq)?;
            assignments.push((col, self.expr()?));
            if !self.c.eat(&Tok::Comma) {
                break;
            }
        }
        let selection = if self.c.eat_kw("WHERE") { Some(self.expr()?) } else { None };
        if self.c.is_kw("ORDER") || self.c.is_kw("LIMIT") {
            return Err(unsupported(self.c.pos(), "ORDER BY / LIMIT on UPDATE"));
        }
        Ok(Update { table, assignments, selection })
    }

    fn delete(&mut self) -> Result<Delete, SqlError> {
        self.c.expect_kw("DELETE")?;
        self.c.expect_kw("FROM")?;
        let table = self.name("table name")?;
        if self.c.is(&Tok::Comma) || self.c.is_kw("USING") {
            return Err(unsupported(self.c.pos(), "multi-table DELETE"));
        }
        let selection = if self.c.eat_kw("WHERE") { Some(self.expr()?) } else { None };
        if self.c.is_kw("ORDER") || self.c.is_kw("LIMIT") {
            return Err(unsupported(self.c.pos(), "ORDER BY / LIMIT on DELETE"));
        }
        Ok(Delete { table, selection })
    }

    fn expr(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.and_expr()?;
        while self.c.eat_kw("OR") {
            let right = self.and_expr()?;
            left = Expr::binary(BinOp::Or, left, right);
        }
        Ok(left)
    }

    fn and_expr(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.not_expr()?;
        while self.c.eat_kw("AND") {
            let right = self.not_expr()?;
            left = Expr::binary(BinOp::And, left, right);
        }
        Ok(left)
    }

    fn not_expr(&mut self) -> Result<Expr, SqlError> {
        if self.c.is_kw("NOT") && !self.c.peek_at(1).is_some_and(|t| t.is_kw("EXISTS")) {
            self.c.next();
            return Ok(Expr::Not(Box::new(self.not_expr()?)));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, SqlError> {
        let left = self.additive()?;
        let op = match self.c.peek().map(|t| &t.tok) {
            Some(Tok::Eq) => Some(BinOp::Eq),
            Some(Tok::NotEq) => Some(BinOp::NotEq),
            Some(Tok::Lt) => Some(BinOp::Lt),
            Some(Tok::LtEq) => Some(BinOp::LtEq),
            Some(Tok::Gt) => Some(BinOp::Gt),
            Some(Tok::GtEq) => Some(BinOp::GtEq),
            Some(Tok::NullSafeEq) => Some(BinOp::NullSafeEq),
            _ => None,
        };
        if let Some(op) = op {
            self.c.next();
            let right = self.additive()?;
            return Ok(Expr::binary(op, left, right));
        }
        if self.c.eat_kw("IS") {
            let negated = self.c.eat_kw("NOT");
            self.c.expect_kw("NULL")?;
            return Ok(Expr::IsNull { expr: Box::new(left), negated });
        }
        let negated = if self.c.is_kw("NOT")
            && self.c.peek_at(1).is_some_and(|t| t.is_kw("LIKE") || t.is_kw("IN"))
        {
            self.c.next();
            true
        } else {
            false
        };
        if self.c.eat_kw("LIKE") {
            let pattern = self.additive()?;
            return Ok(Expr::Like { expr: Box::new(left), pattern: Box::new(pattern), negated });
        }
        if self.c.eat_kw("IN") {
            self.c.expect(&Tok::LParen)?;
            if self.c.is_kw("SELECT") {
                let select = self.select()?;
                self.c.expect(&Tok::RParen)?;
                return Ok(Expr::InSelect { expr: Box::new(left), select: Box::new(select), negated });
            }
            let mut list = Vec::new();
            loop {
                list.push(self.expr()?);
                if !self.c.eat(&Tok::Comma) {
                    break;
                }
            }
            self.c.expect(&Tok::RParen)?;
            return Ok(Expr::InList { expr: Box::new(left), list, negated });
        }
        Ok(left)
    }

    fn additive(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.multiplicative()?;
        loop {
            let op = if self.c.eat(&Tok::Plus) {
                BinOp::Add
            } else if self.c.eat(&Tok::Minus) {
                BinOp::Sub
            } else {
                break;
            };
            let right = self.multiplicative()?;
            left = Expr::binary(op, left, right);
        }
        Ok(left)
    }

    fn multiplicative(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.unary()?;
        loop {
            let op = if self.c.eat(&Tok::Star) {
                BinOp::Mul
            } else if self.c.eat(&Tok::Slash) {
                BinOp::Div
            } else {
                break;
            };
            let right = self.unary()?;
            left = Expr::binary(op, left, right);
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<Expr, SqlError> {
        if self.c.eat(&Tok::Minus) {
            return match self.unary()? {
                Expr::Literal(Value::Int(n)) => Ok(Expr::Literal(Value::Int(-n))),
                e => Ok(Expr::Neg(Box::new(e))),
            };
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, SqlError> {
        let Some(t) = self.c.peek() else {
            return Err(self.c.unexpected("expression").into());
        };
        match &t.tok {
            Tok::Int(n) => {
                self.c.next();
                Ok(Expr::Literal(Value::Int(*n)))
            }
            Tok::Str(s) => {
                self.c.next();
                Ok(Expr::Literal(Value::Text(s.clone())))
            }
            Tok::Var(v) => {
                self.c.next();
                Ok(Expr::Var(v.clone()))
            }
            Tok::LParen => {
                self.c.next();
                let e = if self.c.is_kw("SELECT") { Expr::Subquery(Box::new(self.select()?)) } else { self.expr()? };
                self.c.expect(&Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(w) if w.eq_ignore_ascii_case("NULL") => {
                self.c.next();
                Ok(Expr::Literal(Value::Null))
            }
            Tok::Ident(w) if w.eq_ignore_ascii_case("NOT") || w.eq_ignore_ascii_case("EXISTS") => {
                let negated = self.c.eat_kw("NOT");
                self.c.expect_kw("EXISTS")?;
                self.c.expect(&Tok::LParen)?;
                let select = self.select()?;
                self.c.expect(&Tok::RParen)?;
                Ok(Expr::Exists { select: Box::new(select), negated })
            }
            Tok::Ident(w) if self.c.peek_at(1).is_some_and(|n| n.tok == Tok::LParen) && !is_reserved(w) => {
                let pos = t.pos;
                let w = w.clone();
                self.c.next();
                self.c.next();
                if w.eq_ignore_ascii_case("COUNT") {
                    let arg = if self.c.eat(&Tok::Star) { None } else { Some(Box::new(self.expr()?)) };
                    self.c.expect(&Tok::RParen)?;
                    return Ok(Expr::Count(arg));
                }
                let Some(func) = Func::from_name(&w) else {
                    return Err(unsupported(pos, format!("function {}", w.to_ascii_uppercase())));
                };
                let mut args = Vec::new();
                if !self.c.is(&Tok::RParen) {
                    loop {
                        args.push(self.expr()?);
                        if !self.c.eat(&Tok::Comma) {
                            break;
                        }
                    }
                }
                self.c.expect(&Tok::RParen)?;
                let arity_ok = match func {
                    Func::Concat | Func::Coalesce => !args.is_empty(),
                    Func::Lower | Func::Upper | Func::Length => args.len() == 1,
                };
                if !arity_ok {
                    return Err(SyntaxError::new(pos, format!("wrong number of arguments to {}", func.name())).into());
                }
                Ok(Expr::Call { func, args })
            }
            Tok::Ident(_) | Tok::QuotedIdent(_) if is_name(t) => {
                let first = self.name("column")?;
                if self.c.eat(&Tok::Dot) {
                    if self.c.is(&Tok::Star) {
                        return Err(unsupported(self.c.pos(), "qualified wildcard"));
                    }
                    let name = self.name("column name")?;
                    Ok(Expr::Column(ColumnRef { qualifier: Some(first), name }))
                } else {
                    Ok(Expr::Column(ColumnRef { qualifier: None, name: first }))
                }
            }
            _ => Err(self.c.unexpected("expression").into()),
        }
    }
}

fn is_name(t: &Token) -> bool {
    match &t.tok {
        Tok::Ident(s) => !is_reserved(s),
        Tok::QuotedIdent(_) => true,
        _ => false,
    }
}

fn write_ident(f: &mut fmt::Formatter<'_>, name: &str) -> fmt::Result {
    let plain = name.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    if is_reserved(name) || !plain {
        write!(f, "`{name}`")
    } else {
        f.write_str(name)
    }
}

/// Operands of binary operators are parenthesized when compound so the
/// rendering reparses to the same tree.
fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
    match e {
        Expr::Binary { .. } | Expr::Like { .. } | Expr::IsNull { .. } | Expr::InList { .. } | Expr::InSelect { .. } | Expr::Not(_) => {
            write!(f, "({e})")
        }
        _ => write!(f, "{e}"),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Literal(v) => f.write_str(&v.to_literal()),
            Expr::Column(c) => {
                if let Some(q) = &c.qualifier {
                    write_ident(f, q)?;
                    f.write_str(".")?;
                }
                write_ident(f, &c.name)
            }
            Expr::Var(v) => write!(f, "@{v}"),
            Expr::Not(e) => {
                f.write_str("NOT ")?;
                write_operand(f, e)
            }
            Expr::Neg(e) => {
                f.write_str("-")?;
                write_operand(f, e)
            }
            Expr::Binary { op, left, right } => {
                write_operand(f, left)?;
                write!(f, " {} ", op.symbol())?;
                write_operand(f, right)
            }
            Expr::Like { expr, pattern, negated } => {
                write_operand(f, expr)?;
                f.write_str(if *negated { " NOT LIKE " } else { " LIKE " })?;
                write_operand(f, pattern)
            }
            Expr::IsNull { expr, negated } => {
                write_operand(f, expr)?;
                f.write_str(if *negated { " IS NOT NULL" } else { " IS NULL" })
            }
            Expr::InList { expr, list, negated } => {
                write_operand(f, expr)?;
                f.write_str(if *negated { " NOT IN (" } else { " IN (" })?;
                for (i, e) in list.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{e}")?;
                }
                f.write_str(")")
            }
            Expr::InSelect { expr, select, negated } => {
                write_operand(f, expr)?;
                write!(f, "{} ({select})", if *negated { " NOT IN" } else { " IN" })
            }
            Expr::Exists { select, negated } => {
                write!(f, "{}EXISTS ({select})", if *negated { "NOT " } else { "" })
            }
            Expr::Subquery(s) => write!(f, "({s})"),
            Expr::Call { func, args } => {
                write!(f, "{}(", func.name())?;
                for (i, e) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{e}")?;
                }
                f.write_str(")")
            }
            Expr::Count(None) => f.write_str("COUNT(*)"),
            Expr::Count(Some(e)) => write!(f, "COUNT({e})"),
        }
    }
}

impl fmt::Display for Select {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SELECT ")?;
        for (i, p) in self.projection.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            match p {
                SelectItem::Wildcard => f.write_str("*")?,
                SelectItem::Expr { expr, alias } => {
                    write!(f, "{expr}")?;
                    if let Some(a) = alias {
                        f.write_str(" AS ")?;
                        write_ident(f, a)?;
                    }
                }
            }
        }
        for (i, item) in self.from.iter().enumerate() {
            match (i, &item.on) {
                (0, _) => f.write_str(" FROM ")?,
                (_, Some(_)) => f.write_str(" JOIN ")?,
                (_, None) => f.write_str(", ")?,
            }
            write_ident(f, &item.table)?;
            if let Some(a) = &item.alias {
                f.write_str(" AS ")?;
                write_ident(f, a)?;
            }
            if let Some(on) = &item.on {
                write!(f, " ON {on}")?;
            }
        }
        if let Some(w) = &self.selection {
            write!(f, " WHERE {w}")?;
        }
        for (i, o) in self.order_by.iter().enumerate() {
            f.write_str(if i == 0 { " ORDER BY " } else { ", " })?;
            write!(f, "{}{}", o.expr, if o.desc { " DESC" } else { "" })?;
        }
        if let Some(n) = self.limit {
            write!(f, " LIMIT {n}")?;
        }
        Ok(())
    }
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statement::Select(s) => write!(f, "{s}"),
            Statement::Insert(i) => {
                f.write_str("INSERT INTO ")?;
                write_ident(f, &i.table)?;
                if !i.columns.is_empty() {
                    f.write_str(" (")?;
                    for (n, c) in i.columns.iter().enumerate() {
                        if n > 0 {
                            f.write_str(", ")?;
                        }
                        write_ident(f, c)?;
                    }
                    f.write_str(")")?;
                }
                f.write_str(" VALUES ")?;
                for (n, row) in i.rows.iter().enumerate() {
                    if n > 0 {
                        f.write_str(", ")?;
                    }
                    f.write_str("(")?;
                    for (m, e) in row.iter().enumerate() {
                        if m > 0 {
                            f.write_str(", ")?;
                        }
                        write!(f, "{e}")?;
                    }
                    f.write_str(")")?;
                }
                Ok(())
            }
            Statement::Update(u) => {
                f.write_str("UPDATE ")?;
                write_ident(f, &u.table)?;
                f.write_str(" SET ")?;
                for (n, (c, e)) in u.assignments.iter().enumerate() {
                    if n > 0 {
                        f.write_str(", ")?;
                    }
                    write_ident(f, c)?;
                    write!(f, " = {e}")?;
                }
                if let Some(w) = &u.selection {
                    write!(f, " WHERE {w}")?;
                }
                Ok(())
            }
            Statement::Delete(d) => {
                f.write_str("DELETE FROM ")?;
                write_ident(f, &d.table)?;
                if let Some(w) = &d.selection {
                    write!(f, " WHERE {w}")?;
                }
                Ok(())
            }
        }
    }
}
