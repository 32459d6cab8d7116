//! Statement evaluation over the store. Input tables are materialised per
//! session uid from their wirings; every other table read is resolved
//! against the store under its physical name.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::HashMap;
use std::rc::Rc;

use super::names::split_physical;
use super::store::Db;
use super::{EngineError, ErrorCode};
use crate::schema::TableKind;
use crate::sql::{BinOp, Expr, Func, Select, SelectItem};
use crate::value::Value;
use crate::wiring::{compile_input_view, Endpoint, Mapping, ROW_BINDING};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Relation {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

/// A row of an input view with the component it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViewRow {
    pub values: Vec<Value>,
    pub src: String,
    pub origin: Endpoint,
}

struct Frame<'a> {
    binding: &'a str,
    columns: &'a [String],
    values: &'a [Value],
}

/// Column bindings visible to an expression, innermost first.
pub(crate) struct Scope<'a> {
    frames: Vec<Frame<'a>>,
    parent: Option<&'a Scope<'a>>,
}

impl<'a> Scope<'a> {
    pub(crate) fn empty() -> Self {
        Scope { frames: Vec::new(), parent: None }
    }

    pub(crate) fn row(binding: &'a str, columns: &'a [String], values: &'a [Value]) -> Self {
        Scope { frames: vec![Frame { binding, columns, values }], parent: None }
    }

    fn lookup(&self, qualifier: Option<&str>, name: &str) -> Result<Value, EngineError> {
        let mut scope = Some(self);
        while let Some(s) = scope {
            match qualifier {
                Some(q) => {
                    if let Some(f) = s.frames.iter().find(|f| f.binding == q) {
                        return match f.columns.iter().position(|c| c == name) {
                            Some(i) => Ok(f.values[i].clone()),
                            None => Err(EngineError::new(ErrorCode::Syntax, format!("unknown column `{q}.{name}`"))),
                        };
                    }
                }
                None => {
                    let mut hits = s.frames.iter().filter_map(|f| f.columns.iter().position(|c| c == name).map(|i| &f.values[i]));
                    if let Some(v) = hits.next() {
                        if hits.next().is_some() {
                            return Err(EngineError::new(ErrorCode::Syntax, format!("column `{name}` is ambiguous")));
                        }
                        return Ok(v.clone());
                    }
                }
            }
            scope = s.parent;
        }
        let full = match qualifier {
            Some(q) => format!("{q}.{name}"),
            None => name.to_owned(),
        };
        Err(EngineError::new(ErrorCode::Syntax, format!("unknown column `{full}`")))
    }
}

/// Rows feeding an aggregate projection.
struct Group<'r> {
    rels: &'r [(String, Rc<Relation>)],
    combos: &'r [Vec<usize>],
}

pub(crate) struct Ctx<'d> {
    db: &'d Db,
    uid: String,
    uid_h: String,
    relations: RefCell<HashMap<String, Rc<Relation>>>,
    views: RefCell<HashMap<String, Rc<Vec<ViewRow>>>>,
}

fn eval_err(message: String) -> EngineError {
    EngineError::new(ErrorCode::Eval, message)
}

fn truth(v: &Value) -> Option<bool> {
    v.truthy()
}

fn like_match(s: &[char], p: &[char]) -> bool {
    let mut tokens: Vec<(char, bool)> = Vec::new();
    let mut k = 0;
    while k < p.len() {
        if p[k] == '\\' && k + 1 < p.len() {
            tokens.push((p[k + 1], true));
            k += 2;
        } else {
            tokens.push((p[k], false));
            k += 1;
        }
    }
    let mut dp_row = vec![false; tokens.len() + 1];
    dp_row[0] = true;
    for j in 1..=tokens.len() {
        dp_row[j] = dp_row[j - 1] && tokens[j - 1] == ('%', false);
    }
    for &ch in s {
        let mut next = vec![false; tokens.len() + 1];
        for j in 1..=tokens.len() {
            next[j] = match tokens[j - 1] {
                ('%', false) => next[j - 1] || dp_row[j],
                ('_', false) => dp_row[j - 1],
                (c, _) => dp_row[j - 1] && c == ch,
            };
        }
        dp_row = next;
    }
    dp_row[tokens.len()]
}

impl<'d> Ctx<'d> {
    pub(crate) fn new(db: &'d Db, uid: &str, uid_h: &str) -> Self {
        Ctx {
            db,
            uid: uid.to_owned(),
            uid_h: uid_h.to_owned(),
            relations: RefCell::new(HashMap::new()),
            views: RefCell::new(HashMap::new()),
        }
    }

    /// The rows of a physical table as seen by this context's uid.
    pub(crate) fn relation(&self, physical: &str) -> Result<Rc<Relation>, EngineError> {
        if let Some(r) = self.relations.borrow().get(physical) {
            return Ok(r.clone());
        }
        let unknown = || EngineError::new(ErrorCode::UnknownTable, format!("unknown table `{physical}`"));
        let (component, table) = split_physical(physical).ok_or_else(unknown)?;
        let schema = self.db.schemas.get(component).ok_or_else(unknown)?;
        let rel = match schema.kind(table) {
            Some(TableKind::Local) => {
                let decl = schema.local(table).unwrap();
                let rows = self.db.tables.get(physical).map(|t| t.rows.iter().map(|r| r.values.clone()).collect()).unwrap_or_default();
                Relation { columns: decl.columns.iter().map(|c| c.name.clone()).collect(), rows }
            }
            Some(TableKind::Input) => {
                let decl = schema.input(table).unwrap();
                let rows = self.input_view(component, table)?.iter().map(|r| r.values.clone()).collect();
                Relation { columns: decl.columns.iter().map(|c| c.name.clone()).collect(), rows }
            }
            _ => return Err(unknown()),
        };
        let rel = Rc::new(rel);
        self.relations.borrow_mut().insert(physical.to_owned(), rel.clone());
        Ok(rel)
    }

    /// Materialises `component.table` for this context's uid: the union of
    /// every wired output's restricted view, mapped onto the input's
    /// columns with keys namespaced by source.
    pub(crate) fn input_view(&self, component: &str, table: &str) -> Result<Rc<Vec<ViewRow>>, EngineError> {
        let id = format!("{component}.{table}");
        if let Some(v) = self.views.borrow().get(&id) {
            return Ok(v.clone());
        }
        let target = Endpoint::new(component, table);
        let wirings = self.db.wirings_into(component, table);
        let view = compile_input_view(&target, &wirings, &self.db.schemas).map_err(|e| eval_err(e.to_string()))?;
        let key_idx = view.columns.iter().position(|c| c.name == view.key_column).unwrap();
        let owner_idx = view.columns.iter().position(|c| c.name == view.owner_column).unwrap();
        let mut out = Vec::new();
        for b in &view.branches {
            let rel = self.select(&b.query, None)?;
            for row in &rel.rows {
                let sc = Scope::row(ROW_BINDING, &b.output_columns, row);
                if truth(&self.eval(&b.restriction, &sc)?) != Some(true) {
                    continue;
                }
                let mut values = Vec::with_capacity(view.columns.len());
                for (decl, (_, m)) in view.columns.iter().zip(&b.columns) {
                    let v = match m {
                        Mapping::Column(c) => match b.output_columns.iter().position(|o| o == c) {
                            Some(i) => row[i].clone(),
                            None => Value::Null,
                        },
                        Mapping::Constant(v) => v.clone(),
                    };
                    values.push(decl.ty.coerce(v.clone()).unwrap_or(v));
                }
                let Some(key) = values[key_idx].render() else { continue };
                if values[owner_idx].is_null() {
                    continue;
                }
                values[key_idx] = Value::Text(format!("{}:{key}", b.key_prefix));
                out.push(ViewRow { values, src: b.source.component.clone(), origin: b.source.clone() });
            }
        }
        let out = Rc::new(out);
        self.views.borrow_mut().insert(id, out.clone());
        Ok(out)
    }

    pub(crate) fn eval(&self, e: &Expr, sc: &Scope<'_>) -> Result<Value, EngineError> {
        self.eval_in(e, sc, None)
    }

    pub(crate) fn holds(&self, e: &Expr, sc: &Scope<'_>) -> Result<bool, EngineError> {
        Ok(truth(&self.eval(e, sc)?) == Some(true))
    }

    fn eval_in(&self, e: &Expr, sc: &Scope<'_>, group: Option<&Group<'_>>) -> Result<Value, EngineError> {
        let ev = |x: &Expr| self.eval_in(x, sc, group);
        Ok(match e {
            Expr::Literal(v) => v.clone(),
            Expr::Column(c) => sc.lookup(c.qualifier.as_deref(), &c.name)?,
            Expr::Var(v) => match v.as_str() {
                "uid" => Value::Text(self.uid.clone()),
                "uid_h" => Value::Text(self.uid_h.clone()),
                _ => Value::Null,
            },
            Expr::Not(x) => match truth(&ev(x)?) {
                Some(b) => Value::from_bool(!b),
                None => Value::Null,
            },
            Expr::Neg(x) => match ev(x)? {
                Value::Null => Value::Null,
                v => match v.as_int() {
                    Some(n) => Value::Int(n.checked_neg().ok_or_else(|| eval_err("integer overflow".into()))?),
                    None => Value::Null,
                },
            },
            Expr::Binary { op: BinOp::And, left, right } => {
                let a = truth(&ev(left)?);
                if a == Some(false) {
                    return Ok(Value::from_bool(false));
                }
                match (a, truth(&ev(right)?)) {
                    (_, Some(false)) => Value::from_bool(false),
                    (Some(true), Some(true)) => Value::from_bool(true),
                    _ => Value::Null,
                }
            }
            Expr::Binary { op: BinOp::Or, left, right } => {
                let a = truth(&ev(left)?);
                if a == Some(true) {
                    return Ok(Value::from_bool(true));
                }
                match (a, truth(&ev(right)?)) {
                    (_, Some(true)) => Value::from_bool(true),
                    (Some(false), Some(false)) => Value::from_bool(false),
                    _ => Value::Null,
                }
            }
            Expr::Binary { op, left, right } => {
                let (a, b) = (ev(left)?, ev(right)?);
                binary(*op, &a, &b)?
            }
            Expr::Like { expr, pattern, negated } => match (ev(expr)?.render(), ev(pattern)?.render()) {
                (Some(s), Some(p)) => {
                    let s: Vec<char> = s.chars().collect();
                    let p: Vec<char> = p.chars().collect();
                    Value::from_bool(like_match(&s, &p) != *negated)
                }
                _ => Value::Null,
            },
            Expr::IsNull { expr, negated } => Value::from_bool(ev(expr)?.is_null() != *negated),
            Expr::InList { expr, list, negated } => {
                let v = ev(expr)?;
                let mut items = Vec::with_capacity(list.len());
                for x in list {
                    items.push(ev(x)?);
                }
                membership(&v, &items, *negated)
            }
            Expr::InSelect { expr, select, negated } => {
                let v = ev(expr)?;
                let rel = self.select(select, Some(sc))?;
                if rel.columns.len() != 1 {
                    return Err(eval_err("IN subquery must return one column".into()));
                }
                let items: Vec<Value> = rel.rows.into_iter().map(|mut r| r.remove(0)).collect();
                membership(&v, &items, *negated)
            }
            Expr::Exists { select, negated } => {
                let rel = self.select(select, Some(sc))?;
                Value::from_bool(rel.rows.is_empty() == *negated)
            }
            Expr::Subquery(select) => {
                let rel = self.select(select, Some(sc))?;
                if rel.columns.len() != 1 {
                    return Err(eval_err("scalar subquery must return one column".into()));
                }
                match rel.rows.len() {
                    0 => Value::Null,
                    1 => rel.rows[0][0].clone(),
                    n => return Err(eval_err(format!("scalar subquery returned {n} rows"))),
                }
            }
            Expr::Call { func, args } => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(ev(a)?);
                }
                call(*func, vals)
            }
            Expr::Count(arg) => {
                let Some(g) = group else {
                    return Err(eval_err("COUNT outside an aggregate query".into()));
                };
                let mut n = 0i64;
                for combo in g.combos {
                    match arg {
                        None => n += 1,
                        Some(a) => {
                            let inner = frames(g.rels, combo, sc.parent);
                            if !self.eval_in(a, &inner, None)?.is_null() {
                                n += 1;
                            }
                        }
                    }
                }
                Value::Int(n)
            }
        })
    }

    /// Evaluates a SELECT, resolving unbound columns in `outer`.
    pub(crate) fn select(&self, sel: &Select, outer: Option<&Scope<'_>>) -> Result<Relation, EngineError> {
        let mut rels: Vec<(String, Rc<Relation>)> = Vec::new();
        for f in &sel.from {
            if rels.iter().any(|(b, _)| b == f.binding()) {
                return Err(EngineError::new(ErrorCode::Syntax, format!("table binding `{}` used twice", f.binding())));
            }
            rels.push((f.binding().to_owned(), self.relation(&f.table)?));
        }
        let mut combos: Vec<Vec<usize>> = vec![Vec::new()];
        for (i, f) in sel.from.iter().enumerate() {
            let mut next = Vec::new();
            for c in &combos {
                for r in 0..rels[i].1.rows.len() {
                    let mut c2 = c.clone();
                    c2.push(r);
                    if let Some(on) = &f.on {
                        if !self.holds(on, &frames(&rels[..=i], &c2, outer))? {
                            continue;
                        }
                    }
                    next.push(c2);
                }
            }
            combos = next;
        }
        if let Some(w) = &sel.selection {
            let mut kept = Vec::new();
            for c in combos {
                if self.holds(w, &frames(&rels, &c, outer))? {
                    kept.push(c);
                }
            }
            combos = kept;
        }

        let mut columns = Vec::new();
        for item in &sel.projection {
            match item {
                SelectItem::Wildcard => {
                    for (_, r) in &rels {
                        columns.extend(r.columns.iter().cloned());
                    }
                }
                other => columns.push(other.output_name().unwrap()),
            }
        }

        if sel.is_aggregate() {
            let nulls: Vec<Vec<Value>> = rels.iter().map(|(_, r)| vec![Value::Null; r.columns.len()]).collect();
            let first = combos.first().cloned();
            let g = Group { rels: &rels, combos: &combos };
            let row = {
                let base = match &first {
                    Some(c) => frames(&rels, c, outer),
                    None => Scope {
                        frames: rels
                            .iter()
                            .zip(&nulls)
                            .map(|((b, r), v)| Frame { binding: b, columns: &r.columns, values: v })
                            .collect(),
                        parent: outer,
                    },
                };
                self.project(sel, &rels, &base, Some(&g))?
            };
            let mut rows = vec![row];
            if sel.limit == Some(0) {
                rows.clear();
            }
            return Ok(Relation { columns, rows });
        }

        let mut rows: Vec<(Vec<Value>, Vec<Value>)> = Vec::with_capacity(combos.len());
        for c in &combos {
            let sc = frames(&rels, c, outer);
            let out = self.project(sel, &rels, &sc, None)?;
            let mut keys = Vec::with_capacity(sel.order_by.len());
            for o in &sel.order_by {
                keys.push(self.order_key(&o.expr, &columns, &out, &sc)?);
            }
            rows.push((out, keys));
        }
        if !sel.order_by.is_empty() {
            rows.sort_by(|(_, a), (_, b)| {
                for (i, o) in sel.order_by.iter().enumerate() {
                    let ord = a[i].sort_cmp(&b[i]);
                    let ord = if o.desc { ord.reverse() } else { ord };
                    if ord != Ordering::Equal {
                        return ord;
                    }
                }
                Ordering::Equal
            });
        }
        let mut rows: Vec<Vec<Value>> = rows.into_iter().map(|(r, _)| r).collect();
        if let Some(n) = sel.limit {
            rows.truncate(n as usize);
        }
        Ok(Relation { columns, rows })
    }

    fn project(&self, sel: &Select, rels: &[(String, Rc<Relation>)], sc: &Scope<'_>, group: Option<&Group<'_>>) -> Result<Vec<Value>, EngineError> {
        let mut out = Vec::new();
        for item in &sel.projection {
            match item {
                SelectItem::Wildcard => {
                    for (b, r) in rels {
                        for c in &r.columns {
                            out.push(sc.lookup(Some(b), c)?);
                        }
                    }
                }
                SelectItem::Expr { expr, .. } => out.push(self.eval_in(expr, sc, group)?),
            }
        }
        Ok(out)
    }

    /// ORDER BY accepts result aliases and 1-based result positions as well
    /// as source expressions.
    fn order_key(&self, e: &Expr, columns: &[String], out: &[Value], sc: &Scope<'_>) -> Result<Value, EngineError> {
        match e {
            Expr::Column(c) if c.qualifier.is_none() => {
                if let Some(i) = columns.iter().position(|n| *n == c.name) {
                    return Ok(out[i].clone());
                }
            }
            Expr::Literal(Value::Int(n)) if *n >= 1 && (*n as usize) <= out.len() => return Ok(out[*n as usize - 1].clone()),
            _ => {}
        }
        self.eval(e, sc)
    }
}

fn frames<'a>(rels: &'a [(String, Rc<Relation>)], combo: &[usize], parent: Option<&'a Scope<'a>>) -> Scope<'a> {
    Scope {
        frames: rels
            .iter()
            .zip(combo)
            .map(|((b, r), &i)| Frame { binding: b, columns: &r.columns, values: &r.rows[i] })
            .collect(),
        parent,
    }
}

fn membership(v: &Value, items: &[Value], negated: bool) -> Value {
    if v.is_null() {
        return Value::Null;
    }
    let mut unknown = false;
    for x in items {
        match v.sql_eq(x) {
            Some(true) => return Value::from_bool(!negated),
            None => unknown = true,
            Some(false) => {}
        }
    }
    if unknown {
        Value::Null
    } else {
        Value::from_bool(negated)
    }
}

fn binary(op: BinOp, a: &Value, b: &Value) -> Result<Value, EngineError> {
    let cmp = |f: fn(Ordering) -> bool| match a.sql_cmp(b) {
        Some(o) => Value::from_bool(f(o)),
        None => Value::Null,
    };
    Ok(match op {
        BinOp::Eq => cmp(|o| o == Ordering::Equal),
        BinOp::NotEq => cmp(|o| o != Ordering::Equal),
        BinOp::Lt => cmp(|o| o == Ordering::Less),
        BinOp::LtEq => cmp(|o| o != Ordering::Greater),
        BinOp::Gt => cmp(|o| o == Ordering::Greater),
        BinOp::GtEq => cmp(|o| o != Ordering::Less),
        BinOp::NullSafeEq => Value::from_bool(a.null_safe_eq(b)),
        BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div => {
            let (Some(x), Some(y)) = (a.as_int(), b.as_int()) else {
                return Ok(Value::Null);
            };
            let r = match op {
                BinOp::Add => x.checked_add(y),
                BinOp::Sub => x.checked_sub(y),
                BinOp::Mul => x.checked_mul(y),
                _ => {
                    if y == 0 {
                        return Ok(Value::Null);
                    }
                    x.checked_div(y)
                }
            };
            Value::Int(r.ok_or_else(|| eval_err("integer overflow".into()))?)
        }
        BinOp::And | BinOp::Or => unreachable!("logical operators short-circuit"),
    })
}

fn call(func: Func, vals: Vec<Value>) -> Value {
    match func {
        Func::Concat => {
            let mut s = String::new();
            for v in vals {
                match v.render() {
                    Some(t) => s.push_str(&t),
                    None => return Value::Null,
                }
            }
            Value::Text(s)
        }
        Func::Lower | Func::Upper | Func::Length => match vals.into_iter().next().and_then(|v| v.render()) {
            None => Value::Null,
            Some(s) => match func {
                Func::Lower => Value::Text(s.to_lowercase()),
                Func::Upper => Value::Text(s.to_uppercase()),
                _ => Value::Int(s.chars().count() as i64),
            },
        },
        Func::Coalesce => vals.into_iter().find(|v| !v.is_null()).unwrap_or(Value::Null),
    }
}
