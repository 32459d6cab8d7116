//! Invariant expressions compiled to SQL row conditions over an output row.

use thiserror::Error;

use crate::schema::{Arg, InvariantExpr, SchemaDecl};
use crate::sql::{BinOp, ColumnRef, Expr, FromItem, Select, SelectItem};
use crate::value::Value;

/// Binding of the output row a restriction is evaluated against. Never a
/// valid table name, so it cannot shadow one.
pub const ROW_BINDING: &str = "__row";
/// Binding of the table scanned by a predicate's EXISTS.
pub const PRED_BINDING: &str = "__pred";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RestrictionError {
    #[error("invariant predicate `{0}` is not a local or input table of the declaring component")]
    UnknownPredicate(String),
    #[error("invariant predicate `{table}` takes {expected} arguments, given {given}")]
    Arity { table: String, expected: usize, given: usize },
    #[error("invariant names column `{0}` absent from the projection")]
    UnknownColumn(String),
}

fn qualified(binding: &str, name: &str) -> Expr {
    Expr::Column(ColumnRef { qualifier: Some(binding.to_owned()), name: name.to_owned() })
}

fn bind(arg: &Arg, projection: &[String]) -> Result<Expr, RestrictionError> {
    Ok(match arg {
        Arg::Uid => Expr::Var("uid".to_owned()),
        Arg::Constant(v) => Expr::Literal(v.clone()),
        Arg::Column(c) => {
            if !projection.contains(c) {
                return Err(RestrictionError::UnknownColumn(c.clone()));
            }
            qualified(ROW_BINDING, c)
        }
    })
}

/// Compiles `inv` into a condition over an output row bound as
/// [`ROW_BINDING`]. `is(a, b)` becomes `a <=> b`; a table predicate becomes
/// `EXISTS (SELECT * FROM tbl WHERE p0 = x0 AND ...)` over the table's
/// non-KEY columns, negated to `NOT EXISTS`. Table names stay logical, in
/// `scope`'s namespace.
pub fn compile_restriction(inv: &InvariantExpr, projection: &[String], scope: &SchemaDecl) -> Result<Expr, RestrictionError> {
    Ok(match inv {
        InvariantExpr::All => Expr::Literal(Value::Int(1)),
        InvariantExpr::Is(a, b) => Expr::binary(BinOp::NullSafeEq, bind(a, projection)?, bind(b, projection)?),
        InvariantExpr::Pred { table, args, negated } => {
            let (decl, _) = scope.stored(table).ok_or_else(|| RestrictionError::UnknownPredicate(table.clone()))?;
            let cols = decl.predicate_columns();
            if cols.len() != args.len() {
                return Err(RestrictionError::Arity { table: table.clone(), expected: cols.len(), given: args.len() });
            }
            let mut cond: Option<Expr> = None;
            for (p, x) in cols.iter().zip(args) {
                let eq = Expr::binary(BinOp::Eq, qualified(PRED_BINDING, p), bind(x, projection)?);
                cond = Some(match cond {
                    None => eq,
                    Some(c) => Expr::binary(BinOp::And, c, eq),
                });
            }
            let select = Select {
                projection: vec![SelectItem::Wildcard],
                from: vec![FromItem { table: table.clone(), alias: Some(PRED_BINDING.to_owned()), on: None }],
                selection: cond,
                order_by: Vec::new(),
                limit: None,
            };
            Expr::Exists { select: Box::new(select), negated: *negated }
        }
        InvariantExpr::And(a, b) => {
            Expr::binary(BinOp::And, compile_restriction(a, projection, scope)?, compile_restriction(b, projection, scope)?)
        }
        InvariantExpr::Or(a, b) => {
            Expr::binary(BinOp::Or, compile_restriction(a, projection, scope)?, compile_restriction(b, projection, scope)?)
        }
    })
}
