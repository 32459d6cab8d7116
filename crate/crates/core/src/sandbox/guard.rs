//! The owner guard every modification passes, one row at a time. It is
//! the trigger condition `NEW.owner <=> OLD.owner AND NEW.owner <=> @uid`
//! specialised per operation, evaluated after the session's uid digest
//! has been verified for the table's component.

use crate::model::Op;
use crate::value::Value;

/// Whether a row change by `uid` keeps ownership. `old` is the stored row's
/// owner (absent for INS), `new` the owner written (absent for DEL).
pub fn owner_guard(op: Op, uid: &str, old: Option<&Value>, new: Option<&Value>) -> bool {
    let me = Value::text(uid);
    let null = Value::Null;
    let old = old.unwrap_or(&null);
    let new = new.unwrap_or(&null);
    match op {
        Op::Sel => true,
        Op::Ins => new.null_safe_eq(&me),
        Op::Upd => new.null_safe_eq(old) && new.null_safe_eq(&me),
        Op::Del => old.null_safe_eq(&me),
    }
}
