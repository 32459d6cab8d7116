//! Foreign-key enforcement. A child row dangles when its reference names
//! no key of the parent: a local parent's stored rows, or an input parent's
//! view for the child row's owner. After every accepted change the store is
//! swept to a fixpoint; rows written by the change itself reject it, other
//! dangling rows are deleted and audit-logged.

use std::collections::{BTreeSet, HashMap, HashSet};

use crate::sandbox::store::{AuditRecord, Db};
use crate::sandbox::{Ctx, EngineError, ErrorCode};
use crate::schema::TableKind;
use crate::sandbox::names::physical_name;
use crate::value::Value;

struct Dangling {
    physical: String,
    rowid: u64,
    key: Value,
    reason: String,
}

fn find_dangling(db: &Db) -> Result<Vec<Dangling>, EngineError> {
    let mut out = Vec::new();
    let mut local_keys: HashMap<String, HashSet<String>> = HashMap::new();
    let mut view_keys: HashMap<(String, String, String), HashSet<String>> = HashMap::new();
    for (comp, schema) in &db.schemas {
        for t in schema.locals.iter().filter(|t| !t.foreign_keys.is_empty()) {
            let physical = physical_name(comp, &t.name);
            let Some(table) = db.tables.get(&physical) else { continue };
            let idx = |c: &str| t.columns.iter().position(|x| x.name == c).unwrap();
            let key_idx = idx(t.key_column());
            let owner_idx = idx(t.owner_column());
            for row in &table.rows {
                for fk in &t.foreign_keys {
                    let Some(v) = row.values[idx(&fk.column)].render() else { continue };
                    let present = match schema.kind(&fk.parent_table) {
                        Some(TableKind::Local) => {
                            let pp = physical_name(comp, &fk.parent_table);
                            let keys = local_keys.entry(pp.clone()).or_insert_with(|| {
                                let decl = schema.local(&fk.parent_table).unwrap();
                                let k = decl.columns.iter().position(|c| c.name == decl.key_column()).unwrap();
                                db.tables.get(&pp).into_iter().flat_map(|p| &p.rows).filter_map(|r| r.values[k].render()).collect()
                            });
                            keys.contains(&v)
                        }
                        Some(TableKind::Input) => {
                            let owner = row.values[owner_idx].render().unwrap_or_default();
                            let id = (comp.clone(), fk.parent_table.clone(), owner.clone());
                            if !view_keys.contains_key(&id) {
                                let decl = schema.input(&fk.parent_table).unwrap();
                                let k = decl.columns.iter().position(|c| c.name == decl.key_column()).unwrap();
                                let ctx = Ctx::new(db, &owner, "");
                                let keys = ctx.input_view(comp, &fk.parent_table)?.iter().filter_map(|r| r.values[k].render()).collect();
                                view_keys.insert(id.clone(), keys);
                            }
                            view_keys[&id].contains(&v)
                        }
                        _ => false,
                    };
                    if !present {
                        out.push(Dangling {
                            physical: physical.clone(),
                            rowid: row.rowid,
                            key: row.values[key_idx].clone(),
                            reason: format!("`{}.{}` references missing {}.{} key '{v}'", t.name, fk.column, comp, fk.parent_table),
                        });
                        break;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Sweeps `db` until no reference dangles. Fails with `E_CONSTRAINT` when
/// a row in `written` would dangle; otherwise returns the cascaded rows.
pub(crate) fn sweep(db: &mut Db, written: &BTreeSet<(String, u64)>, actor: (&str, &str)) -> Result<Vec<AuditRecord>, EngineError> {
    let mut cascaded = Vec::new();
    loop {
        let dangling = find_dangling(db)?;
        if dangling.is_empty() {
            return Ok(cascaded);
        }
        if let Some(d) = dangling.iter().find(|d| written.contains(&(d.physical.clone(), d.rowid))) {
            return Err(EngineError::new(ErrorCode::Constraint, d.reason.clone()));
        }
        for d in dangling {
            if let Some(t) = db.tables.get_mut(&d.physical) {
                t.rows.retain(|r| r.rowid != d.rowid);
            }
            let seq = db.audit.len() as u64 + 1;
            let record = AuditRecord {
                seq,
                actor_component: actor.0.to_owned(),
                actor_uid: actor.1.to_owned(),
                table: d.physical,
                rowid: d.rowid,
                key: d.key,
                reason: format!("cascade: {}", d.reason),
            };
            db.audit.push(record.clone());
            cascaded.push(record);
        }
    }
}
