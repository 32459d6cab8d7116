//! Plain-text universe fixtures.
//!
//! ```text
//! users: alice, bob
//! components: Groups, LiveSearch
//! share Groups -> LiveSearch
//!
//! local Groups.groups
//! owner | src    | name
//! alice | Groups | Chess
//!
//! input LiveSearch.data @alice
//! owner | src    | text
//! alice | Groups | Chess
//! ```
//!
//! Extra dimensions are declared with `dimension NAME: a, b` and shared with
//! `grant NAME FROM -> TO ITEM`. A column named after an extra dimension
//! carries the item's affected principal in that dimension. Rows get ids
//! `<table>#<n>`, numbered from 1 per table. Lines starting with `#` are
//! comments.

use super::{DataItem, Dimension, Grant, ModelError, Universe, COMPONENTS, USERS};
use crate::value::Value;

fn err(line: usize, message: impl Into<String>) -> ModelError {
    ModelError::Fixture { line, message: message.into() }
}

fn list(s: &str) -> Vec<String> {
    s.split(|c: char| c == ',' || c.is_whitespace()).filter(|p| !p.is_empty()).map(str::to_owned).collect()
}

fn cell(raw: &str) -> Value {
    let raw = raw.trim();
    if raw.eq_ignore_ascii_case("null") {
        Value::Null
    } else if let Ok(n) = raw.parse::<i64>() {
        Value::Int(n)
    } else {
        Value::text(raw)
    }
}

struct Block {
    table: String,
    header: Option<Vec<String>>,
    rows: usize,
}

pub fn parse_fixture(text: &str) -> Result<Universe, ModelError> {
    let mut users = Vec::new();
    let mut components = Vec::new();
    let mut extra: Vec<(String, Vec<String>)> = Vec::new();
    let mut shares = Vec::new();
    let mut grants = Vec::new();
    let mut tables: Vec<(usize, String, String, Option<String>)> = Vec::new();
    let mut rows: Vec<(usize, DataItem)> = Vec::new();
    let mut block: Option<Block> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.starts_with('#') {
            continue;
        }
        if line.is_empty() {
            block = None;
            continue;
        }
        if let Some(b) = block.as_mut() {
            let cells: Vec<&str> = line.split('|').map(str::trim).collect();
            match &b.header {
                None => {
                    let header: Vec<String> = cells.iter().map(|c| c.to_string()).collect();
                    for required in ["owner", "src"] {
                        if !header.iter().any(|h| h == required) {
                            return Err(err(line_no, format!("header lacks mandatory `{required}` column")));
                        }
                    }
                    b.header = Some(header);
                }
                Some(header) => {
                    if cells.len() != header.len() {
                        return Err(err(line_no, format!("expected {} cells, found {}", header.len(), cells.len())));
                    }
                    b.rows += 1;
                    let mut item = DataItem::new(&format!("{}#{}", b.table, b.rows), &b.table, "", "");
                    for (col, c) in header.iter().zip(&cells) {
                        match col.as_str() {
                            "owner" => item.owner = c.to_string(),
                            "src" => item.src = c.to_string(),
                            other if extra.iter().any(|(d, _)| d == other) => {
                                item.extra.insert(other.to_owned(), c.to_string());
                            }
                            other => {
                                item.values.insert(other.to_owned(), cell(c));
                            }
                        }
                    }
                    if item.owner.is_empty() || item.src.is_empty() {
                        return Err(err(line_no, "owner and src must be non-empty"));
                    }
                    rows.push((line_no, item));
                }
            }
            continue;
        }
        if let Some(rest) = line.strip_prefix("users:") {
            users.extend(list(rest));
        } else if let Some(rest) = line.strip_prefix("components:") {
            components.extend(list(rest));
        } else if let Some(rest) = line.strip_prefix("dimension ") {
            let (name, ps) = rest.split_once(':').ok_or_else(|| err(line_no, "expected `dimension NAME: ...`"))?;
            extra.push((name.trim().to_owned(), list(ps)));
        } else if let Some(rest) = line.strip_prefix("share ") {
            let (a, b) = rest.split_once("->").ok_or_else(|| err(line_no, "expected `share A -> B`"))?;
            shares.push((a.trim().to_owned(), b.trim().to_owned()));
        } else if let Some(rest) = line.strip_prefix("grant ") {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            match parts.as_slice() {
                [dim, from, "->", to, item] => grants.push(Grant {
                    dimension: dim.to_string(),
                    from: from.to_string(),
                    to: to.to_string(),
                    item: item.to_string(),
                }),
                _ => return Err(err(line_no, "expected `grant DIM FROM -> TO ITEM`")),
            }
        } else if let Some(rest) = line.strip_prefix("local ") {
            let name = rest.trim();
            let (comp, _) = name.split_once('.').ok_or_else(|| err(line_no, "expected `local Comp.table`"))?;
            tables.push((line_no, name.to_owned(), comp.to_owned(), None));
            block = Some(Block { table: name.to_owned(), header: None, rows: 0 });
        } else if let Some(rest) = line.strip_prefix("input ") {
            let (name, user) = rest.split_once('@').ok_or_else(|| err(line_no, "expected `input Comp.table @user`"))?;
            let (name, user) = (name.trim(), user.trim());
            let (comp, _) = name.split_once('.').ok_or_else(|| err(line_no, "expected `input Comp.table @user`"))?;
            let id = format!("{name}@{user}");
            tables.push((line_no, id.clone(), comp.to_owned(), Some(user.to_owned())));
            block = Some(Block { table: id, header: None, rows: 0 });
        } else {
            return Err(err(line_no, format!("unrecognised line `{line}`")));
        }
    }

    let mut u = Universe::two_dimensional(users, components)?;
    for (name, ps) in extra {
        u.dimensions.push(Dimension::new(&name, ps)?);
    }
    for (line, id, comp, user) in tables {
        if !u.dimension(COMPONENTS)?.principals.contains(&comp) {
            return Err(err(line, format!("unknown component `{comp}`")));
        }
        match user {
            None => u.add_local_table(&comp, &id),
            Some(user) => {
                if !u.dimension(USERS)?.principals.contains(&user) {
                    return Err(err(line, format!("unknown user `{user}`")));
                }
                u.add_input_table(&comp, &user, &id)
            }
        }
    }
    for (a, b) in shares {
        u.add_wiring(&a, &b);
    }
    u.grants.extend(grants);
    for (line, item) in rows {
        u.insert(item).map_err(|e| err(line, e.to_string()))?;
    }
    u.check_invariants()?;
    Ok(u)
}
