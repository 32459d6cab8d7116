//! Wiring files:
//!
//! ```text
//! WIRE Groups.all_groups -> LiveSearch.data
//!   key   <- key
//!   text  <- name
//!   type  <- 'Group'
//!   owner <- owner
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::lex::{tokenize, Cursor, LexOptions, Pos, SyntaxError, Tok, Token};
use crate::schema::quote_ident;
use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Endpoint {
    pub component: String,
    pub table: String,
}

impl Endpoint {
    pub fn new(component: &str, table: &str) -> Self {
        Self { component: component.to_owned(), table: table.to_owned() }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.component, self.table)
    }
}

/// What feeds one target column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mapping {
    Column(String),
    Constant(Value),
}

impl fmt::Display for Mapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mapping::Column(c) => f.write_str(&quote_ident(c)),
            Mapping::Constant(v) => f.write_str(&v.to_literal()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WiringSpec {
    pub source: Endpoint,
    pub target: Endpoint,
    /// Target column to its feed, in file order.
    pub column_map: Vec<(String, Mapping)>,
    #[serde(skip)]
    pub pos: Pos,
}

impl WiringSpec {
    pub fn new(source: Endpoint, target: Endpoint, column_map: Vec<(&str, Mapping)>) -> Self {
        Self {
            source,
            target,
            column_map: column_map.into_iter().map(|(c, m)| (c.to_owned(), m)).collect(),
            pos: Pos::default(),
        }
    }

    pub fn mapping(&self, target_column: &str) -> Option<&Mapping> {
        self.column_map.iter().find(|(c, _)| c == target_column).map(|(_, m)| m)
    }
}

impl fmt::Display for WiringSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "WIRE {} -> {}", self.source, self.target)?;
        for (c, m) in &self.column_map {
            writeln!(f, "  {} <- {m}", quote_ident(c))?;
        }
        Ok(())
    }
}

fn endpoint(c: &mut Cursor<'_>) -> Result<Endpoint, SyntaxError> {
    let component = c.ident("component name")?;
    c.expect(&Tok::Dot)?;
    let table = c.ident("table name")?;
    Ok(Endpoint { component, table })
}

pub fn parse_wirings(text: &str) -> Result<Vec<WiringSpec>, SyntaxError> {
    let toks = tokenize(text, LexOptions { hash_comments: true, arrows: true })?;
    let mut c = Cursor::new(&toks, text);
    let mut out = Vec::new();
    while !c.at_end() {
        let pos = c.pos();
        c.expect_kw("WIRE")?;
        let source = endpoint(&mut c)?;
        c.expect(&Tok::RArrow)?;
        let target = endpoint(&mut c)?;
        let mut column_map = Vec::new();
        while !c.at_end() && !c.is_kw("WIRE") {
            let col = c.ident("target column")?;
            c.expect(&Tok::LArrow)?;
            let m = match c.peek() {
                Some(Token { tok: Tok::Ident(s) | Tok::QuotedIdent(s), .. }) => Mapping::Column(s.clone()),
                Some(Token { tok: Tok::Str(s), .. }) => Mapping::Constant(Value::Text(s.clone())),
                Some(Token { tok: Tok::Int(n), .. }) => Mapping::Constant(Value::Int(*n)),
                _ => return Err(c.unexpected("source column or quoted constant")),
            };
            c.next();
            column_map.push((col, m));
        }
        out.push(WiringSpec { source, target, column_map, pos });
    }
    Ok(out)
}
