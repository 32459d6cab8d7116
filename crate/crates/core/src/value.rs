//! Scalar values and the column type vocabulary shared by every layer.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// A stored scalar. The store knows only text, integers and NULL.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Null,
    Int(i64),
    Text(String),
}

impl Value {
    pub fn text(s: impl Into<String>) -> Self {
        Value::Text(s.into())
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    /// Numeric view used for comparisons between mixed operands.
    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(n) => Some(*n),
            Value::Text(s) => s.trim().parse().ok(),
            Value::Null => None,
        }
    }

    /// Text rendering as it would be stored in a text column.
    pub fn render(&self) -> Option<String> {
        match self {
            Value::Null => None,
            Value::Int(n) => Some(n.to_string()),
            Value::Text(s) => Some(s.clone()),
        }
    }

    /// SQL truthiness; `None` is UNKNOWN.
    pub fn truthy(&self) -> Option<bool> {
        match self {
            Value::Null => None,
            Value::Int(n) => Some(*n != 0),
            Value::Text(s) => Some(s.trim().parse::<i64>().map(|n| n != 0).unwrap_or(false)),
        }
    }

    pub fn from_bool(b: bool) -> Self {
        Value::Int(b as i64)
    }

    /// Three-valued comparison. NULL on either side yields `None`.
    ///
    /// Mixed integer/text operands compare numerically when the text parses
    /// as an integer, otherwise both sides compare as text.
    pub fn sql_cmp(&self, other: &Value) -> Option<Ordering> {
        match (self, other) {
            (Value::Null, _) | (_, Value::Null) => None,
            (Value::Int(a), Value::Int(b)) => Some(a.cmp(b)),
            (Value::Text(a), Value::Text(b)) => Some(a.cmp(b)),
            (Value::Int(a), t @ Value::Text(_)) => match t.as_int() {
                Some(b) => Some(a.cmp(&b)),
                None => Some(a.to_string().as_str().cmp(t.render().unwrap().as_str())),
            },
            (t @ Value::Text(_), Value::Int(b)) => match t.as_int() {
                Some(a) => Some(a.cmp(b)),
                None => Some(t.render().unwrap().as_str().cmp(b.to_string().as_str())),
            },
        }
    }

    /// `<=>`: NULL-safe equality. NULL <=> NULL holds, NULL <=> x does not.
    pub fn null_safe_eq(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Null, Value::Null) => true,
            (Value::Null, _) | (_, Value::Null) => false,
            _ => self.sql_cmp(other) == Some(Ordering::Equal),
        }
    }

    /// `=` with SQL semantics, `None` when either side is NULL.
    pub fn sql_eq(&self, other: &Value) -> Option<bool> {
        self.sql_cmp(other).map(|o| o == Ordering::Equal)
    }

    /// Total order used for ORDER BY: NULL first, then by `sql_cmp`.
    pub fn sort_cmp(&self, other: &Value) -> Ordering {
        match (self, other) {
            (Value::Null, Value::Null) => Ordering::Equal,
            (Value::Null, _) => Ordering::Less,
            (_, Value::Null) => Ordering::Greater,
            _ => self.sql_cmp(other).unwrap_or(Ordering::Equal),
        }
    }

    /// SQL literal form, reparseable by the lexer.
    pub fn to_literal(&self) -> String {
        match self {
            Value::Null => "NULL".to_owned(),
            Value::Int(n) => n.to_string(),
            Value::Text(s) => format!("'{}'", s.replace('\'', "''")),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("NULL"),
            Value::Int(n) => write!(f, "{n}"),
            Value::Text(s) => f.write_str(s),
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_owned())
    }
}

impl From<i64> for Value {
    fn from(n: i64) -> Self {
        Value::Int(n)
    }
}

/// Declared column type, including the `KEY` and `OWNER` markers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ColumnType {
    Int,
    TinyText,
    Text,
    Varchar(u32),
    Key,
    Owner,
}

impl ColumnType {
    pub fn is_textual(self) -> bool {
        !matches!(self, ColumnType::Int)
    }

    pub fn is_marker(self) -> bool {
        matches!(self, ColumnType::Key | ColumnType::Owner)
    }

    /// Coerces a value for storage in a column of this type.
    pub fn coerce(self, value: Value) -> Result<Value, String> {
        match (self, value) {
            (_, Value::Null) => Ok(Value::Null),
            (ColumnType::Int, Value::Int(n)) => Ok(Value::Int(n)),
            (ColumnType::Int, Value::Text(s)) => s
                .trim()
                .parse()
                .map(Value::Int)
                .map_err(|_| format!("'{s}' is not an integer")),
            (ColumnType::Varchar(n), v) => {
                let s = v.render().unwrap();
                if s.chars().count() > n as usize {
                    Err(format!("value exceeds VARCHAR({n})"))
                } else {
                    Ok(Value::Text(s))
                }
            }
            (ColumnType::TinyText, v) => {
                let s = v.render().unwrap();
                if s.len() > 255 {
                    Err("value exceeds TINYTEXT".to_owned())
                } else {
                    Ok(Value::Text(s))
                }
            }
            (_, v) => Ok(Value::Text(v.render().unwrap())),
        }
    }
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnType::Int => f.write_str("INT"),
            ColumnType::TinyText => f.write_str("TINYTEXT"),
            ColumnType::Text => f.write_str("TEXT"),
            ColumnType::Varchar(n) => write!(f, "VARCHAR({n})"),
            ColumnType::Key => f.write_str("KEY"),
            ColumnType::Owner => f.write_str("OWNER"),
        }
    }
}
