//! Invariant expressions:
//!
//! ```text
//! inv  := conj ( OR conj )*
//! conj := atom ( AND atom )*
//! atom := ALL | '(' inv ')' | is '(' arg ',' arg ')' | [ '!' | NOT ] table '(' args ')'
//! arg  := @uid | column | 'text' | integer | NULL
//! ```

use std::fmt;

use crate::lex::{tokenize, Cursor, LexOptions, SyntaxError, Tok, Token};
use crate::value::Value;

use super::quote_ident;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Arg {
    Uid,
    Column(String),
    Constant(Value),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InvariantExpr {
    All,
    Is(Arg, Arg),
    Pred { table: String, args: Vec<Arg>, negated: bool },
    And(Box<InvariantExpr>, Box<InvariantExpr>),
    Or(Box<InvariantExpr>, Box<InvariantExpr>),
}

impl InvariantExpr {
    /// `is(@uid, owner)`, the invariant of an output table that declares none.
    pub fn default_for_owner() -> Self {
        InvariantExpr::Is(Arg::Uid, Arg::Column("owner".to_owned()))
    }

    pub fn visit(&self, f: &mut dyn FnMut(&InvariantExpr)) {
        f(self);
        if let InvariantExpr::And(a, b) | InvariantExpr::Or(a, b) = self {
            a.visit(f);
            b.visit(f);
        }
    }

    /// Columns of the output row the invariant reads.
    pub fn columns(&self) -> Vec<&str> {
        let mut out = Vec::new();
        fn args<'a>(xs: impl IntoIterator<Item = &'a Arg>, out: &mut Vec<&'a str>) {
            for a in xs {
                if let Arg::Column(c) = a {
                    out.push(c.as_str());
                }
            }
        }
        fn go<'a>(e: &'a InvariantExpr, out: &mut Vec<&'a str>) {
            match e {
                InvariantExpr::All => {}
                InvariantExpr::Is(a, b) => args([a, b], out),
                InvariantExpr::Pred { args: xs, .. } => args(xs, out),
                InvariantExpr::And(a, b) | InvariantExpr::Or(a, b) => {
                    go(a, out);
                    go(b, out);
                }
            }
        }
        go(self, &mut out);
        out
    }
}

impl fmt::Display for Arg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arg::Uid => f.write_str("@uid"),
            Arg::Column(c) => f.write_str(&quote_ident(c)),
            Arg::Constant(v) => f.write_str(&v.to_literal()),
        }
    }
}

impl fmt::Display for InvariantExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InvariantExpr::All => f.write_str("ALL"),
            InvariantExpr::Is(a, b) => write!(f, "is({a}, {b})"),
            InvariantExpr::Pred { table, args, negated } => {
                let args: Vec<String> = args.iter().map(ToString::to_string).collect();
                write!(f, "{}{}({})", if *negated { "!" } else { "" }, quote_ident(table), args.join(", "))
            }
            InvariantExpr::And(a, b) => {
                let side = |e: &InvariantExpr| match e {
                    InvariantExpr::Or(..) => format!("({e})"),
                    _ => e.to_string(),
                };
                // AND is left-associative; a right-nested AND needs parentheses
                // to reparse to the same tree.
                let right = match b.as_ref() {
                    InvariantExpr::And(..) => format!("({b})"),
                    _ => side(b),
                };
                write!(f, "{} AND {right}", side(a))
            }
            InvariantExpr::Or(a, b) => {
                let right = match b.as_ref() {
                    InvariantExpr::Or(..) => format!("({b})"),
                    _ => b.to_string(),
                };
                write!(f, "{a} OR {right}")
            }
        }
    }
}

pub fn parse_invariant(text: &str) -> Result<InvariantExpr, SyntaxError> {
    let toks = tokenize(text, LexOptions::default())?;
    let mut c = Cursor::new(&toks, text);
    let e = parse_at(&mut c)?;
    if !c.at_end() {
        return Err(c.unexpected("AND, OR or end of invariant"));
    }
    Ok(e)
}

pub(crate) fn parse_at(c: &mut Cursor<'_>) -> Result<InvariantExpr, SyntaxError> {
    let mut left = conj(c)?;
    while c.eat_kw("OR") {
        left = InvariantExpr::Or(Box::new(left), Box::new(conj(c)?));
    }
    Ok(left)
}

fn conj(c: &mut Cursor<'_>) -> Result<InvariantExpr, SyntaxError> {
    let mut left = atom(c)?;
    while c.eat_kw("AND") {
        left = InvariantExpr::And(Box::new(left), Box::new(atom(c)?));
    }
    Ok(left)
}

fn atom(c: &mut Cursor<'_>) -> Result<InvariantExpr, SyntaxError> {
    if c.eat(&Tok::LParen) {
        let e = parse_at(c)?;
        c.expect(&Tok::RParen)?;
        return Ok(e);
    }
    let negated = c.eat(&Tok::Bang) || c.eat_kw("NOT");
    let pos = c.pos();
    let (name, quoted) = match c.peek() {
        Some(Token { tok: Tok::Ident(s), .. }) => (s.clone(), false),
        Some(Token { tok: Tok::QuotedIdent(s), .. }) => (s.clone(), true),
        _ => return Err(c.unexpected("ALL, is(...) or a table predicate")),
    };
    c.next();
    if !quoted && name.eq_ignore_ascii_case("ALL") && !c.is(&Tok::LParen) {
        if negated {
            return Err(SyntaxError::new(pos, "negation applies only to table predicates"));
        }
        return Ok(InvariantExpr::All);
    }
    c.expect(&Tok::LParen)?;
    let mut args = Vec::new();
    if !c.is(&Tok::RParen) {
        loop {
            args.push(arg(c)?);
            if !c.eat(&Tok::Comma) {
                break;
            }
        }
    }
    c.expect(&Tok::RParen)?;
    if !quoted && name.eq_ignore_ascii_case("is") {
        if negated {
            return Err(SyntaxError::new(pos, "negation applies only to table predicates"));
        }
        let n = args.len();
        let mut it = args.into_iter();
        return match (it.next(), it.next(), n) {
            (Some(a), Some(b), 2) => Ok(InvariantExpr::Is(a, b)),
            _ => Err(SyntaxError::new(pos, format!("is() takes 2 arguments, given {n}"))),
        };
    }
    if args.is_empty() {
        return Err(SyntaxError::new(pos, format!("predicate `{name}` needs at least one argument")));
    }
    Ok(InvariantExpr::Pred { table: name, args, negated })
}

fn arg(c: &mut Cursor<'_>) -> Result<Arg, SyntaxError> {
    let t = c.peek().ok_or_else(|| c.unexpected("argument"))?;
    let a = match &t.tok {
        Tok::Var(v) if v.eq_ignore_ascii_case("uid") => Arg::Uid,
        Tok::Var(v) => return Err(SyntaxError::new(t.pos, format!("unknown variable `@{v}`"))),
        Tok::Ident(s) if s.eq_ignore_ascii_case("NULL") => Arg::Constant(Value::Null),
        Tok::Ident(s) | Tok::QuotedIdent(s) => Arg::Column(s.clone()),
        Tok::Str(s) => Arg::Constant(Value::Text(s.clone())),
        Tok::Int(n) => Arg::Constant(Value::Int(*n)),
        Tok::Minus => {
            c.next();
            return match c.next() {
                Some(Token { tok: Tok::Int(n), .. }) => Ok(Arg::Constant(Value::Int(-n))),
                _ => Err(SyntaxError::new(t.pos, "expected an integer after `-`")),
            };
        }
        _ => return Err(c.unexpected("argument")),
    };
    c.next();
    Ok(a)
}
