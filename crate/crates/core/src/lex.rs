//! Tokenizer shared by the SQL subset, the `.db` dialect, invariant
//! expressions and wiring files.

use std::fmt;

use thiserror::Error;

/// 1-based source position.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{pos}: {message}")]
pub struct SyntaxError {
    pub pos: Pos,
    pub message: String,
}

impl SyntaxError {
    pub fn new(pos: Pos, message: impl Into<String>) -> Self {
        Self { pos, message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    /// Backtick-quoted identifier; never a keyword.
    QuotedIdent(String),
    Int(i64),
    Str(String),
    /// `@name` session variable.
    Var(String),
    LParen,
    RParen,
    Comma,
    Semi,
    Dot,
    Star,
    Plus,
    Minus,
    Slash,
    Bang,
    Eq,
    NotEq,
    Lt,
    LtEq,
    Gt,
    GtEq,
    NullSafeEq,
    /// `<-` (wiring files only).
    LArrow,
    /// `->` (wiring and graph files only).
    RArrow,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) | Tok::QuotedIdent(s) => write!(f, "`{s}`"),
            Tok::Int(n) => write!(f, "`{n}`"),
            Tok::Str(s) => write!(f, "'{s}'"),
            Tok::Var(s) => write!(f, "`@{s}`"),
            other => {
                let s = match other {
                    Tok::LParen => "(",
                    Tok::RParen => ")",
                    Tok::Comma => ",",
                    Tok::Semi => ";",
                    Tok::Dot => ".",
                    Tok::Star => "*",
                    Tok::Plus => "+",
                    Tok::Minus => "-",
                    Tok::Slash => "/",
                    Tok::Bang => "!",
                    Tok::Eq => "=",
                    Tok::NotEq => "<>",
                    Tok::Lt => "<",
                    Tok::LtEq => "<=",
                    Tok::Gt => ">",
                    Tok::GtEq => ">=",
                    Tok::NullSafeEq => "<=>",
                    Tok::LArrow => "<-",
                    Tok::RArrow => "->",
                    _ => unreachable!(),
                };
                write!(f, "`{s}`")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
    /// Byte range in the source.
    pub start: usize,
    pub end: usize,
}

impl Token {
    /// Case-insensitive keyword test.
    pub fn is_kw(&self, kw: &str) -> bool {
        matches!(&self.tok, Tok::Ident(s) if s.eq_ignore_ascii_case(kw))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LexOptions {
    /// `#` starts a line comment.
    pub hash_comments: bool,
    /// Recognize `<-` and `->`.
    pub arrows: bool,
}

pub fn tokenize(src: &str, opts: LexOptions) -> Result<Vec<Token>, SyntaxError> {
    Lexer { src, bytes: src.as_bytes(), i: 0, line: 1, line_start: 0, opts }.run()
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    i: usize,
    line: usize,
    line_start: usize,
    opts: LexOptions,
}

impl Lexer<'_> {
    fn pos(&self) -> Pos {
        Pos { line: self.line, col: self.src[self.line_start..self.i].chars().count() + 1 }
    }

    fn peek(&self, ahead: usize) -> Option<u8> {
        self.bytes.get(self.i + ahead).copied()
    }

    fn skip_line(&mut self) {
        while let Some(c) = self.peek(0) {
            if c == b'\n' {
                break;
            }
            self.i += 1;
        }
    }

    fn run(mut self) -> Result<Vec<Token>, SyntaxError> {
        let mut out = Vec::new();
        while let Some(c) = self.peek(0) {
            match c {
                b'\n' => {
                    self.i += 1;
                    self.line += 1;
                    self.line_start = self.i;
                    continue;
                }
                c if c.is_ascii_whitespace() => {
                    self.i += 1;
                    continue;
                }
                b'#' if self.opts.hash_comments => {
                    self.skip_line();
                    continue;
                }
                b'-' if self.peek(1) == Some(b'-') => {
                    self.skip_line();
                    continue;
                }
                _ => {}
            }
            let pos = self.pos();
            let start = self.i;
            let tok = self.token(pos)?;
            out.push(Token { tok, pos, start, end: self.i });
        }
        Ok(out)
    }

    fn token(&mut self, pos: Pos) -> Result<Tok, SyntaxError> {
        let c = self.peek(0).unwrap();
        let two = |l: &Self, a: u8| l.peek(1) == Some(a);
        let (tok, len) = match c {
            b'(' => (Tok::LParen, 1),
            b')' => (Tok::RParen, 1),
            b',' => (Tok::Comma, 1),
            b';' => (Tok::Semi, 1),
            b'.' => (Tok::Dot, 1),
            b'*' => (Tok::Star, 1),
            b'+' => (Tok::Plus, 1),
            b'/' => (Tok::Slash, 1),
            b'=' => (Tok::Eq, 1),
            b'!' if two(self, b'=') => (Tok::NotEq, 2),
            b'!' => (Tok::Bang, 1),
            b'-' if self.opts.arrows && two(self, b'>') => (Tok::RArrow, 2),
            b'-' => (Tok::Minus, 1),
            b'<' if two(self, b'=') && self.peek(2) == Some(b'>') => (Tok::NullSafeEq, 3),
            b'<' if two(self, b'=') => (Tok::LtEq, 2),
            b'<' if two(self, b'>') => (Tok::NotEq, 2),
            b'<' if self.opts.arrows && two(self, b'-') => (Tok::LArrow, 2),
            b'<' => (Tok::Lt, 1),
            b'>' if two(self, b'=') => (Tok::GtEq, 2),
            b'>' => (Tok::Gt, 1),
            b'\'' | b'"' => return self.string(c, pos),
            b'@' => {
                self.i += 1;
                let name = self.word();
                if name.is_empty() {
                    return Err(SyntaxError::new(pos, "expected variable name after `@`"));
                }
                return Ok(Tok::Var(name));
            }
            b'`' => {
                self.i += 1;
                let start = self.i;
                while let Some(c) = self.peek(0) {
                    if c == b'`' {
                        let name = self.src[start..self.i].to_owned();
                        self.i += 1;
                        return Ok(Tok::QuotedIdent(name));
                    }
                    if c == b'\n' {
                        break;
                    }
                    self.i += 1;
                }
                return Err(SyntaxError::new(pos, "unterminated quoted identifier"));
            }
            c if c.is_ascii_digit() => {
                let start = self.i;
                while self.peek(0).is_some_and(|c| c.is_ascii_digit()) {
                    self.i += 1;
                }
                if self.peek(0).is_some_and(|c| c.is_ascii_alphabetic() || c == b'_') {
                    return Err(SyntaxError::new(pos, "malformed number"));
                }
                let text = &self.src[start..self.i];
                return text
                    .parse()
                    .map(Tok::Int)
                    .map_err(|_| SyntaxError::new(pos, format!("integer literal {text} out of range")));
            }
            c if c.is_ascii_alphabetic() || c == b'_' => return Ok(Tok::Ident(self.word())),
            _ => {
                let ch = self.src[self.i..].chars().next().unwrap();
                return Err(SyntaxError::new(pos, format!("unexpected character {ch:?}")));
            }
        };
        self.i += len;
        Ok(tok)
    }

    fn word(&mut self) -> String {
        let start = self.i;
        while self.peek(0).is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_') {
            self.i += 1;
        }
        self.src[start..self.i].to_owned()
    }

    fn string(&mut self, quote: u8, pos: Pos) -> Result<Tok, SyntaxError> {
        self.i += 1;
        let mut out = String::new();
        loop {
            let Some(c) = self.peek(0) else {
                return Err(SyntaxError::new(pos, "unterminated string literal"));
            };
            if c == quote {
                if self.peek(1) == Some(quote) {
                    out.push(quote as char);
                    self.i += 2;
                    continue;
                }
                self.i += 1;
                return Ok(Tok::Str(out));
            }
            if c == b'\n' {
                self.line += 1;
                self.line_start = self.i + 1;
            }
            let ch = self.src[self.i..].chars().next().unwrap();
            out.push(ch);
            self.i += ch.len_utf8();
        }
    }
}

/// Cursor over a token slice with the helpers every parser here needs.
#[derive(Debug, Clone)]
pub(crate) struct Cursor<'t> {
    toks: &'t [Token],
    pub i: usize,
    eof: Pos,
}

impl<'t> Cursor<'t> {
    pub fn new(toks: &'t [Token], src: &str) -> Self {
        let eof = match src.rsplit_once('\n') {
            Some((head, tail)) => Pos { line: head.matches('\n').count() + 2, col: tail.chars().count() + 1 },
            None => Pos { line: 1, col: src.chars().count() + 1 },
        };
        Self { toks, i: 0, eof }
    }

    pub fn peek(&self) -> Option<&'t Token> {
        self.toks.get(self.i)
    }

    pub fn peek_at(&self, ahead: usize) -> Option<&'t Token> {
        self.toks.get(self.i + ahead)
    }

    pub fn at_end(&self) -> bool {
        self.i >= self.toks.len()
    }

    pub fn pos(&self) -> Pos {
        self.peek().map(|t| t.pos).unwrap_or(self.eof)
    }

    pub fn next(&mut self) -> Option<&'t Token> {
        let t = self.toks.get(self.i);
        if t.is_some() {
            self.i += 1;
        }
        t
    }

    pub fn is(&self, tok: &Tok) -> bool {
        self.peek().is_some_and(|t| &t.tok == tok)
    }

    pub fn is_kw(&self, kw: &str) -> bool {
        self.peek().is_some_and(|t| t.is_kw(kw))
    }

    pub fn eat(&mut self, tok: &Tok) -> bool {
        if self.is(tok) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    pub fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    pub fn error(&self, message: impl Into<String>) -> SyntaxError {
        SyntaxError::new(self.pos(), message)
    }

    pub fn unexpected(&self, wanted: &str) -> SyntaxError {
        match self.peek() {
            Some(t) => SyntaxError::new(t.pos, format!("expected {wanted}, found {}", t.tok)),
            None => SyntaxError::new(self.eof, format!("expected {wanted}, found end of input")),
        }
    }

    pub fn expect(&mut self, tok: &Tok) -> Result<&'t Token, SyntaxError> {
        if self.is(tok) {
            Ok(self.next().unwrap())
        } else {
            Err(self.unexpected(&tok.to_string()))
        }
    }

    pub fn expect_kw(&mut self, kw: &str) -> Result<(), SyntaxError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.unexpected(kw))
        }
    }

    pub fn ident(&mut self, what: &str) -> Result<String, SyntaxError> {
        match self.peek() {
            Some(Token { tok: Tok::Ident(s) | Tok::QuotedIdent(s), .. }) => {
                self.i += 1;
                Ok(s.clone())
            }
            _ => Err(self.unexpected(what)),
        }
    }
}
