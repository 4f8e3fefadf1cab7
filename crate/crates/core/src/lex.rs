//! Tokenizer shared by the rule and template languages.

use std::fmt;

use crate::model::Value;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Str(String),
    Int(i64),
    Float(f64),
    /// Punctuation, including the two-character operators `<-`, `->`, `<>`,
    /// `<=` and `>=`.
    Punct(&'static str),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Str(s) => write!(f, "string '{s}'"),
            Tok::Int(i) => write!(f, "`{i}`"),
            Tok::Float(x) => write!(f, "`{x:?}`"),
            Tok::Punct(p) => write!(f, "`{p}`"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

const PUNCT2: [&str; 5] = ["<-", "->", "<>", "<=", ">="];
const PUNCT1: [&str; 16] = [
    "(", ")", "{", "}", ",", ";", ":", "!", ".", "=", "<", ">", "/", "[", "]", "-",
];

/// Splits `src` into tokens. `--` starts a comment running to end of line
/// when `comments` is set. Positions are offset by `line`/`col` so that
/// fragments of a larger document report document coordinates.
pub fn tokenize(src: &str, line: usize, col: usize, comments: bool) -> Result<Vec<Token>, LexError> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let (mut i, mut line, mut col) = (0, line, col);
    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, n: usize| {
        for _ in 0..n {
            if chars[*i] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, 1);
            continue;
        }
        if comments && c == '-' && chars.get(i + 1) == Some(&'-') {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col, 1);
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                advance(&mut i, &mut line, &mut col, 1);
            }
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                line: tl,
                col: tc,
            });
            continue;
        }
        let negative = c == '-' && chars.get(i + 1).is_some_and(char::is_ascii_digit);
        if c.is_ascii_digit() || negative {
            let start = i;
            advance(&mut i, &mut line, &mut col, 1);
            while i < chars.len() && chars[i].is_ascii_digit() {
                advance(&mut i, &mut line, &mut col, 1);
            }
            let mut is_float = false;
            if chars.get(i) == Some(&'.') && chars.get(i + 1).is_some_and(char::is_ascii_digit) {
                is_float = true;
                advance(&mut i, &mut line, &mut col, 1);
                while i < chars.len() && chars[i].is_ascii_digit() {
                    advance(&mut i, &mut line, &mut col, 1);
                }
            }
            if matches!(chars.get(i), Some('e' | 'E')) {
                let sign = usize::from(matches!(chars.get(i + 1), Some('-' | '+')));
                if chars.get(i + 1 + sign).is_some_and(char::is_ascii_digit) {
                    is_float = true;
                    advance(&mut i, &mut line, &mut col, 1 + sign);
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        advance(&mut i, &mut line, &mut col, 1);
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let parsed = if is_float {
                text.parse().ok().map(Tok::Float)
            } else {
                text.parse().ok().map(Tok::Int)
            };
            let tok = parsed.ok_or_else(|| LexError {
                line: tl,
                col: tc,
                message: format!("invalid number `{text}`"),
            })?;
            out.push(Token { tok, line: tl, col: tc });
            continue;
        }
        if c == '\'' || c == '"' {
            advance(&mut i, &mut line, &mut col, 1);
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None => {
                        return Err(LexError {
                            line: tl,
                            col: tc,
                            message: "unterminated string".into(),
                        })
                    }
                    Some(&q) if q == c => {
                        advance(&mut i, &mut line, &mut col, 1);
                        break;
                    }
                    Some('\\') => {
                        let escaped = match chars.get(i + 1) {
                            Some('n') => '\n',
                            Some('t') => '\t',
                            Some(&e @ ('\\' | '\'' | '"')) => e,
                            _ => {
                                return Err(LexError {
                                    line,
                                    col,
                                    message: "invalid escape".into(),
                                })
                            }
                        };
                        s.push(escaped);
                        advance(&mut i, &mut line, &mut col, 2);
                    }
                    Some(&ch) => {
                        s.push(ch);
                        advance(&mut i, &mut line, &mut col, 1);
                    }
                }
            }
            out.push(Token {
                tok: Tok::Str(s),
                line: tl,
                col: tc,
            });
            continue;
        }
        let two: String = chars[i..chars.len().min(i + 2)].iter().collect();
        if let Some(p) = PUNCT2.iter().find(|p| **p == two) {
            advance(&mut i, &mut line, &mut col, 2);
            out.push(Token {
                tok: Tok::Punct(p),
                line: tl,
                col: tc,
            });
            continue;
        }
        if let Some(p) = PUNCT1.iter().find(|p| p.starts_with(c)) {
            advance(&mut i, &mut line, &mut col, 1);
            out.push(Token {
                tok: Tok::Punct(p),
                line: tl,
                col: tc,
            });
            continue;
        }
        return Err(LexError {
            line: tl,
            col: tc,
            message: format!("unexpected character `{c}`"),
        });
    }
    Ok(out)
}

/// Quotes a string literal so that [`tokenize`] reads it back unchanged.
pub fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('\'');
    for c in s.chars() {
        match c {
            '\'' => out.push_str("\\'"),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('\'');
    out
}

/// Source form of a literal value.
pub fn literal(v: &Value) -> String {
    match v {
        Value::Str(s) => quote(s),
        Value::Float(x) => format!("{x:?}"),
        other => other.to_string(),
    }
}

/// Cursor over a token list with positioned errors.
pub struct Cursor {
    toks: Vec<Token>,
    pos: usize,
    end: (usize, usize),
}

impl Cursor {
    pub fn new(toks: Vec<Token>, end: (usize, usize)) -> Self {
        Cursor { toks, pos: 0, end }
    }

    pub fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    pub fn peek_at(&self, n: usize) -> Option<&Tok> {
        self.toks.get(self.pos + n).map(|t| &t.tok)
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    /// Position of the next token, or of the end of input.
    pub fn here(&self) -> (usize, usize) {
        self.toks.get(self.pos).map_or(self.end, |t| (t.line, t.col))
    }

    pub fn bump(&mut self) -> Option<Token> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    pub fn error(&self, message: impl Into<String>) -> LexError {
        let (line, col) = self.here();
        LexError {
            line,
            col,
            message: message.into(),
        }
    }

    fn found(&self) -> String {
        self.peek().map_or("end of input".to_string(), ToString::to_string)
    }

    pub fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Some(Tok::Punct(q)) if *q == p)
    }

    pub fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    pub fn eat_punct(&mut self, p: &str) -> bool {
        let hit = self.is_punct(p);
        if hit {
            self.pos += 1;
        }
        hit
    }

    pub fn eat_keyword(&mut self, kw: &str) -> bool {
        let hit = self.is_keyword(kw);
        if hit {
            self.pos += 1;
        }
        hit
    }

    pub fn expect_punct(&mut self, p: &str) -> Result<(), LexError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{p}`, found {}", self.found())))
        }
    }

    pub fn expect_keyword(&mut self, kw: &str) -> Result<(), LexError> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{kw}`, found {}", self.found())))
        }
    }

    pub fn expect_ident(&mut self) -> Result<String, LexError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error(format!("expected identifier, found {}", self.found()))),
        }
    }

    pub fn expect_str(&mut self) -> Result<String, LexError> {
        match self.peek() {
            Some(Tok::Str(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error(format!("expected string, found {}", self.found()))),
        }
    }

    pub fn expect_end(&self) -> Result<(), LexError> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.error(format!("unexpected {}", self.found())))
        }
    }
}
