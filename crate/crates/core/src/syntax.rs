//! Tokenizer and cursor shared by the message, template and formula grammars.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Token {
    Ident(String),
    LParen,
    RParen,
    Comma,
    Arrow,
    Colon,
}

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::Ident(s) => format!("identifier `{s}`"),
            Token::LParen => "`(`".into(),
            Token::RParen => "`)`".into(),
            Token::Comma => "`,`".into(),
            Token::Arrow => "`->`".into(),
            Token::Colon => "`:`".into(),
        }
    }
}

/// A syntax or resolution error with the byte offset where it was detected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message} at position {position}")]
pub struct SyntaxError {
    pub position: usize,
    pub message: String,
}

impl SyntaxError {
    pub fn new(position: usize, message: impl Into<String>) -> Self {
        Self {
            position,
            message: message.into(),
        }
    }
}

pub fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn tokenize(text: &str) -> Result<Vec<(usize, Token)>, SyntaxError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\r' | b'\n' => i += 1,
            b'(' => {
                out.push((i, Token::LParen));
                i += 1;
            }
            b')' => {
                out.push((i, Token::RParen));
                i += 1;
            }
            b',' => {
                out.push((i, Token::Comma));
                i += 1;
            }
            b':' => {
                out.push((i, Token::Colon));
                i += 1;
            }
            b'-' if bytes.get(i + 1) == Some(&b'>') => {
                out.push((i, Token::Arrow));
                i += 2;
            }
            c if c.is_ascii_alphabetic() => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Token::Ident(text[start..i].to_string())));
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(SyntaxError::new(i, format!("unexpected character `{ch}`")));
            }
        }
    }
    Ok(out)
}

pub struct Cursor {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    end: usize,
}

impl Cursor {
    pub fn new(text: &str) -> Result<Self, SyntaxError> {
        Ok(Self {
            tokens: tokenize(text)?,
            pos: 0,
            end: text.len(),
        })
    }

    pub fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |(o, _)| *o)
    }

    pub fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    pub fn peek_at(&self, ahead: usize) -> Option<&Token> {
        self.tokens.get(self.pos + ahead).map(|(_, t)| t)
    }

    pub fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).map(|(_, t)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    pub fn expect(&mut self, want: Token) -> Result<(), SyntaxError> {
        let at = self.offset();
        match self.bump() {
            Some(t) if t == want => Ok(()),
            Some(t) => Err(SyntaxError::new(
                at,
                format!("expected {}, found {}", want.describe(), t.describe()),
            )),
            None => Err(SyntaxError::new(
                at,
                format!("expected {}, found end of input", want.describe()),
            )),
        }
    }

    /// Returns the identifier and its offset.
    pub fn ident(&mut self) -> Result<(usize, String), SyntaxError> {
        let at = self.offset();
        match self.bump() {
            Some(Token::Ident(s)) => Ok((at, s)),
            Some(t) => Err(SyntaxError::new(
                at,
                format!("expected identifier, found {}", t.describe()),
            )),
            None => Err(SyntaxError::new(
                at,
                "expected identifier, found end of input",
            )),
        }
    }

    pub fn finish(&self) -> Result<(), SyntaxError> {
        match self.tokens.get(self.pos) {
            None => Ok(()),
            Some((at, t)) => Err(SyntaxError::new(
                *at,
                format!("unexpected trailing {}", t.describe()),
            )),
        }
    }
}
