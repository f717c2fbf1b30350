//! Text form of messages: `msg := IDENT | pair(msg,msg) | enc(msg,IDENT)`.

use std::collections::BTreeSet;

use thiserror::Error;

use super::{conc, encr, KeySpace, Message};
use crate::syntax::{Cursor, SyntaxError, Token};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MessageParseError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("`{name}` at position {position} is not a declared key")]
    UnknownKey { name: String, position: usize },
    #[error("unknown identifier `{name}` at position {position}")]
    UnknownIdentifier { name: String, position: usize },
}

/// Parses a closed message. Identifiers naming a declared key become keys,
/// every other identifier is an atom.
pub fn parse_message(text: &str, keys: &KeySpace) -> Result<Message, MessageParseError> {
    parse_with(text, keys, None)
}

/// Like [`parse_message`] but rejects atoms outside `atoms`.
pub fn parse_message_strict(
    text: &str,
    keys: &KeySpace,
    atoms: &BTreeSet<String>,
) -> Result<Message, MessageParseError> {
    parse_with(text, keys, Some(atoms))
}

fn parse_with(
    text: &str,
    keys: &KeySpace,
    atoms: Option<&BTreeSet<String>>,
) -> Result<Message, MessageParseError> {
    let mut cur = Cursor::new(text)?;
    let m = message(&mut cur, keys, atoms)?;
    cur.finish()?;
    Ok(m)
}

pub(crate) fn message(
    cur: &mut Cursor,
    keys: &KeySpace,
    atoms: Option<&BTreeSet<String>>,
) -> Result<Message, MessageParseError> {
    let (at, name) = cur.ident()?;
    let applied = cur.peek() == Some(&Token::LParen);
    match name.as_str() {
        "pair" if applied => {
            cur.expect(Token::LParen)?;
            let a = message(cur, keys, atoms)?;
            cur.expect(Token::Comma)?;
            let b = message(cur, keys, atoms)?;
            cur.expect(Token::RParen)?;
            Ok(conc(a, b))
        }
        "enc" if applied => {
            cur.expect(Token::LParen)?;
            let body = message(cur, keys, atoms)?;
            cur.expect(Token::Comma)?;
            let (kat, kname) = cur.ident()?;
            let key = keys
                .get(&kname)
                .cloned()
                .ok_or(MessageParseError::UnknownKey {
                    name: kname,
                    position: kat,
                })?;
            cur.expect(Token::RParen)?;
            Ok(encr(body, key))
        }
        _ if applied => Err(SyntaxError::new(
            at,
            format!("unknown constructor `{name}`, expected `pair` or `enc`"),
        )
        .into()),
        _ => {
            if let Some(k) = keys.get(&name) {
                return Ok(Message::Key(k.clone()));
            }
            match atoms {
                Some(set) if !set.contains(&name) => {
                    Err(MessageParseError::UnknownIdentifier { name, position: at })
                }
                _ => Ok(Message::atom(name)),
            }
        }
    }
}

/// Canonical rendering: the grammar above, no whitespace.
pub fn render_message(m: &Message) -> String {
    m.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::Key;

    fn keys() -> KeySpace {
        let mut ks = KeySpace::new();
        ks.declare_pair("kB", "skB").unwrap();
        ks.declare_symmetric("pa").unwrap();
        ks
    }

    #[test]
    fn parses_nested_terms() {
        let ks = keys();
        let m = parse_message("enc(pair(nA,A),kB)", &ks).unwrap();
        let kb = ks.get("kB").unwrap().clone();
        assert_eq!(m, encr(conc(Message::atom("nA"), Message::atom("A")), kb));
        assert_eq!(render_message(&m), "enc(pair(nA,A),kB)");
        // whitespace is tolerated on input
        assert_eq!(parse_message(" enc( pair(nA , A) , kB ) ", &ks).unwrap(), m);
    }

    #[test]
    fn bare_key_identifier_is_a_key() {
        let ks = keys();
        assert_eq!(
            parse_message("pa", &ks).unwrap(),
            Message::Key(Key::symmetric("pa"))
        );
    }

    #[test]
    fn unbalanced_input_is_a_syntax_error() {
        let err = parse_message("enc(nA", &keys()).unwrap_err();
        match err {
            MessageParseError::Syntax(e) => assert_eq!(e.position, 6),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_message("pair(a,b) c", &keys()).is_err());
        assert!(parse_message("", &keys()).is_err());
        assert!(parse_message("f(a)", &keys()).is_err());
    }

    #[test]
    fn encryption_requires_declared_key() {
        let err = parse_message("enc(x,nope)", &keys()).unwrap_err();
        assert_eq!(
            err,
            MessageParseError::UnknownKey {
                name: "nope".into(),
                position: 6
            }
        );
    }

    #[test]
    fn strict_mode_rejects_undeclared_atoms() {
        let atoms: BTreeSet<String> = ["nA".to_string()].into();
        assert!(parse_message_strict("pair(nA,kB)", &keys(), &atoms).is_ok());
        assert!(matches!(
            parse_message_strict("pair(nA,zz)", &keys(), &atoms),
            Err(MessageParseError::UnknownIdentifier { .. })
        ));
    }
}
