//! The free message algebra.
//!
//! Messages are built from plaintext atoms and keys by pairing and
//! encryption. Equality is purely structural: a ciphertext equals another
//! only when both body and key coincide, and every message has exactly one
//! decomposition.

pub(crate) mod parse;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use parse::{parse_message, parse_message_strict, render_message, MessageParseError};

/// A plaintext constant: nonce, agent name, password, key bit.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom(Arc<str>);

impl Atom {
    pub fn new(name: impl AsRef<str>) -> Self {
        Atom(Arc::from(name.as_ref()))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeyKind {
    Symmetric,
    Public,
    Private,
}

impl KeyKind {
    fn inverse(self) -> Self {
        match self {
            KeyKind::Symmetric => KeyKind::Symmetric,
            KeyKind::Public => KeyKind::Private,
            KeyKind::Private => KeyKind::Public,
        }
    }
}

/// An encryption key. Each key carries the name of its inverse, so
/// `k.inverse().inverse() == k` holds by construction and symmetric keys
/// are their own inverse.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Key {
    name: Arc<str>,
    inverse: Arc<str>,
    kind: KeyKind,
}

impl Key {
    pub fn symmetric(name: impl AsRef<str>) -> Self {
        let name: Arc<str> = Arc::from(name.as_ref());
        Key {
            inverse: name.clone(),
            name,
            kind: KeyKind::Symmetric,
        }
    }

    /// Builds a public/private pair that are each other's inverse.
    pub fn pair(public: impl AsRef<str>, private: impl AsRef<str>) -> (Key, Key) {
        let public: Arc<str> = Arc::from(public.as_ref());
        let private: Arc<str> = Arc::from(private.as_ref());
        (
            Key {
                name: public.clone(),
                inverse: private.clone(),
                kind: KeyKind::Public,
            },
            Key {
                name: private,
                inverse: public,
                kind: KeyKind::Private,
            },
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> KeyKind {
        self.kind
    }

    pub fn inverse(&self) -> Key {
        Key {
            name: self.inverse.clone(),
            inverse: self.name.clone(),
            kind: self.kind.inverse(),
        }
    }

    pub fn is_self_inverse(&self) -> bool {
        self.name == self.inverse
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl fmt::Debug for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// A term of the free algebra `m ::= p | k | {m}_k | m·m`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Message {
    Atom(Atom),
    Key(Key),
    Concat(Arc<Message>, Arc<Message>),
    Encrypt(Arc<Message>, Key),
}

impl From<Atom> for Message {
    fn from(a: Atom) -> Self {
        Message::Atom(a)
    }
}

impl From<Key> for Message {
    fn from(k: Key) -> Self {
        Message::Key(k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum DecryptError {
    #[error("message is not a ciphertext")]
    NotCiphertext,
    #[error("key does not open this ciphertext")]
    KeyMismatch,
}

/// `m1·m2`.
pub fn conc(m1: Message, m2: Message) -> Message {
    Message::Concat(Arc::new(m1), Arc::new(m2))
}

/// `{m}_k`.
pub fn encr(m: Message, k: Key) -> Message {
    Message::Encrypt(Arc::new(m), k)
}

/// Opens `{body}_k'` with `k` when `k` is the inverse of `k'`.
pub fn decr(m: &Message, k: &Key) -> Result<Message, DecryptError> {
    match m {
        Message::Encrypt(body, used) if used.inverse() == *k => Ok((**body).clone()),
        Message::Encrypt(..) => Err(DecryptError::KeyMismatch),
        _ => Err(DecryptError::NotCiphertext),
    }
}

impl Message {
    pub fn atom(name: impl AsRef<str>) -> Self {
        Message::Atom(Atom::new(name))
    }

    pub fn first(&self) -> Option<&Message> {
        match self {
            Message::Concat(a, _) => Some(a),
            _ => None,
        }
    }

    pub fn second(&self) -> Option<&Message> {
        match self {
            Message::Concat(_, b) => Some(b),
            _ => None,
        }
    }

    pub fn is_atom(&self) -> bool {
        matches!(self, Message::Atom(_))
    }

    pub fn is_key(&self) -> bool {
        matches!(self, Message::Key(_))
    }

    pub fn is_concat(&self) -> bool {
        matches!(self, Message::Concat(..))
    }

    pub fn is_encrypt(&self) -> bool {
        matches!(self, Message::Encrypt(..))
    }

    pub fn as_key(&self) -> Option<&Key> {
        match self {
            Message::Key(k) => Some(k),
            _ => None,
        }
    }

    /// Height of the term tree; atoms and keys have depth 1.
    pub fn depth(&self) -> usize {
        match self {
            Message::Atom(_) | Message::Key(_) => 1,
            Message::Concat(a, b) => 1 + a.depth().max(b.depth()),
            Message::Encrypt(body, _) => 1 + body.depth(),
        }
    }

    /// The submessage relation `self ⊑ other`: `self` occurs in `other`
    /// through pairing components or encryption bodies. Encryption keys are
    /// not submessages of the ciphertext.
    pub fn is_submessage_of(&self, other: &Message) -> bool {
        if self == other {
            return true;
        }
        match other {
            Message::Concat(a, b) => self.is_submessage_of(a) || self.is_submessage_of(b),
            Message::Encrypt(body, _) => self.is_submessage_of(body),
            _ => false,
        }
    }

    /// Every `m` with `m ⊑ self`.
    pub fn submessages(&self) -> BTreeSet<Message> {
        let mut out = BTreeSet::new();
        self.collect_submessages(&mut out);
        out
    }

    fn collect_submessages(&self, out: &mut BTreeSet<Message>) {
        if !out.insert(self.clone()) {
            return;
        }
        match self {
            Message::Concat(a, b) => {
                a.collect_submessages(out);
                b.collect_submessages(out);
            }
            Message::Encrypt(body, _) => body.collect_submessages(out),
            _ => {}
        }
    }

    /// All subterms, including the keys used to encrypt.
    pub fn subterms(&self) -> BTreeSet<Message> {
        let mut out = BTreeSet::new();
        self.collect_subterms(&mut out);
        out
    }

    fn collect_subterms(&self, out: &mut BTreeSet<Message>) {
        if !out.insert(self.clone()) {
            return;
        }
        match self {
            Message::Concat(a, b) => {
                a.collect_subterms(out);
                b.collect_subterms(out);
            }
            Message::Encrypt(body, k) => {
                body.collect_subterms(out);
                out.insert(Message::Key(k.clone()));
            }
            _ => {}
        }
    }
}

/// `m1 ⊑ m2`.
pub fn submessage(m1: &Message, m2: &Message) -> bool {
    m1.is_submessage_of(m2)
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Message::Atom(a) => write!(f, "{a}"),
            Message::Key(k) => write!(f, "{k}"),
            Message::Concat(a, b) => write!(f, "pair({a},{b})"),
            Message::Encrypt(body, k) => write!(f, "enc({body},{k})"),
        }
    }
}

impl fmt::Debug for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KeySpaceError {
    #[error("key `{0}` is declared more than once")]
    Duplicate(String),
    #[error("`{0}` is not a valid identifier")]
    BadName(String),
}

/// The keys declared for a scenario, closed under inversion.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeySpace {
    keys: BTreeMap<String, Key>,
}

impl KeySpace {
    pub fn new() -> Self {
        Self::default()
    }

    fn insert(&mut self, key: Key) -> Result<(), KeySpaceError> {
        if !crate::syntax::is_ident(key.name()) {
            return Err(KeySpaceError::BadName(key.name().to_string()));
        }
        if self.keys.contains_key(key.name()) {
            return Err(KeySpaceError::Duplicate(key.name().to_string()));
        }
        self.keys.insert(key.name().to_string(), key);
        Ok(())
    }

    pub fn declare_symmetric(&mut self, name: &str) -> Result<Key, KeySpaceError> {
        let k = Key::symmetric(name);
        self.insert(k.clone())?;
        Ok(k)
    }

    pub fn declare_pair(
        &mut self,
        public: &str,
        private: &str,
    ) -> Result<(Key, Key), KeySpaceError> {
        if public == private {
            return Err(KeySpaceError::Duplicate(public.to_string()));
        }
        let (pk, sk) = Key::pair(public, private);
        self.insert(pk.clone())?;
        self.insert(sk.clone())?;
        Ok((pk, sk))
    }

    pub fn get(&self, name: &str) -> Option<&Key> {
        self.keys.get(name)
    }

    pub fn contains(&self, key: &Key) -> bool {
        self.keys.get(key.name()) == Some(key)
    }

    pub fn inverse(&self, key: &Key) -> Option<&Key> {
        self.keys.get(key.inverse().name())
    }

    pub fn keys(&self) -> impl Iterator<Item = &Key> {
        self.keys.values()
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(n: &str) -> Message {
        Message::atom(n)
    }

    #[test]
    fn pairing_projections() {
        let m = conc(a("nA"), a("A"));
        assert_eq!(m.to_string(), "pair(nA,A)");
        assert_eq!(m.first(), Some(&a("nA")));
        assert_eq!(m.second(), Some(&a("A")));
        assert_eq!(a("nA").first(), None);
    }

    #[test]
    fn encryption_and_inverse() {
        let pa = Key::symmetric("pa");
        let c = encr(a("ns"), pa.clone());
        assert_eq!(c.to_string(), "enc(ns,pa)");
        assert_eq!(decr(&c, &pa.inverse()), Ok(a("ns")));

        let (pk, sk) = Key::pair("pkB", "skB");
        let m = conc(a("nA"), a("A"));
        assert_eq!(decr(&encr(m.clone(), pk.clone()), &sk), Ok(m.clone()));
        assert_eq!(
            decr(&encr(m.clone(), pk.clone()), &pk),
            Err(DecryptError::KeyMismatch)
        );
        assert_eq!(decr(&m, &sk), Err(DecryptError::NotCiphertext));
        assert_ne!(encr(m.clone(), pk), encr(m, sk));
    }

    #[test]
    fn key_inverse_is_involutive() {
        let (pk, sk) = Key::pair("pk", "sk");
        assert_eq!(pk.inverse(), sk);
        assert_eq!(sk.inverse(), pk);
        assert_eq!(pk.inverse().inverse(), pk);
        let k = Key::symmetric("k");
        assert_eq!(k.inverse(), k);
        assert!(k.is_self_inverse());
        assert!(!pk.is_self_inverse());
    }

    #[test]
    fn submessage_clauses() {
        let (_, ka) = Key::pair("pkA", "skA");
        let m = encr(conc(a("nA"), conc(a("nB"), a("B"))), ka.clone());
        assert!(a("nA").is_submessage_of(&m));
        assert!(m.is_submessage_of(&m));
        // the encryption key is not a submessage
        assert!(!Message::Key(ka.clone()).is_submessage_of(&m));
        assert!(!conc(a("nA"), a("nB")).is_submessage_of(&encr(a("nA"), ka)));
    }

    #[test]
    fn depth_counts_leaves_as_one() {
        let k = Key::symmetric("k");
        assert_eq!(a("x").depth(), 1);
        assert_eq!(conc(a("x"), a("y")).depth(), 2);
        assert_eq!(encr(conc(a("x"), a("y")), k).depth(), 3);
    }

    #[test]
    fn keyspace_rejects_duplicates() {
        let mut ks = KeySpace::new();
        ks.declare_pair("pk", "sk").unwrap();
        assert_eq!(
            ks.declare_symmetric("pk"),
            Err(KeySpaceError::Duplicate("pk".into()))
        );
        let pk = ks.get("pk").unwrap().clone();
        assert_eq!(ks.inverse(&pk).unwrap().name(), "sk");
    }
}
