//! Lowe's offline guessing model.
//!
//! A guess `m` is *validated* by a message set `H` when some value `v`
//! derived from `H ∪ {m}` in a way that depends on `m` can be checked: it is
//! derived a second way, it was already present, or it is a key whose
//! inverse is at hand. Derivations are traces of tagged one-step reductions
//! that never undo an earlier step.
//!
//! [`guess`] decides validation by a fixpoint loop over the reductions of
//! `H ∪ {m}`; [`validates`] decides it by exhaustive search over monotone
//! traces and serves as its oracle.

mod guess;
mod oracle;

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::dolev_yao::{dy_closure, MessageSet};
use crate::term::{encr, Key, Message};

pub use guess::{a_lowe, guess, guess_witness, Clause, GuessConfig, GuessState, Witness};
pub use oracle::{lowe_derives, validates, validation_witness};

/// The kind of a one-step reduction. The derived order is the canonical
/// exploration order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Tag {
    Enc,
    Dec,
    Fst,
    Snd,
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tag::Enc => "enc",
            Tag::Dec => "dec",
            Tag::Fst => "fst",
            Tag::Snd => "snd",
        })
    }
}

/// `S ▷_l v`. Field order fixes the canonical total order: tag, then
/// premises, then conclusion.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Reduction {
    tag: Tag,
    premises: Vec<Message>,
    conclusion: Message,
}

impl Reduction {
    /// `{m, k} ▷_enc {m}_k`.
    pub fn enc(body: Message, key: Key) -> Self {
        let conclusion = encr(body.clone(), key.clone());
        Reduction {
            tag: Tag::Enc,
            premises: premise_set([body, Message::Key(key)]),
            conclusion,
        }
    }

    /// `{{m}_k, k⁻¹} ▷_dec m`. `None` unless `cipher` is a ciphertext.
    pub fn dec(cipher: &Message) -> Option<Self> {
        match cipher {
            Message::Encrypt(body, k) => Some(Reduction {
                tag: Tag::Dec,
                premises: premise_set([cipher.clone(), Message::Key(k.inverse())]),
                conclusion: (**body).clone(),
            }),
            _ => None,
        }
    }

    pub fn fst(pair: &Message) -> Option<Self> {
        pair.first().map(|a| Reduction {
            tag: Tag::Fst,
            premises: vec![pair.clone()],
            conclusion: a.clone(),
        })
    }

    pub fn snd(pair: &Message) -> Option<Self> {
        pair.second().map(|b| Reduction {
            tag: Tag::Snd,
            premises: vec![pair.clone()],
            conclusion: b.clone(),
        })
    }

    pub fn tag(&self) -> Tag {
        self.tag
    }

    pub fn premises(&self) -> &[Message] {
        &self.premises
    }

    pub fn conclusion(&self) -> &Message {
        &self.conclusion
    }

    /// The ciphertext an enc step builds or a dec step opens.
    pub fn cipher(&self) -> Option<&Message> {
        match self.tag {
            Tag::Enc => Some(&self.conclusion),
            Tag::Dec => self.premises.iter().find(|p| p.is_encrypt()),
            _ => None,
        }
    }

    pub fn applicable(&self, h: &MessageSet) -> bool {
        self.premises.iter().all(|p| h.contains(p))
    }
}

fn premise_set<const N: usize>(ms: [Message; N]) -> Vec<Message> {
    let set: BTreeSet<Message> = ms.into_iter().collect();
    set.into_iter().collect()
}

impl fmt::Display for Reduction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, p) in self.premises.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, "}} ▷{} {}", self.tag, self.conclusion)
    }
}

impl fmt::Debug for Reduction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

pub type Trace = Vec<Reduction>;

/// `[H]_t`, or `None` when some step's premises are missing when it runs.
pub fn apply_trace(h: &MessageSet, t: &[Reduction]) -> Option<MessageSet> {
    let mut cur = h.clone();
    for step in t {
        if !step.applicable(&cur) {
            return None;
        }
        cur.insert(step.conclusion.clone());
    }
    Some(cur)
}

/// Whether one step undoes the other: an encryption and a decryption of the
/// same ciphertext, in either role. There is no pairing step, so
/// projections are never undone.
pub fn undoes(r1: &Reduction, r2: &Reduction) -> bool {
    let opposite = matches!(
        (r1.tag, r2.tag),
        (Tag::Enc, Tag::Dec) | (Tag::Dec, Tag::Enc)
    );
    opposite && r1.cipher() == r2.cipher()
}

pub fn is_monotone(t: &[Reduction]) -> bool {
    t.iter()
        .enumerate()
        .all(|(i, later)| t[..i].iter().all(|earlier| !undoes(later, earlier)))
}

/// `m` occurs inside some element of `h`, looking through pairs and
/// ciphertext bodies.
pub fn sub(m: &Message, h: &MessageSet) -> bool {
    h.iter().any(|x| m.is_submessage_of(x))
}

/// All one-step reductions whose premises lie in `h`. Encryption steps are
/// only formed when the ciphertext occurs inside `h`.
pub fn one_step_reductions(h: &MessageSet) -> BTreeSet<Reduction> {
    let mut out = BTreeSet::new();
    let mut inside = MessageSet::new();
    for m in h {
        inside.extend(m.submessages());
        match m {
            Message::Concat(..) => {
                out.extend(Reduction::fst(m));
                out.extend(Reduction::snd(m));
            }
            Message::Encrypt(_, k) if h.contains(&Message::Key(k.inverse())) => {
                out.extend(Reduction::dec(m));
            }
            _ => {}
        }
    }
    for c in &inside {
        if let Message::Encrypt(body, k) = c {
            if h.contains(body) && h.contains(&Message::Key(k.clone())) {
                out.insert(Reduction::enc((**body).clone(), k.clone()));
            }
        }
    }
    out
}

/// Closure of `h` under [`one_step_reductions`].
pub fn reduce(h: &MessageSet) -> MessageSet {
    let mut cur = h.clone();
    loop {
        let before = cur.len();
        for r in one_step_reductions(&cur) {
            cur.insert(r.conclusion);
        }
        if cur.len() == before {
            return cur;
        }
    }
}

/// Membership in everything any trace can reach from a base set, with
/// unrestricted encryption. Analysis is closed first; encryption then only
/// synthesises, since opening a freshly built ciphertext yields nothing
/// new.
#[derive(Debug, Clone)]
pub struct Reachable {
    analysed: MessageSet,
}

impl Reachable {
    pub fn new(base: &MessageSet) -> Self {
        Reachable {
            analysed: dy_closure(base),
        }
    }

    pub fn contains(&self, m: &Message) -> bool {
        if self.analysed.contains(m) {
            return true;
        }
        match m {
            Message::Encrypt(body, k) => {
                self.analysed.contains(&Message::Key(k.clone())) && self.contains(body)
            }
            _ => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(s: &str) -> Message {
        Message::atom(s)
    }

    fn pair(a: Message, b: Message) -> Message {
        crate::term::conc(a, b)
    }

    #[test]
    fn projections() {
        let p = pair(at("m1"), at("m2"));
        let rs = one_step_reductions(&[p.clone()].into());
        let want: BTreeSet<_> = [Reduction::fst(&p).unwrap(), Reduction::snd(&p).unwrap()].into();
        assert_eq!(rs, want);
        assert_eq!(reduce(&[p.clone()].into()), [p, at("m1"), at("m2")].into());
        assert!(reduce(&MessageSet::new()).is_empty());
    }

    #[test]
    fn encryption_guarded_by_occurrence() {
        let pa = Key::symmetric("pa");
        let ct = encr(at("ns"), pa.clone());
        let h: MessageSet = [at("ns"), Message::Key(pa.clone()), ct].into();
        assert!(one_step_reductions(&h).contains(&Reduction::enc(at("ns"), pa.clone())));
        let bare: MessageSet = [at("ns"), Message::Key(pa)].into();
        assert!(one_step_reductions(&bare)
            .iter()
            .all(|r| r.tag() != Tag::Enc));
    }

    #[test]
    fn sub_looks_inside_ciphertexts() {
        let ct = encr(at("ns"), Key::symmetric("pa"));
        assert!(sub(&at("ns"), &[ct.clone()].into()));
        assert!(!sub(&Message::Key(Key::symmetric("pa")), &[ct].into()));
    }

    #[test]
    fn trace_application() {
        let p = pair(at("m1"), at("m2"));
        let h: MessageSet = [p.clone()].into();
        assert_eq!(apply_trace(&h, &[]), Some(h.clone()));
        let t = vec![Reduction::fst(&p).unwrap()];
        assert_eq!(apply_trace(&h, &t), Some([p, at("m1")].into()));
        assert_eq!(apply_trace(&MessageSet::new(), &t), None);
    }

    #[test]
    fn undo_pairs() {
        let k = Key::symmetric("k");
        let ct = encr(at("m"), k.clone());
        let e = Reduction::enc(at("m"), k.clone());
        let d = Reduction::dec(&ct).unwrap();
        assert!(undoes(&e, &d));
        assert!(undoes(&d, &e));
        assert!(is_monotone(&[]));
        assert!(!is_monotone(&[d.clone(), e.clone()]));
        assert!(is_monotone(&[d]));
        let other = Reduction::enc(at("m"), Key::symmetric("k2"));
        assert!(!undoes(&e, &other));
    }

    #[test]
    fn reachability_synthesises_ciphertexts() {
        let k = Key::symmetric("k");
        let r = Reachable::new(&[at("n"), Message::Key(k.clone())].into());
        assert!(r.contains(&encr(encr(at("n"), k.clone()), k.clone())));
        assert!(!r.contains(&encr(at("x"), k)));
    }

    #[test]
    fn canonical_order_is_tag_first() {
        let k = Key::symmetric("k");
        let p = pair(at("a"), at("b"));
        assert!(Reduction::enc(at("z"), k.clone()) < Reduction::fst(&p).unwrap());
        assert!(Reduction::dec(&encr(at("a"), k)).unwrap() < Reduction::fst(&p).unwrap());
    }
}
