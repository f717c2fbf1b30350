//! Dolev-Yao deduction and the knowledge algorithm built on it.
//!
//! [`dy_derives`] is the closure of a message set under the four analysis
//! rules (membership, decryption with a derivable inverse key, first and
//! second projection). [`a_dy`] answers the same question by the
//! recursive key-collection procedure over a local history, without ever
//! materialising the closure.

use std::collections::BTreeSet;

use crate::adversary::evaluate_local;
use crate::answer::Answer;
use crate::formula::Formula;
use crate::history::{Agent, History};
use crate::term::{Key, Message};

pub type MessageSet = BTreeSet<Message>;

/// Closure of `h` under projection and decryption.
///
/// Every element of the result is a submessage of `h`, so the loop
/// terminates after at most as many rounds as `h` has submessages.
pub fn dy_closure(h: &MessageSet) -> MessageSet {
    let mut known = h.clone();
    loop {
        let mut fresh = Vec::new();
        for m in &known {
            match m {
                Message::Concat(a, b) => {
                    for part in [a, b] {
                        if !known.contains(&**part) {
                            fresh.push((**part).clone());
                        }
                    }
                }
                Message::Encrypt(body, k)
                    if known.contains(&Message::Key(k.inverse())) && !known.contains(&**body) =>
                {
                    fresh.push((**body).clone());
                }
                _ => {}
            }
        }
        if fresh.is_empty() {
            return known;
        }
        known.extend(fresh);
    }
}

/// `h ⊢ m` in the Dolev-Yao analysis rules.
pub fn dy_derives(h: &MessageSet, m: &Message) -> bool {
    h.contains(m) || dy_closure(h).contains(m)
}

/// Whether `m` can be dug out of `m2` by splitting pairs and opening
/// ciphertexts whose inverse key is in `keys`.
pub fn submsg(m: &Message, m2: &Message, keys: &BTreeSet<Key>) -> bool {
    if m == m2 {
        return true;
    }
    match m2 {
        Message::Concat(a, b) => submsg(m, a, keys) || submsg(m, b, keys),
        Message::Encrypt(body, k) => keys.contains(&k.inverse()) && submsg(m, body, keys),
        _ => false,
    }
}

/// Keys visible inside `m` given the decryption keys `keys`.
pub fn getkeys(m: &Message, keys: &BTreeSet<Key>) -> BTreeSet<Key> {
    let mut out = BTreeSet::new();
    collect_keys(m, keys, &mut out);
    out
}

fn collect_keys(m: &Message, keys: &BTreeSet<Key>, out: &mut BTreeSet<Key>) {
    match m {
        Message::Key(k) => {
            out.insert(k.clone());
        }
        Message::Concat(a, b) => {
            collect_keys(a, keys, out);
            collect_keys(b, keys, out);
        }
        Message::Encrypt(body, k) if keys.contains(&k.inverse()) => collect_keys(body, keys, out),
        _ => {}
    }
}

pub fn initkeys(local: &History) -> &BTreeSet<Key> {
    local.initial_keys()
}

/// Least fixpoint of `K ↦ initkeys ∪ ⋃ getkeys(m, K)` over received `m`.
///
/// The initial keys stay in the union on every round.
pub fn keysof(local: &History) -> BTreeSet<Key> {
    let mut keys = initkeys(local).clone();
    loop {
        let mut next = initkeys(local).clone();
        for m in local.received() {
            collect_keys(m, &keys, &mut next);
        }
        if next == keys {
            return keys;
        }
        keys = next;
    }
}

/// Precomputed view of a history for repeated `has` queries.
#[derive(Debug, Clone)]
pub struct DyView<'a> {
    local: &'a History,
    keys: BTreeSet<Key>,
}

impl<'a> DyView<'a> {
    pub fn new(local: &'a History) -> Self {
        DyView {
            keys: keysof(local),
            local,
        }
    }

    pub fn keys(&self) -> &BTreeSet<Key> {
        &self.keys
    }

    /// The owner's `has(m)` answer: never `?`.
    pub fn has(&self, m: &Message) -> bool {
        if let Message::Key(k) = m {
            if initkeys(self.local).contains(k) {
                return true;
            }
        }
        self.local.received().any(|m2| submsg(m, m2, &self.keys))
    }
}

/// The Dolev-Yao knowledge algorithm for `owner`.
pub fn a_dy(phi: &Formula, local: &History, owner: &Agent) -> Answer {
    let view = DyView::new(local);
    evaluate_local(phi, owner, &mut |m| Answer::from(view.has(m)))
}

/// Received messages together with the initial keys, as a message set.
pub fn knowledge_base(local: &History) -> MessageSet {
    local
        .received()
        .cloned()
        .chain(initkeys(local).iter().cloned().map(Message::Key))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::{conc, encr};

    fn at(s: &str) -> Message {
        Message::atom(s)
    }

    #[test]
    fn closure_examples() {
        let (m1, m2) = (at("m1"), at("m2"));
        assert!(dy_derives(&[conc(m1.clone(), m2)].into(), &m1));
        let k = Key::symmetric("k");
        let ct = encr(at("m"), k.clone());
        assert!(dy_derives(
            &[ct, Message::Key(k.inverse())].into(),
            &at("m")
        ));
        let pa = Key::symmetric("pa");
        let h: MessageSet = [at("ns"), encr(at("ns"), pa.clone())].into();
        assert!(!dy_derives(&h, &Message::Key(pa)));
    }

    #[test]
    fn decryption_needs_the_inverse() {
        let (pk, sk) = Key::pair("pkB", "skB");
        let ct = encr(conc(at("nA"), at("A")), pk.clone());
        assert!(!dy_derives(
            &[ct.clone(), Message::Key(pk)].into(),
            &at("nA")
        ));
        assert!(dy_derives(&[ct, Message::Key(sk)].into(), &at("nA")));
    }

    #[test]
    fn submsg_examples() {
        let (pk, sk) = Key::pair("kB", "skB");
        let ct = encr(conc(at("nA"), at("A")), pk);
        assert!(submsg(&at("x"), &at("x"), &BTreeSet::new()));
        assert!(submsg(&at("nA"), &ct, &[sk].into()));
        assert!(!submsg(&at("nA"), &ct, &BTreeSet::new()));
    }

    #[test]
    fn getkeys_examples() {
        let k = Key::symmetric("k");
        assert_eq!(
            getkeys(&Message::Key(k.clone()), &BTreeSet::new()),
            [k.clone()].into()
        );
        let (k2, k2inv) = Key::pair("k2", "k2inv");
        let ct = encr(Message::Key(k.clone()), k2);
        assert_eq!(getkeys(&ct, &[k2inv].into()), [k].into());
        assert!(getkeys(&ct, &BTreeSet::new()).is_empty());
    }

    #[test]
    fn keysof_examples() {
        let kb = Key::symmetric("kB");
        assert_eq!(keysof(&History::new([kb.clone()].into())), [kb].into());

        let k1 = Key::symmetric("k1");
        let (k2, k2inv) = Key::pair("k2", "k2inv");
        let ct = encr(Message::Key(k1.clone()), k2);
        let h = History::receiving([k2inv.clone()].into(), [ct.clone()]);
        assert_eq!(keysof(&h), [k2inv, k1].into());
        let h = History::receiving(BTreeSet::new(), [ct]);
        assert!(keysof(&h).is_empty());
    }

    #[test]
    fn keysof_chains_through_received_keys() {
        let (k2, k2inv) = Key::pair("k2", "k2inv");
        let (k3, k3inv) = Key::pair("k3", "k3inv");
        let h = History::receiving(
            [k3inv].into(),
            [
                encr(Message::Key(Key::symmetric("k1")), k2),
                encr(Message::Key(k2inv), k3),
            ],
        );
        assert!(keysof(&h).contains(&Key::symmetric("k1")));
    }

    #[test]
    fn a_dy_answers() {
        let a = Agent::new("a");
        let pa = Key::symmetric("pa");
        let h = History::receiving(BTreeSet::new(), [at("ns"), encr(at("ns"), pa.clone())]);
        assert_eq!(
            a_dy(&Formula::has(&a, Message::Key(pa)), &h, &a),
            Answer::No
        );
        let h = History::receiving(BTreeSet::new(), [at("ns")]);
        assert_eq!(a_dy(&Formula::has(&a, at("ns")), &h, &a), Answer::Yes);
        let b = Agent::new("b");
        let k = Formula::know(&b, Formula::has(&b, at("ns")));
        assert_eq!(a_dy(&k, &h, &a), Answer::Unknown);
    }

    #[test]
    fn initial_keys_are_known_without_receipt() {
        let a = Agent::new("a");
        let k = Key::symmetric("k");
        let h = History::new([k.clone()].into());
        assert_eq!(
            a_dy(&Formula::has(&a, Message::Key(k)), &h, &a),
            Answer::Yes
        );
    }
}
