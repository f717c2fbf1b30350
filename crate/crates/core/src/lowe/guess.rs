//! The guessing procedure and the Lowe knowledge algorithm.
//!
//! Starting from `G = H ∪ {m}`, the loop repeatedly fires the first
//! applicable unexplored reduction (canonical order) and tests it against
//! the validation clauses. A step *depends on the guess* when its premises
//! are not all reachable from `H` alone.
//!
//! A monotone trace cannot contain both halves of an enc/dec undo pair, so
//! the loop runs once per choice of which half to drop. Undo pairs are
//! disjoint (a ciphertext has one inverse key), so there are `2^p` choices
//! for `p` pairs. Within one choice every allowed step eventually fires, and
//! the answer does not depend on the firing order.

use serde::Serialize;

use super::{one_step_reductions, reduce, undoes, Reachable, Reduction, Tag};
use crate::adversary::evaluate_local;
use crate::answer::Answer;
use crate::dolev_yao::{knowledge_base, DyView, MessageSet};
use crate::formula::Formula;
use crate::history::{Agent, History};
use crate::term::Message;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Clause {
    /// The validator is derived a second way.
    A,
    /// The validator is already in `H ∪ {m}`.
    B,
    /// The validator is a key whose inverse is derivable.
    C,
}

impl std::fmt::Display for Clause {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Clause::A => "a",
            Clause::B => "b",
            Clause::C => "c",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GuessConfig {
    /// Clause (a) requires the second derivation to differ in both premise
    /// set and tag, instead of in the pair `(S, l)`.
    pub strict_second_derivation: bool,
}

/// The step that produced the validator and the clause that accepted it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub step: Reduction,
    pub clause: Clause,
    /// The other derivation of the validator, for clause (a).
    pub other: Option<Reduction>,
}

impl Witness {
    pub fn validator(&self) -> &Message {
        self.step.conclusion()
    }
}

/// Accumulated messages and performed reductions of one loop.
#[derive(Clone, Debug, Default)]
pub struct GuessState {
    pub accumulated: MessageSet,
    pub reds: Vec<(Reduction, bool)>,
}

struct Run<'a> {
    start: &'a MessageSet,
    from_h: &'a Reachable,
    cfg: GuessConfig,
}

impl Run<'_> {
    fn second_derivation(&self, x: &Reduction, y: &Reduction) -> bool {
        if self.cfg.strict_second_derivation {
            x.premises() != y.premises() && x.tag() != y.tag()
        } else {
            x != y
        }
    }

    fn explore(&self, allowed: &[&Reduction]) -> (GuessState, Option<Witness>) {
        let mut st = GuessState {
            accumulated: self.start.clone(),
            reds: Vec::new(),
        };
        let mut done = vec![false; allowed.len()];
        loop {
            let Some(i) =
                (0..allowed.len()).find(|&i| !done[i] && allowed[i].applicable(&st.accumulated))
            else {
                return (st, None);
            };
            done[i] = true;
            let s = allowed[i];
            let v = s.conclusion();
            let fresh = s.premises().iter().any(|p| !self.from_h.contains(p));
            st.accumulated.insert(v.clone());

            let mut found = None;
            if fresh {
                if self.start.contains(v) {
                    found = Some(witness(s, Clause::B, None));
                } else if inverse_present(v, &st.accumulated) {
                    found = Some(witness(s, Clause::C, None));
                }
            }
            if found.is_none() {
                found = st
                    .reds
                    .iter()
                    .find(|(f, f_fresh)| {
                        f.conclusion() == v && (fresh || *f_fresh) && self.second_derivation(f, s)
                    })
                    .map(|(f, f_fresh)| {
                        if fresh {
                            witness(s, Clause::A, Some(f))
                        } else {
                            debug_assert!(*f_fresh);
                            witness(f, Clause::A, Some(s))
                        }
                    });
            }
            if found.is_none() {
                if let Message::Key(k) = v {
                    let inv = Message::Key(k.inverse());
                    found = st
                        .reds
                        .iter()
                        .find(|(f, f_fresh)| *f_fresh && f.conclusion() == &inv)
                        .map(|(f, _)| witness(f, Clause::C, None));
                }
            }
            st.reds.push((s.clone(), fresh));
            if found.is_some() {
                return (st, found);
            }
        }
    }
}

fn witness(step: &Reduction, clause: Clause, other: Option<&Reduction>) -> Witness {
    Witness {
        step: step.clone(),
        clause,
        other: other.cloned(),
    }
}

fn inverse_present(v: &Message, h: &MessageSet) -> bool {
    match v {
        Message::Key(k) => h.contains(&Message::Key(k.inverse())),
        _ => false,
    }
}

/// Runs the guessing loop for guess `m` against the message set `h`.
pub fn guess_set(h: &MessageSet, m: &Message, cfg: GuessConfig) -> Option<Witness> {
    let mut start = h.clone();
    start.insert(m.clone());
    let from_h = Reachable::new(h);
    let universe: Vec<Reduction> = one_step_reductions(&reduce(&start)).into_iter().collect();

    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (i, e) in universe.iter().enumerate() {
        if e.tag() == Tag::Enc {
            if let Some(j) = universe.iter().position(|d| undoes(d, e)) {
                pairs.push((i, j));
            }
        }
    }
    assert!(pairs.len() < 32, "too many undo pairs to enumerate");

    let run = Run {
        start: &start,
        from_h: &from_h,
        cfg,
    };
    for choice in 0u32..(1u32 << pairs.len()) {
        let mut dropped = vec![false; universe.len()];
        for (bit, &(enc, dec)) in pairs.iter().enumerate() {
            if choice >> bit & 1 == 0 {
                dropped[dec] = true;
            } else {
                dropped[enc] = true;
            }
        }
        let allowed: Vec<&Reduction> = universe
            .iter()
            .zip(&dropped)
            .filter(|(_, d)| !**d)
            .map(|(r, _)| r)
            .collect();
        if let (_, Some(w)) = run.explore(&allowed) {
            return Some(w);
        }
    }
    None
}

/// The validator found for guess `m` from the received messages and
/// initial keys of `local`, if any.
pub fn guess_witness(m: &Message, local: &History, cfg: GuessConfig) -> Option<Witness> {
    guess_set(&knowledge_base(local), m, cfg)
}

/// `Yes` when the guess `m` can be validated from `local`, else `No`.
pub fn guess(m: &Message, local: &History) -> Answer {
    Answer::from(guess_witness(m, local, GuessConfig::default()).is_some())
}

/// The Lowe knowledge algorithm for `owner`: Dolev-Yao first, then guessing.
pub fn a_lowe(phi: &Formula, local: &History, owner: &Agent, cfg: GuessConfig) -> Answer {
    let view = DyView::new(local);
    let base = knowledge_base(local);
    evaluate_local(phi, owner, &mut |m| {
        Answer::from(view.has(m) || guess_set(&base, m, cfg).is_some())
    })
}
