//! Validation by exhaustive search over monotone traces.
//!
//! Every validating trace can be trimmed to one whose steps each add a new
//! message, except for at most one step that re-derives a message already
//! present (the validator itself, under clause (a) or (b)). Encryption steps
//! building a ciphertext outside `H ∪ {m}` can only feed further encryption
//! or be undone, so candidate steps are drawn from the submessages of
//! `H ∪ {m}`. The search enumerates sets of taken steps, memoised, and
//! checks the four validation conditions on each.

use std::collections::HashSet;

use fixedbitset::FixedBitSet;

use super::{undoes, Clause, Reduction};
use crate::dolev_yao::{dy_derives, MessageSet};
use crate::term::Message;

/// `H ⊢_L m`: Dolev-Yao derivable, or a validated guess.
pub fn lowe_derives(h: &MessageSet, m: &Message) -> bool {
    dy_derives(h, m) || validates(h, m)
}

pub fn validates(h: &MessageSet, m: &Message) -> bool {
    validation_witness(h, m).is_some()
}

/// A validating trace together with its validator step and clause.
pub fn validation_witness(
    h: &MessageSet,
    m: &Message,
) -> Option<(Vec<Reduction>, Reduction, Clause)> {
    Search::new(h, m).run()
}

struct Search {
    start: MessageSet,
    steps: Vec<Reduction>,
    undo_partner: Vec<Option<usize>>,
    /// Steps whose premises some trace from `H` alone can cover.
    guess_free: Vec<bool>,
    cap: usize,
}

impl Search {
    fn new(h: &MessageSet, m: &Message) -> Self {
        let mut start = h.clone();
        start.insert(m.clone());
        let mut universe = MessageSet::new();
        for x in &start {
            collect(x, &mut universe);
        }
        let mut steps = Vec::new();
        for x in &universe {
            match x {
                Message::Concat(..) => {
                    steps.extend(Reduction::fst(x));
                    steps.extend(Reduction::snd(x));
                }
                Message::Encrypt(body, k) => {
                    steps.extend(Reduction::dec(x));
                    steps.push(Reduction::enc((**body).clone(), k.clone()));
                }
                _ => {}
            }
        }
        let undo_partner = steps
            .iter()
            .map(|s| steps.iter().position(|t| undoes(s, t)))
            .collect();
        let reach_h = saturate(h, &steps);
        let guess_free = steps
            .iter()
            .map(|s| s.premises().iter().all(|p| reach_h.contains(p)))
            .collect();
        let cap = saturate(&start, &steps).len();
        Search {
            start,
            steps,
            undo_partner,
            guess_free,
            cap,
        }
    }

    fn run(&self) -> Option<(Vec<Reduction>, Reduction, Clause)> {
        let mut seen: HashSet<FixedBitSet> = HashSet::new();
        let mut trace = Vec::new();
        let taken = FixedBitSet::with_capacity(self.steps.len());
        self.dfs(&taken, &self.start.clone(), &mut trace, false, &mut seen)
    }

    fn dfs(
        &self,
        taken: &FixedBitSet,
        current: &MessageSet,
        trace: &mut Vec<usize>,
        redundant_used: bool,
        seen: &mut HashSet<FixedBitSet>,
    ) -> Option<(Vec<Reduction>, Reduction, Clause)> {
        if !seen.insert(taken.clone()) {
            return None;
        }
        if let Some((s, clause)) = self.check(trace, current) {
            let t = trace.iter().map(|&i| self.steps[i].clone()).collect();
            return Some((t, self.steps[s].clone(), clause));
        }
        if trace.len() >= self.cap {
            return None;
        }
        for (i, step) in self.steps.iter().enumerate() {
            if taken.contains(i) || !step.applicable(current) {
                continue;
            }
            if matches!(self.undo_partner[i], Some(j) if taken.contains(j)) {
                continue;
            }
            let redundant = current.contains(step.conclusion());
            if redundant && redundant_used {
                continue;
            }
            let mut next_taken = taken.clone();
            next_taken.insert(i);
            let mut next = current.clone();
            next.insert(step.conclusion().clone());
            trace.push(i);
            let found = self.dfs(&next_taken, &next, trace, redundant_used || redundant, seen);
            trace.pop();
            if found.is_some() {
                return found;
            }
        }
        None
    }

    /// A step of the trace that uses the guess, produces the validator and
    /// is confirmed by one of the clauses. The trace is monotone and starts
    /// from `H ∪ {m}` by construction.
    fn check(&self, trace: &[usize], current: &MessageSet) -> Option<(usize, Clause)> {
        let t: Vec<Reduction> = trace.iter().map(|&i| self.steps[i].clone()).collect();
        debug_assert!(super::is_monotone(&t));
        debug_assert_eq!(super::apply_trace(&self.start, &t).as_ref(), Some(current));
        for &s in trace {
            if self.guess_free[s] {
                continue;
            }
            let v = self.steps[s].conclusion();
            let again = trace.iter().any(|&o| {
                let other = &self.steps[o];
                o != s && other.conclusion() == v
            });
            if again {
                return Some((s, Clause::A));
            }
            if self.start.contains(v) {
                return Some((s, Clause::B));
            }
            if let Message::Key(k) = v {
                if current.contains(&Message::Key(k.inverse())) {
                    return Some((s, Clause::C));
                }
            }
        }
        None
    }
}

fn collect(m: &Message, out: &mut MessageSet) {
    if !out.insert(m.clone()) {
        return;
    }
    match m {
        Message::Concat(a, b) => {
            collect(a, out);
            collect(b, out);
        }
        Message::Encrypt(body, _) => collect(body, out),
        _ => {}
    }
}

/// Fires every applicable step until nothing changes.
fn saturate(base: &MessageSet, steps: &[Reduction]) -> MessageSet {
    let mut cur = base.clone();
    loop {
        let mut changed = false;
        for s in steps {
            if !cur.contains(s.conclusion()) && s.applicable(&cur) {
                cur.insert(s.conclusion().clone());
                changed = true;
            }
        }
        if !changed {
            return cur;
        }
    }
}
