//! Structural constraints on systems and adversary constructibility.

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::Serialize;

use super::{Mode, Point, StateId, System};
use crate::adversary::KnowledgeAlgorithm;
use crate::answer::Answer;
use crate::formula::Formula;
use crate::history::{Agent, Event, History};
use crate::term::Message;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Clause {
    MP2,
    MP3,
    P1,
    P2,
    A1,
    A2,
    A3,
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Violation {
    pub run: usize,
    pub time: usize,
    #[serde(serialize_with = "agent_name")]
    pub agent: Agent,
    pub clause: Clause,
    pub detail: String,
}

fn agent_name<S: serde::Serializer>(a: &Agent, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(a.name())
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} at {} for {}: {}",
            self.clause,
            Point {
                run: self.run,
                time: self.time
            },
            self.agent,
            self.detail
        )
    }
}

/// Memoised membership in `C(ℓ)`: the closure under pairing and encryption
/// of the messages the algorithm says `Yes` to.
pub struct ConstructMemo<'a> {
    local: &'a History,
    alg: &'a dyn KnowledgeAlgorithm,
    yes: RefCell<HashMap<Message, bool>>,
}

impl<'a> ConstructMemo<'a> {
    pub fn new(local: &'a History, alg: &'a dyn KnowledgeAlgorithm) -> Self {
        ConstructMemo {
            local,
            alg,
            yes: RefCell::new(HashMap::new()),
        }
    }

    fn known(&self, m: &Message) -> bool {
        if let Some(&b) = self.yes.borrow().get(m) {
            return b;
        }
        let phi = Formula::has(self.alg.owner(), m.clone());
        let b = self.alg.evaluate(&phi, self.local) == Answer::Yes;
        self.yes.borrow_mut().insert(m.clone(), b);
        b
    }

    pub fn can(&self, m: &Message) -> bool {
        if self.known(m) {
            return true;
        }
        match m {
            Message::Concat(a, b) => self.can(a) && self.can(b),
            Message::Encrypt(body, k) => self.known(&Message::Key(k.clone())) && self.can(body),
            _ => false,
        }
    }
}

pub fn can_construct(m: &Message, local: &History, alg: &dyn KnowledgeAlgorithm) -> bool {
    ConstructMemo::new(local, alg).can(m)
}

/// Collects violations, keeping the earliest time of each distinct one.
struct Collector {
    seen: BTreeSet<(usize, Agent, Clause, String)>,
    out: Vec<Violation>,
}

impl Collector {
    fn new() -> Self {
        Collector {
            seen: BTreeSet::new(),
            out: Vec::new(),
        }
    }

    fn add(&mut self, run: usize, time: usize, agent: &Agent, clause: Clause, detail: String) {
        if self
            .seen
            .insert((run, agent.clone(), clause, detail.clone()))
        {
            self.out.push(Violation {
                run,
                time,
                agent: agent.clone(),
                clause,
                detail,
            });
        }
    }

    fn finish(mut self) -> Vec<Violation> {
        self.out.sort();
        self.out
    }
}

/// Per-state findings, cached because states are shared between runs.
fn per_state<F>(s: &System, mut f: F) -> Vec<Vec<(usize, Clause, String)>>
where
    F: FnMut(StateId) -> Vec<(usize, Clause, String)>,
{
    (0..s.states().len() as StateId).map(&mut f).collect()
}

fn report_states(s: &System, found: &[Vec<(usize, Clause, String)>], c: &mut Collector) {
    for (run, r) in s.runs().iter().enumerate() {
        for (time, &id) in r.iter().enumerate() {
            for (agent, clause, detail) in &found[id as usize] {
                c.add(run, time, &s.agents()[*agent], *clause, detail.clone());
            }
        }
    }
}

fn sent_somewhere(s: &System, id: StateId, m: &Message) -> bool {
    s.state(id)
        .locals
        .iter()
        .any(|h| h.sent().any(|(_, x)| x == m))
}

/// MP2 (every receive has a matching send, on payload) and MP3 (histories
/// start empty, keep their initial keys and grow by at most one event per
/// step). MP1 holds by construction of the types.
pub fn check_mp(s: &System) -> Vec<Violation> {
    let mut c = Collector::new();
    let found = per_state(s, |id| {
        let mut v = Vec::new();
        for (i, h) in s.state(id).locals.iter().enumerate() {
            for (k, e) in h.events().iter().enumerate() {
                if let Event::Recv { msg } = e {
                    if !sent_somewhere(s, id, msg) {
                        v.push((
                            i,
                            Clause::MP2,
                            format!("event {k} recv({msg}) has no matching send"),
                        ));
                    }
                }
            }
        }
        v
    });
    report_states(s, &found, &mut c);

    for (run, r) in s.runs().iter().enumerate() {
        for (i, agent) in s.agents().iter().enumerate() {
            if let Some(&first) = r.first() {
                if !s.state(first).locals[i].is_empty() {
                    c.add(
                        run,
                        0,
                        agent,
                        Clause::MP3,
                        "history not empty at time 0".into(),
                    );
                }
            }
            for t in 1..r.len() {
                let prev = &s.state(r[t - 1]).locals[i];
                let cur = &s.state(r[t]).locals[i];
                let ok = cur == prev || (cur.extends(prev) && cur.len() == prev.len() + 1);
                if !ok {
                    let detail = if cur.initial_keys() != prev.initial_keys() {
                        "initial keys changed".to_string()
                    } else if cur.len() < prev.len() || !cur.extends(prev) {
                        "history shrank or was rewritten".to_string()
                    } else {
                        format!("{} events appended in one step", cur.len() - prev.len())
                    };
                    c.add(run, t, agent, Clause::MP3, detail);
                }
            }
        }
    }
    c.finish()
}

/// P1 (the adversary only receives) and P2 (every principal's send is
/// already in the adversary's history).
pub fn check_passive(s: &System, adversary: &Agent) -> Vec<Violation> {
    let mut c = Collector::new();
    let Some(a) = s.agent_index(adversary) else {
        return Vec::new();
    };
    let found = per_state(s, |id| {
        let st = s.state(id);
        let adv = &st.locals[a];
        let mut v = Vec::new();
        for (k, e) in adv.events().iter().enumerate() {
            if let Event::Send { to, msg } = e {
                v.push((a, Clause::P1, format!("event {k} send({to},{msg})")));
            }
        }
        for (j, h) in st.locals.iter().enumerate() {
            if j == a {
                continue;
            }
            for (to, msg) in h.sent() {
                if !adv.received().any(|x| x == msg) {
                    v.push((
                        j,
                        Clause::P2,
                        format!("send({to},{msg}) not seen by the adversary"),
                    ));
                }
            }
        }
        v
    });
    report_states(s, &found, &mut c);
    c.finish()
}

fn active_findings(
    s: &System,
    a: usize,
    alg: &dyn KnowledgeAlgorithm,
    outsider: bool,
) -> Vec<Vec<(usize, Clause, String)>> {
    // A2 depends only on the adversary's history, shared by many states.
    let mut a2_cache: HashMap<History, Vec<String>> = HashMap::new();
    per_state(s, |id| {
        let st = s.state(id);
        let adv = &st.locals[a];
        let mut v = Vec::new();
        for (k, e) in adv.events().iter().enumerate() {
            if let Event::Recv { msg } = e {
                if !sent_somewhere(s, id, msg) {
                    v.push((
                        a,
                        Clause::A1,
                        format!("event {k} recv({msg}) was never sent"),
                    ));
                }
            }
        }
        let bad = a2_cache.entry(adv.clone()).or_insert_with(|| {
            adv.events()
                .iter()
                .enumerate()
                .filter_map(|(k, e)| match e {
                    Event::Send { to, msg } if !can_construct(msg, &adv.prefix(k), alg) => {
                        Some(format!("event {k} send({to},{msg}) not constructible"))
                    }
                    _ => None,
                })
                .collect()
        });
        v.extend(bad.iter().map(|d| (a, Clause::A2, d.clone())));
        if outsider {
            let adversary = &s.agents()[a];
            for (i, h) in st.locals.iter().enumerate() {
                for (to, msg) in h.sent() {
                    if to == adversary {
                        v.push((
                            i,
                            Clause::A3,
                            format!("send({to},{msg}) addressed to the adversary"),
                        ));
                    }
                }
            }
        }
        v
    })
}

/// A1 (the adversary receives only sent messages) and A2 (it sends only
/// what it can construct from its history before the send).
pub fn check_active_insider(
    s: &System,
    adversary: &Agent,
    alg: &dyn KnowledgeAlgorithm,
) -> Vec<Violation> {
    let Some(a) = s.agent_index(adversary) else {
        return Vec::new();
    };
    let mut c = Collector::new();
    report_states(s, &active_findings(s, a, alg, false), &mut c);
    c.finish()
}

/// A1, A2 and A3 (no agent addresses a message to the adversary).
pub fn check_outsider(
    s: &System,
    adversary: &Agent,
    alg: &dyn KnowledgeAlgorithm,
) -> Vec<Violation> {
    let Some(a) = s.agent_index(adversary) else {
        return Vec::new();
    };
    let mut c = Collector::new();
    report_states(s, &active_findings(s, a, alg, true), &mut c);
    c.finish()
}

/// MP checks plus the checks of `mode`.
pub fn check_mode(s: &System, mode: Mode, alg: &dyn KnowledgeAlgorithm) -> Vec<Violation> {
    let adversary = s.adversary().clone();
    let mut v = check_mp(s);
    v.extend(match mode {
        Mode::Passive => check_passive(s, &adversary),
        Mode::Insider => check_active_insider(s, &adversary, alg),
        Mode::Outsider => check_outsider(s, &adversary, alg),
    });
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::DolevYao;
    use crate::term::{encr, Key};

    #[test]
    fn construct_examples() {
        let i = Agent::new("i");
        let alg = DolevYao { owner: i.clone() };
        let (pk, _) = Key::pair("kB", "skB");
        let nb = Message::atom("nB");
        let h = History::receiving([pk.clone()].into(), [nb.clone()]);
        assert!(can_construct(&encr(nb.clone(), pk.clone()), &h, &alg));

        let ct = encr(nb.clone(), pk.clone());
        let h = History::receiving(BTreeSet::new(), [ct.clone()]);
        assert!(!can_construct(&nb, &h, &alg));
        assert!(can_construct(&ct, &h, &alg));
    }
}
