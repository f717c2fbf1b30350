//! Evaluation of formulas over a generated system.
//!
//! Truth depends only on the global state, so everything is computed per
//! interned state and memoised per formula. `K_i` quantifies over the points
//! of the finite system; `X_i` asks agent `i`'s registered algorithm.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::adversary::SharedAlgorithm;
use crate::answer::Answer;
use crate::formula::{Formula, Primitive};
use crate::history::{Agent, Event, History};
use crate::system::{Point, StateId, System};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LogicError {
    #[error("point {0} is not in the system")]
    UnknownPoint(Point),
    #[error("agent `{0}` is not in the system")]
    UnknownAgent(String),
    #[error("no knowledge algorithm is registered for agent `{0}`")]
    UnregisteredAlgorithm(String),
}

/// Truth of a primitive proposition in a local history.
pub fn prim_holds(h: &History, p: &Primitive) -> bool {
    match p {
        Primitive::Sent(_, m) => h.sent().any(|(_, x)| x == m),
        Primitive::Received(_, m) => h.received().any(|x| x == m),
        Primitive::Has(_, m) => h.received().any(|x| m.is_submessage_of(x)),
    }
}

fn prim_agent(p: &Primitive) -> &Agent {
    match p {
        Primitive::Sent(a, _) | Primitive::Received(a, _) | Primitive::Has(a, _) => a,
    }
}

pub fn eval_prim(s: &System, pt: Point, p: &Primitive) -> Result<bool, LogicError> {
    let a = prim_agent(p);
    let idx = s
        .agent_index(a)
        .ok_or_else(|| LogicError::UnknownAgent(a.to_string()))?;
    let h = s.local(pt, idx).ok_or(LogicError::UnknownPoint(pt))?;
    Ok(prim_holds(h, p))
}

/// Equal local states at the two points. Points outside the system are
/// distinguishable from everything.
pub fn indistinguishable(s: &System, p1: Point, p2: Point, agent: &Agent) -> bool {
    let Some(i) = s.agent_index(agent) else {
        return false;
    };
    match (s.local(p1, i), s.local(p2, i)) {
        (Some(a), Some(b)) => a == b,
        _ => false,
    }
}

/// For each agent, a class id per state: equal ids iff equal local states.
struct Classes {
    of_state: Vec<u32>,
    members: Vec<Vec<StateId>>,
}

impl Classes {
    fn build(s: &System, agent: usize) -> Self {
        let mut ids: HashMap<&History, u32> = HashMap::new();
        let mut members: Vec<Vec<StateId>> = Vec::new();
        let of_state = s
            .states()
            .iter()
            .enumerate()
            .map(|(sid, st)| {
                let next = ids.len() as u32;
                let c = *ids.entry(&st.locals[agent]).or_insert(next);
                if c == next {
                    members.push(Vec::new());
                }
                members[c as usize].push(sid as StateId);
                c
            })
            .collect();
        Classes { of_state, members }
    }
}

type Table = Arc<Vec<bool>>;

pub struct Evaluator<'s> {
    system: &'s System,
    algorithms: BTreeMap<Agent, SharedAlgorithm>,
    classes: Vec<Classes>,
    tables: Mutex<HashMap<Formula, Table>>,
}

impl<'s> Evaluator<'s> {
    pub fn new(system: &'s System) -> Self {
        let classes = (0..system.agents().len())
            .map(|i| Classes::build(system, i))
            .collect();
        Evaluator {
            system,
            algorithms: BTreeMap::new(),
            classes,
            tables: Mutex::new(HashMap::new()),
        }
    }

    /// Registers the algorithm used for `X_i` with `i` = its owner.
    pub fn with_algorithm(mut self, alg: SharedAlgorithm) -> Self {
        self.algorithms.insert(alg.owner().clone(), alg);
        self.tables.lock().unwrap().clear();
        self
    }

    pub fn system(&self) -> &'s System {
        self.system
    }

    pub fn algorithm(&self, agent: &Agent) -> Option<&SharedAlgorithm> {
        self.algorithms.get(agent)
    }

    fn index(&self, a: &Agent) -> Result<usize, LogicError> {
        self.system
            .agent_index(a)
            .ok_or_else(|| LogicError::UnknownAgent(a.to_string()))
    }

    /// Truth value of `phi` at every interned state.
    pub fn table(&self, phi: &Formula) -> Result<Table, LogicError> {
        if let Some(t) = self.tables.lock().unwrap().get(phi) {
            return Ok(t.clone());
        }
        let states = self.system.states();
        let t: Vec<bool> = match phi {
            Formula::Prim(p) => {
                let i = self.index(prim_agent(p))?;
                states
                    .par_iter()
                    .map(|st| prim_holds(&st.locals[i], p))
                    .collect()
            }
            Formula::Not(x) => self.table(x)?.iter().map(|b| !b).collect(),
            Formula::And(a, b) => {
                let (ta, tb) = (self.table(a)?, self.table(b)?);
                ta.iter().zip(tb.iter()).map(|(x, y)| *x && *y).collect()
            }
            Formula::Know(a, x) => {
                let c = &self.classes[self.index(a)?];
                let tx = self.table(x)?;
                let known: Vec<bool> = c
                    .members
                    .iter()
                    .map(|m| m.iter().all(|&sid| tx[sid as usize]))
                    .collect();
                c.of_state.iter().map(|&k| known[k as usize]).collect()
            }
            Formula::AlgKnow(a, x) => {
                let answers = self.answers(a, x)?;
                let c = &self.classes[self.index(a)?];
                c.of_state
                    .iter()
                    .map(|&k| answers[k as usize] == Answer::Yes)
                    .collect()
            }
        };
        let t = Arc::new(t);
        self.tables.lock().unwrap().insert(phi.clone(), t.clone());
        Ok(t)
    }

    /// The algorithm's answer on `phi`, once per local-state class of `agent`.
    fn answers(&self, agent: &Agent, phi: &Formula) -> Result<Vec<Answer>, LogicError> {
        let alg = self
            .algorithms
            .get(agent)
            .ok_or_else(|| LogicError::UnregisteredAlgorithm(agent.to_string()))?;
        let i = self.index(agent)?;
        let c = &self.classes[i];
        Ok(c.members
            .par_iter()
            .map(|m| alg.evaluate(phi, &self.system.state(m[0]).locals[i]))
            .collect())
    }

    /// The algorithm's answer at a point.
    pub fn answer(&self, agent: &Agent, phi: &Formula, pt: Point) -> Result<Answer, LogicError> {
        let alg = self
            .algorithms
            .get(agent)
            .ok_or_else(|| LogicError::UnregisteredAlgorithm(agent.to_string()))?;
        let i = self.index(agent)?;
        let h = self
            .system
            .local(pt, i)
            .ok_or(LogicError::UnknownPoint(pt))?;
        Ok(alg.evaluate(phi, h))
    }

    pub fn eval(&self, pt: Point, phi: &Formula) -> Result<bool, LogicError> {
        let sid = self
            .system
            .state_at(pt)
            .ok_or(LogicError::UnknownPoint(pt))?;
        Ok(self.table(phi)?[sid as usize])
    }

    /// Points where `phi` holds, in (run, time) order.
    pub fn satisfying_points(&self, phi: &Formula) -> Result<Vec<Point>, LogicError> {
        let t = self.table(phi)?;
        Ok(self
            .system
            .points()
            .filter(|p| t[self.system.state_at(*p).unwrap() as usize])
            .collect())
    }

    pub fn query(&self, phi: &Formula, q: Quantifier) -> Result<Verdict, LogicError> {
        let t = self.table(phi)?;
        let mut total = 0;
        let mut true_points = 0;
        let mut first_true = None;
        let mut first_false = None;
        for p in self.system.points() {
            total += 1;
            if t[self.system.state_at(p).unwrap() as usize] {
                true_points += 1;
                first_true.get_or_insert(p);
            } else {
                first_false.get_or_insert(p);
            }
        }
        let (holds, witness, counterexample) = match q {
            Quantifier::All => (first_false.is_none(), None, first_false),
            Quantifier::Exists => (first_true.is_some(), first_true, None),
        };
        Ok(Verdict {
            quantifier: q,
            holds,
            witness,
            counterexample,
            points: total,
            true_points,
        })
    }

    /// Compares the agent's algorithm with its implicit knowledge at every
    /// point: `Yes` should imply `K_i φ`, and `No` should imply `¬K_i φ`.
    pub fn check_soundness(
        &self,
        agent: &Agent,
        formulas: &[Formula],
        max_examples: usize,
    ) -> Result<SoundnessReport, LogicError> {
        let alg = self
            .algorithms
            .get(agent)
            .ok_or_else(|| LogicError::UnregisteredAlgorithm(agent.to_string()))?;
        let i = self.index(agent)?;
        let c = &self.classes[i];
        let mut out = Vec::new();
        for phi in formulas {
            let answers = self.answers(agent, phi)?;
            let know = self.table(&Formula::know(agent, phi.clone()))?;
            let mut f = FormulaSoundness {
                formula: phi.to_string(),
                ..FormulaSoundness::default()
            };
            for p in self.system.points() {
                let sid = self.system.state_at(p).unwrap() as usize;
                let k = know[sid];
                match answers[c.of_state[sid] as usize] {
                    Answer::Yes => {
                        f.yes += 1;
                        if !k {
                            f.yes_violations += 1;
                            if f.yes_examples.len() < max_examples {
                                f.yes_examples.push(p);
                            }
                        }
                    }
                    Answer::No => {
                        f.no += 1;
                        if k {
                            f.no_violations += 1;
                            if f.no_examples.len() < max_examples {
                                f.no_examples.push(p);
                            }
                        }
                    }
                    Answer::Unknown => f.unknown += 1,
                }
            }
            out.push(f);
        }
        Ok(SoundnessReport {
            agent: agent.name().to_string(),
            algorithm: alg.name().to_string(),
            yes_violations: out.iter().map(|f| f.yes_violations).sum(),
            no_violations: out.iter().map(|f| f.no_violations).sum(),
            formulas: out,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantifier {
    /// Holds at every point.
    All,
    /// Holds at some point.
    Exists,
}

impl Quantifier {
    pub fn as_str(self) -> &'static str {
        match self {
            Quantifier::All => "all",
            Quantifier::Exists => "exists",
        }
    }
}

impl std::str::FromStr for Quantifier {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" | "forall" => Ok(Quantifier::All),
            "exists" | "some" => Ok(Quantifier::Exists),
            _ => Err(format!("unknown quantifier `{s}` (expected all or exists)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub quantifier: Quantifier,
    pub holds: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Point>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Point>,
    pub points: usize,
    pub true_points: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FormulaSoundness {
    pub formula: String,
    pub yes: usize,
    pub no: usize,
    pub unknown: usize,
    pub yes_violations: usize,
    pub no_violations: usize,
    pub yes_examples: Vec<Point>,
    pub no_examples: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SoundnessReport {
    pub agent: String,
    pub algorithm: String,
    pub yes_violations: usize,
    pub no_violations: usize,
    pub formulas: Vec<FormulaSoundness>,
}

/// Events of `agent` at a point, for diagnostics.
pub fn events_at<'a>(s: &'a System, pt: Point, agent: &Agent) -> Option<&'a [Event]> {
    let i = s.agent_index(agent)?;
    s.local(pt, i).map(History::events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{Abstain, DolevYao};
    use crate::system::GlobalState;
    use crate::term::{conc, encr, Key, Message};
    use std::collections::BTreeSet;

    /// a sends {nA,nB,b}_kA; the adversary i intercepts it in one run and
    /// receives an unrelated message in the other.
    fn tiny() -> (System, Agent, Agent, Message) {
        let a = Agent::new("a");
        let i = Agent::new("i");
        let (ka, _) = Key::pair("kA", "kA_inv");
        let na = Message::atom("nA");
        let ct = encr(
            conc(conc(na.clone(), Message::atom("nB")), Message::atom("b")),
            ka,
        );
        let empty = || History::new(BTreeSet::new());
        let s0 = GlobalState {
            env: vec![],
            locals: vec![empty(), empty()],
        };
        let mut s1 = s0.clone();
        s1.locals[0].push(Event::Send {
            to: i.clone(),
            msg: ct.clone(),
        });
        let mut s2 = s1.clone();
        s2.locals[1].push(Event::Recv { msg: ct.clone() });
        let mut s2b = s1.clone();
        s2b.locals[1].push(Event::Recv {
            msg: Message::atom("junk"),
        });
        let sys = System::from_runs(
            vec![a.clone(), i.clone()],
            i.clone(),
            vec![vec![s0.clone(), s1.clone(), s2], vec![s0, s1, s2b]],
        );
        (sys, a, i, na)
    }

    #[test]
    fn has_and_knowledge_of_has() {
        let (sys, _, i, na) = tiny();
        let ev = Evaluator::new(&sys).with_algorithm(Arc::new(DolevYao { owner: i.clone() }));
        let has = Formula::has(&i, na.clone());
        let p = Point { run: 0, time: 2 };
        assert!(ev.eval(p, &has).unwrap());
        assert!(ev.eval(p, &Formula::know(&i, has.clone())).unwrap());
        assert!(!ev.eval(p, &Formula::alg_know(&i, has.clone())).unwrap());
        assert!(!ev.eval(Point { run: 1, time: 2 }, &has).unwrap());
        // a never receives anything, so it never has what it sent
        assert!(!eval_prim(&sys, p, &Primitive::Has(Agent::new("a"), na)).unwrap());
        assert!(!eval_prim(
            &sys,
            Point { run: 0, time: 0 },
            &Primitive::Received(i.clone(), Message::atom("junk"))
        )
        .unwrap());
    }

    #[test]
    fn indistinguishability() {
        let (sys, _, i, _) = tiny();
        let p = |run, time| Point { run, time };
        assert!(indistinguishable(&sys, p(0, 1), p(1, 1), &i));
        assert!(indistinguishable(&sys, p(0, 0), p(0, 1), &i));
        assert!(!indistinguishable(&sys, p(0, 2), p(1, 2), &i));
        assert!(!indistinguishable(&sys, p(0, 9), p(0, 9), &i));
    }

    #[test]
    fn soundness_of_dy_and_abstain() {
        let (sys, _, i, na) = tiny();
        let phis = vec![Formula::has(&i, na)];
        let ev = Evaluator::new(&sys).with_algorithm(Arc::new(DolevYao { owner: i.clone() }));
        let r = ev.check_soundness(&i, &phis, 5).unwrap();
        assert_eq!(r.yes_violations, 0);
        assert_eq!(r.no_violations, 1);
        assert_eq!(r.formulas[0].no_examples, vec![Point { run: 0, time: 2 }]);

        let ev = Evaluator::new(&sys).with_algorithm(Arc::new(Abstain { owner: i.clone() }));
        let r = ev.check_soundness(&i, &phis, 5).unwrap();
        assert_eq!((r.yes_violations, r.no_violations), (0, 0));
        assert_eq!(r.formulas[0].unknown, sys.point_count());
    }

    #[test]
    fn unregistered_algorithm_is_an_error() {
        let (sys, a, _, na) = tiny();
        let ev = Evaluator::new(&sys);
        let phi = Formula::alg_know(&a, Formula::has(&a, na));
        assert_eq!(
            ev.eval(Point { run: 0, time: 0 }, &phi),
            Err(LogicError::UnregisteredAlgorithm("a".into()))
        );
    }

    #[test]
    fn quantified_queries_carry_points() {
        let (sys, _, i, na) = tiny();
        let ev = Evaluator::new(&sys);
        let has = Formula::has(&i, na);
        let v = ev.query(&has, Quantifier::Exists).unwrap();
        assert!(v.holds);
        assert_eq!(v.witness, Some(Point { run: 0, time: 2 }));
        let v = ev.query(&has, Quantifier::All).unwrap();
        assert!(!v.holds);
        assert_eq!(v.counterexample, Some(Point { run: 0, time: 0 }));
    }
}
