//! Finite systems of runs: generation, structural checks and export.

mod checks;
mod generate;
pub mod protocol;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::history::{Agent, Event, History};
use crate::term::Message;

pub use checks::{
    can_construct, check_active_insider, check_mode, check_mp, check_outsider, check_passive,
    Clause, ConstructMemo, Violation,
};
pub use generate::{generate_system, GenerateError, GenerationInput};

/// How the adversary interacts with the principals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Eavesdrops on every message and sends nothing.
    Passive,
    /// Intercepts and injects; principals may address it directly.
    Insider,
    /// Intercepts and injects; nobody addresses it.
    Outsider,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Passive => "passive",
            Mode::Insider => "insider",
            Mode::Outsider => "outsider",
        }
    }

    pub fn is_active(self) -> bool {
        self != Mode::Passive
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "passive" => Ok(Mode::Passive),
            "insider" => Ok(Mode::Insider),
            "outsider" => Ok(Mode::Outsider),
            _ => Err(format!(
                "unknown mode `{s}` (expected passive, insider or outsider)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdversarySpec {
    pub agent: Agent,
    pub mode: Mode,
    pub algorithm: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Bounds {
    /// Joint actions per run.
    pub max_steps: usize,
    /// Generation fails rather than produce more runs than this.
    pub max_runs: usize,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            max_steps: 12,
            max_runs: 500_000,
        }
    }
}

/// An in-flight message with its claimed recipient.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Envelope {
    pub to: Agent,
    pub msg: Message,
}

/// The environment's pool of undelivered messages and every agent's local
/// state, indexed like [`System::agents`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct GlobalState {
    pub env: Vec<Envelope>,
    pub locals: Vec<History>,
}

pub type StateId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Point {
    pub run: usize,
    pub time: usize,
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(r{}, {})", self.run, self.time)
    }
}

/// A finite set of runs over interned global states.
#[derive(Debug, Clone)]
pub struct System {
    agents: Vec<Agent>,
    adversary: Agent,
    states: Vec<GlobalState>,
    runs: Vec<Vec<StateId>>,
    truncated: usize,
}

#[derive(Debug, Default)]
pub(crate) struct Interner {
    states: Vec<GlobalState>,
    ids: HashMap<GlobalState, StateId>,
}

impl Interner {
    pub(crate) fn intern(&mut self, s: &GlobalState) -> StateId {
        if let Some(&id) = self.ids.get(s) {
            return id;
        }
        let id = self.states.len() as StateId;
        self.states.push(s.clone());
        self.ids.insert(s.clone(), id);
        id
    }
}

impl System {
    pub(crate) fn from_parts(
        agents: Vec<Agent>,
        adversary: Agent,
        interner: Interner,
        runs: Vec<Vec<StateId>>,
        truncated: usize,
    ) -> Self {
        System {
            agents,
            adversary,
            states: interner.states,
            runs,
            truncated,
        }
    }

    /// Builds a system from explicit runs, without any validation.
    pub fn from_runs(agents: Vec<Agent>, adversary: Agent, runs: Vec<Vec<GlobalState>>) -> Self {
        let mut interner = Interner::default();
        let runs = runs
            .iter()
            .map(|r| r.iter().map(|s| interner.intern(s)).collect())
            .collect();
        System::from_parts(agents, adversary, interner, runs, 0)
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn adversary(&self) -> &Agent {
        &self.adversary
    }

    pub fn agent_index(&self, a: &Agent) -> Option<usize> {
        self.agents.iter().position(|x| x == a)
    }

    pub fn runs(&self) -> &[Vec<StateId>] {
        &self.runs
    }

    pub fn run_count(&self) -> usize {
        self.runs.len()
    }

    /// Runs cut off by the step bound rather than by quiescence.
    pub fn truncated_runs(&self) -> usize {
        self.truncated
    }

    pub fn states(&self) -> &[GlobalState] {
        &self.states
    }

    pub fn state(&self, id: StateId) -> &GlobalState {
        &self.states[id as usize]
    }

    pub fn point_count(&self) -> usize {
        self.runs.iter().map(Vec::len).sum()
    }

    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        self.runs
            .iter()
            .enumerate()
            .flat_map(|(run, r)| (0..r.len()).map(move |time| Point { run, time }))
    }

    pub fn state_at(&self, p: Point) -> Option<StateId> {
        self.runs.get(p.run)?.get(p.time).copied()
    }

    pub fn local(&self, p: Point, agent: usize) -> Option<&History> {
        self.state_at(p).map(|s| &self.state(s).locals[agent])
    }

    /// JSON document listing every run as its timestamped global states.
    pub fn to_json(&self) -> Value {
        let runs: Vec<Value> = self
            .runs
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let states: Vec<Value> = r
                    .iter()
                    .enumerate()
                    .map(|(t, &id)| self.state_json(t, self.state(id)))
                    .collect();
                json!({ "id": i, "states": states })
            })
            .collect();
        json!({
            "agents": self.agents.iter().map(|a| a.name()).collect::<Vec<_>>(),
            "adversary": self.adversary.name(),
            "runs": runs,
        })
    }

    fn state_json(&self, time: usize, s: &GlobalState) -> Value {
        let env: Vec<Value> = s
            .env
            .iter()
            .map(|e| json!({ "to": e.to.name(), "msg": e.msg.to_string() }))
            .collect();
        let mut locals = serde_json::Map::new();
        for (a, h) in self.agents.iter().zip(&s.locals) {
            locals.insert(
                a.name().to_string(),
                json!({
                    "initial": h.initial_keys().iter().map(|k| k.name()).collect::<Vec<_>>(),
                    "events": h.events().iter().map(Event::to_string).collect::<Vec<_>>(),
                }),
            );
        }
        json!({ "time": time, "env": env, "locals": locals })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn interning_shares_equal_states() {
        let a = Agent::new("a");
        let s0 = GlobalState {
            env: vec![],
            locals: vec![History::new(BTreeSet::new())],
        };
        let mut s1 = s0.clone();
        s1.locals[0].push(Event::Recv {
            msg: Message::atom("x"),
        });
        let sys = System::from_runs(
            vec![a.clone()],
            a,
            vec![vec![s0.clone(), s1.clone()], vec![s0, s1]],
        );
        assert_eq!(sys.states().len(), 2);
        assert_eq!(sys.point_count(), 4);
        assert_eq!(sys.points().count(), 4);
        let doc = sys.to_json();
        assert_eq!(
            doc["runs"][1]["states"][1]["locals"]["a"]["events"][0],
            "recv(x)"
        );
    }

    #[test]
    fn mode_names() {
        for m in [Mode::Passive, Mode::Insider, Mode::Outsider] {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
        }
        assert!("sneaky".parse::<Mode>().is_err());
    }
}
