//! Exhaustive bounded generation of runs.
//!
//! Each time step performs one joint action:
//!
//! * a principal sends the next message of one of its sessions; under a
//!   passive adversary the adversary receives a copy in the same step;
//! * the environment delivers a pooled message to a session of its
//!   recipient whose next receive pattern matches it;
//! * an active adversary intercepts a pooled message, or injects a message
//!   it can construct, which the targeted session receives in the same
//!   step.
//!
//! Runs end when no action is enabled or the step bound is reached. A
//! session binds its fresh nonces (first unused value of each pool) and its
//! choice variables on its first action.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use thiserror::Error;

use super::checks::ConstructMemo;
use super::protocol::{
    default_pool, Action, Bindings, KeyFunctions, ProtocolSpec, Resolver, SessionSpec, VarKind,
};
use super::{AdversarySpec, Bounds, Envelope, GlobalState, Interner, Mode, StateId, System};
use crate::adversary::KnowledgeAlgorithm;
use crate::history::{Agent, Event, History};
use crate::term::{Atom, Key, Message};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenerateError {
    #[error("bound {bound} = {limit} exceeded: {detail}")]
    BoundExceeded {
        bound: &'static str,
        limit: usize,
        detail: String,
    },
    #[error("session {session} (role {role}): variable `{var}` is unbound when sending `{step}`")]
    Unbound {
        session: usize,
        role: String,
        var: String,
        step: String,
    },
    #[error(
        "session {session} (role {role}): `{var}` is bound to `{value}`, which is not an agent"
    )]
    NotAnAgent {
        session: usize,
        role: String,
        var: String,
        value: String,
    },
    #[error("session {session}: unknown role `{role}`")]
    UnknownRole { session: usize, role: String },
    #[error("session {session}: agent `{agent}` is not declared")]
    UnknownAgent { session: usize, agent: String },
    #[error("session {session}: the adversary does not run protocol sessions")]
    AdversarySession { session: usize },
    #[error("adversary `{0}` is not a declared agent")]
    UnknownAdversary(String),
}

/// Everything generation needs, resolved.
pub struct GenerationInput<'a> {
    pub agents: &'a [Agent],
    pub initkeys: &'a BTreeMap<Agent, BTreeSet<Key>>,
    pub keyfuns: &'a KeyFunctions,
    pub protocol: &'a ProtocolSpec,
    pub sessions: &'a [SessionSpec],
    /// Values of each fresh nonce variable; a missing entry means the atom
    /// named like the variable.
    pub pools: &'a BTreeMap<String, Vec<Atom>>,
    /// Constant atoms the adversary may try in injected messages.
    pub atoms: &'a BTreeSet<Atom>,
    pub adversary: &'a AdversarySpec,
    pub algorithm: &'a dyn KnowledgeAlgorithm,
    pub bounds: Bounds,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Session {
    pc: usize,
    started: bool,
    bindings: Bindings,
}

#[derive(Debug, Clone)]
struct Node {
    state: GlobalState,
    sessions: Vec<Session>,
    used: BTreeSet<Atom>,
}

struct Generator<'a> {
    input: &'a GenerationInput<'a>,
    agent_set: BTreeSet<Agent>,
    adv: usize,
    programs: Vec<Vec<Action>>,
    owners: Vec<usize>,
}

pub fn generate_system(input: &GenerationInput<'_>) -> Result<System, GenerateError> {
    let adv = input
        .agents
        .iter()
        .position(|a| *a == input.adversary.agent)
        .ok_or_else(|| GenerateError::UnknownAdversary(input.adversary.agent.to_string()))?;
    let mut programs = Vec::new();
    let mut owners = Vec::new();
    for (i, s) in input.sessions.iter().enumerate() {
        if !input.protocol.roles.contains(&s.role) {
            return Err(GenerateError::UnknownRole {
                session: i,
                role: s.role.clone(),
            });
        }
        let owner = input
            .agents
            .iter()
            .position(|a| *a == s.agent)
            .ok_or_else(|| GenerateError::UnknownAgent {
                session: i,
                agent: s.agent.to_string(),
            })?;
        if owner == adv {
            return Err(GenerateError::AdversarySession { session: i });
        }
        programs.push(input.protocol.program(&s.role));
        owners.push(owner);
    }
    let gen = Generator {
        input,
        agent_set: input.agents.iter().cloned().collect(),
        adv,
        programs,
        owners,
    };
    gen.run()
}

impl<'a> Generator<'a> {
    fn resolver(&self) -> Resolver<'_> {
        Resolver {
            keyfuns: self.input.keyfuns,
            agents: &self.agent_set,
        }
    }

    fn mode(&self) -> Mode {
        self.input.adversary.mode
    }

    fn initial(&self) -> Node {
        let locals = self
            .input
            .agents
            .iter()
            .map(|a| History::new(self.input.initkeys.get(a).cloned().unwrap_or_default()))
            .collect();
        let sessions = self
            .input
            .sessions
            .iter()
            .map(|s| Session {
                pc: 0,
                started: false,
                bindings: [(s.role.clone(), s.agent.message())].into(),
            })
            .collect();
        Node {
            state: GlobalState {
                env: Vec::new(),
                locals,
            },
            sessions,
            used: BTreeSet::new(),
        }
    }

    fn run(&self) -> Result<System, GenerateError> {
        let mut interner = Interner::default();
        let mut runs = Vec::new();
        let mut seen: HashSet<Vec<StateId>> = HashSet::new();
        let mut truncated = 0;
        let root = self.initial();
        let mut path = vec![interner.intern(&root.state)];
        self.dfs(
            &root,
            &mut path,
            &mut interner,
            &mut runs,
            &mut seen,
            &mut truncated,
        )?;
        Ok(System::from_parts(
            self.input.agents.to_vec(),
            self.input.adversary.agent.clone(),
            interner,
            runs,
            truncated,
        ))
    }

    fn dfs(
        &self,
        node: &Node,
        path: &mut Vec<StateId>,
        interner: &mut Interner,
        runs: &mut Vec<Vec<StateId>>,
        seen: &mut HashSet<Vec<StateId>>,
        truncated: &mut usize,
    ) -> Result<(), GenerateError> {
        let next = self.successors(node)?;
        let at_bound = path.len() > self.input.bounds.max_steps;
        if next.is_empty() || at_bound {
            if seen.insert(path.clone()) {
                if !next.is_empty() {
                    *truncated += 1;
                }
                if runs.len() == self.input.bounds.max_runs {
                    return Err(GenerateError::BoundExceeded {
                        bound: "max_runs",
                        limit: self.input.bounds.max_runs,
                        detail: format!("while extending a run of length {}", path.len() - 1),
                    });
                }
                runs.push(path.clone());
            }
            return Ok(());
        }
        for child in next {
            path.push(interner.intern(&child.state));
            self.dfs(&child, path, interner, runs, seen, truncated)?;
            path.pop();
        }
        Ok(())
    }

    /// Ways session `i` can take its next action: itself if already
    /// started, otherwise one variant per choice assignment, with fresh
    /// nonces bound.
    fn start_options(&self, node: &Node, i: usize) -> Vec<(Session, BTreeSet<Atom>)> {
        let sess = &node.sessions[i];
        if sess.started {
            return vec![(sess.clone(), node.used.clone())];
        }
        let spec = &self.input.sessions[i];
        let mut used = node.used.clone();
        let mut base = sess.clone();
        base.started = true;
        for var in self.input.protocol.fresh_of(&spec.role) {
            let pool = self
                .input
                .pools
                .get(var)
                .cloned()
                .unwrap_or_else(|| default_pool(var));
            match pool.into_iter().find(|a| !used.contains(a)) {
                Some(a) => {
                    used.insert(a.clone());
                    base.bindings.insert(var.clone(), Message::Atom(a));
                }
                None => return Vec::new(),
            }
        }
        let mut out = vec![base];
        for (var, values) in &spec.choices {
            let mut next = Vec::new();
            for s in &out {
                for v in values {
                    let mut s2 = s.clone();
                    s2.bindings.insert(var.clone(), v.message());
                    next.push(s2);
                }
            }
            out = next;
        }
        out.into_iter().map(|s| (s, used.clone())).collect()
    }

    fn agent_of(&self, i: usize, var: &str, b: &Bindings) -> Result<Agent, GenerateError> {
        let role = || self.input.sessions[i].role.clone();
        match b.get(var) {
            Some(Message::Atom(a)) if self.agent_set.contains(&Agent::new(a.name())) => {
                Ok(Agent::new(a.name()))
            }
            Some(other) => Err(GenerateError::NotAnAgent {
                session: i,
                role: role(),
                var: var.to_string(),
                value: other.to_string(),
            }),
            None => Err(GenerateError::Unbound {
                session: i,
                role: role(),
                var: var.to_string(),
                step: format!("to {var}"),
            }),
        }
    }

    fn successors(&self, node: &Node) -> Result<Vec<Node>, GenerateError> {
        let mut out = Vec::new();
        let r = self.resolver();
        let active = self.mode().is_active();
        let adversary = &self.input.adversary.agent;

        // Principal sends.
        for i in 0..node.sessions.len() {
            let Some(Action::Send { to, message }) = self.programs[i].get(node.sessions[i].pc)
            else {
                continue;
            };
            for (mut sess, used) in self.start_options(node, i) {
                let msg = r.instantiate(message, &sess.bindings).map_err(|var| {
                    GenerateError::Unbound {
                        session: i,
                        role: self.input.sessions[i].role.clone(),
                        var,
                        step: message.to_string(),
                    }
                })?;
                let dest = self.agent_of(i, to, &sess.bindings)?;
                if self.mode() == Mode::Outsider && dest == *adversary {
                    continue;
                }
                sess.pc += 1;
                let mut child = node.clone();
                child.used = used;
                child.sessions[i] = sess;
                let me = self.owners[i];
                child.state.locals[me].push(Event::Send {
                    to: dest.clone(),
                    msg: msg.clone(),
                });
                if !active {
                    child.state.locals[self.adv].push(Event::Recv { msg: msg.clone() });
                }
                if active || dest != *adversary {
                    insert_sorted(&mut child.state.env, Envelope { to: dest, msg });
                }
                out.push(child);
            }
        }

        // Environment deliveries to principals.
        let distinct: Vec<(usize, &Envelope)> = distinct_envelopes(&node.state.env);
        for &(k, env) in &distinct {
            if env.to == *adversary {
                continue;
            }
            for i in 0..node.sessions.len() {
                if self.input.sessions[i].agent != env.to {
                    continue;
                }
                let Some(Action::Recv { pattern }) = self.programs[i].get(node.sessions[i].pc)
                else {
                    continue;
                };
                for (mut sess, used) in self.start_options(node, i) {
                    if !r.matches(pattern, &env.msg, &mut sess.bindings) {
                        continue;
                    }
                    sess.pc += 1;
                    let mut child = node.clone();
                    child.used = used;
                    child.sessions[i] = sess;
                    child.state.env.remove(k);
                    child.state.locals[self.owners[i]].push(Event::Recv {
                        msg: env.msg.clone(),
                    });
                    out.push(child);
                }
            }
        }

        if !active {
            return Ok(out);
        }

        // Interception.
        for &(k, env) in &distinct {
            let mut child = node.clone();
            child.state.env.remove(k);
            child.state.locals[self.adv].push(Event::Recv {
                msg: env.msg.clone(),
            });
            out.push(child);
        }

        // Injection.
        let adv_hist = &node.state.locals[self.adv];
        let memo = ConstructMemo::new(adv_hist, self.input.algorithm);
        let nonce_domain = self.nonce_domain(node);
        let agent_domain: Vec<Message> = self.input.agents.iter().map(Agent::message).collect();
        for i in 0..node.sessions.len() {
            let Some(Action::Recv { pattern }) = self.programs[i].get(node.sessions[i].pc) else {
                continue;
            };
            let target = self.input.sessions[i].agent.clone();
            for (sess, used) in self.start_options(node, i) {
                let free: Vec<(String, VarKind)> = pattern
                    .variables()
                    .into_iter()
                    .filter(|(v, _)| !sess.bindings.contains_key(v))
                    .collect();
                let mut candidates: BTreeSet<Message> = BTreeSet::new();
                let mut assignment = sess.bindings.clone();
                enumerate(
                    &free,
                    0,
                    &mut assignment,
                    &agent_domain,
                    &nonce_domain,
                    &mut |b| {
                        if let Ok(m) = r.instantiate(pattern, b) {
                            candidates.insert(m);
                        }
                    },
                );
                for m in candidates {
                    if !memo.can(&m) {
                        continue;
                    }
                    let mut s2 = sess.clone();
                    if !r.matches(pattern, &m, &mut s2.bindings) {
                        continue;
                    }
                    s2.pc += 1;
                    let mut child = node.clone();
                    child.used = used.clone();
                    child.sessions[i] = s2;
                    child.state.locals[self.adv].push(Event::Send {
                        to: target.clone(),
                        msg: m.clone(),
                    });
                    child.state.locals[self.owners[i]].push(Event::Recv { msg: m });
                    out.push(child);
                }
            }
        }
        Ok(out)
    }

    /// Atoms the adversary might place in a nonce position: those occurring
    /// in what it has received, plus declared constants and pool values.
    fn nonce_domain(&self, node: &Node) -> Vec<Message> {
        let mut atoms: BTreeSet<Message> = BTreeSet::new();
        for m in node.state.locals[self.adv].received() {
            atoms.extend(m.subterms().into_iter().filter(Message::is_atom));
        }
        atoms.extend(self.input.atoms.iter().cloned().map(Message::Atom));
        for pool in self.input.pools.values() {
            atoms.extend(pool.iter().cloned().map(Message::Atom));
        }
        for sess in self.input.sessions {
            for var in self.input.protocol.fresh_of(&sess.role) {
                if !self.input.pools.contains_key(var) {
                    atoms.extend(default_pool(var).into_iter().map(Message::Atom));
                }
            }
        }
        atoms
            .into_iter()
            .filter(|m| !matches!(m, Message::Atom(a) if self.agent_set.contains(&Agent::new(a.name()))))
            .collect()
    }
}

fn enumerate(
    free: &[(String, VarKind)],
    at: usize,
    b: &mut Bindings,
    agents: &[Message],
    nonces: &[Message],
    emit: &mut dyn FnMut(&Bindings),
) {
    if at == free.len() {
        emit(b);
        return;
    }
    let (var, kind) = &free[at];
    let domain = match kind {
        VarKind::Agent => agents,
        VarKind::Nonce => nonces,
    };
    for v in domain {
        b.insert(var.clone(), v.clone());
        enumerate(free, at + 1, b, agents, nonces, emit);
    }
    b.remove(var);
}

fn insert_sorted(env: &mut Vec<Envelope>, e: Envelope) {
    let at = env.partition_point(|x| *x <= e);
    env.insert(at, e);
}

fn distinct_envelopes(env: &[Envelope]) -> Vec<(usize, &Envelope)> {
    env.iter()
        .enumerate()
        .filter(|(k, e)| *k == 0 || env[k - 1] != **e)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::check_mode;
    use crate::workbench::Scenario;

    const PING: &str = r#"
name = "ping"
agents = ["a", "b", "i"]
[keys]
symmetric = ["k"]
[initkeys]
a = ["k"]
b = ["k"]
[protocol]
roles = ["A", "B"]
fresh = { A = ["n"] }
steps = ["A -> B : pair(A, enc(n, k))", "B -> A : n"]
[pools]
n = ["n1"]
[[sessions]]
role = "A"
agent = "a"
choices = { B = ["b"] }
[[sessions]]
role = "B"
agent = "b"
[adversary]
agent = "i"
mode = "passive"
algorithm = "dolev-yao"
"#;

    fn system(text: &str, mode: &str) -> Result<System, GenerateError> {
        let s = Scenario::parse(&text.replace("\"passive\"", &format!("\"{mode}\""))).unwrap();
        let alg = s.algorithm().unwrap();
        generate_system(&GenerationInput {
            agents: &s.agents,
            initkeys: &s.initkeys,
            keyfuns: &s.keyfuns,
            protocol: &s.protocol,
            sessions: &s.sessions,
            pools: &s.pools,
            atoms: &s.atoms,
            adversary: &s.adversary,
            algorithm: alg.as_ref(),
            bounds: s.bounds,
        })
    }

    #[test]
    fn passive_run_is_linear_and_clean() {
        let sys = system(PING, "passive").unwrap();
        assert_eq!(sys.run_count(), 1);
        // send, deliver, send, deliver
        assert_eq!(sys.runs()[0].len(), 5);
        let last = sys.state(*sys.runs()[0].last().unwrap());
        assert_eq!(last.locals[2].received().count(), 2);
        assert!(last.env.is_empty());
        let alg = crate::adversary::DolevYao {
            owner: Agent::new("i"),
        };
        assert!(check_mode(&sys, Mode::Passive, &alg).is_empty());
    }

    #[test]
    fn active_adversary_branches() {
        let sys = system(PING, "insider").unwrap();
        assert!(sys.run_count() > 1);
        let alg = crate::adversary::DolevYao {
            owner: Agent::new("i"),
        };
        assert!(check_mode(&sys, Mode::Insider, &alg).is_empty());
    }

    #[test]
    fn run_bound_is_enforced() {
        let text = format!("{PING}\n[bounds]\nmax_runs = 2\n");
        assert!(matches!(
            system(&text, "insider"),
            Err(GenerateError::BoundExceeded {
                bound: "max_runs",
                ..
            })
        ));
    }

    #[test]
    fn step_bound_truncates() {
        let text = format!("{PING}\n[bounds]\nmax_steps = 2\n");
        let sys = system(&text, "passive").unwrap();
        assert_eq!(sys.truncated_runs(), 1);
        assert_eq!(sys.runs()[0].len(), 3);
    }

    #[test]
    fn exhausted_pool_blocks_a_session() {
        let text = PING.replace(
            "[adversary]",
            "[[sessions]]\nrole = \"A\"\nagent = \"a\"\nchoices = { B = [\"b\"] }\n[adversary]",
        );
        let sys = system(&text, "passive").unwrap();
        for r in sys.runs() {
            let a = &sys.state(*r.last().unwrap()).locals[0];
            assert_eq!(a.sent().count(), 1);
        }
    }
}
