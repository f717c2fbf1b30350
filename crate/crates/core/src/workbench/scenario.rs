//! Scenario files: TOML documents describing keys, a protocol, sessions,
//! the adversary, bounds and queries.
//!
//! ```toml
//! name = "challenge"
//! agents = ["a", "s", "i"]
//!
//! [keys]
//! symmetric = ["pa"]
//!
//! [initkeys]
//! a = ["pa"]
//! s = ["pa"]
//!
//! [protocol]
//! roles = ["A", "S"]
//! fresh = { S = ["ns"] }
//! steps = ["A -> S : A", "S -> A : ns", "A -> S : enc(ns, pa)"]
//!
//! [[sessions]]
//! role = "A"
//! agent = "a"
//! choices = { S = ["s"] }
//!
//! [adversary]
//! agent = "i"
//! mode = "passive"
//! algorithm = "lowe"
//!
//! [[queries]]
//! formula = "X(i, has(i, pa))"
//! quantifier = "exists"
//! expect = true
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{DdgConfig, Registry, RegistryError, SharedAlgorithm};
use crate::formula::{parse_formula, Formula, FormulaContext};
use crate::history::Agent;
use crate::logic::Quantifier;
use crate::system::protocol::{
    default_pool, parse_step, KeyFunctions, ProtocolSpec, SessionSpec, TemplateScope,
};
use crate::system::{AdversarySpec, Bounds, Mode};
use crate::term::{Atom, Key, KeySpace};

/// The file format, field for field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub agents: Vec<String>,
    /// Constant atoms other than agent names and nonces.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub atoms: Vec<String>,
    #[serde(default)]
    pub keys: KeysSection,
    /// `keyfun.pk.a = "pk_a"` makes `pk(A)` usable in steps.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub keyfun: BTreeMap<String, BTreeMap<String, String>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub initkeys: BTreeMap<String, Vec<String>>,
    pub protocol: ProtocolSection,
    /// Values for fresh nonce variables, used without replacement.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub pools: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub sessions: Vec<SessionSection>,
    pub adversary: AdversarySection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ddg: Option<DdgSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsSection>,
    /// Named combinations of algorithms, tried left to right.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub algorithms: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub queries: Vec<QuerySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub soundness: Option<SoundnessSection>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeysSection {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub symmetric: Vec<String>,
    /// `[public, private]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pairs: Vec<[String; 2]>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    pub roles: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub fresh: BTreeMap<String, Vec<String>>,
    pub steps: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionSection {
    pub role: String,
    pub agent: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub choices: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarySection {
    pub agent: String,
    pub mode: String,
    pub algorithm: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DdgSection {
    pub key: String,
    pub bits: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_runs: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuerySection {
    pub formula: String,
    pub quantifier: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SoundnessSection {
    pub agent: String,
    pub formulas: Vec<String>,
}

/// A problem in a scenario, located by its field path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub location: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("line {line}, column {column}: {message}")]
    Toml {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{}", .0.iter().map(Diagnostic::to_string).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Diagnostic>),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub text: String,
    pub formula: Formula,
    pub quantifier: Quantifier,
    pub expect: Option<bool>,
}

/// A scenario with every name resolved.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub agents: Vec<Agent>,
    pub keys: KeySpace,
    pub keyfuns: KeyFunctions,
    pub initkeys: BTreeMap<Agent, BTreeSet<Key>>,
    pub atoms: BTreeSet<Atom>,
    pub protocol: ProtocolSpec,
    pub sessions: Vec<SessionSpec>,
    pub pools: BTreeMap<String, Vec<Atom>>,
    pub adversary: AdversarySpec,
    pub ddg: Option<DdgConfig>,
    pub bounds: Bounds,
    pub queries: Vec<Query>,
    pub soundness: Option<(Agent, Vec<Formula>)>,
}

impl PartialEq for Scenario {
    fn eq(&self, other: &Self) -> bool {
        self.file == other.file
    }
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map(|s| line_col(text, s.start)).unwrap_or((0, 0));
            ScenarioError::Toml {
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        Scenario::resolve(file)
    }

    pub fn load(path: &std::path::Path) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Scenario::parse(&text)
    }

    pub fn render(&self) -> String {
        render_file(&self.file)
    }

    /// The same scenario under another adversary algorithm.
    pub fn with_algorithm(&self, name: &str) -> Result<Scenario, ScenarioError> {
        let mut file = self.file.clone();
        file.adversary.algorithm = name.to_string();
        Scenario::resolve(file)
    }

    pub fn with_mode(&self, mode: Mode) -> Result<Scenario, ScenarioError> {
        let mut file = self.file.clone();
        file.adversary.mode = mode.as_str().to_string();
        Scenario::resolve(file)
    }

    pub fn registry(&self) -> Registry {
        build_registry(&self.file, &self.adversary.agent, self.ddg.clone())
    }

    pub fn algorithm(&self) -> Result<SharedAlgorithm, RegistryError> {
        self.registry().lookup(&self.adversary.algorithm)
    }

    pub fn resolve(file: ScenarioFile) -> Result<Scenario, ScenarioError> {
        Resolver::default().run(file)
    }
}

pub fn render_file(file: &ScenarioFile) -> String {
    toml::to_string(file).expect("scenario files always serialise")
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

fn build_registry(file: &ScenarioFile, owner: &Agent, ddg: Option<DdgConfig>) -> Registry {
    let mut r = Registry::new(owner.clone());
    if let Some(cfg) = ddg {
        r = r.with_ddg(cfg);
    }
    for (name, parts) in &file.algorithms {
        r.define(name.clone(), parts.clone());
    }
    r
}

#[derive(Default)]
struct Resolver {
    diags: Vec<Diagnostic>,
}

impl Resolver {
    fn err(&mut self, location: impl Into<String>, message: impl fmt::Display) {
        self.diags.push(Diagnostic {
            location: location.into(),
            message: message.to_string(),
        });
    }

    fn run(mut self, file: ScenarioFile) -> Result<Scenario, ScenarioError> {
        let agent_names: BTreeSet<String> = file.agents.iter().cloned().collect();
        if agent_names.len() != file.agents.len() {
            self.err("agents", "duplicate agent name");
        }
        let agents: Vec<Agent> = file.agents.iter().map(Agent::new).collect();

        let mut keys = KeySpace::new();
        for (n, k) in file.keys.symmetric.iter().enumerate() {
            if let Err(e) = keys.declare_symmetric(k) {
                self.err(format!("keys.symmetric[{n}]"), e);
            }
        }
        for (n, [public, private]) in file.keys.pairs.iter().enumerate() {
            if let Err(e) = keys.declare_pair(public, private) {
                self.err(format!("keys.pairs[{n}]"), e);
            }
        }

        let mut keyfuns = KeyFunctions::default();
        for (fun, map) in &file.keyfun {
            if keys.get(fun).is_some() {
                self.err(
                    format!("keyfun.{fun}"),
                    "key function name clashes with a key",
                );
            }
            for (a, k) in map {
                let loc = format!("keyfun.{fun}.{a}");
                if !agent_names.contains(a) {
                    self.err(&loc, format!("unknown agent `{a}`"));
                }
                match keys.get(k) {
                    Some(key) => keyfuns.insert(fun, Agent::new(a), key.clone()),
                    None => self.err(&loc, format!("unknown key `{k}`")),
                }
            }
        }

        let mut initkeys = BTreeMap::new();
        for (a, ks) in &file.initkeys {
            if !agent_names.contains(a) {
                self.err(format!("initkeys.{a}"), format!("unknown agent `{a}`"));
            }
            let mut set = BTreeSet::new();
            for (n, k) in ks.iter().enumerate() {
                match keys.get(k) {
                    Some(key) => {
                        set.insert(key.clone());
                    }
                    None => self.err(format!("initkeys.{a}[{n}]"), format!("unknown key `{k}`")),
                }
            }
            initkeys.insert(Agent::new(a), set);
        }

        let mut bit_atoms: Vec<Atom> = Vec::new();
        let ddg = match &file.ddg {
            None => None,
            Some(d) => {
                let key = keys.get(&d.key).cloned();
                match (key, usize::try_from(d.bits)) {
                    (None, _) => {
                        self.err("ddg.key", format!("unknown key `{}`", d.key));
                        None
                    }
                    (_, Err(_)) => {
                        self.err("ddg.bits", "must be positive");
                        None
                    }
                    (Some(k), Ok(bits)) => match DdgConfig::standard(k, bits) {
                        Ok(cfg) => {
                            bit_atoms.extend(cfg.bit_atoms().iter().cloned());
                            Some(cfg)
                        }
                        Err(e) => {
                            self.err("ddg", e);
                            None
                        }
                    },
                }
            }
        };

        // Protocol.
        let roles: BTreeSet<String> = file.protocol.roles.iter().cloned().collect();
        let mut nonces = BTreeSet::new();
        for (role, vars) in &file.protocol.fresh {
            if !roles.contains(role) {
                self.err(
                    format!("protocol.fresh.{role}"),
                    format!("unknown role `{role}`"),
                );
            }
            for v in vars {
                if !nonces.insert(v.clone()) {
                    self.err(
                        format!("protocol.fresh.{role}"),
                        format!("nonce `{v}` is generated twice"),
                    );
                }
                if roles.contains(v) || agent_names.contains(v) || keys.get(v).is_some() {
                    self.err(
                        format!("protocol.fresh.{role}"),
                        format!("nonce `{v}` clashes with another name"),
                    );
                }
            }
        }
        for r in &roles {
            if agent_names.contains(r) || keys.get(r).is_some() {
                self.err(
                    "protocol.roles",
                    format!("role `{r}` clashes with an agent or key name"),
                );
            }
        }
        let mut const_atoms: BTreeSet<String> = agent_names.clone();
        const_atoms.extend(file.atoms.iter().cloned());
        const_atoms.extend(bit_atoms.iter().map(|a| a.name().to_string()));
        let scope = TemplateScope {
            keys: &keys,
            keyfuns: &keyfuns,
            roles: &roles,
            nonces: &nonces,
            atoms: &const_atoms,
        };
        let mut steps = Vec::new();
        for (n, s) in file.protocol.steps.iter().enumerate() {
            match parse_step(s, &scope) {
                Ok(step) => steps.push(step),
                Err(e) => self.err(format!("protocol.steps[{n}]"), e),
            }
        }
        let protocol = ProtocolSpec {
            roles: file.protocol.roles.clone(),
            fresh: file.protocol.fresh.clone(),
            steps,
        };

        // Pools and atoms.
        let mut pools = BTreeMap::new();
        for (v, values) in &file.pools {
            if !nonces.contains(v) {
                self.err(
                    format!("pools.{v}"),
                    format!("`{v}` is not a fresh nonce variable"),
                );
            }
            if values.is_empty() {
                self.err(format!("pools.{v}"), "empty pool");
            }
            pools.insert(v.clone(), values.iter().map(Atom::new).collect::<Vec<_>>());
        }
        let mut atoms: BTreeSet<Atom> = file.atoms.iter().map(Atom::new).collect();
        atoms.extend(bit_atoms);
        for v in &nonces {
            atoms.extend(pools.get(v).cloned().unwrap_or_else(|| default_pool(v)));
        }

        // Sessions.
        let mut sessions = Vec::new();
        for (n, s) in file.sessions.iter().enumerate() {
            let loc = format!("sessions[{n}]");
            if !roles.contains(&s.role) {
                self.err(&loc, format!("unknown role `{}`", s.role));
            }
            if !agent_names.contains(&s.agent) {
                self.err(&loc, format!("unknown agent `{}`", s.agent));
            }
            if s.agent == file.adversary.agent {
                self.err(&loc, "the adversary does not run protocol sessions");
            }
            let mut choices = BTreeMap::new();
            for (var, values) in &s.choices {
                if !roles.contains(var) || *var == s.role {
                    self.err(
                        format!("{loc}.choices.{var}"),
                        format!("`{var}` is not another role"),
                    );
                }
                for v in values {
                    if !agent_names.contains(v) {
                        self.err(
                            format!("{loc}.choices.{var}"),
                            format!("unknown agent `{v}`"),
                        );
                    }
                }
                choices.insert(var.clone(), values.iter().map(Agent::new).collect());
            }
            sessions.push(SessionSpec {
                role: s.role.clone(),
                agent: Agent::new(&s.agent),
                choices,
            });
        }

        // Adversary, algorithms, bounds.
        let adv = Agent::new(&file.adversary.agent);
        if !agent_names.contains(&file.adversary.agent) {
            self.err(
                "adversary.agent",
                format!("unknown agent `{}`", file.adversary.agent),
            );
        }
        let mode = match file.adversary.mode.parse::<Mode>() {
            Ok(m) => m,
            Err(e) => {
                self.err("adversary.mode", e);
                Mode::Passive
            }
        };
        let registry = build_registry(&file, &adv, ddg.clone());
        if let Err(e) = registry.lookup(&file.adversary.algorithm) {
            self.err("adversary.algorithm", e);
        }
        let mut bounds = Bounds::default();
        if let Some(b) = &file.bounds {
            if let Some(v) = b.max_steps {
                match usize::try_from(v) {
                    Ok(v) if v > 0 => bounds.max_steps = v,
                    _ => self.err("bounds.max_steps", format!("must be positive, found {v}")),
                }
            }
            if let Some(v) = b.max_runs {
                match usize::try_from(v) {
                    Ok(v) if v > 0 => bounds.max_runs = v,
                    _ => self.err("bounds.max_runs", format!("must be positive, found {v}")),
                }
            }
        }

        // Queries.
        let mut atom_names: BTreeSet<String> = atoms.iter().map(|a| a.name().to_string()).collect();
        atom_names.extend(agent_names.iter().cloned());
        let ctx = FormulaContext {
            keys: &keys,
            atoms: Some(&atom_names),
            agents: Some(&agent_names),
        };
        let mut queries = Vec::new();
        for (n, q) in file.queries.iter().enumerate() {
            let loc = format!("queries[{n}]");
            let formula = parse_formula(&q.formula, ctx);
            let quantifier = q.quantifier.parse::<Quantifier>();
            if let Err(e) = &formula {
                self.err(format!("{loc}.formula"), e);
            }
            if let Err(e) = &quantifier {
                self.err(format!("{loc}.quantifier"), e);
            }
            if let (Ok(formula), Ok(quantifier)) = (formula, quantifier) {
                self.check_alg_agents(&loc, &formula, &adv);
                queries.push(Query {
                    text: q.formula.clone(),
                    formula,
                    quantifier,
                    expect: q.expect,
                });
            }
        }
        let soundness = file.soundness.as_ref().map(|s| {
            if s.agent != file.adversary.agent {
                self.err(
                    "soundness.agent",
                    "only the adversary has a knowledge algorithm",
                );
            }
            let mut fs = Vec::new();
            for (n, text) in s.formulas.iter().enumerate() {
                match parse_formula(text, ctx) {
                    Ok(f) => fs.push(f),
                    Err(e) => self.err(format!("soundness.formulas[{n}]"), e),
                }
            }
            (Agent::new(&s.agent), fs)
        });

        if !self.diags.is_empty() {
            return Err(ScenarioError::Invalid(self.diags));
        }
        let adversary = AdversarySpec {
            agent: adv,
            mode,
            algorithm: file.adversary.algorithm.clone(),
        };
        Ok(Scenario {
            file,
            agents,
            keys,
            keyfuns,
            initkeys,
            atoms,
            protocol,
            sessions,
            pools,
            adversary,
            ddg,
            bounds,
            queries,
            soundness,
        })
    }

    fn check_alg_agents(&mut self, loc: &str, f: &Formula, adv: &Agent) {
        let mut bad = BTreeSet::new();
        f.walk(&mut |g| {
            if let Formula::AlgKnow(a, _) = g {
                if a != adv {
                    bad.insert(a.clone());
                }
            }
        });
        for a in bad {
            self.err(
                format!("{loc}.formula"),
                format!("X({a}, ...) needs a knowledge algorithm, but only the adversary has one"),
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINI: &str = r#"
name = "mini"
agents = ["a", "b", "i"]

[keys]
symmetric = ["k"]

[initkeys]
a = ["k"]

[protocol]
roles = ["A", "B"]
fresh = { A = ["n"] }
steps = ["A -> B : enc(n, k)"]

[[sessions]]
role = "A"
agent = "a"
choices = { B = ["b"] }

[adversary]
agent = "i"
mode = "passive"
algorithm = "dolev-yao"

[[queries]]
formula = "has(i, n)"
quantifier = "exists"
expect = true
"#;

    #[test]
    fn parses_and_round_trips() {
        let s = Scenario::parse(MINI).unwrap();
        assert_eq!(s.agents.len(), 3);
        assert_eq!(s.queries[0].quantifier, Quantifier::Exists);
        let again = Scenario::parse(&s.render()).unwrap();
        assert_eq!(again, s);
        assert_eq!(again.render(), s.render());
    }

    #[test]
    fn toml_errors_have_positions() {
        let err = Scenario::parse("name = \"x\"\nagents = [").unwrap_err();
        assert!(matches!(err, ScenarioError::Toml { line: 2, .. }), "{err}");
    }

    #[test]
    fn unknown_algorithm_is_diagnosed() {
        let text = MINI.replace("algorithm = \"dolev-yao\"", "algorithm = \"dolev-yoa\"");
        let ScenarioError::Invalid(d) = Scenario::parse(&text).unwrap_err() else {
            panic!("expected diagnostics");
        };
        assert_eq!(d[0].location, "adversary.algorithm");
        assert!(
            d[0].message.contains("did you mean `dolev-yao`"),
            "{}",
            d[0]
        );
    }

    #[test]
    fn nonpositive_bounds_and_bad_names() {
        let text = format!("{MINI}\n[bounds]\nmax_steps = 0\n").replace("has(i, n)", "has(i, zz)");
        let ScenarioError::Invalid(d) = Scenario::parse(&text).unwrap_err() else {
            panic!("expected diagnostics");
        };
        let locs: Vec<&str> = d.iter().map(|d| d.location.as_str()).collect();
        assert_eq!(locs, ["bounds.max_steps", "queries[0].formula"]);
    }
}
