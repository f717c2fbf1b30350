//! Knowledge algorithms and the registry that names them.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::answer::Answer;
use crate::dolev_yao::a_dy;
use crate::formula::{Formula, Primitive};
use crate::history::{Agent, History};
use crate::lowe::{a_lowe, GuessConfig};
use crate::term::{Atom, Key, Message};

/// Shared evaluation skeleton of the local algorithms: the owner's
/// `has(m)` goes to `has`, negation and conjunction combine three-valued,
/// and everything else is `?`.
pub fn evaluate_local(
    phi: &Formula,
    owner: &Agent,
    has: &mut dyn FnMut(&Message) -> Answer,
) -> Answer {
    match phi {
        Formula::Prim(Primitive::Has(a, m)) if a == owner => has(m),
        Formula::Prim(_) | Formula::Know(..) | Formula::AlgKnow(..) => Answer::Unknown,
        Formula::Not(f) => !evaluate_local(f, owner, has),
        Formula::And(f, g) => {
            let left = evaluate_local(f, owner, has);
            if left == Answer::No {
                return Answer::No;
            }
            left & evaluate_local(g, owner, has)
        }
    }
}

/// `(formula, local state) → Yes | No | ?` for one agent.
pub trait KnowledgeAlgorithm: Send + Sync {
    fn name(&self) -> &str;
    fn owner(&self) -> &Agent;
    fn evaluate(&self, phi: &Formula, local: &History) -> Answer;
}

impl fmt::Debug for dyn KnowledgeAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.name(), self.owner())
    }
}

pub type SharedAlgorithm = Arc<dyn KnowledgeAlgorithm>;

#[derive(Debug, Clone)]
pub struct DolevYao {
    pub owner: Agent,
}

impl KnowledgeAlgorithm for DolevYao {
    fn name(&self) -> &str {
        "dolev-yao"
    }

    fn owner(&self) -> &Agent {
        &self.owner
    }

    fn evaluate(&self, phi: &Formula, local: &History) -> Answer {
        a_dy(phi, local, &self.owner)
    }
}

#[derive(Debug, Clone)]
pub struct LoweGuessing {
    pub owner: Agent,
    pub config: GuessConfig,
}

impl KnowledgeAlgorithm for LoweGuessing {
    fn name(&self) -> &str {
        "lowe"
    }

    fn owner(&self) -> &Agent {
        &self.owner
    }

    fn evaluate(&self, phi: &Formula, local: &History) -> Answer {
        a_lowe(phi, local, &self.owner, self.config)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DdgConfigError {
    #[error("bit count must be positive")]
    NoBits,
    #[error("expected {expected} bit atoms, got {got}")]
    CountMismatch { expected: usize, got: usize },
    #[error("bit atom `{0}` listed twice")]
    Duplicate(String),
}

/// The key an agent transmits bit by bit, and the atoms standing for its
/// bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DdgConfig {
    target_key: Key,
    bit_atoms: Vec<Atom>,
}

impl DdgConfig {
    pub fn new(
        target_key: Key,
        bit_atoms: Vec<Atom>,
        bit_count: usize,
    ) -> Result<Self, DdgConfigError> {
        if bit_count == 0 {
            return Err(DdgConfigError::NoBits);
        }
        if bit_atoms.len() != bit_count {
            return Err(DdgConfigError::CountMismatch {
                expected: bit_count,
                got: bit_atoms.len(),
            });
        }
        for (i, b) in bit_atoms.iter().enumerate() {
            if bit_atoms[..i].contains(b) {
                return Err(DdgConfigError::Duplicate(b.name().to_string()));
            }
        }
        Ok(DdgConfig {
            target_key,
            bit_atoms,
        })
    }

    /// Bit atoms named `bit_<key>_<j>` for `j` in `0..bit_count`.
    pub fn standard(target_key: Key, bit_count: usize) -> Result<Self, DdgConfigError> {
        let atoms = (0..bit_count)
            .map(|j| Atom::new(format!("bit_{}_{j}", target_key.name())))
            .collect();
        Self::new(target_key, atoms, bit_count)
    }

    pub fn target_key(&self) -> &Key {
        &self.target_key
    }

    pub fn bit_atoms(&self) -> &[Atom] {
        &self.bit_atoms
    }
}

#[derive(Debug, Clone)]
pub struct DuckDuckGoose {
    pub owner: Agent,
    pub config: DdgConfig,
}

/// The Duck-Duck-Goose algorithm: the target key counts as known once every
/// bit atom occurs in some received message. Any other `has` is `No`.
pub fn a_ddg(phi: &Formula, local: &History, owner: &Agent, cfg: &DdgConfig) -> Answer {
    let target = Message::Key(cfg.target_key.clone());
    evaluate_local(phi, owner, &mut |m| {
        if *m != target {
            return Answer::No;
        }
        Answer::from(cfg.bit_atoms.iter().all(|bit| {
            let bit = Message::Atom(bit.clone());
            local.received().any(|r| bit.is_submessage_of(r))
        }))
    })
}

impl KnowledgeAlgorithm for DuckDuckGoose {
    fn name(&self) -> &str {
        "ddg"
    }

    fn owner(&self) -> &Agent {
        &self.owner
    }

    fn evaluate(&self, phi: &Formula, local: &History) -> Answer {
        a_ddg(phi, local, &self.owner, &self.config)
    }
}

/// `first` answers unless it says something other than `Yes`, in which
/// case `second` does.
pub struct Combined {
    name: String,
    first: SharedAlgorithm,
    second: SharedAlgorithm,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot combine algorithms of `{first}` and `{second}`")]
pub struct OwnerMismatch {
    pub first: Agent,
    pub second: Agent,
}

pub fn combine(first: SharedAlgorithm, second: SharedAlgorithm) -> Result<Combined, OwnerMismatch> {
    if first.owner() != second.owner() {
        return Err(OwnerMismatch {
            first: first.owner().clone(),
            second: second.owner().clone(),
        });
    }
    Ok(Combined {
        name: format!("{}+{}", first.name(), second.name()),
        first,
        second,
    })
}

impl Combined {
    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

impl KnowledgeAlgorithm for Combined {
    fn name(&self) -> &str {
        &self.name
    }

    fn owner(&self) -> &Agent {
        self.first.owner()
    }

    fn evaluate(&self, phi: &Formula, local: &History) -> Answer {
        match self.first.evaluate(phi, local) {
            Answer::Yes => Answer::Yes,
            _ => self.second.evaluate(phi, local),
        }
    }
}

/// Always `?`.
#[derive(Debug, Clone)]
pub struct Abstain {
    pub owner: Agent,
}

impl KnowledgeAlgorithm for Abstain {
    fn name(&self) -> &str {
        "abstain"
    }

    fn owner(&self) -> &Agent {
        &self.owner
    }

    fn evaluate(&self, _: &Formula, _: &History) -> Answer {
        Answer::Unknown
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("unknown algorithm `{name}`; available: {}{}", available.join(", "), suggestion_text(suggestion))]
    Unknown {
        name: String,
        available: Vec<String>,
        suggestion: Option<String>,
    },
    #[error("algorithm `{0}` needs a [ddg] block in the scenario")]
    MissingDdg(String),
    #[error("algorithm `{name}` refers to itself")]
    Cyclic { name: String },
    #[error(transparent)]
    Owner(#[from] OwnerMismatch),
}

fn suggestion_text(s: &Option<String>) -> String {
    s.as_ref()
        .map(|s| format!(" (did you mean `{s}`?)"))
        .unwrap_or_default()
}

/// Named algorithms bound to one owning agent.
#[derive(Debug, Clone)]
pub struct Registry {
    owner: Agent,
    ddg: Option<DdgConfig>,
    guess: GuessConfig,
    /// User-defined names, each the combination of a sequence of names.
    custom: BTreeMap<String, Vec<String>>,
}

pub const BUILTIN_ALGORITHMS: [&str; 5] = ["dolev-yao", "lowe", "ddg", "dy+ddg", "abstain"];

impl Registry {
    pub fn new(owner: Agent) -> Self {
        Registry {
            owner,
            ddg: None,
            guess: GuessConfig::default(),
            custom: BTreeMap::new(),
        }
    }

    pub fn with_ddg(mut self, cfg: DdgConfig) -> Self {
        self.ddg = Some(cfg);
        self
    }

    pub fn with_guess_config(mut self, cfg: GuessConfig) -> Self {
        self.guess = cfg;
        self
    }

    /// Registers `name` as the left-to-right combination of `parts`.
    pub fn define(&mut self, name: impl Into<String>, parts: Vec<String>) {
        self.custom.insert(name.into(), parts);
    }

    pub fn owner(&self) -> &Agent {
        &self.owner
    }

    pub fn names(&self) -> Vec<String> {
        BUILTIN_ALGORITHMS
            .iter()
            .map(|s| s.to_string())
            .chain(self.custom.keys().cloned())
            .collect()
    }

    pub fn lookup(&self, name: &str) -> Result<SharedAlgorithm, RegistryError> {
        self.lookup_depth(name, 0)
    }

    fn lookup_depth(&self, name: &str, depth: usize) -> Result<SharedAlgorithm, RegistryError> {
        if depth > self.custom.len() + 1 {
            return Err(RegistryError::Cyclic {
                name: name.to_string(),
            });
        }
        let owner = self.owner.clone();
        let ddg = || {
            self.ddg
                .clone()
                .ok_or_else(|| RegistryError::MissingDdg(name.to_string()))
        };
        Ok(match name {
            "dolev-yao" => Arc::new(DolevYao { owner }),
            "lowe" => Arc::new(LoweGuessing {
                owner,
                config: self.guess,
            }),
            "ddg" => Arc::new(DuckDuckGoose {
                owner,
                config: ddg()?,
            }),
            "dy+ddg" => {
                let dy: SharedAlgorithm = Arc::new(DolevYao {
                    owner: owner.clone(),
                });
                let d: SharedAlgorithm = Arc::new(DuckDuckGoose {
                    owner,
                    config: ddg()?,
                });
                Arc::new(combine(dy, d)?.renamed("dy+ddg"))
            }
            "abstain" => Arc::new(Abstain { owner }),
            _ => match self.custom.get(name) {
                Some(parts) => {
                    let mut iter = parts.iter();
                    let first = iter.next().ok_or_else(|| self.unknown(name))?;
                    let mut acc = self.lookup_depth(first, depth + 1)?;
                    for p in iter {
                        let next = self.lookup_depth(p, depth + 1)?;
                        acc = Arc::new(combine(acc, next)?);
                    }
                    Arc::new(RenamedAlgorithm {
                        name: name.to_string(),
                        inner: acc,
                    })
                }
                None => return Err(self.unknown(name)),
            },
        })
    }

    fn unknown(&self, name: &str) -> RegistryError {
        let available = self.names();
        let suggestion = available
            .iter()
            .map(|a| (strsim::jaro_winkler(name, a), a))
            .filter(|(score, _)| *score > 0.7)
            .max_by(|x, y| x.0.total_cmp(&y.0))
            .map(|(_, a)| a.clone());
        RegistryError::Unknown {
            name: name.to_string(),
            available,
            suggestion,
        }
    }
}

struct RenamedAlgorithm {
    name: String,
    inner: SharedAlgorithm,
}

impl KnowledgeAlgorithm for RenamedAlgorithm {
    fn name(&self) -> &str {
        &self.name
    }

    fn owner(&self) -> &Agent {
        self.inner.owner()
    }

    fn evaluate(&self, phi: &Formula, local: &History) -> Answer {
        self.inner.evaluate(phi, local)
    }
}
