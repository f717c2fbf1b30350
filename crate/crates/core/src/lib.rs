//! Symbolic analysis of security protocols with epistemic queries.
//!
//! Messages live in a free algebra ([`term`]). Protocol executions are
//! generated as finite systems of runs ([`system`]) under a passive or
//! active adversary, and formulas with implicit (`K`) and algorithmic (`X`)
//! knowledge operators are evaluated over them ([`logic`]). The adversary's
//! algorithmic knowledge comes from a pluggable [`adversary::KnowledgeAlgorithm`]:
//! Dolev-Yao deduction ([`dolev_yao`]), Lowe's guessing model ([`lowe`]),
//! or the bit-collecting Duck-Duck-Goose algorithm.

pub mod adversary;
pub mod answer;
pub mod dolev_yao;
pub mod formula;
pub mod history;
pub mod logic;
pub mod lowe;
pub mod syntax;
pub mod system;
pub mod term;
pub mod workbench;

pub use answer::Answer;
pub use formula::{parse_formula, Formula, FormulaContext, Primitive};
pub use history::{Agent, Event, History};
pub use term::{conc, decr, encr, submessage, Atom, Key, KeyKind, KeySpace, Message};
