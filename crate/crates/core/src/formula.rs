//! Formulas of the logic of implicit (`K`) and algorithmic (`X`) knowledge.
//!
//! Text form (prefix, whitespace-insensitive):
//!
//! ```text
//! φ := send(i,msg) | recv(i,msg) | has(i,msg)
//!    | not(φ) | and(φ,φ) | or(φ,φ) | implies(φ,φ)
//!    | K(i,φ) | X(i,φ)
//! ```
//!
//! `or` and `implies` are abbreviations and are expanded while parsing.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::history::Agent;
use crate::syntax::{Cursor, SyntaxError, Token};
use crate::term::{KeySpace, Message, MessageParseError};

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Primitive {
    /// `send_i(m)`: `i` sent `m` to someone.
    Sent(Agent, Message),
    /// `recv_i(m)`.
    Received(Agent, Message),
    /// `has_i(m)`: `m` is a submessage of something `i` received.
    Has(Agent, Message),
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    Prim(Primitive),
    Not(Arc<Formula>),
    And(Arc<Formula>, Arc<Formula>),
    /// Implicit knowledge `K_i φ`.
    Know(Agent, Arc<Formula>),
    /// Algorithmic knowledge `X_i φ`.
    AlgKnow(Agent, Arc<Formula>),
}

impl Formula {
    pub fn has(agent: &Agent, m: Message) -> Self {
        Formula::Prim(Primitive::Has(agent.clone(), m))
    }

    pub fn sent(agent: &Agent, m: Message) -> Self {
        Formula::Prim(Primitive::Sent(agent.clone(), m))
    }

    pub fn received(agent: &Agent, m: Message) -> Self {
        Formula::Prim(Primitive::Received(agent.clone(), m))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Arc::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Arc::new(a), Arc::new(b))
    }

    /// `¬(¬a ∧ ¬b)`.
    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::not(Formula::and(Formula::not(a), Formula::not(b)))
    }

    /// `¬a ∨ b`.
    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::or(Formula::not(a), b)
    }

    pub fn know(agent: &Agent, f: Formula) -> Self {
        Formula::Know(agent.clone(), Arc::new(f))
    }

    pub fn alg_know(agent: &Agent, f: Formula) -> Self {
        Formula::AlgKnow(agent.clone(), Arc::new(f))
    }

    /// Every message `m` of a `has_i(m)` occurring in the formula, paired
    /// with its agent.
    pub fn has_atoms(&self) -> Vec<(Agent, Message)> {
        let mut out = Vec::new();
        self.walk(&mut |f| {
            if let Formula::Prim(Primitive::Has(a, m)) = f {
                out.push((a.clone(), m.clone()));
            }
        });
        out
    }

    pub fn walk(&self, visit: &mut impl FnMut(&Formula)) {
        visit(self);
        match self {
            Formula::Prim(_) => {}
            Formula::Not(f) | Formula::Know(_, f) | Formula::AlgKnow(_, f) => f.walk(visit),
            Formula::And(a, b) => {
                a.walk(visit);
                b.walk(visit);
            }
        }
    }

    pub fn agents(&self) -> BTreeSet<Agent> {
        let mut out = BTreeSet::new();
        self.walk(&mut |f| match f {
            Formula::Prim(Primitive::Sent(a, _))
            | Formula::Prim(Primitive::Received(a, _))
            | Formula::Prim(Primitive::Has(a, _))
            | Formula::Know(a, _)
            | Formula::AlgKnow(a, _) => {
                out.insert(a.clone());
            }
            _ => {}
        });
        out
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Primitive::Sent(a, m) => write!(f, "send({a},{m})"),
            Primitive::Received(a, m) => write!(f, "recv({a},{m})"),
            Primitive::Has(a, m) => write!(f, "has({a},{m})"),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Prim(p) => write!(f, "{p}"),
            Formula::Not(x) => write!(f, "not({x})"),
            Formula::And(a, b) => write!(f, "and({a},{b})"),
            Formula::Know(a, x) => write!(f, "K({a},{x})"),
            Formula::AlgKnow(a, x) => write!(f, "X({a},{x})"),
        }
    }
}

impl fmt::Debug for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulaParseError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error(transparent)]
    Message(#[from] MessageParseError),
    #[error("unknown agent `{name}` at position {position}")]
    UnknownAgent { name: String, position: usize },
}

/// Name resolution context for formula text.
#[derive(Clone, Copy)]
pub struct FormulaContext<'a> {
    pub keys: &'a KeySpace,
    /// When set, atoms must come from this set.
    pub atoms: Option<&'a BTreeSet<String>>,
    /// When set, agent positions must name one of these.
    pub agents: Option<&'a BTreeSet<String>>,
}

impl<'a> FormulaContext<'a> {
    pub fn open(keys: &'a KeySpace) -> Self {
        FormulaContext {
            keys,
            atoms: None,
            agents: None,
        }
    }
}

pub fn parse_formula(text: &str, ctx: FormulaContext<'_>) -> Result<Formula, FormulaParseError> {
    let mut cur = Cursor::new(text)?;
    let f = formula(&mut cur, ctx)?;
    cur.finish()?;
    Ok(f)
}

fn agent(cur: &mut Cursor, ctx: FormulaContext<'_>) -> Result<Agent, FormulaParseError> {
    let (at, name) = cur.ident()?;
    if let Some(agents) = ctx.agents {
        if !agents.contains(&name) {
            return Err(FormulaParseError::UnknownAgent { name, position: at });
        }
    }
    Ok(Agent::new(name))
}

fn formula(cur: &mut Cursor, ctx: FormulaContext<'_>) -> Result<Formula, FormulaParseError> {
    let (at, head) = cur.ident()?;
    cur.expect(Token::LParen)?;
    let f = match head.as_str() {
        "send" | "recv" | "has" => {
            let a = agent(cur, ctx)?;
            cur.expect(Token::Comma)?;
            let m = crate::term::parse::message(cur, ctx.keys, ctx.atoms)?;
            match head.as_str() {
                "send" => Formula::sent(&a, m),
                "recv" => Formula::received(&a, m),
                _ => Formula::has(&a, m),
            }
        }
        "not" => Formula::not(formula(cur, ctx)?),
        "and" | "or" | "implies" => {
            let a = formula(cur, ctx)?;
            cur.expect(Token::Comma)?;
            let b = formula(cur, ctx)?;
            match head.as_str() {
                "and" => Formula::and(a, b),
                "or" => Formula::or(a, b),
                _ => Formula::implies(a, b),
            }
        }
        "K" | "X" => {
            let a = agent(cur, ctx)?;
            cur.expect(Token::Comma)?;
            let inner = formula(cur, ctx)?;
            if head == "K" {
                Formula::know(&a, inner)
            } else {
                Formula::alg_know(&a, inner)
            }
        }
        _ => {
            return Err(
                SyntaxError::new(at, format!("unknown formula constructor `{head}`")).into(),
            )
        }
    };
    cur.expect(Token::RParen)?;
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::{conc, encr};

    fn ks() -> KeySpace {
        let mut ks = KeySpace::new();
        ks.declare_pair("pkA", "skA").unwrap();
        ks
    }

    #[test]
    fn parses_nested_modalities() {
        let ks = ks();
        let f = parse_formula(
            "K(i, X(i, has(i, enc(pair(nA,nB),pkA))))",
            FormulaContext::open(&ks),
        )
        .unwrap();
        let i = Agent::new("i");
        let m = encr(
            conc(Message::atom("nA"), Message::atom("nB")),
            ks.get("pkA").unwrap().clone(),
        );
        assert_eq!(
            f,
            Formula::know(&i, Formula::alg_know(&i, Formula::has(&i, m)))
        );
        assert_eq!(f.to_string(), "K(i,X(i,has(i,enc(pair(nA,nB),pkA))))");
    }

    #[test]
    fn derived_connectives_expand() {
        let ks = ks();
        let f = parse_formula("or(has(a,x), recv(a,y))", FormulaContext::open(&ks)).unwrap();
        assert_eq!(f.to_string(), "not(and(not(has(a,x)),not(recv(a,y))))");
        let g = parse_formula("implies(has(a,x), send(a,y))", FormulaContext::open(&ks)).unwrap();
        assert_eq!(g.to_string(), "not(and(not(not(has(a,x))),not(send(a,y))))");
    }

    #[test]
    fn rejects_unknown_agents_and_constructors() {
        let ks = ks();
        let agents: BTreeSet<String> = ["a".to_string()].into();
        let ctx = FormulaContext {
            keys: &ks,
            atoms: None,
            agents: Some(&agents),
        };
        assert!(matches!(
            parse_formula("has(b, x)", ctx),
            Err(FormulaParseError::UnknownAgent { .. })
        ));
        assert!(parse_formula("maybe(has(a,x))", ctx).is_err());
        assert!(parse_formula("has(a,x", ctx).is_err());
    }
}
