//! Protocols in Alice-and-Bob notation, with role variables and message
//! templates.
//!
//! A protocol is a list of steps `A -> B : tmpl`. Templates extend the
//! message grammar with variables (role names and fresh nonces) and with
//! key-function application in key position:
//!
//! ```text
//! tmpl := IDENT | pair(tmpl,tmpl) | enc(tmpl,key)
//! key  := IDENT | IDENT(IDENT)
//! ```
//!
//! Role variables range over agents; nonce variables over non-agent atoms.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::history::Agent;
use crate::syntax::{Cursor, SyntaxError, Token};
use crate::term::{conc, encr, Atom, Key, KeySpace, Message};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarKind {
    Agent,
    Nonce,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum KeyExpr {
    Const(Key),
    /// `fun(var)`, e.g. `pk(B)`.
    Apply {
        fun: String,
        var: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Template {
    Var(String, VarKind),
    Const(Message),
    Pair(Box<Template>, Box<Template>),
    Enc(Box<Template>, KeyExpr),
}

impl fmt::Display for KeyExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KeyExpr::Const(k) => write!(f, "{k}"),
            KeyExpr::Apply { fun, var } => write!(f, "{fun}({var})"),
        }
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Template::Var(v, _) => f.write_str(v),
            Template::Const(m) => write!(f, "{m}"),
            Template::Pair(a, b) => write!(f, "pair({a},{b})"),
            Template::Enc(b, k) => write!(f, "enc({b},{k})"),
        }
    }
}

/// Variable assignment of one protocol session.
pub type Bindings = BTreeMap<String, Message>;

/// Agent-indexed key families such as `pk` and `sk`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyFunctions {
    funs: BTreeMap<String, BTreeMap<Agent, Key>>,
}

impl KeyFunctions {
    pub fn insert(&mut self, fun: &str, agent: Agent, key: Key) {
        self.funs
            .entry(fun.to_string())
            .or_default()
            .insert(agent, key);
    }

    pub fn contains_fun(&self, fun: &str) -> bool {
        self.funs.contains_key(fun)
    }

    pub fn apply(&self, fun: &str, agent: &Agent) -> Option<&Key> {
        self.funs.get(fun)?.get(agent)
    }

    /// The agent whose `fun` key is `key`.
    pub fn preimage(&self, fun: &str, key: &Key) -> Option<&Agent> {
        self.funs
            .get(fun)?
            .iter()
            .find(|(_, k)| *k == key)
            .map(|(a, _)| a)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &BTreeMap<Agent, Key>)> {
        self.funs.iter()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("unknown identifier `{name}` at position {position}")]
    UnknownIdentifier { name: String, position: usize },
    #[error("`{name}` at position {position} is not a key or key function")]
    NotAKey { name: String, position: usize },
    #[error("key function `{fun}` needs a role variable, found `{arg}` at position {position}")]
    BadKeyArgument {
        fun: String,
        arg: String,
        position: usize,
    },
}

/// Names visible while parsing templates.
pub struct TemplateScope<'a> {
    pub keys: &'a KeySpace,
    pub keyfuns: &'a KeyFunctions,
    pub roles: &'a BTreeSet<String>,
    pub nonces: &'a BTreeSet<String>,
    /// Constant atoms, including agent names.
    pub atoms: &'a BTreeSet<String>,
}

impl TemplateScope<'_> {
    fn leaf(&self, name: String, position: usize) -> Result<Template, TemplateError> {
        if self.roles.contains(&name) {
            Ok(Template::Var(name, VarKind::Agent))
        } else if self.nonces.contains(&name) {
            Ok(Template::Var(name, VarKind::Nonce))
        } else if let Some(k) = self.keys.get(&name) {
            Ok(Template::Const(Message::Key(k.clone())))
        } else if self.atoms.contains(&name) {
            Ok(Template::Const(Message::atom(name)))
        } else {
            Err(TemplateError::UnknownIdentifier { name, position })
        }
    }
}

pub fn parse_template(text: &str, scope: &TemplateScope<'_>) -> Result<Template, TemplateError> {
    let mut cur = Cursor::new(text)?;
    let t = template(&mut cur, scope)?;
    cur.finish()?;
    Ok(t)
}

pub(crate) fn template(
    cur: &mut Cursor,
    scope: &TemplateScope<'_>,
) -> Result<Template, TemplateError> {
    let (at, name) = cur.ident()?;
    if cur.peek() != Some(&Token::LParen) {
        return scope.leaf(name, at);
    }
    cur.expect(Token::LParen)?;
    let t = match name.as_str() {
        "pair" => {
            let a = template(cur, scope)?;
            cur.expect(Token::Comma)?;
            let b = template(cur, scope)?;
            Template::Pair(Box::new(a), Box::new(b))
        }
        "enc" => {
            let body = template(cur, scope)?;
            cur.expect(Token::Comma)?;
            let key = key_expr(cur, scope)?;
            Template::Enc(Box::new(body), key)
        }
        _ => {
            return Err(SyntaxError::new(
                at,
                format!("unknown constructor `{name}`, expected `pair` or `enc`"),
            )
            .into())
        }
    };
    cur.expect(Token::RParen)?;
    Ok(t)
}

fn key_expr(cur: &mut Cursor, scope: &TemplateScope<'_>) -> Result<KeyExpr, TemplateError> {
    let (at, name) = cur.ident()?;
    if cur.peek() == Some(&Token::LParen) {
        if !scope.keyfuns.contains_fun(&name) {
            return Err(TemplateError::NotAKey { name, position: at });
        }
        cur.expect(Token::LParen)?;
        let (vat, var) = cur.ident()?;
        if !scope.roles.contains(&var) {
            return Err(TemplateError::BadKeyArgument {
                fun: name,
                arg: var,
                position: vat,
            });
        }
        cur.expect(Token::RParen)?;
        return Ok(KeyExpr::Apply { fun: name, var });
    }
    match scope.keys.get(&name) {
        Some(k) => Ok(KeyExpr::Const(k.clone())),
        None => Err(TemplateError::NotAKey { name, position: at }),
    }
}

/// Context for matching and instantiating templates.
pub struct Resolver<'a> {
    pub keyfuns: &'a KeyFunctions,
    pub agents: &'a BTreeSet<Agent>,
}

impl Resolver<'_> {
    fn is_agent(&self, m: &Message) -> bool {
        matches!(m, Message::Atom(a) if self.agents.contains(&Agent::new(a.name())))
    }

    fn fits(&self, kind: VarKind, m: &Message) -> bool {
        match kind {
            VarKind::Agent => self.is_agent(m),
            VarKind::Nonce => m.is_atom() && !self.is_agent(m),
        }
    }

    /// The message `t` denotes under `b`, or the first unbound variable.
    pub fn instantiate(&self, t: &Template, b: &Bindings) -> Result<Message, String> {
        Ok(match t {
            Template::Var(v, _) => b.get(v).cloned().ok_or_else(|| v.clone())?,
            Template::Const(m) => m.clone(),
            Template::Pair(x, y) => conc(self.instantiate(x, b)?, self.instantiate(y, b)?),
            Template::Enc(x, k) => encr(self.instantiate(x, b)?, self.key(k, b)?),
        })
    }

    fn key(&self, k: &KeyExpr, b: &Bindings) -> Result<Key, String> {
        match k {
            KeyExpr::Const(k) => Ok(k.clone()),
            KeyExpr::Apply { fun, var } => {
                let who = match b.get(var) {
                    Some(Message::Atom(a)) => Agent::new(a.name()),
                    _ => return Err(var.clone()),
                };
                self.keyfuns
                    .apply(fun, &who)
                    .cloned()
                    .ok_or_else(|| format!("{fun}({who})"))
            }
        }
    }

    /// Extends `b` so that `t` instantiates to `m`, or returns `false`
    /// leaving `b` in an unspecified state.
    pub fn matches(&self, t: &Template, m: &Message, b: &mut Bindings) -> bool {
        match (t, m) {
            (Template::Var(v, kind), _) => match b.get(v) {
                Some(bound) => bound == m,
                None if self.fits(*kind, m) => {
                    b.insert(v.clone(), m.clone());
                    true
                }
                None => false,
            },
            (Template::Const(c), _) => c == m,
            (Template::Pair(x, y), Message::Concat(mx, my)) => {
                self.matches(x, mx, b) && self.matches(y, my, b)
            }
            (Template::Enc(x, kt), Message::Encrypt(mb, mk)) => {
                let key_ok = match kt {
                    KeyExpr::Const(k) => k == mk,
                    KeyExpr::Apply { fun, var } => match b.get(var) {
                        Some(Message::Atom(a)) => {
                            self.keyfuns.apply(fun, &Agent::new(a.name())) == Some(mk)
                        }
                        Some(_) => false,
                        None => match self.keyfuns.preimage(fun, mk) {
                            Some(who) => {
                                b.insert(var.clone(), who.message());
                                true
                            }
                            None => false,
                        },
                    },
                };
                key_ok && self.matches(x, mb, b)
            }
            _ => false,
        }
    }
}

impl Template {
    /// Variables of the template in first-occurrence order, with kinds.
    pub fn variables(&self) -> Vec<(String, VarKind)> {
        let mut out: Vec<(String, VarKind)> = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<(String, VarKind)>) {
        let mut add = |v: &str, k: VarKind| {
            if !out.iter().any(|(x, _)| x == v) {
                out.push((v.to_string(), k));
            }
        };
        match self {
            Template::Var(v, k) => add(v, *k),
            Template::Const(_) => {}
            Template::Pair(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Template::Enc(body, key) => {
                if let KeyExpr::Apply { var, .. } = key {
                    add(var, VarKind::Agent);
                }
                body.collect_vars(out);
            }
        }
    }
}

/// One line `from -> to : template` of the protocol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub from: String,
    pub to: String,
    pub message: Template,
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {} : {}", self.from, self.to, self.message)
    }
}

pub fn parse_step(text: &str, scope: &TemplateScope<'_>) -> Result<Step, TemplateError> {
    let mut cur = Cursor::new(text)?;
    let (fat, from) = cur.ident()?;
    if !scope.roles.contains(&from) {
        return Err(TemplateError::UnknownIdentifier {
            name: from,
            position: fat,
        });
    }
    cur.expect(Token::Arrow)?;
    let (tat, to) = cur.ident()?;
    if !scope.roles.contains(&to) {
        return Err(TemplateError::UnknownIdentifier {
            name: to,
            position: tat,
        });
    }
    cur.expect(Token::Colon)?;
    let message = template(&mut cur, scope)?;
    cur.finish()?;
    Ok(Step { from, to, message })
}

/// What one role does at one point of its program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Send { to: String, message: Template },
    Recv { pattern: Template },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolSpec {
    pub roles: Vec<String>,
    /// Fresh nonce variables generated by each role.
    pub fresh: BTreeMap<String, Vec<String>>,
    pub steps: Vec<Step>,
}

impl ProtocolSpec {
    /// The role's program: its sends and receives in step order.
    pub fn program(&self, role: &str) -> Vec<Action> {
        let mut out = Vec::new();
        for s in &self.steps {
            if s.from == role {
                out.push(Action::Send {
                    to: s.to.clone(),
                    message: s.message.clone(),
                });
            }
            if s.to == role {
                out.push(Action::Recv {
                    pattern: s.message.clone(),
                });
            }
        }
        out
    }

    pub fn fresh_of(&self, role: &str) -> &[String] {
        self.fresh.get(role).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// A session: an agent playing a role, with optional candidate values for
/// role variables it picks itself (for example its intended partner).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionSpec {
    pub role: String,
    pub agent: Agent,
    pub choices: BTreeMap<String, Vec<Agent>>,
}

/// The atom a nonce variable takes when no pool is declared.
pub fn default_pool(var: &str) -> Vec<Atom> {
    vec![Atom::new(var)]
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixture {
        keys: KeySpace,
        keyfuns: KeyFunctions,
        roles: BTreeSet<String>,
        nonces: BTreeSet<String>,
        atoms: BTreeSet<String>,
        agents: BTreeSet<Agent>,
    }

    fn fixture() -> Fixture {
        let mut keys = KeySpace::new();
        let mut keyfuns = KeyFunctions::default();
        for a in ["a", "b"] {
            let (pk, _) = keys
                .declare_pair(&format!("pk_{a}"), &format!("sk_{a}"))
                .unwrap();
            keyfuns.insert("pk", Agent::new(a), pk);
        }
        Fixture {
            keys,
            keyfuns,
            roles: ["A".to_string(), "B".to_string()].into(),
            nonces: ["nA".to_string()].into(),
            atoms: ["a".to_string(), "b".to_string()].into(),
            agents: [Agent::new("a"), Agent::new("b")].into(),
        }
    }

    impl Fixture {
        fn scope(&self) -> TemplateScope<'_> {
            TemplateScope {
                keys: &self.keys,
                keyfuns: &self.keyfuns,
                roles: &self.roles,
                nonces: &self.nonces,
                atoms: &self.atoms,
            }
        }

        fn resolver(&self) -> Resolver<'_> {
            Resolver {
                keyfuns: &self.keyfuns,
                agents: &self.agents,
            }
        }
    }

    #[test]
    fn step_round_trip() {
        let fx = fixture();
        let s = parse_step("A -> B : enc(pair(nA, A), pk(B))", &fx.scope()).unwrap();
        assert_eq!(s.to_string(), "A -> B : enc(pair(nA,A),pk(B))");
        assert_eq!(parse_step(&s.to_string(), &fx.scope()).unwrap(), s);
        assert_eq!(
            s.message.variables(),
            vec![
                ("B".to_string(), VarKind::Agent),
                ("nA".to_string(), VarKind::Nonce),
                ("A".to_string(), VarKind::Agent)
            ]
        );
    }

    #[test]
    fn rejects_unknown_names() {
        let fx = fixture();
        assert!(matches!(
            parse_step("A -> C : nA", &fx.scope()),
            Err(TemplateError::UnknownIdentifier { .. })
        ));
        assert!(matches!(
            parse_template("enc(nA, pq(B))", &fx.scope()),
            Err(TemplateError::NotAKey { .. })
        ));
        assert!(matches!(
            parse_template("enc(nA, pk(nA))", &fx.scope()),
            Err(TemplateError::BadKeyArgument { .. })
        ));
        assert!(parse_template("zz", &fx.scope()).is_err());
    }

    #[test]
    fn match_then_instantiate() {
        let fx = fixture();
        let t = parse_template("enc(pair(nA, A), pk(B))", &fx.scope()).unwrap();
        let r = fx.resolver();
        let pk_b = fx.keys.get("pk_b").unwrap().clone();
        let m = encr(conc(Message::atom("n1"), Message::atom("a")), pk_b);
        let mut b = Bindings::new();
        assert!(r.matches(&t, &m, &mut b));
        assert_eq!(b["B"], Message::atom("b"));
        assert_eq!(b["A"], Message::atom("a"));
        assert_eq!(r.instantiate(&t, &b).unwrap(), m);

        // a nonce variable never binds an agent name
        let bad = encr(
            conc(Message::atom("a"), Message::atom("a")),
            fx.keys.get("pk_b").unwrap().clone(),
        );
        assert!(!r.matches(&t, &bad, &mut Bindings::new()));
        assert_eq!(r.instantiate(&t, &Bindings::new()), Err("nA".to_string()));
    }

    #[test]
    fn program_splits_steps_by_role() {
        let fx = fixture();
        let spec = ProtocolSpec {
            roles: vec!["A".into(), "B".into()],
            fresh: BTreeMap::new(),
            steps: vec![
                parse_step("A -> B : A", &fx.scope()).unwrap(),
                parse_step("B -> A : B", &fx.scope()).unwrap(),
            ],
        };
        let a = spec.program("A");
        assert!(matches!(a[0], Action::Send { .. }));
        assert!(matches!(a[1], Action::Recv { .. }));
        assert_eq!(spec.program("B").len(), 2);
    }
}
