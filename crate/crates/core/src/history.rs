//! Agents, events and local histories.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::term::{Atom, Key, Message};

/// A participant. Agent names double as plaintext atoms inside messages.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Agent(Arc<str>);

impl Agent {
    pub fn new(name: impl AsRef<str>) -> Self {
        Agent(Arc::from(name.as_ref()))
    }

    pub fn name(&self) -> &str {
        &self.0
    }

    pub fn atom(&self) -> Atom {
        Atom::new(&*self.0)
    }

    pub fn message(&self) -> Message {
        Message::Atom(self.atom())
    }
}

impl fmt::Display for Agent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Agent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// `send(j, m)` or `recv(m)`. The sender of a `Send` is whoever's history
/// holds it; the recipient field is only a claim.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Event {
    Send { to: Agent, msg: Message },
    Recv { msg: Message },
}

impl Event {
    pub fn message(&self) -> &Message {
        match self {
            Event::Send { msg, .. } | Event::Recv { msg } => msg,
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Send { to, msg } => write!(f, "send({to},{msg})"),
            Event::Recv { msg } => write!(f, "recv({msg})"),
        }
    }
}

impl fmt::Debug for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// An agent's local state: the keys it starts with and its event sequence.
///
/// Both parts sit behind `Arc`s so that the many global states of a
/// generated system share unchanged histories.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct History {
    initial: Arc<BTreeSet<Key>>,
    events: Arc<Vec<Event>>,
}

impl History {
    pub fn new(initial: BTreeSet<Key>) -> Self {
        History {
            initial: Arc::new(initial),
            events: Arc::new(Vec::new()),
        }
    }

    pub fn with_events(initial: BTreeSet<Key>, events: Vec<Event>) -> Self {
        History {
            initial: Arc::new(initial),
            events: Arc::new(events),
        }
    }

    /// Builds a history whose events are `recv(m)` for each message.
    pub fn receiving<I>(initial: BTreeSet<Key>, msgs: I) -> Self
    where
        I: IntoIterator<Item = Message>,
    {
        Self::with_events(
            initial,
            msgs.into_iter().map(|msg| Event::Recv { msg }).collect(),
        )
    }

    pub fn initial_keys(&self) -> &BTreeSet<Key> {
        &self.initial
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn received(&self) -> impl Iterator<Item = &Message> {
        self.events.iter().filter_map(|e| match e {
            Event::Recv { msg } => Some(msg),
            _ => None,
        })
    }

    pub fn sent(&self) -> impl Iterator<Item = (&Agent, &Message)> {
        self.events.iter().filter_map(|e| match e {
            Event::Send { to, msg } => Some((to, msg)),
            _ => None,
        })
    }

    pub fn push(&mut self, event: Event) {
        Arc::make_mut(&mut self.events).push(event);
    }

    pub fn pushed(&self, event: Event) -> Self {
        let mut h = self.clone();
        h.push(event);
        h
    }

    /// The history truncated to its first `n` events.
    pub fn prefix(&self, n: usize) -> Self {
        History {
            initial: self.initial.clone(),
            events: Arc::new(self.events[..n.min(self.events.len())].to_vec()),
        }
    }

    /// True when `self` is `other` with zero or more events appended.
    pub fn extends(&self, other: &History) -> bool {
        self.initial == other.initial && self.events.starts_with(&other.events)
    }
}

impl fmt::Debug for History {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("History")
            .field("initial", &self.initial)
            .field("events", &self.events)
            .finish()
    }
}
