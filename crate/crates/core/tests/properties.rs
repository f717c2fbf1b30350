use std::collections::BTreeSet;
use std::sync::Arc;

use proptest::prelude::*;
use protoknow::adversary::DolevYao;
use protoknow::dolev_yao::{a_dy, dy_closure, dy_derives, MessageSet};
use protoknow::logic::Evaluator;
use protoknow::lowe::{guess_witness, lowe_derives, Clause, GuessConfig, Reachable};
use protoknow::term::{parse_message, render_message};
use protoknow::workbench::{build_system, corpus_get};
use protoknow::{
    conc, decr, encr, parse_formula, Agent, Answer, Formula, FormulaContext, History, Key,
    KeySpace, Message,
};

fn key_space() -> KeySpace {
    let mut ks = KeySpace::new();
    ks.declare_pair("ka", "ka_inv").unwrap();
    ks.declare_pair("kb", "kb_inv").unwrap();
    ks.declare_symmetric("k").unwrap();
    ks
}

fn keys() -> Vec<Key> {
    let ks = key_space();
    ks.keys().cloned().collect()
}

fn leaf() -> impl Strategy<Value = Message> {
    prop_oneof![
        prop::sample::select(vec!["n1", "n2", "n3"]).prop_map(Message::atom),
        prop::sample::select(keys()).prop_map(Message::Key),
    ]
}

/// Messages of depth at most `depth`.
fn message(depth: u32) -> impl Strategy<Value = Message> {
    leaf().prop_recursive(depth.saturating_sub(1), 32, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| conc(a, b)),
            (inner, prop::sample::select(keys())).prop_map(|(a, k)| encr(a, k)),
        ]
    })
}

fn answer() -> impl Strategy<Value = Answer> {
    prop::sample::select(vec![Answer::Yes, Answer::No, Answer::Unknown])
}

/// A random submessage of `m`, chosen by `path`.
fn descend(m: &Message, path: &[bool]) -> Message {
    match (m, path.split_first()) {
        (Message::Concat(a, b), Some((&left, rest))) => descend(if left { a } else { b }, rest),
        (Message::Encrypt(body, _), Some((_, rest))) => descend(body, rest),
        _ => m.clone(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn submessage_order_on_depth_four(m in message(4), p1 in prop::collection::vec(any::<bool>(), 0..4), p2 in prop::collection::vec(any::<bool>(), 0..4)) {
        let s = descend(&m, &p1);
        let t = descend(&s, &p2);
        prop_assert!(m.is_submessage_of(&m));
        prop_assert!(s.is_submessage_of(&m));
        prop_assert!(t.is_submessage_of(&s));
        prop_assert!(t.is_submessage_of(&m));
        prop_assert!(s.depth() <= m.depth());
    }

    #[test]
    fn submessage_is_antisymmetric(a in message(3), b in message(3)) {
        if a.is_submessage_of(&b) && b.is_submessage_of(&a) {
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn decryption_inverts_encryption(m in message(3), k in prop::sample::select(keys())) {
        let c = encr(m.clone(), k.clone());
        prop_assert_eq!(decr(&c, &k.inverse()).unwrap(), m);
        prop_assert_eq!(k.inverse().inverse(), k);
    }

    #[test]
    fn messages_render_and_parse_back(m in message(4)) {
        let text = render_message(&m);
        prop_assert_eq!(parse_message(&text, &key_space()).unwrap(), m);
    }

    #[test]
    fn formulas_render_and_parse_back(m in message(3), a in answer(), b in any::<bool>()) {
        let i = Agent::new("i");
        let base = if b { Formula::has(&i, m.clone()) } else { Formula::received(&i, m) };
        let f = match a {
            Answer::Yes => Formula::know(&i, base),
            Answer::No => Formula::alg_know(&i, Formula::not(base)),
            Answer::Unknown => Formula::and(base.clone(), Formula::implies(base.clone(), base)),
        };
        let ks = key_space();
        prop_assert_eq!(parse_formula(&f.to_string(), FormulaContext::open(&ks)).unwrap(), f);
    }

    #[test]
    fn closure_is_monotone_and_idempotent(h in prop::collection::btree_set(message(3), 0..5), extra in message(3)) {
        let c = dy_closure(&h);
        prop_assert!(h.is_subset(&c));
        prop_assert_eq!(dy_closure(&c), c.clone());
        let mut bigger = h.clone();
        bigger.insert(extra);
        prop_assert!(c.is_subset(&dy_closure(&bigger)));
    }

    #[test]
    fn dy_algorithm_matches_derivability(h in prop::collection::vec(message(3), 0..6), m in message(3), ks in prop::collection::btree_set(prop::sample::select(keys()), 0..3)) {
        let i = Agent::new("i");
        let local = History::receiving(ks.clone(), h.clone());
        let mut base: MessageSet = h.into_iter().collect();
        base.extend(ks.into_iter().map(Message::Key));
        let yes = a_dy(&Formula::has(&i, m.clone()), &local, &i) == Answer::Yes;
        prop_assert_eq!(yes, dy_derives(&base, &m));
    }

    #[test]
    fn guessing_witnesses_are_well_formed(h in prop::collection::btree_set(message(3), 1..4), m in prop_oneof![leaf(), message(2)]) {
        if dy_derives(&h, &m) {
            prop_assert!(lowe_derives(&h, &m));
        }
        let local = History::receiving(BTreeSet::new(), h.iter().cloned());
        if let Some(w) = guess_witness(&m, &local, GuessConfig::default()) {
            prop_assert!(lowe_derives(&h, &m));
            // the validator step is reachable once the guess is added, and
            // not before
            let mut g = h.clone();
            g.insert(m.clone());
            let with_guess = Reachable::new(&g);
            let without = Reachable::new(&h);
            prop_assert!(w.step.premises().iter().all(|p| with_guess.contains(p)));
            prop_assert!(w.step.premises().iter().any(|p| !without.contains(p)));
            match w.clause {
                Clause::B => prop_assert!(g.contains(w.validator())),
                Clause::C => prop_assert!(w.validator().is_key()),
                Clause::A => {}
            }
        }
    }

    #[test]
    fn kleene_connectives(a in answer(), b in answer(), c in answer()) {
        prop_assert_eq!(a & b, b & a);
        prop_assert_eq!((a & b) & c, a & (b & c));
        prop_assert_eq!(!!a, a);
        prop_assert_eq!(a & Answer::Yes, a);
    }
}

#[test]
fn negation_is_classical_and_x_depends_on_local_state() {
    let s = corpus_get("ns").unwrap();
    let sys = build_system(&s).unwrap();
    let i = Agent::new("i");
    let ev = Evaluator::new(&sys).with_algorithm(Arc::new(DolevYao { owner: i.clone() }));
    let ai = sys.agent_index(&i).unwrap();
    for atom in &s.atoms {
        let phi = Formula::has(&i, Message::Atom(atom.clone()));
        let t = ev.table(&phi).unwrap();
        let n = ev.table(&Formula::not(phi.clone())).unwrap();
        assert!(t.iter().zip(n.iter()).all(|(a, b)| a != b));
        let x = ev.table(&Formula::alg_know(&i, phi)).unwrap();
        for (s1, st1) in sys.states().iter().enumerate() {
            for (s2, st2) in sys.states().iter().enumerate() {
                if st1.locals[ai] == st2.locals[ai] {
                    assert_eq!(x[s1], x[s2]);
                }
            }
        }
    }
}
