use protoknow::logic::Quantifier;
use protoknow::system::{check_outsider, Mode};
use protoknow::workbench::{
    build_system, corpus_get, corpus_list, corpus_run, run_scenario, CorpusError, RunOptions,
    Scenario, ScenarioError,
};

#[test]
fn corpus_scenarios_meet_their_expectations() {
    for name in corpus_list() {
        let r = corpus_run(name, RunOptions { debug_lowe: true }).unwrap();
        assert!(r.violations.is_empty(), "{name}: {:?}", r.violations);
        assert!(r.ok, "{name}:\n{}", r.summary());
        for q in &r.queries {
            if q.holds && q.quantifier == Quantifier::Exists {
                assert!(q.witness.is_some());
            }
            if !q.holds && q.quantifier == Quantifier::All {
                assert!(q.counterexample.is_some());
            }
        }
    }
}

#[test]
fn corpus_round_trips_through_render() {
    for name in corpus_list() {
        let s = corpus_get(name).unwrap();
        let text = s.render();
        let again = Scenario::parse(&text).unwrap();
        assert_eq!(again, s, "{name}");
        assert_eq!(again.render(), text, "{name}");
    }
}

#[test]
fn nsl_has_three_agents_and_an_outsider_variant_is_clean() {
    let s = corpus_get("nsl").unwrap();
    assert_eq!(s.agents.len(), 3);
    let out = s.with_mode(Mode::Outsider).unwrap();
    let sys = build_system(&out).unwrap();
    let alg = out.algorithm().unwrap();
    assert!(check_outsider(&sys, sys.adversary(), alg.as_ref()).is_empty());
}

#[test]
fn reports_are_deterministic() {
    for name in corpus_list() {
        let s = corpus_get(name).unwrap();
        let a = run_scenario(&s, RunOptions { debug_lowe: true })
            .unwrap()
            .to_json();
        let b = run_scenario(&s, RunOptions { debug_lowe: true })
            .unwrap()
            .to_json();
        assert_eq!(a, b, "{name}");
        assert!(a.contains("\"schema\": 1"));
    }
}

#[test]
fn unknown_names_are_reported() {
    assert!(matches!(
        corpus_get("nope"),
        Err(CorpusError::Unknown { .. })
    ));
    let err = corpus_get("challenge")
        .unwrap()
        .with_algorithm("low")
        .unwrap_err();
    let ScenarioError::Invalid(d) = err else {
        panic!("expected diagnostics");
    };
    assert_eq!(d[0].location, "adversary.algorithm");
    assert!(d[0].message.contains("did you mean `lowe`"), "{}", d[0]);
}

#[test]
fn ddg_needs_its_block() {
    let s = corpus_get("challenge").unwrap();
    let err = s.with_algorithm("dy+ddg").unwrap_err();
    assert!(err.to_string().contains("[ddg]"), "{err}");
}
