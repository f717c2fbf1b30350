use std::path::PathBuf;
use std::process::{Command, Output};

fn protoknow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_protoknow"))
        .args(args)
        .env("PROTOKNOW_WORKERS", "2")
        .output()
        .unwrap()
}

fn corpus_file(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("../core/corpus/{name}.scn"))
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn corpus_list_names_every_scenario() {
    let o = protoknow(&["corpus", "list"]);
    assert!(o.status.success());
    assert_eq!(
        stdout(&o).lines().collect::<Vec<_>>(),
        ["challenge", "ddg", "ns", "nsl"]
    );
}

#[test]
fn check_writes_report_and_system() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("report.json");
    let dump = dir.path().join("system.json");
    let o = protoknow(&[
        "check",
        corpus_file("challenge").to_str().unwrap(),
        "--json",
        json.to_str().unwrap(),
        "--dump-system",
        dump.to_str().unwrap(),
        "--debug-lowe",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["schema"], 1);
    assert_eq!(report["ok"], true);
    assert_eq!(report["lowe_debug"][0]["validator"], "enc(ns,pa)");
    assert_eq!(report["lowe_debug"][0]["clause"], "b");
    let system: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&dump).unwrap()).unwrap();
    assert_eq!(system["runs"].as_array().unwrap().len(), 1);
}

#[test]
fn mismatched_expectation_exits_one() {
    let o = protoknow(&["corpus", "run", "challenge", "--algorithm", "dolev-yao"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("MISMATCH"));
}

#[test]
fn json_to_stdout() {
    let o = protoknow(&["corpus", "run", "nsl", "--mode", "outsider", "--json", "-"]);
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["scenario"]["mode"], "outsider");
    assert_eq!(report["violations"].as_array().unwrap().len(), 0);
}

#[test]
fn usage_and_parse_errors_exit_two() {
    assert_eq!(protoknow(&["corpus", "run", "nope"]).status.code(), Some(2));
    assert_eq!(
        protoknow(&["check", "/nonexistent.scn"]).status.code(),
        Some(2)
    );
    assert_eq!(
        protoknow(&["corpus", "run", "ns", "--mode", "loud"])
            .status
            .code(),
        Some(2)
    );
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.scn");
    std::fs::write(&bad, "name = \"x\"\nagents = [\"a\"]\n").unwrap();
    let o = protoknow(&["check", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing field"));
}
