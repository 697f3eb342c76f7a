//! End-to-end runs of the binary, checking exit codes and output shape.

use std::path::PathBuf;
use std::process::{Command, Output};

fn examples(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("examples")
        .join(rel)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cmlkit"))
        .args(args)
        .output()
        .expect("spawn cmlkit")
}

fn ex(rel: &str) -> String {
    examples(rel).display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn check_sat_verdicts() {
    let o = run(&["check-sat", &ex("basic/exactly_one.cml")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("sat"));

    let o = run(&["check-sat", &ex("basic/one_and_two.cml")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("unsat"));
}

#[test]
fn pi2_input_is_rejected() {
    let o = run(&["check-sat", &ex("basic/infinite.cml")]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("FragmentUnsupported"), "{err}");
    assert!(err.contains("undecidable"), "{err}");
    assert!(stdout(&o).is_empty());
}

#[test]
fn json_output_parses() {
    let o = run(&["--format", "json", "check-sat", &ex("basic/finite.cml")]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["verdict"], "sat");
    assert_eq!(v["trace"]["fragment"], "Sigma2");
}

#[test]
fn post_prints_a_formula_that_parses_back() {
    let o = run(&[
        "post",
        "--model",
        &ex("basic/example.cpn"),
        "--formula",
        &ex("basic/some_r.cml"),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let net = cmlkit::parse_model(&std::fs::read_to_string(examples("basic/example.cpn")).unwrap())
        .unwrap();
    let f = cmlkit::parse_formula(text.trim(), &net.signature).unwrap();
    assert!(f.to_string().contains("exists x in r"));
}

#[test]
fn unknown_transition_and_bad_args_are_usage_errors() {
    let o = run(&[
        "post",
        "--model",
        &ex("basic/example.cpn"),
        "--formula",
        &ex("basic/some_r.cml"),
        "--transition",
        "nope",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        run(&["check-sat", "/no/such/file.cml"]).status.code(),
        Some(2)
    );
}

#[test]
fn solver_failure_exits_3() {
    let o = run(&[
        "--solver",
        "/no/such/solver",
        "check-sat",
        &ex("basic/exactly_one.cml"),
    ]);
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn writers_exclusion_holds() {
    let o = run(&[
        "check-invariant",
        "--model",
        &ex("rw/rw.cpn"),
        "--init",
        &ex("rw/init.cml"),
        "--inv",
        &ex("rw/writers_exclusive.cml"),
        "--aux",
        &ex("rw/aux_writers.cml"),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("verdict: holds"));
}

#[test]
fn reader_writer_aux_reports_failure_with_json() {
    let o = run(&[
        "--format",
        "json",
        "--full",
        "check-invariant",
        "--model",
        &ex("rw/rw.cpn"),
        "--init",
        &ex("rw/init.cml"),
        "--inv",
        &ex("rw/rf.cml"),
        "--aux",
        &ex("rw/aux.cml"),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["verdict"]["kind"], "fails");
    assert_eq!(v["lemmas"].as_array().unwrap().len(), 70);
}

#[test]
fn bounded_reach_exit_codes() {
    let base = [
        "bounded-reach",
        "--model",
        &ex("rw/rw.cpn"),
        "--init",
        &ex("rw/init.cml"),
    ]
    .map(String::from);
    let mut reach: Vec<String> = base.to_vec();
    reach.extend([
        "--target".into(),
        ex("rw/target_writer.cml"),
        "-k".into(),
        "1".into(),
    ]);
    let o = run(&reach.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("depth 1"));

    let mut safe: Vec<String> = base.to_vec();
    safe.extend([
        "--target".into(),
        ex("rw/target_two_writers.cml"),
        "-k".into(),
        "3".into(),
    ]);
    let o = run(&safe.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn emit_smt_writes_scripts() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "--emit-smt",
        dir.path().to_str().unwrap(),
        "check-sat",
        &ex("basic/exactly_one.cml"),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let n = std::fs::read_dir(dir.path()).unwrap().count();
    assert!(n >= 1);
}

#[test]
fn oracle_check_agrees_on_the_example() {
    let o = run(&[
        "oracle-check",
        "--model",
        &ex("basic/example.cpn"),
        "--formula",
        &ex("basic/at_most_one_p.cml"),
        "--max-tokens",
        "2",
        "--colors",
        "-1,0,1",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}
