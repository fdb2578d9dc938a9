//! End-to-end tests of the `qml` binary: output formats, verdicts and
//! exit codes (0 success/EQUIV, 1 rejection/DISTINCT, 2 usage/syntax).

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_qml"));
    c.env_remove("QML_TOL");
    c
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    let mut cmd = bin();
    for a in args {
        if let Some(name) = a.strip_prefix("data:") {
            cmd.arg(data(name));
        } else {
            cmd.arg(a);
        }
    }
    cmd.output().expect("binary runs")
}

fn run_stdin(args: &[&str], input: &str) -> Output {
    let mut child = bin()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary spawns");
    child
        .stdin
        .as_mut()
        .unwrap()
        .write_all(input.as_bytes())
        .unwrap();
    child.wait_with_output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("no signal")
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_str(&stdout(o)).expect("valid JSON on stdout")
}

#[test]
fn check_reports_the_type() {
    let out = run(&["check", "data:had.qml"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(stdout(&out), "ok: Q2\n");

    let out = run(&["check", "--json", "data:had.qml"]);
    let v = json(&out);
    assert_eq!(v["ok"], true);
    assert_eq!(v["type"], "Q2");
    assert_eq!(v["discipline"], "strict");
    assert_eq!(v["context"], "x:Q2");
}

#[test]
fn strictness_is_the_default_and_can_be_relaxed() {
    let out = run(&["check", "data:orth_fail.qml"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("not orthogonal"), "{}", stderr(&out));
    assert!(
        stderr(&out).contains("2:15"),
        "error should carry a location"
    );

    let out = run(&["check", "--no-strict", "data:orth_fail.qml"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "ok: Q2\n");
}

#[test]
fn discarding_is_rejected_under_every_discipline() {
    for flags in [&[][..], &["--no-strict"][..]] {
        let mut args = vec!["check"];
        args.extend_from_slice(flags);
        args.push("data:measure.qml");
        let out = run(&args);
        assert_eq!(code(&out), 1);
        assert!(stderr(&out).contains("`y` is unused"), "{}", stderr(&out));
    }
    let out = run(&["check", "--classical", "data:measure.qml"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("not classical"));
}

#[test]
fn eval_prints_the_matrix() {
    let out = run(&["eval", "data:had.qml"]);
    assert_eq!(code(&out), 0);
    assert_eq!(
        stdout(&out),
        "0.707106781187 0.707106781187\n0.707106781187 -0.707106781187\n"
    );
}

#[test]
fn eval_prints_a_closed_column() {
    let out = run(&["eval", "data:bell.qml"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "0.707106781187\n0\n0\n0.707106781187\n");

    let v = json(&run(&["eval", "--json", "data:bell.qml"]));
    assert_eq!(v["in_type"], "Q1");
    assert_eq!(v["out_type"], "Q2*Q2");
    let m = v["matrix"].as_array().unwrap();
    assert_eq!(m.len(), 4);
    let cell = m[0][0].as_array().unwrap();
    assert!((cell[0].as_f64().unwrap() - 0.7071067811865475).abs() < 1e-12);
    assert_eq!(cell[1].as_f64().unwrap(), 0.0);
}

#[test]
fn eval_classical_prints_a_table() {
    let out = run(&["eval", "--classical", "data:id.qml"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "x=false -> false\nx=true -> true\n");
}

#[test]
fn nf_gives_canonical_forms() {
    let out = run(&["nf", "data:sum54.qml"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "false\n");

    let out = run(&["nf", "data:hh.qml"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "qif x then true else false\n");

    let v = json(&run(&["nf", "--json", "data:had.qml"]));
    assert_eq!(
        v["term"],
        "qif x then {-0.707106781187}*true + {0.707106781187}*false \
         else {0.707106781187}*true + {0.707106781187}*false"
    );
    // The exact form round-trips bit-for-bit through the parser.
    assert_eq!(
        v["exact"],
        "qif x then {-0.7071067811865475}*true + {0.7071067811865475}*false \
         else {0.7071067811865475}*true + {0.7071067811865475}*false"
    );
}

#[test]
fn equiv_answers_with_exit_codes() {
    let out = run(&["equiv", "data:hh.qml", "data:id.qml"]);
    let expected = "EQUIV\n\
                    nf left: qif x then true else false\n\
                    nf right: qif x then true else false\n";
    assert_eq!((code(&out), stdout(&out).as_str()), (0, expected));

    let out = run(&["equiv", "data:had.qml", "data:id.qml"]);
    assert_eq!(code(&out), 1);
    let text = stdout(&out);
    assert!(text.starts_with("DISTINCT\n"), "{text}");
    assert!(
        text.contains("nf left: qif x then {-0.707106781187}*true"),
        "{text}"
    );
    assert!(
        text.contains("nf right: qif x then true else false"),
        "{text}"
    );

    let v = json(&run(&["equiv", "--json", "data:hh.qml", "data:id.qml"]));
    assert_eq!(v["equivalent"], true);
    assert_eq!(v["nf_left"], "qif x then true else false");
    assert_eq!(v["nf_right"], "qif x then true else false");

    // Different declared contexts are a usage error, not a verdict.
    let out = run(&["equiv", "data:bell.qml", "data:id.qml"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("contexts differ"));
}

#[test]
fn ip_takes_closed_programs() {
    let out = run(&["ip", "data:plus.qml", "data:minus.qml"]);
    assert_eq!((code(&out), stdout(&out).as_str()), (0, "0\n"));

    let out = run(&["ip", "data:plus.qml", "data:plus.qml"]);
    assert_eq!((code(&out), stdout(&out).as_str()), (0, "1\n"));

    let v = json(&run(&["ip", "--json", "data:plus.qml", "data:minus.qml"]));
    assert_eq!(v["syntactic"], true);
    assert!(v["re"].as_f64().unwrap().abs() < 1e-9);
    assert_eq!(v["im"].as_f64().unwrap(), 0.0);

    let out = run(&["ip", "data:id.qml", "data:id.qml"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("closed"));
}

#[test]
fn derive_replays_the_recorded_script() {
    let fixture =
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../qml-core/tests/data/hh_derivation.qmld");
    let out = run(&["derive", fixture.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(stdout(&out), "ok: 38 steps\n");

    let v = json(&run(&["derive", "--json", fixture.to_str().unwrap()]));
    assert_eq!(v["steps"], 38);
}

#[test]
fn derive_rejects_wrong_steps_and_malformed_scripts() {
    let bad_step = "ctx: x:Q2\nstart: x\nRULE BETA_IF_TRUE L2R at root\nend: x\n";
    let out = run_stdin(&["derive", "-"], bad_step);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("does not match"), "{}", stderr(&out));

    let out = run_stdin(&["derive", "-"], "start: x\nwhat is this\nend: x\n");
    assert_eq!(code(&out), 2);
}

#[test]
fn tolerance_comes_from_flag_or_environment() {
    let out = run(&["check", "data:near_unit.qml"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("squared norm"));

    let mut cmd = bin();
    cmd.args(["check"])
        .arg(data("near_unit.qml"))
        .env("QML_TOL", "1e-6");
    let out = cmd.output().unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    // The flag wins over the environment.
    let mut cmd = bin();
    cmd.args(["check", "--tol", "1e-6"])
        .arg(data("near_unit.qml"))
        .env("QML_TOL", "1e-12");
    let out = cmd.output().unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let mut cmd = bin();
    cmd.args(["check"])
        .arg(data("had.qml"))
        .env("QML_TOL", "banana");
    let out = cmd.output().unwrap();
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("QML_TOL"));

    let out = run(&["check", "--tol", "-1", "data:had.qml"]);
    assert_eq!(code(&out), 2);

    let out = run(&["check", "--tol", "0", "data:had.qml"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("positive"));
}

#[test]
fn reads_programs_from_stdin() {
    let out = run_stdin(&["check", "-"], "main [x:Q2] = x\n");
    assert_eq!((code(&out), stdout(&out).as_str()), (0, "ok: Q2\n"));
}

#[test]
fn usage_problems_exit_two() {
    let out = run_stdin(&["check", "-"], "main [x:Q2] = qif x then\n");
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("syntax error"));

    let out = run(&["check", "data:no_such_file.qml"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("cannot read"));

    let out = run(&["frobnicate"]);
    assert_eq!(code(&out), 2);
}
