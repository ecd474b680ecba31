use std::path::PathBuf;

use assert_cmd::Command;
use predicates::str::contains;

fn bin() -> Command {
    Command::cargo_bin("ck-embed").unwrap()
}

fn input(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/inputs")
        .join(name)
}

fn example(name: &str) -> Vec<u8> {
    bin().args(["example", name]).output().unwrap().stdout
}

/// Compares against `tests/golden/<name>`; `UPDATE_GOLDEN=1` rewrites it.
fn golden(name: &str, actual: &[u8]) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let expected =
        std::fs::read(&path).unwrap_or_else(|_| panic!("missing golden file {}", path.display()));
    assert_eq!(
        String::from_utf8_lossy(actual),
        String::from_utf8_lossy(&expected),
        "output differs from {name}"
    );
}

#[test]
fn example_ex52_is_the_bundled_file() {
    let out = example("ex52");
    let bundled =
        std::fs::read(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/data/ex52.ck"))
            .unwrap();
    assert_eq!(out, bundled);
}

#[test]
fn ex52_pipeline_reports_p_and_constant() {
    let out = bin()
        .args(["pipeline", "--window", "2"])
        .write_stdin(example("ex52"))
        .assert()
        .success();
    let stdout = out.get_output().stdout.clone();
    let text = String::from_utf8(stdout.clone()).unwrap();
    assert!(text.contains("p = 3"), "{text}");
    assert!(text.contains("m = 1/5"), "{text}");
    assert!(text.contains(
        "chain = { X[k], X:inf, Y[k], Y:inf } ⊇ { X[k], X:inf, Y[k], Y:inf } ⊇ { Y:inf }"
    ));
    golden("pipeline_ex52.txt", &stdout);
}

#[test]
fn norms_are_monotone_in_the_window() {
    let out = bin()
        .args(["norms", "--window", "0", "--json"])
        .write_stdin(example("ex52"))
        .assert()
        .success();
    let stdout = out.get_output().stdout.clone();
    let m0 = String::from_utf8(stdout.clone())
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .find(|v| v["clause"] == "embedding constant")
        .map(|v| v["values"]["m"].as_str().unwrap().to_string())
        .unwrap();
    assert_eq!(m0, "1/3");
    golden("norms_ex52_window0.jsonl", &stdout);

    let out = bin()
        .args(["norms", "--json"])
        .write_stdin(example("ex52"))
        .assert()
        .success();
    let text = String::from_utf8(out.get_output().stdout.clone()).unwrap();
    assert!(
        text.contains(r#""m(W)":"0: 1/3, 1: 1/5, 2: 1/5""#),
        "{text}"
    );
    assert!(text.contains(r#""oracle":"1/5""#), "{text}");
    assert!(text.contains(r#""agrees":"true""#), "{text}");
}

#[test]
fn broken_kernel_fails_validation_with_location() {
    let out = bin()
        .args(["validate"])
        .arg(input("broken.ck"))
        .assert()
        .code(1);
    let stdout = out.get_output().stdout.clone();
    let text = String::from_utf8(stdout.clone()).unwrap();
    assert!(text.contains("kernel: weak* discontinuity - FAIL"));
    assert!(text.contains("block = Z") && text.contains("class = (2,1)"));
    golden("validate_broken.txt", &stdout);
}

#[test]
fn parse_errors_exit_with_two() {
    bin()
        .arg("validate")
        .write_stdin("")
        .assert()
        .code(2)
        .stderr(contains("no spaces declared"));
    bin()
        .arg("validate")
        .arg(input("bad_kind.ck"))
        .assert()
        .code(2)
        .stderr(contains("parse error at 3:11: unknown block kind `tree`"));
    bin().arg("frobnicate").assert().code(2);
    bin().args(["norms", "--window", "many"]).assert().code(2);
}

#[test]
fn cancellation_pipeline_lifts_then_stops() {
    let out = bin()
        .arg("pipeline")
        .write_stdin(example("cancel"))
        .assert()
        .code(1);
    let stdout = out.get_output().stdout.clone();
    let text = String::from_utf8(stdout.clone()).unwrap();
    assert!(text.contains("lift: envelope of S = envelope of T + 1 - PASS"));
    assert!(text.contains("pipeline: envelope continuous (reduction hypothesis) - FAIL"));
    assert!(text.contains("remaining stages after discontinuous envelope - SKIPPED"));
    golden("pipeline_cancel.txt", &stdout);
}

#[test]
fn lift_of_cancellation_has_tail_three_and_limit_one() {
    let out = bin()
        .arg("lift")
        .write_stdin(example("cancel"))
        .assert()
        .success();
    let text = String::from_utf8(out.get_output().stdout.clone()).unwrap();
    assert!(
        text.contains("classes {mod 1 rem 0 from 0: 3} limit 1"),
        "{text}"
    );
}

#[test]
fn signed_example_reduces() {
    let out = bin()
        .arg("reduce")
        .write_stdin(example("signed"))
        .assert()
        .success();
    let stdout = out.get_output().stdout.clone();
    golden("reduce_signed.txt", &stdout);
}

#[test]
fn inflated_constant_fails_loudly() {
    bin()
        .args(["filtration", "--m", "3/5"])
        .write_stdin(example("ex52"))
        .assert()
        .code(1)
        .stdout(contains("uncovered = { X[k], X:inf, Y[k] }"));
}

#[test]
fn filtration_and_pibase_on_ex52() {
    bin()
        .arg("filtration")
        .write_stdin(example("ex52"))
        .assert()
        .success()
        .stdout(contains("source = { Z:0 }"))
        .stdout(contains("target = { Y:inf }"));
    bin()
        .args(["pibase", "--target", "{ X[k], X:inf }"])
        .write_stdin(example("ex52"))
        .assert()
        .success()
        .stdout(contains("U = { X[k], X:inf }"));
    bin()
        .args(["pibase", "--target", "{ X:inf }"])
        .write_stdin(example("ex52"))
        .assert()
        .code(1);
}

#[test]
fn phi_prints_a_reparsable_set_map() {
    let out = bin()
        .args(["phi", "--r", "1/2"])
        .write_stdin(example("ex52"))
        .assert()
        .success();
    let text = String::from_utf8(out.get_output().stdout.clone()).unwrap();
    let decl: String = text.split("\n\n").next().unwrap().to_string();
    let file =
        format!("space K {{ block X seq; block Y seq; }}\nspace L {{ block Z seq; }}\n{decl}\n");
    bin().arg("validate").write_stdin(file).assert().success();
}

#[test]
fn identity_examples() {
    let file = bin()
        .args(["example", "identity", "block X seq; block W fin 2;"])
        .output()
        .unwrap()
        .stdout;
    bin()
        .args(["norms", "--oracle", "1"])
        .write_stdin(file.clone())
        .assert()
        .success()
        .stdout(contains("m = 1\n"));
    bin()
        .arg("pipeline")
        .write_stdin(file)
        .assert()
        .success()
        .stdout(contains("p = 1"));
}

#[test]
fn info_and_envelope() {
    bin()
        .arg("info")
        .write_stdin(example("ex52"))
        .assert()
        .success()
        .stdout(contains("positive = true"))
        .stdout(contains("||T|| = 1"));
    bin()
        .arg("envelope")
        .write_stdin(example("cancel"))
        .assert()
        .code(1)
        .stdout(contains("min = 0"));
}

#[test]
fn json_output_is_deterministic() {
    let run = |args: &[&str], stdin: Vec<u8>| {
        bin().args(args).write_stdin(stdin).output().unwrap().stdout
    };
    let a = run(&["pipeline", "--json"], example("ex52"));
    let b = run(&["pipeline", "--json"], example("ex52"));
    assert_eq!(a, b);
    let s1 = bin()
        .args(["selftest", "--quick", "--seed", "3", "--json"])
        .output()
        .unwrap();
    let s2 = bin()
        .args(["selftest", "--quick", "--seed", "3", "--json"])
        .output()
        .unwrap();
    assert!(s1.status.success());
    assert_eq!(s1.stdout, s2.stdout);
    for line in String::from_utf8(s1.stdout).unwrap().lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["verdict"], "PASS");
    }
}
