//! End-to-end checks of the `obsrank` binary: flags, exit codes, report
//! formats. Each test shells out to the built executable.

use std::path::PathBuf;
use std::process::{Command, Output};

fn obsrank_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_obsrank"));
    cmd.args(args);
    // isolate from the ambient environment
    cmd.env_remove("OBSRANK_SEED");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn obsrank(args: &[&str]) -> Output {
    obsrank_env(args, &[])
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8(bytes.to_vec()).expect("utf-8 output")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_str(&text(&out.stdout)).expect("stdout is JSON")
}

/// Scratch file under a per-process directory so parallel tests never collide.
fn temp_path(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("obsrank-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("temp dir");
    dir.join(name)
}

#[test]
fn full_rank_model_exits_zero() {
    let out = obsrank(&["analyze", "--model", "c2m-known-input"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", text(&out.stderr));
    let report = text(&out.stdout);
    assert!(report.contains("status: FISPO (full rank)"), "{report}");
    assert!(report.contains("rank: 6/6"), "{report}");
}

#[test]
fn deficient_model_exits_one_and_names_the_culprits() {
    let out = obsrank(&["analyze", "--model", "sirs-forced"]);
    assert_eq!(out.status.code(), Some(1));
    let report = text(&out.stdout);
    assert!(report.contains("status: deficient"), "{report}");
    assert!(report.contains("b1"), "{report}");
    assert!(report.contains("unidentifiable"), "{report}");
}

#[test]
fn exhausted_budget_exits_two() {
    let out = obsrank(&[
        "analyze",
        "--model",
        "nfkb-29-param",
        "--algorithm",
        "fispo",
        "--budget",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let report = text(&out.stdout);
    assert!(report.contains("status: inconclusive"), "{report}");
    assert!(report.contains("deadline"), "{report}");
}

#[test]
fn unknown_model_exits_three_with_a_hint() {
    let out = obsrank(&["analyze", "--model", "no-such-model"]);
    assert_eq!(out.status.code(), Some(3));
    let err = text(&out.stderr);
    assert!(err.starts_with("obsrank:"), "{err}");
    assert!(err.contains("built-in"), "{err}");
}

#[test]
fn json_report_is_machine_readable() {
    let out = obsrank(&[
        "analyze", "--model", "hiv3", "--algorithm", "fispo", "--json", "-", "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    assert_eq!(report["model"], "hiv3");
    assert_eq!(report["algorithm"], "fispo");
    assert_eq!(report["status"], "fispo");
    assert_eq!(report["rank"], 8);
    assert_eq!(report["dim"], 8);
    assert_eq!(report["verdicts"].as_array().unwrap().len(), 8);
    assert!(report["lie_orders_used"].as_u64().is_some());
}

#[test]
fn json_report_lands_in_a_file_next_to_the_text() {
    let path = temp_path("report.json");
    let out = obsrank(&[
        "analyze",
        "--model",
        "c2m-known-input",
        "--json",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(text(&out.stdout).contains("status: FISPO"), "human text still printed");
    let payload = std::fs::read_to_string(&path).expect("json file written");
    let report: serde_json::Value = serde_json::from_str(&payload).unwrap();
    assert_eq!(report["model"], "c2m-known-input");
    std::fs::remove_file(path).ok();
}

#[test]
fn fixing_a_parameter_shrinks_the_problem() {
    let out = obsrank(&[
        "analyze",
        "--model",
        "c2m-known-input",
        "--fix",
        "b=0.25",
        "--json",
        "-",
        "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", text(&out.stderr));
    let report = json(&out);
    assert_eq!(report["dim"], 5, "b was substituted away");
    assert_eq!(report["status"], "fispo");

    let bad = obsrank(&["analyze", "--model", "c2m-known-input", "--fix", "b=abc"]);
    assert_eq!(bad.status.code(), Some(3));
    assert!(text(&bad.stderr).contains("bad number"), "{}", text(&bad.stderr));
}

#[test]
fn derivative_caps_shape_the_augmented_state() {
    let out = obsrank(&[
        "analyze",
        "--model",
        "2dof-both-unknown",
        "--unknown-derivs",
        "F1=0",
        "--unknown-derivs",
        "F2=0",
        "--json",
        "-",
        "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let report = json(&out);
    assert_eq!(report["dim"], 9, "4 states + 3 parameters + 2 constant inputs");
    let flagged: Vec<&str> = report["verdicts"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|v| {
            matches!(
                v["verdict"].as_str(),
                Some("unobservable" | "unidentifiable" | "not_reconstructible")
            )
        })
        .map(|v| v["name"].as_str().unwrap())
        .collect();
    assert_eq!(flagged, ["x2", "F1", "F2"]);
}

#[test]
fn seed_comes_from_the_flag_then_the_environment() {
    let bad = obsrank_env(&["analyze", "--model", "hiv3"], &[("OBSRANK_SEED", "soon")]);
    assert_eq!(bad.status.code(), Some(3));
    assert!(text(&bad.stderr).contains("OBSRANK_SEED"));

    let from_env = obsrank_env(
        &["analyze", "--model", "hiv3", "--json", "-", "--quiet"],
        &[("OBSRANK_SEED", "123")],
    );
    assert_eq!(json(&from_env)["seed"], 123);

    let flag_wins = obsrank_env(
        &["analyze", "--model", "hiv3", "--seed", "7", "--json", "-", "--quiet"],
        &[("OBSRANK_SEED", "123")],
    );
    assert_eq!(json(&flag_wins)["seed"], 7);
}

#[test]
fn reports_are_identical_across_processes() {
    let run = || {
        let out = obsrank(&[
            "analyze",
            "--model",
            "big-unknown-input",
            "--unknown-derivs",
            "u=3",
            "--json",
            "-",
            "--quiet",
        ]);
        assert_eq!(out.status.code(), Some(1));
        let mut report = json(&out);
        report["duration_ms"] = 0.into();
        report
    };
    assert_eq!(run(), run());
}

#[test]
fn bench_prints_rows_and_a_summary_and_checks_goldens() {
    let out = obsrank(&["bench", "--suite", "c2m", "--algorithms", "probobs", "--json", "-"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert!(
        stdout.contains("5 rows: 5 matched golden, 0 mismatched, 0 timeouts, 0 errors"),
        "{stdout}"
    );
    // the JSON array follows the table; nothing before it prints a bracket
    let rows: serde_json::Value =
        serde_json::from_str(&stdout[stdout.find('[').expect("json rows")..]).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 5);
    for row in rows {
        assert_eq!(row["golden"]["kind"], "matched", "{row}");
        assert_eq!(row["algorithm"], "probobs");
    }
}

#[test]
fn bad_suite_or_algorithm_exits_three() {
    let suite = obsrank(&["bench", "--suite", "nope"]);
    assert_eq!(suite.status.code(), Some(3));
    let algo = obsrank(&["bench", "--algorithms", "magic"]);
    assert_eq!(algo.status.code(), Some(3));
    assert!(text(&algo.stderr).contains("fispo, probobs, or both"));
}

#[test]
fn model_files_load_from_disk() {
    let path = temp_path("decay.model");
    std::fs::write(
        &path,
        "name: decay\nstates: x\nparameters: k\ndynamics:\n  d(x)/dt = -k*x\noutputs:\n  x\n",
    )
    .unwrap();
    let out = obsrank(&["analyze", "--model", path.to_str().unwrap(), "--json", "-", "--quiet"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", text(&out.stderr));
    let report = json(&out);
    assert_eq!(report["model"], "decay");
    assert_eq!(report["dim"], 2);
    std::fs::remove_file(path).ok();

    let junk = temp_path("junk.model");
    std::fs::write(&junk, "this is not a model\n").unwrap();
    let bad = obsrank(&["analyze", "--model", junk.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(3));
    std::fs::remove_file(junk).ok();
}
