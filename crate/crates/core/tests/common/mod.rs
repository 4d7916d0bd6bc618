//! Shared fixtures: the traffic-sign case session and helpers to run it.

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

pub const OFFSET: &str = "120";

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures")
}

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

const OVERLAP_STEPS: &str = r#"[{"title": "Find test rows copied from the development split", "technique": {"name": "overlap_check", "parameters": {"train": "train.csv"}}}]"#;

const DIVERGENCE_STEPS: &str = r#"[{"title": "Compare feature distributions with a sample of the application scope", "technique": {"name": "divergence_check", "parameters": {"reference": "reference.csv", "bins": 10, "threshold": 0.1}}}]"#;

const LABEL_STEPS: &str = r#"[
  {"title": "Load and prepare data", "description": "Only differentiate between the classes stop and not_stop.", "technique": {"name": "collapse_classes", "parameters": {"keep": "stop", "other": "not_stop"}}},
  {"title": "Compute label confusions per class with confident learning", "technique": {"name": "confident_learning", "parameters": {"original_label": "not_stop"}}},
  {"title": "Check label fault candidates manually and revise them"}
]"#;

/// One CLI invocation: pinned clock (if any) and arguments after the global flags.
pub struct Call {
    pub at: Option<i64>,
    pub args: Vec<String>,
}

fn call(at: Option<i64>, args: &[&str]) -> Call {
    Call {
        at,
        args: args.iter().map(|s| s.to_string()).collect(),
    }
}

/// The scripted session that builds the complete case: a root claim refined
/// into one claim per test-data characteristic, each backed by a documented
/// realization. `data` prefixes the input file names.
pub fn session(data: &str) -> Vec<Call> {
    let test = format!("{data}test.csv");
    let probs = format!("{data}test_probs.csv");
    let t0 = Some(1663590000);
    vec![
        call(None, &["init"]),
        call(t0, &["new", "measure", "--id", "m_unseen", "--name", "Check the test data for overlap with development data", "--phase", "analysis", "--characteristic", "unseen"]),
        call(t0, &["new", "measure", "--id", "m_repr", "--name", "Compare the test data with the application scope", "--phase", "analysis", "--characteristic", "representative"]),
        call(t0, &["new", "measure", "--id", "m_labels", "--name", "Detect incorrect labels and revise them", "--phase", "analysis", "--characteristic", "correct_relation", "--description", "Incorrect labels in test data distort every metric computed on it."]),
        call(Some(1663590100), &["new", "blueprint", "--id", "bp_overlap", "--name", "detect_overlap_with_training_data", "--measure", "m_unseen", "--description", "Find exact copies of development rows in the test data.", "--steps", OVERLAP_STEPS]),
        call(Some(1663590200), &["new", "blueprint", "--id", "bp_repr", "--name", "compare_with_application_scope", "--measure", "m_repr", "--description", "Flag features whose distribution differs from the application scope.", "--steps", DIVERGENCE_STEPS]),
        call(Some(1663591378), &["new", "blueprint", "--id", "bp_lf_conf", "--name", "detect_label_faults_w_conf_learning", "--measure", "m_labels", "--description", "Detect potentially incorrect labels with confident learning approach.", "--justification", "Candidates are checked manually, so false positives cost review time only.", "--steps", LABEL_STEPS]),
        call(t0, &["new", "claim", "--id", "c_unseen", "--statement", "The test data was not seen during development of the DDM.", "--measure", "m_unseen"]),
        call(t0, &["new", "claim", "--id", "c_repr", "--statement", "The test data is representative of the application scope.", "--measure", "m_repr"]),
        call(t0, &["new", "claim", "--id", "c_labels", "--statement", "The test data is labeled correctly.", "--measure", "m_labels"]),
        call(t0, &["new", "claim", "--id", "root", "--name", "Test data quality", "--statement", "Quality measures were applied to the test data during data analysis such that the residual risk is acceptable.", "--risk-criterion", "ALARP", "--context", "Traffic sign recognition DDM", "--assumption", "The test split is fixed before evaluation."]),
        call(Some(1663590300), &["refine", "root", "--strategy", "Argue over each key characteristic of IID test data", "--subclaim", "c_unseen", "--subclaim", "c_repr", "--subclaim", "c_labels"]),
        call(Some(1663590400), &["realize", "bp_overlap", "--id", "ov_train", "--data", &test, "--data-version", "v2022-08", "--label-column", "signtype"]),
        call(Some(1663590410), &["conclude", "ov_train", "--text", "Two test rows duplicate development rows; both were removed from the evaluation split."]),
        call(Some(1663590420), &["doc", "ov_train"]),
        call(Some(1663590430), &["link", "c_unseen", "claim_evidence", "ov_train"]),
        call(Some(1663590500), &["realize", "bp_repr", "--id", "dv_scope", "--data", &test, "--data-version", "v2022-08", "--label-column", "signtype"]),
        call(Some(1663590510), &["conclude", "dv_scope", "--text", "No feature diverges beyond the threshold from the application scope sample."]),
        call(Some(1663590520), &["doc", "dv_scope"]),
        call(Some(1663590530), &["link", "c_repr", "claim_evidence", "dv_scope"]),
        call(Some(1663591380), &["realize", "bp_lf_conf", "--id", "lf_conf", "--data", &test, "--probs", &probs, "--data-version", "v2022-08", "--label-column", "signtype"]),
        call(Some(1663591390), &["conclude", "lf_conf", "--text", "Label fault candidates were reviewed; none required revision."]),
        call(Some(1663591392), &["doc", "lf_conf"]),
        call(Some(1690280800), &["realize", "bp_lf_conf", "--id", "lf_conf", "--data", &test, "--probs", &probs, "--data-version", "v2023-07", "--label-column", "signtype"]),
        call(Some(1690280820), &["conclude", "lf_conf", "--text", "Three potential stop signs not being labeled as such were found and checked. The signs were indeed no stop signs and were not revised."]),
        call(Some(1690280832), &["doc", "lf_conf"]),
        call(Some(1690280832), &["--format", "markdown", "doc", "lf_conf"]),
        call(Some(1690280840), &["link", "c_labels", "claim_evidence", "lf_conf"]),
        call(Some(1690280900), &["validate", "root"]),
        call(Some(1690280900), &["export", "root", "--mode", "subtree", "--out", "root.acx.json"]),
        call(Some(1690280900), &["export", "root", "--mode", "evidence_only", "--out", "root.evidence.acx.json"]),
    ]
}

fn full_args(case: &str, c: &Call) -> Vec<String> {
    let mut args = vec!["--case".to_string(), case.to_string(), "--offset".to_string(), OFFSET.to_string()];
    if let Some(at) = c.at {
        args.push("--at".into());
        args.push(at.to_string());
    }
    args.extend(c.args.iter().cloned());
    args
}

/// Copies the CLI fixtures into `dir` and runs the session there with the
/// real binary, all paths relative to `dir`.
pub fn run_session_binary(dir: &Path) -> Vec<String> {
    for name in ["test.csv", "test_probs.csv", "train.csv", "reference.csv"] {
        fs::copy(fixtures().join("cli").join(name), dir.join(name)).unwrap();
    }
    let mut transcript = Vec::new();
    for c in session("") {
        let out = Command::new(env!("CARGO_BIN_EXE_acforge"))
            .args(full_args("case", &c))
            .current_dir(dir)
            .env_remove("ACFORGE_CASE_DIR")
            .output()
            .unwrap();
        let stdout = String::from_utf8(out.stdout).unwrap();
        assert!(
            out.status.success(),
            "{:?} failed: {}{}",
            c.args,
            stdout,
            String::from_utf8_lossy(&out.stderr)
        );
        transcript.push(stdout);
    }
    transcript
}

/// Runs `args` in-process; returns (exit code, stdout, stderr).
pub fn run_cli(case: &Path, at: Option<i64>, args: &[&str]) -> (i32, String, String) {
    let c = call(at, args);
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("acforge".to_string()).chain(full_args(case.to_str().unwrap(), &c));
    let code = acforge::cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

/// Builds the complete case in-process under `dir/case` (absolute input
/// paths; exports land in the process working directory, so they are
/// skipped). Returns the case root.
pub fn build_fixture_case(dir: &Path) -> PathBuf {
    let case = dir.join("case");
    let data = format!("{}/", fixtures().join("cli").display());
    for c in session(&data).iter().filter(|c| c.args[0] != "export") {
        let args: Vec<&str> = c.args.iter().map(String::as_str).collect();
        let (code, out, err) = run_cli(&case, c.at, &args);
        assert_eq!(code, 0, "{args:?}: {out}{err}");
    }
    case
}

pub fn copy_dir(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            fs::copy(entry.path(), target).unwrap();
        }
    }
}

/// Rewrites one stored record by editing its JSON directly.
pub fn edit_record(path: &Path, edit: impl FnOnce(&mut serde_json::Map<String, serde_json::Value>)) {
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    edit(v.as_object_mut().unwrap());
    fs::write(path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
}

/// The golden files compared by the end-to-end run, as (golden name, path in the session dir).
pub fn golden_outputs() -> Vec<(&'static str, &'static str)> {
    vec![
        ("lf_conf.html", "case/docs/lf_conf/1690280832.html"),
        ("lf_conf.md", "case/docs/lf_conf/1690280833.md"),
        ("ov_train.html", "case/docs/ov_train/1663590420.html"),
        ("root.acx.json", "root.acx.json"),
        ("root.evidence.acx.json", "root.evidence.acx.json"),
    ]
}
