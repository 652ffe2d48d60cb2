use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pfilter::cli::{parse_problem, write_problem};
use pfilter::RejectionResult;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pfilter"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn pfilter(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn run_to_file(input: &Path, extra: &[&str]) -> (i32, Option<RejectionResult>) {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.json");
    let mut args = vec!["run", "--input", input.to_str().unwrap(), "--output", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = pfilter(&args);
    let result = fs::read_to_string(&out).ok().map(|t| serde_json::from_str(&t).unwrap());
    (code(&o), result)
}

#[test]
fn run_bh_fixture() {
    let (c, r) = run_to_file(&fixture("bh.json"), &[]);
    assert_eq!(c, 0);
    let r = r.unwrap();
    assert_eq!(r.elementary, vec![0, 1, 2]);
    assert_eq!(r.k_hat.0, vec![3.0]);
}

#[test]
fn run_empty_rejection() {
    let (c, r) = run_to_file(&fixture("empty.json"), &[]);
    assert_eq!(c, 0);
    let r = r.unwrap();
    assert!(r.elementary.is_empty());
    assert_eq!(r.per_layer, vec![Vec::<usize>::new()]);
}

#[test]
fn run_multi_layer_fixtures() {
    for name in ["grid.json", "weighted.json"] {
        let (c, r) = run_to_file(&fixture(name), &[]);
        assert_eq!(c, 0, "{name}");
        let problem = parse_problem(&fs::read_to_string(fixture(name)).unwrap()).unwrap();
        assert_eq!(r.unwrap(), pfilter::pfilter(&problem, &Default::default()).unwrap());
    }
    let (c, _) = run_to_file(&fixture("grid.json"), &["--ic", "weak", "--tolerance", "1e-12"]);
    assert_eq!(c, 0);
}

#[test]
fn run_csv_input() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("p.csv");
    fs::write(&csv, "pvalue\n0.01\n0.02\n0.03\n0.9\n").unwrap();
    let (c, r) = run_to_file(&csv, &["--alpha", "0.1"]);
    assert_eq!(c, 0);
    assert_eq!(r.unwrap().elementary, vec![0, 1, 2]);
}

#[test]
fn invalid_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("syntax.json", "{\"p\": [0.1,\n  \"layers\": []}"),
        ("range.json", r#"{"p": [1.5], "layers": [{"groups": "finest", "alpha": 0.1}]}"#),
        ("weights.json", r#"{"p": [0.1, 0.2], "layers": [{"groups": "finest", "alpha": 0.1, "w": [3, 3]}]}"#),
        ("index.json", r#"{"p": [0.1, 0.2], "layers": [{"groups": [[0, 5]], "alpha": 0.1}]}"#),
    ];
    for (name, text) in cases {
        let path = dir.path().join(name);
        fs::write(&path, text).unwrap();
        let (c, r) = run_to_file(&path, &[]);
        assert_eq!(c, 2, "{name}");
        assert!(r.is_none());
    }
    let o = pfilter(&["run", "--input", "/nonexistent/problem.json"]);
    assert_eq!(code(&o), 2);
    let o = pfilter(&["run", "--input", fixture("bh.json").to_str().unwrap(), "--tolerance", "-1"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn validation_messages_name_the_layer() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, r#"{"p": [0.1, 0.2], "layers": [{"groups": "finest", "alpha": 0.1, "w": [3, 3]}]}"#).unwrap();
    let o = pfilter(&["run", "--input", path.to_str().unwrap()]);
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("layer 0"), "{err}");
}

#[test]
fn fixtures_round_trip() {
    for name in ["bh.json", "empty.json", "grid.json", "weighted.json"] {
        let problem = parse_problem(&fs::read_to_string(fixture(name)).unwrap()).unwrap();
        let text = write_problem(&problem).unwrap();
        let again = parse_problem(&text).unwrap();
        assert_eq!(problem, again, "{name}");
        assert_eq!(text, write_problem(&again).unwrap(), "{name}");
    }
}

#[test]
fn oracle_subcommand() {
    for name in ["bh.json", "grid.json", "weighted.json"] {
        let o = pfilter(&["oracle", "--input", fixture(name).to_str().unwrap()]);
        let stdout = String::from_utf8(o.stdout.clone()).unwrap();
        assert_eq!(code(&o), 0, "{name}: {stdout}");
        assert!(stdout.contains("engine k") && stdout.contains("oracle k") && stdout.contains("match"));
    }
}

#[test]
fn oracle_refuses_oversized_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.csv");
    let text: String = (0..100_000).map(|i| format!("{}\n", (i as f64 + 1.0) * 1e-9)).collect();
    fs::write(&path, text).unwrap();
    let o = pfilter(&["oracle", "--input", path.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let outputs: Vec<(String, String)> = (0..2)
        .map(|j| {
            let out = dir.path().join(format!("report{j}.json"));
            let o = pfilter(&[
                "simulate",
                "--config",
                fixture("sim_independent.json").to_str().unwrap(),
                "--seed",
                "7",
                "--output",
                out.to_str().unwrap(),
            ]);
            assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
            let plot = dir.path().join(format!("report{j}.plot.csv"));
            (fs::read_to_string(out).unwrap(), fs::read_to_string(plot).unwrap())
        })
        .collect();
    assert_eq!(outputs[0], outputs[1]);
    let report: serde_json::Value = serde_json::from_str(&outputs[0].0).unwrap();
    for layer in report["report"]["layers"].as_array().unwrap() {
        let fdr = layer["fdr"]["mean"].as_f64().unwrap();
        let se = layer["fdr"]["se"].as_f64().unwrap();
        assert!(fdr <= 0.2 + 3.0 * se, "{layer}");
    }
    // header plus two layers for each of three levels
    assert_eq!(outputs[0].1.lines().count(), 7);
}

#[test]
fn simulate_rejects_zero_reps() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = pfilter(&[
        "simulate",
        "--config",
        fixture("sim_independent.json").to_str().unwrap(),
        "--reps",
        "0",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
}

#[test]
fn check_lemmas_exit_codes() {
    for suite in ["superuniformity", "inverse-binomial", "simes-dist"] {
        let o = pfilter(&["check-lemmas", "--suite", suite, "--reps", "20000", "--seed", "3"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    }
    assert_eq!(code(&pfilter(&["check-lemmas", "--suite", "lemma4"])), 2);
    assert_eq!(code(&pfilter(&["check-lemmas", "--reps", "999"])), 2);
}

#[test]
fn thread_count_from_environment() {
    let o = bin()
        .env("PFILTER_THREADS", "1")
        .args(["check-lemmas", "--suite", "inverse-binomial", "--reps", "1000"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let o = bin()
        .env("PFILTER_THREADS", "many")
        .args(["check-lemmas", "--suite", "inverse-binomial", "--reps", "1000"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(code(&pfilter(&["frobnicate"])), 2);
}
