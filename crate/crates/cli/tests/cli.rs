use std::io::Write;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_rankdesign"));
    c.env_remove("RANKDESIGN_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("json output")
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().expect("exit code")
}

fn scenario_file(body: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(body.as_bytes()).unwrap();
    f
}

const SCENARIO: &str = r#"{
  "design": "individual",
  "generator": "logistic_shift",
  "delta": 0.8,
  "n_per_arm": 40,
  "replications": 200,
  "analysis": "wilcoxon"
}"#;

#[test]
fn design_individual_total() {
    let v = json(&[
        "design", "--effect", "or=3", "--power", "0.8", "--format", "json",
    ]);
    assert_eq!(v["n_total_rounded"], 80);
    assert_eq!(v["n_experiment"], v["n_control"]);
}

#[test]
fn design_cluster_counts() {
    let v = json(&[
        "design", "--effect", "or=2.05", "--power", "0.85", "--k", "45", "--gamma", "0.07",
        "--format", "json",
    ]);
    assert_eq!(v["clusters_experiment"], 10);
    assert_eq!(v["clusters_control"], 10);
    assert!((v["design_effect"].as_f64().unwrap() - 4.08).abs() < 1e-12);
}

#[test]
fn design_cluster_size_for_total_clusters() {
    let v = json(&[
        "design", "--effect", "or=2.05", "--power", "0.85", "--m", "24", "--gamma", "0.07",
        "--format", "json",
    ]);
    assert_eq!(v["cluster_size"], 21);
}

#[test]
fn ordinal_props_file_matches_inline() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "# category proportions\n0.2\n0.3\n0.5").unwrap();
    let path = f.path().to_str().unwrap();
    let base = [
        "design",
        "--effect",
        "or=2",
        "--power",
        "0.9",
        "--outcome",
        "ordinal",
    ];
    let a = json(&[&base[..], &["--props-file", path, "--format", "json"]].concat());
    let b = json(&[&base[..], &["--props", "0.2,0.3,0.5", "--format", "json"]].concat());
    assert_eq!(a, b);
}

#[test]
fn convert_sd_to_or() {
    let v = json(&[
        "convert", "--from", "sd=1", "--to", "or", "--format", "json",
    ]);
    assert!((v["or"].as_f64().unwrap() - 6.1337).abs() < 1e-4);
}

#[test]
fn deff_record() {
    let out = run(&["deff", "--k", "45", "--gamma", "0.07", "--format", "csv"]);
    assert!(out.status.success());
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "k,gamma,deff\n45,0.07,4.08\n"
    );
}

#[test]
fn exit_codes() {
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["design", "--power", "0.8"]), 64);
    assert_eq!(code(&["design", "--effect", "or=3", "--power", "1.5"]), 64);
    assert_eq!(
        code(&[
            "design",
            "--effect",
            "or=2",
            "--power",
            "0.9",
            "--outcome",
            "ordinal",
            "--props",
            "1.0"
        ]),
        64
    );
    assert_eq!(
        code(&["design", "--effect", "or=2.05", "--power", "0.85", "--m", "2", "--gamma", "0.07"]),
        2
    );
    assert_eq!(code(&["simulate", "/nonexistent/scenario.json"]), 65);
}

#[test]
fn output_is_byte_identical_across_runs() {
    let args = [
        "sweep",
        "--vary",
        "gamma",
        "--grid",
        "0.01:0.1:0.01",
        "--effect",
        "or=2",
        "--power",
        "0.9",
        "--k",
        "20",
        "--format",
        "csv",
    ];
    assert_eq!(run(&args).stdout, run(&args).stdout);
}

#[test]
fn sweep_csv_rows_match_single_designs() {
    let out = run(&[
        "sweep",
        "--vary",
        "or",
        "--grid",
        "1.5:3:0.5",
        "--power",
        "0.85",
        "--k",
        "45",
        "--gamma",
        "0.074",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let mut rdr = csv::Reader::from_reader(out.stdout.as_slice());
    let headers = rdr.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    let mut last = u64::MAX;
    for row in &rows {
        let or = &row[col("value")];
        let single = json(&[
            "design",
            "--effect",
            &format!("or={or}"),
            "--power",
            "0.85",
            "--k",
            "45",
            "--gamma",
            "0.074",
            "--format",
            "json",
        ]);
        let clusters: u64 = row[col("clusters_experiment")].parse().unwrap();
        assert_eq!(single["clusters_experiment"], clusters);
        assert_eq!(
            single["n_experiment"].to_string(),
            &row[col("n_experiment")]
        );
        assert!(clusters <= last);
        last = clusters;
    }
}

#[test]
fn simulate_seed_precedence() {
    let f = scenario_file(SCENARIO);
    let path = f.path().to_str().unwrap();
    assert_eq!(code(&["simulate", path]), 65);

    let env = bin()
        .args(["simulate", path, "--format", "json"])
        .env("RANKDESIGN_SEED", "11")
        .output()
        .unwrap();
    assert!(env.status.success());
    let env: Value = serde_json::from_slice(&env.stdout).unwrap();
    assert_eq!(env["seed"], 11);

    let flag = bin()
        .args(["simulate", path, "--seed", "5", "--format", "json"])
        .env("RANKDESIGN_SEED", "11")
        .output()
        .unwrap();
    let flag: Value = serde_json::from_slice(&flag.stdout).unwrap();
    assert_eq!(flag["seed"], 5);

    let with_seed = scenario_file(&SCENARIO.replace("\"delta\"", "\"seed\": 3, \"delta\""));
    let doc = bin()
        .args([
            "simulate",
            with_seed.path().to_str().unwrap(),
            "--format",
            "json",
        ])
        .env("RANKDESIGN_SEED", "11")
        .output()
        .unwrap();
    let doc: Value = serde_json::from_slice(&doc.stdout).unwrap();
    assert_eq!(doc["seed"], 3);
}

#[test]
fn simulate_is_reproducible_across_workers() {
    let f = scenario_file(SCENARIO);
    let path = f.path().to_str().unwrap();
    let a = json(&[
        "simulate",
        path,
        "--seed",
        "9",
        "--workers",
        "1",
        "--format",
        "json",
    ]);
    let b = json(&[
        "simulate",
        path,
        "--seed",
        "9",
        "--workers",
        "4",
        "--format",
        "json",
    ]);
    assert_eq!(a, b);
    assert_eq!(a["replications"], 200);
    assert_eq!(a["fingerprint"].as_str().unwrap().len(), 64);
}

#[test]
fn malformed_scenarios_report_location() {
    let unknown = scenario_file(&SCENARIO.replace("\"delta\"", "\"bogus\": 1, \"delta\""));
    let out = run(&["simulate", unknown.path().to_str().unwrap(), "--seed", "1"]);
    assert_eq!(out.status.code(), Some(65));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("bogus") && err.contains("line 4"), "{err}");

    let broken = scenario_file("{\n  \"design\": \"individual\",\n  \"delta\": ,\n}");
    let out = run(&["simulate", broken.path().to_str().unwrap(), "--seed", "1"]);
    assert_eq!(out.status.code(), Some(65));
    assert!(String::from_utf8(out.stderr).unwrap().contains("line 3"));

    let invalid = scenario_file(&SCENARIO.replace("\"wilcoxon\"", "\"cluster_rank_sum\""));
    assert_eq!(
        code(&["simulate", invalid.path().to_str().unwrap(), "--seed", "1"]),
        65
    );
}
