use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn repo(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn peasflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_peasflow"))
        .args(args)
        .env_remove("PEASFLOW_SEED")
        .output()
        .expect("binary runs")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout)
        .unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&o.stdout)))
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A short copy of the smart-home scenario so runs stay fast.
fn short_smarthome(dir: &Path, seconds: u64) -> PathBuf {
    let mut v: Value =
        serde_json::from_str(&std::fs::read_to_string(repo("scenarios/smarthome.json")).unwrap()).unwrap();
    v["workload"]["duration_seconds"] = seconds.into();
    let p = dir.join("smarthome-short.json");
    std::fs::write(&p, v.to_string()).unwrap();
    p
}

fn strip_timing(csv: &str) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_reader(csv.as_bytes());
    let headers = r.headers().unwrap().clone();
    let keep: Vec<usize> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| !h.starts_with("latency_"))
        .map(|(i, _)| i)
        .collect();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            keep.iter().map(|&i| rec[i].to_string()).collect()
        })
        .collect()
}

#[test]
fn run_both_writes_two_reports_and_overhead() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = short_smarthome(dir.path(), 120);
    let out = dir.path().join("out");
    let o = peasflow(&["run", s(&scenario), "--enforcement", "both", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let j = stdout_json(&o);
    assert_eq!(j["reports"].as_array().unwrap().len(), 2);
    assert!(j["overhead_percent"].is_number());
    assert!(stderr(&o).contains("enforcement overhead"));
    for suffix in ["off", "on"] {
        for ext in ["json", "csv"] {
            let f = out.join(format!("report_smarthome-smarthome-s42-{suffix}.{ext}"));
            assert!(f.exists(), "missing {}", f.display());
        }
    }
}

#[test]
fn same_seed_gives_identical_csv_modulo_timing() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = short_smarthome(dir.path(), 120);
    let mut csvs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = peasflow(&[
            "run",
            s(&scenario),
            "--enforcement",
            "on",
            "--seed",
            "9",
            "--out",
            s(&out),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        csvs.push(std::fs::read_to_string(out.join("report_smarthome-smarthome-s9-on.csv")).unwrap());
    }
    assert_eq!(strip_timing(&csvs[0]), strip_timing(&csvs[1]));
}

#[test]
fn seed_environment_variable_wins() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = short_smarthome(dir.path(), 30);
    let o = Command::new(env!("CARGO_BIN_EXE_peasflow"))
        .args([
            "run",
            s(&scenario),
            "--enforcement",
            "off",
            "--seed",
            "1",
            "--out",
            s(dir.path()),
        ])
        .env("PEASFLOW_SEED", "77")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.path().join("report_smarthome-smarthome-s77-off.json").exists());

    let o = Command::new(env!("CARGO_BIN_EXE_peasflow"))
        .args(["run", s(&scenario), "--out", s(dir.path())])
        .env("PEASFLOW_SEED", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_path_is_an_input_error() {
    let o = peasflow(&["run", "/no/such/scenario.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/no/such/scenario.json"));
}

#[test]
fn invalid_scenario_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, r#"{"name": "x"}"#).unwrap();
    let o = peasflow(&["run", s(&p), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn check_reproduces_the_final_example() {
    let o = peasflow(&[
        "check",
        s(&repo("scenarios/smarthome.json")),
        "--tuple",
        s(&repo("scenarios/smarthome-pi1-output.json")),
        "--consumer",
        "smart-home-company",
        "--purpose",
        "admin",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("peopleCount: FAIL (cdc)"));
    let j = stdout_json(&o);
    assert_eq!(j["released"], serde_json::json!(["airQuality"]));
    assert_eq!(j["verdicts"][0]["failed_checks"], serde_json::json!(["cdc"]));
}

#[test]
fn check_agrees_with_the_library() {
    use peasflow::compliance::{compliance_check, ConsumerPolicy};
    let scenario = peasflow::scenario::load_scenario_file(repo("scenarios/smarthome.json")).unwrap();
    let tuple: peasflow::engine::Tuple =
        serde_json::from_str(&std::fs::read_to_string(repo("scenarios/smarthome-pi1-output.json")).unwrap()).unwrap();
    for (consumer, purpose) in [
        ("smart-home-company", "admin"),
        ("electricity-company", "billing"),
        ("x", "marketing"),
    ] {
        let (_, verdicts) = compliance_check(
            &tuple,
            &ConsumerPolicy::new(consumer, purpose),
            &scenario.taxonomies,
            scenario.document.flags,
        )
        .unwrap();
        let o = peasflow(&[
            "check",
            s(&repo("scenarios/smarthome.json")),
            "--tuple",
            s(&repo("scenarios/smarthome-pi1-output.json")),
            "--consumer",
            consumer,
            "--purpose",
            purpose,
        ]);
        let j = stdout_json(&o);
        for (v, got) in verdicts.iter().zip(j["verdicts"].as_array().unwrap()) {
            assert_eq!(got["attribute"], v.attribute.as_str());
            assert_eq!(got["passed"], v.passed);
            let names: Vec<&str> = v.failed_checks.iter().map(|c| c.name()).collect();
            assert_eq!(got["failed_checks"], serde_json::json!(names));
        }
        let dropped = verdicts.iter().any(|v| !v.passed);
        assert_eq!(o.status.code(), Some(if dropped { 3 } else { 0 }));
    }
}

#[test]
fn check_public_tuple_passes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.json");
    std::fs::write(
        &p,
        r#"{"timestamp": 1, "attributes": [{"name": "temperature", "value": 21.5, "category": ["generic"]}]}"#,
    )
    .unwrap();
    let o = peasflow(&[
        "check",
        s(&repo("scenarios/smarthome.json")),
        "--tuple",
        s(&p),
        "--consumer",
        "anyone",
        "--purpose",
        "marketing",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn check_rejects_unknown_ids() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.json");
    std::fs::write(
        &p,
        r#"{"timestamp": 1, "attributes": [{"name": "t", "value": 1, "category": ["weather"]}]}"#,
    )
    .unwrap();
    let home = repo("scenarios/smarthome.json");
    let args = [
        "check",
        s(&home),
        "--tuple",
        s(&p),
        "--consumer",
        "c",
        "--purpose",
        "admin",
    ];
    assert_eq!(peasflow(&args).status.code(), Some(2));
    let o = peasflow(&[
        "check",
        s(&repo("scenarios/smarthome.json")),
        "--tuple",
        s(&repo("scenarios/smarthome-pi1-output.json")),
        "--consumer",
        "c",
        "--purpose",
        "gardening",
    ]);
    assert_eq!(o.status.code(), Some(2));
    std::fs::write(&p, "not json").unwrap();
    assert_eq!(peasflow(&args).status.code(), Some(2));
}

#[test]
fn encode_counts_bits() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.json");
    std::fs::write(
        &p,
        r#"{"timestamp": 1, "attributes": [{"name": "t", "value": 1, "category": ["generic"]}]}"#,
    )
    .unwrap();
    let o = peasflow(&["encode", "--tuple", s(&p)]);
    assert_eq!(o.status.code(), Some(0));
    let j = stdout_json(&o);
    assert_eq!(j["total_bits"], 32);
    assert_eq!(j["attributes"][0]["bytes"], "00010100");

    std::fs::write(
        &p,
        r#"{"timestamp": 1, "attributes": [{"name": "t", "value": 1, "category": ["generic"],
            "history": [{"ac": ["generic"], "rc": ["generic"]}]}]}"#,
    )
    .unwrap();
    let j = stdout_json(&peasflow(&["encode", "--tuple", s(&p)]));
    assert!(j["total_bits"].as_u64().unwrap() > 32);

    let o = peasflow(&[
        "encode",
        "--tuple",
        s(&repo("scenarios/smarthome-pi1-output.json")),
        "--scenario",
        s(&repo("scenarios/smarthome.json")),
    ]);
    let j = stdout_json(&o);
    for a in j["attributes"].as_array().unwrap() {
        assert_eq!(
            a["bits"].as_u64().unwrap(),
            4 * a["bytes"].as_str().unwrap().len() as u64
        );
    }
    assert_eq!(j["attributes"][0]["bits"], 216);

    std::fs::write(&p, "[").unwrap();
    assert_eq!(peasflow(&["encode", "--tuple", s(&p)]).status.code(), Some(2));
}

#[test]
fn gen_commands() {
    let dir = tempfile::tempdir().unwrap();
    let o = peasflow(&["gen", "taxonomy", "--kind", "purpose", "--size", "12", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let j = stdout_json(&o);
    assert_eq!(j["edges"].as_array().unwrap().len(), 11);

    let o = peasflow(&[
        "gen",
        "pp-set",
        "--scenario",
        s(&repo("scenarios/smarthome.json")),
        "--kind",
        "full",
        "--count",
        "4",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout_json(&o).as_array().unwrap().len(), 4);

    let out = dir.path().join("qf");
    let o = peasflow(&[
        "gen",
        "qfamily",
        "--range",
        "q1..q3",
        "--tree-size",
        "20",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for n in 1..=3 {
        peasflow::scenario::load_scenario_file(out.join(format!("q{n}.json"))).unwrap();
    }
    let o = peasflow(&["gen", "qfamily", "--range", "q11", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn family_sweep_has_nondecreasing_bits() {
    // the bundled 60 s stream is the shortest for which Q10 still emits a tuple
    let dir = tempfile::tempdir().unwrap();
    let template = repo("scenarios/qfamily/q1.json");
    let o = peasflow(&["sweep", s(&template), "--family", "q1..q10", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("sweep_family.csv")).unwrap();
    let mut r = csv::Reader::from_reader(csv.as_bytes());
    let col = r
        .headers()
        .unwrap()
        .iter()
        .position(|h| h == "extra_bits_per_tuple")
        .unwrap();
    let bits: Vec<f64> = r.records().map(|x| x.unwrap()[col].parse().unwrap()).collect();
    assert_eq!(bits.len(), 10);
    assert!(bits.windows(2).all(|w| w[0] <= w[1]), "{bits:?}");
}

#[test]
fn sensing_and_pp_sweeps_write_one_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let mut v: Value =
        serde_json::from_str(&std::fs::read_to_string(repo("scenarios/qfamily/q2.json")).unwrap()).unwrap();
    v["workload"]["duration_seconds"] = 5.into();
    let template = dir.path().join("template.json");
    std::fs::write(&template, v.to_string()).unwrap();
    let o = peasflow(&[
        "sweep",
        s(&template),
        "--sensing",
        "1..4",
        "--reps",
        "2",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout_json(&o)["rows"].as_array().unwrap().len(), 4);
    let o = peasflow(&["sweep", s(&template), "--pp", "simple,full", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("sweep_pp.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn empty_sweep_is_an_input_error() {
    let t = repo("scenarios/qfamily/q1.json");
    assert_eq!(peasflow(&["sweep", s(&t)]).status.code(), Some(2));
    assert_eq!(peasflow(&["sweep", s(&t), "--pp", ","]).status.code(), Some(2));
    assert_eq!(peasflow(&["sweep", s(&t), "--sensing", "5..2"]).status.code(), Some(2));
}
