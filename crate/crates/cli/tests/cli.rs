use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn mechlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mechlab"))
        .args(args)
        .env_remove("MECHLAB_SEED")
        .output()
        .expect("binary runs")
}

fn run_json(args: &[&str], dir: &Path, name: &str) -> (i32, Value) {
    let out = dir.join(name);
    let mut full: Vec<&str> = args.to_vec();
    let out_str = out.to_str().unwrap().to_string();
    full.extend(["--deterministic", "--out", &out_str]);
    let o = mechlab(&full);
    let code = o.status.code().unwrap();
    let text = std::fs::read_to_string(&out)
        .unwrap_or_else(|_| panic!("no report; stderr: {}", String::from_utf8_lossy(&o.stderr)));
    (code, serde_json::from_str(&text).unwrap())
}

fn csv_rows(path: &Path) -> (String, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let (comment, body) = text.split_once('\n').unwrap();
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let header = rdr.headers().unwrap().iter().collect::<Vec<_>>().join(",");
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    assert!(comment.starts_with("# mechlab-csv v1"), "{comment}");
    (header, rows)
}

fn verdict(doc: &Value, axiom: &str) -> String {
    doc["axiom_reports"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["axiom"] == axiom)
        .unwrap()["verdict"]
        .as_str()
        .unwrap()
        .to_string()
}

#[test]
fn audit_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let common = [
        "--n-max",
        "5",
        "--grid",
        "0:10:0.5",
        "--seed",
        "42",
        "--profile-budget",
        "100",
    ];

    let mut args = vec!["audit", "--mechanism", "spa"];
    args.extend(common);
    let (code, doc) = run_json(&args, dir.path(), "spa.json");
    assert_eq!(code, 0);
    assert_eq!(doc["passed"], true);
    assert_eq!(doc["axiom_reports"].as_array().unwrap().len(), 7);

    let mut args = vec!["audit", "--mechanism", "lottery"];
    args.extend(common);
    let (code, doc) = run_json(&args, dir.path(), "lottery.json");
    assert_eq!(code, 1);
    assert_eq!(verdict(&doc, "sybil_proofness"), "fail");
    let sybil = doc["axiom_reports"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["axiom"] == "sybil_proofness")
        .unwrap();
    assert_eq!(sybil["witnesses"][0]["detail"]["kind"], "sybil");

    let mut args = vec!["audit", "--mechanism", "proportional", "--c", "0.5"];
    args.extend(common);
    let (code, doc) = run_json(&args, dir.path(), "prop.json");
    assert_eq!(code, 1);
    assert_eq!(verdict(&doc, "incentive_compatibility"), "fail");
    assert_eq!(verdict(&doc, "sybil_proofness"), "pass");
}

#[test]
fn attack_lottery_profile() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("att.json");
    let o = mechlab(&[
        "attack",
        "--mechanism",
        "lottery",
        "--profile",
        "5,1",
        "--deviator",
        "1",
        "--format",
        "both",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let gain = doc["attack"]["worst"]["gain"].as_f64().unwrap();
    assert!((gain - 5.0 / 6.0).abs() < 1e-9);
    let (header, rows) = csv_rows(&dir.path().join("att.gains.csv"));
    assert!(header.starts_with("profile_index,deviator,searched_bid"));
    assert_eq!(rows.len(), 1);

    let o = mechlab(&[
        "attack",
        "--mechanism",
        "lottery",
        "--target",
        "multi-sybil",
        "--k",
        "3",
        "--profile",
        "5,1",
        "--deviator",
        "1",
    ]);
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((doc["attack"]["worst"]["gain"].as_f64().unwrap() - 1.5).abs() < 1e-9);
}

#[test]
fn attack_scan_on_spa_passes() {
    let o = mechlab(&[
        "attack",
        "--mechanism",
        "spa",
        "--profile-budget",
        "60",
        "--deterministic",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(doc["attack"]["stats"]["max"].as_f64().unwrap() <= 5e-6);
    assert!(doc.get("timings_ms").is_none());
}

#[test]
fn theorem_traces() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("spa.json");
    let o = mechlab(&[
        "theorem",
        "--mechanism",
        "spa",
        "--lemmas",
        "lemma1,lemma2",
        "--format",
        "both",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let (header, rows) = csv_rows(&dir.path().join("spa.lemma2.csv"));
    assert_eq!(header, "v,computed,reference,slack");
    assert!(rows.iter().any(|r| r[0] == "3.0"));
    assert!(rows.iter().all(|r| r[3].parse::<f64>().unwrap() == 0.0));
    assert!(!dir.path().join("spa.eqn2.csv").exists());

    let out = dir.path().join("lot.json");
    let o = mechlab(&[
        "theorem",
        "--mechanism",
        "lottery",
        "--lemmas",
        "lemma1",
        "--format",
        "csv",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
    let (header, rows) = csv_rows(&dir.path().join("lot.lemma1.csv"));
    assert_eq!(header, "n,computed,reference,slack");
    for r in rows {
        let n: f64 = r[0].parse().unwrap();
        assert_eq!(r[1].parse::<f64>().unwrap(), 1.0 / n);
    }
}

#[test]
fn averaging_on_symmetric_builtins() {
    for (mech, payment) in [
        ("spa", None),
        ("lottery", None),
        ("proportional", Some("myerson")),
    ] {
        let mut args = vec![
            "theorem",
            "--mechanism",
            mech,
            "--lemmas",
            "averaging",
            "--avg-u",
            "2",
        ];
        if let Some(p) = payment {
            args.extend(["--payment", p]);
        }
        let o = mechlab(&args);
        let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
        let value = doc["averaging"][0]["value"].as_f64().unwrap();
        assert!((value - 1.0).abs() < 1e-5, "{mech}: {value}");
    }
    // reserve price breaks full allocation: reported as skipped
    let o = mechlab(&[
        "theorem",
        "--mechanism",
        "spa-reserve",
        "--lemmas",
        "averaging",
    ]);
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["skipped"][0]["section"], "averaging");
}

#[test]
fn independence_extras() {
    let o = mechlab(&[
        "independence",
        "--include",
        "tullock2",
        "--profile-budget",
        "60",
        "--deterministic",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    let rows = doc["independence"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 6);
    assert!(rows[5]["matches_expected"].is_null());
    let table = String::from_utf8_lossy(&o.stderr);
    assert!(table.contains("tullock2") && table.contains("n/a"));

    let o = mechlab(&["independence", "--grid", "3:3:1", "--profile-budget", "10"]);
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(doc["warnings"][0].as_str().unwrap().contains("degenerate"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"mechanism": "lottery", "profile_budget": 20, "n_range": {"min": 2, "max": 3}, "seed": 5}"#,
    )
    .unwrap();
    let o = mechlab(&[
        "audit",
        "--config",
        cfg.to_str().unwrap(),
        "--mechanism",
        "spa",
        "--deterministic",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["scenario"]["mechanism"], "spa");
    assert_eq!(doc["scenario"]["seed"], 5);
    assert_eq!(doc["scenario"]["n_range"]["max"], 3);

    std::fs::write(
        &cfg,
        "{\n  \"mechanism\": \"spa\",\n  \"grid\": {\"lo\": 0, \"hi\": 1, \"stepp\": 1}\n}",
    )
    .unwrap();
    let o = mechlab(&["audit", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("stepp") && err.contains("line 3"), "{err}");
}

#[test]
fn tool_errors_exit_2() {
    assert_eq!(
        mechlab(&["audit", "--mechanism", "vickrey"]).status.code(),
        Some(2)
    );
    assert_eq!(mechlab(&["audit", "--grid", "0:10"]).status.code(), Some(2));
    assert_eq!(
        mechlab(&["audit", "--format", "csv"]).status.code(),
        Some(2)
    );
    assert_eq!(
        mechlab(&["audit", "--mechanism", "spa", "--payment", "explicit"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn seed_falls_back_to_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_mechlab"))
        .args(["audit", "--profile-budget", "5", "--deterministic"])
        .env("MECHLAB_SEED", "1234")
        .output()
        .unwrap();
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["scenario"]["seed"], 1234);
}
