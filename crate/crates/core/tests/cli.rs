mod common;

use std::process::{Command, Output};

use axum::http::Method;
use common::{call, state, Server, BIN};
use gkq::gk::{generate_gk_rulebase, default_calibration, reference_profiles, GkModel};
use gkq::ruledsl::{format_rulebase, parse_rulebase};
use gkq::store::replay;

const GK1_FLAGS: [&str; 16] = [
    "--exit", "7", "--flex", "4", "--overhead", "7", "--connect", "8", "--courage", "7", "--lead", "9", "--battles",
    "4", "--height", "187",
];

const HEADER: &str = "name,exit_from_goal,flexibility,overhead_dominance,establishing_connection,courage,leadership,person_battles,height_cm";

fn gkq(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("GKQ_RULES").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn reference_csv() -> String {
    let mut s = format!("{HEADER}\n");
    for (name, p, _) in reference_profiles() {
        let v: Vec<String> = gkq::gk::Attribute::ALL.iter().map(|a| p.get(*a).to_string()).collect();
        s += &format!("{name},{}\n", v.join(","));
    }
    s
}

#[test]
fn score_with_flags_prints_gk1() {
    let o = gkq(&[&["score"], &GK1_FLAGS[..]].concat());
    assert!(o.status.success(), "{}", stderr(&o));
    let expected = GkModel::default().score(&reference_profiles()[0].1).unwrap();
    let out = stdout(&o);
    assert!(out.contains(&format!("Score: {:.1}", expected.score)), "{out}");
    assert!(out.contains(&format!("Level: {}", expected.level)), "{out}");
}

#[test]
fn score_accepts_labels_and_explains() {
    let mut args = vec!["score"];
    args.extend(GK1_FLAGS);
    args[4] = "good";
    args.extend(["--explain", "--top", "3"]);
    let o = gkq(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("flexibility              bad=0.0000 good=1.0000"), "{out}");
    assert_eq!(out.lines().filter(|l| l.contains(" IF ")).count(), 3);
}

#[test]
fn score_missing_flag_is_usage_error() {
    let o = gkq(&["score", "--exit", "7"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("Usage: gkq score"), "{err}");
    assert!(err.contains("--height"), "{err}");
}

#[test]
fn score_out_of_range_is_validation_error() {
    let mut args = vec!["score"];
    args.extend(GK1_FLAGS);
    args[2] = "11";
    let o = gkq(&args);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("exit_from_goal"));
}

#[test]
fn score_from_profile_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    std::fs::write(&path, serde_json::to_string(&reference_profiles()[2].1).unwrap()).unwrap();
    let o = gkq(&["score", path.to_str().unwrap(), "--format", "csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    let exact = GkModel::default().score(&reference_profiles()[2].1).unwrap().score;
    assert_eq!(row[1].parse::<f64>().unwrap(), exact);

    assert_eq!(gkq(&["score", "/no/such/profile.json"]).status.code(), Some(1));
    std::fs::write(&path, "{").unwrap();
    assert_eq!(gkq(&["score", path.to_str().unwrap()]).status.code(), Some(2));
}

#[tokio::test]
async fn json_output_is_byte_identical_to_service() {
    let dir = tempfile::tempdir().unwrap();
    let st = state(&dir.path().join("c.jsonl"));
    let mut args = vec!["score"];
    args.extend(GK1_FLAGS);
    args.extend(["--format", "json"]);
    let o = gkq(&args);
    assert!(o.status.success());
    let body = serde_json::to_string(&reference_profiles()[0].1).unwrap();
    let r = call(&st, Method::POST, "/api/evaluate", body).await;
    assert_eq!(o.stdout, r.body.as_bytes());
}

#[test]
fn compare_ranks_reference_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gk.csv");
    std::fs::write(&path, reference_csv()).unwrap();
    let o = gkq(&["compare", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let first: Vec<&str> = out.lines().nth(1).unwrap().split_whitespace().collect();
    assert_eq!(&first[..2], ["1", "GK3"]);
    assert!(!out.contains("tie"));
}

#[test]
fn compare_columns_in_any_order() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gk.csv");
    std::fs::write(
        &path,
        "height_cm,person_battles,leadership,courage,establishing_connection,overhead_dominance,flexibility,exit_from_goal,name\n\
         187,4,9,7,8,7,4,7,Solo\n",
    )
    .unwrap();
    let o = gkq(&["compare", path.to_str().unwrap(), "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 1);
    let exact = GkModel::default().score(&reference_profiles()[0].1).unwrap().score;
    assert_eq!(rows[0]["score_exact"].as_f64().unwrap(), exact);
}

#[test]
fn compare_flags_duplicate_rows_as_tied() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gk.csv");
    std::fs::write(&path, format!("{HEADER}\nA,5,5,5,5,5,5,5,180\nB,5,5,5,5,5,5,5,180\n")).unwrap();
    let o = gkq(&["compare", path.to_str().unwrap()]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.contains("(tie)")).count(), 2, "{out}");
}

#[test]
fn compare_reports_every_invalid_row() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gk.csv");
    std::fs::write(&path, format!("{HEADER}\nA,5,5,5,5,5,5,5,180\nB,12,5,5,5,5,5,5,180\nC,5,5,5,5,5,5,5,50\n"))
        .unwrap();
    let o = gkq(&["compare", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("row 3 (B): exit_from_goal"), "{err}");
    assert!(err.contains("row 4 (C): height_cm"), "{err}");

    std::fs::write(&path, "name,exit_from_goal\nA,5\n").unwrap();
    let o = gkq(&["compare", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing column"));
}

#[test]
fn gen_rules_summary_and_roundtrip() {
    let o = gkq(&["gen-rules", "--summary"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert!(lines.contains(&"Ordinary 70"), "{out}");
    assert!(lines.contains(&"Excellent 1"));
    assert_eq!(*lines.last().unwrap(), "256 rules");

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gk.frb");
    let o = gkq(&["gen-rules", "-o", path.to_str().unwrap()]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    let parsed = parse_rulebase(&text).unwrap();
    let generated = generate_gk_rulebase(&default_calibration());
    assert_eq!(parsed.rules(), generated.rules());
    assert_eq!(format_rulebase(&parsed), text);

    let o = gkq(&["gen-rules", "-o", "/no/such/dir/gk.frb"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn score_with_rules_file_matches_default() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gk.frb");
    assert!(gkq(&["gen-rules", "-o", path.to_str().unwrap()]).status.success());
    let mut args = vec!["score", "--rules", path.to_str().unwrap(), "--format", "json"];
    args.extend(GK1_FLAGS);
    let from_file = gkq(&args);
    let mut args = vec!["score", "--format", "json"];
    args.extend(GK1_FLAGS);
    assert_eq!(from_file.stdout, gkq(&args).stdout);
}

#[test]
fn serve_health_and_port_busy() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::spawn(&dir.path().join("c.jsonl"), &[]);
    assert_eq!(server.request("GET", "/api/health", "").0, 200);

    let busy = Command::new(BIN)
        .args(["serve", "--port", &server.port.to_string(), "--store"])
        .arg(dir.path().join("other.jsonl"))
        .output()
        .unwrap();
    assert_eq!(busy.status.code(), Some(1), "{}", stderr(&busy));
}

#[test]
fn serve_custom_rulebase_is_returned_canonically() {
    let dir = tempfile::tempdir().unwrap();
    let rb = generate_gk_rulebase(&default_calibration().with_rating_ramp(2.0, 8.0).unwrap());
    let canonical = format_rulebase(&rb);
    let messy = canonical.replace("\n", "\n\n# comment\n").replace("rule:", "RULE :");
    let path = dir.path().join("custom.frb");
    std::fs::write(&path, &messy).unwrap();
    let server = Server::spawn(&dir.path().join("c.jsonl"), &["--rules", path.to_str().unwrap()]);
    let (status, body) = server.request("GET", "/api/rulebase", "");
    assert_eq!(status, 200);
    assert_eq!(body, canonical);
}

#[test]
fn kill_and_replay_restores_visible_state() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("c.jsonl");
    let mut server = Server::spawn(&store, &[]);
    for (i, (name, p, _)) in reference_profiles().iter().enumerate() {
        let body = format!(r#"{{"id":"gk{i}","name":"{name}","profile":{}}}"#, serde_json::to_string(p).unwrap());
        assert_eq!(server.request("POST", "/api/candidates", &body).0, 201);
    }
    assert_eq!(server.request("DELETE", "/api/candidates/gk0", "").0, 204);
    let (_, before) = server.request("GET", "/api/candidates", "");
    server.kill();

    let (live, _) = replay(&store).unwrap();
    let ids: Vec<&str> = live.iter().map(|r| r.id.as_str()).collect();
    assert_eq!(ids, ["gk1", "gk2"]);

    let server = Server::spawn(&store, &[]);
    let (_, after) = server.request("GET", "/api/candidates", "");
    let strip = |s: &str| {
        let mut v: serde_json::Value = serde_json::from_str(s).unwrap();
        for c in v.as_array_mut().unwrap() {
            c.as_object_mut().unwrap().remove("rulebase_version");
        }
        v
    };
    assert_eq!(strip(&after), strip(&before));
}
