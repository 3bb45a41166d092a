use std::path::Path;
use std::process::{Command, Output};

fn place(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_place")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = place(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn parse_prints_tuples() {
    let out = ok(&["parse", "put it behind the mug and left to the plate."]);
    assert_eq!(out, "(mug | behind)\n(plate | left)\n");
}

#[test]
fn exit_codes() {
    assert_eq!(place(&["bogus"]).status.code(), Some(2));
    assert_eq!(place(&["--help"]).status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let out = place(&["eval", "--dataset", s(dir.path()), "--weights", s(&dir.path().join("missing.json"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));
    assert_eq!(place(&["parse", "hello there"]).status.code(), Some(1));
}

#[test]
fn dataset_to_placement() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let weights = dir.path().join("weights.json");
    let d = s(&data);

    ok(&["--seed", "2", "gen-dataset", "--out", d, "--train", "20", "--test", "12", "--splits", "train,test_seen"]);
    assert!(data.join("scenes/00000.json").exists());
    let lines = std::fs::read_to_string(data.join("instructions.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 32);

    ok(&["--seed", "2", "embed", "--dataset", d]);
    assert!(data.join("embeddings.jsonl").exists());
    let trained = ok(&["--seed", "2", "train", "--dataset", d, "--out", s(&weights), "--steps", "50"]);
    assert!(trained.starts_with("trained on 20 records for 50 steps"));

    let report: serde_json::Value =
        serde_json::from_str(&ok(&["--seed", "2", "eval", "--dataset", d, "--weights", s(&weights)])).unwrap();
    assert_eq!(report["count"], 12);
    let oracle: serde_json::Value = serde_json::from_str(&ok(&["eval", "--dataset", d, "--oracle"])).unwrap();
    assert_eq!(oracle["successes"], 12);

    let first: serde_json::Value = lines
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .find(|r| r["level"] == "table")
        .unwrap();
    let instruction = first["instruction"].as_str().unwrap();
    let scene = data.join(format!("scenes/{:05}.json", first["id"].as_u64().unwrap()));
    let store = data.join("embeddings.jsonl");
    let (ppm, dump, svg) = (dir.path().join("f.ppm"), dir.path().join("f.json"), dir.path().join("f.svg"));
    let args = ["place", "--scene", s(&scene), "--instruction", instruction, "--weights", s(&weights), "--embeddings", s(&store)];
    let point = ok(&[&args[..], &["--render", s(&ppm), "--dump", s(&dump)]].concat());
    let xy: Vec<f64> = point.trim().split(',').map(|v| v.parse().unwrap()).collect();
    assert!(xy[0].abs() <= 0.5 && xy[1].abs() <= 0.3);
    assert!(std::fs::read(&ppm).unwrap().starts_with(b"P6"));
    assert_eq!(ok(&args), point);

    ok(&["render", "--scene", s(&scene), "--field", s(&dump), "--out", s(&svg)]);
    assert!(std::fs::read_to_string(&svg).unwrap().contains("<svg"));

    let grounded = ok(&["ground", "--scene", s(&scene), "--instruction", instruction, "--weights", s(&weights), "--embeddings", s(&store)]);
    assert_eq!(grounded.lines().count(), first["gt_tuples"].as_array().unwrap().len());
}

#[test]
fn config_file_sets_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"train": {"seed": 5}}"#).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["--config", s(&cfg), "gen-dataset", "--out", s(&a), "--train", "4", "--test", "0", "--splits", "train"]);
    ok(&["--seed", "5", "gen-dataset", "--out", s(&b), "--train", "4", "--test", "0", "--splits", "train"]);
    assert_eq!(
        std::fs::read(a.join("instructions.jsonl")).unwrap(),
        std::fs::read(b.join("instructions.jsonl")).unwrap()
    );
    std::fs::write(&cfg, r#"{"trian": {}}"#).unwrap();
    assert_eq!(place(&["--config", s(&cfg), "parse", "put it behind the mug."]).status.code(), Some(1));
}
