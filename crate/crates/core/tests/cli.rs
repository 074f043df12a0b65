use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ergm-exchange"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.json");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL: &str = r#"{
  "dataset": "florentine",
  "model": ["edges", "kstar(2)"],
  "sampler": { "variant": "vertical", "dr": true, "chains": 4, "main_iters": 120, "aux_iters": 20, "seed": 3 },
  "variants": ["AAEA-1", "AAEA-1+DR"]
}"#;

#[test]
fn fit_writes_outputs_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SMALL);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        let out = cli(&[
            "fit",
            "--config",
            &config,
            "--out",
            dir.to_str().unwrap(),
            "--threads",
            "2",
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stdout).contains("kstar(2)"));
    }
    for file in [
        "report.json",
        "summary.txt",
        "samples.csv",
        "trace_edges.csv",
        "acf_kstar_2.csv",
    ] {
        assert!(a.join(file).exists(), "{file} missing");
    }
    let samples = std::fs::read(a.join("samples.csv")).unwrap();
    assert_eq!(samples, std::fs::read(b.join("samples.csv")).unwrap());
    assert_eq!(String::from_utf8_lossy(&samples).lines().count(), 1 + 4 * 120);

    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["algorithm"], "AAEA-1+DR");
    assert_eq!(report["nodes"], 16);
}

#[test]
fn variant_and_seed_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SMALL);
    let dir = tmp.path().join("ads");
    let out = cli(&[
        "fit",
        "--config",
        &config,
        "--variant",
        "ads-aea",
        "--seed",
        "11",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["algorithm"], "ADS-AEA");
    assert_eq!(report["seed"], 11);
}

#[test]
fn compare_tabulates_configured_variants() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SMALL);
    let dir = tmp.path().join("cmp");
    let out = cli(&[
        "compare",
        "--config",
        &config,
        "--replicates",
        "2",
        "--out",
        dir.to_str().unwrap(),
        "--jobs",
        "2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("comparison.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.contains("AAEA-1+DR"));
    assert_eq!(
        std::fs::read_to_string(dir.join("replicates.csv"))
            .unwrap()
            .lines()
            .count(),
        5
    );
    assert!(dir.join("comparison.txt").exists());
}

#[test]
fn simulate_writes_draws() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SMALL);
    let dir = tmp.path().join("sim");
    let out = cli(&[
        "simulate",
        "--config",
        &config,
        "--theta",
        "-1.5,0.1",
        "--draws",
        "3",
        "--iters",
        "200",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        std::fs::read_to_string(dir.join("stats.csv")).unwrap().lines().count(),
        4
    );
    assert!(dir.join("draw_1.tsv").exists() && dir.join("draw_3.tsv").exists());
}

#[test]
fn presets_are_listed_and_printed() {
    let out = cli(&["presets"]);
    let names = String::from_utf8(out.stdout).unwrap();
    for name in ["florentine", "karate", "fauxmesa", "fauxmesa-smoke"] {
        assert!(names.lines().any(|l| l == name));
    }
    let out = cli(&["presets", "karate"]);
    assert!(String::from_utf8(out.stdout).unwrap().contains("gwesp"));
}

#[test]
fn exit_codes() {
    assert_eq!(cli(&["fit"]).status.code(), Some(1));
    assert_eq!(cli(&["--help"]).status.code(), Some(0));
    assert_eq!(
        cli(&["fit", "--config", "/nonexistent/run.json"]).status.code(),
        Some(1)
    );
    assert_eq!(cli(&["presets", "nope"]).status.code(), Some(1));

    let tmp = tempfile::tempdir().unwrap();
    let bad_model = write_config(tmp.path(), r#"{"dataset": "florentine", "model": ["triangles"]}"#);
    let out = cli(&["fit", "--config", &bad_model]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("triangles"));

    let missing_data = write_config(
        tmp.path(),
        r#"{"dataset": {"nodes": "absent/nodes.csv", "edges": "absent/edges.tsv"}, "model": ["edges"]}"#,
    );
    assert_eq!(cli(&["fit", "--config", &missing_data]).status.code(), Some(2));

    std::fs::write(tmp.path().join("nodes.csv"), "node\na\nb\n").unwrap();
    std::fs::write(tmp.path().join("edges.tsv"), "a\tc\n").unwrap();
    let unknown_node = write_config(
        tmp.path(),
        r#"{"dataset": {"nodes": "nodes.csv", "edges": "edges.tsv"}, "model": ["edges"]}"#,
    );
    assert_eq!(cli(&["fit", "--config", &unknown_node]).status.code(), Some(2));
}
