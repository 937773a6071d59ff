use std::path::Path;
use std::process::{Command, Output};

use signedprop_core::csbm::CsbmParams;

fn run(dir: &Path, args: &[&str], env_seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_signedprop"));
    cmd.args(args)
        .current_dir(dir)
        .env_remove("SIGNEDPROP_SEED");
    if let Some(s) = env_seed {
        cmd.env("SIGNEDPROP_SEED", s);
    }
    cmd.output().unwrap()
}

fn seed_written(dir: &Path, out: &str) -> u64 {
    let params: CsbmParams =
        serde_json::from_slice(&std::fs::read(dir.join(out).join("params.json")).unwrap()).unwrap();
    params.seed
}

#[test]
fn seed_precedence_is_flag_then_env_then_config() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("gen.json"), r#"{"schema": 1, "seed": 3}"#).unwrap();

    assert!(
        run(d, &["csbm-gen", "-c", "gen.json", "--out-dir", "a"], None)
            .status
            .success()
    );
    assert_eq!(seed_written(d, "a"), 3);
    assert!(run(
        d,
        &["csbm-gen", "-c", "gen.json", "--out-dir", "b"],
        Some("5")
    )
    .status
    .success());
    assert_eq!(seed_written(d, "b"), 5);
    assert!(run(
        d,
        &[
            "--seed",
            "7",
            "csbm-gen",
            "-c",
            "gen.json",
            "--out-dir",
            "c"
        ],
        Some("5")
    )
    .status
    .success());
    assert_eq!(seed_written(d, "c"), 7);
}

#[test]
fn bad_configs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("unknown.json"), r#"{"schema": 1, "sedes": 3}"#).unwrap();
    std::fs::write(d.join("schema.json"), r#"{"schema": 2}"#).unwrap();
    std::fs::write(d.join("range.json"), r#"{"schema": 1, "label_ratio": 1.5}"#).unwrap();
    for (cmd, file) in [
        ("sid-table", "unknown.json"),
        ("sid-table", "schema.json"),
        ("sid-table", "range.json"),
    ] {
        let out = run(d, &[cmd, "-c", file], None);
        assert_eq!(out.status.code(), Some(2), "{cmd} {file}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    }
    assert_eq!(
        run(d, &["sid-table", "-c", "missing.json"], None)
            .status
            .code(),
        Some(2)
    );
    assert_eq!(run(d, &["no-such-command"], None).status.code(), Some(2));
    assert_eq!(run(d, &["--help"], None).status.code(), Some(0));
}

#[test]
fn injected_theorem_failure_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("t.json"),
        r#"{"schema": 1, "bound_instances": 20, "clustering_runs": 10, "phase_instances": 3, "equivalence_trials": 5}"#,
    )
    .unwrap();
    let out = run(
        d,
        &[
            "verify-theorems",
            "-c",
            "t.json",
            "--inject",
            "expect-diverge-below-star",
            "--json",
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let phase = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "phase_transition")
        .unwrap();
    assert_eq!(phase["passed"], false);
}

#[test]
fn every_table_starts_with_the_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("depth.json"),
        r#"{"schema": 1, "seeds": 2, "depths": [0, 3]}"#,
    )
    .unwrap();
    std::fs::write(
        d.join("ratio.json"),
        r#"{"schema": 1, "seeds": 2, "ratios": [0.5]}"#,
    )
    .unwrap();
    let commands: [&[&str]; 5] = [
        &["sid-table", "--seeds", "2", "-o", "sid.csv"],
        &["depth-sweep", "-c", "depth.json", "-o", "depth.csv"],
        &["train-ratio-sweep", "-c", "ratio.json", "-o", "ratio.csv"],
        &["beta-sweep", "-o", "beta.csv"],
        &["verify-equivalence", "--trials", "5", "-o", "eq.csv"],
    ];
    for args in commands {
        assert!(run(d, args, None).status.success(), "{args:?}");
        let text = std::fs::read_to_string(d.join(args.last().unwrap())).unwrap();
        let first = text.lines().next().unwrap();
        assert!(
            first.starts_with("# config-hash: ") && first.len() == "# config-hash: ".len() + 64,
            "{first}"
        );
    }
    assert!(run(d, &["csbm-gen", "--out-dir", "gen"], None)
        .status
        .success());
    for f in ["features.csv", "labels.csv"] {
        let text = std::fs::read_to_string(d.join("gen").join(f)).unwrap();
        assert!(text.starts_with("# config-hash: "));
    }
}

#[test]
fn more_supervision_does_not_hurt_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("ratio.json"),
        r#"{"schema": 1, "seeds": 10, "ratios": [0.2, 0.8]}"#,
    )
    .unwrap();
    let out = run(d, &["train-ratio-sweep", "-c", "ratio.json"], None);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let (mut low, mut high) = (Vec::new(), Vec::new());
    for rec in reader.records() {
        let rec = rec.unwrap();
        let p: f64 = rec[1].parse().unwrap();
        let acc: f64 = rec[2].parse().unwrap();
        if p < 0.5 {
            low.push(acc)
        } else {
            high.push(acc)
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert_eq!((low.len(), high.len()), (10, 10));
    assert!(
        mean(&high) >= mean(&low),
        "{} < {}",
        mean(&high),
        mean(&low)
    );
}

#[test]
fn propagate_rejects_a_graph_without_features() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("p.json"), r#"{"schema": 1, "graph": "g.edgelist"}"#).unwrap();
    assert_eq!(
        run(d, &["propagate", "-c", "p.json", "--out-dir", "o"], None)
            .status
            .code(),
        Some(2)
    );
}
