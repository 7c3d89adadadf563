use std::process::Command;

fn fesrl() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fesrl"))
}

#[test]
fn train_subcommand_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        r#"{"env": {"episode_steps": 40}, "representation": {"epochs": 1, "window": 2},
            "sac": {"batch_size": 16, "hidden": [8, 8], "updates_per_episode": 3}}"#,
    )
    .unwrap();
    let out = dir.path().join("run");
    let status = fesrl()
        .args([
            "train",
            "--scenario",
            "arm-horizontal",
            "--seed",
            "3",
            "--episodes",
            "2",
        ])
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let metrics = std::fs::read_to_string(out.join("metrics.jsonl")).unwrap();
    assert_eq!(metrics.lines().count(), 2);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["scenario"], "arm-horizontal");
    assert_eq!(report["runs"][0]["seed"], 3);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(&config, r#"{"sac": {"batchsize": 16}}"#).unwrap();
    let output = fesrl()
        .arg("train")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("batchsize"));
}

#[test]
fn eval_requires_a_controller() {
    let output = fesrl().args(["eval", "--trajectory", "two-level"]).output().unwrap();
    assert!(!output.status.success());
}
