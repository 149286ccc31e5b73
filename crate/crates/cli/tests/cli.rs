use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn guwen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_guwen")).args(args).output().unwrap()
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data").join(name)
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn eval_with_mock_models_writes_runs() {
    let dir = tempfile::tempdir().unwrap();
    let bench = data("bench.jsonl");
    let out = dir.path().to_str().unwrap();
    let args = ["eval", "--bench", bench.to_str().unwrap(), "--model", "a=mock:0.1", "--model", "b=mock:0.3", "--out", out];
    let res = guwen(&args);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let run: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("runs/a.json")).unwrap()).unwrap();
    assert_eq!(run["model"], "a");
    assert!(dir.path().join("report/radar.json").exists());

    let report_dir = dir.path().join("again");
    let res = guwen(&[
        "report",
        "--out",
        report_dir.to_str().unwrap(),
        dir.path().join("runs/a.json").to_str().unwrap(),
        dir.path().join("runs/b.json").to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(
        std::fs::read(report_dir.join("report.md")).unwrap(),
        std::fs::read(dir.path().join("report/report.md")).unwrap()
    );
}

#[test]
fn validate_flags_bad_tags() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("pos.txt");
    std::fs::write(&file, "春/n 眠/v\n晓/zz\n").unwrap();
    let res = guwen(&["validate", "--kind", "pos", file.to_str().unwrap()]);
    assert_eq!(code(&res), 1);
    assert!(String::from_utf8_lossy(&res.stdout).contains("line 2"));

    std::fs::write(&file, "春/n 眠/v\n").unwrap();
    assert_eq!(code(&guwen(&["validate", "--kind", "pos", file.to_str().unwrap()])), 0);
}

#[test]
fn exit_codes() {
    assert_eq!(code(&guwen(&["frobnicate"])), 64);
    assert_eq!(code(&guwen(&["--help"])), 0);
    assert_eq!(code(&guwen(&["datagen", "--stage", "nope", "--config", "x.toml", "--out", "y"])), 64);
    let res = guwen(&["eval", "--bench", "/nonexistent/bench.jsonl", "--model", "mock", "--out", "/tmp"]);
    assert_eq!(code(&res), 2);
}

#[test]
fn training_config_export() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pt.txt");
    assert_eq!(code(&guwen(&["train-config", "pretrain", "--out", path.to_str().unwrap()])), 0);
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.contains("per_device_train_batch_size=16\n"));
}
