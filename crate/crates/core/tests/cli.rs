use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bseg")).args(args).output().unwrap()
}

fn write_config(dir: &Path, value: Value) -> String {
    let path = dir.join("config.json");
    fs::write(&path, value.to_string()).unwrap();
    path.to_str().unwrap().to_string()
}

fn small_config(dir: &Path) -> Value {
    json!({
        "image_size": 16,
        "num_scales": 2,
        "channels": [4, 8],
        "query_dim": 8,
        "decoder_rounds": 1,
        "epochs": 1,
        "batch_size": 4,
        "train_size": 8,
        "val_size": 4,
        "test_size": 2,
        "data_dir": dir.join("data"),
        "out_dir": dir.join("run"),
    })
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn full_pipeline_through_the_binary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), small_config(tmp.path()));

    let out = bseg(&["gen-data", "--config", &cfg]);
    assert!(out.status.success());
    assert!(tmp.path().join("data/manifest.tsv").exists());

    let summary = stdout_json(&bseg(&["train", "--config", &cfg]));
    assert_eq!(summary["epochs"].as_array().unwrap().len(), 1);
    for file in ["loss.csv", "val.csv", "final.ckpt", "best.ckpt", "summary.json"] {
        assert!(tmp.path().join("run").join(file).exists(), "missing {file}");
    }
    let loss_csv = fs::read_to_string(tmp.path().join("run/loss.csv")).unwrap();
    assert!(loss_csv.starts_with("epoch,step,total,cls,mask,edge"));

    let ckpt = tmp.path().join("run/final.ckpt");
    let ckpt = ckpt.to_str().unwrap();
    let report = stdout_json(&bseg(&[
        "eval",
        "--config",
        &cfg,
        "--checkpoint",
        ckpt,
        "--split",
        "test",
    ]));
    for key in ["miou", "mdice", "mrecall", "boundary_f1", "fps", "per_class"] {
        assert!(!report[key].is_null(), "missing {key}");
    }
    assert!(report["fps"].as_f64().unwrap() > 0.0);
    assert_eq!(report["per_class"].as_object().unwrap().len(), 4);

    let preds = tmp.path().join("preds");
    let written = stdout_json(&bseg(&[
        "infer",
        "--config",
        &cfg,
        "--checkpoint",
        ckpt,
        "--out",
        preds.to_str().unwrap(),
    ]));
    assert_eq!(written.as_array().unwrap().len(), 2);
    assert_eq!(fs::read_dir(&preds).unwrap().count(), 6);

    let bench = stdout_json(&bseg(&[
        "bench",
        "--config",
        &cfg,
        "--checkpoint",
        ckpt,
        "--warmup",
        "1",
        "--timed",
        "3",
    ]));
    assert_eq!(bench["height"], 16);
    assert_eq!(bench["timed"], 3);
}

#[test]
fn verify_passes_and_detects_fault() {
    let ok = bseg(&["verify", "--seeds", "1"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stdout));
    let bad = bseg(&["verify", "--seeds", "1", "--inject-fault"]);
    assert_eq!(bad.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("FAIL"));
}

#[test]
fn unknown_config_key_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), json!({"epochs": 1, "learning_rate": 0.1}));
    let out = bseg(&["train", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning_rate"));
}

#[test]
fn invalid_config_value_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), json!({"lambda3": -1.0}));
    let out = bseg(&["gen-data", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lambda3"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(bseg(&["eval"]).status.code(), Some(2));
    assert_eq!(bseg(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn missing_checkpoint_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), small_config(tmp.path()));
    let out = bseg(&["bench", "--config", &cfg, "--checkpoint", "/nonexistent.ckpt"]);
    assert_eq!(out.status.code(), Some(1));
}
