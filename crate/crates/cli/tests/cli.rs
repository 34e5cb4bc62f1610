use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"{
  "env": "drone",
  "hidden": "payload",
  "data": {"train_trajectories": 12, "eval_train_trajectories": 6, "eval_test_trajectories": 6, "length": 10},
  "standard": {"epochs": 2, "memory_size": 3, "encoder_layers": [6], "decoder_layers": [6]},
  "time_invariant": {"epochs": 2, "memory_size": 3, "encoder_layers": [6], "decoder_layers": [6]},
  "bisim": {"anchors": 8, "memories": 10, "embedding": {"epochs": 2, "hidden_layers": [6], "dim": 2}}
}"#;

fn hplatent(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hplatent"))
        .current_dir(dir)
        .env_remove("HPL_OUT_DIR")
        .env_remove("HPL_THREADS")
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .unwrap()
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.json"), TINY).unwrap();
    dir
}

fn files(root: &Path) -> Vec<String> {
    let mut out: Vec<String> = walkdir::WalkDir::new(root)
        .into_iter()
        .map(Result::unwrap)
        .filter(|e| e.file_type().is_file())
        .map(|e| e.path().strip_prefix(root).unwrap().to_string_lossy().into_owned())
        .collect();
    out.sort();
    out
}

#[test]
fn all_emits_the_declared_artifact_set() {
    let dir = setup();
    let out = hplatent(dir.path(), &["all", "--config", "tiny.json", "--out", "out"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let expected = [
        "bisim/anchors.json",
        "bisim/distances.bin",
        "bisim/embedding_loss.csv",
        "bisim/memories.json",
        "data/eval_test.jsonl",
        "data/eval_train.jsonl",
        "data/train.jsonl",
        "eval/curve_baseline-memory.csv",
        "eval/curve_embedded.csv",
        "eval/curve_time-invariant-memory.csv",
        "eval/error_ratio.csv",
        "eval/features_baseline-memory.csv",
        "eval/features_embedded.csv",
        "eval/features_time-invariant-memory.csv",
        "eval/pca_baseline-memory.csv",
        "eval/pca_embedded.csv",
        "eval/pca_time-invariant-memory.csv",
        "eval/sweep.csv",
        "manifest.json",
        "models/embedding.json",
        "models/standard.json",
        "models/stateless.json",
        "models/time-invariant.json",
        "train/loss_standard.csv",
        "train/loss_stateless.csv",
        "train/loss_time-invariant.csv",
    ];
    assert_eq!(files(&dir.path().join("out")), expected);

    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("out/manifest.json")).unwrap()).unwrap();
    let artifacts = manifest["artifacts"].as_object().unwrap();
    assert_eq!(artifacts.len(), expected.len() - 1);
    let trace = std::fs::read(dir.path().join("out/train/loss_standard.csv")).unwrap();
    let digest = hplatent_cli::manifest::sha256_file(&dir.path().join("out/train/loss_standard.csv")).unwrap();
    assert_eq!(artifacts["train/loss_standard.csv"]["sha256"], digest.as_str());
    assert_eq!(artifacts["train/loss_standard.csv"]["bytes"], trace.len());
}

#[test]
fn existing_outputs_need_force() {
    let dir = setup();
    assert_eq!(hplatent(dir.path(), &["gen-data", "--config", "tiny.json", "--out", "out"]).status.code(), Some(0));
    let before = std::fs::read(dir.path().join("out/data/train.jsonl")).unwrap();
    let again = hplatent(dir.path(), &["gen-data", "--config", "tiny.json", "--out", "out"]);
    assert_eq!(again.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&again.stderr).contains("--force"));
    let forced = hplatent(dir.path(), &["gen-data", "--config", "tiny.json", "--out", "out", "--force"]);
    assert_eq!(forced.status.code(), Some(0));
    assert_eq!(std::fs::read(dir.path().join("out/data/train.jsonl")).unwrap(), before);
}

#[test]
fn missing_checkpoints_give_a_partial_exit() {
    let dir = setup();
    let args = ["--config", "tiny.json", "--out", "out"];
    assert_eq!(hplatent(dir.path(), &[&["gen-data"][..], &args].concat()).status.code(), Some(0));
    assert_eq!(hplatent(dir.path(), &[&["train", "--mode", "standard"][..], &args].concat()).status.code(), Some(0));
    let eval = hplatent(dir.path(), &[&["eval"][..], &args].concat());
    assert_eq!(eval.status.code(), Some(2));
    let out = dir.path().join("out");
    assert!(out.join("eval/curve_baseline-memory.csv").exists());
    assert!(out.join("eval/error_ratio.csv").exists());
    assert!(!out.join("eval/curve_embedded.csv").exists());
    assert!(!out.join("eval/sweep.csv").exists());
}

#[test]
fn embed_without_its_checkpoint_is_an_error() {
    let dir = setup();
    let args = ["--config", "tiny.json", "--out", "out"];
    assert_eq!(hplatent(dir.path(), &[&["gen-data"][..], &args].concat()).status.code(), Some(0));
    assert_eq!(hplatent(dir.path(), &[&["embed"][..], &args].concat()).status.code(), Some(1));
}

#[test]
fn a_changed_config_is_refused_without_force() {
    let dir = setup();
    assert_eq!(hplatent(dir.path(), &["gen-data", "--config", "tiny.json", "--out", "out"]).status.code(), Some(0));
    std::fs::write(dir.path().join("other.json"), TINY.replace("\"length\": 10", "\"length\": 11")).unwrap();
    assert_eq!(hplatent(dir.path(), &["train", "--config", "other.json", "--out", "out"]).status.code(), Some(1));
}

#[test]
fn environment_overrides_the_output_directory_and_threads() {
    let dir = setup();
    let out = Command::new(env!("CARGO_BIN_EXE_hplatent"))
        .current_dir(dir.path())
        .env("HPL_OUT_DIR", "from-env")
        .env("HPL_THREADS", "2")
        .env("RUST_LOG", "warn")
        .args(["gen-data", "--config", "tiny.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("from-env/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["commands"]["gen-data"]["threads"], 2);

    let bad = Command::new(env!("CARGO_BIN_EXE_hplatent"))
        .current_dir(dir.path())
        .env("HPL_THREADS", "lots")
        .args(["gen-data", "--config", "tiny.json", "--out", "x"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn schema_and_default_config_are_valid_json() {
    let dir = setup();
    let schema = hplatent(dir.path(), &["schema"]);
    assert_eq!(schema.status.code(), Some(0));
    let schema: serde_json::Value = serde_json::from_slice(&schema.stdout).unwrap();
    assert_eq!(schema["type"], "object");

    let default = hplatent(dir.path(), &["default-config"]);
    let text = String::from_utf8(default.stdout).unwrap();
    std::fs::write(dir.path().join("default.json"), &text).unwrap();
    let cfg = hplatent_cli::ExperimentConfig::load(&dir.path().join("default.json")).unwrap();
    assert_eq!(cfg, hplatent_cli::ExperimentConfig::default());
}

#[test]
fn invalid_configs_are_rejected() {
    let dir = setup();
    std::fs::write(dir.path().join("bad.json"), r#"{"env": "drone"}"#).unwrap();
    assert_eq!(hplatent(dir.path(), &["gen-data", "--config", "bad.json", "--out", "o"]).status.code(), Some(1));
    std::fs::write(dir.path().join("typo.json"), r#"{"enviroment": "arm"}"#).unwrap();
    assert_eq!(hplatent(dir.path(), &["gen-data", "--config", "typo.json", "--out", "o"]).status.code(), Some(1));
}
