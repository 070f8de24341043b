use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mlqaoa(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlqaoa"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .env_remove("MLQAOA_THREADS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

const SMALL: [&str; 6] = ["--sizes", "4,6,8", "--validation-sizes", "10", "--target", "12"];

fn small_run(dir: &Path, out: &str) {
    for cmd in ["collect", "train", "predict", "evaluate"] {
        let mut args = vec![cmd];
        args.extend(SMALL);
        args.extend(["--out", out, "--epochs", "200"]);
        let o = mlqaoa(&args, dir);
        assert_eq!(code(&o), 0, "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = mlqaoa(&["rdm-scan", "--sizes", "8,12,16,20", "--out", out], dir);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = mlqaoa(&["report", "--out", out], dir);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn full_pipeline_is_byte_identical_across_processes() {
    let tmp = tempfile::tempdir().unwrap();
    small_run(tmp.path(), "a");
    small_run(tmp.path(), "b");
    let mut names: Vec<String> = fs::read_dir(tmp.path().join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    for expected in ["dataset.json", "checkpoint_alpha.json", "predicted_N12.json", "metrics_N12.json", "fig2a.csv", "summary.md"] {
        assert!(names.iter().any(|n| n == expected), "missing {expected} in {names:?}");
    }
    for name in &names {
        let a = fs::read(tmp.path().join("a").join(name)).unwrap();
        let b = fs::read(tmp.path().join("b").join(name)).unwrap();
        assert!(a == b, "{name} differs between reruns");
    }
    let fig = fs::read_to_string(tmp.path().join("a/fig2a.csv")).unwrap();
    assert_eq!(fig.lines().next(), Some("N,family,i,angle"));
    // p = N/2 angles per family over N = 4, 6, 8 and the validation size 10
    assert_eq!(fig.lines().count() - 1, 2 * (2 + 3 + 4 + 5));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("run.json"), r#"{"model": "tfim", "sizes": [4, 6], "validation_sizes": [], "out": "from_config"}"#).unwrap();
    let o = mlqaoa(&["collect", "--config", "run.json", "--sizes", "4"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let ds: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("from_config/dataset.json")).unwrap()).unwrap();
    assert_eq!(ds["header"]["sizes"], serde_json::json!([4]));
    assert_eq!(ds["records"].as_array().unwrap().len(), 4);
}

#[test]
fn empty_size_list_writes_an_empty_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mlqaoa(&["collect", "--sizes", "--validation-sizes", "--out", "e"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let ds: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("e/dataset.json")).unwrap()).unwrap();
    assert!(ds["records"].as_array().unwrap().is_empty());
}

#[test]
fn configuration_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.json"), r#"{"model": "xy", "colour": 3}"#).unwrap();
    let cases: [&[&str]; 6] = [
        &["collect", "--model", "heisenberg"],
        &["collect", "--config", "bad.json"],
        &["collect", "--config", "missing.json"],
        &["collect", "--model", "xy", "--sizes", "10"],
        &["collect", "--model", "xxz", "--backend", "fermion", "--sizes", "10"],
        &["collect", "--sizes", "8,10", "--validation-sizes", "10"],
    ];
    for args in cases {
        let o = mlqaoa(args, tmp.path());
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
    }
    let o = Command::new(env!("CARGO_BIN_EXE_mlqaoa"))
        .args(["report", "--out", "."])
        .current_dir(tmp.path())
        .env("MLQAOA_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn report_on_an_empty_directory_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    fs::create_dir(tmp.path().join("nothing")).unwrap();
    let o = mlqaoa(&["report", "--out", "nothing"], tmp.path());
    assert_eq!(code(&o), 1);
    let summary = fs::read_to_string(tmp.path().join("nothing/summary.md")).unwrap();
    assert!(summary.contains("no runs found"));
}

#[test]
fn train_refuses_a_dataset_from_another_model() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mlqaoa(&["collect", "--sizes", "4,6", "--validation-sizes", "--out", "m"], tmp.path());
    assert_eq!(code(&o), 0);
    let o = mlqaoa(&["train", "--model", "xy", "--sizes", "4,8", "--validation-sizes", "--out", "m"], tmp.path());
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn thread_count_variable_is_accepted() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_mlqaoa"))
        .args(["rdm-scan", "--g", "1", "--sizes", "8,12,16,20", "--out", "t"])
        .current_dir(tmp.path())
        .env("MLQAOA_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(tmp.path().join("t/rdm_tfim_g1_e11.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5, "{csv}");
}
