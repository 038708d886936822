use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use podfnn::fem::BuiltinOptions;
use podfnn::fnn::TrainOptions;
use podfnn::pipeline::{DataConfig, Eval1dConfig, FemConfig, LawConfig, MaterialConfig, Models, NetworkConfig, PathsConfig, ProblemSource};
use serde_json::Value;
use tempfile::TempDir;

fn podfnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_podfnn")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write_config<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(value).unwrap()).unwrap();
    p
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn small_data() -> DataConfig {
    DataConfig {
        paths: PathsConfig::Circles { radii: vec![0.1], n_angles: 5, np: 5, unload: true },
        ..DataConfig::circles_2d(5)
    }
}

fn small_net(epochs: usize) -> NetworkConfig {
    let mut train = TrainOptions::default();
    train.lm.max_epochs = epochs;
    train.lm.grad_tol = 0.0;
    NetworkConfig::new(&[4], train)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_data_default_has_122_paths_and_a_stable_hash() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = podfnn(&["gen-data", "--out", s(dir), "--serial"]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (ma, mb) = (read_json(&a.join("metadata.json")), read_json(&b.join("metadata.json")));
    assert_eq!(ma["n_paths"], 122);
    assert_eq!(ma["sha256"], mb["sha256"]);
    assert_eq!(fs::read(a.join("dataset.csv")).unwrap(), fs::read(b.join("dataset.csv")).unwrap());
    assert!(a.join("config.resolved.json").exists());
}

#[test]
fn empty_radii_is_a_validation_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = DataConfig { paths: PathsConfig::Circles { radii: vec![], n_angles: 3, np: 5, unload: true }, ..DataConfig::circles_2d(5) };
    let path = write_config(tmp.path(), "data.json", &cfg);
    let out = podfnn(&["gen-data", "--config", s(&path), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(code(&out), 2);
}

#[test]
fn unknown_config_field_reports_its_path() {
    let tmp = TempDir::new().unwrap();
    let mut v = serde_json::to_value(small_data()).unwrap();
    v["paths"]["n_anglez"] = 3.into();
    let path = write_config(tmp.path(), "data.json", &v);
    let out = podfnn(&["gen-data", "--config", s(&path), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("paths") && err.contains("n_anglez"), "{err}");
}

#[test]
fn missing_surrogate_file_is_an_io_error() {
    let tmp = TempDir::new().unwrap();
    let out = podfnn(&["fem", "--surrogate", s(&tmp.path().join("nope.json")), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.json"));
}

#[test]
fn train_compare_and_fem_compose() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let data_cfg = write_config(dir, "data.json", &small_data());
    assert_eq!(code(&podfnn(&["gen-data", "--config", s(&data_cfg), "--out", s(&dir.join("data")), "--serial"])), 0);
    let dataset = dir.join("data/dataset.csv");

    let train_cfg = write_config(dir, "train.json", &serde_json::json!({"mode": "podfnn", "network": small_net(15)}));
    let out = podfnn(&["train", "--config", s(&train_cfg), "--dataset", s(&dataset), "--out", s(&dir.join("train")), "--serial", "--seed", "4"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let surrogate = read_json(&dir.join("train/surrogate.json"));
    assert_eq!(surrogate["kind"], "podfnn");
    assert_eq!(surrogate["nets"].as_array().unwrap().len(), surrogate["basis"]["modes"].as_array().unwrap().len());
    let reports = read_json(&dir.join("train/train_report.json"));
    let accepted: usize = reports.as_array().unwrap().iter().map(|r| r["history"].as_array().unwrap().len()).sum();
    let history = fs::read_to_string(dir.join("train/history.csv")).unwrap();
    assert_eq!(history.lines().count() - 1, accepted);
    assert_eq!(read_json(&dir.join("train/config.resolved.json"))["network"]["train"]["seed"], 4);

    let cmp_cfg = write_config(dir, "cmp.json", &small_net(10));
    let out = podfnn(&["compare-pod", "--config", s(&cmp_cfg), "--dataset", s(&dataset), "--out", s(&dir.join("cmp")), "--serial"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let cmp = fs::read_to_string(dir.join("cmp/compare.csv")).unwrap();
    let header = cmp.lines().next().unwrap();
    // architectures are echoed in full: 4 inputs, 4 hidden, 2 or 1 outputs
    assert_eq!(header, "epoch,monolithic_4-4-2,pod0_4-4-1,pod1_4-4-1");
    assert_eq!(cmp.lines().count(), 1 + 11);

    let mut fem = FemConfig::builtin("cook2d", LawConfig::Plasticity { material: MaterialConfig::exponential() }, Models::Both);
    fem.problem = ProblemSource::Builtin {
        name: "cook2d".into(),
        options: BuiltinOptions { load_steps: 2, unload_steps: 2, cook_q0: 0.002, ..Default::default() },
    };
    let fem_cfg = write_config(dir, "fem.json", &fem);
    let out = podfnn(&["fem", "--config", s(&fem_cfg), "--surrogate", s(&dir.join("train/surrogate.json")), "--out", s(&dir.join("fem"))]);
    // an undertrained surrogate may legitimately fail to converge
    assert!(matches!(code(&out), 0 | 3), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.join("fem/solve_report.json"));
    assert_eq!(report["problem"], "cook2d");
    let ref_curve = fs::read_to_string(dir.join("fem/reference_curve.csv")).unwrap();
    assert_eq!(ref_curve.lines().next().unwrap(), "step,factor,load,displacement");
    assert_eq!(ref_curve.lines().count(), 1 + 5);
    if code(&out) == 0 {
        let cmp = fs::read_to_string(dir.join("fem/comparison.csv")).unwrap();
        assert_eq!(cmp.lines().next().unwrap(), "step,factor,reference,surrogate,rel_diff");
    }

    // a 2D surrogate cannot drive a 3D problem
    let patch = FemConfig::builtin("patch3d", LawConfig::Plasticity { material: MaterialConfig::exponential() }, Models::Surrogate);
    let patch_cfg = write_config(dir, "patch.json", &patch);
    let out = podfnn(&["fem", "--config", s(&patch_cfg), "--surrogate", s(&dir.join("train/surrogate.json")), "--out", s(&dir.join("patch"))]);
    assert_eq!(code(&out), 2);
}

#[test]
fn reference_fem_writes_curves() {
    let tmp = TempDir::new().unwrap();
    let mut fem = FemConfig::builtin("patch3d", LawConfig::Plasticity { material: MaterialConfig::rod() }, Models::Reference);
    fem.problem = ProblemSource::Builtin { name: "patch3d".into(), options: BuiltinOptions { load_steps: 4, unload_steps: 4, ..Default::default() } };
    let cfg = write_config(tmp.path(), "fem.json", &fem);
    let out_dir = tmp.path().join("o");
    let out = podfnn(&["fem", "--config", s(&cfg), "--out", s(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let curve = fs::read_to_string(out_dir.join("reference_curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 1 + 9);
    let field = fs::read_to_string(out_dir.join("reference_displacements.csv")).unwrap();
    assert_eq!(field.lines().next().unwrap(), "node,ux,uy,uz");
    assert_eq!(field.lines().count(), 1 + 8);
}

#[test]
fn eval_1d_runs_end_to_end() {
    let tmp = TempDir::new().unwrap();
    let cfg = Eval1dConfig { network: small_net(20), ..Default::default() };
    let path = write_config(tmp.path(), "eval.json", &cfg);
    let out_dir = tmp.path().join("o");
    let out = podfnn(&["eval-1d", "--config", s(&path), "--out", s(&out_dir), "--serial"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("eval_1d.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "step,strain,eps_acc,reference,predicted");
    assert!(String::from_utf8_lossy(&out.stdout).contains("normalized RMSE"));
}

#[test]
fn hyper_training_mode_writes_a_hyper_model() {
    let tmp = TempDir::new().unwrap();
    let cfg = serde_json::json!({"mode": "hyper_fnn", "elastic": {"E": 700.0, "nu": 0.499}, "network": small_net(3)});
    let path = write_config(tmp.path(), "hyper.json", &cfg);
    let out_dir = tmp.path().join("o");
    let out = podfnn(&["train", "--config", s(&path), "--out", s(&out_dir), "--serial"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read_json(&out_dir.join("surrogate.json"))["kind"], "hyper_fnn");
    assert!(out_dir.join("hyper_dataset.csv").exists());
}
