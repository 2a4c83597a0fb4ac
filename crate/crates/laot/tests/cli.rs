use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use laot::checkpoint::load_model;
use laot::manifest::RunManifest;

fn laot(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_laot"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Last stdout line, which every subcommand uses for its output location.
fn printed_path(dir: &Path, out: &Output) -> PathBuf {
    let text = String::from_utf8_lossy(&out.stdout);
    dir.join(text.lines().last().expect("output path"))
}

const FAST: &[&str] = &["--epochs", "2", "--batch_size", "16", "--latent_dim", "2", "--n", "40"];

fn with<'a>(base: &[&'a str], extra: &[&'a str]) -> Vec<&'a str> {
    base.iter().chain(extra).copied().collect()
}

#[test]
fn gen_writes_deterministic_files() {
    let dir = tempfile::tempdir().unwrap();
    for (out, fmt) in [("a", "csv"), ("b", "csv"), ("c", "binary")] {
        let o = laot(dir.path(), &["gen", "--task", "toy3d", "--seed", "4", "--n", "30", "--format", fmt, "--out", out]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let read = |p: &str| fs::read(dir.path().join(p)).unwrap();
    assert_eq!(read("a/source.csv"), read("b/source.csv"));
    assert_eq!(read("a/target.csv"), read("b/target.csv"));
    assert!(dir.path().join("c/source.bin.json").exists());
    let params: serde_json::Value = serde_json::from_slice(&read("a/parameters.json")).unwrap();
    assert_eq!(params["task"], "toy3d");
    assert_eq!(params["seed"], 4);
    assert_eq!(String::from_utf8(read("a/source.csv")).unwrap().lines().count(), 30);
}

#[test]
fn train_writes_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let o = laot(dir.path(), &with(&["train", "--task", "toy3d", "--seed", "1"], FAST));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let run = printed_path(dir.path(), &o);
    for f in ["manifest.json", "model.bin", "log.csv", "report.json"] {
        assert!(run.join(f).exists(), "{f}");
    }
    let m = RunManifest::load(&run.join("manifest.json")).unwrap();
    assert_eq!(run.file_name().unwrap().to_str().unwrap(), m.config_hash);
    assert_eq!(m.seeds, vec![1]);
    assert_eq!(m.config.epochs, 2);
    assert_eq!(m.parameters["input"]["task"], "toy3d");
    let log = fs::read_to_string(run.join("log.csv")).unwrap();
    assert!(log.starts_with("epoch,step,l_rec,l_la,total,grad_norm\n"));
    let model = load_model(&run.join("model.bin")).unwrap();
    assert_eq!(model.config, m.config);
    assert!(model.fitted_map.is_some());
    let report: serde_json::Value = serde_json::from_slice(&fs::read(run.join("report.json")).unwrap()).unwrap();
    assert!(report["accuracy"].as_f64().unwrap() >= 0.0);
}

#[test]
fn identical_runs_reproduce_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = with(&["train", "--task", "nonlinear_da", "--seed", "2"], FAST);
    let ra = printed_path(a.path(), &laot(a.path(), &args));
    let rb = printed_path(b.path(), &laot(b.path(), &args));
    assert_eq!(ra.file_name(), rb.file_name());
    for f in ["manifest.json", "model.bin", "log.csv", "report.json"] {
        assert_eq!(fs::read(ra.join(f)).unwrap(), fs::read(rb.join(f)).unwrap(), "{f}");
    }
    let sweep = with(&["sweep", "--seed", "0,1", "--lambdas", "0,1"], FAST);
    let sa = printed_path(a.path(), &laot(a.path(), &sweep));
    let sb = printed_path(b.path(), &laot(b.path(), &sweep));
    assert_eq!(fs::read(sa).unwrap(), fs::read(sb).unwrap());
}

#[test]
fn seed_is_required() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["train", "--task", "toy3d"],
        vec!["sweep"],
        vec!["bench", "--n", "10"],
    ] {
        let o = laot(dir.path(), &args);
        assert_eq!(code(&o), 1, "{args:?}");
        assert!(stderr(&o).contains("--seed"), "{}", stderr(&o));
    }
    assert_eq!(code(&laot(dir.path(), &["--help"])), 0);
}

#[test]
fn manifest_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["train", "--task", "mnist", "--seed", "1"],
        vec!["train", "--task", "toy3d", "--seed", "1", "--lambda", "-1"],
        vec!["train", "--task", "toy3d", "--seed", "1", "--batch_size", "1"],
        vec!["train", "--seed", "1"],
        vec!["train", "--source", "missing.csv", "--target", "missing.csv", "--seed", "1"],
        vec!["bench", "--seed", "1", "--n", "100,10"],
        vec!["train", "--task", "toy3d", "--seed", "1", "--config", "nope.json"],
    ];
    for args in cases {
        let o = laot(dir.path(), &args);
        assert_eq!(code(&o), 1, "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn malformed_input_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.csv"), "1,2,0\n3,4,1\n5,oops,0\n").unwrap();
    fs::write(dir.path().join("t.csv"), "1,2\n3,4\n").unwrap();
    let o = laot(dir.path(), &["train", "--source", "s.csv", "--target", "t.csv", "--seed", "1"]);
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    assert!(err.contains("s.csv") && err.contains("line 3"), "{err}");
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), r#"{"latent_dim": 2, "epochs": 1, "batch_size": 16, "lambda": 0.5}"#).unwrap();
    let o = laot(dir.path(), &["train", "--task", "toy3d", "--n", "40", "--seed", "3", "--config", "c.json", "--lambda", "0.25"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = RunManifest::load(&printed_path(dir.path(), &o).join("manifest.json")).unwrap();
    assert_eq!((m.config.latent_dim, m.config.epochs, m.config.lambda, m.config.seed), (2, 1, 0.25, 3));
}

#[test]
fn eval_from_files_writes_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let o = laot(dir.path(), &["gen", "--task", "gauss_affine", "--seed", "0", "--n", "60", "--out", "data"]);
    assert_eq!(code(&o), 0);
    let args = with(
        &[
            "eval",
            "--source",
            "data/source.csv",
            "--target",
            "data/target.csv",
            "--target_labels",
            "--seed",
            "0,1",
            "--methods",
            "laot,ot_gauss",
        ],
        &FAST[..6],
    );
    let o = laot(dir.path(), &args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let exp = printed_path(dir.path(), &o);
    let agg = fs::read_to_string(exp.join("aggregate.csv")).unwrap();
    let mut lines = agg.lines();
    assert_eq!(lines.next(), Some("task,method,seed,accuracy,runtime_seconds,config_hash"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        let hash = r.rsplit(',').next().unwrap();
        assert_eq!(hash.len(), 16);
        let run = dir.path().join("runs").join(hash);
        assert!(run.join("manifest.json").exists());
        assert!(run.join("report.json").exists());
    }
    let laot_run = rows.iter().find(|r| r.contains(",laot,")).unwrap().rsplit(',').next().unwrap();
    let run = dir.path().join("runs").join(laot_run);
    for f in ["model.bin", "log.csv"] {
        assert!(run.join(f).exists(), "{f}");
    }
    let manifest = RunManifest::load(&exp.join("manifest.json")).unwrap();
    assert_eq!(manifest.inputs.len(), 2);
    assert_eq!(manifest.input_hash.len(), 64);
    assert!(exp.join("summary.json").exists());

    let o = laot(
        dir.path(),
        &[
            "eval",
            "--source",
            "data/source.csv",
            "--target",
            "data/target.csv",
            "--target_labels",
            "--seed",
            "0",
            "--model",
            run.join("model.bin").to_str().unwrap(),
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(o.stdout.split(|&b| b == b'\n').next().unwrap()).unwrap();
    assert_eq!(report["method_tag"], "laot");
}

#[test]
fn partial_failure_exits_two_with_summary() {
    let dir = tempfile::tempdir().unwrap();
    // Raw-feature baselines cannot run across different widths.
    let args = with(&["eval", "--task", "hetero_da", "--seed", "0", "--methods", "laot,ot_gauss"], FAST);
    let o = laot(dir.path(), &args);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let exp = printed_path(dir.path(), &o);
    let agg = fs::read_to_string(exp.join("aggregate.csv")).unwrap();
    assert_eq!(agg.lines().count(), 2);
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(exp.join("summary.json")).unwrap()).unwrap();
    let errors: Vec<_> = summary["runs"].as_array().unwrap().iter().filter(|r| !r["error"].is_null()).collect();
    assert_eq!(errors.len(), 1);
    assert_eq!(errors[0]["method"], "ot_gauss");
}

#[test]
fn sweep_rows_follow_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = laot(dir.path(), &with(&["sweep", "--seed", "5,6", "--lambdas", "0,0.5,2"], FAST));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(printed_path(dir.path(), &o)).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("lambda,seed,final_la_loss,final_rec_loss,w2_after_map,status,config_hash")
    );
    let lambdas: Vec<f64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(lambdas, vec![0.0, 0.0, 0.5, 0.5, 2.0, 2.0]);
}

#[test]
fn bench_small() {
    let dir = tempfile::tempdir().unwrap();
    let o = laot(dir.path(), &["bench", "--seed", "0", "--n", "20,40", "--d", "3", "--reps", "3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(printed_path(dir.path(), &o)).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("method,n,d,seconds,reps,status,config_hash"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r[5] == "ok" && r[4] == "3" && r[3].parse::<f64>().unwrap() >= 0.0));
}

#[test]
fn rv_select_prints_choice() {
    let dir = tempfile::tempdir().unwrap();
    let args = with(&["rv-select", "--task", "toy3d", "--seed", "0,1", "--lambdas", "0,1", "--report_accuracy"], FAST);
    let o = laot(dir.path(), &args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let exp = printed_path(dir.path(), &o);
    let sel: serde_json::Value = serde_json::from_slice(&fs::read(exp.join("selection.json")).unwrap()).unwrap();
    let i = sel["selected"].as_u64().unwrap() as usize;
    let rv: Vec<f64> = sel["median_rv"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!(rv.iter().all(|&v| v <= rv[i]));
    assert_eq!(fs::read_to_string(exp.join("rv.csv")).unwrap().lines().count(), 5);
    let first = String::from_utf8_lossy(&o.stdout).lines().next().unwrap().to_string();
    let chosen: serde_json::Value = serde_json::from_str(&first).unwrap();
    assert_eq!(chosen["lambda"], sel["config"]["lambda"]);
}
