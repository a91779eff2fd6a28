use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

const CONFIGS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs");

fn mfac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfac"))
        .args(args)
        .env_remove("MFAC_OUTPUT_DIR")
        .output()
        .unwrap()
}

fn config_path(name: &str) -> String {
    format!("{CONFIGS}/{name}")
}

/// A shipped config shrunk to a few hundred steps.
fn small_config(dir: &Path, name: &str, edit: impl FnOnce(&mut Value)) -> PathBuf {
    let mut doc: Value =
        serde_json::from_str(&fs::read_to_string(config_path(name)).unwrap()).unwrap();
    let t = &mut doc["training"];
    t["n_steps"] = json!(300);
    t["n_particles"] = json!(12);
    t["langevin_iters"] = json!(3);
    t["log_interval"] = json!(100);
    t["truncation_steps"] = json!(60);
    edit(&mut doc);
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(&doc).unwrap()).unwrap();
    path
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string()
}

#[test]
fn analytic_prints_closed_form_means() {
    let cases = [
        ("lq_set1.json", "mfg", 0.8),
        ("lq_set1.json", "mfc", 0.192),
        ("lq_set2.json", "mfc", 1.0 / 9.0),
        ("mfcg_bench.json", "mfcg", 0.125 / 0.51875),
    ];
    for (file, kind, mean) in cases {
        let v = stdout_json(&mfac(&[
            "analytic",
            "--config",
            &config_path(file),
            "--kind",
            kind,
        ]));
        assert!(
            (v["mean"].as_f64().unwrap() - mean).abs() < 1e-12,
            "{file} {kind}: {v}"
        );
        assert_eq!(v["kind"], kind);
    }
    // Without --kind the configured mode is used.
    let v = stdout_json(&mfac(&[
        "analytic",
        "--config",
        &config_path("lq_set1_mfc.json"),
    ]));
    assert!((v["mean"].as_f64().unwrap() - 0.192).abs() < 1e-12);
}

#[test]
fn analytic_rejects_mismatched_kind() {
    let out = mfac(&[
        "analytic",
        "--config",
        &config_path("lq_set1.json"),
        "--kind",
        "mfcg",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_writes_metrics_checkpoint_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "lq_set1.json", |_| {});
    let out_dir = dir.path().join("run");
    let out = mfac(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--quiet",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let probes = (0..13)
        .map(|i| format!("{}", -1.0 + 0.25 * i as f64))
        .collect::<Vec<_>>();
    let mut expected = vec![
        "step".to_string(),
        "sample_mean".into(),
        "sample_var".into(),
        "abs_mean_error".into(),
        "td_err_avg".into(),
        "score_loss_avg".into(),
    ];
    expected.extend(probes.iter().map(|p| format!("control_{p}")));
    expected.extend(probes.iter().map(|p| format!("value_{p}")));
    assert_eq!(header(&out_dir.join("metrics.csv")), expected.join(","));
    let rows = fs::read_to_string(out_dir.join("metrics.csv")).unwrap();
    let steps: Vec<&str> = rows
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(steps, ["100", "200", "300"]);

    let summary = read_json(&out_dir.join("summary.json"));
    assert_eq!(summary["status"], "completed");
    assert!((summary["analytic_mean"].as_f64().unwrap() - 0.8).abs() < 1e-12);
    let last: Vec<f64> = rows
        .lines()
        .last()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(
        summary["final"]["abs_mean_error"].as_f64().unwrap(),
        last[3]
    );
    assert!(
        (summary["final"]["abs_mean_error"].as_f64().unwrap() - (last[1] - 0.8).abs()).abs()
            < 1e-12
    );
    assert_eq!(summary["analytic_control"].as_array().unwrap().len(), 13);
    assert!(out_dir.join("checkpoint.json").exists());
}

#[test]
fn control_game_header_has_local_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "mfcg_bench.json", |d| {
        d["training"]["probes"] = json!([0.0, 0.5])
    });
    let out_dir = dir.path().join("run");
    let out = mfac(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--quiet",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        header(&out_dir.join("metrics.csv")),
        "step,sample_mean,sample_var,abs_mean_error,td_err_avg,score_loss_avg,control_0,control_0.5,value_0,\
         value_0.5,local_sample_mean,local_sample_var,local_abs_mean_error,local_score_loss_avg"
    );
}

#[test]
fn bad_learning_rate_ordering_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "lq_set1.json", |d| {
        d["training"]["lr_score"] = json!(1e-3)
    });
    let out = mfac(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("lr_score < min(lr_actor, lr_critic)"), "{err}");
    assert!(!dir.path().join("metrics.csv").exists());
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "lq_set1.json", |d| {
        d["training"]["lr_typo"] = json!(1.0)
    });
    let out = mfac(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn seed_ensemble_writes_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "lq_set1.json", |_| {});
    let out_dir = dir.path().join("ens");
    let out = mfac(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--seeds",
        "3",
        "--seed",
        "5",
        "--out",
        out_dir.to_str().unwrap(),
        "--quiet",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let means: Vec<f64> = (5..8)
        .map(|s| {
            let summary = read_json(&out_dir.join(format!("seed_{s}/summary.json")));
            assert_eq!(summary["seed"], s);
            summary["final"]["sample_mean"].as_f64().unwrap()
        })
        .collect();
    let agg = fs::read_to_string(out_dir.join("aggregate.csv")).unwrap();
    let mut lines = agg.lines();
    let head: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(
        &head[..6],
        [
            "step",
            "n_seeds",
            "sample_mean_mean",
            "sample_mean_std",
            "sample_var_mean",
            "sample_var_std"
        ]
    );
    let last: Vec<f64> = lines
        .last()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(last[0], 300.0);
    assert_eq!(last[1], 3.0);
    let mean = means.iter().sum::<f64>() / 3.0;
    let std = (means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / 2.0).sqrt();
    assert!((last[2] - mean).abs() < 1e-12);
    assert!((last[3] - std).abs() < 1e-12);
}

#[test]
fn stop_and_resume_reproduces_the_straight_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "lq_set1_mfc.json", |_| {});
    let cfg = cfg.to_str().unwrap();
    let straight = dir.path().join("straight");
    let split = dir.path().join("split");
    assert!(mfac(&[
        "train",
        "--config",
        cfg,
        "--out",
        straight.to_str().unwrap(),
        "--quiet"
    ])
    .status
    .success());

    let out = mfac(&[
        "train",
        "--config",
        cfg,
        "--out",
        split.to_str().unwrap(),
        "--stop-after",
        "150",
        "--quiet",
    ]);
    assert!(out.status.success());
    assert_eq!(read_json(&split.join("summary.json"))["status"], "stopped");
    let ck = split.join("checkpoint.json");
    let out = mfac(&[
        "train",
        "--config",
        cfg,
        "--resume",
        ck.to_str().unwrap(),
        "--out",
        split.to_str().unwrap(),
        "--quiet",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    assert_eq!(
        fs::read_to_string(straight.join("metrics.csv")).unwrap(),
        fs::read_to_string(split.join("metrics.csv")).unwrap()
    );
    assert_eq!(
        fs::read_to_string(straight.join("checkpoint.json")).unwrap(),
        fs::read_to_string(split.join("checkpoint.json")).unwrap()
    );
}

#[test]
fn resume_rejects_a_different_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "lq_set1.json", |_| {});
    let run = dir.path().join("run");
    let out = mfac(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        run.to_str().unwrap(),
        "--stop-after",
        "50",
        "--quiet",
    ]);
    assert!(out.status.success());
    let other = small_config(dir.path(), "lq_set1.json", |d| {
        d["training"]["lr_actor"] = json!(6e-6)
    });
    let ck = run.join("checkpoint.json");
    let out = mfac(&[
        "train",
        "--config",
        other.to_str().unwrap(),
        "--resume",
        ck.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn export_hist_bins_and_validation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "mfcg_bench.json", |_| {});
    let run = dir.path().join("run");
    assert!(mfac(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        run.to_str().unwrap(),
        "--quiet"
    ])
    .status
    .success());
    let ck = run.join("checkpoint.json");
    let ck = ck.to_str().unwrap();

    let out = mfac(&[
        "export-hist",
        "--checkpoint",
        ck,
        "--bins",
        "1",
        "--range",
        "-1000",
        "1000",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let h = read_json(&run.join("histogram.json"));
    assert_eq!(h["step"], 300);
    assert_eq!(h["global"]["counts"], json!([12]));
    assert_eq!(h["local"]["counts"], json!([12]));
    assert!((h["analytic_mean"].as_f64().unwrap() - 0.125 / 0.51875).abs() < 1e-12);

    let custom = dir.path().join("h.json");
    let out = mfac(&[
        "export-hist",
        "--checkpoint",
        ck,
        "--bins",
        "10",
        "--range",
        "-2",
        "2",
        "--out",
        custom.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let h = read_json(&custom);
    assert_eq!(h["global"]["centers"].as_array().unwrap().len(), 10);
    assert_eq!(h["global"]["density"].as_array().unwrap().len(), 10);

    let out = mfac(&[
        "export-hist",
        "--checkpoint",
        ck,
        "--bins",
        "5",
        "--range",
        "0.5",
        "0.5",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn output_directory_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "lq_set2.json", |d| {
        d["training"]["n_steps"] = json!(100)
    });
    let target = dir.path().join("from_env");
    let out = Command::new(env!("CARGO_BIN_EXE_mfac"))
        .args(["train", "--config", cfg.to_str().unwrap(), "--quiet"])
        .env("MFAC_OUTPUT_DIR", &target)
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(target.join("summary.json").exists());
    assert!(!dir.path().join("runs").exists());

    // --out wins over the environment.
    let flag = dir.path().join("from_flag");
    let out = Command::new(env!("CARGO_BIN_EXE_mfac"))
        .args([
            "train",
            "--config",
            cfg.to_str().unwrap(),
            "--quiet",
            "--out",
            flag.to_str().unwrap(),
        ])
        .env("MFAC_OUTPUT_DIR", &target)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(flag.join("summary.json").exists());
}

#[test]
fn divergence_ends_in_a_fault_with_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "lq_set1.json", |d| {
        d["training"]["lr_actor"] = json!(1e150);
        d["training"]["lr_critic"] = json!(1e150);
    });
    let run = dir.path().join("run");
    let out = mfac(&["train", "--config", cfg.to_str().unwrap(), "--out", run.to_str().unwrap(), "--quiet"]);
    assert_eq!(out.status.code(), Some(3));
    let summary = read_json(&run.join("summary.json"));
    assert_eq!(summary["status"], "fault");
    assert!(summary["fault"].as_str().unwrap().contains("non-finite"));
    let ck = read_json(&run.join("checkpoint.json"));
    assert!(ck["state"]["step"].as_u64().unwrap() < 300);
}
