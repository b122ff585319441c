use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use langchange::data::default_data_dir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_langchange"))
        .args(args)
        .env("LANGCHANGE_DATA", default_data_dir())
        .output()
        .expect("binary runs")
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

#[test]
fn missing_regions_file_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere.tsv");
    let out = run(&[
        "fit-demography",
        "--regions",
        missing.to_str().unwrap(),
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere.tsv"));
}

#[test]
fn bad_settings_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "seed = 3\nnot_a_setting = 1\n").unwrap();
    let out = run(&["--config", cfg.to_str().unwrap(), "report"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not_a_setting"));

    let out = run(&[
        "-o",
        dir.path().to_str().unwrap(),
        "simulate",
        "wf",
        "--epsilon",
        "1.5",
        "--runs",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["baseline", "--article", "neither"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["--digits", "0", "baseline", "--gof-sims", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn outputs_embed_configuration_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "seed = 42\n[baseline]\ngof_sims = 1500\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "-o",
        out_dir.to_str().unwrap(),
        "baseline",
        "--article",
        "indefinite",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(out_dir.join("fit_report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 42);
    assert_eq!(report["config"]["baseline"]["gof_sims"], 1500);
    assert_eq!(report["config"]["articles"], serde_json::json!(["indefinite"]));
    assert!(report["config"].get("jobs").is_none());
    let omega = report["result"][0]["report"]["mle_value"].as_f64().unwrap();
    assert!((omega / 5.67e-4 - 1.0).abs() < 0.01);
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[&[&str]] = &[
        &["baseline", "--gof-sims", "3000"],
        &["simulate", "wf", "--preset", "selected-times", "--runs", "20000"],
        &["simulate", "wf", "--preset", "interference", "--runs", "3000"],
        &["simulate", "abm", "--trajectory-only", "--duration", "200"],
        &["report"],
    ];
    for (i, args) in cases.iter().enumerate() {
        let mut outputs = Vec::new();
        for jobs in ["1", "3"] {
            let out_dir = dir.path().join(format!("{i}-{jobs}"));
            let mut full = vec!["--seed", "5", "--jobs", jobs, "-o", out_dir.to_str().unwrap()];
            full.extend_from_slice(args);
            let out = run(&full);
            assert!(
                out.status.success(),
                "{args:?}: {}",
                String::from_utf8_lossy(&out.stderr)
            );
            outputs.push(files(&out_dir));
        }
        assert!(!outputs[0].is_empty());
        assert_eq!(outputs[0], outputs[1], "{args:?}");
    }
}
