use std::process::{Command, Output};

use scosep::rng::trial_seed;
use scosep_cli::records::{read_csv, CSV_HEADER};

fn scosep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scosep")).args(args).output().expect("spawn scosep")
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let out = dir.path().join("drift.csv");
    std::fs::write(&cfg, format!("# drift run\nexperiment = gd-drift\ntrials = 9\nseed = 4\nout = {}\n", out.display())).unwrap();
    let o = scosep(&["run", "--config", cfg.to_str().unwrap(), "--trials", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
    let recs = read_csv(text.as_bytes()).unwrap();
    assert_eq!(recs.iter().map(|r| r.trial).max(), Some(4));
    // The seed column carries the derived per-trial seed.
    assert!(recs.iter().all(|r| r.experiment == "gd-drift" && r.seed == trial_seed(4, r.trial)));

    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("drift.summary.json")).unwrap()).unwrap();
    let keys: Vec<&str> = summary.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys[..4], ["experiment", "seed", "trials", "n"]);
    assert_eq!(summary["trials"], 5);
}

#[test]
fn plot_renders_svg_from_a_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("rate.csv");
    let svg = dir.path().join("rate.svg");
    let o = scosep(&["sweep", "sgd-rate", "--axis", "n", "--values", "64,256", "--trials", "3", "--out", csv.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("log-log slope"));

    let o = scosep(&["plot", csv.to_str().unwrap(), "--metric", "excess_avg", "--log-log", "--out", svg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let body = std::fs::read_to_string(&svg).unwrap();
    assert!(body.contains(r#"version="1.1""#) && body.ends_with("</svg>\n"));

    let o = scosep(&["plot", csv.to_str().unwrap(), "--metric", "nope", "--out", svg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("excess_avg"));
}

#[test]
fn invalid_inputs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "experiment = sgd-rate\nlearning_rate = 3\n").unwrap();
    let o = scosep(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    assert_eq!(scosep(&["run", "sgd-rate", "--k", "3"]).status.code(), Some(2));
    assert_eq!(scosep(&["run"]).status.code(), Some(2));
    assert_eq!(scosep(&["sweep", "sgd-rate", "--axis", "n"]).status.code(), Some(2));
}
