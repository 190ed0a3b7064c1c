use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn jkge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jkge"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn short_synth(dir: &Path, years: u32) -> std::path::PathBuf {
    let cfg = dir.join("synth.toml");
    fs::write(&cfg, format!("n_years = {years}\nstart = 1990-10-01\n")).unwrap();
    cfg
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = jkge(&["evaluate", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
    assert_eq!(jkge(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(jkge(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_input_is_a_data_error() {
    let dir = tempdir().unwrap();
    let out = jkge(&[
        "benchmark",
        "--input",
        p(&dir.path().join("absent.csv")),
        "--output",
        p(&dir.path().join("b.csv")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("b.csv").exists());
}

#[test]
fn synth_calibrate_evaluate_chain() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    let cfg = short_synth(d, 6);
    let out = jkge(&["synth", "--config", p(&cfg), "--seed", "5", "--out-dir", p(d)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(d.join("forcings.csv").exists() && d.join("obs.csv").exists());

    let cal = d.join("cal");
    let out = jkge(&[
        "calibrate",
        "--forcings",
        p(&d.join("forcings.csv")),
        "--obs",
        p(&d.join("obs.csv")),
        "--metric",
        "kge_ss",
        "--epochs",
        "20",
        "--seeds",
        "2",
        "--spinup-years",
        "1",
        "--out-dir",
        p(&cal),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let result: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(cal.join("calibration.json")).unwrap()).unwrap();
    assert_eq!(result["metric"], "kge_ss");
    assert!(cal.join("params.json").exists());

    let ev = d.join("ev");
    let out = jkge(&[
        "evaluate",
        "--obs",
        p(&d.join("obs.csv")),
        "--sim",
        p(&cal.join("sim.csv")),
        "--bootstrap",
        "20",
        "--out-dir",
        p(&ev),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["report.json", "fdc.csv", "flowgroups.csv", "monthly_bias.csv", "qq.csv", "bootstrap.csv"] {
        assert!(ev.join(f).exists(), "{f} missing");
    }
    let boot = fs::read_to_string(ev.join("bootstrap.csv")).unwrap();
    assert!(boot.starts_with("metric,median,q05,q95,skipped"));
    let r = report(&ev);
    assert!(r["kge_ss"].as_f64().unwrap() <= 1.0);
}

#[test]
fn perfect_simulation_scores_one() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    let cfg = short_synth(d, 4);
    assert!(jkge(&["synth", "--config", p(&cfg), "--out-dir", p(d)]).status.success());
    let obs = d.join("obs.csv");
    let out = jkge(&["evaluate", "--obs", p(&obs), "--sim", p(&obs), "--bootstrap", "0", "--out-dir", p(d)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(d);
    for key in ["nse", "kge", "kge_ss", "jkge_ss", "jkge_aug", "jkge_abl1", "jkge_abl2", "jkge_musigma"] {
        assert_eq!(r[key].as_f64(), Some(1.0), "{key}");
    }
    assert_eq!(r["mse"].as_f64(), Some(0.0));
    assert!(!d.join("bootstrap.csv").exists());
}

#[test]
fn synth_is_deterministic_per_seed() {
    let a = tempdir().unwrap();
    let b = tempdir().unwrap();
    let c = tempdir().unwrap();
    let cfg = short_synth(a.path(), 2);
    for (dir, seed) in [(&a, "9"), (&b, "9"), (&c, "10")] {
        assert!(jkge(&["synth", "--config", p(&cfg), "--seed", seed, "--out-dir", p(dir.path())])
            .status
            .success());
    }
    let read = |d: &Path| fs::read_to_string(d.join("obs.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    assert_ne!(read(a.path()), read(c.path()));
}

#[test]
fn convert_then_benchmark() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    let input = d.join("q.csv");
    fs::write(&input, "day,cfs\n2000-01-01,10\n2000-01-02,\n2000-01-03,30\n").unwrap();
    let depth = d.join("depth.csv");
    let out = jkge(&[
        "convert",
        "--input",
        p(&input),
        "--output",
        p(&depth),
        "--area-km2",
        "100",
        "--date-column",
        "day",
        "--value-column",
        "cfs",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&depth).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "date,value");
    assert_eq!(lines[2], "2000-01-02,");
    // 10 cfs over 100 km2: 10 * 0.028316846592 * 86400 / 100e3 mm
    let v: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
    assert!((v - 10.0 * 0.028316846592 * 86400.0 / 100e3).abs() < 1e-12);

    let bench = d.join("bench.csv");
    let out = jkge(&["benchmark", "--input", p(&depth), "--output", p(&bench), "--method", "ltm"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&bench).unwrap();
    assert!(text.starts_with("date,value,benchmark,valid"));
    assert_eq!(text.lines().count(), 4);

    let out = jkge(&["convert", "--input", p(&input), "--output", p(&depth), "--area-km2", "-1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn grad_check_prints_a_passing_table() {
    let out = jkge(&["grad-check", "--cases", "2", "--methods", "sa:7,ma:7"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8(out.stdout).unwrap();
    assert_eq!(table.lines().filter(|l| l.ends_with("PASS")).count(), 10);

    let out = jkge(&["grad-check", "--cases", "2", "--methods", "sa:7", "--tol", "1e-300"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn experiment_writes_one_row_per_target() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    let cfg = short_synth(d, 4);
    let out = jkge(&[
        "experiment",
        "--synth-config",
        p(&cfg),
        "--methods",
        "sa:90,sa:7",
        "--epochs",
        "5",
        "--seeds",
        "1",
        "--spinup-years",
        "1",
        "--out-dir",
        p(d),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(d.join("summary.csv")).unwrap();
    let labels: Vec<&str> = summary.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(labels, ["jkge_aug@sa:90", "jkge_aug@sa:7", "kge_ss"]);
    assert!(d.join("run_jkge_aug-sa-90.json").exists());
    assert!(d.join("summary_eval.csv").exists());
}
