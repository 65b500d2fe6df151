use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qdist_core::io::{read_csv, CountRow, MetricsRow, PlanCsvRow, ReportRow};
use qdist_core::sweep::SweepRow;

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn preset(name: &str) -> String {
    repo_root().join("configs").join(name).to_str().unwrap().to_string()
}

fn qdist(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdist"))
        .args(args)
        .output()
        .expect("qdist binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn help_and_usage_exit_codes() {
    assert_eq!(code(&qdist(&["--help"])), 0);
    assert_eq!(code(&qdist(&[])), 1);
    assert_eq!(code(&qdist(&["frobnicate"])), 1);
    assert_eq!(code(&qdist(&["--channels", "0", "plan"])), 1);
    assert_eq!(code(&qdist(&["--format", "xml", "plan"])), 1);
}

#[test]
fn empty_config_uses_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("empty.cfg");
    fs::write(&cfg, "").unwrap();
    let out = tmp.path().join("out");
    let res = qdist(&["--config", p(&cfg), "--out-dir", p(&out), "plan"]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let rows: Vec<PlanCsvRow> = read_csv(&out.join("plan.csv")).unwrap();
    assert_eq!(rows.len(), 44);
}

#[test]
fn invalid_config_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    fs::write(&cfg, "grid.spacing = -60.0\n").unwrap();
    let res = qdist(&["--config", p(&cfg), "--out-dir", p(tmp.path()), "plan"]);
    assert_eq!(code(&res), 2);
    assert!(stderr(&res).contains("grid.spacing"), "{}", stderr(&res));

    fs::write(&cfg, "grid.nonsense = 1\n").unwrap();
    assert_eq!(code(&qdist(&["--config", p(&cfg), "plan"])), 2);

    let missing = tmp.path().join("missing.cfg");
    assert_eq!(code(&qdist(&["--config", p(&missing), "plan"])), 2);
}

#[test]
fn missing_counts_file_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let res = qdist(&["--out-dir", p(tmp.path()), "tomo", "--counts", p(&tmp.path().join("nope.csv"))]);
    assert_eq!(code(&res), 2);
}

#[test]
fn plan_first_channel() {
    let tmp = tempfile::tempdir().unwrap();
    let res = qdist(&["--config", &preset("reference.cfg"), "--out-dir", p(tmp.path()), "plan"]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let text = fs::read_to_string(tmp.path().join("plan.csv")).unwrap();
    assert!(text.starts_with("index,signal_nm,idler_nm,signal_THz,idler_THz\n"));
    let rows: Vec<PlanCsvRow> = read_csv(&tmp.path().join("plan.csv")).unwrap();
    assert_eq!(rows.len(), 44);
    assert!((rows[0].signal_nm - 1525.0).abs() < 0.05);
    // The idler follows from energy conservation with a 776 nm pump.
    let idler = 1.0 / (1.0 / 776.0 - 1.0 / rows[0].signal_nm);
    assert!((rows[0].idler_nm - idler).abs() < 1e-9);
}

#[test]
fn noiseless_pipeline_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = preset("noiseless.cfg");
    let base = ["--config", cfg.as_str(), "--noiseless", "--channels", "1-3,44", "--out-dir", p(dir)];
    let run = |extra: &[&str]| {
        let args: Vec<&str> = base.iter().copied().chain(extra.iter().copied()).collect();
        let res = qdist(&args);
        assert_eq!(code(&res), 0, "{args:?}: {}", stderr(&res));
        res
    };

    run(&["plan"]);
    run(&["simulate", "--plan", p(&dir.join("plan.csv"))]);
    let counts: Vec<CountRow> = read_csv(&dir.join("counts.csv")).unwrap();
    assert_eq!(counts.len(), 4 * 16);

    run(&["tomo", "--counts", p(&dir.join("counts.csv"))]);
    let metrics: Vec<MetricsRow> = read_csv(&dir.join("metrics.csv")).unwrap();
    assert_eq!(metrics.iter().map(|m| m.channel).collect::<Vec<_>>(), vec![1, 2, 3, 44]);
    for m in &metrics {
        assert!(m.converged, "channel {} did not converge", m.channel);
        assert!((m.fidelity_max - 1.0).abs() < 1e-8, "{m:?}");
        assert!((m.fidelity_phi_plus - 1.0).abs() < 1e-8, "{m:?}");
    }
    assert!(dir.join("states/channel_44.txt").exists());

    run(&["compensate", "--counts", p(&dir.join("counts.csv"))]);
    let fitted = fs::read_to_string(dir.join("compensated.csv")).unwrap();
    let comp = dir.join("fitted.csv");
    fs::rename(dir.join("compensation.csv"), &comp).unwrap();
    run(&["compensate", "--counts", p(&dir.join("counts.csv")), "--apply", p(&comp)]);
    assert_eq!(fs::read_to_string(dir.join("compensated.csv")).unwrap(), fitted);
    assert_eq!(fs::read_to_string(dir.join("compensation.csv")).unwrap(), fs::read_to_string(&comp).unwrap());

    let res = run(&["report", "--input", p(&dir.join("metrics.csv"))]);
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("fidelity_max over 4 channels: min 1.0000 median 1.0000 max 1.0000"), "{stdout}");
    let report: Vec<ReportRow> = read_csv(&dir.join("report.csv")).unwrap();
    assert_eq!(report.len(), 4);
}

#[test]
fn noiseless_sweep_is_perfect() {
    let tmp = tempfile::tempdir().unwrap();
    let res = qdist(&["--config", &preset("noiseless.cfg"), "--noiseless", "--out-dir", p(tmp.path()), "sweep"]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let rows: Vec<SweepRow> = read_csv(&tmp.path().join("sweep.csv")).unwrap();
    assert_eq!(rows.len(), 44);
    for r in &rows {
        assert!(r.error.is_empty());
        assert!((r.fidelity_max - 1.0).abs() < 1e-8, "{r:?}");
        assert!((r.fidelity_phi_plus - 1.0).abs() < 1e-8, "{r:?}");
    }
}

#[test]
fn sweep_output_feeds_report_and_tomo() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = preset("reference.cfg");
    let common = ["--config", cfg.as_str(), "--channels", "5,20", "--out-dir"];
    let sweep_dir = dir.join("sweep");
    let res = qdist(&[&common[..], &[p(&sweep_dir), "sweep"]].concat());
    assert_eq!(code(&res), 0, "{}", stderr(&res));

    let res = qdist(&[&common[..], &[p(&dir.join("report")), "report", "--input", p(&sweep_dir.join("sweep.csv"))]].concat());
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    assert!(dir.join("report/summary.txt").exists());

    let tomo_dir = dir.join("tomo");
    let res = qdist(&[&common[..], &[p(&tomo_dir), "tomo", "--counts", p(&sweep_dir.join("counts.csv"))]].concat());
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    assert_eq!(
        fs::read_to_string(tomo_dir.join("metrics.csv")).unwrap(),
        fs::read_to_string(sweep_dir.join("metrics.csv")).unwrap()
    );
}

#[test]
fn json_format_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = preset("noiseless.cfg");
    let args = ["--config", cfg.as_str(), "--noiseless", "--format", "json", "--channels", "7", "--out-dir", p(dir)];
    assert_eq!(code(&qdist(&[&args[..], &["simulate"]].concat())), 0);
    let res = qdist(&[&args[..], &["tomo", "--counts", p(&dir.join("counts.json"))]].concat());
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let metrics: Vec<MetricsRow> = serde_json::from_str(&fs::read_to_string(dir.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics.len(), 1);
    assert_eq!(metrics[0].channel, 7);
    assert!(metrics[0].converged);
}

#[test]
fn same_seed_same_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = preset("reference.cfg");
    let run = |name: &str, seed: &str| {
        let dir = tmp.path().join(name);
        let res = qdist(&["--config", &cfg, "--seed", seed, "--channels", "1-4", "--out-dir", p(&dir), "simulate"]);
        assert_eq!(code(&res), 0, "{}", stderr(&res));
        fs::read(dir.join("counts.csv")).unwrap()
    };
    let a = run("a", "11");
    assert_eq!(a, run("b", "11"));
    assert_ne!(a, run("c", "12"));
}
