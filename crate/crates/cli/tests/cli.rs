use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lcvco_isf::output::{read_rows, ScheduleRow};
use lcvco_isf::{OperatingRegion, Transistor};

const DESK: &str = include_str!("../../../configs/desk.ini");

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lcvco-isf"))
}

/// Writes `text` as a config in `dir` and returns its path.
fn config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("c.ini");
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str], cfg: &Path, out: &Path) -> Output {
    bin().args(args).arg("--config").arg(cfg).arg("--out").arg(out).output().unwrap()
}

fn json(path: PathBuf) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn design_reports_ratio_and_synthesized_vb() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), DESK);
    let out = run(&["design"], &cfg, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let v = json(dir.path().join("design.json"));
    assert_eq!(format!("{:.5}", v["design_ratio"].as_f64().unwrap()), "0.72222");
    assert!((v["feedback"]["vb"].as_f64().unwrap() - 0.429).abs() < 1e-12);
    assert!((v["feedback"]["k"].as_f64().unwrap() - 0.33).abs() < 1e-15);
    assert!((v["solution"]["phi1_star_deg"].as_f64().unwrap() - 16.172).abs() < 0.01);
}

#[test]
fn design_point_schedule_has_no_triode_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), DESK);
    let out = run(&["regions", "--design-point"], &cfg, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows: Vec<ScheduleRow> = read_rows(&dir.path().join("regions_schedule.csv")).unwrap();
    assert!(rows.iter().any(|r| r.transistor == Transistor::M1));
    assert!(!rows.iter().any(|r| r.transistor == Transistor::M1 && r.region == OperatingRegion::Triode));

    // The grounded-body point does have a triode interval.
    let out = run(&["regions"], &cfg, dir.path());
    assert!(out.status.success());
    let rows: Vec<ScheduleRow> = read_rows(&dir.path().join("regions_schedule.csv")).unwrap();
    assert!(rows.iter().any(|r| r.transistor == Transistor::M1 && r.region == OperatingRegion::Triode));
}

#[test]
fn compare_of_equal_configs_reports_zero_improvement() {
    let dir = tempfile::tempdir().unwrap();
    let text = DESK.replace("k = 0.33", "").replace("periods = 4000", "periods = 2000").replace("seeds = 1, 2, 3, 4", "seeds = 5, 6");
    let cfg = config(dir.path(), &text);
    let out = run(&["compare", "--offsets", "300k,1MHz"], &cfg, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(dir.path().join("compare.json"));
    let summary = v["summary"].as_array().unwrap();
    assert_eq!(summary.len(), 2);
    for s in summary {
        assert_eq!(s["mean_db"].as_f64(), Some(0.0));
        assert_eq!(s["seeds_improved"].as_u64(), Some(0));
        assert_eq!(s["seeds_resolved"].as_u64(), Some(2));
    }
    assert!(dir.path().join("compare.csv").exists());
}

#[test]
fn isf_and_metrics_write_their_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), DESK);
    let out = run(&["isf", "--points", "256"], &cfg, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["isf_paper.csv", "isf_first_principles.csv"] {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        assert_eq!(text.lines().count(), 257, "{name}");
    }
    let out = run(&["metrics"], &cfg, dir.path());
    assert!(out.status.success());
    let v = json(dir.path().join("metrics.json"));
    assert_eq!(v["phase_noise"].as_array().unwrap().len(), 6);
}

#[test]
fn sweep_writes_long_format_and_keeps_going_past_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), DESK);
    let out = run(&["sweep", "--target", "design", "--param", "steady_state.a=1:1.5:2", "--param", "device.vth0=0.4,0.5"], &cfg, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(text.starts_with("point,param_1,value_1,param_2,value_2,quantity,value,error\n"));
    // 4 points × 7 quantities
    assert_eq!(text.lines().count(), 1 + 4 * 7);

    let out = run(&["sweep", "--target", "design", "--param", "steady_state.a=-1,1"], &cfg, dir.path());
    assert_eq!(out.status.code(), Some(4));
    let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(text.lines().any(|l| l.starts_with("0,") && l.contains(",error,")));
    assert!(text.lines().any(|l| l.starts_with("1,") && l.contains("phi1_star_deg")));
}

#[test]
fn error_classes_have_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let out = bin().arg("regions").output().unwrap();
    assert_eq!(out.status.code(), Some(1), "usage");

    let bad = config(d, &DESK.replace("[tank]", "[tank]\nq = 3"));
    let out = run(&["regions"], &bad, d);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tank.q"));

    let out = run(&["regions"], &d.join("missing.ini"), d);
    assert_eq!(out.status.code(), Some(3), "i/o");

    let cfg = config(d, DESK);
    let out = run(&["metrics", "--offsets", "1k,-5"], &cfg, d);
    assert_eq!(out.status.code(), Some(4), "domain");

    let dead = config(d, &DESK.replace("rp = 1kOhm", "rp = 100Ohm").replace("periods = 4000", "periods = 2000"));
    let out = run(&["simulate"], &dead, d);
    assert_eq!(out.status.code(), Some(7), "{}", String::from_utf8_lossy(&out.stderr));

    let short = config(d, &DESK.replace("periods = 4000", "periods = 2000"));
    let out = run(&["simulate", "--offsets", "10"], &short, d);
    assert_eq!(out.status.code(), Some(8), "{}", String::from_utf8_lossy(&out.stderr));
}
