//! End-to-end checks of the `csmr` binary.

mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::*;
use csmri::dataset::Dataset;
use csmri::io::read_complex;
use csmri::nudft::{DftOperator, OpMode};

fn csmr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csmr"))
        .args(args)
        .output()
        .expect("run csmr")
}

fn ok(args: &[&str]) -> Output {
    let out = csmr(args);
    assert!(
        out.status.success(),
        "csmr {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn simulate_small_config_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("ds");
    ok(&["simulate", "--nx", "128", "--ny", "64", "--coils", "12", "--readouts", "101",
        "--samples", "128", "--undersample", "8", "--seed", "1", "--out", p(&ds)]);
    let k = read_complex::<f64>(ds.join("kspace.cplx")).unwrap();
    assert_eq!(k.shape(), &[1664, 12]);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ds.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["nx"], 128);
    assert_eq!(meta["total_measurements"], 19_968);
    let (dims, _) = csmri::io::read_real(ds.join("traj.cplx")).unwrap();
    assert_eq!(dims, vec![1664, 2]);
}

#[test]
fn simulate_fully_sampled() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("full");
    // a small grid keeps the direct summation quick; the count depends only on the trajectory
    ok(&["simulate", "--nx", "8", "--ny", "4", "--coils", "12", "--readouts", "101",
        "--samples", "128", "--undersample", "1", "--out", p(&ds)]);
    assert_eq!(read_complex::<f64>(ds.join("kspace.cplx")).unwrap().shape(), &[12928, 12]);
}

#[test]
fn usage_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(csmr(&["simulate", "--nx", "8"]).status.code(), Some(2));
    let ds = dir.path().join("ds");
    ok(&["simulate", "--nx", "8", "--ny", "8", "--coils", "2", "--readouts", "8",
        "--samples", "8", "--out", p(&ds)]);
    let out = dir.path().join("x.cplx");
    assert_eq!(
        csmr(&["reconstruct", "--data", p(&ds), "--workers", "0", "--out", p(&out)]).status.code(),
        Some(2)
    );
    assert_eq!(
        csmr(&["benchmark", "--data", p(&ds), "--workers-list", "", "--out", p(&out)]).status.code(),
        Some(2)
    );
    assert_eq!(csmr(&["reconstruct", "--data", p(&ds), "--method", "lsqr", "--out", p(&out)]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.cplx");
    let missing = dir.path().join("missing");
    let r = csmr(&["reconstruct", "--data", p(&missing), "--out", p(&out)]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("meta.json"));

    let ds = dir.path().join("ds");
    ok(&["simulate", "--nx", "4", "--ny", "4", "--coils", "1", "--readouts", "1",
        "--samples", "2", "--out", p(&ds)]);
    // 2 samples cannot feed 3 workers
    assert_eq!(
        csmr(&["reconstruct", "--data", p(&ds), "--workers", "3", "--out", p(&out)]).status.code(),
        Some(1)
    );
    let a = dir.path().join("a.cplx");
    let b = dir.path().join("b.cplx");
    csmri::io::write_complex(&a, &csmri::ComplexTensor::<f64>::zeros(&[2, 2])).unwrap();
    csmri::io::write_complex(&b, &csmri::ComplexTensor::<f64>::zeros(&[2, 3])).unwrap();
    let cmp = dir.path().join("cmp");
    assert_eq!(csmr(&["compare", "--a", p(&a), "--b", p(&b), "--out", p(&cmp)]).status.code(), Some(1));
}

#[test]
fn adjoint_method_equals_direct_adjoint() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("ds");
    ok(&["simulate", "--nx", "12", "--ny", "10", "--coils", "3", "--readouts", "16",
        "--samples", "16", "--undersample", "2", "--noise-snr", "20", "--seed", "3", "--out", p(&ds)]);
    let img = dir.path().join("adj.cplx");
    let report = dir.path().join("adj.json");
    ok(&["reconstruct", "--data", p(&ds), "--method", "adjoint", "--workers", "3",
        "--out", p(&img), "--report", p(&report)]);
    let got = read_complex::<f64>(&img).unwrap();

    let data = Dataset::read(&ds).unwrap();
    let f = dense_encoding(&data.sens, data.kspace.trajectory());
    let want = f.adjoint() * to_dvec(data.kspace.data());
    assert!(rel_err(got.data(), want.as_slice()) < 1e-12);
    let op = DftOperator::<f64>::from_maps(data.kspace.trajectory(), &data.sens, OpMode::Separable).unwrap();
    assert!(rel_err(got.data(), op.adjoint(data.kspace.data()).unwrap().data()) < 1e-12);

    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["comm"]["allreduce_calls"], 1);
    assert_eq!(r["workers"], 3);
}

#[test]
fn admm_report_accounts_for_every_allreduce() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("ds");
    ok(&["simulate", "--nx", "16", "--ny", "12", "--coils", "4", "--readouts", "21",
        "--samples", "16", "--out", p(&ds)]);
    let img = dir.path().join("admm.cplx");
    let report = dir.path().join("admm.json");
    ok(&["reconstruct", "--data", p(&ds), "--workers", "2", "--precision", "f32",
        "--out", p(&img), "--report", p(&report)]);
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let iters = r["iterations"].as_array().unwrap();
    assert!(!iters.is_empty() && iters.len() <= 5);
    let cg: u64 = iters.iter().map(|i| i["cg_iterations"].as_u64().unwrap() + 1).sum();
    assert_eq!(r["comm"]["allreduce_calls"].as_u64().unwrap(), 2 + cg);
    assert_eq!(r["precision"], "single");
    // single-precision output keeps its dtype
    assert_eq!(std::fs::read(&img).unwrap()[5], 0);
}

#[test]
fn compare_writes_profiles_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.cplx");
    let b = dir.path().join("b.cplx");
    let img = csmri::ComplexTensor::from_fn(&[6, 4], |i| num_complex::Complex64::new(5.0 + i as f64, 1.0));
    csmri::io::write_complex(&a, &img).unwrap();
    csmri::io::write_complex(&b, &img.scale_real(2.0)).unwrap();
    let prefix = dir.path().join("cmp");
    ok(&["compare", "--a", p(&a), "--b", p(&b), "--out", p(&prefix)]);
    let row = std::fs::read_to_string(dir.path().join("cmp_row.csv")).unwrap();
    let col = std::fs::read_to_string(dir.path().join("cmp_col.csv")).unwrap();
    assert_eq!(row.lines().next(), Some("index,reldiff"));
    assert_eq!(row.lines().count(), 1 + 4);
    assert_eq!(col.lines().count(), 1 + 6);
    for line in row.lines().skip(1).chain(col.lines().skip(1)) {
        let v: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((v - 0.5).abs() < 1e-12);
    }
    let s: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("cmp_summary.json")).unwrap()).unwrap();
    assert!((s["median"].as_f64().unwrap() - 0.5).abs() < 1e-12);

    ok(&["compare", "--a", p(&a), "--b", p(&a), "--out", p(&prefix)]);
    let row = std::fs::read_to_string(dir.path().join("cmp_row.csv")).unwrap();
    assert!(row.lines().skip(1).all(|l| l.ends_with(",0.000000000e0")));
}

#[test]
fn benchmark_table_has_one_row_per_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("ds");
    ok(&["simulate", "--nx", "8", "--ny", "8", "--coils", "2", "--readouts", "8",
        "--samples", "8", "--undersample", "1", "--out", p(&ds)]);
    let csv = dir.path().join("scaling.csv");
    ok(&["benchmark", "--data", p(&ds), "--workers-list", "1,2,4", "--repeat", "2",
        "--admm-iters", "2", "--out", p(&csv)]);
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert!(lines[0].starts_with("workers,best_seconds,speedup,ideal_speedup"));
    assert_eq!(lines.len(), 4);
    ok(&["benchmark", "--data", p(&ds), "--workers-list", "1", "--repeat", "1", "--out", p(&csv)]);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().nth(1).unwrap().split(',').nth(2), Some("1.0000"));
}

#[test]
fn repeated_runs_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for run in 0..2 {
        let ds = dir.path().join(format!("ds{run}"));
        ok(&["simulate", "--nx", "12", "--ny", "8", "--coils", "3", "--readouts", "12",
            "--samples", "12", "--noise-snr", "25", "--seed", "9", "--out", p(&ds)]);
        let img = dir.path().join(format!("img{run}.cplx"));
        ok(&["reconstruct", "--data", p(&ds), "--workers", "3", "--out", p(&img)]);
        files.push((ds, img));
    }
    for name in ["phantom.cplx", "sens.cplx", "traj.cplx", "kspace.cplx", "meta.json"] {
        assert_eq!(
            std::fs::read(files[0].0.join(name)).unwrap(),
            std::fs::read(files[1].0.join(name)).unwrap(),
            "{name}"
        );
    }
    assert_eq!(std::fs::read(&files[0].1).unwrap(), std::fs::read(&files[1].1).unwrap());
}
