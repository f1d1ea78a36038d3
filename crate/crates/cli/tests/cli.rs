use std::path::Path;
use std::process::{Command, Output};

use tomo_core::io::{read_image, sidecar_path};
use tomo_core::metrics::relative_l2;

fn tomo(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tomo")).current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = tomo(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

#[test]
fn phantom_radon_backproject_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["phantom", "--kind", "circ", "--n", "128", "--out", "c.tomo"]);
    ok(d, &["radon", "--in", "c.tomo", "--nt", "128", "--ntheta", "90", "--out", "c.sino"]);
    ok(d, &["backproject", "--method", "bst", "--n", "128", "--in", "c.sino", "--out", "c.bp"]);
    assert!(sidecar_path(&d.join("c.bp")).exists());
    let img = read_image(&d.join("c.bp")).unwrap().into_cartesian().unwrap();
    assert_eq!((img.nx, img.ny), (128, 128));
    assert!(img.values.iter().all(|v| v.is_finite()));
}

#[test]
fn positive_rho0_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["radon", "--kind", "circ", "--analytic", "--nt", "64", "--ntheta", "30", "--out", "c.sino"]);
    let out = tomo(d, &["backproject", "--method", "logpolar", "--rho0", "0.5", "--in", "c.sino", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rho0 must be negative"));
    ok(d, &["backproject", "--method", "logpolar", "--rho0", "-4", "--in", "c.sino", "--out", "lp.bp"]);
}

#[test]
fn unknown_flag_and_missing_file_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = tomo(d, &["phantom", "--kind", "circ", "--bogus", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
    let out = tomo(d, &["backproject", "--method", "naive", "--in", "missing.sino", "--out", "x"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.sino"));
    let out = tomo(d, &["radon", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn engines_agree_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["radon", "--kind", "shepp-logan", "--analytic", "--nt", "64", "--ntheta", "90", "--out", "s.sino"]);
    for m in ["naive", "circles", "bst", "logpolar", "partial"] {
        ok(d, &["backproject", "--method", m, "--in", "s.sino", "--out", &format!("{m}.bp")]);
    }
    let load = |m: &str| read_image(&d.join(format!("{m}.bp"))).unwrap().into_cartesian().unwrap();
    let naive = load("naive");
    assert!(relative_l2(&load("bst"), &naive).unwrap() < 5e-2);
    assert!(relative_l2(&load("circles"), &naive).unwrap() < 5e-2);
    std::fs::write(d.join("sectors.txt"), "# theta0 beta rescale\n0.7853981633974483 0.7853981633974483 0.25\n2.356194490192345 0.7853981633974483 0.25\n").unwrap();
    ok(d, &["backproject", "--method", "partial", "--sectors", "sectors.txt", "--in", "s.sino", "--out", "p.bp"]);
}

#[test]
fn fbp_compare_and_export() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["phantom", "--kind", "shepp-logan", "--n", "64", "--out", "sl.tomo"]);
    ok(d, &["radon", "--kind", "shepp-logan", "--analytic", "--nt", "64", "--ntheta", "90", "--out", "s.sino"]);
    ok(d, &["fbp", "--engine", "naive", "--in", "s.sino", "--out", "r.tomo"]);
    ok(d, &["fbp", "--lambda", "0.01", "--fst", "--in", "s.sino", "--out", "f.tomo"]);
    let out = ok(d, &["compare", "--a", "r.tomo", "--b", "sl.tomo", "--report", "rep.json"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("rel_l2"));
    let rep: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("rep.json")).unwrap()).unwrap();
    assert!(rep["rel_l2"].as_f64().unwrap() < 0.3);
    ok(d, &["export-pgm", "--in", "r.tomo", "--out", "r.pgm"]);
    let pgm = std::fs::read(d.join("r.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n64 64\n65535\n"));
    ok(d, &["export-pgm", "--in", "s.sino", "--out", "s.pgm"]);
}

#[test]
fn noisy_sinograms_are_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for name in ["a.sino", "b.sino"] {
        ok(d, &["radon", "--kind", "points", "--analytic", "--count", "20", "--seed", "3", "--noise-scale", "500", "--nt", "32", "--ntheta", "16", "--out", name]);
    }
    assert_eq!(std::fs::read(d.join("a.sino")).unwrap(), std::fs::read(d.join("b.sino")).unwrap());
}

#[test]
fn small_benchmark_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["bench", "zeropad", "--zs", "1,2", "--n", "64", "--reps", "1", "--out-csv", "z.csv"]);
    let csv = std::fs::read_to_string(d.join("z.csv")).unwrap();
    assert!(csv.starts_with("method,N,Ntheta,z,lambda,seed,wall_ms,mse,rel_l2\n"));
    ok(d, &["bench", "noise", "--levels", "0,0.02", "--methods", "bst", "--n", "64", "--out-csv", "n.csv"]);
    let csv = std::fs::read_to_string(d.join("n.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let out = ok(d, &["bench", "scaling", "--k-max", "1", "--methods", "bst", "--reps", "1", "--out-csv", "s.csv"]);
    assert_eq!(std::fs::read_to_string(d.join("s.csv")).unwrap().lines().count(), 3);
    assert!(String::from_utf8_lossy(&out.stdout).contains("bst: log2(time)/log2(N) slope"));
}
