use qcarea::geometry::Disk;
use qcarea::measure::Region;
use qcarea::transforms::{sample_cell_average, GridSpec};
use qcarea::C64;
use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcarea"))
        .args(args)
        .env_remove("QCAREA_OUTPUT_DIR")
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn verify_first_bound_passes() {
    let out = run(&["verify", "th1i", "--p", "0.5", "--r", "0.6", "--K", "2", "--samples", "100000", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    let rep = &v[0];
    assert_eq!(rep["theorem"], "th1i");
    assert_eq!(rep["K"], 2.0);
    assert_eq!(rep["pass"], true);
    assert!(rep.get("runtime_ms").is_none());
}

#[test]
fn singular_integral_at_zero_pole() {
    let out = run(&["verify", "th3", "--p", "0", "--r", "0.5", "--grid-n", "256"]);
    assert_eq!(out.status.code(), Some(0));
    let rep = &json(&out)[0];
    let rhs = rep["rhs"].as_f64().unwrap();
    // |E| log(π/|E|) with |E| = π/4.
    let e = std::f64::consts::PI / 4.0;
    assert!((rhs - e * 4f64.ln()).abs() < 1e-12);
    assert!((rep["lhs"].as_f64().unwrap() / rhs - 1.0).abs() < 0.02);
}

#[test]
fn configuration_errors_exit_two() {
    assert_eq!(run(&["verify", "th1i", "--p", "1.2"]).status.code(), Some(2));
    assert_eq!(run(&["verify", "th1i", "--K", "2", "--k", "0.3"]).status.code(), Some(2));
    assert_eq!(run(&["verify", "th1i", "--K", "0.5"]).status.code(), Some(2));
    assert_eq!(run(&["verify", "th1i", "--samples", "10"]).status.code(), Some(2));
    assert_eq!(run(&["sweep", "th1i", "--ps", "0", "--rs", "0.5", "--Ks", "2", "--tol", "0.01"]).status.code(), Some(2));
    assert_eq!(run(&["verify", "th1i", "--mask", "nowhere.txt"]).status.code(), Some(2));
    assert_eq!(run(&["bogus"]).status.code(), Some(2));
}

#[test]
fn csv_sweep_has_one_row_per_point() {
    let out = run(&[
        "sweep", "th1ii", "--ps", "0,0.4", "--rs", "0.9,0.99", "--Ks", "2", "--samples", "100000", "--format", "csv",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("theorem,check,floor,map"));
    assert_eq!(lines.len(), 5);
    assert!(lines[1..].iter().all(|l| l.starts_with("th1ii,")));
}

#[test]
fn sweep_reads_point_files() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("points.txt");
    std::fs::write(&file, "# p r K\n0.0 0.6 2\n0.3, 0.7, 1.5\n").unwrap();
    let out = run(&["sweep", "th1i", "--points", file.to_str().unwrap(), "--samples", "100000"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["reports"].as_array().unwrap().len(), 2);
    assert_eq!(v["reports"][1]["p"], 0.3);
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_qcarea"))
        .args(["verify", "th1iii", "--p", "0.2", "--r", "0.7", "--K", "1.5"])
        .env("QCAREA_OUTPUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_slice(&std::fs::read(dir.path().join("th1iii.json")).unwrap()).unwrap();
    assert_eq!(v[0]["pass"], true);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let args = ["verify", "th2", "--p", "0.4", "--r", "0.7", "--K", "2", "--samples", "100000", "--seed", "11"];
    let (a, b) = (run(&args), run(&args));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let args = ["verify", "th2", "--p", "0.4", "--r", "0.7", "--K", "2", "--samples", "100000", "--seed", "11", "--sequential"];
    assert_eq!(run(&args).stdout, a.stdout);
}

fn write_mu(path: &Path, amp: f64) {
    let grid = GridSpec::new(4.0, 64).unwrap();
    let f = sample_cell_average(|z| if z.norm() < 0.6 { C64::new(amp, 0.0) * z } else { C64::new(0.0, 0.0) }, grid)
        .unwrap()
        .with_support(Region::Disk(Disk::unit()));
    f.save(path).unwrap();
}

#[test]
fn solve_writes_fields_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let mu = dir.path().join("mu.dump");
    write_mu(&mu, 0.4);
    let out_dir = dir.path().join("out");
    let out = run(&["solve", "--mu", mu.to_str().unwrap(), "--p", "0.3", "--output", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["w.dump", "dg.dump", "g.dump"] {
        assert!(out_dir.join(f).is_file(), "{f}");
    }
    let s: Value = serde_json::from_slice(&std::fs::read(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(s["grid_n"], 64);
    assert!(s["residual"].as_f64().unwrap() <= s["tol"].as_f64().unwrap());
    // A one-step cap cannot reach the default tolerance.
    let out = run(&["solve", "--mu", mu.to_str().unwrap(), "--p", "0.3", "--max-iter", "1", "--output", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    // A stated bound below the field's supremum is a configuration error.
    let out = run(&["solve", "--mu", mu.to_str().unwrap(), "--p", "0.3", "--k", "0.01", "--output", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn selftest_passes_on_coarse_grid() {
    let out = run(&["selftest", "transforms", "--grid-n", "256"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(json(&out)["pass"], true);
}
