use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mgd_cli::fieldfile::FieldFile;
use serde_json::Value;

fn mgd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mgd"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

/// Laplace-like values from a fixed integer recurrence, no RNG crate needed.
fn write_series(path: &Path, n: usize) {
    let mut s = String::from("x\n");
    let mut state = 12345u64;
    for _ in 0..n {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let u = ((state >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
        let v = if u < 0.5 { (2.0 * u).ln() } else { -(2.0 * (1.0 - u)).ln() };
        s.push_str(&format!("{v}\n"));
    }
    fs::write(path, s).unwrap();
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn sample_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("x.csv");
    write_series(&data, 2000);
    let out = dir.path().join("run");
    let summary = json(&mgd(&[
        "sample", "--data", p(&data), "--family", "monomial:4", "--sigma2", "1", "--n-rep", "1000", "--n-mc", "4000",
        "--seed", "7", "-o", p(&out),
    ]));
    for f in ["samples.f64", "samples.f64.json", "trace.csv", "summary.json", "config.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    assert_eq!(summary["n_steps"], 1400);
    assert_eq!(summary["seed"], 7);
    // The first step absorbs the mismatch between the initial draw and m_0.
    assert!(summary["moment_residual_final"].as_f64().unwrap() < 1e-2);
    assert!(summary["moment_residual_max"].as_f64().unwrap().is_finite());
    assert!(summary["H_star"].as_f64().unwrap().is_finite());
    let samples = FieldFile::read(&out.join("samples.f64")).unwrap();
    assert_eq!(samples.dims(), &[1000]);
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1401);
    let on_disk: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(on_disk["config_hash"], summary["config_hash"]);
}

#[test]
fn deterministic_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("x.csv");
    write_series(&data, 500);
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        json(&mgd(&[
            "--deterministic", "--threads", threads, "sample", "--data", p(&data), "--family", "abs", "--sigma2", "0.5",
            "--n-rep", "300", "--n-mc", "1000", "-o", p(&out),
        ]));
        fs::read(out.join("samples.f64")).unwrap()
    };
    let a = run("a", "1");
    assert_eq!(a, run("b", "1"));
    assert_eq!(a, run("c", "3"));
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("x.csv");
    write_series(&data, 500);
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        format!(r#"{{"family": "abs", "sigma2": [0.2, 0.4, 0.8], "n_rep": 400, "n_mc": 1000, "data": "{}"}}"#, p(&data)),
    )
    .unwrap();
    let out = dir.path().join("sweep");
    let s = json(&mgd(&["sweep", "--config", p(&cfg), "--target", "abs:0,1", "--bins", "40", "-o", p(&out)]));
    assert_eq!(s["runs"].as_array().unwrap().len(), 3);
    let table = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 4);
    assert!(table.starts_with("sigma2,n_steps,h_star"));
    // H_* grows with σ² on the same data.
    let h: Vec<f64> = s["runs"].as_array().unwrap().iter().map(|r| r["H_star"].as_f64().unwrap()).collect();
    assert!(h[0] < h[2], "{h:?}");
}

#[test]
fn exit_codes_separate_config_and_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    assert_eq!(mgd(&["sample", "--data", p(&missing)]).status.code(), Some(3));
    assert_eq!(mgd(&["sample", "--family", "nonsense"]).status.code(), Some(2));
    assert_eq!(mgd(&["sample"]).status.code(), Some(2));
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"sigma2": [1.0], "colour": "blue"}"#).unwrap();
    assert_eq!(mgd(&["sample", "--config", p(&cfg)]).status.code(), Some(2));

    let nan = dir.path().join("nan.csv");
    fs::write(&nan, "1\n2\nnan\n4\n").unwrap();
    let out = mgd(&["sample", "--data", p(&nan), "-o", p(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("position"));

    let short = dir.path().join("short.f64");
    fs::write(&short, [0u8; 12]).unwrap();
    fs::write(dir.path().join("short.f64.json"), r#"{"dims":[2],"dtype":"f64","endianness":"little","layout":"row-major"}"#)
        .unwrap();
    assert_eq!(mgd(&["entropy", p(&short)]).status.code(), Some(3));
}

#[test]
fn ingest_series_then_scatter() {
    let dir = tempfile::tempdir().unwrap();
    let prices = dir.path().join("prices.csv");
    let mut s = String::from("close\n");
    let mut price = 100.0_f64;
    for i in 0..150 {
        price *= (0.01 * ((i * 37 % 11) as f64 - 5.0) / 5.0).exp();
        s.push_str(&format!("{price}\n"));
    }
    fs::write(&prices, s).unwrap();
    let out = dir.path().join("ret.f64");
    let stats = json(&mgd(&["ingest", "series", p(&prices), "--log-returns", "--scattering", "-o", p(&out)]));
    assert_eq!(stats["dims_out"][0], 128);
    assert_eq!(stats["cropped"], true);
    let f = FieldFile::read(&out).unwrap();
    let mean = f.values.iter().sum::<f64>() / 128.0;
    assert!(mean.abs() < 1e-12);

    let csv = mgd(&["scatter", p(&out), "-J", "3", "-L", "1"]);
    assert!(csv.status.success());
    let text = String::from_utf8(csv.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("mean_modulus_0"));
    assert_eq!(lines[0].split(',').count(), lines[1].split(',').count());
}

#[test]
fn scattering_rejects_non_dyadic_fields() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("f.f64");
    FieldFile::new(vec![2, 12, 12], vec![0.25; 288]).unwrap().write(&f).unwrap();
    assert_eq!(mgd(&["scatter", p(&f), "-J", "1", "-L", "4"]).status.code(), Some(3));
}

#[test]
fn constant_prices_are_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let prices = dir.path().join("flat.csv");
    fs::write(&prices, "5\n5\n5\n5\n5\n").unwrap();
    let out = mgd(&["ingest", "series", p(&prices), "--log-returns", "-o", p(&dir.path().join("r.f64"))]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn entropy_of_a_uniform_grid() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("u.csv");
    let s: String = (0..10_000).map(|i| format!("{}\n", (i as f64 + 0.5) / 10_000.0)).collect();
    fs::write(&f, s).unwrap();
    let v = json(&mgd(&["entropy", p(&f), "--bins", "100"]));
    assert_eq!(v["n"], 10_000);
    assert!(v["entropy"].as_f64().unwrap().abs() < 1e-2);
}

#[test]
fn benchmark_writes_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = mgd(&[
        "benchmark", "--betas", "0.4", "--chains", "1000", "--nrep", "1000", "--kl-target", "0.05", "--max-steps", "500",
        "-o", p(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(dir.path().join("barrier.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(table.contains(",MALA,") && table.contains(",MGD,"));
}
