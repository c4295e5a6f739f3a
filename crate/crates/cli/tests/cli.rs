//! End-to-end tests of the binary: exit codes, JSON shapes, determinism.

use std::path::Path;
use std::process::{Command, Output};

use bayesdr::data::{Dataset, RngStream};
use bayesdr::sim::{generate, Scenario, ScenarioId};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bayesdr"))
}

fn write_csv(data: &Dataset, path: &Path) {
    let meta = data.std_meta();
    let p = data.p();
    let mut out = String::from("y,treat");
    for j in 0..p {
        out.push_str(&format!(",x{j}"));
    }
    out.push('\n');
    for i in 0..data.n() {
        out.push_str(&format!("{},{}", data.y()[i], data.t()[i]));
        for j in 0..p {
            out.push_str(&format!(
                ",{}",
                data.x()[[i, j]] * meta[j].sd + meta[j].mean
            ));
        }
        out.push('\n');
    }
    std::fs::write(path, out).unwrap();
}

fn linear_csv(dir: &Path, n: usize, p: usize, seed: u64) -> std::path::PathBuf {
    let sc = Scenario::new(ScenarioId::LinearBinary, n, p).unwrap();
    let (data, _) = generate(&sc, &RngStream::new(seed)).unwrap();
    let path = dir.join("lin.csv");
    write_csv(&data, &path);
    path
}

fn continuous_csv(dir: &Path, n: usize, p: usize, seed: u64) -> std::path::PathBuf {
    let sc = Scenario::new(ScenarioId::Continuous, n, p).unwrap();
    let (data, _) = generate(&sc, &RngStream::new(seed)).unwrap();
    let path = dir.join("cont.csv");
    write_csv(&data, &path);
    path
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    serde_json::from_str(&text).expect("stdout is one JSON document")
}

#[test]
fn ate_reports_point_and_interval_near_truth() {
    let dir = tempfile::tempdir().unwrap();
    let csv = linear_csv(dir.path(), 100, 100, 41);
    let out = bin()
        .args([
            "ate",
            "--input",
            csv.to_str().unwrap(),
            "--treatment-col",
            "treat",
            "--outcome-col",
            "y",
            "--prior",
            "linear",
            "--draws",
            "800",
            "--burnin",
            "400",
            "--bootstrap",
            "50",
            "--seed",
            "7",
        ])
        .output()
        .unwrap();
    let doc = stdout_json(&out);
    let r = &doc["report"];
    let point = r["point"].as_f64().unwrap();
    let (lo, hi) = (r["ci"][0].as_f64().unwrap(), r["ci"][1].as_f64().unwrap());
    assert!(point > 0.5 && point < 1.5, "point {point}");
    assert!(lo <= 1.0 && 1.0 <= hi, "ci ({lo}, {hi})");
    assert_eq!(r["M"].as_u64().unwrap(), 50);
    assert_eq!(r["B"].as_u64().unwrap(), 200);
    assert_eq!(doc["config"]["seed"].as_u64().unwrap(), 7);
    assert_eq!(doc["models"]["outcome"]["family"], "linear");
    // inclusion probabilities present for all covariates
    assert_eq!(
        doc["models"]["outcome"]["inclusion"].as_array().unwrap().len(),
        100
    );
}

#[test]
fn missing_column_exits_2_with_error_json() {
    let dir = tempfile::tempdir().unwrap();
    let csv = linear_csv(dir.path(), 30, 5, 1);
    let out = bin()
        .args([
            "ate",
            "--input",
            csv.to_str().unwrap(),
            "--treatment-col",
            "treat",
            "--outcome-col",
            "nope",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&out.stderr)).unwrap();
    assert!(err["error"]["message"].as_str().unwrap().contains("nope"));
}

#[test]
fn too_few_draws_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let csv = linear_csv(dir.path(), 30, 5, 2);
    let out = bin()
        .args([
            "ate",
            "--input",
            csv.to_str().unwrap(),
            "--treatment-col",
            "treat",
            "--outcome-col",
            "y",
            "--prior",
            "linear",
            "--draws",
            "4",
            "--burnin",
            "2",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    let err: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&out.stderr)).unwrap();
    assert_eq!(err["error"]["kind"], "requires_two_draws");
}

#[test]
fn reruns_and_thread_counts_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let csv = linear_csv(dir.path(), 60, 6, 3);
    let run = |threads: &str| {
        bin()
            .args([
                "ate",
                "--input",
                csv.to_str().unwrap(),
                "--treatment-col",
                "treat",
                "--outcome-col",
                "y",
                "--prior",
                "linear",
                "--draws",
                "400",
                "--burnin",
                "200",
                "--bootstrap",
                "30",
                "--seed",
                "11",
                "--threads",
                threads,
            ])
            .output()
            .unwrap()
            .stdout
    };
    let a = run("1");
    let b = run("1");
    let c = run("4");
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn curve_writes_plot_ready_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = continuous_csv(dir.path(), 80, 3, 4);
    let out_json = dir.path().join("curve.json");
    let out = bin()
        .args([
            "curve",
            "--input",
            csv.to_str().unwrap(),
            "--treatment-col",
            "treat",
            "--outcome-col",
            "y",
            "--prior",
            "spline",
            "--draws",
            "400",
            "--burnin",
            "200",
            "--bootstrap",
            "20",
            "--seed",
            "5",
            "--out",
            out_json.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    let doc = stdout_json(&out);
    assert_eq!(doc["report"]["points"].as_array().unwrap().len(), 20);
    let csv_text = std::fs::read_to_string(dir.path().join("curve.csv")).unwrap();
    let lines: Vec<&str> = csv_text.lines().collect();
    assert_eq!(lines[0], "t,point,lo,hi");
    assert_eq!(lines.len(), 21);
    let ts: Vec<f64> = lines[1..]
        .iter()
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    for w in ts.windows(2) {
        assert!(w[1] > w[0], "t column not monotone");
    }
    assert!(out_json.exists());
}

#[test]
fn constant_outcome_gives_flat_curve() {
    let dir = tempfile::tempdir().unwrap();
    let sc = Scenario::new(ScenarioId::Continuous, 60, 3).unwrap();
    let (data, _) = generate(&sc, &RngStream::new(6)).unwrap();
    // overwrite y with a constant
    let path = dir.path().join("const.csv");
    let meta = data.std_meta();
    let mut text = String::from("y,treat,x0,x1,x2\n");
    for i in 0..data.n() {
        text.push_str(&format!("4.5,{}", data.t()[i]));
        for j in 0..3 {
            text.push_str(&format!(
                ",{}",
                data.x()[[i, j]] * meta[j].sd + meta[j].mean
            ));
        }
        text.push('\n');
    }
    std::fs::write(&path, text).unwrap();
    let out = bin()
        .args([
            "curve",
            "--input",
            path.to_str().unwrap(),
            "--treatment-col",
            "treat",
            "--outcome-col",
            "y",
            "--prior",
            "linear",
            "--draws",
            "400",
            "--burnin",
            "200",
            "--bootstrap",
            "20",
            "--seed",
            "8",
        ])
        .output()
        .unwrap();
    let doc = stdout_json(&out);
    for pt in doc["report"]["points"].as_array().unwrap() {
        let v = pt["point"].as_f64().unwrap();
        assert!((v - 4.5).abs() < 0.15, "curve point {v} not flat at 4.5");
        let (lo, hi) = (pt["lo"].as_f64().unwrap(), pt["hi"].as_f64().unwrap());
        assert!(lo <= 4.5 && 4.5 <= hi);
    }
}

#[test]
fn simulate_writes_deterministic_tables() {
    let dir = tempfile::tempdir().unwrap();
    let prefix1 = dir.path().join("s1");
    let prefix2 = dir.path().join("s2");
    let run = |prefix: &Path| {
        let out = bin()
            .args([
                "simulate",
                "--scenario",
                "linear_binary",
                "--reps",
                "3",
                "--n",
                "60",
                "--p",
                "5",
                "--prior",
                "linear",
                "--draws",
                "300",
                "--burnin",
                "150",
                "--bootstrap",
                "20",
                "--seed",
                "21",
                "--out",
                prefix.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert!(out.status.success());
    };
    run(&prefix1);
    run(&prefix2);
    let csv1 = std::fs::read(dir.path().join("s1.csv")).unwrap();
    let csv2 = std::fs::read(dir.path().join("s2.csv")).unwrap();
    assert_eq!(csv1, csv2);
    let text = String::from_utf8(csv1).unwrap();
    let row = text.lines().nth(1).unwrap();
    let coverage: f64 = row.split(',').nth(7).unwrap().parse().unwrap();
    assert!((0.0..=1.0).contains(&coverage));
    // JSON files identical except for nothing (same config echoed)
    let j1 = std::fs::read(dir.path().join("s1.json")).unwrap();
    let j2 = std::fs::read(dir.path().join("s2.json")).unwrap();
    let v1: serde_json::Value = serde_json::from_slice(&j1).unwrap();
    let v2: serde_json::Value = serde_json::from_slice(&j2).unwrap();
    assert_eq!(v1["metrics"], v2["metrics"]);
}

#[test]
fn config_file_fills_and_cli_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let csv = linear_csv(dir.path(), 40, 5, 9);
    let cfg_path = dir.path().join("run.cfg");
    std::fs::write(
        &cfg_path,
        format!(
            "# demo config\ninput={}\ntreatment-col=treat\noutcome-col=WRONG\nprior=linear\ndraws=300\nburnin=150\nbootstrap=20\n",
            csv.display()
        ),
    )
    .unwrap();
    // config alone fails on the bad outcome column
    let out = bin()
        .args(["ate", "--config", cfg_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    // CLI flag overrides the config value
    let out = bin()
        .args([
            "ate",
            "--config",
            cfg_path.to_str().unwrap(),
            "--outcome-col",
            "y",
            "--seed",
            "3",
        ])
        .output()
        .unwrap();
    let doc = stdout_json(&out);
    assert_eq!(doc["config"]["outcome_col"], "y");
    assert_eq!(doc["config"]["draws"].as_u64().unwrap(), 300);
}

#[test]
fn fit_subcommand_reports_model_summary() {
    let dir = tempfile::tempdir().unwrap();
    let csv = linear_csv(dir.path(), 60, 6, 10);
    let out = bin()
        .args([
            "fit",
            "--input",
            csv.to_str().unwrap(),
            "--treatment-col",
            "treat",
            "--outcome-col",
            "y",
            "--prior",
            "spline",
            "--role",
            "treatment",
            "--draws",
            "300",
            "--burnin",
            "150",
            "--seed",
            "12",
        ])
        .output()
        .unwrap();
    let doc = stdout_json(&out);
    assert_eq!(doc["model"]["role"], "treatment");
    assert_eq!(doc["model"]["family"], "spline");
    assert!(doc["model"]["waic"].as_f64().unwrap().is_finite());
    assert_eq!(doc["draws_kept"].as_u64().unwrap(), 75);
}
