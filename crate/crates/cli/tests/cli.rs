use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::Value;
use tempfile::TempDir;

use mtc_core::special_math::{std_normal_cdf, std_normal_quantile};

fn mtc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mtc"))
        .args(args)
        .env_remove("MTC_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// 1000 standard normal values with index 417 replaced by 10.
fn spiked_input(dir: &Path) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut x: Vec<f64> = (0..1000).map(|_| StandardNormal.sample(&mut rng)).collect();
    x[417] = 10.0;
    let path = dir.join("z.txt");
    let body: Vec<String> = x.iter().map(|v| v.to_string()).collect();
    std::fs::write(&path, format!("z\n{}\n", body.join("\n"))).unwrap();
    path
}

fn json(o: &Output) -> Value {
    assert_eq!(o.status.code(), Some(0), "stderr: {}", stderr(o));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn test_flags_the_spike() {
    let dir = TempDir::new().unwrap();
    let input = spiked_input(dir.path());
    let input = input.to_str().unwrap();
    let out = mtc(&["test", "--input", input, "--alpha", "0.05", "--sides", "two"]);
    let v = json(&out);
    assert_eq!(v["method"], "gnp-mom");
    assert_eq!(v["n"], 1000);
    assert_eq!(v["rho_source"], "estimated");
    assert_eq!(v["m_stat"], 10.0);
    assert_eq!(v["reject_global"], true);
    let idx: Vec<u64> = v["significant_indices"].as_array().unwrap().iter().map(|i| i.as_u64().unwrap()).collect();
    assert!(idx.contains(&417), "{idx:?}");
    for key in ["rho_hat", "p_value", "alpha", "critical_value", "estimator_flags"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert!(v["estimator_flags"]["sample_variance"].as_f64().unwrap() > 0.0);

    let again = mtc(&["test", "--input", input, "--alpha", "0.05", "--sides", "two"]);
    assert_eq!(out.stdout, again.stdout);
}

#[test]
fn known_independence_gives_the_sidak_p_value() {
    let dir = TempDir::new().unwrap();
    let input = spiked_input(dir.path());
    // A moderate maximum so the p-value is not rounded to zero.
    let text = std::fs::read_to_string(&input).unwrap().replace("\n10\n", "\n3.9\n");
    std::fs::write(&input, text).unwrap();
    let v = json(&mtc(&["test", "--input", input.to_str().unwrap(), "--rho-override", "0"]));
    assert_eq!(v["rho_source"], "override");
    assert_eq!(v["rho_hat"], 0.0);
    assert!(v["estimator_flags"].is_null());
    let m = v["m_stat"].as_f64().unwrap();
    let sidak = 1.0 - (2.0 * std_normal_cdf(m) - 1.0).powi(1000);
    assert!((v["p_value"].as_f64().unwrap() - sidak).abs() <= 1e-9);
}

#[test]
fn baseline_methods_report() {
    let dir = TempDir::new().unwrap();
    let input = spiked_input(dir.path());
    let input = input.to_str().unwrap();
    for method in ["bonferroni", "hmp", "hmp-adj", "fisher"] {
        let v = json(&mtc(&["test", "--input", input, "--method", method]));
        assert_eq!(v["method"], method);
        assert!(v["rho_hat"].is_null());
        let p = v["p_value"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&p));
    }
    let v = json(&mtc(&["test", "--input", input, "--method", "bonferroni"]));
    let c = v["critical_value"].as_f64().unwrap();
    assert!((c + std_normal_quantile(0.05 / 2000.0).unwrap()).abs() < 1e-12);
    assert_eq!(v["significant_indices"], serde_json::json!([417]));
}

#[test]
fn critical_value_output() {
    let out = mtc(&["critical-value", "--n", "1", "--rho", "0", "--alpha", "0.05", "--sides", "two"]);
    assert_eq!(stdout(&out), "1.959963985\n");

    let out = mtc(&["critical-value", "--n", "1000", "--rho", "0", "--output-format", "json"]);
    let text = stdout(&out);
    let mut lines = text.lines();
    let c: f64 = lines.next().unwrap().parse().unwrap();
    let expected = std_normal_quantile((1.0 + 0.95f64.powf(0.001)) / 2.0).unwrap();
    assert!((c - expected).abs() < 1e-8, "{c} vs {expected}");
    let record: Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert_eq!(record["n"], 1000);
    assert!((record["critical_value"].as_f64().unwrap() - expected).abs() < 1e-8);
}

#[test]
fn exit_status_for_bad_input() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "1.0\nabc\n2.0\n").unwrap();
    let out = mtc(&["test", "--input", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 2"));

    let out = mtc(&["test", "--input", dir.path().join("missing.txt").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let out = mtc(&["test", "--input", bad.to_str().unwrap(), "--alpha", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--alpha"));

    let out = mtc(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(mtc(&["--help"]).status.code(), Some(0));
}

#[test]
fn exit_status_for_numerical_failure() {
    // A tolerance no quadrature can meet forces the adaptive fallback to give up.
    let out = mtc(&["critical-value", "--n", "100", "--rho", "0.5", "--quad-tol", "1e-300"]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr(&out));
}

#[test]
fn config_file_and_precedence() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("mtc.toml");
    std::fs::write(&cfg, "alpha = 0.01\nrho = 0.0\nn = 1\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let from_file = stdout(&mtc(&["critical-value", "--config", cfg]));
    assert_eq!(from_file.trim(), format!("{:.9}", -std_normal_quantile(0.005).unwrap()));
    let flag_wins = stdout(&mtc(&["critical-value", "--config", cfg, "--alpha", "0.05"]));
    assert_eq!(flag_wins, "1.959963985\n");

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "alpha = 0.05\nalhpa = 0.1\n").unwrap();
    let out = mtc(&["critical-value", "--config", bad.to_str().unwrap(), "--n", "2", "--rho", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("alhpa"));
}

#[test]
fn simulate_size_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let args = |p: &Path| {
        vec!["simulate-size", "--seed", "42", "--n", "100", "--replicates", "300", "--output"]
            .into_iter()
            .map(String::from)
            .chain([p.to_str().unwrap().to_string()])
            .collect::<Vec<_>>()
    };
    for p in [&a, &b] {
        let argv = args(p);
        let out = mtc(&argv.iter().map(String::as_str).collect::<Vec<_>>());
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        assert!(stderr(&out).contains("gnp-mom"));
    }
    let a = std::fs::read(&a).unwrap();
    assert_eq!(a, std::fs::read(&b).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("method,n,rho,alpha,sweep_value,rejection_rate,se,replicates,seed\n"));
    assert_eq!(text.lines().count(), 1 + 4 * 3 * 5);
}

#[test]
fn simulate_size_ignores_worker_count() {
    let one = mtc(&["simulate-size", "--seed", "9", "--workers", "1"]);
    let eight = mtc(&["simulate-size", "--seed", "9", "--workers", "8"]);
    assert_eq!(one.status.code(), Some(0));
    assert!(!one.stdout.is_empty());
    assert_eq!(one.stdout, eight.stdout);
}

#[test]
fn seed_environment_fallback() {
    let base = ["simulate-size", "--n", "20", "--rho", "0.2", "--replicates", "100"];
    let with_env = Command::new(env!("CARGO_BIN_EXE_mtc"))
        .args(base)
        .env("MTC_SEED", "31")
        .output()
        .unwrap();
    let with_flag = mtc(&[&base[..], &["--seed", "31"]].concat());
    let default = mtc(&base);
    assert_eq!(with_env.stdout, with_flag.stdout);
    assert_ne!(with_env.stdout, default.stdout);
}

#[test]
fn sparse_power_ordering() {
    let out = mtc(&[
        "simulate-power", "--scenario", "sparse-single", "--rho", "0.9", "--alpha", "0.1",
        "--replicates", "500", "--seed", "4", "--output-format", "json",
    ]);
    let rows = json(&out);
    let rate = |method: &str| {
        rows.as_array()
            .unwrap()
            .iter()
            .find(|r| r["method"] == method && r["sweep_value"] == 3.0)
            .unwrap()["rejection_rate"]
            .as_f64()
            .unwrap()
    };
    let gnp = rate("gnp-mom");
    for other in ["bonferroni", "hmp", "hmp-adj", "fisher"] {
        assert!(gnp >= rate(other), "gnp {gnp} < {other} {}", rate(other));
    }
}

#[test]
fn selection_output() {
    let out = mtc(&["simulate-selection", "--n", "200", "--replicates", "3", "--seed", "2"]);
    let recs = json(&out);
    let recs = recs.as_array().unwrap();
    assert_eq!(recs.len(), 3);
    for r in recs {
        assert_eq!(r["plotted_statistics"].as_array().unwrap().len(), 200);
        if r["reject_global"] == true {
            assert!(r["flagged"].as_array().unwrap().contains(&r["argmax"]));
        }
    }
    let csv = stdout(&mtc(&["simulate-selection", "--n", "200", "--output-format", "csv"]));
    assert!(csv.starts_with("replicate,rho,alpha,shift,index,value,non_null,flagged,critical_value\n"));
    assert_eq!(csv.lines().count(), 201);
    let out = mtc(&["simulate-selection", "--n", "201"]);
    assert_eq!(out.status.code(), Some(2));
}
