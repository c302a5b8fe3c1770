use std::path::Path;
use std::process::{Command, Output};

use moment_tubes_cli::output::{sha256_hex, strip_metadata};

fn mtubes(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_mtubes"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn rows(dir: &Path, command: &str) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(dir.join("out").join(format!("{command}.csv"))).unwrap();
    strip_metadata(&text)
        .lines()
        .skip(1)
        .map(|l| l.splitn(11, ',').map(str::to_string).collect())
        .collect()
}

#[test]
fn frenet_identity_at_origin() {
    let dir = tempfile::tempdir().unwrap();
    let out = mtubes(dir.path(), "k = 2\n", &["frenet"]);
    assert_eq!(out.status.code(), Some(0));
    let r = rows(dir.path(), "frenet");
    assert_eq!(r.len(), 100);
    assert_eq!(r[0][5].parse::<f64>().unwrap(), 0.0);
    assert_eq!(r[0][6].parse::<f64>().unwrap(), 0.0);
    let m: Vec<f64> = r[0][10].split(' ').map(|v| v.parse().unwrap()).collect();
    assert_eq!(m, vec![1.0, 0.0, 0.0, 1.0]);
}

#[test]
fn frenet_grid_for_space_curve() {
    let dir = tempfile::tempdir().unwrap();
    let out = mtubes(dir.path(), "k = 3\n[budget]\nfrenet_points = 100\n", &["frenet"]);
    assert_eq!(out.status.code(), Some(0));
    let r = rows(dir.path(), "frenet");
    assert_eq!(r.len(), 100);
    assert!(r.iter().all(|row| row[9] == "pass"));
}

#[test]
fn usage_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = mtubes(dir.path(), "k = 1\n", &["frenet"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("k:"));
    let out = mtubes(dir.path(), "eps_exponents = [-1]\n", &["partition-check"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("eps_exponents"));
}

#[test]
fn partition_check_passes() {
    for config in ["k = 2\neps_exponents = [-6]\n", "k = 3\neps_exponents = [-5]\n"] {
        let dir = tempfile::tempdir().unwrap();
        let out = mtubes(dir.path(), config, &["partition-check"]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let r = rows(dir.path(), "partition-check");
        let defect = r.iter().find(|row| row[0] == "partition_defect").unwrap();
        assert!(defect[6].parse::<f64>().unwrap() <= 1e-8);
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/partition-check.json")).unwrap())
                .unwrap();
        assert_eq!(json["passed"], true);
    }
}

#[test]
fn threshold_table_reports_missing_measurements() {
    let dir = tempfile::tempdir().unwrap();
    let out = mtubes(dir.path(), "eps_exponents = [-4, -5, -6, -7]\np = [3.0]\n", &["threshold-table"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("2^-4"));
}

#[test]
fn l2_ladder_then_certificates() {
    let dir = tempfile::tempdir().unwrap();
    let config = "eps_exponents = [-4, -5, -6, -7]\np = [2.0, 4.0, 5.0]\nnorms = [\"l2\"]\n";
    let out = mtubes(dir.path(), config, &["eta-norms"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let slope = rows(dir.path(), "eta-norms").into_iter().find(|r| r[0] == "l2_slope").unwrap();
    assert!((slope[6].parse::<f64>().unwrap() - 1.0).abs() <= 0.05);
    let out = mtubes(dir.path(), config, &["threshold-table"]);
    assert_eq!(out.status.code(), Some(0));
    let certs: Vec<Vec<String>> = rows(dir.path(), "threshold-table")
        .into_iter()
        .filter(|r| r[0] == "certificate")
        .collect();
    assert!(certs[0][10].starts_with("VanishingCertified"));
    assert!(certs[1][10].starts_with("NotCertified") && certs[1][8].parse::<f64>().unwrap() == 0.0);
    assert!(certs[2][10].starts_with("NotCertified"));
}

#[test]
fn ack_verdicts_and_plot_script() {
    let dir = tempfile::tempdir().unwrap();
    let out = mtubes(dir.path(), "[ack]\nshells = [5, 9]\np = [3.0, 4.0, 5.0]\n", &["ack", "--budget", "1000"]);
    assert_eq!(out.status.code(), Some(0));
    let verdicts: Vec<String> = rows(dir.path(), "ack")
        .into_iter()
        .filter(|r| r[0] == "beta")
        .map(|r| r[10].clone())
        .collect();
    assert_eq!(verdicts, ["Divergent", "NearCritical", "Convergent"]);
    assert!(dir.path().join("out/ack_plot.py").exists());
}

#[test]
fn bodies_identical_across_thread_counts() {
    let bodies: Vec<String> = [1, 3]
        .iter()
        .map(|threads| {
            let dir = tempfile::tempdir().unwrap();
            let config = format!("threads = {threads}\nseed = 9\n[ack]\nshells = [4, 8]\np = [3.0, 5.0]\n");
            let out = mtubes(dir.path(), &config, &["ack", "--budget", "600"]);
            assert_eq!(out.status.code(), Some(0));
            let text = std::fs::read_to_string(dir.path().join("out/ack.csv")).unwrap();
            let body = strip_metadata(&text);
            assert!(text.contains(&format!("# body-sha256: {}", sha256_hex(&body))));
            body
        })
        .collect();
    assert_eq!(bodies[0], bodies[1]);
}
