use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use clap::Parser;
use glassotto_cli::{run, Cli};
use serde_json::Value;
use sha2::{Digest, Sha256};

fn glassotto(out: &Path, args: &[&str]) -> PathBuf {
    let mut argv = vec!["glassotto"];
    argv.extend_from_slice(args);
    argv.extend_from_slice(&["--out", out.to_str().unwrap()]);
    run(Cli::try_parse_from(argv).unwrap()).unwrap()
}

fn lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(String::from)
        .collect()
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let k = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[k].to_string()).collect()
}

#[test]
fn critical_field_schema() {
    let dir = tempfile::tempdir().unwrap();
    glassotto(
        dir.path(),
        &["critical-field", "--n-list", "10,100,1000,10000", "--samples", "400"],
    );
    let csv = dir.path().join("critical_field.csv");
    assert_eq!(lines(&csv)[0], "n,mean_h_c,stderr_h_c,samples");
    let means: Vec<f64> = column(&csv, "mean_h_c").iter().map(|v| v.parse().unwrap()).collect();
    assert_eq!(means.len(), 4);
    assert!(means.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn single_sample_stderr_is_nan() {
    let dir = tempfile::tempdir().unwrap();
    glassotto(dir.path(), &["critical-field", "--n", "50", "--samples", "1"]);
    assert_eq!(column(&dir.path().join("critical_field.csv"), "stderr_h_c"), ["NaN"]);
}

#[test]
fn regime_map_schema_and_equal_bath_row() {
    let dir = tempfile::tempdir().unwrap();
    glassotto(
        dir.path(),
        &[
            "regime-map",
            "--th",
            "0.3",
            "--n",
            "10",
            "--tc-points",
            "4",
            "--hi-points",
            "6",
            "--realizations",
            "20",
        ],
    );
    let csv = dir.path().join("regime_map.csv");
    assert_eq!(
        lines(&csv)[0],
        "t_c,h_i,mean_q_c,mean_q_h,mean_w,regime,engine_fraction,refrigerator_fraction,heater_fraction,accelerator_fraction"
    );
    let t_c = column(&csv, "t_c");
    let regime = column(&csv, "regime");
    let engine = column(&csv, "engine_fraction");
    assert_eq!(t_c.len(), 24);
    // The last cold-bath row sits exactly at t_h.
    for k in 18..24 {
        assert_eq!(t_c[k].parse::<f64>().unwrap(), 0.3);
        assert_ne!(regime[k], "engine");
        assert_eq!(engine[k].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn sweep_schema_rows_and_clipping() {
    let dir = tempfile::tempdir().unwrap();
    glassotto(
        dir.path(),
        &[
            "sweep",
            "--th",
            "0.2",
            "--n-list",
            "8,10,12",
            "--hi-points",
            "26",
            "--realizations",
            "32",
        ],
    );
    let csv = dir.path().join("sweep.csv");
    assert_eq!(
        lines(&csv)[0],
        "n,h_i,w_per_spin,stderr_w,pi_per_spin,pi_r_per_spin,eta,eta_r,regime,h_c_mean,griffiths_marker"
    );
    let w = column(&csv, "w_per_spin");
    let pi = column(&csv, "pi_per_spin");
    let pi_r = column(&csv, "pi_r_per_spin");
    assert_eq!(w.len(), 3 * 26);
    for k in 0..w.len() {
        let w: f64 = w[k].parse().unwrap();
        if w < 0.0 {
            assert_eq!(pi[k].parse::<f64>().unwrap(), 0.0);
        }
        if w > 0.0 {
            assert_eq!(pi_r[k].parse::<f64>().unwrap(), 0.0);
        }
    }
    let markers = column(&csv, "griffiths_marker");
    assert_eq!(markers.iter().filter(|m| *m == "critical").count(), 3);
    assert!(markers.iter().all(|m| [
        "none",
        "critical",
        "weakly_ordered",
        "strongly_ordered",
        "weakly_disordered",
        "strongly_disordered"
    ]
    .contains(&m.as_str())));
}

#[test]
fn planted_scaling_recovers_exponent() {
    let dir = tempfile::tempdir().unwrap();
    glassotto(
        dir.path(),
        &[
            "scaling",
            "--planted-alpha",
            "1.37",
            "--n-list",
            "16,24,32,48",
            "--th-min",
            "0.2",
            "--th-max",
            "0.6",
            "--th-points",
            "3",
        ],
    );
    let csv = dir.path().join("scaling.csv");
    assert_eq!(
        lines(&csv)[0],
        "t_h,t_c,quantity,peak,n,h_peak,height_per_spin,height_total,midpoint,alpha,b,r_squared"
    );
    // 3 temperatures x 2 tracked peaks x 4 sizes.
    let alpha = column(&csv, "alpha");
    assert_eq!(alpha.len(), 24);
    for a in alpha {
        assert!((a.parse::<f64>().unwrap() - 1.37).abs() < 1e-12);
    }
    let json: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("peaks.json")).unwrap()).unwrap();
    let rows = json["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["peaks"][0]["peak"], "quantum");
    assert_eq!(rows[0]["peaks"][1]["sizes"].as_array().unwrap().len(), 4);
    assert!((rows[2]["peaks"][1]["fit"]["alpha"].as_f64().unwrap() - 1.37).abs() < 1e-12);
}

#[test]
fn manifest_hashes_files_and_reruns_byte_identically() {
    let first = tempfile::tempdir().unwrap();
    let manifest_path = glassotto(
        first.path(),
        &[
            "sweep",
            "--th",
            "0.4",
            "--n",
            "9",
            "--hi-points",
            "7",
            "--realizations",
            "10",
            "--seed",
            "3",
        ],
    );
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(&manifest_path).unwrap()).unwrap();
    assert_eq!(manifest["command"], "sweep");
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["params"]["realizations"], 10);
    assert_eq!(manifest["params"]["dh"], 0.5);
    let bytes = std::fs::read(first.path().join("sweep.csv")).unwrap();
    let digest: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(manifest["artifacts"][0]["sha256"], digest.as_str());

    // Re-run from the manifest into a new directory.
    let second = tempfile::tempdir().unwrap();
    glassotto(second.path(), &["sweep", "--config", manifest_path.to_str().unwrap()]);
    assert_eq!(std::fs::read(second.path().join("sweep.csv")).unwrap(), bytes);
}

#[test]
fn toml_config_is_read_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(&config, "th = 0.25\nn-list = [6, 7]\nhi-points = 5\nrealizations = 4\n").unwrap();
    let out = dir.path().join("out");
    glassotto(
        &out,
        &["sweep", "--config", config.to_str().unwrap(), "--hi-points", "9"],
    );
    assert_eq!(column(&out.join("sweep.csv"), "n").len(), 2 * 9);
}

#[test]
fn peaks_reanalyzes_a_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = dir.path().join("sweep");
    glassotto(
        &sweep,
        &[
            "sweep",
            "--th",
            "0.2",
            "--n-list",
            "10,14,18",
            "--hi-points",
            "21",
            "--realizations",
            "64",
        ],
    );
    let out = dir.path().join("peaks");
    glassotto(&out, &["peaks", "--in", sweep.join("sweep.csv").to_str().unwrap()]);
    let csv = out.join("peaks.csv");
    assert_eq!(
        lines(&csv)[0],
        "n,peak,h_peak,height_per_spin,height_total,prominence,midpoint"
    );
    assert_eq!(column(&csv, "n").len(), 2 * 3);
    assert!(out.join("peaks.json").exists());
}

#[test]
fn peaks_rejects_a_foreign_table() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "n,h_i\n10,0.5\n").unwrap();
    let argv = [
        "glassotto",
        "peaks",
        "--in",
        bad.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ];
    let err = run(Cli::try_parse_from(argv).unwrap()).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("w_per_spin"), "{err}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let exe = env!("CARGO_BIN_EXE_glassotto");
    let code = |args: &[&str]| {
        Command::new(exe)
            .args(args)
            .arg("--out")
            .arg(dir.path())
            .stderr(Stdio::null())
            .status()
            .unwrap()
            .code()
            .unwrap()
    };
    assert_eq!(code(&["critical-field", "--n", "20", "--samples", "10"]), 0);
    assert_eq!(code(&["sweep"]), 2);
    assert_eq!(code(&["sweep", "--th", "0.2", "--tc", "0.9"]), 2);
    assert_eq!(code(&["sweep", "--th", "0.2", "--boundary", "open"]), 2);
    // A power-law fit needs three sizes.
    assert_eq!(code(&["scaling", "--n-list", "10,12", "--realizations", "2"]), 2);
}
