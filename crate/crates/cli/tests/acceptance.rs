//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits nonzero if any fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command as Process;
use std::time::{Duration, Instant};

use clap::Parser;
use glassotto::analysis::{default_prominence, find_peaks, peak_crossover};
use glassotto::ensemble::{run_grid, Bath, EnsembleConfig, FieldGrid};
use glassotto::otto::{run_cycle, CycleParams};
use glassotto::spinglass::critical_field_scaling;
use glassotto::{build_bdg, chain_spectrum, derive_seed, sample_couplings, Boundary, DisorderRealization, Regime};
use glassotto_cli::{run, Cli};
use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Check = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Check + 'a>);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn cli(out: &Path, args: &[&str]) -> PathBuf {
    let mut argv = vec!["glassotto"];
    argv.extend_from_slice(args);
    let out_str = out.to_str().unwrap();
    argv.extend_from_slice(&["--out", out_str]);
    run(Cli::try_parse_from(argv).unwrap()).unwrap();
    out.to_path_buf()
}

/// Rows of a CSV as column name -> text.
fn read_csv(path: &Path) -> Vec<BTreeMap<String, String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    r.records()
        .map(|rec| {
            header
                .iter()
                .cloned()
                .zip(rec.unwrap().iter().map(String::from))
                .collect()
        })
        .collect()
}

fn num(row: &BTreeMap<String, String>, key: &str) -> f64 {
    row[key].parse().unwrap()
}

fn uniform_oracle() -> Check {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for n in 2..=512usize {
        let r = DisorderRealization::uniform(n, 1.0).unwrap();
        for h in [0.0, 0.5, 1.0, 2.0] {
            let got = chain_spectrum(&r, h, Boundary::Antiperiodic).unwrap().energies;
            let mut want: Vec<f64> = (0..n)
                .map(|m| {
                    let k = (2 * m + 1) as f64 * std::f64::consts::PI / n as f64;
                    (h * h + 1.0 - 2.0 * h * k.cos()).max(0.0).sqrt()
                })
                .collect();
            want.sort_by(f64::total_cmp);
            for (a, b) in got.iter().zip(&want) {
                worst = worst.max((a - b).abs() / b);
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(worst <= 1e-10, || format!("max relative error {worst:e}"))?;
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "max relative error {worst:.2e} in {:.1}s",
        elapsed.as_secs_f64()
    ))
}

fn brute_force() -> Check {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for n in 2..=8usize {
        for idx in 0..100 {
            let r = sample_couplings(n, derive_seed(2024, n, idx)).unwrap();
            for h in [0.0, 0.35, 1.0, 1.9] {
                for boundary in [Boundary::Antiperiodic, Boundary::Periodic] {
                    let got = chain_spectrum(&r, h, boundary).unwrap().energies;
                    let full = build_bdg(&r, h, boundary).full_matrix();
                    let mut ev: Vec<f64> = SymmetricEigen::new(full).eigenvalues.iter().copied().collect();
                    ev.sort_by(f64::total_cmp);
                    for (a, b) in got.iter().zip(&ev[n..]) {
                        worst = worst.max((a - b).abs());
                    }
                    count += 1;
                }
            }
        }
    }
    ensure(worst <= 1e-10, || format!("max deviation {worst:e}"))?;
    Ok(format!("{count} spectra, max deviation {worst:.2e}"))
}

fn critical_law() -> Check {
    let start = Instant::now();
    let rows = critical_field_scaling(&[100, 1_000, 10_000], 10_000, 99).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let mut detail = Vec::new();
    for r in &rows {
        let expected = 0.5298 / (r.n as f64).sqrt();
        let se = r.stderr_h_c.unwrap();
        let z = (r.mean_h_c - expected) / se;
        ensure(z.abs() <= 3.0, || {
            format!("N={} mean {} vs {expected} ({z:.2} SE)", r.n, r.mean_h_c)
        })?;
        detail.push(format!("N={} {z:+.2}SE", r.n));
    }
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("{} in {:.1}s", detail.join(", "), elapsed.as_secs_f64()))
}

fn thermodynamic_suite() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let (mut clausius_max, mut equal_w_max) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let (mut engines, mut fridges, mut equal) = (0, 0, 0);
    for point in 0..10_000u64 {
        let n = rng.random_range(2..=40usize);
        let r = sample_couplings(n, derive_seed(7, n, point)).unwrap();
        let h_i = rng.random_range(-0.5..=2.0);
        let t_h = 1.5 * (1.0 - rng.random::<f64>());
        let t_c = if rng.random_bool(0.1) {
            t_h
        } else {
            t_h * (1.0 - rng.random::<f64>())
        };
        let initial = chain_spectrum(&r, h_i, Boundary::Antiperiodic).unwrap();
        let expanded = chain_spectrum(&r, h_i + 0.5, Boundary::Antiperiodic).unwrap();
        let params = CycleParams::new(h_i, h_i + 0.5, t_c, t_h).unwrap();
        let c = run_cycle(&initial, &expanded, params).map_err(|e| format!("point {point}: {e}"))?;
        let h = c.heats;
        ensure(h.w == h.q_c + h.q_h, || format!("point {point}: W != Q_c + Q_h"))?;
        let entropy = h.q_c / t_c + h.q_h / t_h;
        clausius_max = clausius_max.max(entropy);
        ensure(entropy <= 1e-10, || format!("point {point}: Clausius sum {entropy:e}"))?;
        if t_c == t_h {
            equal += 1;
            equal_w_max = equal_w_max.max(h.w);
            ensure(h.w <= 0.0, || format!("point {point}: W = {:e} at equal baths", h.w))?;
        }
        match c.regime.regime {
            Regime::Engine => {
                engines += 1;
                let eta = c.engine.eta.unwrap();
                ensure(eta <= c.engine.eta_carnot, || {
                    format!("point {point}: eta {eta} > Carnot")
                })?;
            }
            Regime::Refrigerator => {
                fridges += 1;
                let eta_r = c.refrigerator.eta_r.unwrap();
                // Equal baths: the Carnot COP is infinite and bounds nothing.
                if let Some(cop) = c.refrigerator.eta_cop {
                    ensure(eta_r <= cop, || format!("point {point}: eta_R {eta_r} > COP {cop}"))?;
                }
            }
            _ => {}
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(120), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "10000 points ({engines} engine, {fridges} refrigerator, {equal} equal-bath); max Clausius sum {clausius_max:.2e}, max equal-bath W {equal_w_max:.2e}, {:.1}s",
        elapsed.as_secs_f64()
    ))
}

fn regime_map(dir: &Path) -> Check {
    let out = cli(
        &dir.join("regime"),
        &[
            "regime-map",
            "--th",
            "0.2",
            "--n",
            "50",
            "--tc-points",
            "64",
            "--hi-points",
            "64",
            "--realizations",
            "64",
        ],
    );
    let rows = read_csv(&out.join("regime_map.csv"));
    ensure(rows.len() == 64 * 64, || format!("{} cells", rows.len()))?;
    let mut by_tc: BTreeMap<usize, Vec<&BTreeMap<String, String>>> = BTreeMap::new();
    let step = 0.2 / 63.0;
    for row in &rows {
        by_tc
            .entry((num(row, "t_c") / step).round() as usize)
            .or_default()
            .push(row);
    }
    let line = |t_c: f64| &by_tc[&((t_c / step).round() as usize)];

    // Realization-majority regime along t_c = 3 t_h / 4.
    let fridge_line = line(0.15);
    let majority = fridge_line
        .iter()
        .filter(|row| {
            let f = num(row, "refrigerator_fraction");
            ["engine_fraction", "heater_fraction", "accelerator_fraction"]
                .iter()
                .all(|k| f > num(row, k))
        })
        .count();
    ensure(2 * majority > fridge_line.len(), || {
        format!("refrigerator majority on {majority}/{} cells", fridge_line.len())
    })?;

    let engine_cells = line(0.05).iter().filter(|row| row["regime"] == "engine").count();
    ensure(engine_cells > 0, || "no engine cell on t_c = t_h/4".into())?;

    let (lo, hi) = ((0.05 / step).round() as usize, (0.15 / step).round() as usize);
    let band = (lo..=hi)
        .flat_map(|k| by_tc[&k].iter())
        .filter(|row| row["regime"] == "heater" || row["regime"] == "accelerator")
        .count();
    ensure(band > 0, || "no heater/accelerator cell between the lines".into())?;
    Ok(format!(
        "refrigerator majority on {majority}/64 cells at t_c=0.15, {engine_cells} engine cells at t_c=0.05, {band} H/A cells between"
    ))
}

/// Quantum and classical W/N peaks of a single-size sweep file.
fn sweep_peaks(path: &Path) -> Result<(f64, f64), String> {
    let rows = read_csv(path);
    let curve: Vec<(f64, f64)> = rows.iter().map(|r| (num(r, "h_i"), num(r, "w_per_spin"))).collect();
    let errors: Vec<Option<f64>> = rows.iter().map(|r| Some(num(r, "stderr_w"))).collect();
    let peaks = find_peaks(&curve, default_prominence(&errors)).map_err(|e| e.to_string())?;
    match (peaks.quantum(), peaks.classical()) {
        (Some(q), Some(c)) => Ok((q.height, c.height)),
        _ => Err(format!("{} peaks in {}", peaks.count(), path.display())),
    }
}

fn double_peak(dir: &Path) -> Check {
    let mut detail = Vec::new();
    for (t_h, first_higher) in [("0.2", true), ("0.5", false)] {
        let out = cli(
            &dir.join(format!("engine_{t_h}")),
            &["sweep", "--th", t_h, "--tc-ratio", "0.25", "--n", "50"],
        );
        let (q, c) = sweep_peaks(&out.join("sweep.csv"))?;
        ensure((q > c) == first_higher, || {
            format!("t_h={t_h}: quantum {q:.4e}, classical {c:.4e}")
        })?;
        detail.push(format!("t_h={t_h}: {q:.3e} / {c:.3e}"));
    }

    // Peak heights over a hot-bath grid, all from one ensemble run.
    let temps: Vec<f64> = (10..=60).step_by(2).map(|k| k as f64 / 100.0).collect();
    let baths: Vec<Bath> = temps.iter().map(|&t| Bath::new(t / 4.0, t).unwrap()).collect();
    let fields = FieldGrid::default().values();
    let grid = run_grid(&EnsembleConfig::new(50, 512, 0), &fields, 0.5, &baths).map_err(|e| e.to_string())?;
    let mut heights = Vec::new();
    for (b, &t) in temps.iter().enumerate() {
        let row = grid.row(b);
        let curve: Vec<(f64, f64)> = row.iter().map(|s| (s.h_i, s.w_per_spin())).collect();
        let errors: Vec<Option<f64>> = row.iter().map(|s| s.stderr_w_per_spin()).collect();
        let peaks = find_peaks(&curve, default_prominence(&errors)).map_err(|e| e.to_string())?;
        if let (Some(q), Some(c)) = (peaks.quantum(), peaks.classical()) {
            heights.push((t, q.height, c.height));
        }
    }
    let crossover = peak_crossover(&heights)
        .map_err(|e| e.to_string())?
        .ok_or("quantum and classical peaks never cross")?;
    ensure((crossover - 0.29).abs() <= 0.05, || {
        format!("crossover at t_h = {crossover:.3}")
    })?;
    Ok(format!("{}; crossover t_h = {crossover:.3}", detail.join(", ")))
}

fn refrigerator_scaling(dir: &Path) -> Check {
    let out = cli(
        &dir.join("fridge_scaling"),
        &[
            "scaling",
            "--quantity",
            "pir",
            "--n-list",
            "20,30,40,50",
            "--tc-ratio",
            "0.75",
            "--th-min",
            "0.2",
            "--th-max",
            "1.5",
            "--th-points",
            "27",
        ],
    );
    let json: Value = serde_json::from_str(&std::fs::read_to_string(out.join("peaks.json")).unwrap()).unwrap();
    let mut alphas = Vec::new();
    for row in json["rows"].as_array().unwrap() {
        let t_h = row["t_h"].as_f64().unwrap();
        if !(1.0 - 1e-9..=1.5 + 1e-9).contains(&t_h) {
            continue;
        }
        let alpha = row["peaks"][0]["fit"]["alpha"]
            .as_f64()
            .ok_or_else(|| format!("no fit at t_h={t_h}: {}", row["peaks"][0]["fit"]["error"]))?;
        alphas.push((t_h, alpha));
    }
    let listing = alphas
        .iter()
        .map(|(t, a)| format!("{t:.2}:{a:.3}"))
        .collect::<Vec<_>>()
        .join(" ");
    for &(t_h, alpha) in &alphas {
        ensure((alpha - 1.1).abs() <= 0.15, || {
            format!("alpha {alpha:.3} at t_h={t_h:.2} [{listing}]")
        })?;
    }
    let onset = json["midpoint_divergence_onset"]["dominant"]
        .as_f64()
        .ok_or_else(|| format!("midpoints never diverge [{listing}]"))?;
    ensure((onset - 0.7).abs() <= 0.15, || {
        format!("midpoint divergence onset at t_h = {onset:.3} [{listing}]")
    })?;
    Ok(format!("alpha [{listing}]; midpoint divergence onset t_h = {onset:.2}"))
}

fn clipping(dir: &Path) -> Check {
    // Refrigerator sweeps join the engine sweeps written above.
    for t_h in ["0.3", "1.2"] {
        cli(
            &dir.join(format!("fridge_{t_h}")),
            &["sweep", "--mode", "refrigerator", "--th", t_h, "--n-list", "20,50"],
        );
    }
    let mut files = 0;
    let mut rows_checked = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path().join("sweep.csv");
        if !path.exists() {
            continue;
        }
        files += 1;
        for row in read_csv(&path) {
            let w = num(&row, "w_per_spin");
            if w < 0.0 {
                ensure(num(&row, "pi_per_spin") == 0.0, || {
                    format!("{}: Pi/N unclipped at W<0", path.display())
                })?;
            }
            if w > 0.0 {
                ensure(num(&row, "pi_r_per_spin") == 0.0, || {
                    format!("{}: Pi_R/N unclipped at W>0", path.display())
                })?;
            }
            rows_checked += 1;
        }
    }
    ensure(files >= 4, || format!("only {files} sweep files"))?;
    Ok(format!("{files} sweep files, {rows_checked} rows"))
}

fn determinism(dir: &Path) -> Check {
    let exe = env!("CARGO_BIN_EXE_glassotto");
    let commands: [(&str, &[&str], &[&str]); 5] = [
        (
            "critical-field",
            &["--n-list", "10,100", "--samples", "300"],
            &["critical_field.csv"],
        ),
        (
            "regime-map",
            &[
                "--th",
                "0.3",
                "--n",
                "12",
                "--tc-points",
                "5",
                "--hi-points",
                "9",
                "--realizations",
                "300",
            ],
            &["regime_map.csv"],
        ),
        (
            "sweep",
            &[
                "--th",
                "0.2",
                "--n-list",
                "8,16",
                "--hi-points",
                "21",
                "--realizations",
                "300",
            ],
            &["sweep.csv"],
        ),
        (
            "scaling",
            &[
                "--quantity",
                "w",
                "--n-list",
                "8,12,16",
                "--th-min",
                "0.2",
                "--th-max",
                "0.5",
                "--th-points",
                "3",
                "--hi-points",
                "21",
                "--realizations",
                "300",
            ],
            &["scaling.csv", "peaks.json"],
        ),
        ("peaks", &[], &["peaks.csv", "peaks.json"]),
    ];
    // The `peaks` runs re-analyze the single-threaded `sweep` output.
    let source = dir.join("det_sweep_1").join("sweep.csv");
    let mut compared = 0;
    for (name, args, files) in commands {
        let outs: Vec<PathBuf> = ["1", "4"]
            .iter()
            .map(|threads| {
                let out = dir.join(format!("det_{name}_{threads}"));
                let mut cmd = Process::new(exe);
                cmd.arg(name)
                    .args(args)
                    .args(["--threads", threads, "--seed", "5", "--out"])
                    .arg(&out);
                if name == "peaks" {
                    cmd.arg("--in").arg(&source);
                }
                let status = cmd.env("RUST_LOG", "warn").status().unwrap();
                assert!(status.success(), "{name} exited with {status}");
                out
            })
            .collect();
        for file in files {
            let a = std::fs::read(outs[0].join(file)).unwrap();
            let b = std::fs::read(outs[1].join(file)).unwrap();
            ensure(a == b, || format!("{name}: {file} differs between 1 and 4 threads"))?;
            compared += 1;
        }
    }
    Ok(format!("{compared} artifacts byte-identical across 1 and 4 threads"))
}

fn main() {
    let scratch = tempfile::tempdir().unwrap();
    let dir = scratch.path();
    let criteria: Vec<Criterion> = vec![
        ("uniform-chain spectrum oracle", Box::new(uniform_oracle)),
        ("brute-force BdG equivalence", Box::new(brute_force)),
        ("critical-field law", Box::new(critical_law)),
        ("thermodynamic property suite", Box::new(thermodynamic_suite)),
        ("regime map structure", Box::new(|| regime_map(dir))),
        ("double peak and crossover", Box::new(|| double_peak(dir))),
        ("refrigerator scaling", Box::new(|| refrigerator_scaling(dir))),
        ("clipping contracts", Box::new(|| clipping(dir))),
        ("determinism across thread counts", Box::new(|| determinism(dir))),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} [{secs:.1}s]"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why} [{secs:.1}s]");
            }
        }
    }
    println!(
        "{} of {} acceptance criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
