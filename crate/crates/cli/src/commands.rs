use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use glassotto::analysis::midpoint_divergence_onset;
use glassotto::ensemble::{
    analyze_curves, regime_map, scaling_study, sweep_refrigerator, sweep_work_performance, Bath, CouplingModel,
    CurvePeaks, FieldGrid, PeakAnalysis, PeakFit, PeakRole, ScalingQuantity, SizedCurve, StudyMode, SweepSpec, TcRule,
};
use glassotto::spinglass::critical_field_scaling;
use glassotto::Regime;
use serde_json::{json, Value};

use crate::output::{float, maybe, Output, Table};
use crate::params::{ModeArg, Params, QuantityArg};
use crate::CliError;

pub const CRITICAL_FIELD_COLUMNS: &[&str] = &["n", "mean_h_c", "stderr_h_c", "samples"];

pub const REGIME_MAP_COLUMNS: &[&str] = &[
    "t_c",
    "h_i",
    "mean_q_c",
    "mean_q_h",
    "mean_w",
    "regime",
    "engine_fraction",
    "refrigerator_fraction",
    "heater_fraction",
    "accelerator_fraction",
];

pub const SWEEP_COLUMNS: &[&str] = &[
    "n",
    "h_i",
    "w_per_spin",
    "stderr_w",
    "pi_per_spin",
    "pi_r_per_spin",
    "eta",
    "eta_r",
    "regime",
    "h_c_mean",
    "griffiths_marker",
];

pub const SCALING_COLUMNS: &[&str] = &[
    "t_h",
    "t_c",
    "quantity",
    "peak",
    "n",
    "h_peak",
    "height_per_spin",
    "height_total",
    "midpoint",
    "alpha",
    "b",
    "r_squared",
];

pub const PEAKS_COLUMNS: &[&str] = &[
    "n",
    "peak",
    "h_peak",
    "height_per_spin",
    "height_total",
    "prominence",
    "midpoint",
];

const DEFAULT_SIZES: &[usize] = &[20, 30, 40, 50];
const DEFAULT_CRITICAL_SIZES: &[usize] = &[10, 100, 1_000, 10_000, 100_000];

fn require<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Config(format!("--{flag} is required")))
}

fn out_dir(p: &mut Params) -> PathBuf {
    p.out.get_or_insert_with(|| PathBuf::from("results")).clone()
}

fn sizes(p: &mut Params, default: &[usize]) -> Vec<usize> {
    let list = match (&p.n_list, p.n) {
        (Some(list), _) => list.clone(),
        (None, Some(n)) => vec![n],
        (None, None) => default.to_vec(),
    };
    p.n_list = Some(list.clone());
    list
}

fn field_grid(p: &mut Params) -> Result<FieldGrid, CliError> {
    let d = FieldGrid::default();
    let start = *p.hi_min.get_or_insert(d.start);
    let stop = *p.hi_max.get_or_insert(d.stop);
    let points = *p.hi_points.get_or_insert(d.points);
    Ok(FieldGrid::new(start, stop, points)?)
}

fn mode(p: &mut Params) -> ModeArg {
    *p.mode.get_or_insert(match p.quantity {
        Some(QuantityArg::Pir) => ModeArg::Refrigerator,
        _ => ModeArg::Engine,
    })
}

fn tc_rule(p: &mut Params, mode: ModeArg) -> TcRule {
    match p.tc {
        Some(t) => TcRule::Fixed(t),
        None => TcRule::FractionOfHot(*p.tc_ratio.get_or_insert(match mode {
            ModeArg::Engine => 0.25,
            ModeArg::Refrigerator => 0.75,
        })),
    }
}

/// Sweep parameters common to the ensemble studies.
fn spec(p: &mut Params, study: StudyMode, n_list: Vec<usize>, t_h: f64, rule: TcRule) -> Result<SweepSpec, CliError> {
    let mut spec = SweepSpec::new(study, n_list, t_h, rule);
    spec.h_i_grid = field_grid(p)?;
    spec.delta_h = *p.dh.get_or_insert(spec.delta_h);
    spec.realizations = *p.realizations.get_or_insert(spec.realizations);
    spec.master_seed = *p.seed.get_or_insert(0);
    spec.boundary = p.boundary.map(Into::into).unwrap_or_default();
    if p.uniform_baseline {
        spec.couplings = CouplingModel::Uniform(1.0);
    }
    Ok(spec)
}

pub fn critical_field(mut p: Params) -> Result<PathBuf, CliError> {
    let n_list = sizes(&mut p, DEFAULT_CRITICAL_SIZES);
    let samples = *p.samples.get_or_insert(10_000);
    let seed = *p.seed.get_or_insert(0);
    let dir = out_dir(&mut p);
    let mut out = Output::create(&dir)?;

    log::info!("critical field: {} sizes x {samples} samples", n_list.len());
    let rows = critical_field_scaling(&n_list, samples, seed)?;
    let mut table = Table::new(CRITICAL_FIELD_COLUMNS);
    for r in &rows {
        table.push(vec![
            r.n.to_string(),
            float(r.mean_h_c),
            maybe(r.stderr_h_c),
            r.samples.to_string(),
        ]);
    }
    out.table("critical_field.csv", &table)?;
    out.finish("critical-field", &p, json!({}))
}

pub fn regime(mut p: Params) -> Result<PathBuf, CliError> {
    let t_h = require(p.th, "th")?;
    let n = match (&p.n_list, p.n) {
        (Some(list), None) if list.len() == 1 => list[0],
        (Some(_), _) => return Err(CliError::Config("a regime map takes a single --n".into())),
        (None, n) => *p.n.get_or_insert(n.unwrap_or(50)),
    };
    let tc_points = *p.tc_points.get_or_insert(64);
    let t_c = if tc_points == 1 {
        vec![0.0]
    } else {
        FieldGrid::new(0.0, t_h, tc_points)?.values()
    };
    let spec = spec(&mut p, StudyMode::RegimeMap, vec![n], t_h, TcRule::Fixed(0.0))?;
    let dir = out_dir(&mut p);
    let mut out = Output::create(&dir)?;

    log::info!(
        "regime map n={n}: {} x {} cells, {} realizations",
        t_c.len(),
        spec.h_i_grid.points,
        spec.realizations
    );
    let map = regime_map(&spec, &t_c)?;
    let mut table = Table::new(REGIME_MAP_COLUMNS);
    for cell in &map.cells {
        let mut row = vec![
            float(cell.t_c),
            float(cell.h_i),
            float(cell.mean_q_c),
            float(cell.mean_q_h),
            float(cell.mean_w),
            cell.regime.regime.as_str().to_string(),
        ];
        row.extend(Regime::ALL.iter().map(|&r| float(cell.regime_fraction(r))));
        table.push(row);
    }
    out.table("regime_map.csv", &table)?;
    out.finish("regime-map", &p, json!({}))
}

pub fn sweep(mut p: Params) -> Result<PathBuf, CliError> {
    let t_h = require(p.th, "th")?;
    let mode = mode(&mut p);
    let rule = tc_rule(&mut p, mode);
    let n_list = sizes(&mut p, DEFAULT_SIZES);
    let study = match mode {
        ModeArg::Engine => StudyMode::EngineStudy,
        ModeArg::Refrigerator => StudyMode::RefrigeratorStudy,
    };
    let spec = spec(&mut p, study, n_list, t_h, rule)?;
    let dir = out_dir(&mut p);
    let mut out = Output::create(&dir)?;

    let table = match mode {
        ModeArg::Engine => sweep_work_performance(&spec)?,
        ModeArg::Refrigerator => sweep_refrigerator(&spec)?,
    };
    let mut csv = Table::new(SWEEP_COLUMNS);
    for row in &table.rows {
        let s = &row.stats;
        csv.push(vec![
            s.n.to_string(),
            float(s.h_i),
            float(s.w_per_spin()),
            maybe(s.stderr_w_per_spin()),
            maybe(s.pi_per_spin_clipped()),
            maybe(s.pi_r_per_spin_clipped()),
            maybe(s.engine.eta),
            maybe(s.refrigerator.eta_r),
            s.regime.regime.as_str().to_string(),
            float(row.h_c_mean),
            row.griffiths_marker().to_string(),
        ]);
    }
    out.table("sweep.csv", &csv)?;
    out.finish(
        "sweep",
        &p,
        json!({ "t_h": table.t_h, "t_c": table.t_c, "skipped_realizations": table.skipped }),
    )
}

fn hot_grid(p: &mut Params) -> Result<Vec<f64>, CliError> {
    if let (Some(t_h), None, None, None) = (p.th, p.th_min, p.th_max, p.th_points) {
        return Ok(vec![t_h]);
    }
    let lo = *p.th_min.get_or_insert(0.1);
    let hi = *p.th_max.get_or_insert(1.5);
    match *p.th_points.get_or_insert(15) {
        0 => Err(CliError::Config("--th-points must be positive".into())),
        1 => Ok(vec![lo]),
        k => Ok(FieldGrid::new(lo, hi, k)?.values()),
    }
}

/// Two Gaussian bumps whose heights scale as `N^(alpha - 1)` per spin.
fn planted_curves(alpha: f64, n_list: &[usize], grid: &FieldGrid) -> Vec<SizedCurve> {
    let bump = |h: f64, mu: f64, s: f64| (-(h - mu).powi(2) / (2.0 * s * s)).exp();
    n_list
        .iter()
        .map(|&n| {
            let scale = (n as f64).powf(alpha - 1.0);
            SizedCurve {
                n,
                points: grid
                    .values()
                    .into_iter()
                    .map(|h| (h, scale * (bump(h, 0.2, 0.15) + 0.8 * bump(h, 1.2, 0.25))))
                    .collect(),
                stderr: vec![None; grid.points],
            }
        })
        .collect()
}

fn curve_rows(
    quantity: ScalingQuantity,
    analysis: &PeakAnalysis,
) -> Vec<(PeakRole, &CurvePeaks, Option<glassotto::analysis::Peak>)> {
    let mut rows = Vec::new();
    for &role in quantity.tracked() {
        for c in &analysis.curves {
            rows.push((role, c, role.pick(&c.peaks)));
        }
    }
    rows
}

fn fit_json(fit: &PeakFit) -> Value {
    match &fit.fit {
        Ok(f) => json!({ "alpha": f.alpha, "b": f.b, "r_squared": f.r_squared, "error": null }),
        Err(e) => json!({ "alpha": null, "b": null, "r_squared": null, "error": e }),
    }
}

fn fit_of(fits: &[PeakFit], role: PeakRole) -> (f64, f64, f64) {
    fits.iter()
        .find(|f| f.role == role)
        .and_then(|f| f.fit.as_ref().ok())
        .map_or((f64::NAN, f64::NAN, f64::NAN), |f| (f.alpha, f.b, f.r_squared))
}

fn peak_json(role: PeakRole, analysis: &PeakAnalysis, delta_h: f64) -> Value {
    let sizes: Vec<Value> = analysis
        .curves
        .iter()
        .map(|c| match role.pick(&c.peaks) {
            Some(pk) => json!({
                "n": c.n,
                "h_peak": pk.location,
                "height_per_spin": pk.height,
                "height_total": pk.height * c.n as f64,
                "prominence": pk.prominence,
                "midpoint": glassotto::analysis::quench_midpoint(pk.location, delta_h),
            }),
            None => json!({ "n": c.n, "h_peak": null }),
        })
        .collect();
    let fit = analysis
        .fits
        .iter()
        .find(|f| f.role == role)
        .map_or(Value::Null, fit_json);
    json!({ "peak": role.as_str(), "fit": fit, "sizes": sizes })
}

pub fn scaling(mut p: Params) -> Result<PathBuf, CliError> {
    let mode = mode(&mut p);
    let quantity: ScalingQuantity = p
        .quantity
        .get_or_insert(match mode {
            ModeArg::Engine => QuantityArg::W,
            ModeArg::Refrigerator => QuantityArg::Pir,
        })
        .to_owned()
        .into();
    let rule = tc_rule(&mut p, mode);
    let t_h = hot_grid(&mut p)?;
    let n_list = sizes(&mut p, DEFAULT_SIZES);
    let study = match mode {
        ModeArg::Engine => StudyMode::EngineStudy,
        ModeArg::Refrigerator => StudyMode::RefrigeratorStudy,
    };
    let hottest = t_h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spec = spec(&mut p, study, n_list.clone(), hottest, rule)?;
    let dir = out_dir(&mut p);
    let mut out = Output::create(&dir)?;

    // Per temperature: bath and peak analysis.
    let rows: Vec<(Bath, PeakAnalysis)> = match p.planted_alpha {
        Some(alpha) => {
            let curves = planted_curves(alpha, &n_list, &spec.h_i_grid);
            t_h.iter()
                .map(|&t| Ok((Bath::new(rule.cold(t), t)?, analyze_curves(quantity, &curves)?)))
                .collect::<Result<_, CliError>>()?
        }
        None => scaling_study(&spec, &t_h, quantity)?
            .rows
            .into_iter()
            .map(|r| {
                (
                    Bath { t_c: r.t_c, t_h: r.t_h },
                    PeakAnalysis {
                        curves: r.curves,
                        fits: r.fits,
                    },
                )
            })
            .collect(),
    };

    let delta_h = spec.delta_h;
    let mut table = Table::new(SCALING_COLUMNS);
    let mut json_rows = Vec::with_capacity(rows.len());
    for (bath, analysis) in &rows {
        for (role, curve, peak) in curve_rows(quantity, analysis) {
            let (alpha, b, r2) = fit_of(&analysis.fits, role);
            table.push(vec![
                float(bath.t_h),
                float(bath.t_c),
                quantity.as_str().to_string(),
                role.as_str().to_string(),
                curve.n.to_string(),
                maybe(peak.map(|p| p.location)),
                maybe(peak.map(|p| p.height)),
                maybe(peak.map(|p| p.height * curve.n as f64)),
                maybe(peak.map(|p| glassotto::analysis::quench_midpoint(p.location, delta_h))),
                float(alpha),
                float(b),
                float(r2),
            ]);
        }
        json_rows.push(json!({
            "t_h": bath.t_h,
            "t_c": bath.t_c,
            "peaks": quantity.tracked().iter().map(|&r| peak_json(r, analysis, delta_h)).collect::<Vec<_>>(),
        }));
    }

    // Temperature from which the tracked peak's quench midpoints stay apart
    // by more than 1.5 grid steps across sizes.
    let threshold = 1.5 * spec.h_i_grid.step();
    let temperatures: Vec<f64> = rows.iter().map(|(b, _)| b.t_h).collect();
    let mut onset = BTreeMap::new();
    for &role in quantity.tracked() {
        let midpoints: Vec<Vec<Option<f64>>> = rows
            .iter()
            .map(|(_, a)| {
                a.curves
                    .iter()
                    .map(|c| {
                        role.pick(&c.peaks)
                            .map(|pk| glassotto::analysis::quench_midpoint(pk.location, delta_h))
                    })
                    .collect()
            })
            .collect();
        onset.insert(
            role.as_str(),
            midpoint_divergence_onset(&temperatures, &midpoints, threshold)?,
        );
    }

    out.table("scaling.csv", &table)?;
    out.json(
        "peaks.json",
        &json!({
            "quantity": quantity.as_str(),
            "delta_h": delta_h,
            "grid_step": spec.h_i_grid.step(),
            "midpoint_threshold": threshold,
            "midpoint_divergence_onset": onset,
            "rows": json_rows,
        }),
    )?;
    out.finish("scaling", &p, json!({ "planted": p.planted_alpha.is_some() }))
}

/// Curves of one quantity, per size, read back from a sweep table.
fn read_sweep(path: &Path, quantity: ScalingQuantity) -> Result<Vec<SizedCurve>, CliError> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let bad = |msg: String| CliError::Config(format!("{}: {msg}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(e) => io(e),
        other => bad(format!("{other:?}")),
    })?;
    let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let column = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| bad(format!("missing column `{name}`")))
    };
    let (value_col, err_col) = match quantity {
        ScalingQuantity::W => (column("w_per_spin")?, Some(column("stderr_w")?)),
        ScalingQuantity::Pi => (column("pi_per_spin")?, None),
        ScalingQuantity::PiR => (column("pi_r_per_spin")?, None),
    };
    let (n_col, h_col) = (column("n")?, column("h_i")?);

    let mut by_size: BTreeMap<usize, SizedCurve> = BTreeMap::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let num = |col: usize| -> Result<f64, CliError> {
            record[col]
                .parse::<f64>()
                .map_err(|e| bad(format!("row {}: {e}", line + 2)))
        };
        let n: usize = record[n_col]
            .parse()
            .map_err(|e| bad(format!("row {}: {e}", line + 2)))?;
        let curve = by_size.entry(n).or_insert_with(|| SizedCurve {
            n,
            points: Vec::new(),
            stderr: Vec::new(),
        });
        let value = num(value_col)?;
        // Undefined performance is written as NaN and means no useful output.
        let value = if value.is_nan() && quantity != ScalingQuantity::W {
            0.0
        } else {
            value
        };
        curve.points.push((num(h_col)?, value));
        curve.stderr.push(match err_col {
            Some(c) => Some(num(c)?).filter(|e| e.is_finite()),
            None => None,
        });
    }
    if by_size.is_empty() {
        return Err(bad("no data rows".into()));
    }
    let mut curves: Vec<SizedCurve> = by_size.into_values().collect();
    for c in &mut curves {
        let mut order: Vec<usize> = (0..c.points.len()).collect();
        order.sort_by(|&a, &b| c.points[a].0.total_cmp(&c.points[b].0));
        c.points = order.iter().map(|&i| c.points[i]).collect();
        c.stderr = order.iter().map(|&i| c.stderr[i]).collect();
    }
    Ok(curves)
}

pub fn peaks(mut p: Params) -> Result<PathBuf, CliError> {
    let input = require(p.input.clone(), "in")?;
    let quantity: ScalingQuantity = (*p.quantity.get_or_insert(QuantityArg::W)).into();
    let delta_h = *p.dh.get_or_insert(0.5);
    let dir = out_dir(&mut p);

    let curves = read_sweep(&input, quantity)?;
    let analysis = analyze_curves(quantity, &curves)?;
    let mut out = Output::create(&dir)?;
    let mut table = Table::new(PEAKS_COLUMNS);
    for (role, curve, peak) in curve_rows(quantity, &analysis) {
        table.push(vec![
            curve.n.to_string(),
            role.as_str().to_string(),
            maybe(peak.map(|p| p.location)),
            maybe(peak.map(|p| p.height)),
            maybe(peak.map(|p| p.height * curve.n as f64)),
            maybe(peak.map(|p| p.prominence)),
            maybe(peak.map(|p| glassotto::analysis::quench_midpoint(p.location, delta_h))),
        ]);
    }
    out.table("peaks.csv", &table)?;
    out.json(
        "peaks.json",
        &json!({
            "quantity": quantity.as_str(),
            "delta_h": delta_h,
            "source": input,
            "peaks": quantity.tracked().iter().map(|&r| peak_json(r, &analysis, delta_h)).collect::<Vec<_>>(),
        }),
    )?;
    out.finish("peaks", &p, json!({}))
}
