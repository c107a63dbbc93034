//! Disorder-averaged sweeps.
//!
//! Every realization is diagonalized once per field of the grid (at `h_i` and
//! `h_i + δh`), and those spectra are reused for every bath pair. Realizations
//! run in parallel; their results are folded in realization-index order, so
//! the output does not depend on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{self, PeakSet, ScalingFit};
use crate::bdg::{chain_spectrum, Boundary};
use crate::error::{Error, Result};
use crate::otto::{
    classify_regime, engine_metrics, heats_unchecked, refrigerator_metrics, regime_tolerance, EngineMetrics, Heats,
    RefrigeratorMetrics, Regime, RegimeClass,
};
use crate::spinglass::{
    classify_griffiths, critical_field, derive_seed, sample_couplings, DisorderRealization, GriffithsLabel,
};

/// Realizations evaluated in parallel before folding into the accumulators.
const BATCH: usize = 256;

/// Fraction of realizations allowed to fail diagonalization.
pub const SKIP_CEILING: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub enum CouplingModel {
    /// `J_i ~ N(0, 1/n)`, independent per size and realization.
    #[default]
    Gaussian,
    /// Every coupling equal to the given value (clean-chain baseline).
    Uniform(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TcRule {
    Fixed(f64),
    /// `t_c = ratio · t_h` with `ratio ∈ (0, 1]`.
    FractionOfHot(f64),
}

impl TcRule {
    pub fn cold(self, t_h: f64) -> f64 {
        match self {
            TcRule::Fixed(t) => t,
            TcRule::FractionOfHot(r) => r * t_h,
        }
    }

    fn validate(self) -> Result<()> {
        match self {
            TcRule::Fixed(t) if !(t >= 0.0 && t.is_finite()) => Err(Error::InvalidTemperature(t)),
            TcRule::FractionOfHot(r) if !(r > 0.0 && r <= 1.0) => Err(Error::InvalidParameter(format!(
                "cold/hot ratio must lie in (0, 1], got {r}"
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StudyMode {
    EngineStudy,
    RefrigeratorStudy,
    RegimeMap,
}

/// Arithmetic grid `start, ..., stop` with `points` entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldGrid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Default for FieldGrid {
    fn default() -> Self {
        Self {
            start: -0.5,
            stop: 2.0,
            points: 101,
        }
    }
}

impl FieldGrid {
    pub fn new(start: f64, stop: f64, points: usize) -> Result<Self> {
        let grid = Self { start, stop, points };
        grid.validate()?;
        Ok(grid)
    }

    fn validate(&self) -> Result<()> {
        if !self.start.is_finite() || !self.stop.is_finite() {
            return Err(Error::InvalidParameter("grid bounds must be finite".into()));
        }
        if self.points < 2 {
            return Err(Error::InvalidParameter(format!(
                "a curve needs at least 2 grid points, got {}",
                self.points
            )));
        }
        if self.stop <= self.start {
            return Err(Error::InvalidParameter(format!(
                "grid stop {} must exceed start {}",
                self.stop, self.start
            )));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        (self.stop - self.start) / (self.points - 1) as f64
    }

    pub fn values(&self) -> Vec<f64> {
        let last = self.points - 1;
        (0..self.points)
            .map(|k| {
                if k == last {
                    self.stop
                } else {
                    self.start + (self.stop - self.start) * k as f64 / last as f64
                }
            })
            .collect()
    }
}

/// Cold and hot bath temperatures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bath {
    pub t_c: f64,
    pub t_h: f64,
}

impl Bath {
    pub fn new(t_c: f64, t_h: f64) -> Result<Self> {
        if !(t_c >= 0.0 && t_c.is_finite()) {
            return Err(Error::InvalidTemperature(t_c));
        }
        if !(t_h > 0.0 && t_h.is_finite()) {
            return Err(Error::InvalidTemperature(t_h));
        }
        if t_c > t_h {
            return Err(Error::InvalidParameter(format!(
                "cold bath {t_c} is hotter than the hot bath {t_h}"
            )));
        }
        Ok(Self { t_c, t_h })
    }
}

/// Ensemble settings for a single chain length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n: usize,
    pub realizations: usize,
    pub master_seed: u64,
    pub boundary: Boundary,
    pub couplings: CouplingModel,
    /// Also average the ratios realization by realization.
    pub ratio_statistics: bool,
}

impl EnsembleConfig {
    pub fn new(n: usize, realizations: usize, master_seed: u64) -> Self {
        Self {
            n,
            realizations,
            master_seed,
            boundary: Boundary::default(),
            couplings: CouplingModel::default(),
            ratio_statistics: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidSize(self.n));
        }
        if self.realizations == 0 {
            return Err(Error::InvalidParameter("at least one realization is required".into()));
        }
        if let CouplingModel::Uniform(j) = self.couplings {
            if j == 0.0 || !j.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "uniform coupling must be finite and nonzero, got {j}"
                )));
            }
        }
        Ok(())
    }

    fn realization(&self, index: usize) -> Result<DisorderRealization> {
        match self.couplings {
            CouplingModel::Gaussian => sample_couplings(self.n, derive_seed(self.master_seed, self.n, index as u64)),
            CouplingModel::Uniform(j) => DisorderRealization::uniform(self.n, j),
        }
    }
}

/// Mean of a ratio over the realizations where it is defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioAverage {
    pub mean: Option<f64>,
    pub defined: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioAverages {
    pub eta: RatioAverage,
    pub pi: RatioAverage,
    pub eta_r: RatioAverage,
    pub pi_r: RatioAverage,
}

/// Disorder-averaged cycle at one `(h_i, t_c, t_h)` point. Totals, not per spin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnsembleStats {
    pub n: usize,
    pub h_i: f64,
    pub h_f: f64,
    pub t_c: f64,
    pub t_h: f64,
    /// Realizations that entered the averages.
    pub realizations: usize,
    pub mean_q_c: f64,
    pub mean_q_h: f64,
    /// `mean_q_c + mean_q_h`.
    pub mean_w: f64,
    /// Standard errors `s/√R`; `None` for a single realization.
    pub stderr_q_c: Option<f64>,
    pub stderr_q_h: Option<f64>,
    pub stderr_w: Option<f64>,
    /// Sample covariance of `(q_c, q_h)`.
    pub cov_q_c_q_h: Option<f64>,
    pub engine: EngineMetrics,
    pub refrigerator: RefrigeratorMetrics,
    /// Delta-method standard errors of the performances.
    pub stderr_pi: Option<f64>,
    pub stderr_pi_r: Option<f64>,
    /// Regime of the mean heats.
    pub regime: RegimeClass,
    /// Realization counts per regime, indexed by [`Regime::index`].
    pub regime_counts: [usize; 4],
    pub ratios: Option<RatioAverages>,
}

impl EnsembleStats {
    pub fn regime_fraction(&self, regime: Regime) -> f64 {
        self.regime_counts[regime.index()] as f64 / self.realizations as f64
    }

    pub fn w_per_spin(&self) -> f64 {
        self.mean_w / self.n as f64
    }

    pub fn stderr_w_per_spin(&self) -> Option<f64> {
        self.stderr_w.map(|s| s / self.n as f64)
    }

    /// `Π/N`, set to 0 where the mean work is negative.
    pub fn pi_per_spin_clipped(&self) -> Option<f64> {
        if self.mean_w < 0.0 {
            Some(0.0)
        } else {
            self.engine.pi.map(|p| p / self.n as f64)
        }
    }

    /// `Π_R/N`, set to 0 where the mean work is positive.
    pub fn pi_r_per_spin_clipped(&self) -> Option<f64> {
        if self.mean_w > 0.0 {
            Some(0.0)
        } else {
            self.refrigerator.pi_r.map(|p| p / self.n as f64)
        }
    }
}

/// Gradients of `Π(q_c, q_h) = W q_h / (η_C q_h - W)` and
/// `Π_R(q_c, q_h) = q_c W / (η_COP W + q_c)` with `W = q_c + q_h`.
fn performance_gradients(q_c: f64, q_h: f64, eta_c: f64, eta_cop: Option<f64>) -> ([f64; 2], Option<[f64; 2]>) {
    let w = q_c + q_h;
    let (num, den) = (w * q_h, eta_c * q_h - w);
    let grad_pi = [
        (q_h * den + num) / (den * den),
        ((q_c + 2.0 * q_h) * den - num * (eta_c - 1.0)) / (den * den),
    ];
    let grad_pi_r = eta_cop.map(|cop| {
        let (num, den) = (q_c * w, cop * w + q_c);
        [
            ((2.0 * q_c + q_h) * den - num * (cop + 1.0)) / (den * den),
            (q_c * den - num * cop) / (den * den),
        ]
    });
    (grad_pi, grad_pi_r)
}

#[derive(Debug, Clone, Default)]
struct RatioSum {
    sum: f64,
    defined: usize,
}

impl RatioSum {
    fn push(&mut self, v: Option<f64>) {
        if let Some(v) = v.filter(|v| v.is_finite()) {
            self.sum += v;
            self.defined += 1;
        }
    }

    fn finish(&self) -> RatioAverage {
        RatioAverage {
            mean: (self.defined > 0).then(|| self.sum / self.defined as f64),
            defined: self.defined,
        }
    }
}

/// Running moments of `(q_c, q_h)` in Welford form.
#[derive(Debug, Clone, Default)]
struct Accumulator {
    count: usize,
    mean_c: f64,
    mean_h: f64,
    m_cc: f64,
    m_hh: f64,
    m_ch: f64,
    scale_sum: f64,
    regimes: [usize; 4],
    ratios: [RatioSum; 4],
}

impl Accumulator {
    fn push(&mut self, heats: Heats, scale: f64) {
        self.count += 1;
        let k = self.count as f64;
        let dc = heats.q_c - self.mean_c;
        let dh = heats.q_h - self.mean_h;
        self.mean_c += dc / k;
        self.mean_h += dh / k;
        self.m_cc += dc * (heats.q_c - self.mean_c);
        self.m_hh += dh * (heats.q_h - self.mean_h);
        self.m_ch += dc * (heats.q_h - self.mean_h);
        self.scale_sum += scale;
    }
}

#[derive(Debug, Clone, Copy)]
struct Point {
    h_i: f64,
    h_f: f64,
    bath: Bath,
}

fn finish(acc: &Accumulator, n: usize, p: Point, with_ratios: bool) -> Result<EnsembleStats> {
    let r = acc.count as f64;
    let (mean_q_c, mean_q_h) = (acc.mean_c, acc.mean_h);
    let mean_w = mean_q_c + mean_q_h;
    let (t_c, t_h) = (p.bath.t_c, p.bath.t_h);

    let cov = (acc.count > 1).then(|| {
        let d = r - 1.0;
        [acc.m_cc / d, acc.m_hh / d, acc.m_ch / d]
    });
    let stderr = |var: f64| (var.max(0.0) / r).sqrt();
    let engine = engine_metrics(mean_q_h, mean_w, t_c, t_h);
    let refrigerator = refrigerator_metrics(mean_q_c, mean_w, t_c, t_h);
    let (grad_pi, grad_pi_r) = performance_gradients(mean_q_c, mean_q_h, engine.eta_carnot, refrigerator.eta_cop);
    let propagate =
        |g: [f64; 2], c: [f64; 3]| stderr(g[0] * g[0] * c[0] + g[1] * g[1] * c[1] + 2.0 * g[0] * g[1] * c[2]);

    let scale = acc.scale_sum / r;
    let regime = classify_regime(&Heats::new(mean_q_c, mean_q_h), regime_tolerance(n, scale))?;

    Ok(EnsembleStats {
        n,
        h_i: p.h_i,
        h_f: p.h_f,
        t_c,
        t_h,
        realizations: acc.count,
        mean_q_c,
        mean_q_h,
        mean_w,
        stderr_q_c: cov.map(|c| stderr(c[0])),
        stderr_q_h: cov.map(|c| stderr(c[1])),
        stderr_w: cov.map(|c| stderr(c[0] + c[1] + 2.0 * c[2])),
        cov_q_c_q_h: cov.map(|c| c[2]),
        engine,
        refrigerator,
        stderr_pi: cov.filter(|_| engine.pi.is_some()).map(|c| propagate(grad_pi, c)),
        stderr_pi_r: cov
            .zip(grad_pi_r)
            .filter(|_| refrigerator.pi_r.is_some())
            .map(|(c, g)| propagate(g, c)),
        regime,
        regime_counts: acc.regimes,
        ratios: with_ratios.then(|| RatioAverages {
            eta: acc.ratios[0].finish(),
            pi: acc.ratios[1].finish(),
            eta_r: acc.ratios[2].finish(),
            pi_r: acc.ratios[3].finish(),
        }),
    })
}

/// Ensemble statistics of the coupling disorder itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DisorderSummary {
    pub n: usize,
    pub realizations: usize,
    /// Mean of `Δ_c = mean ln|J_i|`.
    pub mean_delta_c: f64,
    /// `exp(mean_delta_c)`.
    pub h_c: f64,
    /// Geometric ensemble means of `max|J_i|` and `min|J_i|`.
    pub max_abs_coupling: f64,
    pub min_abs_coupling: f64,
}

impl DisorderSummary {
    /// Griffiths region of a field under the ensemble-averaged statistics;
    /// `None` for `h ≤ 0`, where the labels are not defined.
    pub fn griffiths(&self, h: f64) -> Option<GriffithsLabel> {
        classify_griffiths(self.mean_delta_c, self.max_abs_coupling, self.min_abs_coupling, h).ok()
    }
}

struct Outcome {
    /// Bath-major `(bath, field)` heats.
    heats: Vec<Heats>,
    /// Largest quasiparticle energy per field.
    scales: Vec<f64>,
    delta_c: f64,
    ln_max: f64,
    ln_min: f64,
}

/// Distinct field values among the `(h_i, h_f)` pairs, and each pair's
/// indices into them. Values equal up to rounding share a spectrum.
fn distinct_fields(points: &[(f64, f64)]) -> (Vec<f64>, Vec<(usize, usize)>) {
    let mut sorted: Vec<f64> = points.iter().flat_map(|&(a, b)| [a, b]).collect();
    sorted.sort_by(f64::total_cmp);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-13 * a.abs().max(b.abs()).max(1.0);
    let mut unique: Vec<f64> = Vec::with_capacity(sorted.len());
    for h in sorted {
        if !unique.last().is_some_and(|&u| close(u, h)) {
            unique.push(h);
        }
    }
    let find = |h: f64| {
        let i = unique.partition_point(|&u| u < h && !close(u, h));
        debug_assert!(close(unique[i], h));
        i
    };
    let index = points.iter().map(|&(a, b)| (find(a), find(b))).collect();
    (unique, index)
}

fn realize(
    cfg: &EnsembleConfig,
    index: usize,
    fields: &(Vec<f64>, Vec<(usize, usize)>),
    baths: &[Bath],
) -> Result<Outcome> {
    let r = cfg.realization(index)?;
    let critical = critical_field(&r)?;
    let (values, pairs) = fields;
    let spectra = values
        .iter()
        .map(|&h| chain_spectrum(&r, h, cfg.boundary).map(|s| s.energies))
        .collect::<Result<Vec<_>>>()?;
    let top = |i: usize| spectra[i].last().copied().unwrap_or(0.0);
    let scales = pairs.iter().map(|&(a, b)| top(a).max(top(b))).collect();
    let mut heats = Vec::with_capacity(baths.len() * pairs.len());
    for bath in baths {
        for &(a, b) in pairs {
            heats.push(heats_unchecked(&spectra[a], &spectra[b], bath.t_c, bath.t_h));
        }
    }
    Ok(Outcome {
        heats,
        scales,
        delta_c: critical.delta_c,
        ln_max: r.max_abs_coupling().ln(),
        ln_min: r.min_abs_coupling().ln(),
    })
}

/// Ensemble results over `baths × fields` for one chain length.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRun {
    pub n: usize,
    pub fields: Vec<f64>,
    pub delta_h: f64,
    pub baths: Vec<Bath>,
    /// Bath-major.
    pub stats: Vec<EnsembleStats>,
    pub disorder: DisorderSummary,
    pub skipped: usize,
}

impl GridRun {
    pub fn get(&self, bath: usize, field: usize) -> &EnsembleStats {
        &self.stats[bath * self.fields.len() + field]
    }

    /// Stats along the field grid for one bath pair.
    pub fn row(&self, bath: usize) -> &[EnsembleStats] {
        let f = self.fields.len();
        &self.stats[bath * f..(bath + 1) * f]
    }
}

/// Runs the ensemble for every `(bath, h_i)` combination with `h_f = h_i + delta_h`.
///
/// A realization whose diagonalization fails is skipped and logged; more than
/// 1% skipped realizations is an error.
pub fn run_grid(cfg: &EnsembleConfig, fields: &[f64], delta_h: f64, baths: &[Bath]) -> Result<GridRun> {
    cfg.validate()?;
    if fields.is_empty() || baths.is_empty() {
        return Err(Error::InvalidParameter("empty field or bath grid".into()));
    }
    if !delta_h.is_finite() || fields.iter().any(|h| !h.is_finite()) {
        return Err(Error::InvalidParameter("fields and quench size must be finite".into()));
    }
    for b in baths {
        Bath::new(b.t_c, b.t_h)?;
    }

    let points: Vec<(f64, f64)> = fields.iter().map(|&h| (h, h + delta_h)).collect();
    let distinct = distinct_fields(&points);
    let cells = baths.len() * fields.len();
    let mut acc = vec![Accumulator::default(); cells];
    let (mut sum_delta_c, mut sum_ln_max, mut sum_ln_min) = (0.0, 0.0, 0.0);
    let mut used = 0usize;
    let mut skipped = 0usize;

    let mut start = 0;
    while start < cfg.realizations {
        let end = (start + BATCH).min(cfg.realizations);
        let outcomes: Vec<Result<Outcome>> = (start..end)
            .into_par_iter()
            .map(|index| realize(cfg, index, &distinct, baths))
            .collect();

        for (offset, outcome) in outcomes.into_iter().enumerate() {
            let outcome = match outcome {
                Ok(o) => o,
                Err(err @ Error::Diagonalization { .. }) => {
                    log::warn!("n={} realization {} skipped: {err}", cfg.n, start + offset);
                    skipped += 1;
                    continue;
                }
                Err(err) => return Err(err),
            };
            used += 1;
            sum_delta_c += outcome.delta_c;
            sum_ln_max += outcome.ln_max;
            sum_ln_min += outcome.ln_min;
            for (cell, heats) in outcome.heats.iter().enumerate() {
                let (bath, field) = (&baths[cell / fields.len()], cell % fields.len());
                let scale = outcome.scales[field];
                let a = &mut acc[cell];
                a.push(*heats, scale);
                let class = classify_regime(heats, regime_tolerance(cfg.n, scale))?;
                a.regimes[class.regime.index()] += 1;
                if cfg.ratio_statistics {
                    let e = engine_metrics(heats.q_h, heats.w, bath.t_c, bath.t_h);
                    let r = refrigerator_metrics(heats.q_c, heats.w, bath.t_c, bath.t_h);
                    a.ratios[0].push(e.eta);
                    a.ratios[1].push(e.pi);
                    a.ratios[2].push(r.eta_r);
                    a.ratios[3].push(r.pi_r);
                }
            }
        }
        start = end;
    }

    if skipped as f64 > SKIP_CEILING * cfg.realizations as f64 || used == 0 {
        return Err(Error::TooManySkips {
            skipped,
            total: cfg.realizations,
        });
    }
    if skipped > 0 {
        log::info!("n={}: {skipped} of {} realizations skipped", cfg.n, cfg.realizations);
    }

    let mut stats = Vec::with_capacity(cells);
    for (cell, a) in acc.iter().enumerate() {
        let field = cell % fields.len();
        let point = Point {
            h_i: points[field].0,
            h_f: points[field].1,
            bath: baths[cell / fields.len()],
        };
        stats.push(finish(a, cfg.n, point, cfg.ratio_statistics)?);
    }

    let u = used as f64;
    let mean_delta_c = sum_delta_c / u;
    Ok(GridRun {
        n: cfg.n,
        fields: fields.to_vec(),
        delta_h,
        baths: baths.to_vec(),
        stats,
        disorder: DisorderSummary {
            n: cfg.n,
            realizations: used,
            mean_delta_c,
            h_c: mean_delta_c.exp(),
            max_abs_coupling: (sum_ln_max / u).exp(),
            min_abs_coupling: (sum_ln_min / u).exp(),
        },
        skipped,
    })
}

/// Ensemble average at a single operating point.
pub fn run_point(cfg: &EnsembleConfig, h_i: f64, delta_h: f64, t_c: f64, t_h: f64) -> Result<EnsembleStats> {
    let bath = Bath::new(t_c, t_h)?;
    Ok(run_grid(cfg, &[h_i], delta_h, &[bath])?.stats[0])
}

/// Parameters shared by the sweep-style studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub n_list: Vec<usize>,
    pub h_i_grid: FieldGrid,
    pub delta_h: f64,
    pub t_h: f64,
    pub t_c_rule: TcRule,
    pub realizations: usize,
    pub master_seed: u64,
    pub mode: StudyMode,
    pub boundary: Boundary,
    pub couplings: CouplingModel,
    pub ratio_statistics: bool,
}

impl SweepSpec {
    pub fn new(mode: StudyMode, n_list: Vec<usize>, t_h: f64, t_c_rule: TcRule) -> Self {
        Self {
            n_list,
            h_i_grid: FieldGrid::default(),
            delta_h: 0.5,
            t_h,
            t_c_rule,
            realizations: 512,
            master_seed: 0,
            mode,
            boundary: Boundary::default(),
            couplings: CouplingModel::default(),
            ratio_statistics: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() {
            return Err(Error::InvalidParameter("no system sizes given".into()));
        }
        if let Some(&n) = self.n_list.iter().find(|&&n| n < 2) {
            return Err(Error::InvalidSize(n));
        }
        self.h_i_grid.validate()?;
        if !self.delta_h.is_finite() {
            return Err(Error::InvalidParameter("quench size must be finite".into()));
        }
        if self.realizations == 0 {
            return Err(Error::InvalidParameter("at least one realization is required".into()));
        }
        self.t_c_rule.validate()?;
        Bath::new(self.t_c_rule.cold(self.t_h), self.t_h)?;
        Ok(())
    }

    pub fn ensemble(&self, n: usize) -> EnsembleConfig {
        EnsembleConfig {
            n,
            realizations: self.realizations,
            master_seed: self.master_seed,
            boundary: self.boundary,
            couplings: self.couplings,
            ratio_statistics: self.ratio_statistics,
        }
    }

    fn require(&self, mode: StudyMode) -> Result<()> {
        if self.mode != mode {
            return Err(Error::InvalidParameter(format!(
                "study expects {mode:?}, spec is {:?}",
                self.mode
            )));
        }
        self.validate()
    }
}

/// Regime of the mean heats over a `(t_c, h_i)` grid at fixed `t_h`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeMap {
    pub n: usize,
    pub t_h: f64,
    pub t_c: Vec<f64>,
    pub h_i: Vec<f64>,
    /// `t_c`-major.
    pub cells: Vec<EnsembleStats>,
}

impl RegimeMap {
    pub fn cell(&self, t_c: usize, h_i: usize) -> &EnsembleStats {
        &self.cells[t_c * self.h_i.len() + h_i]
    }

    pub fn row(&self, t_c: usize) -> &[EnsembleStats] {
        let f = self.h_i.len();
        &self.cells[t_c * f..(t_c + 1) * f]
    }
}

pub fn regime_map(spec: &SweepSpec, t_c_grid: &[f64]) -> Result<RegimeMap> {
    spec.require(StudyMode::RegimeMap)?;
    let &[n] = spec.n_list.as_slice() else {
        return Err(Error::InvalidParameter(
            "a regime map takes exactly one system size".into(),
        ));
    };
    let baths = t_c_grid
        .iter()
        .map(|&t_c| Bath::new(t_c, spec.t_h))
        .collect::<Result<Vec<_>>>()?;
    let fields = spec.h_i_grid.values();
    let run = run_grid(&spec.ensemble(n), &fields, spec.delta_h, &baths)?;
    Ok(RegimeMap {
        n,
        t_h: spec.t_h,
        t_c: t_c_grid.to_vec(),
        h_i: fields,
        cells: run.stats,
    })
}

/// One `(n, h_i)` row of a work/performance sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub stats: EnsembleStats,
    pub h_c_mean: f64,
    pub griffiths: Option<GriffithsLabel>,
}

impl SweepRow {
    /// Griffiths label for the row, with `critical` on the grid point nearest
    /// the ensemble critical field.
    pub fn griffiths_marker(&self) -> &'static str {
        self.griffiths.map_or("none", GriffithsLabel::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub t_h: f64,
    pub t_c: f64,
    pub delta_h: f64,
    /// `n`-major, then ascending `h_i`.
    pub rows: Vec<SweepRow>,
    pub disorder: Vec<DisorderSummary>,
    pub skipped: usize,
}

impl SweepTable {
    /// Rows of one system size.
    pub fn curve(&self, n: usize) -> Vec<&SweepRow> {
        self.rows.iter().filter(|r| r.stats.n == n).collect()
    }
}

fn sweep_rows(run: &GridRun, bath: usize) -> Vec<SweepRow> {
    let row = run.row(bath);
    let d = &run.disorder;
    let nearest = row
        .iter()
        .enumerate()
        .filter(|(_, s)| s.h_i > 0.0)
        .min_by(|a, b| {
            (a.1.h_i.ln() - d.mean_delta_c)
                .abs()
                .total_cmp(&(b.1.h_i.ln() - d.mean_delta_c).abs())
        })
        .map(|(k, _)| k);
    row.iter()
        .enumerate()
        .map(|(k, s)| SweepRow {
            stats: *s,
            h_c_mean: d.h_c,
            griffiths: if Some(k) == nearest {
                Some(GriffithsLabel::Critical)
            } else {
                d.griffiths(s.h_i)
            },
        })
        .collect()
}

fn sweep(spec: &SweepSpec) -> Result<SweepTable> {
    let t_c = spec.t_c_rule.cold(spec.t_h);
    let bath = [Bath::new(t_c, spec.t_h)?];
    let fields = spec.h_i_grid.values();
    let mut rows = Vec::with_capacity(spec.n_list.len() * fields.len());
    let mut disorder = Vec::with_capacity(spec.n_list.len());
    let mut skipped = 0;
    for &n in &spec.n_list {
        log::info!(
            "sweep n={n}: {} realizations x {} fields",
            spec.realizations,
            fields.len()
        );
        let run = run_grid(&spec.ensemble(n), &fields, spec.delta_h, &bath)?;
        rows.extend(sweep_rows(&run, 0));
        disorder.push(run.disorder);
        skipped += run.skipped;
    }
    Ok(SweepTable {
        t_h: spec.t_h,
        t_c,
        delta_h: spec.delta_h,
        rows,
        disorder,
        skipped,
    })
}

/// Work and performance per spin along `h_i`, with `Π/N` clipped to 0 where
/// the mean work is negative.
pub fn sweep_work_performance(spec: &SweepSpec) -> Result<SweepTable> {
    spec.require(StudyMode::EngineStudy)?;
    sweep(spec)
}

/// Refrigerator performance per spin along `h_i`, with `Π_R/N` clipped to 0
/// where the mean work is positive.
pub fn sweep_refrigerator(spec: &SweepSpec) -> Result<SweepTable> {
    spec.require(StudyMode::RefrigeratorStudy)?;
    sweep(spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingQuantity {
    W,
    Pi,
    PiR,
}

impl ScalingQuantity {
    pub fn as_str(self) -> &'static str {
        match self {
            ScalingQuantity::W => "w",
            ScalingQuantity::Pi => "pi",
            ScalingQuantity::PiR => "pir",
        }
    }

    /// Per-spin curve value and its standard error. An undefined performance
    /// (e.g. `Π_R` at exactly zero work, where it tends to 0) counts as no
    /// useful output.
    pub fn per_spin(self, s: &EnsembleStats) -> (f64, Option<f64>) {
        let n = s.n as f64;
        match self {
            ScalingQuantity::W => (s.w_per_spin(), s.stderr_w_per_spin()),
            ScalingQuantity::Pi => (
                s.pi_per_spin_clipped().unwrap_or(0.0),
                if s.mean_w < 0.0 {
                    Some(0.0)
                } else {
                    s.stderr_pi.map(|e| e / n)
                },
            ),
            ScalingQuantity::PiR => (
                s.pi_r_per_spin_clipped().unwrap_or(0.0),
                if s.mean_w > 0.0 {
                    Some(0.0)
                } else {
                    s.stderr_pi_r.map(|e| e / n)
                },
            ),
        }
    }

    /// Peak labels fitted for this quantity.
    pub fn tracked(self) -> &'static [PeakRole] {
        match self {
            ScalingQuantity::W | ScalingQuantity::Pi => &[PeakRole::Quantum, PeakRole::Classical],
            ScalingQuantity::PiR => &[PeakRole::Dominant],
        }
    }
}

impl std::str::FromStr for ScalingQuantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "w" | "work" => Ok(ScalingQuantity::W),
            "pi" => Ok(ScalingQuantity::Pi),
            "pir" | "pi_r" => Ok(ScalingQuantity::PiR),
            other => Err(Error::InvalidParameter(format!("unknown scaling quantity `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeakRole {
    Quantum,
    Classical,
    /// Highest peak regardless of labeling.
    Dominant,
}

impl PeakRole {
    pub fn as_str(self) -> &'static str {
        match self {
            PeakRole::Quantum => "quantum",
            PeakRole::Classical => "classical",
            PeakRole::Dominant => "dominant",
        }
    }

    pub fn pick(self, peaks: &PeakSet) -> Option<analysis::Peak> {
        match self {
            PeakRole::Quantum => peaks.quantum(),
            PeakRole::Classical => peaks.classical(),
            PeakRole::Dominant => peaks.dominant(),
        }
    }
}

/// Peaks of one per-spin curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePeaks {
    pub n: usize,
    pub peaks: PeakSet,
    pub min_prominence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakFit {
    pub role: PeakRole,
    /// `Err` carries the reason the fit is unavailable.
    pub fit: std::result::Result<ScalingFit, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub t_h: f64,
    pub t_c: f64,
    pub curves: Vec<CurvePeaks>,
    pub fits: Vec<PeakFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingStudy {
    pub quantity: ScalingQuantity,
    pub delta_h: f64,
    pub grid_step: f64,
    pub rows: Vec<ScalingRow>,
}

impl ScalingStudy {
    /// Quench midpoints `h_peak + δh/2` of the tracked peak, per `t_h` and size.
    pub fn midpoints(&self, role: PeakRole) -> Vec<Vec<Option<f64>>> {
        self.rows
            .iter()
            .map(|row| {
                row.curves
                    .iter()
                    .map(|c| {
                        role.pick(&c.peaks)
                            .map(|p| analysis::quench_midpoint(p.location, self.delta_h))
                    })
                    .collect()
            })
            .collect()
    }
}

/// A per-spin curve of one chain length, with per-point standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct SizedCurve {
    pub n: usize,
    pub points: Vec<(f64, f64)>,
    pub stderr: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakAnalysis {
    pub curves: Vec<CurvePeaks>,
    pub fits: Vec<PeakFit>,
}

/// Peaks of each curve and power-law fits of the tracked peak totals
/// (`N ·` per-spin height) across sizes. Fits that cannot be made (missing
/// peaks, fewer than 3 sizes) carry the reason instead of failing the call.
pub fn analyze_curves(quantity: ScalingQuantity, curves: &[SizedCurve]) -> Result<PeakAnalysis> {
    let curves = curves
        .iter()
        .map(|c| {
            let min_prominence = analysis::default_prominence(&c.stderr);
            Ok(CurvePeaks {
                n: c.n,
                peaks: analysis::find_peaks(&c.points, min_prominence)?,
                min_prominence,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let fits = quantity
        .tracked()
        .iter()
        .map(|&role| {
            let points: Option<Vec<(f64, f64)>> = curves
                .iter()
                .map(|c| role.pick(&c.peaks).map(|p| (c.n as f64, p.height * c.n as f64)))
                .collect();
            let fit = match points {
                Some(points) => analysis::fit_power_law(&points).map_err(|e| e.to_string()),
                None => Err(format!("no {} peak for every size", role.as_str())),
            };
            PeakFit { role, fit }
        })
        .collect();
    Ok(PeakAnalysis { curves, fits })
}

/// Peak finding and power-law fits of peak heights (totals, `N ·` per-spin
/// value) across `spec.n_list`, for each hot-bath temperature.
pub fn scaling_study(spec: &SweepSpec, t_h_grid: &[f64], quantity: ScalingQuantity) -> Result<ScalingStudy> {
    spec.validate()?;
    let mut distinct = spec.n_list.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::Underdetermined(distinct.len()));
    }
    if t_h_grid.is_empty() {
        return Err(Error::InvalidParameter("empty hot-bath grid".into()));
    }
    let baths = t_h_grid
        .iter()
        .map(|&t_h| Bath::new(spec.t_c_rule.cold(t_h), t_h))
        .collect::<Result<Vec<_>>>()?;
    let fields = spec.h_i_grid.values();

    let mut runs = Vec::with_capacity(spec.n_list.len());
    for &n in &spec.n_list {
        log::info!(
            "scaling n={n}: {} realizations x {} fields x {} temperatures",
            spec.realizations,
            fields.len(),
            baths.len()
        );
        runs.push(run_grid(&spec.ensemble(n), &fields, spec.delta_h, &baths)?);
    }

    let mut rows = Vec::with_capacity(baths.len());
    for (b, bath) in baths.iter().enumerate() {
        let curves: Vec<SizedCurve> = runs
            .iter()
            .map(|run| {
                let (points, stderr) = run
                    .row(b)
                    .iter()
                    .map(|s| {
                        let (v, e) = quantity.per_spin(s);
                        ((s.h_i, v), e)
                    })
                    .unzip();
                SizedCurve {
                    n: run.n,
                    points,
                    stderr,
                }
            })
            .collect();
        let PeakAnalysis { curves, fits } = analyze_curves(quantity, &curves)?;
        rows.push(ScalingRow {
            t_h: bath.t_h,
            t_c: bath.t_c,
            curves,
            fits,
        });
    }
    Ok(ScalingStudy {
        quantity,
        delta_h: spec.delta_h,
        grid_step: spec.h_i_grid.step(),
        rows,
    })
}
