//! Heat and work bookkeeping of the four-stroke quantum Otto cycle.
//!
//! Strokes: adiabatic expansion `h_i -> h_f` (occupations frozen), hot
//! thermalization at `h_f`, adiabatic compression `h_f -> h_i`, cold
//! thermalization at `h_i`. Quasiparticle mode `j` keeps its place in the
//! ascending order across the adiabatic strokes. Positive heat is absorbed by
//! the working medium; `W = Q_c + Q_h` is the work delivered per cycle.

use serde::{Deserialize, Serialize};

use crate::bdg::QuasiparticleSpectrum;
use crate::error::{Error, Result};

/// Fermi-Dirac occupation `1 / (exp(e/t) + 1)`; the step function at `t = 0`.
pub fn fermi_occupation(e: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidTemperature(t));
    }
    Ok(occupation(e, t))
}

#[inline]
fn occupation(e: f64, t: f64) -> f64 {
    if t == 0.0 {
        return if e < 0.0 {
            1.0
        } else if e == 0.0 {
            0.5
        } else {
            0.0
        };
    }
    let x = e / t;
    if x > 0.0 {
        let z = (-x).exp();
        z / (1.0 + z)
    } else {
        1.0 / (x.exp() + 1.0)
    }
}

/// Operating point of one cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleParams {
    /// Field during the cold stroke.
    pub h_i: f64,
    /// Field during the hot stroke.
    pub h_f: f64,
    pub t_c: f64,
    pub t_h: f64,
}

impl CycleParams {
    pub fn new(h_i: f64, h_f: f64, t_c: f64, t_h: f64) -> Result<Self> {
        for t in [t_c, t_h] {
            if !(t >= 0.0) || !t.is_finite() {
                return Err(Error::InvalidTemperature(t));
            }
        }
        if t_h < t_c {
            return Err(Error::InvalidParameter(format!(
                "hot bath ({t_h}) is colder than the cold bath ({t_c})"
            )));
        }
        if !h_i.is_finite() || !h_f.is_finite() {
            return Err(Error::InvalidParameter("fields must be finite".into()));
        }
        Ok(Self { h_i, h_f, t_c, t_h })
    }

    pub fn delta_h(&self) -> f64 {
        self.h_f - self.h_i
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Heats {
    pub q_c: f64,
    pub q_h: f64,
    /// `q_c + q_h`.
    pub w: f64,
}

impl Heats {
    pub fn new(q_c: f64, q_h: f64) -> Self {
        Self { q_c, q_h, w: q_c + q_h }
    }
}

/// Heats exchanged with both baths for spectra `initial` (at `h_i`) and
/// `expanded` (at `h_f`).
///
/// `Q_h = Σ E_j [f(E_j, T_h) - f(ε_j, T_c)]`,
/// `Q_c = Σ ε_j [f(ε_j, T_c) - f(E_j, T_h)]`, summed in ascending mode order.
pub fn cycle_heats(
    initial: &QuasiparticleSpectrum,
    expanded: &QuasiparticleSpectrum,
    t_c: f64,
    t_h: f64,
) -> Result<Heats> {
    if initial.n() != expanded.n() {
        return Err(Error::ShapeMismatch {
            left: initial.n(),
            right: expanded.n(),
        });
    }
    for t in [t_c, t_h] {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidTemperature(t));
        }
    }
    Ok(heats_unchecked(&initial.energies, &expanded.energies, t_c, t_h))
}

/// [`cycle_heats`] over raw energy slices of equal length and validated
/// temperatures.
#[inline]
pub(crate) fn heats_unchecked(initial: &[f64], expanded: &[f64], t_c: f64, t_h: f64) -> Heats {
    let (mut q_c, mut q_h) = (0.0, 0.0);
    for (&eps, &big) in initial.iter().zip(expanded) {
        let transfer = occupation(big, t_h) - occupation(eps, t_c);
        q_h += big * transfer;
        q_c -= eps * transfer;
    }
    Heats::new(q_c, q_h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Engine,
    Refrigerator,
    Heater,
    Accelerator,
}

impl Regime {
    pub const ALL: [Regime; 4] = [
        Regime::Engine,
        Regime::Refrigerator,
        Regime::Heater,
        Regime::Accelerator,
    ];

    /// Sign pattern `(W, Q_c, Q_h)`.
    fn signs(self) -> [i8; 3] {
        match self {
            Regime::Engine => [1, -1, 1],
            Regime::Refrigerator => [-1, 1, -1],
            Regime::Heater => [-1, -1, -1],
            Regime::Accelerator => [-1, -1, 1],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Engine => "engine",
            Regime::Refrigerator => "refrigerator",
            Regime::Heater => "heater",
            Regime::Accelerator => "accelerator",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Regime plus a flag for heats within tolerance of zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RegimeClass {
    pub regime: Regime,
    /// At least one of `W`, `Q_c`, `Q_h` lies within the tolerance of zero;
    /// `regime` is then the adjacent regime matching every nonzero sign.
    pub boundary: bool,
}

/// Tolerance for regime signs: `1e-12 · n · energy scale`.
pub fn regime_tolerance(n: usize, energy_scale: f64) -> f64 {
    1e-12 * n as f64 * energy_scale.abs().max(f64::MIN_POSITIVE)
}

const BOUNDARY_ORDER: [Regime; 4] = [
    Regime::Heater,
    Regime::Accelerator,
    Regime::Refrigerator,
    Regime::Engine,
];

/// Operating regime from the signs of `(W, Q_c, Q_h)`.
///
/// Engine: `W > 0, Q_h > 0, Q_c < 0`. Refrigerator: `W < 0, Q_c > 0, Q_h < 0`.
/// Heater: all negative. Accelerator: `W < 0, Q_c < 0, Q_h > 0`. A value
/// within `tol` of zero matches either sign. Such a boundary point goes to the
/// first compatible regime in the order heater, accelerator, refrigerator,
/// engine, so a cycle with vanishing work or cooling is never reported as
/// producing it.
pub fn classify_regime(heats: &Heats, tol: f64) -> Result<RegimeClass> {
    let sign = |x: f64| -> i8 {
        if x > tol {
            1
        } else if x < -tol {
            -1
        } else {
            0
        }
    };
    let observed = [sign(heats.w), sign(heats.q_c), sign(heats.q_h)];
    let boundary = observed.contains(&0);

    BOUNDARY_ORDER
        .iter()
        .find(|r| {
            r.signs()
                .iter()
                .zip(&observed)
                .all(|(want, got)| *got == 0 || got == want)
        })
        .map(|&regime| RegimeClass { regime, boundary })
        .ok_or(Error::ClausiusViolation {
            q_c: heats.q_c,
            q_h: heats.q_h,
            w: heats.w,
        })
}

/// Heat-engine figures of merit. `None` marks an undefined ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EngineMetrics {
    /// `W / Q_h`.
    pub eta: Option<f64>,
    /// `1 - T_c / T_h`.
    pub eta_carnot: f64,
    /// `eta_carnot - eta`.
    pub delta_eta: Option<f64>,
    /// Thermodynamic performance `W / delta_eta`, defined for `delta_eta > 0`.
    pub pi: Option<f64>,
}

pub fn engine_metrics(q_h: f64, w: f64, t_c: f64, t_h: f64) -> EngineMetrics {
    let eta_carnot = 1.0 - t_c / t_h;
    let eta = (q_h != 0.0).then(|| w / q_h);
    let delta_eta = eta.map(|e| eta_carnot - e);
    let pi = delta_eta.filter(|d| *d > 0.0).map(|d| w / d);
    EngineMetrics {
        eta,
        eta_carnot,
        delta_eta,
        pi,
    }
}

/// Refrigerator figures of merit. `None` marks an undefined or infinite value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RefrigeratorMetrics {
    /// `Q_c / |W| = -Q_c / W`.
    pub eta_r: Option<f64>,
    /// Carnot coefficient of performance `T_c / (T_h - T_c)`; `None` for
    /// equal baths, where it diverges.
    pub eta_cop: Option<f64>,
    /// `eta_cop - eta_r`.
    pub delta_eta_r: Option<f64>,
    /// Refrigerator performance `Q_c / delta_eta_r`, defined for `delta_eta_r > 0`.
    pub pi_r: Option<f64>,
}

pub fn refrigerator_metrics(q_c: f64, w: f64, t_c: f64, t_h: f64) -> RefrigeratorMetrics {
    let eta_r = (w != 0.0).then(|| -q_c / w);
    let eta_cop = (t_h != t_c).then(|| t_c / (t_h - t_c));
    let delta_eta_r = match (eta_cop, eta_r) {
        (Some(cop), Some(r)) => Some(cop - r),
        _ => None,
    };
    let pi_r = delta_eta_r.filter(|d| *d > 0.0).map(|d| q_c / d);
    RefrigeratorMetrics {
        eta_r,
        eta_cop,
        delta_eta_r,
        pi_r,
    }
}

/// Everything known about one cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CycleResult {
    pub params: CycleParams,
    pub heats: Heats,
    pub engine: EngineMetrics,
    pub refrigerator: RefrigeratorMetrics,
    pub regime: RegimeClass,
}

/// Runs one cycle between spectra at `params.h_i` and `params.h_f`.
pub fn run_cycle(
    initial: &QuasiparticleSpectrum,
    expanded: &QuasiparticleSpectrum,
    params: CycleParams,
) -> Result<CycleResult> {
    let heats = cycle_heats(initial, expanded, params.t_c, params.t_h)?;
    let scale = initial.max_energy().max(expanded.max_energy());
    let regime = classify_regime(&heats, regime_tolerance(initial.n(), scale))?;
    Ok(CycleResult {
        params,
        heats,
        engine: engine_metrics(heats.q_h, heats.w, params.t_c, params.t_h),
        refrigerator: refrigerator_metrics(heats.q_c, heats.w, params.t_c, params.t_h),
        regime,
    })
}
