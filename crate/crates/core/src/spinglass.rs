//! Edwards-Anderson coupling realizations for the periodic transverse-field
//! chain, the disorder critical field and the Griffiths-phase labels.
//!
//! Couplings are drawn i.i.d. from `Normal(0, 1/N)`. Sampling is keyed by a
//! 64-bit seed; ensembles derive one seed per `(master seed, n, realization)`
//! so that any subset of realizations can be regenerated independently and in
//! any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-width of the `Critical` band in log-field space.
pub const CRITICAL_TOLERANCE: f64 = 1e-12;

/// One sampled coupling vector `J_1..J_N` (bond `i` joins spins `i` and `i+1`,
/// bond `N` closes the ring).
#[derive(Debug, Clone, PartialEq)]
pub struct DisorderRealization {
    couplings: Vec<f64>,
    seed: u64,
}

impl DisorderRealization {
    /// Wraps an explicit coupling vector. `seed` is carried as metadata only.
    pub fn from_couplings(couplings: Vec<f64>, seed: u64) -> Result<Self> {
        if couplings.len() < 2 {
            return Err(Error::InvalidSize(couplings.len()));
        }
        if let Some(bad) = couplings.iter().find(|j| !j.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite coupling {bad}")));
        }
        Ok(Self { couplings, seed })
    }

    /// Clean chain with every bond equal to `j`.
    pub fn uniform(n: usize, j: f64) -> Result<Self> {
        Self::from_couplings(vec![j; n], 0)
    }

    pub fn n(&self) -> usize {
        self.couplings.len()
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn max_abs_coupling(&self) -> f64 {
        self.couplings.iter().fold(0.0_f64, |acc, j| acc.max(j.abs()))
    }

    pub fn min_abs_coupling(&self) -> f64 {
        self.couplings.iter().fold(f64::INFINITY, |acc, j| acc.min(j.abs()))
    }
}

/// Draws `n` couplings from `Normal(0, 1/n)`; a pure function of `(n, seed)`.
pub fn sample_couplings(n: usize, seed: u64) -> Result<DisorderRealization> {
    if n < 2 {
        return Err(Error::InvalidSize(n));
    }
    let normal = Normal::new(0.0, 1.0 / (n as f64).sqrt()).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let couplings = (0..n).map(|_| normal.sample(&mut rng)).collect();
    Ok(DisorderRealization { couplings, seed })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of realization `index` for chains of `n` spins under `master`.
pub fn derive_seed(master: u64, n: usize, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ n as u64) ^ index)
}

/// Disorder critical point of one realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalPoint {
    /// Mean of `ln|J_i|` over the chain.
    pub delta_c: f64,
    /// `exp(delta_c)`.
    pub h_c: f64,
}

impl CriticalPoint {
    /// Log-field control parameter of a uniform field.
    pub fn delta_h(h: f64) -> f64 {
        h.ln()
    }
}

pub fn critical_field(r: &DisorderRealization) -> Result<CriticalPoint> {
    let mut sum = 0.0;
    for (index, j) in r.couplings().iter().enumerate() {
        if *j == 0.0 {
            return Err(Error::DegenerateCoupling { index });
        }
        sum += j.abs().ln();
    }
    let delta_c = sum / r.n() as f64;
    Ok(CriticalPoint {
        delta_c,
        h_c: delta_c.exp(),
    })
}

/// Disorder-averaged critical field for one chain length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalFieldRow {
    pub n: usize,
    /// Realization average of `delta_c`.
    pub mean_delta_c: f64,
    /// `exp(mean_delta_c)`: the average is taken in log space, inside the exponent.
    pub mean_h_c: f64,
    /// Delta-method standard error of `mean_h_c`; `None` for a single sample.
    pub stderr_h_c: Option<f64>,
    pub samples: usize,
}

/// Averages the critical field over `samples_per_size` realizations for each
/// chain length. Realization `r` of size `n` uses `derive_seed(seed, n, r)`.
pub fn critical_field_scaling(sizes: &[usize], samples_per_size: usize, seed: u64) -> Result<Vec<CriticalFieldRow>> {
    if sizes.is_empty() {
        return Err(Error::InvalidParameter("no system sizes given".into()));
    }
    if samples_per_size == 0 {
        return Err(Error::InvalidParameter("samples per size must be positive".into()));
    }
    if let Some(&bad) = sizes.iter().find(|&&n| n < 2) {
        return Err(Error::InvalidSize(bad));
    }

    sizes
        .iter()
        .map(|&n| {
            let deltas = (0..samples_per_size as u64)
                .into_par_iter()
                .map(|r| {
                    let realization = sample_couplings(n, derive_seed(seed, n, r))?;
                    critical_field(&realization).map(|c| c.delta_c)
                })
                .collect::<Result<Vec<f64>>>()?;

            let count = deltas.len() as f64;
            let mean = deltas.iter().sum::<f64>() / count;
            let mean_h_c = mean.exp();
            let stderr_h_c = (deltas.len() > 1).then(|| {
                let var = deltas.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (count - 1.0);
                mean_h_c * (var / count).sqrt()
            });
            Ok(CriticalFieldRow {
                n,
                mean_delta_c: mean,
                mean_h_c,
                stderr_h_c,
                samples: samples_per_size,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GriffithsLabel {
    WeaklyDisordered,
    StronglyDisordered,
    WeaklyOrdered,
    StronglyOrdered,
    Critical,
}

impl GriffithsLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            GriffithsLabel::WeaklyDisordered => "weakly_disordered",
            GriffithsLabel::StronglyDisordered => "strongly_disordered",
            GriffithsLabel::WeaklyOrdered => "weakly_ordered",
            GriffithsLabel::StronglyOrdered => "strongly_ordered",
            GriffithsLabel::Critical => "critical",
        }
    }
}

impl std::fmt::Display for GriffithsLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Griffiths label from precomputed coupling statistics. Used directly by
/// ensemble markers, where the statistics are realization averages.
pub fn classify_griffiths(delta_c: f64, max_abs: f64, min_abs: f64, h: f64) -> Result<GriffithsLabel> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidField(h));
    }
    let delta_h = h.ln();
    let label = if (delta_h - delta_c).abs() <= CRITICAL_TOLERANCE {
        GriffithsLabel::Critical
    } else if delta_h > delta_c {
        if max_abs > h {
            GriffithsLabel::WeaklyDisordered
        } else {
            GriffithsLabel::StronglyDisordered
        }
    } else if min_abs < h {
        GriffithsLabel::WeaklyOrdered
    } else {
        GriffithsLabel::StronglyOrdered
    };
    Ok(label)
}

/// Griffiths-phase label of the realization at uniform field `h` (with
/// `max h_i = min h_i = h`).
pub fn griffiths_classify(r: &DisorderRealization, h: f64) -> Result<GriffithsLabel> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidField(h));
    }
    let critical = critical_field(r)?;
    classify_griffiths(critical.delta_c, r.max_abs_coupling(), r.min_abs_coupling(), h)
}
