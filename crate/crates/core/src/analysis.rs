//! Curve analysis: peak finding, crossover interpolation, power-law fits.

use serde::Serialize;

use crate::error::{Error, Result};

/// A local maximum (or, for the separating minimum, minimum) of a sampled curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    pub index: usize,
    pub location: f64,
    pub height: f64,
    /// Zero for minima.
    pub prominence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PeakSet {
    Empty,
    /// One peak, not labeled.
    Single {
        peak: Peak,
    },
    Double {
        quantum: Peak,
        classical: Peak,
        separating_minimum: Peak,
    },
}

impl PeakSet {
    /// Lower-field peak of a double structure.
    pub fn quantum(&self) -> Option<Peak> {
        match self {
            PeakSet::Double { quantum, .. } => Some(*quantum),
            _ => None,
        }
    }

    pub fn classical(&self) -> Option<Peak> {
        match self {
            PeakSet::Double { classical, .. } => Some(*classical),
            _ => None,
        }
    }

    /// Highest peak, labeled or not.
    pub fn dominant(&self) -> Option<Peak> {
        match self {
            PeakSet::Empty => None,
            PeakSet::Single { peak } => Some(*peak),
            PeakSet::Double { quantum, classical, .. } => Some(if classical.height > quantum.height {
                *classical
            } else {
                *quantum
            }),
        }
    }

    pub fn count(&self) -> usize {
        match self {
            PeakSet::Empty => 0,
            PeakSet::Single { .. } => 1,
            PeakSet::Double { .. } => 2,
        }
    }
}

fn check_curve(curve: &[(f64, f64)], min_points: usize) -> Result<()> {
    if curve.len() < min_points {
        return Err(Error::InvalidParameter(format!(
            "curve needs at least {min_points} points, got {}",
            curve.len()
        )));
    }
    if let Some(k) = curve.windows(2).position(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::Unsorted(k + 1));
    }
    if let Some(k) = curve.iter().position(|p| !p.1.is_finite() || !p.0.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite curve value at index {k}")));
    }
    Ok(())
}

/// Interior local maxima; a flat top counts once, at its middle (rounded down).
fn local_maxima(y: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < y.len() {
        if y[i - 1] < y[i] {
            let mut ahead = i + 1;
            while ahead + 1 < y.len() && y[ahead] == y[i] {
                ahead += 1;
            }
            if y[ahead] < y[i] {
                out.push((i + ahead - 1) / 2);
                i = ahead;
                continue;
            }
        }
        i += 1;
    }
    out
}

/// Height above the higher of the two bases reached before meeting a strictly
/// higher point (or the end of the curve) on each side.
fn prominence(y: &[f64], peak: usize) -> f64 {
    let v = y[peak];
    let mut left = v;
    for &x in y[..peak].iter().rev() {
        if x > v {
            break;
        }
        left = left.min(x);
    }
    let mut right = v;
    for &x in &y[peak + 1..] {
        if x > v {
            break;
        }
        right = right.min(x);
    }
    v - left.max(right)
}

/// Local maxima of `curve` with prominence at least `min_prominence`.
///
/// With two or more, the two most prominent are kept and labeled by position:
/// the lower-`h_i` one is the quantum peak, the other the classical peak, and
/// the lowest point between them is the separating minimum. End points are
/// never peaks.
pub fn find_peaks(curve: &[(f64, f64)], min_prominence: f64) -> Result<PeakSet> {
    check_curve(curve, 5)?;
    let y: Vec<f64> = curve.iter().map(|p| p.1).collect();
    let mut peaks: Vec<Peak> = local_maxima(&y)
        .into_iter()
        .map(|i| Peak {
            index: i,
            location: curve[i].0,
            height: y[i],
            prominence: prominence(&y, i),
        })
        .filter(|p| p.prominence >= min_prominence)
        .collect();

    // Most prominent first; ties go to the lower field.
    peaks.sort_by(|a, b| b.prominence.total_cmp(&a.prominence).then(a.index.cmp(&b.index)));
    Ok(match peaks.as_slice() {
        [] => PeakSet::Empty,
        [peak] => PeakSet::Single { peak: *peak },
        [a, b, ..] => {
            let (q, c) = if a.index < b.index { (*a, *b) } else { (*b, *a) };
            let mut m = q.index + 1;
            for k in q.index + 1..c.index {
                if y[k] < y[m] {
                    m = k;
                }
            }
            PeakSet::Double {
                quantum: q,
                classical: c,
                separating_minimum: Peak {
                    index: m,
                    location: curve[m].0,
                    height: y[m],
                    prominence: 0.0,
                },
            }
        }
    })
}

/// Default prominence threshold: twice the median of the finite standard
/// errors, or 0 when none is available.
pub fn default_prominence(stderr: &[Option<f64>]) -> f64 {
    let mut e: Vec<f64> = stderr.iter().flatten().copied().filter(|v| v.is_finite()).collect();
    if e.is_empty() {
        return 0.0;
    }
    e.sort_by(f64::total_cmp);
    let mid = e.len() / 2;
    let median = if e.len() % 2 == 1 {
        e[mid]
    } else {
        0.5 * (e[mid - 1] + e[mid])
    };
    2.0 * median
}

/// Three-point moving average; the end points average over two.
pub fn smooth3(curve: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let n = curve.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(n - 1);
            let sum: f64 = curve[lo..=hi].iter().map(|p| p.1).sum();
            (curve[i].0, sum / (hi - lo + 1) as f64)
        })
        .collect()
}

/// Vertex of the parabola through the peak and its two neighbours.
///
/// Returns the grid point itself at the curve ends or when the three points
/// are collinear.
pub fn refine_parabolic(curve: &[(f64, f64)], peak: &Peak) -> (f64, f64) {
    let i = peak.index;
    if i == 0 || i + 1 >= curve.len() {
        return (peak.location, peak.height);
    }
    let [(x0, y0), (x1, y1), (x2, y2)] = [curve[i - 1], curve[i], curve[i + 1]];
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let a = (d12 - d01) / (x2 - x0);
    if a == 0.0 || !a.is_finite() {
        return (peak.location, peak.height);
    }
    let b = d01 - a * (x0 + x1);
    let x = -b / (2.0 * a);
    let y = y1 + (x - x1) * (d01 + a * (x - x0));
    (x, y)
}

/// Temperature where `quantum - classical` first changes sign, by linear
/// interpolation. `heights` holds `(t_h, quantum, classical)` in ascending `t_h`.
/// `None` when the difference keeps one sign.
pub fn peak_crossover(heights: &[(f64, f64, f64)]) -> Result<Option<f64>> {
    if let Some(k) = heights.windows(2).position(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::Unsorted(k + 1));
    }
    let diff: Vec<(f64, f64)> = heights.iter().map(|&(t, q, c)| (t, q - c)).collect();
    for w in diff.windows(2) {
        let ((t0, d0), (t1, d1)) = (w[0], w[1]);
        if d0 == 0.0 {
            return Ok(Some(t0));
        }
        if d0.signum() != d1.signum() || d1 == 0.0 {
            return Ok(Some(t0 + (t1 - t0) * d0 / (d0 - d1)));
        }
    }
    Ok(diff.last().filter(|p| p.1 == 0.0).map(|p| p.0))
}

/// Least-squares fit of `y = b N^α` in log-log space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    pub alpha: f64,
    pub b: f64,
    pub r_squared: f64,
    pub points_used: Vec<(f64, f64)>,
}

pub fn fit_power_law(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::Underdetermined(points.len()));
    }
    if let Some(&(n, value)) = points.iter().find(|(n, v)| !(*n > 0.0 && *v > 0.0) || !v.is_finite()) {
        return Err(Error::NonPositive { n, value });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Underdetermined(1));
    }
    let alpha = sxy / sxx;
    let intercept = my - alpha * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - alpha * x).powi(2))
        .sum();
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(ScalingFit {
        alpha,
        b: intercept.exp(),
        r_squared,
        points_used: points.to_vec(),
    })
}

/// Midpoint `h_i + δh/2` of the quench that starts at a peak.
pub fn quench_midpoint(h_i_peak: f64, delta_h: f64) -> f64 {
    h_i_peak + 0.5 * delta_h
}

/// Spread `max - min` of the quench midpoints across sizes; `None` if any size
/// lacks a peak.
pub fn midpoint_spread(midpoints: &[Option<f64>]) -> Option<f64> {
    let v: Option<Vec<f64>> = midpoints.iter().copied().collect();
    let v = v.filter(|v| !v.is_empty())?;
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    Some(hi - lo)
}

/// First temperature from which the midpoint spread across sizes stays above
/// `threshold` for the rest of the (ascending) `t_h` grid.
pub fn midpoint_divergence_onset(t_h: &[f64], midpoints: &[Vec<Option<f64>>], threshold: f64) -> Result<Option<f64>> {
    if t_h.len() != midpoints.len() {
        return Err(Error::ShapeMismatch {
            left: t_h.len(),
            right: midpoints.len(),
        });
    }
    if let Some(k) = t_h.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::Unsorted(k + 1));
    }
    let mut onset = None;
    for (t, m) in t_h.iter().zip(midpoints).rev() {
        match midpoint_spread(m) {
            Some(s) if s > threshold => onset = Some(*t),
            _ => break,
        }
    }
    Ok(onset)
}
