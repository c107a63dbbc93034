//! Singular values of a "cyclic bidiagonal" matrix
//!
//! ```text
//!     | d0 u0          |
//!     |    d1 u1       |
//! M = |       .  .     |
//!     |          .  u  |
//!     | c           dn |
//! ```
//!
//! in O(n^2) time. The symmetric embedding `[[0, M], [M^T, 0]]` is, after
//! interleaving rows and columns, a zero-diagonal ring of `2n` sites whose
//! hoppings are `d0, u0, d1, u1, ..., d_{n-1}, c`. Its eigenvalues are `±σ_k`.
//! Folding the ring (order `0, m-1, 1, m-2, ...`) makes the matrix
//! pentadiagonal and a Givens chase reduces it to tridiagonal form.
//!
//! The ring is bipartite and every rotation of the chase mixes two sites of
//! the same sublattice, so the tridiagonal result keeps a zero diagonal. Its
//! off-diagonal is then a bidiagonal matrix with the singular values we want,
//! which dqds computes to high relative accuracy. Implicit QL on the
//! tridiagonal matrix is kept as a fallback.

/// Stored sub-diagonals: 2 for the folded ring, one for the bulge created by
/// each rotation, and one spare so that a rotation never leaves the band.
const WIDTH: usize = 5;
const MAX_QL_ITERATIONS: usize = 64;
/// dqds passes allowed per singular value of a block before giving up.
const MAX_DQDS_PASSES: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct NoConvergence {
    pub index: usize,
}

/// Symmetric band matrix, lower triangle stored by column:
/// `data[j * WIDTH + d] = T(j + d, j)`.
struct Band {
    m: usize,
    data: Vec<f64>,
}

impl Band {
    fn zeros(m: usize) -> Self {
        Self {
            m,
            data: vec![0.0; m * WIDTH],
        }
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j >= WIDTH {
            0.0
        } else {
            self.data[j * WIDTH + i - j]
        }
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j >= WIDTH {
            debug_assert!(v == 0.0, "fill outside band at ({i}, {j})");
            return;
        }
        self.data[j * WIDTH + i - j] = v;
    }

    /// `T <- G T G^T` with `G` acting on rows/columns `p` and `p + 1` as
    /// `[[c, s], [-s, c]]`. Entries further than 3 from the diagonal must be zero.
    #[inline]
    fn rotate(&mut self, p: usize, c: f64, s: f64) {
        if p < 3 {
            return self.rotate_near_top(p, c, s);
        }
        // Columns p - 3..=p + 1 hold every entry involved; past the last
        // column the storage is zero padding, which rotates to zero.
        let w: &mut [f64; 5 * WIDTH] = (&mut self.data[(p - 3) * WIDTH..(p + 2) * WIDTH])
            .try_into()
            .expect("window inside band storage");
        for i in 0..3 {
            let ip = i * WIDTH + 3 - i;
            let (x, y) = (w[ip], w[ip + 1]);
            w[ip] = c * x + s * y;
            w[ip + 1] = -s * x + c * y;
        }
        let (a, b, e) = (w[3 * WIDTH], w[3 * WIDTH + 1], w[4 * WIDTH]);
        let (cc, ss, cs) = (c * c, s * s, c * s);
        w[3 * WIDTH] = cc * a + 2.0 * cs * b + ss * e;
        w[3 * WIDTH + 1] = cs * (e - a) + (cc - ss) * b;
        w[4 * WIDTH] = ss * a - 2.0 * cs * b + cc * e;
        for i in 0..3 {
            let (ip, iq) = (3 * WIDTH + 2 + i, 4 * WIDTH + 1 + i);
            let (x, y) = (w[ip], w[iq]);
            w[ip] = c * x + s * y;
            w[iq] = -s * x + c * y;
        }
    }

    fn rotate_near_top(&mut self, p: usize, c: f64, s: f64) {
        let q = p + 1;
        let d = &mut self.data;
        // Columns left of the 2x2 block: T(p, k) and T(q, k) are adjacent.
        for k in p.saturating_sub(3)..p {
            let ip = k * WIDTH + p - k;
            let (x, y) = (d[ip], d[ip + 1]);
            d[ip] = c * x + s * y;
            d[ip + 1] = -s * x + c * y;
        }
        let (a, b, e) = (d[p * WIDTH], d[p * WIDTH + 1], d[q * WIDTH]);
        let (cc, ss, cs) = (c * c, s * s, c * s);
        d[p * WIDTH] = cc * a + 2.0 * cs * b + ss * e;
        d[p * WIDTH + 1] = cs * (e - a) + (cc - ss) * b;
        d[q * WIDTH] = ss * a - 2.0 * cs * b + cc * e;
        // Rows below it: T(k, p) and T(k, q).
        for k in q + 1..=(q + 3).min(self.m - 1) {
            let (ip, iq) = (p * WIDTH + k - p, q * WIDTH + k - q);
            let (x, y) = (d[ip], d[iq]);
            d[ip] = c * x + s * y;
            d[iq] = -s * x + c * y;
        }
    }
}

/// `sqrt(x^2 + y^2)`, falling back to `hypot` where squaring could under- or
/// overflow. Much cheaper than `hypot` in the inner loops.
#[inline]
fn pythag(x: f64, y: f64) -> f64 {
    let r = (x * x + y * y).sqrt();
    if r > 1e-150 && r < 1e150 {
        r
    } else {
        x.hypot(y)
    }
}

/// Position of ring site `k` after folding.
fn folded_position(k: usize, m: usize) -> usize {
    if 2 * k < m {
        2 * k
    } else {
        2 * (m - 1 - k) + 1
    }
}

/// Rounds between the starts of successive chases. A rotation at `p` only
/// touches rows and columns `p - 3..=p + 4`, so chases this far apart act on
/// disjoint entries and interleaving them gives exactly the sequential result,
/// while letting independent rotations overlap in the pipeline.
const CHASE_LAG: usize = 5;

impl Band {
    /// One step of a bulge chase: annihilates `(row, col)` against
    /// `(row - 1, col)`. Returns the next bulge position, if any.
    #[inline]
    fn chase_step(&mut self, row: usize, col: usize) -> Option<(usize, usize)> {
        // (row - 1, col) and (row, col) are adjacent in storage.
        let ix = col * WIDTH + row - 1 - col;
        let (x, y) = (self.data[ix], self.data[ix + 1]);
        if y == 0.0 {
            return None;
        }
        let r = pythag(x, y);
        let inv = 1.0 / r;
        self.rotate(row - 1, x * inv, y * inv);
        self.data[ix] = r;
        self.data[ix + 1] = 0.0;
        // The rotation leaves a bulge at (row + 2, row - 1).
        (row + 2 < self.m).then_some((row + 2, row - 1))
    }
}

/// Reduces a symmetric matrix of half-bandwidth 2 to tridiagonal form.
fn reduce_pentadiagonal(t: &mut Band) {
    let chases = t.m.saturating_sub(2);
    let mut active: std::collections::VecDeque<(usize, usize)> = Default::default();
    let mut started = 0;
    let mut round = 0;
    while started < chases || !active.is_empty() {
        if started < chases && round >= CHASE_LAG * started {
            active.push_back((started + 2, started));
            started += 1;
        }
        // Oldest (furthest down) first.
        active.retain_mut(|pos| match t.chase_step(pos.0, pos.1) {
            Some(next) => {
                *pos = next;
                true
            }
            None => false,
        });
        round += 1;
    }
}

/// Eigenvalues of the symmetric tridiagonal matrix with diagonal `d` and
/// sub-diagonal `e[..m-1]` (implicit QL). Overwrites `d` with the eigenvalues.
fn tridiagonal_eigenvalues(d: &mut [f64], e: &mut [f64], scale: f64) -> Result<(), NoConvergence> {
    let m = d.len();
    debug_assert_eq!(e.len(), m);
    e[m - 1] = 0.0;
    let floor = f64::EPSILON * scale;
    for l in 0..m {
        let mut iterations = 0;
        loop {
            let mut mm = l;
            while mm + 1 < m {
                let dd = d[mm].abs() + d[mm + 1].abs();
                if e[mm].abs() <= f64::EPSILON * dd || e[mm].abs() <= floor {
                    break;
                }
                mm += 1;
            }
            if mm == l {
                break;
            }
            iterations += 1;
            if iterations > MAX_QL_ITERATIONS {
                return Err(NoConvergence { index: l });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = pythag(g, 1.0);
            g = d[mm] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = mm;
            let mut restarted = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = pythag(f, g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[mm] = 0.0;
                    restarted = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if restarted {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[mm] = 0.0;
        }
    }
    Ok(())
}

/// Pivots of a dqds pass: the last two and the smallest of the others.
#[derive(Clone, Copy)]
struct Pivots {
    dn: f64,
    dn1: f64,
    dmin2: f64,
}

impl Pivots {
    fn dmin1(&self) -> f64 {
        self.dmin2.min(self.dn1)
    }

    fn dmin(&self) -> f64 {
        self.dmin1().min(self.dn)
    }
}

/// One shifted dqds transform of the block `lo..=hi` into `(q2, e2)`.
/// Fails on the first negative pivot before the last one; a negative last
/// pivot is returned for the caller to judge.
#[inline]
fn dqds_pass(q: &[f64], e: &[f64], q2: &mut [f64], e2: &mut [f64], lo: usize, hi: usize, tau: f64) -> Option<Pivots> {
    let mut d = q[lo] - tau;
    let mut dmin2 = f64::INFINITY;
    for i in lo..hi {
        if !(d >= 0.0) {
            return None;
        }
        if i + 1 < hi {
            dmin2 = dmin2.min(d);
        }
        let qh = d + e[i];
        let t = q[i + 1] / qh;
        q2[i] = qh;
        e2[i] = e[i] * t;
        d = d * t - tau;
    }
    if d.is_nan() {
        return None;
    }
    q2[hi] = d;
    // The pivot at hi - 1 is recovered from the last step: q2 = d + e.
    Some(Pivots {
        dn: d,
        dn1: q2[hi - 1] - e[hi - 1],
        dmin2,
    })
}

/// Shift for the next pass over `lo..=hi` of the transformed arrays, given
/// the pivots of the pass that produced them. Every pivot bounds the
/// smallest eigenvalue from above. When the smallest one sits at the bottom
/// it is refined by a 2x2 estimate corrected for the coupling to the rest of
/// the block; otherwise a growing fraction of it is taken.
fn next_shift(q: &[f64], e: &[f64], p: Pivots, lo: usize, hi: usize, g: &mut f64) -> f64 {
    let (dn, dmin) = (p.dn, p.dmin());
    if dmin != dn {
        *g = if *g == 0.0 { 0.25 } else { *g + (1.0 - *g) / 3.0 };
        return *g * dmin;
    }
    *g = 0.0;
    let b1 = (q[hi] * e[hi - 1]).sqrt();
    let b2 = if hi - 1 > lo {
        (q[hi - 1] * e[hi - 2]).sqrt()
    } else {
        0.0
    };
    let a2 = q[hi - 1] + e[hi - 1];
    let gap2 = 0.75 * p.dmin2 - a2;
    let gap1 = if p.dmin1() == p.dn1 && gap2 > 0.0 && gap2 > b2 {
        a2 - dn - (b2 / gap2) * b2
    } else {
        a2 - dn - (b1 + b2)
    };
    if gap1 > 0.0 && gap1 > b1 {
        (dn - (b1 / gap1) * b1).max(0.5 * dmin)
    } else {
        let mut s = if dn > b1 { dn - b1 } else { 0.0 };
        if a2 > b1 + b2 {
            s = s.min(a2 - (b1 + b2));
        }
        s.max(dmin / 3.0)
    }
}

/// Ascending singular values of the upper bidiagonal matrix with diagonal `a`
/// and superdiagonal `b`, by the differential quotient-difference algorithm
/// with shifts.
fn bidiagonal_singular_values(a: &[f64], b: &[f64]) -> Result<Vec<f64>, NoConvergence> {
    let n = a.len();
    debug_assert_eq!(b.len() + 1, n);
    let scale = a.iter().chain(b).fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut q: Vec<f64> = a.iter().map(|v| (v / scale).powi(2)).collect();
    let mut e: Vec<f64> = b.iter().map(|v| (v / scale).powi(2)).collect();
    e.push(0.0);
    let (mut q2, mut e2) = (q.clone(), e.clone());
    let tol2 = (16.0 * f64::EPSILON).powi(2);
    let negligible = |e: &[f64], q: &[f64], k: usize, sigma: f64| e[k] <= tol2 * (sigma + q[k + 1]);

    let mut out = Vec::with_capacity(n);
    // Unreduced blocks still to process, with their accumulated shifts and
    // the pivots of the last pass over them, if any.
    let mut blocks: Vec<(usize, usize, f64, Option<Pivots>)> = vec![(0, n - 1, 0.0, None)];
    while let Some((lo, mut hi, mut sigma, mut pivots)) = blocks.pop() {
        let mut passes = 0;
        let budget = MAX_DQDS_PASSES * (hi - lo + 1);
        let mut g = 0.0;
        loop {
            if lo == hi {
                out.push(sigma + q[lo]);
                break;
            }
            if negligible(&e, &q, hi - 1, sigma) {
                out.push(sigma + q[hi]);
                hi -= 1;
                // The pivot above the bottom becomes the new bottom one. The
                // one above that is unknown; the old minimum stands in for it.
                pivots = pivots.map(|p| Pivots {
                    dn: p.dn1,
                    dn1: p.dmin2,
                    dmin2: p.dmin2,
                });
                continue;
            }
            // Interior splits are rare; look for them now and then.
            if passes % 8 == 0 {
                if let Some(k) = (lo..hi - 1).rev().find(|&k| negligible(&e, &q, k, sigma)) {
                    e[k] = 0.0;
                    blocks.push((k + 1, hi, sigma, None));
                    hi = k;
                    pivots = None;
                    continue;
                }
            }
            // dqds finds the smallest eigenvalues at the bottom; start from
            // the end where the block is smaller.
            if pivots.is_none() && 1.5 * q[lo] < q[hi] {
                q[lo..=hi].reverse();
                e[lo..hi].reverse();
            }
            passes += 1;
            if passes > budget {
                return Err(NoConvergence { index: hi });
            }

            let mut tau = match pivots {
                Some(p) => next_shift(&q, &e, p, lo, hi, &mut g),
                None => 0.0,
            };
            let mut failures = 0;
            let p = loop {
                let step = dqds_pass(&q, &e, &mut q2, &mut e2, lo, hi, tau);
                if let Some(p) = step.filter(|p| p.dn >= 0.0) {
                    break p;
                }
                failures += 1;
                if failures > 8 {
                    return Err(NoConvergence { index: hi });
                }
                // Overshooting only at the bottom leaves the last pivot close
                // to `λ_min - τ`; step back by it. Otherwise shrink the shift,
                // down to the unshifted transform.
                tau = match step {
                    Some(p) if failures < 3 => ((tau + p.dn) * (1.0 - 2.0 * f64::EPSILON)).max(0.0),
                    _ if failures < 6 => 0.25 * tau,
                    _ => 0.0,
                };
            };
            pivots = Some(p);
            sigma += tau;
            q[lo..=hi].copy_from_slice(&q2[lo..=hi]);
            e[lo..hi].copy_from_slice(&e2[lo..hi]);
        }
    }
    out.sort_by(f64::total_cmp);
    Ok(out.into_iter().map(|v| v.max(0.0).sqrt() * scale).collect())
}

/// Ascending singular values of the cyclic bidiagonal matrix with diagonal
/// `diag`, superdiagonal `upper` (`upper[i]` sits at `(i, i+1)`) and the
/// lower-left `corner` at `(n-1, 0)`.
pub(crate) fn ring_singular_values(diag: &[f64], upper: &[f64], corner: f64) -> Result<Vec<f64>, NoConvergence> {
    let n = diag.len();
    assert!(n >= 2, "cyclic bidiagonal matrix needs n >= 2");
    assert_eq!(upper.len(), n - 1);
    let m = 2 * n;

    let hopping = |k: usize| -> f64 {
        match k {
            k if k == m - 1 => corner,
            k if k % 2 == 0 => diag[k / 2],
            k => upper[k / 2],
        }
    };

    let mut t = Band::zeros(m);
    let mut scale = 0.0_f64;
    for k in 0..m {
        let v = hopping(k);
        scale = scale.max(v.abs());
        t.set(folded_position(k, m), folded_position((k + 1) % m, m), v);
    }
    reduce_pentadiagonal(&mut t);

    let off: Vec<f64> = (0..m - 1).map(|i| t.get(i + 1, i)).collect();
    if (0..m).all(|i| t.get(i, i) == 0.0) {
        let a: Vec<f64> = off.iter().step_by(2).copied().collect();
        let b: Vec<f64> = off.iter().skip(1).step_by(2).copied().collect();
        if let Ok(s) = bidiagonal_singular_values(&a, &b) {
            return Ok(s);
        }
        log::debug!("dqds did not converge (m = {m}); falling back to QL");
    }

    let mut d: Vec<f64> = (0..m).map(|i| t.get(i, i)).collect();
    let mut e = off;
    e.push(0.0);
    tridiagonal_eigenvalues(&mut d, &mut e, scale)?;
    d.sort_by(f64::total_cmp);
    Ok((0..n).map(|k| 0.5 * (d[n + k] - d[n - 1 - k])).collect())
}
