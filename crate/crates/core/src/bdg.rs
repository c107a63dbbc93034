//! Bogoliubov-de Gennes form of the Jordan-Wigner fermionized chain.
//!
//! `H = a^† ℍ a` with `ℍ = [[A, B], [-B, -A]]`, `A` real symmetric and `B`
//! real antisymmetric. The quasiparticle energies are the singular values of
//! `A + B`; for a nearest-neighbour chain that matrix is upper bidiagonal
//! apart from the single boundary entry at `(n, 1)`, which lets
//! [`spectrum`] run in O(n^2).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::spinglass::DisorderRealization;

/// Fermion boundary condition induced by the periodic spin chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Even fermion-parity sector, which holds the ground state.
    #[default]
    Antiperiodic,
    Periodic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BdgMatrix {
    field: f64,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    boundary: Boundary,
}

/// Assembles `A` and `B` for the realization at uniform field `h`.
///
/// Bond `i` (spins `i`, `i+1`) contributes `A[i,i+1] = A[i+1,i] = -J_i/2` and
/// `B[i,i+1] = -B[i+1,i] = -J_i/2`. The closing bond `(n, 1)` follows the same
/// pattern for [`Boundary::Periodic`] and carries the opposite sign for
/// [`Boundary::Antiperiodic`]. With `n = 2` the closing bond touches the same
/// entries as bond 1 and both contributions are summed.
pub fn build_bdg(r: &DisorderRealization, h: f64, boundary: Boundary) -> BdgMatrix {
    let n = r.n();
    let mut a = DMatrix::from_diagonal_element(n, n, h);
    let mut b = DMatrix::zeros(n, n);
    for (i, &j) in r.couplings().iter().enumerate() {
        let next = (i + 1) % n;
        let sign = if next == 0 && boundary == Boundary::Antiperiodic {
            -1.0
        } else {
            1.0
        };
        let half = -sign * j / 2.0;
        a[(i, next)] += half;
        a[(next, i)] += half;
        b[(i, next)] += half;
        b[(next, i)] -= half;
    }
    BdgMatrix {
        field: h,
        a,
        b,
        boundary,
    }
}

impl BdgMatrix {
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn field(&self) -> f64 {
        self.field
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn a_block(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b_block(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// The full `2n x 2n` matrix `[[A, B], [-B, -A]]` (symmetric).
    pub fn full_matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut h = DMatrix::zeros(2 * n, 2 * n);
        h.view_mut((0, 0), (n, n)).copy_from(&self.a);
        h.view_mut((0, n), (n, n)).copy_from(&self.b);
        h.view_mut((n, 0), (n, n)).copy_from(&(-&self.b));
        h.view_mut((n, n), (n, n)).copy_from(&(-&self.a));
        h
    }

    fn diagnostics(&self, reason: impl Into<String>) -> Error {
        let sum = &self.a + &self.b;
        Error::Diagonalization {
            n: self.n(),
            reason: reason.into(),
            max_entry: sum.amax(),
            frobenius: sum.norm(),
        }
    }
}

/// Nonnegative Bogoliubov energies at one field value, ascending.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuasiparticleSpectrum {
    pub h: f64,
    pub energies: Vec<f64>,
}

impl QuasiparticleSpectrum {
    pub fn n(&self) -> usize {
        self.energies.len()
    }

    pub fn max_energy(&self) -> f64 {
        self.energies.last().copied().unwrap_or(0.0)
    }
}

/// Quasiparticle energies of `m`: the singular values of `A + B`, ascending.
pub fn spectrum(m: &BdgMatrix) -> Result<QuasiparticleSpectrum> {
    let n = m.n();
    let sum = &m.a + &m.b;
    let diag: Vec<f64> = (0..n).map(|i| sum[(i, i)]).collect();
    let upper: Vec<f64> = (0..n - 1).map(|i| sum[(i, i + 1)]).collect();
    let energies = ring_energies(&diag, &upper, sum[(n - 1, 0)]).map_err(|reason| m.diagnostics(reason))?;
    Ok(QuasiparticleSpectrum { h: m.field, energies })
}

fn ring_energies(diag: &[f64], upper: &[f64], corner: f64) -> std::result::Result<Vec<f64>, String> {
    if diag.iter().chain(upper).chain([&corner]).any(|v| !v.is_finite()) {
        return Err("non-finite matrix entry".into());
    }
    let energies = linalg::ring_singular_values(diag, upper, corner)
        .map_err(|e| format!("singular value solver did not converge at value {}", e.index))?;
    if energies.iter().any(|e| !e.is_finite()) {
        return Err("non-finite singular value".into());
    }
    Ok(energies)
}

/// Same contract as [`spectrum`], through a dense SVD of `A + B`. O(n^3);
/// kept as an independent route for cross-checks.
pub fn spectrum_dense_svd(m: &BdgMatrix) -> Result<QuasiparticleSpectrum> {
    let sum = &m.a + &m.b;
    let svd = nalgebra::SVD::try_new(sum, false, false, f64::EPSILON, 10_000)
        .ok_or_else(|| m.diagnostics("dense SVD did not converge"))?;
    let mut energies: Vec<f64> = svd.singular_values.iter().copied().collect();
    energies.sort_by(f64::total_cmp);
    Ok(QuasiparticleSpectrum { h: m.field, energies })
}

/// Spectrum of the realization at field `h`.
pub fn chain_spectrum(r: &DisorderRealization, h: f64, boundary: Boundary) -> Result<QuasiparticleSpectrum> {
    let n = r.n();
    if n < 3 {
        return spectrum(&build_bdg(r, h, boundary));
    }
    // The entries of A + B that `build_bdg` would produce, without the
    // dense blocks: h on the diagonal, -J_i above it, ±J_n in the corner.
    let bond = |sign: f64, j: f64| {
        let half = -sign * j / 2.0;
        half + half
    };
    let j = r.couplings();
    let diag = vec![h + 0.0; n];
    let upper: Vec<f64> = j[..n - 1].iter().map(|&j| bond(1.0, j)).collect();
    let closing = if boundary == Boundary::Antiperiodic { -1.0 } else { 1.0 };
    match ring_energies(&diag, &upper, bond(closing, j[n - 1])) {
        Ok(energies) => Ok(QuasiparticleSpectrum { h, energies }),
        // Rebuild the matrix for the error report.
        Err(_) => spectrum(&build_bdg(r, h, boundary)),
    }
}
