//! Quantum Otto cycles with a disordered transverse-field Ising chain as the
//! working medium.
//!
//! The chain `H = -Σ J_i σˣ_i σˣ_{i+1} - h Σ σᶻ_i` with Gaussian couplings maps
//! to free fermions, so every realization is solved exactly from an `n × n`
//! singular value problem. On top of that sit the cycle thermodynamics
//! ([`otto`]), disorder averaging ([`ensemble`]) and curve analysis
//! ([`analysis`]).

// `!(x > 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod bdg;
pub mod ensemble;
pub mod error;
mod linalg;
pub mod otto;
pub mod spinglass;

pub use bdg::{build_bdg, chain_spectrum, spectrum, BdgMatrix, Boundary, QuasiparticleSpectrum};
pub use error::{Error, Result};
pub use otto::{classify_regime, cycle_heats, fermi_occupation, Heats, Regime, RegimeClass};
pub use spinglass::{critical_field, derive_seed, sample_couplings, DisorderRealization};
