use std::f64::consts::PI;

use glassotto::bdg::spectrum_dense_svd;
use glassotto::{
    build_bdg, chain_spectrum, cycle_heats, derive_seed, sample_couplings, spectrum, Boundary, DisorderRealization,
};
use nalgebra::SymmetricEigen;

fn dispersion(n: usize, j: f64, h: f64) -> Vec<f64> {
    let mut e: Vec<f64> = (0..n)
        .map(|m| {
            let k = (2 * m + 1) as f64 * PI / n as f64;
            (h * h + j * j - 2.0 * h * j * k.cos()).max(0.0).sqrt()
        })
        .collect();
    e.sort_by(f64::total_cmp);
    e
}

/// Nonnegative half of the eigenvalues of the full `2n x 2n` BdG matrix.
fn brute_force(r: &DisorderRealization, h: f64, boundary: Boundary) -> Vec<f64> {
    let m = build_bdg(r, h, boundary);
    let mut ev: Vec<f64> = SymmetricEigen::new(m.full_matrix())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    ev.split_off(r.n())
}

#[test]
fn small_chains_match_full_bdg_eigenvalues() {
    for n in 2..=8 {
        for idx in 0..25 {
            let r = sample_couplings(n, derive_seed(3, n, idx)).unwrap();
            for h in [0.0, 0.07, 0.4, 1.3] {
                for boundary in [Boundary::Antiperiodic, Boundary::Periodic] {
                    let fast = chain_spectrum(&r, h, boundary).unwrap().energies;
                    let oracle = brute_force(&r, h, boundary);
                    for (a, b) in fast.iter().zip(&oracle) {
                        assert!(
                            (a - b).abs() < 1e-10,
                            "n={n} h={h} {boundary:?}: {fast:?} vs {oracle:?}"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn uniform_chain_matches_dispersion() {
    for n in [2usize, 3, 7, 16, 33, 100, 257] {
        let r = DisorderRealization::uniform(n, 1.0).unwrap();
        for h in [0.0, 0.5, 1.0, 2.0] {
            let e = chain_spectrum(&r, h, Boundary::Antiperiodic).unwrap().energies;
            for (a, b) in e.iter().zip(dispersion(n, 1.0, h)) {
                assert!(
                    (a - b).abs() <= 1e-10 * b.max(f64::MIN_POSITIVE),
                    "n={n} h={h}: {a} vs {b}"
                );
            }
        }
    }
}

#[test]
fn structured_route_agrees_with_dense_svd() {
    for n in [10usize, 50, 120] {
        let r = sample_couplings(n, derive_seed(9, n, 0)).unwrap();
        for h in [-0.5, 0.02, 0.3, 2.0] {
            let m = build_bdg(&r, h, Boundary::Antiperiodic);
            let a = spectrum(&m).unwrap().energies;
            let b = spectrum_dense_svd(&m).unwrap().energies;
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12, "n={n} h={h}");
            }
        }
    }
}

#[test]
fn spectrum_is_even_in_the_field_sign() {
    // Flipping h is undone by a particle-hole transformation on alternate sites.
    let r = sample_couplings(24, 77).unwrap();
    let a = chain_spectrum(&r, 0.6, Boundary::Antiperiodic).unwrap().energies;
    let b = chain_spectrum(&r, -0.6, Boundary::Antiperiodic).unwrap().energies;
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn boundary_choice_fades_with_size() {
    // Per-spin work from ABC and PBC spectra converges as the chain grows.
    let gap = |n: usize| {
        let mut total = 0.0;
        for idx in 0..8 {
            let r = sample_couplings(n, derive_seed(1, n, idx)).unwrap();
            let per_boundary = [Boundary::Antiperiodic, Boundary::Periodic].map(|b| {
                let initial = chain_spectrum(&r, 0.3, b).unwrap();
                let expanded = chain_spectrum(&r, 0.8, b).unwrap();
                cycle_heats(&initial, &expanded, 0.05, 0.2).unwrap().w / n as f64
            });
            total += (per_boundary[0] - per_boundary[1]).abs();
        }
        total / 8.0
    };
    let (small, large) = (gap(8), gap(128));
    assert!(large < small, "{small} -> {large}");
    assert!(large < 1e-3, "{large}");
}
