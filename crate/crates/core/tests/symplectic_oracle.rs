mod support;

use cvqkd_mismatch::channel_sim::SystemParams;
use cvqkd_mismatch::keyrate::{
    holevo_bound, noise_budget, symplectic_eigenvalues, worst_case_covariance, EIGENVALUE_TOLERANCE,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn oracle_reproduces_vacuum_and_identity_channel() {
    let s = support::symplectic_spectrum(&support::alice_bob(1.0, 1.0, 0.0));
    for nu in s {
        assert!((nu - 1.0).abs() < 1e-12);
    }
}

#[test]
fn dense_matrix_matches_oracle_layout() {
    let cm = worst_case_covariance(41.0, 0.45, 0.06).unwrap();
    let dense = cm.to_dense();
    let chi = 1.0 / 0.45 - 1.0 + 0.06;
    let oracle = support::alice_bob(41.0, 0.45, chi);
    for i in 0..4 {
        for j in 0..4 {
            assert!((dense[i][j] - oracle[(i, j)]).abs() < 1e-12);
        }
    }
}

#[test]
fn reference_point_against_matrix_oracle() {
    let (v, t, eps, eta, v_el) = (41.0, 0.45, 0.06, 0.9, 0.1);
    let sys = SystemParams { eta, v_el, ..SystemParams::default() };
    let b = noise_budget(t, eps, &sys).unwrap();
    assert!((b.chi_hom - 0.2222).abs() < 1e-4);
    let s = symplectic_eigenvalues(v, t, b.chi_line, b.chi_hom).unwrap();
    let ab = support::symplectic_spectrum(&support::alice_bob(v, t, b.chi_line));
    let cond = support::symplectic_spectrum(&support::eve_conditional(v, t, b.chi_line, eta, v_el));
    assert!(rel(s.lambdas[0], ab[0]) < 1e-9);
    assert!(rel(s.lambdas[1], ab[1]) < 1e-9);
    assert!(rel(s.lambdas[2], cond[0]) < 1e-9);
    assert!(rel(s.lambdas[3], cond[1]) < 1e-9);
    assert!((cond[2] - 1.0).abs() < 1e-9);

    let oracle_lambdas = [ab[0], ab[1], cond[0], cond[1], cond[2].max(1.0)];
    let holevo = holevo_bound(&s.lambdas).unwrap();
    let oracle_holevo = holevo_bound(&oracle_lambdas).unwrap();
    assert!((holevo - oracle_holevo).abs() < 1e-10, "{holevo} vs {oracle_holevo}");
}

#[test]
fn random_grid_against_matrix_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..1000 {
        let v = rng.gen_range(1.0..=100.0);
        let t = rng.gen_range(0.01..=1.0);
        let eps = rng.gen_range(0.0..=0.5);
        let eta = rng.gen_range(0.5..1.0);
        let v_el = rng.gen_range(0.0..=0.3);
        let sys = SystemParams { eta, v_el, ..SystemParams::default() };
        let b = noise_budget(t, eps, &sys).unwrap();
        let s = symplectic_eigenvalues(v, t, b.chi_line, b.chi_hom).unwrap();
        let ab = support::symplectic_spectrum(&support::alice_bob(v, t, b.chi_line));
        let cond = support::symplectic_spectrum(&support::eve_conditional_chi(v, t, b.chi_line, b.chi_hom));
        let ctx = format!("V={v} T={t} eps={eps} eta={eta} v_el={v_el}");
        assert!(rel(s.lambdas[0], ab[0]) < 1e-9, "l1 {} vs {} {ctx}", s.lambdas[0], ab[0]);
        assert!(rel(s.lambdas[1], ab[1]) < 1e-9, "l2 {} vs {} {ctx}", s.lambdas[1], ab[1]);
        assert!(rel(s.lambdas[2], cond[0]) < 1e-9, "l3 {} vs {} {ctx}", s.lambdas[2], cond[0]);
        assert!(rel(s.lambdas[3], cond[1]) < 1e-9, "l4 {} vs {} {ctx}", s.lambdas[3], cond[1]);
        assert_eq!(s.lambdas[4], 1.0);
        for l in &s.lambdas[..4] {
            assert!(*l >= 1.0 - EIGENVALUE_TOLERANCE, "{ctx}");
        }
    }
}

#[test]
fn detector_decomposition_does_not_matter() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..200 {
        let v = rng.gen_range(1.0..=100.0);
        let t = rng.gen_range(0.01..=1.0);
        let eps = rng.gen_range(0.0..=0.5);
        let eta = rng.gen_range(0.5..0.99);
        let v_el = rng.gen_range(0.0..=0.3);
        let sys = SystemParams { eta, v_el, ..SystemParams::default() };
        let b = noise_budget(t, eps, &sys).unwrap();
        let physical = support::symplectic_spectrum(&support::eve_conditional(v, t, b.chi_line, eta, v_el));
        let balanced = support::symplectic_spectrum(&support::eve_conditional_chi(v, t, b.chi_line, b.chi_hom));
        for (p, q) in physical.iter().zip(&balanced) {
            assert!(rel(*p, *q) < 1e-9, "{physical:?} vs {balanced:?}");
        }
    }
}
