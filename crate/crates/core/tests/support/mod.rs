//! Independent matrix oracle for symplectic spectra.
//!
//! Builds the full covariance matrices (Alice–Bob, and Alice plus the
//! detector-noise modes conditioned on Bob's homodyne outcome) and extracts
//! symplectic eigenvalues from the spectrum of `γ^{1/2}·Ω·γ^{1/2}`.

#![allow(dead_code)]

use nalgebra::{Complex, DMatrix, SymmetricEigen};

pub fn omega(modes: usize) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(2 * modes, 2 * modes);
    for k in 0..modes {
        w[(2 * k, 2 * k + 1)] = 1.0;
        w[(2 * k + 1, 2 * k)] = -1.0;
    }
    w
}

/// Symplectic eigenvalues, descending.
pub fn symplectic_spectrum(gamma: &DMatrix<f64>) -> Vec<f64> {
    let n = gamma.nrows();
    let eig = SymmetricEigen::new(gamma.clone());
    let root = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()))
        * eig.eigenvectors.transpose();
    let k = &root * omega(n / 2) * &root;
    // i·K is Hermitian with eigenvalues ±ν; working with it directly avoids
    // squaring the condition number.
    let h = DMatrix::from_fn(n, n, |i, j| Complex::new(0.0, 0.5 * (k[(i, j)] - k[(j, i)])));
    let mut nu: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().filter(|&x| x > 0.0).collect();
    nu.sort_by(|a, b| b.partial_cmp(a).unwrap());
    nu
}

fn epr_block(v: f64) -> (f64, f64) {
    (v, (v * v - 1.0).max(0.0).sqrt())
}

/// Alice–Bob covariance after a channel with transmittance `t` and
/// channel-added noise `chi_line`, ordering `(x_A, p_A, x_B, p_B)`.
pub fn alice_bob(v: f64, t: f64, chi_line: f64) -> DMatrix<f64> {
    let c = (t * (v * v - 1.0)).sqrt();
    let b = t * (v + chi_line);
    DMatrix::from_row_slice(4, 4, &[v, 0.0, c, 0.0, 0.0, v, 0.0, -c, c, 0.0, b, 0.0, 0.0, -c, 0.0, b])
}

/// Covariance of modes A, F, G conditioned on an x-homodyne measurement of
/// Bob's mode, where the detector is a beam splitter of transmittance `eta`
/// fed by one half (F0) of an EPR pair (F0, G) of variance
/// `1 + v_el/(1 − eta)`.
pub fn eve_conditional(v: f64, t: f64, chi_line: f64, eta: f64, v_el: f64) -> DMatrix<f64> {
    assert!(eta < 1.0, "beam-splitter detector model needs eta < 1");
    detector_conditional(v, t, chi_line, eta, 1.0 + v_el / (1.0 - eta))
}

/// Same conditional state, but with the detector noise `chi_hom` realised by
/// the beam splitter `eta' = (1+χ)/(1+2χ)` and EPR variance `1 + χ`. Only
/// `χ_hom = (1−η)·v/η` enters the conditional entropy; this choice keeps the
/// EPR variance small when η is close to 1.
pub fn eve_conditional_chi(v: f64, t: f64, chi_line: f64, chi_hom: f64) -> DMatrix<f64> {
    if chi_hom == 0.0 {
        return detector_conditional(v, t, chi_line, 1.0, 1.0);
    }
    let eta = (1.0 + chi_hom) / (1.0 + 2.0 * chi_hom);
    detector_conditional(v, t, chi_line, eta, 1.0 + chi_hom)
}

fn detector_conditional(v: f64, t: f64, chi_line: f64, eta: f64, vd: f64) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(8, 8);
    g.view_mut((0, 0), (4, 4)).copy_from(&alice_bob(v, t, chi_line));
    let (d, s) = epr_block(vd);
    // modes 2 (F0) and 3 (G)
    for q in 0..2 {
        let sign = if q == 0 { 1.0 } else { -1.0 };
        g[(4 + q, 4 + q)] = d;
        g[(6 + q, 6 + q)] = d;
        g[(4 + q, 6 + q)] = sign * s;
        g[(6 + q, 4 + q)] = sign * s;
    }
    // Beam splitter on modes 1 (B) and 2 (F0): B' = √η·B + √(1−η)·F0, F = −√(1−η)·B + √η·F0.
    let (te, re) = (eta.sqrt(), (1.0 - eta).sqrt());
    let mut bs = DMatrix::identity(8, 8);
    for q in 0..2 {
        let (b, f) = (2 + q, 4 + q);
        bs[(b, b)] = te;
        bs[(b, f)] = re;
        bs[(f, b)] = -re;
        bs[(f, f)] = te;
    }
    let g = &bs * g * bs.transpose();
    // Reorder to [A, F, G | B'].
    let order = [0usize, 1, 4, 5, 6, 7, 2, 3];
    let g = DMatrix::from_fn(8, 8, |i, j| g[(order[i], order[j])]);
    let afg = g.view((0, 0), (6, 6)).into_owned();
    let cross = g.view((0, 6), (6, 1)).into_owned();
    let vxx = g[(6, 6)];
    afg - (&cross * cross.transpose()) / vxx
}
