mod common;

use std::f64::consts::PI;

use common::{rel, solution};
use efimov_core::potential::PotentialModel;
use efimov_core::two_body::default_radial_grid;
use num_complex::Complex64;

/// Planar transform of `|v|^{1/2} eta_0 e^{i theta}` by radial quadrature times
/// an `m`-point trapezoid rule in angle, projected on `e^{i phi}`.
fn planar_oracle(p: f64, phi: f64, m: usize) -> Complex64 {
    let sol = solution();
    let (px, py) = (p * phi.cos(), p * phi.sin());
    let mut total = Complex64::new(0.0, 0.0);
    for ((&r, &w), &e) in sol.grid.nodes().iter().zip(sol.grid.weights()).zip(&sol.eta0) {
        let f = sol.potential.sqrt_abs(r) * e;
        let mut ang = Complex64::new(0.0, 0.0);
        for k in 0..m {
            let th = 2.0 * PI * k as f64 / m as f64;
            let phase = -(px * r * th.cos() + py * r * th.sin());
            ang += Complex64::from_polar(1.0, phase + th);
        }
        total += w * f * ang / m as f64;
    }
    total * Complex64::from_polar(1.0, -phi)
}

#[test]
fn exponential_profile_values() {
    let v = PotentialModel::exponential(2.0, 3.0, 0.5).unwrap();
    assert!((v.evaluate(1.0).unwrap() + 0.049_787).abs() < 1e-6);
    assert!(v.evaluate(-0.1).is_err());
    assert!(PotentialModel::exponential(-1.0, 1.0, 1.0).is_err());
    assert!(PotentialModel::exponential(1.0, 0.0, 1.0).is_err());
}

#[test]
fn psi0_vanishes_linearly() {
    let psi = solution().psi_transform(None).unwrap();
    assert_eq!(psi.psi0(0.0).unwrap(), Complex64::new(0.0, 0.0));
    // above the switch the slope error is the quadratic Bessel correction
    let target = Complex64::new(0.0, -0.5 * psi.c0());
    let err = |p: f64| (psi.psi0(p).unwrap() / p - target).norm() / target.norm();
    let ps: Vec<f64> = [2.0, 4.0, 8.0].iter().map(|k| k * psi.p_switch).collect();
    assert!(err(ps[0]) < 1e-5);
    let c = err(ps[0]) / (ps[0] * ps[0]);
    for &p in &ps[1..] {
        assert!(rel(err(p) / (p * p), c) < 0.05, "p = {p}");
    }
    assert!(psi.psi0(-1.0).is_err());
}

#[test]
fn psi0_continuous_at_switch() {
    let psi = solution().psi_transform(None).unwrap();
    let below = psi.psi0(psi.p_switch * (1.0 - 1e-9)).unwrap().im;
    let above = psi.psi0(psi.p_switch * (1.0 + 1e-9)).unwrap().im;
    assert!(rel(below, above) < 0.01);
}

#[test]
fn psi0_matches_planar_transform() {
    let psi = solution().psi_transform(None).unwrap();
    for phi in [0.0, 0.7, 2.5] {
        let oracle = planar_oracle(0.3, phi, 64);
        let got = psi.psi0(0.3).unwrap();
        assert!((oracle - got).norm() < 1e-6, "phi = {phi}: {oracle} vs {got}");
        let vec = psi.psi_hat_plus(0.3 * phi.cos(), 0.3 * phi.sin());
        assert!((vec - got * Complex64::from_polar(1.0, phi)).norm() < 1e-12);
    }
}

#[test]
fn omega_is_small_and_real() {
    let psi = solution().psi_transform(None).unwrap();
    for s in [1e-8, 1e-5] {
        assert_eq!(psi.omega(s).unwrap(), 0.0);
    }
    assert!(psi.omega(0.0).is_err());
    for k in 0..40 {
        let s = 0.25 * 10f64.powf(-0.2 * k as f64);
        assert!(psi.omega_imaginary_residual(s).unwrap().abs() < 1e-10);
        assert!(psi.omega(s).unwrap().abs() <= psi.gamma_bound * s * s * (1.0 + 1e-9));
        let p = psi.pair_product(s);
        assert!(rel(p, s * s * (psi.c0_squared() / 6.0 + psi.omega(s).unwrap())) < 1e-14);
    }
}

#[test]
fn omega_bound_stable_under_refinement() {
    let sol = solution();
    let coarse = sol.psi_transform(None).unwrap().gamma_bound;
    let pot = PotentialModel::default();
    let fine_sol = efimov_core::two_body::tune_resonance(
        &pot,
        &default_radial_grid(&pot, 1600).unwrap(),
        Some(&[1e-6, 1e-5, 1e-4, 1e-3]),
    )
    .unwrap();
    let fine = fine_sol.psi_transform(None).unwrap().gamma_bound;
    assert!(coarse.is_finite() && coarse > 0.0);
    assert!(rel(coarse, fine) < 0.02, "{coarse} vs {fine}");
}

#[test]
fn transform_is_linear_in_eta0() {
    let sol = solution();
    let psi = sol.psi_transform(None).unwrap();
    let twice = psi.scaled(2.0, sol.potential.alpha2);
    for p in [1e-5, 0.01, 0.3, 2.0, 10.0] {
        let a = twice.psi0(p).unwrap();
        let b = 2.0 * psi.psi0(p).unwrap();
        assert!((a - b).norm() <= 1e-14 * b.norm().max(1e-300));
    }
    assert!(rel(twice.c0_squared(), 4.0 * psi.c0_squared()) < 1e-14);
    assert!(rel(twice.alpha_bound, 2.0 * psi.alpha_bound) < 1e-12);
}

#[test]
fn lipschitz_bound_holds_on_fresh_scan() {
    let psi = solution().psi_transform(None).unwrap();
    assert!(psi.alpha_bound >= 0.5 * psi.c0().abs());
    for k in 0..1000 {
        let p = 1e-6 * 10f64.powf(7.5 * k as f64 / 999.0);
        assert!(psi.psi0(p).unwrap().norm() <= psi.alpha_bound * p * (1.0 + 1e-3), "p = {p}");
    }
}

#[test]
fn near_additivity_is_bounded() {
    let sol = solution();
    let psi = sol.psi_transform(None).unwrap();
    assert!(psi.beta_bound.is_finite());
    // independent sample, with the planar oracle at one point
    let (a, b) = (0.05, 0.08);
    let th = 1.1f64;
    let sum = psi.psi_hat_plus(a + b * th.cos(), b * th.sin());
    let d = sum - psi.psi_hat_plus(a, 0.0) - psi.psi_hat_plus(b * th.cos(), b * th.sin());
    assert!(d.norm() <= psi.beta_bound * a * b * 1.5);
    let p = (a + b * th.cos()).hypot(b * th.sin());
    let phi = (b * th.sin()).atan2(a + b * th.cos());
    let oracle = planar_oracle(p, phi, 64) * Complex64::from_polar(1.0, phi);
    assert!((oracle - sum).norm() < 1e-6);
}
