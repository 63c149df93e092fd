use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use vacpol::quad::{adaptive, GaussLegendre, Tolerance};
use vacpol::uehling::{
    charge_outside, enclosed_charge, pi_running, pi_running_with, u_laplace, u_laplace_complex,
    u_position, u_position_with, UehlingForm,
};

const GAMMA: f64 = 0.6712;

fn tol() -> Tolerance {
    Tolerance { abs: 1e-16, rel: 1e-13, max_intervals: 4000 }
}

#[test]
fn pi_at_unit_momentum_against_plain_gauss_legendre() {
    // fixed high-order rule on a smooth integrand, independent of the
    // adaptive integrator used by the library
    let rule = GaussLegendre::new(80);
    let integral: f64 = rule.integrate(0.0, 1.0, |x| x * (1.0 - x) * (1.0 + x * (1.0 - x)).ln());
    let l0: f64 = 7.58;
    let want = (l0 * l0).ln() / (12.0 * PI * PI) - 1.0 / (36.0 * PI * PI) - integral / (2.0 * PI * PI);
    assert!((pi_running(1.0, l0).unwrap() - want).abs() < 1e-10);
}

#[test]
fn pi_large_momentum_logarithm() {
    // π(p) - π(0) + (1/12π²) log p² → constant; fit slope on [1e2, 1e4]
    let ps: Vec<f64> = (0..=8).map(|k| 100.0 * 10f64.powf(k as f64 / 4.0)).collect();
    let d: Vec<f64> = ps
        .iter()
        .map(|&p| pi_running(p, 5.0).unwrap() - pi_running(0.0, 5.0).unwrap())
        .collect();
    for w in ps.windows(2).zip(d.windows(2)) {
        let slope = (w.1[1] - w.1[0]) / ((w.0[1] * w.0[1]).ln() - (w.0[0] * w.0[0]).ln());
        assert!((slope + 1.0 / (12.0 * PI * PI)).abs() < 2e-5, "{slope}");
    }
    let c = d[8] + (ps[8] * ps[8]).ln() / (12.0 * PI * PI);
    // ∫ x(1-x) log(x(1-x)) dx = -5/18
    assert!((c - 5.0 / (36.0 * PI * PI)).abs() < 1e-7, "{c}");
}

#[test]
fn laplace_round_trip_against_position() {
    let (a, b, p) = (1.0, 6.0, 0.5);
    let direct = adaptive(|x| u_position(x, GAMMA).unwrap() * (-p * x).exp(), a, b, tol()).unwrap();
    let via = u_laplace(p, a, b, GAMMA).unwrap();
    assert!((direct - via).abs() < 1e-8 * direct.abs(), "{direct} {via}");
}

#[test]
fn complex_laplace_round_trip() {
    let (a, b) = (0.3, 4.0);
    for q in [0.0, 1.7, 9.0] {
        let p = Complex64::new(0.0, q);
        let re = adaptive(|x| u_position(x, GAMMA).unwrap() * (q * x).cos(), a, b, tol()).unwrap();
        let im = adaptive(|x| -u_position(x, GAMMA).unwrap() * (q * x).sin(), a, b, tol()).unwrap();
        let via = u_laplace_complex(p, a, b, GAMMA, UehlingForm::Standard).unwrap();
        assert!((via - Complex64::new(re, im)).norm() < 1e-9 * via.norm().max(1e-3), "q={q}");
    }
}

#[test]
fn exponential_tail() {
    let vals: Vec<f64> = (0..=10).map(|i| 3.0 + 0.5 * i as f64).map(|x| u_position(x, GAMMA).unwrap() * (2.0 * x).exp()).collect();
    let max = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(max < 1.0 && vals.iter().all(|v| v.is_finite()));
}

#[test]
fn dispersion_matches_feynman_form() {
    // (2γ/3π)∫W p²/(p² + 4ζ²) dζ with W = (1 + 1/2ζ²)√(ζ²-1)/ζ² equals
    // -4πγ(π(p) - π(0))
    for p in [0.1, 1.0, 7.0] {
        let disp = adaptive(
            |t: f64| {
                let (sh, ch) = (t.sinh(), t.cosh());
                sh * sh * (1.0 + 0.5 / (ch * ch)) / (ch * ch) * p * p / (p * p + 4.0 * ch * ch)
            },
            0.0,
            30.0,
            tol(),
        )
        .unwrap()
            * 2.0
            * GAMMA
            / (3.0 * PI);
        let feyn = -4.0 * PI * GAMMA * (pi_running(p, 5.0).unwrap() - pi_running(0.0, 5.0).unwrap());
        assert!((disp - feyn).abs() < 1e-10 * feyn.abs(), "p={p}: {disp} {feyn}");
    }
}

#[test]
fn neutrality() {
    let form = UehlingForm::Standard;
    let scale = charge_outside(1.0, GAMMA, form).unwrap().abs();
    for r in [0.5, 1.0, 2.0, 5.0] {
        let q_in = enclosed_charge(r, GAMMA, form).unwrap();
        let q_out = charge_outside(r, GAMMA, form).unwrap();
        assert!((q_in + q_out).abs() < 1e-6 * scale, "R={r}: {q_in:e} + {q_out:e}");
    }
    let q30 = enclosed_charge(30.0, GAMMA, form).unwrap();
    assert!(q30.abs() < 1e-6 * scale, "{q30:e}");
}

#[test]
fn charge_outside_matches_direct_integral() {
    let r = 1.5;
    let direct = adaptive(|x| 0.5 * u_position(x, GAMMA).unwrap(), r, 40.0, tol()).unwrap();
    let closed = charge_outside(r, GAMMA, UehlingForm::Standard).unwrap();
    assert!((direct - closed).abs() < 1e-10 * closed.abs());
}

#[test]
fn uncorrected_form_breaks_neutrality() {
    let form = UehlingForm::Uncorrected;
    let q_in = enclosed_charge(1.0, GAMMA, form).unwrap();
    let q_out = charge_outside(1.0, GAMMA, form).unwrap();
    let scale = charge_outside(1.0, GAMMA, UehlingForm::Standard).unwrap().abs();
    assert!((q_in + q_out).abs() > 1e-3 * scale);
    assert!(pi_running_with(1.0, 5.0, form).unwrap() != pi_running(1.0, 5.0).unwrap());
    assert!(u_position_with(1.0, GAMMA, form).unwrap() != u_position(1.0, GAMMA).unwrap());
}

#[test]
fn laplace_decreasing_in_momentum() {
    let mut prev = f64::NEG_INFINITY;
    for i in 0..=40 {
        let p = 0.25 * i as f64;
        let v = u_laplace(p, 0.5, 6.0, GAMMA).unwrap();
        // 𝗎 < 0, so û rises towards zero; its magnitude falls
        assert!(v > prev, "p={p}");
        prev = v;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn laplace_linear_in_coupling(g in 0.01f64..0.99, p in 0.0f64..10.0) {
        let one = u_laplace(p, 0.4, 5.0, 1.0).unwrap();
        let v = u_laplace(p, 0.4, 5.0, g).unwrap();
        prop_assert!((v - g * one).abs() <= 4.0 * f64::EPSILON * v.abs());
    }
}
