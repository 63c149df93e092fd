use num_complex::Complex64;
use proptest::prelude::*;
use vacpol::density::{uniform_grid, SampledDensity};
use vacpol::laplace::basis::{e4_at_zero, e_hat, linear_hat};
use vacpol::laplace::{
    decompose, decompose_with_frequencies, find_frequency, highest_spike, imaginary_axis_samples,
    laplace_transform, BasisTransform, DecomposeOptions, UehlingTerm, ImaginaryAxisSamples,
};
use vacpol::quad::GaussLegendre;
use vacpol::uehling::u_position;
use vacpol::Error;

const GAMMA: f64 = 0.3356;
const A: f64 = 0.4;
const B: f64 = 2.6;

struct Synthetic {
    c1: f64,
    uehling: f64,
    w1: f64,
    w5: f64,
    tones: Vec<(f64, f64, f64)>,
}

impl Synthetic {
    fn eval(&self, x: f64) -> f64 {
        let u = if self.uehling != 0.0 { self.uehling * u_position(x, GAMMA).unwrap() } else { 0.0 };
        let s: f64 = self.tones.iter().map(|(w, c, s)| c * (w * x).cos() + s * (w * x).sin()).sum();
        self.c1 * x + u + self.w1 / x + s + self.w5 / x.powi(5)
    }

    fn sample(&self, n: usize) -> SampledDensity {
        let grid = uniform_grid(A, B, n).unwrap();
        let values = grid.iter().map(|&x| self.eval(x)).collect();
        SampledDensity::from_samples(grid, values).unwrap()
    }
}

fn reference() -> Synthetic {
    Synthetic { c1: -30.0, uehling: 1.0, w1: 0.5, w5: 0.02, tones: vec![(6.0, 4.0, -1.0), (13.0, 1.5, 3.0)] }
}

fn close(got: f64, want: f64, rel: f64) -> bool {
    (got - want).abs() <= rel * want.abs()
}

#[test]
fn inverse_fifth_power_transform_matches_quadrature() {
    let rule = GaussLegendre::new(64);
    for q in [0.0, 3.0, 40.0] {
        let re = rule.integrate(A, B, |x| (q * x).cos() / x.powi(5));
        let im = rule.integrate(A, B, |x| -(q * x).sin() / x.powi(5));
        let closed = e_hat(4, Complex64::new(0.0, q), A, B).unwrap();
        assert!((closed - Complex64::new(re, im)).norm() < 1e-10 * closed.norm(), "q={q}");
    }
    let at_zero = e_hat(4, Complex64::new(0.0, 0.0), A, B).unwrap();
    assert!((at_zero.re - e4_at_zero(A, B)).abs() < 1e-13 * at_zero.re);
}

#[test]
fn sampled_transforms_of_constant_and_linear() {
    let grid = uniform_grid(A, B, 201).unwrap();
    let one = SampledDensity::from_samples(grid.clone(), vec![1.0; 201]).unwrap();
    let lin = SampledDensity::from_samples(grid.clone(), grid.clone()).unwrap();
    for q in [0.0, 1.0, 25.0] {
        let p = Complex64::new(0.0, q);
        let exact_one = if q == 0.0 {
            Complex64::new(B - A, 0.0)
        } else {
            ((-p * A).exp() - (-p * B).exp()) / p
        };
        assert!((laplace_transform(&one, p).unwrap() - exact_one).norm() < 1e-12);
        assert!((laplace_transform(&lin, p).unwrap() - linear_hat(p, A, B)).norm() < 1e-12);
    }
}

#[test]
fn synthetic_round_trip() {
    let syn = reference();
    let f = syn.sample(801);
    let d = decompose(&f, GAMMA, &DecomposeOptions::default()).unwrap();
    assert!(d.remainder_norm <= 0.1);
    assert!(close(d.c1, syn.c1, 0.01), "c1 {}", d.c1);
    assert!(close(d.uehling_scale, 1.0, 0.01), "uehling {}", d.uehling_scale);
    assert!(close(d.w1, syn.w1, 0.01), "w1 {}", d.w1);
    assert!(close(d.w5, syn.w5, 0.01), "w5 {}", d.w5);
    for (w, c, s) in &syn.tones {
        let o = d
            .oscillations
            .iter()
            .find(|o| (o.omega - w).abs() < 0.01 * w)
            .unwrap_or_else(|| panic!("ω = {w} not found in {:?}", d.oscillations));
        assert!(close(2.0 * o.c.re, *c, 0.01) && close(-2.0 * o.c.im, *s, 0.01), "{o:?}");
    }
}

#[test]
fn closed_form_basis_round_trip() {
    let syn = reference();
    let f = syn.sample(801);
    let opts = DecomposeOptions { basis: BasisTransform::ClosedForm, ..Default::default() };
    let d = decompose(&f, GAMMA, &opts).unwrap();
    assert!(d.remainder_norm <= 0.1);
    for (got, want) in [(d.c1, syn.c1), (d.uehling_scale, 1.0), (d.w1, syn.w1), (d.w5, syn.w5)] {
        assert!(close(got, want, 0.01), "{got} vs {want}");
    }
}

#[test]
fn round_trip_without_uehling() {
    let syn = Synthetic { uehling: 0.0, ..reference() };
    let f = syn.sample(801);
    let opts = DecomposeOptions { uehling: UehlingTerm::Off, ..Default::default() };
    let d = decompose(&f, GAMMA, &opts).unwrap();
    assert!(close(d.c1, syn.c1, 0.01) && close(d.w1, syn.w1, 0.01) && close(d.w5, syn.w5, 0.01), "{d:?}");
    assert_eq!(d.uehling_scale, 0.0);
}

#[test]
fn fixed_uehling_sign_follows_the_data() {
    let syn = Synthetic { uehling: -1.0, ..reference() };
    let d = decompose(&syn.sample(801), GAMMA, &DecomposeOptions::default()).unwrap();
    assert_eq!(d.uehling_scale, -1.0);
    assert!(close(d.c1, syn.c1, 0.01) && close(d.w1, syn.w1, 0.01) && close(d.w5, syn.w5, 0.01), "{d:?}");
}

#[test]
fn free_uehling_scale_round_trip() {
    let syn = reference();
    let opts = DecomposeOptions { uehling: UehlingTerm::Free, ..Default::default() };
    let d = decompose(&syn.sample(801), GAMMA, &opts).unwrap();
    for (got, want) in [(d.c1, syn.c1), (d.uehling_scale, 1.0), (d.w1, syn.w1), (d.w5, syn.w5)] {
        assert!(close(got, want, 0.01), "{got} vs {want}");
    }
}

#[test]
fn pure_decay_has_no_spike() {
    let grid = uniform_grid(A, B, 401).unwrap();
    let values = grid.iter().map(|x| (-x).exp()).collect();
    let f = SampledDensity::from_samples(grid, values).unwrap();
    let s = imaginary_axis_samples(&f, &DecomposeOptions::default()).unwrap();
    let lobe = 2.0 * std::f64::consts::PI / (B - A);
    match highest_spike(&s, lobe, &[], 3.0) {
        Err(Error::NoSpike { ratio }) => assert!(ratio < 3.0),
        other => panic!("expected no spike, got {other:?}"),
    }
}

#[test]
fn single_tone_frequency_and_phase() {
    let (w, c, s) = (9.3, 0.6, 0.8);
    let grid = uniform_grid(A, B, 401).unwrap();
    let values = grid.iter().map(|x| c * (w * x).cos() + s * (w * x).sin()).collect();
    let f = SampledDensity::from_samples(grid, values).unwrap();
    let samples = imaginary_axis_samples(&f, &DecomposeOptions::default()).unwrap();
    let lobe = 2.0 * std::f64::consts::PI / (B - A);
    let band = highest_spike(&samples, lobe, &[], 3.0).unwrap();
    let est = find_frequency(&samples, band, 3.0).unwrap();
    assert!((est.omega - w).abs() < 1e-6, "{est:?}");
    assert!((est.c_cos - c).abs() < 1e-6 && (est.c_sin - s).abs() < 1e-6, "{est:?}");
}

#[test]
fn band_without_interior_peak_is_rejected() {
    let q: Vec<f64> = (0..200).map(|j| 0.1 * j as f64).collect();
    let values = q.iter().map(|q| Complex64::new(1.0 / (1.0 + q), 0.0)).collect();
    let s = ImaginaryAxisSamples { q, values, a: A, b: B };
    assert!(matches!(find_frequency(&s, (3.0, 6.0), 3.0), Err(Error::NoSpike { .. })));
}

#[test]
fn fit_improves_as_true_frequencies_are_added() {
    let syn = reference();
    let f = syn.sample(801);
    let opts = DecomposeOptions::default();
    let r0 = decompose_with_frequencies(&f, GAMMA, &[], &opts).unwrap();
    let r1 = decompose_with_frequencies(&f, GAMMA, &[6.0], &opts).unwrap();
    let r2 = decompose_with_frequencies(&f, GAMMA, &[6.0, 13.0], &opts).unwrap();
    assert!(r0.laplace_residual > r1.laplace_residual && r1.laplace_residual > r2.laplace_residual);
    assert!(r2.remainder_norm < 1e-6, "{}", r2.remainder_norm);
}

#[test]
fn reconstruction_identity() {
    let syn = reference();
    let f = syn.sample(801);
    let d = decompose_with_frequencies(&f, GAMMA, &[6.2, 12.5], &DecomposeOptions::default()).unwrap();
    for (i, &x) in f.grid.iter().enumerate().step_by(37) {
        let model = d.model(x, GAMMA).unwrap();
        assert!((model + d.remainder[i] - f.values[i]).abs() < 1e-9 * f.values[i].abs().max(1.0));
    }
}

#[test]
fn failure_reports_best_remainder() {
    let grid = uniform_grid(A, B, 401).unwrap();
    // a cusp the basis cannot represent
    let values = grid.iter().map(|x| 200.0 * (x - 1.5f64).abs()).collect();
    let f = SampledDensity::from_samples(grid, values).unwrap();
    let opts = DecomposeOptions { tolerance: 1e-6, max_frequencies: 2, uehling: UehlingTerm::Off, ..Default::default() };
    match decompose(&f, GAMMA, &opts) {
        Err(Error::DecompositionFailed { remainder, tolerance, .. }) => {
            assert!(remainder > tolerance);
        }
        other => panic!("{other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]
    #[test]
    fn oscillations_are_real(w in 4.0f64..30.0, c in -3.0f64..3.0, s in -3.0f64..3.0) {
        let syn = Synthetic { c1: 2.0, uehling: 0.0, w1: 0.1, w5: 0.01, tones: vec![(w, c, s)] };
        let f = syn.sample(401);
        let opts = DecomposeOptions { uehling: UehlingTerm::Off, ..Default::default() };
        let d = decompose_with_frequencies(&f, GAMMA, &[w], &opts).unwrap();
        let o = d.oscillations[0];
        // c e^{iωx} + c̄ e^{-iωx} is real and equals the input tone
        for x in [0.5, 1.3, 2.2] {
            let tone = c * (w * x).cos() + s * (w * x).sin();
            prop_assert!((o.eval(x) - tone).abs() < 1e-7 * (1.0 + tone.abs()));
        }
    }
}
