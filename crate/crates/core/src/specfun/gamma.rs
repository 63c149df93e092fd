//! Complex Gamma function.
//!
//! Lanczos approximation with Pugh's r = 10.900511, 11-term coefficient set,
//! evaluated in log form so that large arguments do not overflow before the
//! final exponentiation. Arguments with `Re z < 0.5` go through the
//! reflection formula.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

const LANCZOS_R: f64 = 10.900511;

const LANCZOS_DK: [f64; 11] = [
    2.48574089138753565546e-5,
    1.05142378581721974210,
    -3.45687097222016235469,
    4.51227709466894823700,
    -2.98285225323576655721,
    1.05639711577126713077,
    -1.95428773191645869583e-1,
    1.70970543404441224307e-2,
    -5.71926117404305781283e-4,
    4.63399473359905636708e-6,
    -2.71994908488607703910e-9,
];

/// ln(2·√(e/π))
const LN_TWO_SQRT_E_OVER_PI: f64 = 0.620_782_237_635_245_2;

fn is_pole(z: Complex64) -> bool {
    z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round()
}

fn lanczos_sum(z: Complex64) -> Complex64 {
    // z is the argument of Γ; the series is in terms of z - 1.
    LANCZOS_DK
        .iter()
        .enumerate()
        .skip(1)
        .fold(Complex64::new(LANCZOS_DK[0], 0.0), |acc, (k, &d)| {
            acc + d / (z + (k as f64 - 1.0))
        })
}

/// ln Γ(z) for `Re z >= 0.5`. Branch of the imaginary part is not normalized.
fn ln_gamma_right(z: Complex64) -> Complex64 {
    let t = z - 0.5;
    LN_TWO_SQRT_E_OVER_PI + lanczos_sum(z).ln() + t * ((t + LANCZOS_R).ln() - 1.0)
}

/// Logarithm of Γ(z).
///
/// The real part is ln|Γ(z)|; the imaginary part is an argument of Γ(z) but
/// not necessarily the principal one, which is all the callers need
/// (they exponentiate or take the real part).
pub fn ln_gamma_complex(z: Complex64) -> Result<Complex64> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::domain("ln_gamma", format!("non-finite argument {z}")));
    }
    if is_pole(z) {
        return Err(Error::Pole { function: "gamma", at: format!("{z}") });
    }
    if z.re >= 0.5 {
        return Ok(ln_gamma_right(z));
    }
    // Γ(z) Γ(1-z) = π / sin(πz)
    let sin_pz = ln_sin_pi(z);
    Ok(Complex64::new(PI.ln(), 0.0) - sin_pz - ln_gamma_right(1.0 - z))
}

/// ln sin(πz) without overflow for large |Im z|.
fn ln_sin_pi(z: Complex64) -> Complex64 {
    let w = z * PI;
    if w.im.abs() < 30.0 {
        return w.sin().ln();
    }
    // sin w = (e^{iw} - e^{-iw}) / 2i; one exponential dominates.
    let i = Complex64::i();
    let ln_half = 0.5_f64.ln();
    if w.im > 0.0 {
        // e^{-iw} dominates: sin w = e^{-iw} (1 - e^{2iw}) · i/2
        -i * w + (1.0 - (2.0 * i * w).exp()).ln() + Complex64::new(ln_half, PI / 2.0)
    } else {
        // sin w = e^{iw} (1 - e^{-2iw}) · (-i/2)
        i * w + (1.0 - (-2.0 * i * w).exp()).ln() + Complex64::new(ln_half, -PI / 2.0)
    }
}

/// Γ(z) for complex z; fails at the poles z = 0, -1, -2, ...
pub fn gamma_complex(z: Complex64) -> Result<Complex64> {
    if is_pole(z) {
        return Err(Error::Pole { function: "gamma", at: format!("{z}") });
    }
    if z.re >= 0.5 {
        return Ok(ln_gamma_right(z).exp());
    }
    let w = z * PI;
    if w.im.abs() < 30.0 {
        Ok(PI / (w.sin() * ln_gamma_right(1.0 - z).exp()))
    } else {
        Ok(ln_gamma_complex(z)?.exp())
    }
}

/// ln|Γ(z)|, the quantity needed for continuum normalizations.
pub fn ln_abs_gamma(z: Complex64) -> Result<f64> {
    Ok(ln_gamma_complex(z)?.re)
}

/// Real Γ(x), a thin wrapper used for the bound-state normalizations.
pub fn gamma_real(x: f64) -> Result<f64> {
    Ok(gamma_complex(Complex64::new(x, 0.0))?.re)
}

/// ln Γ(x) for real x > 0.
pub fn ln_gamma_real(x: f64) -> Result<f64> {
    if x <= 0.0 {
        return Err(Error::domain("ln_gamma_real", format!("x = {x} <= 0")));
    }
    ln_abs_gamma(Complex64::new(x, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn integers_and_half_integers() {
        assert!((gamma_real(1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((gamma_real(5.0).unwrap() - 24.0).abs() < 1e-12);
        assert!((gamma_real(0.5).unwrap() - PI.sqrt()).abs() < 1e-14);
        assert!((gamma_real(-0.5).unwrap() + 2.0 * PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn poles_are_rejected() {
        for n in [0.0, -1.0, -7.0] {
            assert!(matches!(gamma_complex(Complex64::new(n, 0.0)), Err(Error::Pole { .. })));
        }
        assert!(gamma_complex(Complex64::new(-1.0, 1e-9)).is_ok());
    }

    #[test]
    fn one_plus_i() {
        let g = gamma_complex(Complex64::new(1.0, 1.0)).unwrap();
        assert!(rel(g, Complex64::new(0.49801566811835604, -0.15494982830181069)) < 1e-13);
    }

    #[test]
    fn large_imaginary_part_reflection() {
        // |Γ(iy)|² = π / (y sinh πy)
        for y in [15.0, 25.0, 40.0] {
            let g = gamma_complex(Complex64::new(0.0, y)).unwrap();
            let expect = PI / (y * (PI * y).sinh());
            assert!((g.norm_sqr() / expect - 1.0).abs() < 1e-11, "y = {y}");
        }
    }
}
