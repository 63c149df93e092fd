//! Closed-form restricted Laplace transforms of the decomposition basis.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::specfun::expint_en_complex;

fn check_interval(a: f64, b: f64) -> Result<()> {
    if !(a > 0.0 && b >= a && b.is_finite()) {
        return Err(Error::invalid(format!("Laplace interval [{a}, {b}] must satisfy 0 < a ≤ b")));
    }
    Ok(())
}

/// (1 - e^{-w}) / w, accurate for small |w|.
fn one_minus_exp_over(w: Complex64) -> Complex64 {
    if w.norm() < 1e-2 {
        // 1 - w/2 + w²/6 - w³/24 + …
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for k in 2..10 {
            term *= -w / k as f64;
            sum += term;
        }
        sum
    } else {
        (1.0 - (-w).exp()) / w
    }
}

/// e^{iωx} ↦ (e^{-(p-iω)a} - e^{-(p-iω)b}) / (p - iω), with limit b - a.
pub fn s_hat(omega: f64, p: Complex64, a: f64, b: f64) -> Complex64 {
    let mu = p - Complex64::new(0.0, omega);
    (-mu * a).exp() * one_minus_exp_over(mu * (b - a)) * (b - a)
}

/// cos ωx ↦ (ŝ_ω + ŝ_{-ω}) / 2
pub fn cos_hat(omega: f64, p: Complex64, a: f64, b: f64) -> Complex64 {
    0.5 * (s_hat(omega, p, a, b) + s_hat(-omega, p, a, b))
}

/// sin ωx ↦ (ŝ_ω - ŝ_{-ω}) / 2i
pub fn sin_hat(omega: f64, p: Complex64, a: f64, b: f64) -> Complex64 {
    (s_hat(omega, p, a, b) - s_hat(-omega, p, a, b)) / Complex64::new(0.0, 2.0)
}

/// 1/x^{m+1} ↦ a^{-m} E_{m+1}(ap) - b^{-m} E_{m+1}(bp) for Re p ≥ 0.
pub fn e_hat(m: u32, p: Complex64, a: f64, b: f64) -> Result<Complex64> {
    check_interval(a, b)?;
    if p.re < 0.0 {
        return Err(Error::domain("e_hat", format!("p = {p} must have Re p ≥ 0")));
    }
    if p.norm() == 0.0 {
        let v = if m == 0 {
            (b / a).ln()
        } else {
            (a.powi(-(m as i32)) - b.powi(-(m as i32))) / m as f64
        };
        return Ok(Complex64::new(v, 0.0));
    }
    if m == 0 && p.norm() * b < 1e-3 {
        // E₁ difference without the logarithmic cancellation
        return Ok(Complex64::new((b / a).ln(), 0.0) - p * (b - a) + p * p * (b * b - a * a) / 4.0
            - p * p * p * (b.powi(3) - a.powi(3)) / 18.0);
    }
    let ea = expint_en_complex(m + 1, p * a)?;
    let eb = expint_en_complex(m + 1, p * b)?;
    Ok(ea * a.powi(-(m as i32)) - eb * b.powi(-(m as i32)))
}

/// x ↦ ∫ₐᵇ x e^{-px} dx = [e^{-ap}(ap+1) - e^{-bp}(bp+1)] / p².
pub fn linear_hat(p: Complex64, a: f64, b: f64) -> Complex64 {
    linear_moment(p, a, b)
}

pub(crate) fn linear_moment(mu: Complex64, a: f64, b: f64) -> Complex64 {
    if mu.norm() * b < 1e-3 {
        // Taylor expansion of e^{-μx}; |μ|b < 1e-3 makes eight terms ample
        let mut sum = Complex64::new(0.0, 0.0);
        let mut coeff = Complex64::new(1.0, 0.0);
        for k in 0..8 {
            let kk = k as f64;
            sum += coeff * (b.powi(k + 2) - a.powi(k + 2)) / (kk + 2.0);
            coeff *= -mu / (kk + 1.0);
        }
        return sum;
    }
    let ea = (-mu * a).exp() * (mu * a + 1.0);
    let eb = (-mu * b).exp() * (mu * b + 1.0);
    (ea - eb) / (mu * mu)
}

/// δ ↦ 1
pub fn delta_hat() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

/// ê₄(0) = (a⁻⁴ - b⁻⁴)/4, the normalization used by both norms.
pub fn e4_at_zero(a: f64, b: f64) -> f64 {
    (a.powi(-4) - b.powi(-4)) / 4.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn s_hat_limit_is_interval_length() {
        let v = s_hat(2.0, Complex64::new(0.0, 2.0), 1.0, 4.0);
        assert!((v - 3.0).norm() < 1e-15);
        let near = s_hat(2.0, Complex64::new(0.0, 2.0 + 1e-9), 1.0, 4.0);
        assert!((near - 3.0).norm() < 1e-7);
    }

    #[test]
    fn e_hat_small_argument_branch_is_continuous() {
        let (a, b) = (0.5, 1.5);
        let p = Complex64::new(0.0, 6e-4);
        let series = e_hat(0, p, a, b).unwrap();
        let direct = expint_en_complex(1, p * a).unwrap() - expint_en_complex(1, p * b).unwrap();
        assert!((series - direct).norm() < 1e-9);
    }

    #[test]
    fn linear_moment_series_branch_is_continuous() {
        let mu = Complex64::new(2.0, 0.5);
        let direct = linear_moment(mu, 1e-4, 4e-4);
        // the closed form cancels badly here; a Gauss rule does not
        let rule = crate::quad::GaussLegendre::new(12);
        let exact = Complex64::new(
            rule.integrate(1e-4, 4e-4, |x| x * (-mu * x).exp().re),
            rule.integrate(1e-4, 4e-4, |x| x * (-mu * x).exp().im),
        );
        assert!((direct - exact).norm() < 1e-14 * exact.norm());
    }

    #[test]
    fn e4_normalization() {
        let v = e_hat(4, Complex64::new(0.0, 0.0), 0.5, 2.0).unwrap();
        assert!((v.re - e4_at_zero(0.5, 2.0)).abs() < 1e-14);
    }
}
