//! Generalized exponential integrals Eₙ(z) = ∫₁^∞ t⁻ⁿ e^{-zt} dt.
//!
//! Power series around the origin for |z| ≤ 1, modified-Lentz continued
//! fraction otherwise. Complex arguments are supported on the closed right
//! half plane, which is where the restricted Laplace transforms sample them
//! (real axis and imaginary axis).

use num_complex::Complex64;

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const MAX_ITER: usize = 20_000;

/// Eₙ(p) for real p.
///
/// `p = 0` is allowed for n ≥ 2, where Eₙ(0) = 1/(n-1).
pub fn expint_en(n: u32, p: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("expint_en", "order n must be at least 1"));
    }
    if p < 0.0 || !p.is_finite() || (p == 0.0 && n == 1) {
        return Err(Error::domain("expint_en", format!("E_{n}({p}) is undefined")));
    }
    Ok(expint_en_complex(n, Complex64::new(p, 0.0))?.re)
}

/// Eₙ(z) for complex z with Re z ≥ 0.
pub fn expint_en_complex(n: u32, z: Complex64) -> Result<Complex64> {
    if n == 0 {
        return Err(Error::domain("expint_en", "order n must be at least 1"));
    }
    if z.re < 0.0 || !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::domain("expint_en", format!("argument {z} outside Re z >= 0")));
    }
    if z.norm() == 0.0 {
        if n == 1 {
            return Err(Error::domain("expint_en", "E_1(0) diverges"));
        }
        return Ok(Complex64::new(1.0 / (n as f64 - 1.0), 0.0));
    }
    if z.norm() > 1.0 {
        continued_fraction(n, z)
    } else {
        power_series(n, z)
    }
}

fn continued_fraction(n: u32, z: Complex64) -> Result<Complex64> {
    let tiny = 1e-300;
    let nm1 = n as f64 - 1.0;
    let mut b = z + n as f64;
    let mut c = Complex64::new(1.0 / tiny, 0.0);
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=MAX_ITER {
        let fi = i as f64;
        let an = -fi * (nm1 + fi);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).norm() < 1e-16 {
            return Ok(h * (-z).exp());
        }
    }
    Err(Error::NonConvergence { what: "expint_en", detail: format!("continued fraction at z = {z}") })
}

fn power_series(n: u32, z: Complex64) -> Result<Complex64> {
    let nm1 = n as i64 - 1;
    let mut ans = if nm1 != 0 {
        Complex64::new(1.0 / nm1 as f64, 0.0)
    } else {
        -z.ln() - EULER_GAMMA
    };
    let mut fact = Complex64::new(1.0, 0.0);
    for i in 1..=MAX_ITER as i64 {
        fact *= -z / i as f64;
        let del = if i != nm1 {
            -fact / (i - nm1) as f64
        } else {
            let psi = -EULER_GAMMA + (1..=nm1).map(|k| 1.0 / k as f64).sum::<f64>();
            fact * (-z.ln() + psi)
        };
        ans += del;
        if del.norm() < ans.norm() * 1e-17 {
            return Ok(ans);
        }
    }
    Err(Error::NonConvergence { what: "expint_en", detail: format!("power series at z = {z}") })
}
