//! Kummer's confluent hypergeometric function M(a, b, z) = ₁F₁(a; b; z) for
//! complex parameters and argument.
//!
//! Evaluation strategy, for `Re z >= 0` (the left half plane is mapped over
//! with Kummer's transformation M(a,b,z) = e^z M(b-a,b,-z)):
//!
//! 1. the Kummer series, accepted when the cancellation it suffered
//!    (Σ|tₖ| / |Σ tₖ|) is small;
//! 2. the large-|z| asymptotic expansion (DLMF 13.7.2), accepted when both
//!    divergent series reach a term below the target tolerance;
//! 3. otherwise, analytic continuation along the ray from the origin: the
//!    series is evaluated at a radius where it is still accurate and the
//!    value and first derivative are carried outward with local Taylor
//!    expansions generated from Kummer's equation
//!    z w'' + (b - z) w' - a w = 0.
//!
//! Step 3 covers the regime the radial Dirac solutions live in: purely
//! imaginary arguments of modulus a few tens, where the series loses all
//! significance and the asymptotic expansion has not yet kicked in.

use num_complex::Complex64;

use super::gamma::ln_gamma_complex;
use crate::error::{Error, Result};

/// Radius beyond which the asymptotic expansion is tried first.
const ASYMPTOTIC_RADIUS: f64 = 25.0;
/// Largest acceptable Σ|tₖ| / |Σ tₖ| for a final series result (≈ 3 digits lost).
const SERIES_MAX_LOSS: f64 = 1e3;
/// Loss allowed at the starting point of the continuation.
const START_MAX_LOSS: f64 = 1e2;
const MAX_SERIES_TERMS: usize = 5000;
/// Largest continuation step, also capped at half the distance to the origin.
const MAX_STEP: f64 = 1.0;

fn is_nonpositive_integer(v: Complex64) -> bool {
    v.im == 0.0 && v.re <= 0.0 && v.re == v.re.round()
}

/// M(a, b, z).
///
/// Fails when b is a non-positive integer (unless the series terminates
/// first) or when none of the evaluation routes reaches its tolerance.
pub fn hyp1f1(a: Complex64, b: Complex64, z: Complex64) -> Result<Complex64> {
    for (name, v) in [("a", a), ("b", b), ("z", z)] {
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(Error::domain("hyp1f1", format!("{name} = {v} is not finite")));
        }
    }
    if z == Complex64::new(0.0, 0.0) || a == Complex64::new(0.0, 0.0) {
        return Ok(Complex64::new(1.0, 0.0));
    }
    if is_nonpositive_integer(a) && (!is_nonpositive_integer(b) || b.re < a.re) {
        return Ok(terminating_series(a, b, z));
    }
    if is_nonpositive_integer(b) {
        return Err(Error::Pole { function: "hyp1f1", at: format!("b = {b}") });
    }
    if z.re < 0.0 {
        let reflected = hyp1f1_right(b - a, b, -z)?;
        return Ok(reflected * z.exp());
    }
    hyp1f1_right(a, b, z)
}

/// M(a, b, z) for real arguments.
pub fn hyp1f1_real(a: f64, b: f64, x: f64) -> Result<f64> {
    Ok(hyp1f1(Complex64::new(a, 0.0), Complex64::new(b, 0.0), Complex64::new(x, 0.0))?.re)
}

fn terminating_series(a: Complex64, b: Complex64, z: Complex64) -> Complex64 {
    let n = (-a.re).round() as usize;
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    for k in 0..n {
        let k = k as f64;
        term *= (a + k) * z / ((b + k) * (k + 1.0));
        sum += term;
    }
    sum
}

fn hyp1f1_right(a: Complex64, b: Complex64, z: Complex64) -> Result<Complex64> {
    let r = z.norm();
    if r >= ASYMPTOTIC_RADIUS {
        if let Some(v) = asymptotic(a, b, z)? {
            return Ok(v);
        }
    }
    let s = series(a, b, z);
    if s.converged && s.loss <= SERIES_MAX_LOSS {
        return Ok(s.value);
    }
    continue_along_ray(a, b, z)
}

struct SeriesEval {
    value: Complex64,
    derivative: Complex64,
    loss: f64,
    converged: bool,
}

/// Kummer series together with its z-derivative, tracking cancellation.
fn series(a: Complex64, b: Complex64, z: Complex64) -> SeriesEval {
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    let mut dsum = Complex64::new(0.0, 0.0);
    let mut abssum = 1.0;
    let mut small_run = 0;
    let mut converged = false;
    for k in 0..MAX_SERIES_TERMS {
        let kf = k as f64;
        term *= (a + kf) * z / ((b + kf) * (kf + 1.0));
        sum += term;
        dsum += term * (kf + 1.0);
        let t = term.norm();
        abssum += t;
        if t <= f64::EPSILON * 0.25 * sum.norm() {
            small_run += 1;
            if small_run >= 3 {
                converged = true;
                break;
            }
        } else {
            small_run = 0;
        }
        if term == Complex64::new(0.0, 0.0) {
            converged = true;
            break;
        }
    }
    let norm = sum.norm();
    SeriesEval {
        value: sum,
        derivative: dsum / z,
        loss: if norm > 0.0 { abssum / norm } else { f64::INFINITY },
        converged,
    }
}

/// Asymptotic expansion for large |z|; `None` if it cannot reach tolerance.
fn asymptotic(a: Complex64, b: Complex64, z: Complex64) -> Result<Option<Complex64>> {
    let ln_z = z.ln();
    let ln_gamma_b = ln_gamma_complex(b)?;
    let sign = if z.im >= 0.0 { 1.0 } else { -1.0 };
    let pi_i = Complex64::new(0.0, std::f64::consts::PI * sign);

    // e^{±iπa} z^{-a} Γ(b)/Γ(b-a) Σ (a)ₛ (a-b+1)ₛ / s! (-z)^{-s}
    let first = if is_nonpositive_integer(b - a) {
        None
    } else {
        let (sum, tail) = divergent_sum(a, a - b + 1.0, -z);
        let pref = (ln_gamma_b - ln_gamma_complex(b - a)? + pi_i * a - a * ln_z).exp();
        Some((pref * sum, pref.norm() * tail))
    };
    // e^z z^{a-b} Γ(b)/Γ(a) Σ (1-a)ₛ (b-a)ₛ / s! z^{-s}
    let second = if is_nonpositive_integer(a) {
        None
    } else {
        let (sum, tail) = divergent_sum(1.0 - a, b - a, z);
        let pref = (ln_gamma_b - ln_gamma_complex(a)? + z + (a - b) * ln_z).exp();
        Some((pref * sum, pref.norm() * tail))
    };

    let mut value = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    for (v, e) in [first, second].into_iter().flatten() {
        value += v;
        err += e;
    }
    if !value.re.is_finite() || !value.im.is_finite() {
        return Ok(None);
    }
    if err <= 1e-14 * value.norm() {
        Ok(Some(value))
    } else {
        Ok(None)
    }
}

/// Σ (p)ₛ (q)ₛ / s! w^{-s} truncated at its smallest term; returns the sum and
/// the magnitude of the first omitted term.
fn divergent_sum(p: Complex64, q: Complex64, w: Complex64) -> (Complex64, f64) {
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    let mut last = 1.0_f64;
    for s in 0..200 {
        let sf = s as f64;
        let next = term * (p + sf) * (q + sf) / ((sf + 1.0) * w);
        let n = next.norm();
        if n >= last && s > 0 {
            return (sum, last);
        }
        term = next;
        sum += term;
        last = n;
        if n <= 1e-17 * sum.norm() {
            return (sum, n);
        }
    }
    (sum, last)
}

fn continue_along_ray(a: Complex64, b: Complex64, z: Complex64) -> Result<Complex64> {
    let radius = z.norm();
    let dir = z / radius;

    let mut start = (radius * 0.5).min(4.0 * (b.norm() + 1.0));
    let (mut w, mut dw) = loop {
        let s = series(a, b, dir * start);
        if s.converged && s.loss <= START_MAX_LOSS {
            break (s.value, s.derivative);
        }
        start *= 0.5;
        if start < 1e-3 {
            return Err(Error::NonConvergence {
                what: "hyp1f1",
                detail: format!("no accurate starting point for a = {a}, b = {b}, z = {z}"),
            });
        }
    };

    let mut t = start;
    while t < radius {
        let h = (radius - t).min(0.5 * t).min(MAX_STEP);
        let (nw, ndw) = taylor_step(a, b, dir * t, w, dw, dir * h)?;
        w = nw;
        dw = ndw;
        t += h;
    }
    Ok(w)
}

/// Advance (w, w') from z0 to z0 + h with the local Taylor series of
/// Kummer's equation. Coefficients are carried pre-multiplied by hᵏ.
fn taylor_step(
    a: Complex64,
    b: Complex64,
    z0: Complex64,
    w: Complex64,
    dw: Complex64,
    h: Complex64,
) -> Result<(Complex64, Complex64)> {
    let mut d0 = w;
    let mut d1 = dw * h;
    let mut sum = d0 + d1;
    let mut dsum = d1;
    let mut small_run = 0;
    for k in 0..400 {
        let kf = k as f64;
        let d2 = ((a + kf) * d0 * h * h - (kf + 1.0) * (b + kf - z0) * d1 * h)
            / (z0 * (kf + 1.0) * (kf + 2.0));
        sum += d2;
        dsum += d2 * (kf + 2.0);
        if d2.norm() <= f64::EPSILON * 0.1 * sum.norm() {
            small_run += 1;
            if small_run >= 3 {
                return Ok((sum, dsum / h));
            }
        } else {
            small_run = 0;
        }
        d0 = d1;
        d1 = d2;
    }
    Err(Error::NonConvergence {
        what: "hyp1f1",
        detail: format!("Taylor continuation stalled at z0 = {z0}"),
    })
}
