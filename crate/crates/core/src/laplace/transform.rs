//! Restricted Laplace transform of sampled data.
//!
//! The samples are interpolated by piecewise quadratics (consecutive point
//! triples) which are then integrated against e^{-px} exactly, so highly
//! oscillatory kernels on the imaginary axis cost nothing extra.

use num_complex::Complex64;

use crate::density::SampledDensity;
use crate::error::{Error, Result};

/// ∫₀^H tʲ e^{-pt} dt for j = 0, 1, 2.
fn moments(p: Complex64, h: f64) -> [Complex64; 3] {
    let w = p * h;
    if w.norm() < 1.0 {
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for (j, m) in out.iter_mut().enumerate() {
            // Σ_k (-w)^k / (k! (j+k+1)) · H^{j+1}
            let mut term = Complex64::new(1.0, 0.0);
            let mut sum = Complex64::new(0.0, 0.0);
            for k in 0..30 {
                let add = term / (j + k + 1) as f64;
                sum += add;
                if add.norm() < 1e-18 * sum.norm() {
                    break;
                }
                term *= -w / (k + 1) as f64;
            }
            *m = sum * h.powi(j as i32 + 1);
        }
        return out;
    }
    let e = (-w).exp();
    let m0 = (1.0 - e) / p;
    let m1 = (1.0 - e * (1.0 + w)) / (p * p);
    let m2 = (2.0 - e * (2.0 + 2.0 * w + w * w)) / (p * p * p);
    [m0, m1, m2]
}

/// Integral over [lo, hi] of the quadratic through (xs, fs) times e^{-px}.
fn quadratic_piece(xs: [f64; 3], fs: [f64; 3], lo: f64, hi: f64, p: Complex64) -> Complex64 {
    let d01 = (fs[1] - fs[0]) / (xs[1] - xs[0]);
    let d12 = (fs[2] - fs[1]) / (xs[2] - xs[1]);
    let d2 = (d12 - d01) / (xs[2] - xs[0]);
    // q(x) = f₀ + d01 (x - x₀) + d2 (x - x₀)(x - x₁), re-expanded in t = x - lo
    let (u0, u1) = (lo - xs[0], lo - xs[1]);
    let c0 = fs[0] + d01 * u0 + d2 * u0 * u1;
    let c1 = d01 + d2 * (u0 + u1);
    let c2 = d2;
    let m = moments(p, hi - lo);
    (-p * lo).exp() * (m[0] * c0 + m[1] * c1 + m[2] * c2)
}

/// Weights of the three samples of a quadratic piece.
fn piece_weights(xs: [f64; 3], lo: f64, hi: f64, p: Complex64) -> [Complex64; 3] {
    // Lagrange basis in t = x - lo: L_i(t) = (t - t_j)(t - t_k) / ((t_i - t_j)(t_i - t_k))
    let t = [xs[0] - lo, xs[1] - lo, xs[2] - lo];
    let m = moments(p, hi - lo);
    let e = (-p * lo).exp();
    let mut out = [Complex64::new(0.0, 0.0); 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        let den = (t[i] - t[j]) * (t[i] - t[k]);
        out[i] = e * (m[2] - m[1] * (t[j] + t[k]) + m[0] * (t[j] * t[k])) / den;
    }
    out
}

/// w with Σᵢ wᵢ fᵢ equal to [`transform_samples`] for any values.
pub fn transform_weights(grid: &[f64], p: Complex64) -> Result<Vec<Complex64>> {
    let n = grid.len();
    if n < 3 {
        return Err(Error::GridTooCoarse(format!("need at least three samples, have {n}")));
    }
    let mut w = vec![Complex64::new(0.0, 0.0); n];
    let mut i = 0;
    while i + 2 < n {
        let xs = [grid[i], grid[i + 1], grid[i + 2]];
        for (k, v) in piece_weights(xs, xs[0], xs[2], p).into_iter().enumerate() {
            w[i + k] += v;
        }
        i += 2;
    }
    if i + 1 < n {
        let xs = [grid[n - 3], grid[n - 2], grid[n - 1]];
        for (k, v) in piece_weights(xs, xs[1], xs[2], p).into_iter().enumerate() {
            w[n - 3 + k] += v;
        }
    }
    Ok(w)
}

/// ∫ f(x) e^{-px} dx over the sample range.
pub fn transform_samples(grid: &[f64], values: &[f64], p: Complex64) -> Result<Complex64> {
    let n = grid.len();
    if n < 3 || values.len() != n {
        return Err(Error::GridTooCoarse(format!("need at least three matching samples, have {n}")));
    }
    let mut sum = Complex64::new(0.0, 0.0);
    let mut i = 0;
    while i + 2 < n {
        let xs = [grid[i], grid[i + 1], grid[i + 2]];
        let fs = [values[i], values[i + 1], values[i + 2]];
        sum += quadratic_piece(xs, fs, xs[0], xs[2], p);
        i += 2;
    }
    if i + 1 < n {
        // odd interval count: last interval from the trailing triple
        let xs = [grid[n - 3], grid[n - 2], grid[n - 1]];
        let fs = [values[n - 3], values[n - 2], values[n - 1]];
        sum += quadratic_piece(xs, fs, xs[1], xs[2], p);
    }
    Ok(sum)
}

/// f̂(p) = ∫ₐᵇ f(x) e^{-px} dx of a sampled density.
pub fn laplace_transform(f: &SampledDensity, p: Complex64) -> Result<Complex64> {
    transform_samples(&f.grid, &f.values, p)
}

/// As [`laplace_transform`], but also recomputes the transform on every
/// other sample and fails when the two differ by more than `rel_tol`
/// relative to `scale` (or to the value itself when `scale` is zero).
pub fn laplace_transform_checked(f: &SampledDensity, p: Complex64, rel_tol: f64, scale: f64) -> Result<Complex64> {
    let full = laplace_transform(f, p)?;
    if f.grid.len() < 5 {
        return Err(Error::GridTooCoarse("refinement check needs at least five samples".into()));
    }
    let (mut xs, mut ys): (Vec<f64>, Vec<f64>) =
        f.grid.iter().zip(&f.values).step_by(2).map(|(x, y)| (*x, *y)).unzip();
    if *xs.last().unwrap() != *f.grid.last().unwrap() {
        xs.push(*f.grid.last().unwrap());
        ys.push(*f.values.last().unwrap());
    }
    let half = transform_samples(&xs, &ys, p)?;
    let reference = if scale > 0.0 { scale } else { full.norm() };
    let diff = (full - half).norm();
    if diff > rel_tol * reference {
        return Err(Error::GridTooCoarse(format!(
            "transform at p = {p} moves by {diff:.3e} when the grid is halved (tolerance {:.3e})",
            rel_tol * reference
        )));
    }
    Ok(full)
}

/// Composite integral of samples, the transform at p = 0.
pub fn integrate_samples(grid: &[f64], values: &[f64]) -> Result<f64> {
    Ok(transform_samples(grid, values, Complex64::new(0.0, 0.0))?.re)
}
