//! Λ₀ → ∞ extrapolation of 𝗐₅ and the piecewise power law 𝗐₅(x).
//!
//! The limits minimize Σ (𝗐₅^{Λ∞} + βΛ₀^{-η} - 𝗐₅^{ΛΛ₀})². For fixed η the
//! problem is linear in ({𝗐₅^{Λ∞}}, β), so those are solved exactly and
//! gradient descent runs on η alone.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct W5Sample {
    pub lambda: f64,
    pub lambda0: f64,
    pub w5: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct W5Samples {
    pub entries: Vec<W5Sample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct W5Limit {
    pub lambda: f64,
    pub w5_inf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    /// Sorted by Λ.
    pub limits: Vec<W5Limit>,
    pub beta: f64,
    pub eta: f64,
    pub objective: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

/// Tunables of [`extrapolate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtrapolateOptions {
    pub gradient_tolerance: f64,
    pub learning_rate: f64,
    pub max_iterations: usize,
    /// η range scanned for the starting point.
    pub eta_range: (f64, f64),
}

impl Default for ExtrapolateOptions {
    fn default() -> Self {
        ExtrapolateOptions { gradient_tolerance: 1e-10, learning_rate: 1.0, max_iterations: 10_000, eta_range: (0.05, 8.0) }
    }
}

struct Problem {
    lambdas: Vec<f64>,
    /// (index into lambdas, Λ₀, 𝗐₅)
    rows: Vec<(usize, f64, f64)>,
}

impl Problem {
    fn new(samples: &W5Samples) -> Result<Self> {
        let mut entries = samples.entries.clone();
        if entries.iter().any(|e| !(e.lambda > 0.0 && e.lambda0 > 0.0 && e.w5.is_finite())) {
            return Err(Error::invalid("𝗐₅ samples need Λ > 0, Λ₀ > 0 and finite values"));
        }
        // canonical order: the result must not depend on input order
        entries.sort_by(|a, b| {
            a.lambda.total_cmp(&b.lambda).then(a.lambda0.total_cmp(&b.lambda0)).then(a.w5.total_cmp(&b.w5))
        });
        let mut lambdas: Vec<f64> = entries.iter().map(|e| e.lambda).collect();
        lambdas.dedup();
        for &l in &lambdas {
            let mut l0: Vec<f64> = entries.iter().filter(|e| e.lambda == l).map(|e| e.lambda0).collect();
            l0.dedup();
            if l0.len() < 2 {
                return Err(Error::invalid(format!("Λ = {l} has {} distinct Λ₀; extrapolation needs at least 2", l0.len())));
            }
        }
        let rows = entries
            .iter()
            .map(|e| (lambdas.iter().position(|&l| l == e.lambda).unwrap(), e.lambda0, e.w5))
            .collect();
        Ok(Problem { lambdas, rows })
    }

    /// Optimal ({𝗐₅^{Λ∞}}, β) at fixed η and the objective there.
    fn linear_part(&self, eta: f64) -> Result<(Vec<f64>, f64, f64)> {
        let m = self.lambdas.len();
        let mut design = DMatrix::<f64>::zeros(self.rows.len(), m + 1);
        let mut rhs = DVector::<f64>::zeros(self.rows.len());
        for (i, &(k, l0, w)) in self.rows.iter().enumerate() {
            design[(i, k)] = 1.0;
            design[(i, m)] = l0.powf(-eta);
            rhs[i] = w;
        }
        // full column rank is guaranteed by two distinct Λ₀ per Λ
        let qr = design.clone().qr();
        let qtb = qr.q().transpose() * &rhs;
        let sol = qr
            .r()
            .solve_upper_triangular(&qtb)
            .ok_or_else(|| Error::NonConvergence { what: "extrapolation", detail: "singular design".into() })?;
        let r = &design * &sol - &rhs;
        Ok((sol.iter().take(m).copied().collect(), sol[m], r.norm_squared()))
    }

    /// Full gradient of the objective with respect to ({𝗐₅^{Λ∞}}, β, η).
    fn gradient(&self, w: &[f64], beta: f64, eta: f64) -> Vec<f64> {
        let m = self.lambdas.len();
        let mut g = vec![0.0; m + 2];
        for &(k, l0, v) in &self.rows {
            let t = l0.powf(-eta);
            let r = w[k] + beta * t - v;
            g[k] += 2.0 * r;
            g[m] += 2.0 * r * t;
            g[m + 1] -= 2.0 * r * beta * t * l0.ln();
        }
        g
    }
}

/// Least-squares limits 𝗐₅^{Λ∞} with the common correction βΛ₀^{-η}.
pub fn extrapolate(samples: &W5Samples, opts: &ExtrapolateOptions) -> Result<Extrapolation> {
    let prob = Problem::new(samples)?;
    let objective = |eta: f64| prob.linear_part(eta).map(|(_, _, f)| f);

    // coarse logarithmic scan for the starting η
    let (lo, hi) = opts.eta_range;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::invalid(format!("η range ({lo}, {hi}) is empty")));
    }
    let n_scan = 64;
    let mut eta = lo;
    let mut best = f64::INFINITY;
    for i in 0..=n_scan {
        let e = lo * (hi / lo).powf(i as f64 / n_scan as f64);
        let f = objective(e)?;
        if f < best {
            best = f;
            eta = e;
        }
    }

    let mut step = opts.learning_rate;
    let mut iterations = 0;
    let (mut w, mut beta, mut f) = prob.linear_part(eta)?;
    loop {
        let g = prob.gradient(&w, beta, eta);
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm < opts.gradient_tolerance || iterations >= opts.max_iterations {
            break;
        }
        iterations += 1;
        // the linear parameters are optimal, so the η component carries the descent
        let d = g[g.len() - 1];
        let mut halvings = 0;
        loop {
            let trial = eta - step * d;
            let (tw, tb, tf) = prob.linear_part(trial)?;
            if tf < f {
                (w, beta, f, eta) = (tw, tb, tf, trial);
                step *= 2.0;
                break;
            }
            step *= 0.5;
            halvings += 1;
            if halvings > 80 {
                // no descent along η: stationary to working precision
                let g = prob.gradient(&w, beta, eta);
                let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                if gnorm < 1e3 * opts.gradient_tolerance || f <= f64::EPSILON * prob.rows.len() as f64 {
                    break;
                }
                return Err(Error::Divergence(format!(
                    "step-size backoff exhausted at η = {eta}, gradient norm {gnorm:.3e}"
                )));
            }
        }
        if halvings > 80 {
            break;
        }
    }
    let g = prob.gradient(&w, beta, eta);
    let gradient_norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut warnings = Vec::new();
    if !(gradient_norm < opts.gradient_tolerance) {
        warnings.push(format!("gradient norm {gradient_norm:.3e} after {iterations} iterations"));
    }
    let scale = prob.rows.iter().map(|r| r.2.abs()).fold(0.0, f64::max);
    if beta.abs() <= 1e-9 * scale.max(f64::MIN_POSITIVE) {
        warnings.push("β ≈ 0: η is not identifiable (flat direction)".to_string());
    }
    for w in &warnings {
        log::warn!("extrapolate: {w}");
    }
    let limits = prob.lambdas.iter().zip(&w).map(|(&lambda, &w5_inf)| W5Limit { lambda, w5_inf }).collect();
    Ok(Extrapolation { limits, beta, eta, objective: f, gradient_norm, iterations, warnings })
}

/// 𝗐₅(x) = υx^{ξ₁} + χ on (0, t₁], continued multiplicatively as
/// 𝗐₅(t_{i-1})(x/t_{i-1})^{ξᵢ} on (t_{i-1}, tᵢ].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseW5 {
    pub upsilon: f64,
    pub chi: f64,
    /// t₁ < … < t_k = 1.
    pub knots: Vec<f64>,
    pub xi: Vec<f64>,
}

impl PiecewiseW5 {
    pub fn new(upsilon: f64, chi: f64, knots: Vec<f64>, xi: Vec<f64>) -> Result<Self> {
        if knots.is_empty() || knots.len() != xi.len() {
            return Err(Error::invalid("piecewise 𝗐₅ needs one exponent per interval"));
        }
        if !(knots[0] > 0.0) || knots.windows(2).any(|w| !(w[1] > w[0])) || *knots.last().unwrap() != 1.0 {
            return Err(Error::invalid(format!("knots {knots:?} must increase from above 0 to 1")));
        }
        if !upsilon.is_finite() || !chi.is_finite() || xi.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("piecewise 𝗐₅ constants must be finite"));
        }
        Ok(PiecewiseW5 { upsilon, chi, knots, xi })
    }

    /// The published fit: υ = 0.72, χ = 0.03 with knots 0.13, 0.20, 0.23, 1.
    pub fn reference() -> Self {
        PiecewiseW5 { upsilon: 0.72, chi: 0.03, knots: vec![0.13, 0.2, 0.23, 1.0], xi: vec![1.36, 1.35, 1.24, 0.84] }
    }

    fn at_knots(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.knots.len());
        out.push(self.upsilon * self.knots[0].powf(self.xi[0]) + self.chi);
        for i in 1..self.knots.len() {
            out.push(out[i - 1] * (self.knots[i] / self.knots[i - 1]).powf(self.xi[i]));
        }
        out
    }

    fn interval(&self, x: f64) -> usize {
        self.knots.iter().position(|&t| x <= t).unwrap_or(self.knots.len() - 1)
    }

    /// 𝗐₅(x) for 0 < x ≤ 1.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(x > 0.0 && x <= 1.0) {
            return Err(Error::domain("eval_w5", format!("x = {x} outside (0, 1]")));
        }
        let i = self.interval(x);
        if i == 0 {
            return Ok(self.upsilon * x.powf(self.xi[0]) + self.chi);
        }
        let w = self.at_knots();
        Ok(w[i - 1] * (x / self.knots[i - 1]).powf(self.xi[i]))
    }

    /// 𝗐₅ on [0, ∞): χ at 0 and zero beyond 1.
    pub fn eval_extended(&self, x: f64) -> Result<f64> {
        if x == 0.0 {
            Ok(self.chi)
        } else if x > 1.0 {
            Ok(0.0)
        } else {
            self.eval(x)
        }
    }

    /// 𝗐₅'(x) for 0 < x ≤ 1, one-sided from the left at knots.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        if !(x > 0.0 && x <= 1.0) {
            return Err(Error::domain("eval_w5", format!("x = {x} outside (0, 1]")));
        }
        let i = self.interval(x);
        if i == 0 {
            return Ok(self.upsilon * self.xi[0] * x.powf(self.xi[0] - 1.0));
        }
        Ok(self.xi[i] * self.eval(x)? / x)
    }
}

pub fn eval_w5(fit: &PiecewiseW5, x: f64) -> Result<f64> {
    fit.eval(x)
}

/// Points (x, 𝗐₅) with x = Λ/γ from extrapolated limits.
pub fn curve_from_limits(limits: &[W5Limit], gamma: f64) -> Vec<(f64, f64)> {
    limits.iter().map(|l| (l.lambda / gamma, l.w5_inf)).collect()
}

fn golden_min(mut lo: f64, mut hi: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-13 * (1.0 + lo.abs()) {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// (υ, χ, residual) for fixed ξ on the first interval.
fn first_interval_linear(pts: &[(f64, f64)], xi: f64) -> (f64, f64, f64) {
    // normal equations for w ≈ υ x^ξ + χ
    let (mut s11, mut s12, mut s22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, w) in pts {
        let t = x.powf(xi);
        s11 += t * t;
        s12 += t;
        s22 += 1.0;
        r1 += t * w;
        r2 += w;
    }
    let det = s11 * s22 - s12 * s12;
    let ups = (s22 * r1 - s12 * r2) / det;
    let chi = (s11 * r2 - s12 * r1) / det;
    let res = pts.iter().map(|&(x, w)| (ups * x.powf(xi) + chi - w).powi(2)).sum();
    (ups, chi, res)
}

/// Fits [`PiecewiseW5`] to a sampled curve for the given knots (ending at 1):
/// value-space least squares with a scan over ξ₁ on the first interval,
/// log-log least squares through the chained knot value on the others.
pub fn fit_piecewise(curve: &[(f64, f64)], knots: &[f64]) -> Result<PiecewiseW5> {
    if curve.iter().any(|&(x, w)| !(x > 0.0 && x <= 1.0) || !w.is_finite()) {
        return Err(Error::invalid("curve samples must lie in (0, 1] with finite values"));
    }
    PiecewiseW5::new(0.0, 0.0, knots.to_vec(), vec![1.0; knots.len()])?;
    let mut pts = curve.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let first: Vec<(f64, f64)> = pts.iter().copied().filter(|p| p.0 <= knots[0]).collect();
    if first.len() < 3 {
        return Err(Error::invalid(format!("interval (0, {}] has {} samples; need at least 3", knots[0], first.len())));
    }
    let (lo, hi) = (0.05, 6.0);
    let n = 120;
    let mut best = (lo, f64::INFINITY);
    for i in 0..=n {
        let xi = lo + (hi - lo) * i as f64 / n as f64;
        let r = first_interval_linear(&first, xi).2;
        if r < best.1 {
            best = (xi, r);
        }
    }
    let h = (hi - lo) / n as f64;
    let xi1 = golden_min((best.0 - h).max(lo), (best.0 + h).min(hi), |xi| first_interval_linear(&first, xi).2);
    let (upsilon, chi, _) = first_interval_linear(&first, xi1);
    let mut xi = vec![xi1];
    let mut w_prev = upsilon * knots[0].powf(xi1) + chi;
    if !(w_prev > 0.0) {
        return Err(Error::invalid(format!("fitted 𝗐₅({}) = {w_prev} is not positive; log-log fit impossible", knots[0])));
    }
    for i in 1..knots.len() {
        let (t0, t1) = (knots[i - 1], knots[i]);
        let seg: Vec<(f64, f64)> = pts.iter().copied().filter(|p| p.0 > t0 && p.0 <= t1).collect();
        if seg.is_empty() {
            return Err(Error::invalid(format!("interval ({t0}, {t1}] has no samples")));
        }
        if seg.iter().any(|p| !(p.1 > 0.0)) {
            return Err(Error::invalid(format!("non-positive 𝗐₅ on ({t0}, {t1}]; log-log fit impossible")));
        }
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for &(x, w) in &seg {
            let lx = (x / t0).ln();
            sxy += lx * (w / w_prev).ln();
            sxx += lx * lx;
        }
        let k = sxy / sxx;
        xi.push(k);
        w_prev *= (t1 / t0).powf(k);
    }
    PiecewiseW5::new(upsilon, chi, knots.to_vec(), xi)
}
