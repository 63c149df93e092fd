//! Closed-form bound and continuum solutions of the radial Dirac–Coulomb
//! equation
//!
//! ```text
//! -G' + (κ/x) G = (z - 1 + γ/x) F,    F' + (κ/x) F = (z + 1 + γ/x) G
//! ```
//!
//! with x = r·m, z = E/m and γ = Zα. Bound states are normalized to one,
//! continuum states to δ(p - p').

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{adaptive, Tolerance};
use crate::specfun::{hyp1f1, ln_abs_gamma, ln_gamma_real};

/// Physical constants and cut-offs of one spectral-density computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Nuclear charge Z.
    pub charge: u32,
    /// Fine-structure constant.
    pub alpha: f64,
    /// Radial cut-off K: channels 0 < |κ| ≤ K.
    pub k_max: u32,
    /// Principal-quantum-number cut-off M_Λ for bound states.
    pub m_lambda: u32,
    /// Infrared momentum cut-off Λ.
    pub lambda: f64,
    /// Ultraviolet momentum cut-off Λ₀.
    pub lambda0: f64,
}

impl PhysicalParams {
    pub fn gamma(&self) -> f64 {
        self.charge as f64 * self.alpha
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.gamma();
        if !(g > 0.0 && g < 1.0) {
            return Err(Error::invalid(format!("coupling γ = Zα = {g} must lie in (0, 1)")));
        }
        if !(self.lambda > 0.0 && self.lambda < self.lambda0 && self.lambda0.is_finite()) {
            return Err(Error::invalid(format!(
                "cut-offs must satisfy 0 < Λ < Λ₀ (got Λ = {}, Λ₀ = {})",
                self.lambda, self.lambda0
            )));
        }
        if self.k_max < 1 {
            return Err(Error::invalid("radial cut-off K must be at least 1"));
        }
        Ok(())
    }
}

fn check_coupling(gamma: f64, kappa: i32) -> Result<f64> {
    if kappa == 0 {
        return Err(Error::invalid("κ = 0 is not an angular channel"));
    }
    let k = kappa as f64;
    if !(gamma.abs() < k.abs()) || !gamma.is_finite() {
        return Err(Error::invalid(format!("|γ| = {gamma} must be below |κ| = {}", kappa.abs())));
    }
    Ok((k * k - gamma * gamma).sqrt())
}

/// Energy z of the bound state (κ, n).
pub fn bound_energy(gamma: f64, kappa: i32, n: u32) -> Result<f64> {
    Ok(BoundState::new(gamma, kappa, n)?.z)
}

/// A discrete eigenstate, (κ, n) ∈ (ℤ₊ × ℕ₊) ∪ (ℤ₋ × ℕ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundState {
    pub gamma: f64,
    pub kappa: i32,
    pub n: u32,
    pub z: f64,
    pub p: f64,
    pub s: f64,
}

impl BoundState {
    pub fn new(gamma: f64, kappa: i32, n: u32) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::invalid(format!("bound states need γ > 0 (got {gamma})")));
        }
        let s = check_coupling(gamma, kappa)?;
        if kappa > 0 && n == 0 {
            return Err(Error::invalid(format!("(κ = {kappa}, n = 0) is not admissible; κ > 0 needs n ≥ 1")));
        }
        let ns = n as f64 + s;
        let z = 1.0 / (1.0 + gamma * gamma / (ns * ns)).sqrt();
        // p = √(1 - z²) = γ / √((n+s)² + γ²), without the cancellation
        let p = gamma / (ns * ns + gamma * gamma).sqrt();
        Ok(BoundState { gamma, kappa, n, z, p, s })
    }

    /// Principal quantum number m = |κ| + n.
    pub fn principal(&self) -> u32 {
        self.kappa.unsigned_abs() + self.n
    }

    /// Amplitude evaluator with the normalization precomputed.
    pub fn evaluator(&self) -> Result<BoundEvaluator> {
        let BoundState { kappa, n, z, p, s, .. } = *self;
        let big_n = (n as f64 + s) / z;
        let c_minus = big_n - kappa as f64;
        let ln_u1 = -ln_gamma_real(2.0 * s + 1.0)?
            + 0.5
                * (ln_gamma_real(2.0 * s + n as f64 + 1.0)?
                    - (2.0 * big_n * c_minus).ln()
                    - ln_gamma_real(n as f64 + 1.0)?);
        Ok(BoundEvaluator {
            state: *self,
            c_minus,
            ln_norm: ln_u1 + 0.5 * p.ln(),
            f_pref: (1.0 + z).sqrt(),
            g_pref: -(1.0 - z).sqrt(),
        })
    }
}

/// Evaluates (F̃, G̃) of a bound state at single radii.
#[derive(Debug, Clone, Copy)]
pub struct BoundEvaluator {
    state: BoundState,
    c_minus: f64,
    ln_norm: f64,
    f_pref: f64,
    g_pref: f64,
}

impl BoundEvaluator {
    pub fn amplitudes(&self, x: f64) -> (f64, f64) {
        let BoundState { n, p, s, .. } = self.state;
        let t = 2.0 * p * x;
        if t == 0.0 {
            return (0.0, 0.0);
        }
        let b = 2.0 * s + 1.0;
        let m0 = kummer_polynomial(n, b, t);
        let m1 = if n == 0 { 0.0 } else { kummer_polynomial(n - 1, b, t) };
        let h_minus = self.c_minus * m0 - n as f64 * m1;
        let h_plus = self.c_minus * m0 + n as f64 * m1;
        let common = (s * t.ln() + self.ln_norm - p * x).exp();
        (self.f_pref * common * h_minus, self.g_pref * common * h_plus)
    }

    /// F̃² + G̃²
    pub fn density(&self, x: f64) -> f64 {
        let (f, g) = self.amplitudes(x);
        f * f + g * g
    }
}

/// M(-n, b, t), a polynomial of degree n.
fn kummer_polynomial(n: u32, b: f64, t: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..n {
        let k = k as f64;
        term *= (k - n as f64) * t / ((b + k) * (k + 1.0));
        sum += term;
    }
    sum
}

/// ∫₀^∞ (F̃² + G̃²) dx by adaptive quadrature.
pub fn bound_norm(state: &BoundState) -> Result<f64> {
    let ev = state.evaluator()?;
    let upper = (60.0 + 4.0 * state.n as f64) / state.p;
    adaptive(|x| ev.density(x), 0.0, upper, Tolerance { abs: 1e-14, rel: 1e-12, max_intervals: 4000 })
}

/// Sign of the continuum energy z = ±√(1 + p²).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    #[serde(rename = "+")]
    Positive,
    #[serde(rename = "-")]
    Negative,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Positive => 1.0,
            Branch::Negative => -1.0,
        }
    }
}

/// A scattering state of momentum p on either energy branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuumState {
    pub gamma: f64,
    pub kappa: i32,
    pub p: f64,
    pub branch: Branch,
    pub z: f64,
    pub y: f64,
    pub s: f64,
}

impl ContinuumState {
    pub fn new(gamma: f64, kappa: i32, p: f64, branch: Branch) -> Result<Self> {
        let s = check_coupling(gamma, kappa)?;
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::invalid(format!("continuum momentum must be positive (got {p})")));
        }
        let z = branch.sign() * (1.0 + p * p).sqrt();
        let y = gamma * z / p;
        Ok(ContinuumState { gamma, kappa, p, branch, z, y, s })
    }

    pub fn evaluator(&self) -> Result<ContinuumEvaluator> {
        let ContinuumState { kappa, z, y, s, .. } = *self;
        // u₂ = e^{πy/2} |Γ(s+iy)| / (√π Γ(1+2s)), assembled in log space
        let ln_u2 = PI * y / 2.0 + ln_abs_gamma(Complex64::new(s, y))?
            - 0.5 * PI.ln()
            - ln_gamma_real(1.0 + 2.0 * s)?;
        let phase = ((Complex64::new(-kappa as f64, y / z)) * Complex64::new(s, y)).sqrt();
        Ok(ContinuumEvaluator {
            state: *self,
            a: Complex64::new(s + 1.0, y),
            b: Complex64::new(2.0 * s + 1.0, 0.0),
            phase,
            ln_u2,
            f_pref: ((z + 1.0) / z).sqrt(),
            g_pref: -self.branch.sign() * ((z - 1.0) / z).sqrt(),
        })
    }
}

/// Evaluates (F±, G±) of a continuum state at single radii.
#[derive(Debug, Clone, Copy)]
pub struct ContinuumEvaluator {
    state: ContinuumState,
    a: Complex64,
    b: Complex64,
    phase: Complex64,
    ln_u2: f64,
    f_pref: f64,
    g_pref: f64,
}

impl ContinuumEvaluator {
    pub fn amplitudes(&self, x: f64) -> Result<(f64, f64)> {
        let p = self.state.p;
        let t = 2.0 * p * x;
        if t == 0.0 {
            return Ok((0.0, 0.0));
        }
        let xi = Complex64::new(0.0, t);
        // H(ξ) = e^{-ξ/2} √((-κ + iy/z)(s + iy)) M(s+1+iy, 2s+1, ξ)
        let h = Complex64::new(0.0, -p * x).exp() * self.phase * hyp1f1(self.a, self.b, xi)?;
        let common = (self.state.s * t.ln() + self.ln_u2).exp();
        Ok((self.f_pref * common * h.re, self.g_pref * common * h.im))
    }

    /// F² + G²
    pub fn density(&self, x: f64) -> Result<f64> {
        let (f, g) = self.amplitudes(x)?;
        Ok(f * f + g * g)
    }
}

/// Which eigenfunction a [`RadialSolution`] samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SolutionState {
    Bound(BoundState),
    Continuum(ContinuumState),
}

impl SolutionState {
    pub fn z(&self) -> f64 {
        match self {
            SolutionState::Bound(b) => b.z,
            SolutionState::Continuum(c) => c.z,
        }
    }

    pub fn kappa(&self) -> i32 {
        match self {
            SolutionState::Bound(b) => b.kappa,
            SolutionState::Continuum(c) => c.kappa,
        }
    }

    pub fn gamma(&self) -> f64 {
        match self {
            SolutionState::Bound(b) => b.gamma,
            SolutionState::Continuum(c) => c.gamma,
        }
    }
}

/// (F, G) sampled on a radial grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialSolution {
    pub grid: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub state: SolutionState,
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid("radial grid is empty"));
    }
    if !(grid[0] > 0.0) {
        return Err(Error::invalid("radial grid must be strictly positive"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("radial grid must be strictly increasing"));
    }
    Ok(())
}

pub fn bound_solution(state: &BoundState, grid: &[f64]) -> Result<RadialSolution> {
    check_grid(grid)?;
    let ev = state.evaluator()?;
    let (f, g) = grid.iter().map(|&x| ev.amplitudes(x)).unzip();
    Ok(RadialSolution { grid: grid.to_vec(), f, g, state: SolutionState::Bound(*state) })
}

pub fn continuum_solution(state: &ContinuumState, grid: &[f64]) -> Result<RadialSolution> {
    check_grid(grid)?;
    let ev = state.evaluator()?;
    let mut f = Vec::with_capacity(grid.len());
    let mut g = Vec::with_capacity(grid.len());
    for &x in grid {
        let (fx, gx) = ev.amplitudes(x)?;
        f.push(fx);
        g.push(gx);
    }
    Ok(RadialSolution { grid: grid.to_vec(), f, g, state: SolutionState::Continuum(*state) })
}

/// Geometric radial grid x_min · qᵏ up to x_max.
pub fn geometric_grid(x_min: f64, x_max: f64, ratio: f64) -> Result<Vec<f64>> {
    if !(x_min > 0.0 && x_max > x_min && ratio > 1.0) {
        return Err(Error::invalid(format!(
            "geometric grid needs 0 < x_min < x_max and ratio > 1 (got {x_min}, {x_max}, {ratio})"
        )));
    }
    let steps = ((x_max / x_min).ln() / ratio.ln()).ceil() as usize;
    let q = (x_max / x_min).powf(1.0 / steps as f64);
    Ok((0..=steps).map(|k| x_min * q.powi(k as i32)).collect())
}

/// Default grid resolving both the x^s behaviour at the origin and the
/// exponential or oscillatory tail of a state with momentum p.
pub fn default_grid(p: f64, b_grid: f64) -> Result<Vec<f64>> {
    geometric_grid(1e-4, b_grid.max(40.0 / p), 1.0 + 1e-3)
}

/// Finite-difference stencil for [`ode_residual_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stencil {
    ThreePoint,
    FivePoint,
}

/// Fornberg weights for the first derivative at `x0` over `nodes`.
fn derivative_weights(x0: f64, nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    // c[j][k]: weight of node j for the k-th derivative (k ≤ 1)
    let mut c = vec![[0.0f64; 2]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    for i in 1..n {
        let mn = i.min(1);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|w| w[1]).collect()
}

/// Maximum over interior grid points of
/// |-G' + (κ/x)G - (z-1+γ/x)F| + |F' + (κ/x)F - (z+1+γ/x)G|
/// with derivatives from centered five-point differences.
pub fn ode_residual(sol: &RadialSolution, z: f64, gamma: f64, kappa: i32) -> Result<f64> {
    ode_residual_with(sol, z, gamma, kappa, Stencil::FivePoint)
}

pub fn ode_residual_with(
    sol: &RadialSolution,
    z: f64,
    gamma: f64,
    kappa: i32,
    stencil: Stencil,
) -> Result<f64> {
    let half = match stencil {
        Stencil::ThreePoint => 1,
        Stencil::FivePoint => 2,
    };
    let n = sol.grid.len();
    if n < 2 * half + 1 || sol.f.len() != n || sol.g.len() != n {
        return Err(Error::GridTooCoarse(format!(
            "need at least {} consistent samples for the residual, have {n}",
            2 * half + 1
        )));
    }
    let k = kappa as f64;
    let mut worst = 0.0f64;
    for i in half..n - half {
        let nodes = &sol.grid[i - half..=i + half];
        let w = derivative_weights(sol.grid[i], nodes);
        let df: f64 = w.iter().zip(&sol.f[i - half..=i + half]).map(|(a, b)| a * b).sum();
        let dg: f64 = w.iter().zip(&sol.g[i - half..=i + half]).map(|(a, b)| a * b).sum();
        let x = sol.grid[i];
        let (f, g) = (sol.f[i], sol.g[i]);
        let r1 = -dg + k / x * g - (z - 1.0 + gamma / x) * f;
        let r2 = df + k / x * f - (z + 1.0 + gamma / x) * g;
        worst = worst.max(r1.abs() + r2.abs());
    }
    Ok(worst)
}

/// Residual on a grid and on the grid with every other interval removed.
#[derive(Debug, Clone, Copy)]
pub struct ResidualCheck {
    pub residual: f64,
    pub coarse_residual: f64,
}

impl ResidualCheck {
    /// True when the residual is dominated by the finite differences rather
    /// than by the solution: halving the resolution moves it by more than the
    /// stencil's convergence order predicts for a converged value.
    pub fn discretization_limited(&self, threshold: f64) -> bool {
        self.residual > threshold && self.coarse_residual > 4.0 * self.residual
    }
}

/// Residual together with a grid-refinement comparison; returns
/// `GridTooCoarse` when the residual is above `threshold` and still
/// shrinking with resolution.
pub fn ode_residual_checked(sol: &RadialSolution, threshold: f64) -> Result<ResidualCheck> {
    let (z, gamma, kappa) = (sol.state.z(), sol.state.gamma(), sol.state.kappa());
    let residual = ode_residual(sol, z, gamma, kappa)?;
    let coarse = RadialSolution {
        grid: sol.grid.iter().step_by(2).copied().collect(),
        f: sol.f.iter().step_by(2).copied().collect(),
        g: sol.g.iter().step_by(2).copied().collect(),
        state: sol.state,
    };
    let coarse_residual = ode_residual(&coarse, z, gamma, kappa)?;
    let check = ResidualCheck { residual, coarse_residual };
    if check.discretization_limited(threshold) {
        return Err(Error::GridTooCoarse(format!(
            "residual {residual:.3e} still falls with refinement (coarse {coarse_residual:.3e})"
        )));
    }
    Ok(check)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ALPHA;

    const GAMMA_U: f64 = 92.0 * ALPHA;

    #[test]
    fn ground_state_energy_closed_form() {
        for g in [0.1, 0.5, GAMMA_U, 0.95] {
            let z = bound_energy(g, -1, 0).unwrap();
            assert!((z - (1.0 - g * g).sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn uranium_ground_state() {
        let st = BoundState::new(0.6712, -1, 0).unwrap();
        assert!((st.z - 0.74126).abs() < 1e-4);
        assert!((st.p - 0.6712).abs() < 1e-12);
    }

    #[test]
    fn free_limit() {
        for (k, n) in [(-1, 0), (2, 3), (-3, 1)] {
            let z = bound_energy(1e-8, k, n).unwrap();
            assert!((z - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn inadmissible_pairs() {
        assert!(BoundState::new(0.5, 1, 0).is_err());
        assert!(BoundState::new(0.5, 0, 1).is_err());
        assert!(BoundState::new(1.2, -1, 0).is_err());
        assert!(BoundState::new(0.5, -1, 0).is_ok());
    }

    #[test]
    fn grid_validation() {
        let st = BoundState::new(0.5, -1, 0).unwrap();
        assert!(bound_solution(&st, &[0.0, 1.0]).is_err());
        assert!(bound_solution(&st, &[1.0, 1.0]).is_err());
        assert!(bound_solution(&st, &[]).is_err());
    }

    #[test]
    fn n0_state_is_pure_power_times_exponential() {
        let st = BoundState::new(GAMMA_U, -1, 0).unwrap();
        let ev = st.evaluator().unwrap();
        let (f1, g1) = ev.amplitudes(0.7);
        let (f2, g2) = ev.amplitudes(1.9);
        let shape = |x: f64| (2.0 * st.p * x).powf(st.s) * (-st.p * x).exp();
        assert!((f1 / f2 - shape(0.7) / shape(1.9)).abs() < 1e-12);
        assert!((g1 / g2 - shape(0.7) / shape(1.9)).abs() < 1e-12);
    }

    #[test]
    fn fornberg_reproduces_classic_weights() {
        let w = derivative_weights(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0]);
        let want = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(want) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn continuum_small_x_ratio_is_finite() {
        let st = ContinuumState::new(GAMMA_U, -1, 1.0, Branch::Positive).unwrap();
        let ev = st.evaluator().unwrap();
        let ratio = |x: f64| {
            let (f, g) = ev.amplitudes(x).unwrap();
            let scale = (2.0 * st.p * x).powf(st.s);
            (f / scale, g / scale)
        };
        let (f1, g1) = ratio(1e-6);
        let (f2, g2) = ratio(1e-8);
        assert!(f1.is_finite() && g1.is_finite());
        assert!((f1 - f2).abs() < 1e-4 * f1.abs());
        assert!((g1 - g2).abs() < 1e-4 * g1.abs());
    }
}
