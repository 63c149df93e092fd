//! Decomposition of a sampled density into
//!
//! ```text
//! 𝗒(x) = c₁x + 𝗎(x) + c₂δₓ + 𝗐₁/x + s(x) + 𝗐₅/x⁵ + Oₓ
//! ```
//!
//! by linear least squares on the imaginary axis of the restricted Laplace
//! transform, with the oscillation frequencies added greedily from the
//! highest spike of the transformed remainder.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::basis::{cos_hat, delta_hat, e4_at_zero, e_hat, linear_hat, sin_hat};
use super::transform::{integrate_samples, laplace_transform, laplace_transform_checked, transform_weights};
use crate::density::SampledDensity;
use crate::error::{Error, Result};
use crate::uehling::{UehlingDensity, UehlingForm};

/// Tunables of [`decompose`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecomposeOptions {
    /// Bound on the remainder norm.
    pub tolerance: f64,
    /// Most frequencies added before giving up.
    pub max_frequencies: usize,
    /// Frequencies tried after the first decomposition meeting the bound,
    /// looking for smaller oscillations.
    pub extra_frequencies: usize,
    /// Spacing of the imaginary-axis samples; default π/(4(b-a)).
    pub q_spacing: Option<f64>,
    /// Largest sampled q; default half the Nyquist frequency of the grid.
    pub q_max: Option<f64>,
    pub uehling: UehlingTerm,
    pub uehling_form: UehlingForm,
    /// Spike height over the local median below which no frequency is found.
    pub spike_prominence: f64,
    /// Relative change of the data transform under grid halving that is
    /// still accepted.
    pub grid_tolerance: f64,
    pub basis: BasisTransform,
    /// Most coordinate sweeps refining all frequencies jointly after each
    /// addition; 0 keeps the greedy estimates.
    pub refine_sweeps: usize,
}

/// How the Uehling density enters the fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UehlingTerm {
    /// Coefficient ±1, the sign whose fit ends with the smaller Laplace residual.
    #[default]
    Fixed,
    /// Fitted coefficient; not identifiable on short intervals.
    Free,
    Off,
}

/// How the basis columns of the least-squares problem are transformed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisTransform {
    /// Basis functions sampled on the data grid and transformed with the
    /// same quadrature as the data, so interpolation errors cancel.
    #[default]
    Sampled,
    /// Exact transforms on [a, b].
    ClosedForm,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        DecomposeOptions {
            tolerance: 0.1,
            max_frequencies: 12,
            extra_frequencies: 2,
            q_spacing: None,
            q_max: None,
            uehling: UehlingTerm::Fixed,
            uehling_form: UehlingForm::Standard,
            spike_prominence: 3.0,
            grid_tolerance: 1e-3,
            basis: BasisTransform::Sampled,
            refine_sweeps: 50,
        }
    }
}

/// One pair ±ω of the oscillating part; c₋ω is the conjugate of `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Oscillation {
    pub omega: f64,
    pub c: Complex64,
}

impl Oscillation {
    /// c e^{iωx} + c̄ e^{-iωx}
    pub fn eval(&self, x: f64) -> f64 {
        2.0 * (self.c * Complex64::new(0.0, self.omega * x).exp()).re
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub frequencies: usize,
    pub remainder_norm: f64,
    pub oscillation_norm: f64,
    pub laplace_residual: f64,
}

/// Result of [`decompose`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub a: f64,
    pub b: f64,
    pub c1: f64,
    /// Coefficient of 𝗎; ±1 unless fitted freely.
    pub uehling_scale: f64,
    pub uehling_form: UehlingForm,
    pub c2: f64,
    pub w1: f64,
    pub w5: f64,
    pub oscillations: Vec<Oscillation>,
    pub remainder_norm: f64,
    pub oscillation_norm: f64,
    /// Sum of squared Laplace-domain residuals of the least-squares fit.
    pub laplace_residual: f64,
    pub grid: Vec<f64>,
    pub remainder: Vec<f64>,
    pub history: Vec<IterationRecord>,
}

impl Decomposition {
    pub fn oscillation(&self, x: f64) -> f64 {
        self.oscillations.iter().fold(0.0, |s, o| s + o.eval(x))
    }

    /// c₁x + 𝗎 + 𝗐₁/x + s + 𝗐₅/x⁵; the δ term has no support on [a, b].
    pub fn model(&self, x: f64, gamma: f64) -> Result<f64> {
        let u = if self.uehling_scale != 0.0 {
            self.uehling_scale * crate::uehling::u_position_with(x, gamma, self.uehling_form)?
        } else {
            0.0
        };
        Ok(self.c1 * x + u + self.w1 / x + self.oscillation(x) + self.w5 / x.powi(5))
    }
}

/// Transformed remainder sampled at p = iq.
#[derive(Debug, Clone, PartialEq)]
pub struct ImaginaryAxisSamples {
    pub q: Vec<f64>,
    pub values: Vec<Complex64>,
    pub a: f64,
    pub b: f64,
}

/// Frequency estimate of [`find_frequency`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyEstimate {
    pub omega: f64,
    /// Unit coefficients of sin and cos, c₁² + c₂² = 1.
    pub c_sin: f64,
    pub c_cos: f64,
    /// Spike height over the local median.
    pub ratio: f64,
}

fn real_inner(u: &[Complex64], v: &[Complex64]) -> f64 {
    u.iter().zip(v).map(|(x, y)| (x.conj() * y).re).sum()
}

/// Energy of `values` captured by span{ŝin_ω, ĉos_ω} on the samples, and the
/// unit coefficient pair realizing it.
fn captured(q: &[f64], values: &[Complex64], omega: f64, a: f64, b: f64) -> (f64, f64, f64) {
    let s: Vec<Complex64> = q.iter().map(|&q| sin_hat(omega, Complex64::new(0.0, q), a, b)).collect();
    let c: Vec<Complex64> = q.iter().map(|&q| cos_hat(omega, Complex64::new(0.0, q), a, b)).collect();
    let (gss, gsc, gcc) = (real_inner(&s, &s), real_inner(&s, &c), real_inner(&c, &c));
    let (hs, hc) = (real_inner(&s, values), real_inner(&c, values));
    let det = gss * gcc - gsc * gsc;
    if !(det > 1e-14 * gss * gcc) {
        // sin degenerates near ω = 0; fall back to the cosine alone
        let e = if gcc > 0.0 { hc * hc / gcc } else { 0.0 };
        return (e, 0.0, hc.signum());
    }
    let cs = (gcc * hs - gsc * hc) / det;
    let cc = (gss * hc - gsc * hs) / det;
    let norm = cs.hypot(cc);
    let e = hs * cs + hc * cc;
    if norm == 0.0 {
        return (0.0, 0.0, 1.0);
    }
    (e, cs / norm, cc / norm)
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn lobe(a: f64, b: f64) -> f64 {
    2.0 * std::f64::consts::PI / (b - a)
}

/// Spike height of q|Ô(iq)| over its median for q ≥ `q_min`. A remainder
/// without oscillations has q|Ô| → |O(a)e^{-iqa} - O(b)e^{-iqb}|, whose
/// maximum over median stays below √2.
fn prominence(samples: &ImaginaryAxisSamples, q_min: f64, peak: f64) -> f64 {
    let weighted: Vec<f64> = samples
        .q
        .iter()
        .zip(&samples.values)
        .filter(|(q, _)| **q >= q_min)
        .map(|(q, v)| q * v.norm())
        .collect();
    let m = median(weighted);
    if m > 0.0 {
        peak / m
    } else if peak > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Neighbourhood B of the highest spike of q|Ô(iq)| for q ≥ `q_min`,
/// skipping spikes within half a lobe of frequencies already in use.
pub fn highest_spike(samples: &ImaginaryAxisSamples, q_min: f64, exclude: &[f64], min_ratio: f64) -> Result<(f64, f64)> {
    let l = lobe(samples.a, samples.b);
    let mags: Vec<f64> = samples.q.iter().zip(&samples.values).map(|(q, v)| q * v.norm()).collect();
    let mut best: Option<(usize, f64)> = None;
    for j in 1..mags.len().saturating_sub(1) {
        let q = samples.q[j];
        if q < q_min || exclude.iter().any(|w| (w - q).abs() < 0.5 * l) {
            continue;
        }
        if mags[j] >= mags[j - 1] && mags[j] >= mags[j + 1] && best.is_none_or(|(_, m)| mags[j] > m) {
            best = Some((j, mags[j]));
        }
    }
    let Some((j, peak)) = best else {
        return Err(Error::NoSpike { ratio: 0.0 });
    };
    let ratio = prominence(samples, q_min, peak);
    if ratio < min_ratio {
        return Err(Error::NoSpike { ratio });
    }
    Ok((samples.q[j] - l, samples.q[j] + l))
}

/// ω ∈ B maximizing the projection of Ô|_B onto (c₁ŝin + c₂ĉos)_B.
pub fn find_frequency(samples: &ImaginaryAxisSamples, band: (f64, f64), min_ratio: f64) -> Result<FrequencyEstimate> {
    let (lo, hi) = band;
    if !(hi > lo) {
        return Err(Error::invalid(format!("frequency band [{lo}, {hi}] is empty")));
    }
    let (a, b) = (samples.a, samples.b);
    let idx: Vec<usize> = (0..samples.q.len()).filter(|&j| samples.q[j] >= lo && samples.q[j] <= hi).collect();
    if idx.len() < 3 {
        return Err(Error::GridTooCoarse(format!("band [{lo:.4}, {hi:.4}] holds fewer than three samples")));
    }
    let mags: Vec<f64> = idx.iter().map(|&j| samples.q[j] * samples.values[j].norm()).collect();
    let (k_peak, &peak) = mags.iter().enumerate().max_by(|x, y| x.1.total_cmp(y.1)).unwrap();
    let ratio = prominence(samples, lobe(a, b), peak);
    if k_peak == 0 || k_peak + 1 == mags.len() || ratio < min_ratio {
        return Err(Error::NoSpike { ratio });
    }
    // the projection uses the whole band; its energy is smooth in ω
    let wide_lo = lo - 0.5 * lobe(a, b);
    let wide_hi = hi + 0.5 * lobe(a, b);
    let sel: Vec<usize> = (0..samples.q.len())
        .filter(|&j| samples.q[j] >= wide_lo && samples.q[j] <= wide_hi)
        .collect();
    let q: Vec<f64> = sel.iter().map(|&j| samples.q[j]).collect();
    let v: Vec<Complex64> = sel.iter().map(|&j| samples.values[j]).collect();
    let energy = |w: f64| captured(&q, &v, w, a, b).0;

    let steps = 256;
    let h = (hi - lo) / steps as f64;
    let mut best = (lo, f64::NEG_INFINITY);
    for k in 0..=steps {
        let w = lo + h * k as f64;
        let e = energy(w);
        if e > best.1 {
            best = (w, e);
        }
    }
    // golden-section refinement inside the bracketing scan cell
    let (mut x0, mut x3) = ((best.0 - h).max(lo), (best.0 + h).min(hi));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = x3 - g * (x3 - x0);
    let mut x2 = x0 + g * (x3 - x0);
    let (mut e1, mut e2) = (energy(x1), energy(x2));
    for _ in 0..60 {
        if e1 > e2 {
            x3 = x2;
            x2 = x1;
            e2 = e1;
            x1 = x3 - g * (x3 - x0);
            e1 = energy(x1);
        } else {
            x0 = x1;
            x1 = x2;
            e1 = e2;
            x2 = x0 + g * (x3 - x0);
            e2 = energy(x2);
        }
    }
    let omega = if e1.max(e2) >= best.1 { 0.5 * (x0 + x3) } else { best.0 };
    let (_, c_sin, c_cos) = captured(&q, &v, omega, a, b);
    Ok(FrequencyEstimate { omega, c_sin, c_cos, ratio })
}

/// (‖O‖₂, ‖ŝ‖₂̂) of a remainder sampled on `grid` and a set of oscillations.
pub fn norms(grid: &[f64], remainder: &[f64], oscillations: &[Oscillation], a: f64, b: f64) -> Result<(f64, f64)> {
    let e4 = e4_at_zero(a, b);
    let sq: Vec<f64> = remainder.iter().map(|o| o * o).collect();
    let l2 = integrate_samples(grid, &sq)?.max(0.0).sqrt() / ((b - a) * e4);
    let zero = Complex64::new(0.0, 0.0);
    let mut acc = 0.0;
    for o in oscillations {
        // c_{-ω} ŝ_{-ω}(0) + c_ω ŝ_ω(0)
        let v = o.c.conj() * super::basis::s_hat(-o.omega, zero, a, b) + o.c * super::basis::s_hat(o.omega, zero, a, b);
        acc += v.norm_sqr();
    }
    Ok((l2, acc.sqrt() / e4))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Column {
    Linear,
    Uehling,
    Delta,
    Inverse1,
    Inverse5,
    Cos(f64),
    Sin(f64),
}

struct FitContext<'a> {
    f: &'a SampledDensity,
    opts: DecomposeOptions,
    q: Vec<f64>,
    /// Transform of the data minus the fixed Uehling term.
    data: Vec<Complex64>,
    values: Vec<f64>,
    uehling_sign: f64,
    /// Raw data transform and samples, and 𝗎 on both, for a fixed Uehling term.
    uehling_shift: Option<UehlingShift>,
    fixed: Vec<(Column, Vec<Complex64>)>,
    fixed_x: Vec<Vec<f64>>,
    /// Rows 2j and 2j+1 map samples to the real and imaginary parts of the
    /// transform at iq_j (sampled basis only).
    weights: Option<DMatrix<f64>>,
}

struct UehlingShift {
    data: Vec<Complex64>,
    values: Vec<f64>,
    ux: Vec<f64>,
    uh: Vec<Complex64>,
}

struct Tone {
    omega: f64,
    cos: Vec<Complex64>,
    sin: Vec<Complex64>,
    cos_x: Vec<f64>,
    sin_x: Vec<f64>,
}

struct Fit {
    decomposition: Decomposition,
    laplace_remainder: Vec<Complex64>,
}

impl<'a> FitContext<'a> {
    fn new(f: &'a SampledDensity, gamma: f64, opts: DecomposeOptions) -> Result<Self> {
        let (a, b) = (f.grid[0], f.grid[f.grid.len() - 1]);
        if !(a > 0.0 && b > a) {
            return Err(Error::invalid("decomposition needs a positive, non-empty interval"));
        }
        let h_max = f.grid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        let dq = opts.q_spacing.unwrap_or(std::f64::consts::PI / (4.0 * (b - a)));
        let q_max = opts.q_max.unwrap_or(std::f64::consts::PI / (2.0 * h_max));
        if !(dq > 0.0 && q_max > dq) {
            return Err(Error::invalid(format!("imaginary-axis grid spacing {dq} / extent {q_max} is unusable")));
        }
        let n_q = (q_max / dq).floor() as usize + 1;
        let q: Vec<f64> = (0..n_q).map(|j| j as f64 * dq).collect();

        let scale = f.values.iter().map(|v| v.abs()).fold(0.0, f64::max) * (b - a);
        for &qc in [0.0, q[n_q - 1]].iter() {
            laplace_transform_checked(f, Complex64::new(0.0, qc), opts.grid_tolerance, scale)?;
        }
        let data: Vec<Complex64> =
            q.iter().map(|&q| laplace_transform(f, Complex64::new(0.0, q))).collect::<Result<_>>()?;

        let weights = match opts.basis {
            BasisTransform::Sampled => {
                let mut w = DMatrix::<f64>::zeros(2 * q.len(), f.grid.len());
                for (j, &qj) in q.iter().enumerate() {
                    let row = transform_weights(&f.grid, Complex64::new(0.0, qj))?;
                    for (i, v) in row.into_iter().enumerate() {
                        w[(2 * j, i)] = v.re;
                        w[(2 * j + 1, i)] = v.im;
                    }
                }
                Some(w)
            }
            BasisTransform::ClosedForm => None,
        };
        let values = f.values.clone();
        let mut ctx =
            FitContext { f, opts, q, data, values, uehling_sign: 0.0, uehling_shift: None, fixed: Vec::new(), fixed_x: Vec::new(), weights };
        let grid = &f.grid;
        let lin = grid.clone();
        ctx.push_fixed(Column::Linear, lin, |p| Ok(linear_hat(p, a, b)))?;
        let uehling = || -> Result<(UehlingDensity, Vec<f64>)> {
            let u = UehlingDensity::new(gamma, a, b)?.with_form(opts.uehling_form);
            let ux = grid.iter().map(|&x| u.position(x)).collect::<Result<_>>()?;
            Ok((u, ux))
        };
        let fixed_uehling = match opts.uehling {
            UehlingTerm::Free => {
                let (u, ux) = uehling()?;
                ctx.push_fixed(Column::Uehling, ux, |p| u.laplace(p))?;
                None
            }
            UehlingTerm::Fixed => {
                let (u, ux) = uehling()?;
                let uh = ctx.column(&ux, |p| u.laplace(p))?;
                Some((ux, uh))
            }
            UehlingTerm::Off => None,
        };
        // δ lives at the origin, outside [a, b]: no samples, transform 1
        ctx.fixed.push((Column::Delta, vec![delta_hat(); ctx.q.len()]));
        ctx.fixed_x.push(vec![0.0; grid.len()]);
        let inv1 = grid.iter().map(|x| 1.0 / x).collect();
        ctx.push_fixed(Column::Inverse1, inv1, |p| e_hat(0, p, a, b))?;
        let inv5 = grid.iter().map(|x| x.powi(-5)).collect();
        ctx.push_fixed(Column::Inverse5, inv5, |p| e_hat(4, p, a, b))?;
        if let Some((ux, uh)) = fixed_uehling {
            ctx.uehling_shift = Some(UehlingShift { data: ctx.data.clone(), values: ctx.values.clone(), ux, uh });
        }
        Ok(ctx)
    }

    /// Uehling coefficients to try: ±1 for a fixed term, else the current one.
    fn signs(&self) -> Vec<f64> {
        match self.uehling_shift {
            Some(_) => vec![1.0, -1.0],
            None => vec![self.uehling_sign],
        }
    }

    fn set_sign(&mut self, sign: f64) {
        if let Some(s) = &self.uehling_shift {
            self.data = s.data.iter().zip(&s.uh).map(|(d, u)| d - sign * u).collect();
            self.values = s.values.iter().zip(&s.ux).map(|(v, u)| v - sign * u).collect();
            self.uehling_sign = sign;
        }
    }

    fn column(&self, phi: &[f64], closed: impl Fn(Complex64) -> Result<Complex64>) -> Result<Vec<Complex64>> {
        match self.sampled(&[phi]) {
            Some(mut cols) => Ok(cols.remove(0)),
            None => self.q.iter().map(|&q| closed(Complex64::new(0.0, q))).collect(),
        }
    }

    /// Sampled-basis transforms of several columns in one product.
    fn sampled(&self, phis: &[&[f64]]) -> Option<Vec<Vec<Complex64>>> {
        let w = self.weights.as_ref()?;
        let n = self.f.grid.len();
        let phi = DMatrix::from_fn(n, phis.len(), |i, k| phis[k][i]);
        let t = w * phi;
        let cols = (0..phis.len())
            .map(|k| (0..self.q.len()).map(|j| Complex64::new(t[(2 * j, k)], t[(2 * j + 1, k)])).collect())
            .collect();
        Some(cols)
    }

    fn push_fixed(
        &mut self,
        kind: Column,
        phi: Vec<f64>,
        closed: impl Fn(Complex64) -> Result<Complex64>,
    ) -> Result<()> {
        let col = self.column(&phi, closed)?;
        self.fixed.push((kind, col));
        self.fixed_x.push(phi);
        Ok(())
    }

    fn samples(&self, values: Vec<Complex64>) -> ImaginaryAxisSamples {
        ImaginaryAxisSamples { q: self.q.clone(), values, a: self.f.grid[0], b: *self.f.grid.last().unwrap() }
    }

    fn tone(&self, w: f64) -> Result<Tone> {
        let (a, b) = (self.f.grid[0], *self.f.grid.last().unwrap());
        let cos_x: Vec<f64> = self.f.grid.iter().map(|x| (w * x).cos()).collect();
        let sin_x: Vec<f64> = self.f.grid.iter().map(|x| (w * x).sin()).collect();
        let (cos, sin) = match self.sampled(&[&cos_x, &sin_x]) {
            Some(mut cols) => {
                let sin = cols.pop().unwrap();
                (cols.pop().unwrap(), sin)
            }
            None => (
                self.column(&cos_x, |p| Ok(cos_hat(w, p, a, b)))?,
                self.column(&sin_x, |p| Ok(sin_hat(w, p, a, b)))?,
            ),
        };
        Ok(Tone { omega: w, cos, sin, cos_x, sin_x })
    }

    fn fit(&self, omegas: &[f64]) -> Result<Fit> {
        let tones = omegas.iter().map(|&w| self.tone(w)).collect::<Result<Vec<_>>>()?;
        self.fit_tones(&tones)
    }

    fn design(&self, tones: &[Tone]) -> Result<(Vec<Column>, DMatrix<f64>)> {
        let mut kinds: Vec<Column> = self.fixed.iter().map(|(k, _)| *k).collect();
        let mut cols: Vec<&[Complex64]> = self.fixed.iter().map(|(_, c)| c.as_slice()).collect();
        for t in tones {
            kinds.push(Column::Cos(t.omega));
            cols.push(&t.cos);
            kinds.push(Column::Sin(t.omega));
            cols.push(&t.sin);
        }
        let n_rows = 2 * self.q.len();
        if n_rows <= cols.len() {
            return Err(Error::GridTooCoarse(format!("{} Laplace samples for {} unknowns", self.q.len(), cols.len())));
        }
        let mut design = DMatrix::<f64>::zeros(n_rows, cols.len());
        for (k, col) in cols.iter().enumerate() {
            for (j, v) in col.iter().enumerate() {
                design[(2 * j, k)] = v.re;
                design[(2 * j + 1, k)] = v.im;
            }
        }
        Ok((kinds, design))
    }

    fn rhs(&self) -> DVector<f64> {
        DVector::from_iterator(2 * self.q.len(), self.data.iter().flat_map(|v| [v.re, v.im]))
    }

    /// Sum of squared Laplace-domain residuals only.
    fn residual(&self, tones: &[Tone]) -> Result<f64> {
        let (_, design) = self.design(tones)?;
        let rhs = self.rhs();
        let coef = solve_scaled_normal(&design, &rhs)?;
        Ok((rhs - design * coef).norm_squared())
    }

    fn fit_tones(&self, tones: &[Tone]) -> Result<Fit> {
        let (a, b) = (self.f.grid[0], *self.f.grid.last().unwrap());
        let mut cols: Vec<(Column, Vec<Complex64>)> = self.fixed.clone();
        let mut cols_x: Vec<Vec<f64>> = self.fixed_x.clone();
        for t in tones {
            cols.push((Column::Cos(t.omega), t.cos.clone()));
            cols.push((Column::Sin(t.omega), t.sin.clone()));
            cols_x.push(t.cos_x.clone());
            cols_x.push(t.sin_x.clone());
        }
        let (_, design) = self.design(tones)?;
        let rhs = self.rhs();
        let coef = solve_scaled_normal(&design, &rhs)?;

        let mut laplace_remainder = self.data.clone();
        for (k, (_, col)) in cols.iter().enumerate() {
            for (r, v) in laplace_remainder.iter_mut().zip(col) {
                *r -= v * coef[k];
            }
        }
        let laplace_residual = laplace_remainder.iter().map(|r| r.norm_sqr()).sum();

        let mut remainder = self.values.clone();
        for (k, col) in cols_x.iter().enumerate() {
            for (r, v) in remainder.iter_mut().zip(col) {
                *r -= coef[k] * v;
            }
        }

        let mut d = Decomposition {
            a,
            b,
            c1: 0.0,
            uehling_scale: self.uehling_sign,
            uehling_form: self.opts.uehling_form,
            c2: 0.0,
            w1: 0.0,
            w5: 0.0,
            oscillations: Vec::new(),
            remainder_norm: 0.0,
            oscillation_norm: 0.0,
            laplace_residual,
            grid: self.f.grid.clone(),
            remainder,
            history: Vec::new(),
        };
        let mut cos_coef = None;
        for (k, (kind, _)) in cols.iter().enumerate() {
            match *kind {
                Column::Linear => d.c1 = coef[k],
                Column::Uehling => d.uehling_scale = coef[k],
                Column::Delta => d.c2 = coef[k],
                Column::Inverse1 => d.w1 = coef[k],
                Column::Inverse5 => d.w5 = coef[k],
                Column::Cos(_) => cos_coef = Some(coef[k]),
                Column::Sin(w) => {
                    // A cos ωx + B sin ωx = c e^{iωx} + c̄ e^{-iωx}, c = (A - iB)/2
                    let amp = cos_coef.take().unwrap_or(0.0);
                    d.oscillations.push(Oscillation { omega: w, c: Complex64::new(0.5 * amp, -0.5 * coef[k]) });
                }
            }
        }
        let (l2, osc) = norms(&d.grid, &d.remainder, &d.oscillations, a, b)?;
        d.remainder_norm = l2;
        d.oscillation_norm = osc;
        Ok(Fit { decomposition: d, laplace_remainder })
    }
}

/// Brent minimum of `f` on [lo, hi] to absolute tolerance `tol`.
fn brent_min(mut lo: f64, mut hi: f64, tol: f64, mut f: impl FnMut(f64) -> Result<f64>) -> Result<(f64, f64)> {
    const C: f64 = 0.381_966_011_250_105_1;
    let mut x = lo + C * (hi - lo);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x)?;
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if (x - m).abs() <= 2.0 * tol - 0.5 * (hi - lo) {
            break;
        }
        let golden = if e.abs() > tol {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            } else {
                q = -q;
            }
            let previous = e;
            e = d;
            if p.abs() >= (0.5 * q * previous).abs() || p <= q * (lo - x) || p >= q * (hi - x) {
                true
            } else {
                d = p / q;
                let u = x + d;
                if u - lo < 2.0 * tol || hi - u < 2.0 * tol {
                    d = tol.copysign(m - x);
                }
                false
            }
        } else {
            true
        };
        if golden {
            e = if x >= m { lo - x } else { hi - x };
            d = C * e;
        }
        let u = if d.abs() >= tol { x + d } else { x + tol.copysign(d) };
        let fu = f(u)?;
        if fu <= fx {
            if u < x {
                hi = x;
            } else {
                lo = x;
            }
            (v, fv, w, fw, x, fx) = (w, fw, x, fx, u, fu);
        } else {
            if u < x {
                lo = u;
            } else {
                hi = u;
            }
            if fu <= fw || w == x {
                (v, fv, w, fw) = (w, fw, u, fu);
            } else if fu <= fv || v == x || v == w {
                (v, fv) = (u, fu);
            }
        }
    }
    Ok((x, fx))
}

/// Moves each frequency within half a lobe to lower the Laplace residual,
/// the others held fixed, until no frequency moves by more than `1e-7`
/// lobes; overlapping lobes bias the one-at-a-time estimates.
fn refine_frequencies(ctx: &FitContext, omegas: &mut [f64], max_sweeps: usize) -> Result<()> {
    let lobe = lobe(ctx.f.grid[0], *ctx.f.grid.last().unwrap());
    let mut tones = omegas.iter().map(|&w| ctx.tone(w)).collect::<Result<Vec<_>>>()?;
    let mut reach = vec![0.5 * lobe; omegas.len()];
    let mut evals = 0usize;
    let mut sweeps = 0usize;
    for _ in 0..max_sweeps {
        sweeps += 1;
        let mut moved = 0.0f64;
        for k in 0..omegas.len() {
            let start = ctx.residual(&tones)?;
            let centre = omegas[k];
            let (lo, hi) = (centre - reach[k], centre + reach[k]);
            let (w, r) = brent_min(lo, hi, 1e-8 * lobe, |w| {
                evals += 1;
                tones[k] = ctx.tone(w)?;
                ctx.residual(&tones)
            })?;
            if r < start {
                omegas[k] = w;
            }
            tones[k] = ctx.tone(omegas[k])?;
            let step = (omegas[k] - centre).abs();
            moved = moved.max(step);
            reach[k] = (4.0 * step).clamp(1e-6 * lobe, 0.5 * lobe);
        }
        if moved < 1e-7 * lobe {
            break;
        }
    }
    log::debug!("refine: {} frequencies, {sweeps} sweeps, {evals} evaluations", omegas.len());
    Ok(())
}

/// Least squares via normal equations on unit-norm columns.
fn solve_scaled_normal(design: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let n = design.ncols();
    let mut scaled = design.clone();
    let mut scales = vec![1.0; n];
    for (k, scale) in scales.iter_mut().enumerate() {
        let norm = design.column(k).norm();
        if norm > 0.0 {
            *scale = norm;
            scaled.column_mut(k).scale_mut(1.0 / norm);
        }
    }
    let normal = scaled.transpose() * &scaled;
    let moment = scaled.transpose() * rhs;
    let y = match normal.clone().cholesky() {
        Some(ch) => ch.solve(&moment),
        None => normal
            .svd(true, true)
            .solve(&moment, 1e-14)
            .map_err(|e| Error::NonConvergence { what: "least squares", detail: e.to_string() })?,
    };
    Ok(DVector::from_iterator(n, y.iter().zip(&scales).map(|(v, s)| v / s)))
}

/// Greedy decomposition; see the module documentation.
pub fn decompose(f: &SampledDensity, gamma: f64, opts: &DecomposeOptions) -> Result<Decomposition> {
    if !(opts.tolerance > 0.0) {
        return Err(Error::invalid("decomposition tolerance must be positive"));
    }
    let mut ctx = FitContext::new(f, gamma, *opts)?;
    // a fixed Uehling term takes the sign whose search ends with the smaller Laplace residual
    let mut best: Option<Result<Decomposition>> = None;
    for sign in ctx.signs() {
        ctx.set_sign(sign);
        let r = greedy(&ctx, opts);
        best = Some(match (best, r) {
            (None, r) => r,
            (Some(Ok(x)), Ok(y)) => Ok(if y.laplace_residual < x.laplace_residual { y } else { x }),
            (Some(Ok(x)), Err(_)) | (Some(Err(_)), Ok(x)) => Ok(x),
            (Some(Err(x)), Err(y)) => Err(match (&x, &y) {
                (Error::DecompositionFailed { remainder: rx, .. }, Error::DecompositionFailed { remainder: ry, .. })
                    if ry < rx =>
                {
                    y
                }
                _ => x,
            }),
        });
    }
    best.expect("at least one sign")
}

fn greedy(ctx: &FitContext, opts: &DecomposeOptions) -> Result<Decomposition> {
    let f = ctx.f;
    let lobe = lobe(f.grid[0], *f.grid.last().unwrap());
    let mut omegas: Vec<f64> = Vec::new();
    let mut history = Vec::new();
    let mut candidates: Vec<Decomposition> = Vec::new();
    let mut first_success: Option<usize> = None;
    let mut best_remainder = f64::INFINITY;
    loop {
        let fit = ctx.fit(&omegas)?;
        let d = &fit.decomposition;
        history.push(IterationRecord {
            frequencies: omegas.len(),
            remainder_norm: d.remainder_norm,
            oscillation_norm: d.oscillation_norm,
            laplace_residual: d.laplace_residual,
        });
        log::debug!(
            "decompose: {} frequencies, remainder {:.4e}, oscillations {:.4e}",
            omegas.len(),
            d.remainder_norm,
            d.oscillation_norm
        );
        best_remainder = best_remainder.min(d.remainder_norm);
        if d.remainder_norm <= opts.tolerance {
            first_success.get_or_insert(omegas.len());
            candidates.push(fit.decomposition.clone());
        }
        let budget_left = omegas.len() < opts.max_frequencies
            && first_success.is_none_or(|n| omegas.len() < n + opts.extra_frequencies);
        if !budget_left {
            break;
        }
        let samples = ctx.samples(fit.laplace_remainder);
        let next = highest_spike(&samples, lobe, &omegas, opts.spike_prominence)
            .and_then(|band| find_frequency(&samples, band, opts.spike_prominence));
        match next {
            Ok(est) => {
                omegas.push(est.omega);
                refine_frequencies(ctx, &mut omegas, opts.refine_sweeps)?;
            }
            Err(Error::NoSpike { ratio }) => {
                log::debug!("decompose: no further spike (ratio {ratio:.3})");
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let chosen = candidates
        .into_iter()
        .min_by(|x, y| x.oscillation_norm.total_cmp(&y.oscillation_norm));
    match chosen {
        Some(mut d) => {
            d.history = history;
            Ok(d)
        }
        None => Err(Error::DecompositionFailed {
            remainder: best_remainder,
            tolerance: opts.tolerance,
            frequencies: omegas.len(),
        }),
    }
}

/// Fits a fixed frequency set without the greedy search.
pub fn decompose_with_frequencies(
    f: &SampledDensity,
    gamma: f64,
    omegas: &[f64],
    opts: &DecomposeOptions,
) -> Result<Decomposition> {
    let mut ctx = FitContext::new(f, gamma, *opts)?;
    let mut best: Option<Decomposition> = None;
    for sign in ctx.signs() {
        ctx.set_sign(sign);
        let d = ctx.fit(omegas)?.decomposition;
        if best.as_ref().is_none_or(|b| d.laplace_residual < b.laplace_residual) {
            best = Some(d);
        }
    }
    Ok(best.expect("at least one sign"))
}

/// Imaginary-axis samples of the transform of a density, on the grid the
/// decomposition uses.
pub fn imaginary_axis_samples(f: &SampledDensity, opts: &DecomposeOptions) -> Result<ImaginaryAxisSamples> {
    let (a, b) = (f.grid[0], *f.grid.last().unwrap());
    let h_max = f.grid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let dq = opts.q_spacing.unwrap_or(std::f64::consts::PI / (4.0 * (b - a)));
    let q_max = opts.q_max.unwrap_or(std::f64::consts::PI / (2.0 * h_max));
    let n_q = (q_max / dq).floor() as usize + 1;
    let q: Vec<f64> = (0..n_q).map(|j| j as f64 * dq).collect();
    let values = q.iter().map(|&q| laplace_transform(f, Complex64::new(0.0, q))).collect::<Result<_>>()?;
    Ok(ImaginaryAxisSamples { q, values, a, b })
}
