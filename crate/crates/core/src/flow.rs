//! Flow of the running constant ν₅ through a discrete s-orbital spectrum.
//!
//! The Dirac–Coulomb flow is dilated piecewise: on (x_{n+1}, x_n] with
//! x_n = 1/n the drop of 𝗐₅ is scaled by (λ_n - λ_{n+1})/δω_n, where
//! δω_n = γ/(n(n+1)) is the Coulomb level spacing, so
//!
//! ```text
//! ν₅(x) = 𝗐₅(1) - Σ_{n: x < x_n} (λ_n - λ_{n+1})/δω_n · [𝗐₅(x_n) - 𝗐₅(max(x_{n+1}, x))]
//! ```
//!
//! and the long-range density is ν(r) = ν₅/(8π r⁷) for |r| ≥ 1.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extrapolate::PiecewiseW5;

/// Exact one-electron density of Z = 92 at one Compton length, for comparison.
pub const WICHMANN_KROLL_DENSITY_AT_ONE: f64 = 1.3e-3;

const URANIUM_CSV: &str = include_str!("../data/uranium.csv");

/// Binding momenta p_n of s-orbitals, strictly decreasing in (0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTable {
    pub p: Vec<f64>,
}

impl SpectrumTable {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::invalid("spectrum is empty"));
        }
        if p.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
            return Err(Error::invalid("spectrum momenta must lie in (0, 1)"));
        }
        if p.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::invalid("spectrum momenta must decrease strictly with n"));
        }
        Ok(SpectrumTable { p })
    }

    /// The occupied s-orbitals of the Uranium atom.
    pub fn uranium() -> Self {
        Self::parse(URANIUM_CSV, "bundled uranium.csv").expect("bundled spectrum is valid")
    }

    /// λ_n = γ/n for n = 1..=count.
    pub fn coulomb(gamma: f64, count: usize) -> Result<Self> {
        Self::new((1..=count).map(|n| gamma / n as f64).collect())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Columns n, p_n; `#` starts a comment line; rows must run n = 1, 2, …
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
        let mut p = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(crate::density::csv_err)?;
            let bad = || Error::Serde(format!("{origin}: malformed spectrum row {}", i + 1));
            let n: usize = rec.get(0).and_then(|v| v.parse().ok()).ok_or_else(bad)?;
            let v: f64 = rec.get(1).and_then(|v| v.parse().ok()).ok_or_else(bad)?;
            if n != i + 1 {
                return Err(Error::Serde(format!("{origin}: expected n = {} but found {n}", i + 1)));
            }
            p.push(v);
        }
        Self::new(p)
    }

    /// (λ_n - λ_{n+1})/δω_n for n = 1..=len-1.
    pub fn dilatation_ratios(&self, gamma: f64) -> Vec<f64> {
        self.p
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let n = (i + 1) as f64;
                (w[0] - w[1]) * n * (n + 1.0) / gamma
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowPoint {
    pub x: f64,
    /// Spectral parameter ω with x = x(ω).
    pub omega: f64,
    pub nu5: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowResult {
    pub trajectory: Vec<FlowPoint>,
    /// ν₅ after the last integrated interval.
    pub nu5_final: f64,
    pub intervals: usize,
    pub ratios: Vec<f64>,
}

/// ω ∈ [λ_{n+1}, λ_n] with x(ω) = x for x ∈ [1/(n+1), 1/n].
pub fn omega_of_x(spectrum: &SpectrumTable, n: usize, x: f64) -> f64 {
    let (hi, lo) = (spectrum.p[n - 1], spectrum.p[n]);
    let nf = n as f64;
    hi - (hi - lo) * (nf + 1.0) * (1.0 - nf * x)
}

/// x(ω) = (1/n)(1 - (λ_n - ω)/((n+1)(λ_n - λ_{n+1}))) for ω ∈ (λ_{n+1}, λ_n].
pub fn x_of_omega(spectrum: &SpectrumTable, omega: f64) -> Result<f64> {
    let n = spectrum
        .p
        .windows(2)
        .position(|w| omega <= w[0] && omega > w[1])
        .ok_or_else(|| Error::domain("x_of_omega", format!("ω = {omega} outside the tabulated spectrum")))?
        + 1;
    let (hi, lo) = (spectrum.p[n - 1], spectrum.p[n]);
    let nf = n as f64;
    Ok((1.0 - (hi - omega) / ((nf + 1.0) * (hi - lo))) / nf)
}

/// Integrates the flow over the first `n_intervals` spectral intervals.
/// `samples` points per interval are added to the trajectory.
pub fn integrate_flow(
    fit: &PiecewiseW5,
    spectrum: &SpectrumTable,
    gamma: f64,
    n_intervals: usize,
    samples: usize,
) -> Result<FlowResult> {
    if !(gamma > 0.0) {
        return Err(Error::invalid(format!("γ = {gamma} must be positive")));
    }
    if n_intervals + 1 > spectrum.p.len() {
        return Err(Error::invalid(format!(
            "{n_intervals} intervals need {} spectral values, the table has {}",
            n_intervals + 1,
            spectrum.p.len()
        )));
    }
    let ratios: Vec<f64> = spectrum.dilatation_ratios(gamma).into_iter().take(n_intervals).collect();
    let mut nu5 = fit.eval(1.0)?;
    let mut trajectory = vec![FlowPoint { x: 1.0, omega: spectrum.p[0], nu5 }];
    for (i, &ratio) in ratios.iter().enumerate() {
        let n = i + 1;
        let (x_hi, x_lo) = (1.0 / n as f64, 1.0 / (n + 1) as f64);
        let w_hi = fit.eval(x_hi)?;
        for k in 1..=samples.max(1) {
            let x = x_hi + (x_lo - x_hi) * k as f64 / samples.max(1) as f64;
            let x = if k == samples.max(1) { x_lo } else { x };
            let v = nu5 - ratio * (w_hi - fit.eval(x)?);
            trajectory.push(FlowPoint { x, omega: omega_of_x(spectrum, n, x), nu5: v });
        }
        nu5 -= ratio * (w_hi - fit.eval(x_lo)?);
    }
    Ok(FlowResult { trajectory, nu5_final: nu5, intervals: n_intervals, ratios })
}

/// Flow of the one-electron ion continued to x → 0⁺: every ratio is 1, so
/// ν₅ follows 𝗐₅ and ends at 𝗐₅(0⁺) = χ.
pub fn coulomb_flow(fit: &PiecewiseW5, gamma: f64, n_intervals: usize) -> Result<FlowResult> {
    let spectrum = SpectrumTable::coulomb(gamma, n_intervals + 1)?;
    let mut res = integrate_flow(fit, &spectrum, gamma, n_intervals, 4)?;
    let x_last = 1.0 / (n_intervals + 1) as f64;
    // remaining intervals with ratio 1 telescope to 𝗐₅(x_last) - χ
    res.nu5_final -= fit.eval(x_last)? - fit.eval_extended(0.0)?;
    res.trajectory.push(FlowPoint { x: 0.0, omega: 0.0, nu5: res.nu5_final });
    Ok(res)
}

/// Tail beyond the tabulated spectrum, (𝗐₅(1/(n_cut+1)) - 𝗐₅(0⁺))/Z.
pub fn remainder_estimate(fit: &PiecewiseW5, charge: u32, n_cut: usize) -> Result<f64> {
    if n_cut < 1 || charge == 0 {
        return Err(Error::invalid("remainder estimate needs n_cut ≥ 1 and Z ≥ 1"));
    }
    Ok((fit.eval(1.0 / (n_cut + 1) as f64)? - fit.eval_extended(0.0)?) / charge as f64)
}

/// ν(r) = ν₅/(8π r⁷) for r ≥ 1 in Compton units; r = 1 is the boundary limit.
pub fn density(nu5: f64, r: f64) -> Result<f64> {
    if !(r >= 1.0) || !r.is_finite() {
        return Err(Error::domain("density", format!("r = {r} must be at least one Compton length")));
    }
    Ok(nu5 / (8.0 * std::f64::consts::PI * r.powi(7)))
}
