//! The regularized spectral density
//!
//! ```text
//! 𝗒(x) = Σ_{0<|κ|≤K} 2|κ| (y_{κ-}(x) - y_{κ+}(x) - ỹ_κ(x))
//! ```
//!
//! where y_{κ±} integrates |F±|² + |G±|² over momenta in [Λ, Λ₀] and ỹ_κ sums
//! the bound states with |κ| + n ≤ M_Λ whose momentum is at least Λ. The
//! half trace of the density matrix is 𝗒(|r|)/(8πr²).

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{CompositeRule, GaussLegendre};
use crate::radial::{BoundState, Branch, ContinuumState, PhysicalParams};

/// Relation between 𝗒 and the density matrix, stored with every artifact.
pub const DENSITY_RELATION: &str = "half_trace_R(r) = y(|r|) / (8 pi r^2)";

/// Factor on K/(2γ√Λ₀) in the default upper bound.
pub const INTERVAL_B_SCALE: f64 = 0.375;

/// Default working interval [a, b] = [2/Λ₀, s·K/(2γ√Λ₀)], s = [`INTERVAL_B_SCALE`].
/// Beyond roughly 0.8K/Λ₀ the density is dominated by the radial cut-off.
pub fn default_interval(params: &PhysicalParams) -> (f64, f64) {
    let a = 2.0 / params.lambda0;
    let b = INTERVAL_B_SCALE * params.k_max as f64 / (2.0 * params.gamma() * params.lambda0.sqrt());
    (a, b)
}

/// Uniform grid of `n` points on [a, b].
pub fn uniform_grid(a: f64, b: f64, n: usize) -> Result<Vec<f64>> {
    if !(a > 0.0 && b > a) || n < 2 {
        return Err(Error::invalid(format!("grid needs 0 < a < b and n ≥ 2 (got [{a}, {b}], n = {n})")));
    }
    let h = (b - a) / (n - 1) as f64;
    Ok((0..n).map(|i| if i + 1 == n { b } else { a + h * i as f64 }).collect())
}

/// Composite Gauss–Legendre rule in momentum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentumRule {
    /// Nodes per panel.
    pub nodes: usize,
    /// Largest panel width; `None` means π/(2·x_max) of the grid.
    pub max_width: Option<f64>,
}

impl Default for MomentumRule {
    fn default() -> Self {
        MomentumRule { nodes: 16, max_width: None }
    }
}

impl MomentumRule {
    fn build(&self, lo: f64, hi: f64, x_max: f64) -> Result<CompositeRule> {
        if self.nodes == 0 {
            return Err(Error::invalid("momentum rule needs at least one node per panel"));
        }
        let width = self.max_width.unwrap_or(std::f64::consts::PI / (2.0 * x_max));
        if !(width > 0.0) {
            return Err(Error::invalid(format!("momentum panel width {width} must be positive")));
        }
        Ok(CompositeRule::with_max_width(lo, hi, width, &GaussLegendre::new(self.nodes)))
    }
}

/// Per-channel ingredients of 𝗒 on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelDensity {
    pub kappa: i32,
    pub y_minus: Vec<f64>,
    pub y_plus: Vec<f64>,
    pub y_bound: Vec<f64>,
}

impl ChannelDensity {
    /// 2|κ|(y₋ - y₊ - ỹ)
    pub fn contribution(&self) -> Vec<f64> {
        let w = 2.0 * self.kappa.unsigned_abs() as f64;
        self.y_minus
            .iter()
            .zip(&self.y_plus)
            .zip(&self.y_bound)
            .map(|((m, p), b)| w * (m - p - b))
            .collect()
    }
}

/// Bound states of channel κ inside the cut-offs.
pub fn included_bound_states(params: &PhysicalParams, kappa: i32) -> Result<Vec<BoundState>> {
    let gamma = params.gamma();
    let first = if kappa > 0 { 1 } else { 0 };
    let mut out = Vec::new();
    let mut n = first;
    while kappa.unsigned_abs() + n <= params.m_lambda {
        let st = BoundState::new(gamma, kappa, n)?;
        // p = Λ exactly (e.g. the 1s state at Λ = γ) must not hinge on rounding
        if st.p >= params.lambda * (1.0 - 4.0 * f64::EPSILON) {
            out.push(st);
        }
        n += 1;
    }
    Ok(out)
}

fn continuum_integral(
    gamma: f64,
    kappa: i32,
    branch: Branch,
    rule: &CompositeRule,
    grid: &[f64],
) -> Result<Vec<f64>> {
    let pieces: Vec<Vec<f64>> = rule
        .points()
        .par_iter()
        .map(|&(p, w)| -> Result<Vec<f64>> {
            let ev = ContinuumState::new(gamma, kappa, p, branch)?.evaluator()?;
            grid.iter().map(|&x| Ok(w * ev.density(x)?)).collect()
        })
        .collect::<Result<_>>()?;
    // fixed-order reduction keeps the sum independent of scheduling
    let mut acc = vec![0.0; grid.len()];
    for piece in &pieces {
        for (a, v) in acc.iter_mut().zip(piece) {
            *a += v;
        }
    }
    Ok(acc)
}

/// y₋, y₊ and ỹ for one channel.
pub fn channel_density(
    params: &PhysicalParams,
    kappa: i32,
    grid: &[f64],
    rule: &MomentumRule,
) -> Result<ChannelDensity> {
    params.validate()?;
    if kappa == 0 || kappa.unsigned_abs() > params.k_max {
        return Err(Error::invalid(format!("channel κ = {kappa} outside 0 < |κ| ≤ {}", params.k_max)));
    }
    let x_max = grid.iter().copied().fold(0.0, f64::max);
    if grid.is_empty() || grid.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::invalid("density grid must be non-empty and positive"));
    }
    let composite = rule.build(params.lambda, params.lambda0, x_max)?;
    let gamma = params.gamma();
    let y_minus = continuum_integral(gamma, kappa, Branch::Negative, &composite, grid)?;
    let y_plus = continuum_integral(gamma, kappa, Branch::Positive, &composite, grid)?;
    let mut y_bound = vec![0.0; grid.len()];
    for st in included_bound_states(params, kappa)? {
        let ev = st.evaluator()?;
        for (acc, &x) in y_bound.iter_mut().zip(grid) {
            *acc += ev.density(x);
        }
    }
    Ok(ChannelDensity { kappa, y_minus, y_plus, y_bound })
}

/// 𝗒 sampled on a grid inside [a, b].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledDensity {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub a: f64,
    pub b: f64,
    pub params: Option<PhysicalParams>,
    pub channel_breakdown: Option<Vec<ChannelDensity>>,
}

impl SampledDensity {
    /// Wraps externally produced samples, e.g. synthetic test data.
    pub fn from_samples(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() || grid.len() < 3 {
            return Err(Error::invalid("density needs at least three samples with matching lengths"));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) || !(grid[0] > 0.0) {
            return Err(Error::invalid("density grid must be positive and strictly increasing"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("density values must be finite"));
        }
        let (a, b) = (grid[0], grid[grid.len() - 1]);
        Ok(SampledDensity { grid, values, a, b, params: None, channel_breakdown: None })
    }

    /// CSV with columns x, y and optionally one column per channel.
    pub fn write_csv(&self, path: &Path, header_lines: &[String]) -> Result<()> {
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        for line in header_lines {
            writeln!(file, "# {line}").map_err(|e| Error::io(path, e))?;
        }
        let mut w = csv::Writer::from_writer(file);
        let mut head = vec!["x".to_string(), "y".to_string()];
        if let Some(ch) = &self.channel_breakdown {
            head.extend(ch.iter().map(|c| format!("kappa_{}", c.kappa)));
        }
        w.write_record(&head).map_err(csv_err)?;
        let contributions: Vec<Vec<f64>> =
            self.channel_breakdown.iter().flatten().map(|c| c.contribution()).collect();
        for (i, (x, y)) in self.grid.iter().zip(&self.values).enumerate() {
            let mut row = vec![format_f64(*x), format_f64(*y)];
            row.extend(contributions.iter().map(|c| format_f64(c[i])));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Reads the x, y columns written by [`SampledDensity::write_csv`].
    pub fn read_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(csv_err)?;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(csv_err)?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|v| v.trim().parse().ok())
                    .ok_or_else(|| Error::Serde(format!("{}: bad numeric field in column {i}", path.display())))
            };
            xs.push(parse(0)?);
            ys.push(parse(1)?);
        }
        Ok((xs, ys))
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Serde(e.to_string())
}

/// Shortest representation that round-trips exactly.
pub(crate) fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Sums all channels 0 < |κ| ≤ K in the order -1, 1, -2, 2, …
pub fn assemble_density(
    params: &PhysicalParams,
    grid: &[f64],
    interval: (f64, f64),
    rule: &MomentumRule,
    keep_channels: bool,
) -> Result<SampledDensity> {
    params.validate()?;
    let (a, b) = interval;
    if !(a > 0.0 && b > a) {
        return Err(Error::invalid(format!("working interval [{a}, {b}] is empty")));
    }
    if let Some(x) = grid.iter().find(|&&x| x < a || x > b) {
        return Err(Error::invalid(format!("x = {x} lies outside the working interval [{a}, {b}]")));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("density grid must be strictly increasing"));
    }
    let k = params.k_max as i32;
    let kappas: Vec<i32> = (1..=k).flat_map(|m| [-m, m]).collect();
    let channels: Vec<ChannelDensity> = kappas
        .par_iter()
        .map(|&kappa| channel_density(params, kappa, grid, rule))
        .collect::<Result<_>>()?;
    let mut values = vec![0.0; grid.len()];
    for ch in &channels {
        for (acc, v) in values.iter_mut().zip(ch.contribution()) {
            *acc += v;
        }
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonConvergence {
            what: "spectral density",
            detail: format!("non-finite value at x = {}", grid[i]),
        });
    }
    Ok(SampledDensity {
        grid: grid.to_vec(),
        values,
        a,
        b,
        params: Some(*params),
        channel_breakdown: keep_channels.then_some(channels),
    })
}
