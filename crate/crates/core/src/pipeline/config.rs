use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::density::{default_interval, MomentumRule};
use crate::error::{Error, Result};
use crate::extrapolate::ExtrapolateOptions;
use crate::laplace::DecomposeOptions;
use crate::radial::PhysicalParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsSection {
    pub charge: u32,
    pub alpha: f64,
    /// Radial cut-off K.
    pub k_max: u32,
    /// Bound states with |κ| + n ≤ M_Λ are included.
    pub m_lambda: u32,
}

impl Default for PhysicsSection {
    fn default() -> Self {
        PhysicsSection { charge: 92, alpha: crate::ALPHA, k_max: 8, m_lambda: 5 }
    }
}

impl PhysicsSection {
    pub fn gamma(&self) -> f64 {
        self.charge as f64 * self.alpha
    }
}

/// Cut-off pairs: every Λ/γ combined with every Λ₀.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    pub lambda_over_gamma: Vec<f64>,
    pub lambda0: Vec<f64>,
}

impl Default for ScanSection {
    fn default() -> Self {
        ScanSection { lambda_over_gamma: vec![1.0, 0.75, 0.5], lambda0: vec![5.0, 7.58] }
    }
}

/// Working interval and sampling; a and b default to 2/Λ₀ and K/(2γ√Λ₀).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub n_points: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { a: None, b: None, n_points: 201 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtrapolateSection {
    pub gradient_tolerance: f64,
    pub learning_rate: f64,
    pub max_iterations: usize,
    pub eta_range: (f64, f64),
    /// Knots t₁ < … < 1 of the piecewise 𝗐₅ fit.
    pub knots: Vec<f64>,
}

impl Default for ExtrapolateSection {
    fn default() -> Self {
        let o = ExtrapolateOptions::default();
        ExtrapolateSection {
            gradient_tolerance: o.gradient_tolerance,
            learning_rate: o.learning_rate,
            max_iterations: o.max_iterations,
            eta_range: o.eta_range,
            knots: vec![0.13, 0.2, 0.23, 1.0],
        }
    }
}

impl ExtrapolateSection {
    pub fn options(&self) -> ExtrapolateOptions {
        ExtrapolateOptions {
            gradient_tolerance: self.gradient_tolerance,
            learning_rate: self.learning_rate,
            max_iterations: self.max_iterations,
            eta_range: self.eta_range,
        }
    }
}

/// Which 𝗐₅(x) drives the flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitSource {
    /// υ = 0.72, χ = 0.03 and the published exponents.
    #[default]
    Published,
    /// The piecewise fit written by the extrapolate stage.
    Extrapolated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowSection {
    /// Spectrum CSV (columns n, p_n); the bundled Uranium table when unset.
    pub spectrum: Option<PathBuf>,
    pub intervals: usize,
    /// Intervals integrated explicitly on the Coulomb path before the tail.
    pub coulomb_intervals: usize,
    pub fit: FitSource,
    pub trajectory_samples: usize,
    /// The tail estimate sums levels beyond this n.
    pub remainder_cut: usize,
}

impl Default for FlowSection {
    fn default() -> Self {
        FlowSection {
            spectrum: None,
            intervals: 6,
            coulomb_intervals: 40,
            fit: FitSource::Published,
            trajectory_samples: 16,
            remainder_cut: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("vacpol-out") }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StageName {
    Density,
    Decompose,
    Extrapolate,
    /// Both the atom and the one-electron ion.
    Flow,
    Report,
}

impl StageName {
    pub const ALL: [StageName; 5] =
        [StageName::Density, StageName::Decompose, StageName::Extrapolate, StageName::Flow, StageName::Report];
}

/// Everything a pipeline run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Stages executed by `run`, in pipeline order.
    pub stages: Vec<StageName>,
    pub physics: PhysicsSection,
    pub scan: ScanSection,
    pub grid: GridSection,
    pub quadrature: MomentumRule,
    pub decompose: DecomposeOptions,
    pub extrapolate: ExtrapolateSection,
    pub flow: FlowSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            stages: StageName::ALL.to_vec(),
            physics: PhysicsSection::default(),
            scan: ScanSection::default(),
            grid: GridSection::default(),
            quadrature: MomentumRule::default(),
            decompose: DecomposeOptions::default(),
            extrapolate: ExtrapolateSection::default(),
            flow: FlowSection::default(),
            output: OutputSection::default(),
        }
    }
}

/// One (Λ, Λ₀) pair of the scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffPair {
    pub lambda_over_gamma: f64,
    pub lambda0: f64,
}

impl CutoffPair {
    pub fn tag(&self) -> String {
        format!("lg{}_l0{}", self.lambda_over_gamma, self.lambda0)
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn pairs(&self) -> Vec<CutoffPair> {
        let mut out = Vec::new();
        for &lg in &self.scan.lambda_over_gamma {
            for &l0 in &self.scan.lambda0 {
                out.push(CutoffPair { lambda_over_gamma: lg, lambda0: l0 });
            }
        }
        out
    }

    pub fn params(&self, pair: CutoffPair) -> PhysicalParams {
        let p = &self.physics;
        PhysicalParams {
            charge: p.charge,
            alpha: p.alpha,
            k_max: p.k_max,
            m_lambda: p.m_lambda,
            lambda: pair.lambda_over_gamma * p.gamma(),
            lambda0: pair.lambda0,
        }
    }

    /// Working interval of a pair after applying the defaults.
    pub fn interval(&self, pair: CutoffPair) -> (f64, f64) {
        let (a, b) = default_interval(&self.params(pair));
        (self.grid.a.unwrap_or(a), self.grid.b.unwrap_or(b))
    }

    /// Checks everything the stages rely on before any of them runs.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.scan.lambda_over_gamma.is_empty() || self.scan.lambda0.is_empty() {
            return bad("scan needs at least one Λ/γ and one Λ₀".into());
        }
        for pair in self.pairs() {
            self.params(pair).validate().map_err(|e| Error::Config(format!("{}: {e}", pair.tag())))?;
            let (a, b) = self.interval(pair);
            if !(a > 0.0 && b > a) {
                return bad(format!("{}: working interval [{a}, {b}] is empty", pair.tag()));
            }
        }
        if self.grid.n_points < 5 {
            return bad(format!("grid.n_points = {} is below 5", self.grid.n_points));
        }
        if self.quadrature.nodes == 0 {
            return bad("quadrature.nodes must be positive".into());
        }
        if !(self.decompose.tolerance > 0.0) {
            return bad("decompose.tolerance must be positive".into());
        }
        let k = &self.extrapolate.knots;
        if k.windows(2).any(|w| !(w[1] > w[0])) || k.first().is_some_and(|&t| !(t > 0.0)) || k.last().is_some_and(|&t| t != 1.0) {
            return bad(format!("extrapolate.knots {k:?} must increase from above 0 to 1"));
        }
        if self.flow.remainder_cut == 0 {
            return bad("flow.remainder_cut must be at least 1".into());
        }
        Ok(())
    }

    /// SHA-256 of the configuration without output location and stage list.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputSection::default();
        c.stages = StageName::ALL.to_vec();
        hash_json(&c)
    }
}

pub(crate) fn hash_json<T: Serialize>(value: &T) -> String {
    let text = serde_json::to_string(value).expect("configuration serializes");
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Command-line values that replace entries of the configuration file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub charge: Option<u32>,
    pub k_max: Option<u32>,
    pub m_lambda: Option<u32>,
    pub lambda_over_gamma: Option<Vec<f64>>,
    pub lambda0: Option<Vec<f64>>,
    pub n_points: Option<usize>,
    pub nodes: Option<usize>,
    pub tolerance: Option<f64>,
    pub spectrum: Option<PathBuf>,
    pub intervals: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, c: &mut RunConfig) {
        if let Some(v) = &self.out {
            c.output.dir = v.clone();
        }
        if let Some(v) = self.charge {
            c.physics.charge = v;
        }
        if let Some(v) = self.k_max {
            c.physics.k_max = v;
        }
        if let Some(v) = self.m_lambda {
            c.physics.m_lambda = v;
        }
        if let Some(v) = &self.lambda_over_gamma {
            c.scan.lambda_over_gamma = v.clone();
        }
        if let Some(v) = &self.lambda0 {
            c.scan.lambda0 = v.clone();
        }
        if let Some(v) = self.n_points {
            c.grid.n_points = v;
        }
        if let Some(v) = self.nodes {
            c.quadrature.nodes = v;
        }
        if let Some(v) = self.tolerance {
            c.decompose.tolerance = v;
        }
        if let Some(v) = &self.spectrum {
            c.flow.spectrum = Some(v.clone());
        }
        if let Some(v) = self.intervals {
            c.flow.intervals = v;
        }
    }
}
