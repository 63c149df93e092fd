//! Staged pipeline: density → decompose → extrapolate, flow → report.
//!
//! Stages communicate only through files in the output directory, so each
//! can be run on its own. JSON outputs are wrapped in [`Artifact`]; CSV
//! outputs start with `#` lines carrying the same provenance.

mod artifact;
mod config;
mod stages;

pub use artifact::{cache_dir, Artifact, CACHE_ENV};
pub use config::{
    CutoffPair, ExtrapolateSection, FitSource, FlowSection, GridSection, OutputSection, Overrides, PhysicsSection,
    RunConfig, ScanSection, StageName,
};
pub use stages::{
    run_stages, stage_decompose, stage_density, stage_extrapolate, stage_flow, stage_report, DecomposeManifest,
    DecomposeRun, DensityManifest, DensityRun, ExtrapolationReport, FlowReport, FlowSystem, StageOutput,
    SummaryRow,
};

pub const TOOL_VERSION: &str = concat!("vacpol ", env!("CARGO_PKG_VERSION"));
