use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vacpol::pipeline::{
    run_stages, stage_decompose, stage_density, stage_extrapolate, stage_flow, stage_report, FitSource, FlowSystem,
    Overrides, RunConfig, StageOutput,
};

/// Nonperturbative vacuum polarization pipeline.
#[derive(Parser)]
#[command(name = "vacpol", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; built-in defaults otherwise.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Nuclear charge Z.
    #[arg(long, global = true)]
    charge: Option<u32>,
    /// Radial cut-off K.
    #[arg(long, global = true)]
    k_max: Option<u32>,
    /// Principal-quantum-number cut-off for bound states.
    #[arg(long, global = true)]
    m_lambda: Option<u32>,
    /// Infrared cut-offs as multiples of γ, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    lambda_over_gamma: Option<Vec<f64>>,
    /// Ultraviolet cut-offs, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    lambda0: Option<Vec<f64>>,
    /// Samples per density.
    #[arg(long, global = true)]
    n_points: Option<usize>,
    /// Gauss-Legendre nodes per momentum panel.
    #[arg(long, global = true)]
    nodes: Option<usize>,
    /// Bound on the decomposition remainder norm.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// More log output; repeat for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Runs the stages listed in the configuration.
    Run,
    /// Samples the spectral density for every cut-off pair.
    Density,
    /// Splits each density into its components.
    Decompose,
    /// Extrapolates 𝗐₅ to Λ₀ → ∞.
    Extrapolate,
    /// Integrates ν₅ over a spectrum.
    Flow {
        /// Spectrum CSV with columns n, p_n; the bundled Uranium table otherwise.
        #[arg(long, conflicts_with = "coulomb")]
        spectrum: Option<PathBuf>,
        /// Number of spectral intervals.
        #[arg(long)]
        intervals: Option<usize>,
        /// One-electron ion: λₙ = γ/n.
        #[arg(long)]
        coulomb: bool,
        #[arg(long, value_enum)]
        fit: Option<Fit>,
    },
    /// Summary table and figure data from the flow runs.
    Report,
    /// Prints the effective configuration.
    Config,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fit {
    Published,
    Extrapolated,
}

fn load(common: &Common) -> vacpol::Result<RunConfig> {
    let mut config = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    Overrides {
        out: common.out.clone(),
        charge: common.charge,
        k_max: common.k_max,
        m_lambda: common.m_lambda,
        lambda_over_gamma: common.lambda_over_gamma.clone(),
        lambda0: common.lambda0.clone(),
        n_points: common.n_points,
        nodes: common.nodes,
        tolerance: common.tolerance,
        spectrum: None,
        intervals: None,
    }
    .apply(&mut config);
    Ok(config)
}

fn execute(cli: Cli) -> vacpol::Result<Vec<StageOutput>> {
    let mut config = load(&cli.common)?;
    match cli.command {
        Command::Run => run_stages(&config),
        Command::Density => Ok(vec![stage_density(&config)?]),
        Command::Decompose => Ok(vec![stage_decompose(&config)?]),
        Command::Extrapolate => Ok(vec![stage_extrapolate(&config)?]),
        Command::Flow { spectrum, intervals, coulomb, fit } => {
            Overrides { spectrum, intervals, ..Default::default() }.apply(&mut config);
            if let Some(fit) = fit {
                config.flow.fit = match fit {
                    Fit::Published => FitSource::Published,
                    Fit::Extrapolated => FitSource::Extrapolated,
                };
            }
            let system = if coulomb { FlowSystem::Ion } else { FlowSystem::Atom };
            Ok(vec![stage_flow(&config, system)?])
        }
        Command::Report => Ok(vec![stage_report(&config)?]),
        Command::Config => {
            config.validate()?;
            let text = toml::to_string(&config).map_err(|e| vacpol::Error::Serde(e.to_string()))?;
            print!("{text}");
            Ok(Vec::new())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(outputs) => {
            for o in outputs {
                for m in &o.messages {
                    println!("{}: {m}", o.stage);
                }
                for f in &o.files {
                    log::info!("{}: wrote {}", o.stage, f.display());
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
