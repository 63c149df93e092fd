use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::artifact::{cache_dir, cached, provenance, write_atomic, write_table, Artifact};
use super::config::{hash_json, CutoffPair, FitSource, RunConfig, StageName};
use super::TOOL_VERSION;
use crate::density::{assemble_density, uniform_grid, SampledDensity, DENSITY_RELATION};
use crate::error::{Error, Result};
use crate::extrapolate::{curve_from_limits, extrapolate, fit_piecewise, Extrapolation, PiecewiseW5, W5Sample, W5Samples};
use crate::flow::{
    coulomb_flow, density, integrate_flow, remainder_estimate, FlowPoint, SpectrumTable,
    WICHMANN_KROLL_DENSITY_AT_ONE,
};
use crate::laplace::{decompose, Decomposition};
use crate::radial::PhysicalParams;
use crate::uehling::u_position_with;

/// Files written by one stage and how much was served from the cache.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageOutput {
    pub stage: &'static str,
    pub files: Vec<PathBuf>,
    pub cache_hits: usize,
    pub computed: usize,
    /// Human-readable result lines.
    pub messages: Vec<String>,
}

impl StageOutput {
    fn new(stage: &'static str) -> Self {
        StageOutput { stage, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRun {
    pub pair: CutoffPair,
    pub params: PhysicalParams,
    pub interval: (f64, f64),
    pub n_points: usize,
    /// Hash of everything the samples depend on.
    pub key: String,
    pub relation: String,
    /// Relative to the output directory.
    pub csv: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityManifest {
    pub runs: Vec<DensityRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecomposeRun {
    pub pair: CutoffPair,
    pub lambda: f64,
    pub lambda0: f64,
    pub key: String,
    pub c1: f64,
    pub w1: f64,
    pub w5: f64,
    pub uehling_scale: f64,
    pub frequencies: Vec<f64>,
    pub remainder_norm: f64,
    pub oscillation_norm: f64,
    pub json: String,
    pub panels: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecomposeManifest {
    pub gamma: f64,
    pub runs: Vec<DecomposeRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtrapolationReport {
    pub gamma: f64,
    pub samples: Vec<W5Sample>,
    pub fit: Extrapolation,
    /// (x = Λ/γ, 𝗐₅^{Λ∞}).
    pub curve: Vec<(f64, f64)>,
    pub piecewise: Option<PiecewiseW5>,
    pub piecewise_note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowSystem {
    /// Tabulated many-electron spectrum.
    Atom,
    /// One electron: the Coulomb spectrum λₙ = γ/n.
    Ion,
}

impl FlowSystem {
    fn name(self) -> &'static str {
        match self {
            FlowSystem::Atom => "atom",
            FlowSystem::Ion => "ion",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowReport {
    pub system: FlowSystem,
    pub spectrum: String,
    pub charge: u32,
    pub gamma: f64,
    pub intervals: usize,
    pub fit_source: FitSource,
    pub fit: PiecewiseW5,
    pub ratios: Vec<f64>,
    /// ν₅ after the integrated intervals.
    pub nu5: f64,
    pub density_at_one: f64,
    /// Estimated drop from the levels beyond the table (atom only).
    pub remainder: Option<f64>,
    pub nu5_with_tail: Option<f64>,
    pub density_with_tail_at_one: Option<f64>,
    pub trajectory: Vec<FlowPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub nu5: Option<f64>,
    /// ν(r) at one Compton length.
    pub density_at_one: f64,
}

fn rel(out: &Path, path: &Path) -> String {
    path.strip_prefix(out).unwrap_or(path).display().to_string()
}

fn density_key(config: &RunConfig, pair: CutoffPair) -> String {
    hash_json(&(
        "density",
        TOOL_VERSION,
        config.params(pair),
        config.interval(pair),
        config.grid.n_points,
        config.quadrature,
    ))
}

fn decompose_key(config: &RunConfig, pair: CutoffPair) -> String {
    hash_json(&("decompose", TOOL_VERSION, density_key(config, pair), config.physics.gamma(), config.decompose))
}

/// Samples 𝗒 for every cut-off pair; results are cached by content hash.
pub fn stage_density(config: &RunConfig) -> Result<StageOutput> {
    config.validate()?;
    let out = &config.output.dir;
    let hash = config.hash();
    let cache = cache_dir(out);
    let mut res = StageOutput::new("density");
    let mut runs = Vec::new();
    for pair in config.pairs() {
        let params = config.params(pair);
        let interval = config.interval(pair);
        let key = density_key(config, pair);
        let (d, hit): (SampledDensity, bool) = cached(&cache, &format!("density-{key}"), || {
            log::info!("density {}: K = {}, [{}, {}]", pair.tag(), params.k_max, interval.0, interval.1);
            let grid = uniform_grid(interval.0, interval.1, config.grid.n_points)?;
            assemble_density(&params, &grid, interval, &config.quadrature, false)
        })?;
        if hit {
            res.cache_hits += 1;
        } else {
            res.computed += 1;
        }
        let csv = out.join("density").join(format!("{}.csv", pair.tag()));
        let mut header = provenance("spectral density", &hash);
        header.push(DENSITY_RELATION.to_string());
        header.push(format!(
            "Z {} alpha {} K {} M_Lambda {} Lambda {} Lambda0 {}",
            params.charge, params.alpha, params.k_max, params.m_lambda, params.lambda, params.lambda0
        ));
        std::fs::create_dir_all(out.join("density")).map_err(|e| Error::io(out.join("density"), e))?;
        d.write_csv(&csv, &header)?;
        let run = DensityRun {
            pair,
            params,
            interval,
            n_points: config.grid.n_points,
            key,
            relation: DENSITY_RELATION.to_string(),
            csv: rel(out, &csv),
        };
        let json = csv.with_extension("json");
        Artifact::new("density", &hash, &run).write(&json)?;
        res.files.extend([csv, json]);
        runs.push(run);
    }
    let manifest = out.join("density").join("manifest.json");
    Artifact::new("density manifest", &hash, DensityManifest { runs }).write(&manifest)?;
    res.files.push(manifest);
    res.messages.push(format!("{} densities ({} from cache)", res.computed + res.cache_hits, res.cache_hits));
    Ok(res)
}

/// Upstream run for `pair`, checked against the current configuration.
fn find_run<'a, T>(runs: &'a [T], pair: CutoffPair, key: &str, get: impl Fn(&T) -> (CutoffPair, &str)) -> Option<&'a T> {
    runs.iter().find(|r| {
        let (p, k) = get(r);
        p == pair && k == key
    })
}

fn panel_rows(d: &Decomposition, f: &SampledDensity, gamma: f64) -> Result<Vec<Vec<f64>>> {
    f.grid
        .iter()
        .zip(&f.values)
        .zip(&d.remainder)
        .map(|((&x, &y), &r)| {
            let u = if d.uehling_scale != 0.0 { d.uehling_scale * u_position_with(x, gamma, d.uehling_form)? } else { 0.0 };
            let w1 = d.w1 / x;
            let w5 = d.w5 / x.powi(5);
            Ok(vec![x, y, y - d.c1 * x, d.oscillation(x), u, w1, u + w1, w5, r])
        })
        .collect()
}

/// Decomposes every density of the scan.
pub fn stage_decompose(config: &RunConfig) -> Result<StageOutput> {
    config.validate()?;
    let out = &config.output.dir;
    let hash = config.hash();
    let gamma = config.physics.gamma();
    let cache = cache_dir(out);
    let upstream: Artifact<DensityManifest> = Artifact::read(&out.join("density").join("manifest.json"), "density")?;
    let mut res = StageOutput::new("decompose");
    let mut runs = Vec::new();
    for pair in config.pairs() {
        let dk = density_key(config, pair);
        let src = find_run(&upstream.data.runs, pair, &dk, |r| (r.pair, r.key.as_str()))
            .ok_or_else(|| Error::MissingUpstream { stage: "density", path: out.join("density").join(format!("{}.csv", pair.tag())) })?;
        let csv_path = out.join(&src.csv);
        if !csv_path.exists() {
            return Err(Error::MissingUpstream { stage: "density", path: csv_path });
        }
        let (xs, ys) = SampledDensity::read_csv(&csv_path)?;
        let f = SampledDensity::from_samples(xs, ys)?;
        let key = decompose_key(config, pair);
        let (d, hit): (Decomposition, bool) = cached(&cache, &format!("decompose-{key}"), || {
            log::info!("decompose {}", pair.tag());
            decompose(&f, gamma, &config.decompose)
        })?;
        if hit {
            res.cache_hits += 1;
        } else {
            res.computed += 1;
        }
        let dir = out.join("decompose");
        let json = dir.join(format!("{}.json", pair.tag()));
        Artifact::new("decomposition", &hash, &d).write(&json)?;
        let panels = dir.join(format!("{}.csv", pair.tag()));
        let mut header = provenance("decomposition panels", &hash);
        header.push(format!("Lambda/gamma {} Lambda0 {}", pair.lambda_over_gamma, pair.lambda0));
        write_table(
            &panels,
            &header,
            &["x", "y", "y_minus_linear", "oscillation", "uehling", "w1_term", "uehling_plus_w1", "w5_term", "remainder"],
            &panel_rows(&d, &f, gamma)?,
        )?;
        res.messages.push(format!(
            "{}: w5 = {:.6e}, remainder {:.4}, {} frequencies",
            pair.tag(),
            d.w5,
            d.remainder_norm,
            d.oscillations.len()
        ));
        runs.push(DecomposeRun {
            pair,
            lambda: src.params.lambda,
            lambda0: src.params.lambda0,
            key,
            c1: d.c1,
            w1: d.w1,
            w5: d.w5,
            uehling_scale: d.uehling_scale,
            frequencies: d.oscillations.iter().map(|o| o.omega).collect(),
            remainder_norm: d.remainder_norm,
            oscillation_norm: d.oscillation_norm,
            json: rel(out, &json),
            panels: rel(out, &panels),
        });
        res.files.extend([json, panels]);
    }
    let manifest = out.join("decompose").join("manifest.json");
    Artifact::new("decomposition manifest", &hash, DecomposeManifest { gamma, runs }).write(&manifest)?;
    res.files.push(manifest);
    Ok(res)
}

/// Λ₀ → ∞ limits and, when the curve covers every knot interval, the piecewise fit.
pub fn stage_extrapolate(config: &RunConfig) -> Result<StageOutput> {
    config.validate()?;
    let out = &config.output.dir;
    let hash = config.hash();
    let gamma = config.physics.gamma();
    let upstream: Artifact<DecomposeManifest> =
        Artifact::read(&out.join("decompose").join("manifest.json"), "decompose")?;
    let mut samples = Vec::new();
    for pair in config.pairs() {
        let key = decompose_key(config, pair);
        let run = find_run(&upstream.data.runs, pair, &key, |r| (r.pair, r.key.as_str()))
            .ok_or_else(|| Error::MissingUpstream { stage: "decompose", path: out.join("decompose").join(format!("{}.json", pair.tag())) })?;
        samples.push(W5Sample { lambda: run.lambda, lambda0: run.lambda0, w5: run.w5 });
    }
    let fit = extrapolate(&W5Samples { entries: samples.clone() }, &config.extrapolate.options())?;
    let curve = curve_from_limits(&fit.limits, gamma);
    let (piecewise, piecewise_note) = if config.extrapolate.knots.is_empty() {
        (None, Some("no knots configured".to_string()))
    } else {
        match fit_piecewise(&curve, &config.extrapolate.knots) {
            Ok(p) => (Some(p), None),
            Err(e) => (None, Some(format!("piecewise fit skipped: {e}"))),
        }
    };
    let mut res = StageOutput::new("extrapolate");
    res.messages.push(format!("beta = {:.6}, eta = {:.6}", fit.beta, fit.eta));
    for l in &fit.limits {
        res.messages.push(format!("x = {:.4}: w5_inf = {:.6e}", l.lambda / gamma, l.w5_inf));
    }
    if let Some(n) = &piecewise_note {
        res.messages.push(n.clone());
    }
    res.messages.extend(fit.warnings.iter().map(|w| format!("warning: {w}")));

    let dir = out.join("extrapolate");
    let sample_rows: Vec<Vec<f64>> = {
        let mut s = samples.clone();
        s.sort_by(|a, b| a.lambda.total_cmp(&b.lambda).then(a.lambda0.total_cmp(&b.lambda0)));
        s.iter()
            .map(|e| {
                let limit = fit.limits.iter().find(|l| l.lambda == e.lambda).map_or(f64::NAN, |l| l.w5_inf);
                vec![e.lambda, e.lambda / gamma, e.lambda0, e.w5, limit + fit.beta * e.lambda0.powf(-fit.eta)]
            })
            .collect()
    };
    let samples_csv = dir.join("w5_samples.csv");
    write_table(
        &samples_csv,
        &provenance("w5 samples and fitted model", &hash),
        &["lambda", "x", "lambda0", "w5", "w5_model"],
        &sample_rows,
    )?;
    let limits_csv = dir.join("w5_limits.csv");
    let limit_rows: Vec<Vec<f64>> = fit.limits.iter().map(|l| vec![l.lambda, l.lambda / gamma, l.w5_inf]).collect();
    write_table(&limits_csv, &provenance("w5 limits", &hash), &["lambda", "x", "w5_inf"], &limit_rows)?;
    let json = dir.join("extrapolation.json");
    let report = ExtrapolationReport { gamma, samples, fit, curve, piecewise, piecewise_note };
    Artifact::new("extrapolation", &hash, &report).write(&json)?;
    res.files.extend([json, samples_csv, limits_csv]);
    res.computed = 1;
    Ok(res)
}

fn flow_fit(config: &RunConfig) -> Result<PiecewiseW5> {
    match config.flow.fit {
        FitSource::Published => Ok(PiecewiseW5::reference()),
        FitSource::Extrapolated => {
            let path = config.output.dir.join("extrapolate").join("extrapolation.json");
            let a: Artifact<ExtrapolationReport> = Artifact::read(&path, "extrapolate")?;
            a.data.piecewise.ok_or_else(|| {
                Error::Config(format!(
                    "{} has no piecewise fit ({}); use flow.fit = \"published\"",
                    path.display(),
                    a.data.piecewise_note.unwrap_or_default()
                ))
            })
        }
    }
}

/// Integrates the flow for the atom (configured spectrum) or the ion.
pub fn stage_flow(config: &RunConfig, system: FlowSystem) -> Result<StageOutput> {
    config.validate()?;
    let out = &config.output.dir;
    let hash = config.hash();
    let gamma = config.physics.gamma();
    let fit = flow_fit(config)?;
    let report = match system {
        FlowSystem::Atom => {
            let (spectrum, name) = match &config.flow.spectrum {
                Some(p) => (SpectrumTable::read_csv(p)?, p.display().to_string()),
                None => (SpectrumTable::uranium(), "bundled uranium".to_string()),
            };
            let r = integrate_flow(&fit, &spectrum, gamma, config.flow.intervals, config.flow.trajectory_samples)?;
            let tail = remainder_estimate(&fit, config.physics.charge, config.flow.remainder_cut)?;
            let with_tail = r.nu5_final - tail;
            FlowReport {
                system,
                spectrum: name,
                charge: config.physics.charge,
                gamma,
                intervals: r.intervals,
                fit_source: config.flow.fit,
                fit: fit.clone(),
                ratios: r.ratios,
                nu5: r.nu5_final,
                density_at_one: density(r.nu5_final, 1.0)?,
                remainder: Some(tail),
                nu5_with_tail: Some(with_tail),
                density_with_tail_at_one: Some(density(with_tail, 1.0)?),
                trajectory: r.trajectory,
            }
        }
        FlowSystem::Ion => {
            let r = coulomb_flow(&fit, gamma, config.flow.coulomb_intervals)?;
            FlowReport {
                system,
                spectrum: "coulomb".to_string(),
                charge: config.physics.charge,
                gamma,
                intervals: r.intervals,
                fit_source: config.flow.fit,
                fit: fit.clone(),
                ratios: r.ratios,
                nu5: r.nu5_final,
                density_at_one: density(r.nu5_final, 1.0)?,
                remainder: None,
                nu5_with_tail: None,
                density_with_tail_at_one: None,
                trajectory: r.trajectory,
            }
        }
    };
    let dir = out.join("flow");
    let name = system.name();
    let json = dir.join(format!("{name}.json"));
    Artifact::new("flow", &hash, &report).write(&json)?;
    let rows: Vec<Vec<f64>> = report
        .trajectory
        .iter()
        .map(|p| {
            let w = fit.eval_extended(p.x)?;
            Ok(vec![p.x, p.omega, p.nu5, w, w - p.nu5])
        })
        .collect::<Result<_>>()?;
    let csv = dir.join(format!("{name}.csv"));
    write_table(&csv, &provenance(&format!("flow {name}"), &hash), &["x", "omega", "nu5", "w5", "w5_minus_nu5"], &rows)?;
    let mut res = StageOutput::new("flow");
    res.messages.push(format!("{name}: nu5 = {:.6e}, density(r = 1) = {:.4e}", report.nu5, report.density_at_one));
    if let (Some(t), Some(n), Some(d)) = (report.remainder, report.nu5_with_tail, report.density_with_tail_at_one) {
        res.messages.push(format!("{name}: tail {t:.4e}, nu5 with tail = {n:.6e}, density(r = 1) = {d:.4e}"));
    }
    res.files.extend([json, csv]);
    res.computed = 1;
    Ok(res)
}

/// Side-by-side summary of the atom and ion flows plus figure data.
pub fn stage_report(config: &RunConfig) -> Result<StageOutput> {
    config.validate()?;
    let out = &config.output.dir;
    let hash = config.hash();
    let atom: Artifact<FlowReport> = Artifact::read(&out.join("flow").join("atom.json"), "flow")?;
    let ion: Artifact<FlowReport> = Artifact::read(&out.join("flow").join("ion.json"), "flow --coulomb")?;
    let (atom, ion) = (atom.data, ion.data);

    let mut rows = vec![
        SummaryRow { label: format!("atom, {} intervals", atom.intervals), nu5: Some(atom.nu5), density_at_one: atom.density_at_one },
    ];
    if let (Some(n), Some(d)) = (atom.nu5_with_tail, atom.density_with_tail_at_one) {
        rows.push(SummaryRow { label: "atom, with tail".to_string(), nu5: Some(n), density_at_one: d });
    }
    rows.push(SummaryRow { label: "one-electron ion".to_string(), nu5: Some(ion.nu5), density_at_one: ion.density_at_one });
    rows.push(SummaryRow {
        label: "Wichmann-Kroll, one electron".to_string(),
        nu5: None,
        density_at_one: WICHMANN_KROLL_DENSITY_AT_ONE,
    });

    let dir = out.join("report");
    let mut text = String::new();
    for line in provenance("summary", &hash) {
        text.push_str(&format!("# {line}\n"));
    }
    text.push_str(&format!("{:<32} {:>14} {:>16}\n", "system", "nu5", "density(r = 1)"));
    for r in &rows {
        let nu5 = r.nu5.map_or("-".to_string(), |v| format!("{v:.6e}"));
        text.push_str(&format!("{:<32} {:>14} {:>16.4e}\n", r.label, nu5, r.density_at_one));
    }
    let txt = dir.join("summary.txt");
    write_atomic(&txt, text.as_bytes())?;

    let mut buf = Vec::new();
    for line in provenance("summary", &hash) {
        buf.extend_from_slice(format!("# {line}\n").as_bytes());
    }
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let err = |e: csv::Error| Error::Serde(e.to_string());
        w.write_record(["system", "nu5", "density_at_one"]).map_err(err)?;
        for r in &rows {
            let nu5 = r.nu5.map_or(String::new(), |v| format!("{v:?}"));
            w.write_record([r.label.clone(), nu5, format!("{:?}", r.density_at_one)]).map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(&dir, e))?;
    }
    let csv = dir.join("summary.csv");
    write_atomic(&csv, &buf)?;

    // ν₅ of the atom and 𝗐₅, which the ion follows exactly
    let flows: Vec<Vec<f64>> = atom
        .trajectory
        .iter()
        .map(|p| {
            let w = atom.fit.eval_extended(p.x)?;
            Ok(vec![p.x, p.omega, p.nu5, w])
        })
        .collect::<Result<_>>()?;
    let flows_csv = dir.join("flows.csv");
    write_table(&flows_csv, &provenance("nu5 and w5 flows", &hash), &["x", "omega", "nu5_atom", "w5"], &flows)?;

    let mut panels = Vec::new();
    if let Ok(m) = Artifact::<DecomposeManifest>::read(&out.join("decompose").join("manifest.json"), "decompose") {
        panels = m.data.runs.iter().map(|r| r.panels.clone()).collect();
    }
    let extrapolation = Artifact::<ExtrapolationReport>::read(&out.join("extrapolate").join("extrapolation.json"), "extrapolate")
        .ok()
        .map(|a| (a.data.fit.beta, a.data.fit.eta));
    let json = dir.join("summary.json");
    #[derive(Serialize)]
    struct Summary<'a> {
        rows: &'a [SummaryRow],
        atom_spectrum: &'a str,
        decomposition_panels: Vec<String>,
        extrapolation_beta_eta: Option<(f64, f64)>,
    }
    let summary = Summary { rows: &rows, atom_spectrum: &atom.spectrum, decomposition_panels: panels, extrapolation_beta_eta: extrapolation };
    Artifact::new("summary", &hash, &summary).write(&json)?;

    let mut res = StageOutput::new("report");
    res.messages.extend(text.lines().filter(|l| !l.starts_with('#')).map(str::to_string));
    res.files.extend([txt, csv, json, flows_csv]);
    res.computed = 1;
    Ok(res)
}

/// Runs the configured stages in pipeline order.
pub fn run_stages(config: &RunConfig) -> Result<Vec<StageOutput>> {
    config.validate()?;
    let mut outputs = Vec::new();
    for stage in StageName::ALL {
        if !config.stages.contains(&stage) {
            continue;
        }
        match stage {
            StageName::Density => outputs.push(stage_density(config)?),
            StageName::Decompose => outputs.push(stage_decompose(config)?),
            StageName::Extrapolate => outputs.push(stage_extrapolate(config)?),
            StageName::Flow => {
                outputs.push(stage_flow(config, FlowSystem::Atom)?);
                outputs.push(stage_flow(config, FlowSystem::Ion)?);
            }
            StageName::Report => outputs.push(stage_report(config)?),
        }
    }
    Ok(outputs)
}
