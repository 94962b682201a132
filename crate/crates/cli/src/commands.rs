//! Subcommand execution. Each subcommand maps to one entry point of the core
//! crate, prints a one-line summary per radius or sweep point, and writes its
//! artifacts through [`Writer`].

use crate::config::{ConfigError, ExperimentConfig, Family, ModelConfig};
use crate::output::{cplx, Writer};
use fas_core::fluxfas::{cone_partition, fas_verify, flux_series, ConeSurface, TimeHorizon, TimeOptions};
use fas_core::lsradial::{
    jk_residue_extract, outgoing_state_potential, resonance_scan, solve_radial, zero_energy_solve, PotentialModel, PotentialSpec,
    ZeroEnergyClass,
};
use fas_core::pointmodel::{decay_profile, outgoing_state_point, project_ac, PointInteraction, SpectralOptions, SpectralState, WavePacket};
use fas_core::specfun::log_space;
use fas_core::FasError;
use serde_json::json;
use std::path::Path;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::Subcommand)]
pub enum Command {
    /// Time-integrated flux against the cone probability for each radius
    Fas,
    /// Outgoing state: norm, singular coefficient, momentum spectrum
    Outstate,
    /// Zero-energy classification over a coupling sweep
    ResonanceScan,
    /// Decay exponents of the scattered momentum amplitude
    DecayCheck,
    /// Low-energy pole of the generalized eigenfunctions
    JkResidue,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Fas => "fas",
            Command::Outstate => "outstate",
            Command::ResonanceScan => "resonance-scan",
            Command::DecayCheck => "decay-check",
            Command::JkResidue => "jk-residue",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{operation} failed: {source}")]
    Numerical { operation: String, source: FasError },
    #[error(transparent)]
    Io(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical { .. } => 3,
            CliError::Io(_) => 1,
        }
    }
}

fn num(operation: &str) -> impl Fn(FasError) -> CliError + '_ {
    move |source| CliError::Numerical { operation: operation.to_string(), source }
}

fn config_err(key: &str, message: impl Into<String>) -> CliError {
    CliError::Config(ConfigError { key: key.into(), message: message.into() })
}

fn spectral_options(cfg: &ExperimentConfig) -> SpectralOptions {
    let n = &cfg.numerics;
    SpectralOptions { tail_tol: n.tail_tol, degree: n.degree, fit_tol: n.fit_tol }
}

fn read_table(path: &Path) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let key = "model.potential.family.table.path";
    let text = std::fs::read_to_string(path).map_err(|e| config_err(key, format!("{}: {e}", path.display())))?;
    let (mut r, mut v) = (Vec::new(), Vec::new());
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        let parsed: Option<Vec<f64>> = cols.iter().map(|c| c.parse().ok()).collect();
        match parsed.as_deref() {
            Some([a, b]) => {
                r.push(*a);
                v.push(*b);
            }
            _ => return Err(config_err(key, format!("{} line {}: expected two numbers", path.display(), i + 1))),
        }
    }
    Ok((r, v))
}

/// Potential of the configured family, scaled by its coupling.
pub fn potential_spec(cfg: &ExperimentConfig) -> Result<PotentialSpec, CliError> {
    let ModelConfig::Potential(p) = &cfg.model else {
        return Err(config_err("model", "this subcommand needs a potential model"));
    };
    let spec = match &p.family {
        Family::Bargmann { b } => PotentialSpec::bargmann(*b).map_err(|e| config_err("model.potential.family.bargmann", e.to_string()))?,
        Family::GaussianWell { depth, width } => {
            PotentialSpec::gaussian_well(*depth, *width).map_err(|e| config_err("model.potential.family.gaussian_well", e.to_string()))?
        }
        Family::Table { path } => {
            let (r, v) = read_table(path)?;
            PotentialSpec::tabulated(r, v).map_err(|e| config_err("model.potential.family.table.path", e.to_string()))?
        }
    };
    Ok(spec.scaled(p.lambda))
}

fn potential_model(cfg: &ExperimentConfig) -> Result<PotentialModel, CliError> {
    PotentialModel::with_step(potential_spec(cfg)?, cfg.numerics.potential_step).map_err(num("potential model"))
}

/// Outgoing state of the configured packet and model.
pub fn build_state(cfg: &ExperimentConfig) -> Result<SpectralState, CliError> {
    let p = &cfg.packet;
    let packet = WavePacket::gaussian(p.sigma, p.shell_offset, p.boost).map_err(|e| config_err("packet", e.to_string()))?;
    let opts = spectral_options(cfg);
    match &cfg.model {
        ModelConfig::Free => outgoing_state_point(&packet, &PointInteraction::free(), &opts).map_err(num("outgoing_state_point")),
        ModelConfig::Point { gamma } => {
            let pi = PointInteraction::new(*gamma).map_err(|e| config_err("model.point.gamma", e.to_string()))?;
            let packet = project_ac(&packet, &pi).map_err(num("project_ac"))?;
            outgoing_state_point(&packet, &pi, &opts).map_err(num("outgoing_state_point"))
        }
        ModelConfig::Potential(_) => {
            let model = Arc::new(potential_model(cfg)?);
            outgoing_state_potential(&packet, &model, &opts).map_err(num("outgoing_state_potential"))
        }
    }
}

fn cone(cfg: &ExperimentConfig) -> Result<ConeSurface, CliError> {
    ConeSurface::new(cfg.cone.axis, cfg.cone.theta).map_err(|e| config_err("cone", e.to_string()))
}

fn class_name(c: ZeroEnergyClass) -> &'static str {
    match c {
        ZeroEnergyClass::Generic => "generic",
        ZeroEnergyClass::Resonance => "resonance",
        ZeroEnergyClass::Eigenvalue => "eigenvalue",
        ZeroEnergyClass::Indeterminate => "indeterminate",
    }
}

fn class_code(c: ZeroEnergyClass) -> f64 {
    match c {
        ZeroEnergyClass::Generic => 0.0,
        ZeroEnergyClass::Resonance => 1.0,
        ZeroEnergyClass::Eigenvalue => 2.0,
        ZeroEnergyClass::Indeterminate => 3.0,
    }
}

fn radius_tag(r: f64) -> String {
    format!("{r}").replace('.', "p")
}

/// Run one subcommand, writing artifacts into `out`.
pub fn run(cmd: Command, cfg: &ExperimentConfig, out: &Path) -> Result<Vec<std::path::PathBuf>, CliError> {
    let mut w = Writer::new(out, &cfg.outputs.formats, cmd.name(), cfg);
    match cmd {
        Command::Fas => fas(cfg, &mut w)?,
        Command::Outstate => outstate(cfg, &mut w)?,
        Command::ResonanceScan => scan(cfg, &mut w)?,
        Command::DecayCheck => decay(cfg, &mut w)?,
        Command::JkResidue => jk(cfg, &mut w)?,
    }
    Ok(w.written)
}

fn fas(cfg: &ExperimentConfig, w: &mut Writer) -> Result<(), CliError> {
    let cone = cone(cfg)?;
    if cfg.radii.is_empty() {
        log::warn!("empty radius list: no report written");
        eprintln!("warning: empty radius list, nothing to report");
        return Ok(());
    }
    let st = build_state(cfg)?;
    let n = &cfg.numerics;
    let horizon = cfg.time.t2.map_or(TimeHorizon::Quadratic(cfg.time.t2_factor), TimeHorizon::Fixed);
    let topts = TimeOptions { abs_tol: n.time_abs_tol, rel_tol: n.time_rel_tol, max_intervals: n.max_intervals };
    let report = fas_verify(&st, &cone, &cfg.radii, cfg.time.t1, horizon, &topts).map_err(num("fas_verify"))?;
    let part = cone_partition(&st, &cone);
    let mut series = Vec::new();
    for e in &report.entries {
        println!(
            "R = {:<8} T2 = {:<10} lhs = {:.10}  rhs = {:.10}  rel_error = {:.3e}  tail = {:.3e}  cross = {:.4e}",
            e.radius, e.t2, e.lhs, e.rhs, e.rel_error, e.tail_estimate, e.lhs_abs
        );
        let s = flux_series(&st, e.radius, &cone, cfg.time.t1, e.t2, cfg.time.series_points - 1)
            .map_err(|err| num(&format!("flux_series at R = {}", e.radius))(err))?;
        series.push(s);
    }
    for s in &series {
        let rows: Vec<Vec<f64>> = (0..s.times.len()).map(|i| vec![s.times[i], s.flux[i], s.cumulative[i]]).collect();
        let name = format!("flux_R{}", radius_tag(s.radius));
        w.table(&name, &["t", "flux", "cumulative"], &rows)?;
    }
    let conv: Vec<Vec<f64>> = report.entries.iter().map(|e| vec![e.radius, e.rel_error, e.lhs, e.rhs, e.lhs_abs, e.tail_estimate]).collect();
    w.gnuplot("convergence", &["R", "rel_error", "lhs", "rhs", "lhs_abs", "tail_estimate"], &conv)?;
    let entries: Vec<_> = report
        .entries
        .iter()
        .map(|e| {
            json!({
                "R": e.radius, "t2": e.t2, "lhs": e.lhs, "lhs_abs": e.lhs_abs, "rhs": e.rhs,
                "rel_error": e.rel_error, "tail_estimate": e.tail_estimate, "envelope_exponent": finite_or_null(e.envelope_exponent),
            })
        })
        .collect();
    w.json(json!({
        "state": state_summary(&st),
        "cone_partition": { "inside": part.inside, "outside": part.outside },
        "t1": report.t1,
        "entries": entries,
        "rel_error_decreasing": report.rel_error_decreasing(),
        "cross_decreasing": (!st.is_free()).then(|| report.cross_decreasing()),
        "cross_decay_rate": report.cross_decay_rate.filter(|_| !st.is_free()).map(finite_or_null),
    }))
}

fn finite_or_null(x: f64) -> serde_json::Value {
    if x.is_finite() {
        json!(x)
    } else {
        serde_json::Value::Null
    }
}

fn state_summary(st: &SpectralState) -> serde_json::Value {
    json!({
        "norm_sq": st.norm_sq(),
        "k_max": st.k_max,
        "singular_coefficient": cplx(st.singular_coefficient),
        "laurent_c": cplx(st.laurent_c),
        "interaction_radius": st.interaction_radius(),
        "free": st.is_free(),
    })
}

fn outstate(cfg: &ExperimentConfig, w: &mut Writer) -> Result<(), CliError> {
    let st = build_state(cfg)?;
    let cone = cone(cfg)?;
    let part = cone_partition(&st, &cone);
    let r = st.singular_coefficient;
    println!(
        "norm = {:.12}  k_max = {}  r = {:.6e}{:+.6e}i  cone = {:.10} / {:.10}",
        st.norm_sq(),
        st.k_max,
        r.re,
        r.im,
        part.inside,
        part.outside
    );
    let ks = log_space(1e-4, st.k_max, (cfg.numerics.spectrum_points as f64 / (st.k_max / 1e-4).log10()).ceil() as usize);
    let rows: Vec<Vec<f64>> = ks.iter().map(|&k| vec![k, st.psi_out_s(k).norm(), r.norm() / k]).collect();
    w.gnuplot("spectrum", &["k", "abs_psi_out_s", "abs_r_over_k"], &rows)?;
    let mut deltas = Vec::new();
    if matches!(cfg.model, ModelConfig::Potential(_)) {
        let model = potential_model(cfg)?;
        for &k in &log_space(1e-2, 10.0, 20) {
            let sol = solve_radial(k, &model).map_err(|e| num(&format!("solve_radial at k = {k}"))(e))?;
            deltas.push(vec![k, sol.delta]);
        }
        w.gnuplot("delta", &["k", "delta0"], &deltas)?;
    }
    w.json(json!({
        "state": state_summary(&st),
        "cone_partition": { "inside": part.inside, "outside": part.outside },
        "phase_shift": deltas.iter().map(|d| json!({ "k": d[0], "delta0": d[1] })).collect::<Vec<_>>(),
    }))
}

fn scan(cfg: &ExperimentConfig, w: &mut Writer) -> Result<(), CliError> {
    let spec = potential_spec(cfg)?;
    let lambdas = cfg.scan.lambdas();
    let res = resonance_scan(&spec, &lambdas, cfg.numerics.potential_step).map_err(num("resonance_scan"))?;
    for p in &res.points {
        println!("lambda = {:.6}  class = {:<13} bound_states = {}  ratio = {:.4e}", p.lambda, class_name(p.class), p.bound_states, p.ratio);
    }
    for t in &res.transitions {
        println!("transition at lambda = {t:.6}");
    }
    let rows: Vec<Vec<f64>> = res.points.iter().map(|p| vec![p.lambda, p.ratio, p.bound_states as f64, class_code(p.class)]).collect();
    w.table("scan", &["lambda", "ratio", "bound_states", "class_code"], &rows)?;
    w.json(json!({
        "class_codes": { "generic": 0, "resonance": 1, "eigenvalue": 2, "indeterminate": 3 },
        "points": res.points.iter().map(|p| json!({
            "lambda": p.lambda, "ratio": p.ratio, "class": class_name(p.class), "bound_states": p.bound_states,
        })).collect::<Vec<_>>(),
        "transitions": res.transitions,
    }))
}

fn decay(cfg: &ExperimentConfig, w: &mut Writer) -> Result<(), CliError> {
    if matches!(cfg.model, ModelConfig::Potential(_)) {
        return Err(config_err("model", "decay-check needs the free or point model"));
    }
    let st = build_state(cfg)?;
    let prof = decay_profile(&st, &cfg.decay.orders, cfg.decay.k_hi).map_err(num("decay_profile"))?;
    for f in &prof.fits {
        println!("m = {}  slope = {:.4}  expected = {}  constant = {:.4e}", f.order, f.slope, -(3.0 + f.order as f64), f.constant);
    }
    if !prof.singular {
        println!("no scattered part: slopes are not meaningful");
    }
    let rows: Vec<Vec<f64>> = prof.fits.iter().map(|f| vec![f.order as f64, f.slope, -(3.0 + f.order as f64), f.constant]).collect();
    w.gnuplot("decay", &["m", "slope", "expected", "constant"], &rows)?;
    w.json(json!({
        "singular": prof.singular,
        "k_range": [prof.k_range.0, prof.k_range.1],
        "fits": prof.fits.iter().map(|f| json!({
            "order": f.order, "slope": finite_or_null(f.slope), "expected": -(3.0 + f.order as f64), "constant": finite_or_null(f.constant),
        })).collect::<Vec<_>>(),
    }))
}

fn jk(cfg: &ExperimentConfig, w: &mut Writer) -> Result<(), CliError> {
    let model = potential_model(cfg)?;
    let prof = zero_energy_solve(&model, 0).map_err(num("zero_energy_solve"))?;
    let res = jk_residue_extract(&model, &prof, &cfg.jk.momenta, &cfg.jk.radii).map_err(num("jk_residue_extract"))?;
    for s in &res.samples {
        println!("k = {:.3e}  pole_deviation = {:.4e}  remainder = {:.4e}", s.k, s.pole_deviation, s.remainder);
    }
    println!("extrapolated deviation = {:.4e}  r0 = {:.6}{:+.6}i", res.extrapolated_deviation, res.r0.re, res.r0.im);
    let rows: Vec<Vec<f64>> = res.samples.iter().map(|s| vec![s.k, s.pole_deviation, s.remainder]).collect();
    w.gnuplot("jk", &["k", "pole_deviation", "remainder"], &rows)?;
    w.json(json!({
        "class": class_name(prof.class),
        "discriminant": prof.discriminant,
        "r0": cplx(res.r0),
        "extrapolated_deviation": res.extrapolated_deviation,
        "samples": res.samples.iter().map(|s| json!({
            "k": s.k, "pole_deviation": s.pole_deviation, "remainder": s.remainder,
        })).collect::<Vec<_>>(),
    }))
}
