//! Probability current through sections of a sphere, its time integral, the
//! momentum-space cone probability and their comparison.

use crate::pointmodel::{current, FieldSample, PointInteraction, SpectralState, FOUR_PI};
use crate::quadrature::{gauss_legendre, integrate_adaptive, OscSettings};
use crate::{accuracy, FasError, Result};
use rayon::prelude::*;
use std::f64::consts::PI;

pub use crate::specfun::{homogeneity_check, HomogeneityResult, Lattice};

/// Section of the sphere cut out by a circular cone around `axis`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeSurface {
    pub axis: [f64; 3],
    /// half-angle in `(0, pi]`; `pi` is the whole sphere
    pub half_angle: f64,
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

impl ConeSurface {
    pub fn new(axis: [f64; 3], half_angle: f64) -> Result<ConeSurface> {
        let n = norm3(axis);
        if !(n > 0.0 && n.is_finite()) {
            return Err(FasError::InvalidInput("cone axis must be a nonzero finite vector".into()));
        }
        if !(half_angle > 0.0 && half_angle <= PI) {
            return Err(FasError::InvalidInput(format!("cone half-angle {half_angle} outside (0, pi]")));
        }
        Ok(ConeSurface { axis: [axis[0] / n, axis[1] / n, axis[2] / n], half_angle })
    }

    pub fn full_sphere() -> ConeSurface {
        ConeSurface { axis: [0.0, 0.0, 1.0], half_angle: PI }
    }

    pub fn solid_angle(&self) -> f64 {
        2.0 * PI * (1.0 - self.half_angle.cos())
    }

    pub fn is_full(&self) -> bool {
        self.half_angle >= PI
    }

    /// The opposite cone covering the rest of the sphere.
    pub fn complement(&self) -> Option<ConeSurface> {
        (!self.is_full()).then(|| ConeSurface { axis: [-self.axis[0], -self.axis[1], -self.axis[2]], half_angle: PI - self.half_angle })
    }

    fn frame(&self) -> ([f64; 3], [f64; 3]) {
        let a = self.axis;
        let t = if a[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        let d = dot3(t, a);
        let mut e1 = [t[0] - d * a[0], t[1] - d * a[1], t[2] - d * a[2]];
        let n = norm3(e1);
        e1 = [e1[0] / n, e1[1] / n, e1[2] / n];
        let e2 = [a[1] * e1[2] - a[2] * e1[1], a[2] * e1[0] - a[0] * e1[2], a[0] * e1[1] - a[1] * e1[0]];
        (e1, e2)
    }

    /// Unit directions and solid-angle weights covering the cap. With
    /// `azimuthal = false` one node per polar ring is used.
    pub fn angular_rule(&self, azimuthal: bool) -> Vec<([f64; 3], f64)> {
        let (e1, e2) = self.frame();
        let a = self.axis;
        let lo = self.half_angle.cos();
        let panels = 8;
        let rule = gauss_legendre(16);
        let nphi = if azimuthal { 48 } else { 1 };
        let mut out = Vec::with_capacity(panels * 16 * nphi);
        let h = (1.0 - lo) / panels as f64;
        for p in 0..panels {
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                let mu = lo + (p as f64 + 0.5 + 0.5 * x) * h;
                let s = (1.0 - mu * mu).max(0.0).sqrt();
                for j in 0..nphi {
                    let phi = 2.0 * PI * j as f64 / nphi as f64;
                    let (c, sn) = (phi.cos(), phi.sin());
                    let d = [
                        s * (c * e1[0] + sn * e2[0]) + mu * a[0],
                        s * (c * e1[1] + sn * e2[1]) + mu * a[1],
                        s * (c * e1[2] + sn * e2[2]) + mu * a[2],
                    ];
                    out.push((d, 0.5 * h * w * 2.0 * PI / nphi as f64));
                }
            }
        }
        out
    }
}

/// Anything whose wave function and radial derivative can be sampled.
pub trait FieldState: Sync {
    /// s-wave sample at radius `r`
    fn radial(&self, r: f64, t: f64) -> Result<FieldSample>;
    /// full sample at `x` given the s-wave sample at `|x|`
    fn at(&self, swave: &FieldSample, x: [f64; 3], t: f64) -> FieldSample;
    /// `None` for radial states
    fn symmetry_axis(&self) -> Option<[f64; 3]>;
}

impl FieldState for SpectralState {
    fn radial(&self, r: f64, t: f64) -> Result<FieldSample> {
        if r < self.interaction_radius() {
            return Err(FasError::Domain(format!("radius {r} inside the potential range {}", self.interaction_radius())));
        }
        let s = self.radial_sample(r, t, &OscSettings::default());
        if !(s.psi().re.is_finite() && s.d_psi().re.is_finite()) {
            return Err(FasError::Numerical(format!("non-finite field at (r, t) = ({r}, {t})")));
        }
        Ok(s)
    }

    fn at(&self, swave: &FieldSample, x: [f64; 3], t: f64) -> FieldSample {
        self.sample_with(swave, x, t)
    }

    fn symmetry_axis(&self) -> Option<[f64; 3]> {
        self.packet.boost()
    }
}

/// Normalized bound state of the point interaction, `exp(i kappa^2 t) phi_b`.
#[derive(Debug, Clone, Copy)]
pub struct BoundStateField {
    pub interaction: PointInteraction,
}

impl FieldState for BoundStateField {
    fn radial(&self, r: f64, t: f64) -> Result<FieldSample> {
        let kappa = self.interaction.kappa().ok_or_else(|| FasError::Domain("no bound state".into()))?;
        let phase = crate::Complex::new(0.0, kappa * kappa * t).exp();
        let v = self.interaction.bound_state(r).unwrap();
        let d = v * (-kappa - 1.0 / r);
        Ok(FieldSample { alpha: phase * v, d_alpha: phase * d, ..Default::default() })
    }

    fn at(&self, swave: &FieldSample, _x: [f64; 3], _t: f64) -> FieldSample {
        *swave
    }

    fn symmetry_axis(&self) -> Option<[f64; 3]> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FluxMode {
    /// `j . n`
    Signed,
    /// `|j . n|`
    Absolute,
    /// `|j1 . n|` for the cross terms between free and scattered parts
    CrossAbsolute,
}

/// Continuity under `H = -Laplacian` carries a factor 2 on `Im(psi* grad psi)`.
pub const FLUX_FACTOR: f64 = 2.0;

fn density(s: &FieldSample, mode: FluxMode) -> f64 {
    FLUX_FACTOR
        * match mode {
            FluxMode::Signed => s.current(),
            FluxMode::Absolute => s.current().abs(),
            FluxMode::CrossAbsolute => s.cross_current().abs(),
        }
}

/// `2 int_{Sigma_R} j . n dsigma` (or its absolute variants) at time `t`.
pub fn surface_flux(state: &dyn FieldState, r: f64, t: f64, cone: &ConeSurface, mode: FluxMode) -> Result<f64> {
    if !(r > 0.0) {
        return Err(FasError::InvalidInput(format!("flux radius {r}")));
    }
    let sw = state.radial(r, t)?;
    match state.symmetry_axis() {
        None => Ok(cone.solid_angle() * r * r * density(&sw, mode)),
        Some(axis) => {
            let parallel = (dot3(axis, cone.axis).abs() - norm3(axis)).abs() < 1e-12 * norm3(axis);
            let mut s = 0.0;
            for (d, w) in cone.angular_rule(!parallel) {
                let x = [r * d[0], r * d[1], r * d[2]];
                s += w * density(&state.at(&sw, x, t), mode);
            }
            Ok(r * r * s)
        }
    }
}

/// Flux samples on a time grid with the running integral.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxSeries {
    pub radius: f64,
    pub times: Vec<f64>,
    pub flux: Vec<f64>,
    pub cumulative: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeIntegral {
    pub integral: f64,
    pub tail_estimate: f64,
    /// fitted exponent `p` of the `t^-p` envelope
    pub envelope_exponent: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for TimeOptions {
    fn default() -> Self {
        TimeOptions { abs_tol: 1e-8, rel_tol: 1e-6, max_intervals: 20000 }
    }
}

fn time_breakpoints(r: f64, t1: f64, t2: f64, k_fast: f64) -> Vec<f64> {
    let mut b = vec![t1];
    let mut t = (r / (2.0 * k_fast)).max(t1 + 1e-3 * (t2 - t1));
    while t < t2 {
        if t > t1 {
            b.push(t);
        }
        t *= 1.25;
    }
    b.push(t2);
    b
}

/// `int_{T1}^{T2} dt` of [`surface_flux`] plus an envelope estimate of the
/// remaining `t > T2` contribution.
pub fn time_integrated_flux(
    state: &dyn FieldState,
    r: f64,
    cone: &ConeSurface,
    t1: f64,
    t2: f64,
    mode: FluxMode,
    k_fast: f64,
    opts: &TimeOptions,
) -> Result<TimeIntegral> {
    if !(t1 >= 0.0 && t2 > t1) {
        return Err(FasError::InvalidInput(format!("time window [{t1}, {t2}]")));
    }
    let failure = std::sync::Mutex::new(None);
    let f = |t: f64| match surface_flux(state, r, t, cone, mode) {
        Ok(v) => vec![v],
        Err(e) => {
            failure.lock().unwrap().get_or_insert(e);
            vec![0.0]
        }
    };
    let bp = time_breakpoints(r, t1, t2, k_fast);
    let (v, _err) = integrate_adaptive(&f, &bp, opts.abs_tol, opts.rel_tol, opts.max_intervals)?;
    if let Some(e) = failure.lock().unwrap().take() {
        return Err(e);
    }
    let (tail, p) = tail_estimate(|t| f(t)[0], t2, 1e-3 * opts.abs_tol)?;
    if let Some(e) = failure.lock().unwrap().take() {
        return Err(e);
    }
    Ok(TimeIntegral { integral: v[0], tail_estimate: tail, envelope_exponent: p })
}

/// Fit `C t^-p` to `|flux|` on `[T2/4, T2]` and integrate it beyond `T2`.
/// A flux whose samples stay below `floor / T2` is reported as a zero tail.
pub fn tail_estimate(flux: impl Fn(f64) -> f64 + Sync, t2: f64, floor: f64) -> Result<(f64, f64)> {
    let ts: Vec<f64> = (0..9).map(|i| t2 / 4.0 * 4f64.powf(i as f64 / 8.0)).collect();
    let vals: Vec<f64> = ts.par_iter().map(|&t| flux(t)).collect();
    if vals.iter().all(|v| v.abs() * t2 <= floor) {
        return Ok((0.0, f64::INFINITY));
    }
    if vals.iter().any(|v| v.abs() < 1e-300) {
        return Err(accuracy("tail envelope fit: flux vanishes inside the fit window", 0.0));
    }
    let x: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let y: Vec<f64> = vals.iter().map(|v| v.abs().ln()).collect();
    let (slope, icpt) = crate::pointmodel::linear_fit(&x, &y);
    let p = -slope;
    if p < 1.1 {
        return Err(accuracy(format!("tail envelope exponent {p:.3} below 1.1"), p));
    }
    let c = icpt.exp();
    // the envelope must dominate the sampled values
    let scale = ts.iter().zip(&vals).map(|(t, v)| v.abs() / (c * t.powf(-p))).fold(1.0, f64::max);
    Ok((scale * c * t2.powf(1.0 - p) / (p - 1.0), p))
}

/// Flux sampled on a uniform time grid, cumulative integral by the trapezoid rule.
pub fn flux_series(state: &dyn FieldState, r: f64, cone: &ConeSurface, t1: f64, t2: f64, n: usize) -> Result<FluxSeries> {
    let times: Vec<f64> = (0..=n).map(|i| t1 + (t2 - t1) * i as f64 / n as f64).collect();
    let flux: Vec<f64> = times.par_iter().map(|&t| surface_flux(state, r, t, cone, FluxMode::Signed)).collect::<Result<_>>()?;
    let mut cumulative = vec![0.0; flux.len()];
    for i in 1..flux.len() {
        cumulative[i] = cumulative[i - 1] + 0.5 * (times[i] - times[i - 1]) * (flux[i] + flux[i - 1]);
    }
    Ok(FluxSeries { radius: r, times, flux, cumulative })
}

/// `int_{C} |psi_out(k)|^2 d^3k` and the same over the complementary cone,
/// evaluated on one shared node set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConePartition {
    pub inside: f64,
    pub outside: f64,
}

impl ConePartition {
    pub fn total(&self) -> f64 {
        self.inside + self.outside
    }
}

fn radial_rule(spec: &SpectralState) -> Vec<(f64, f64)> {
    let rule = gauss_legendre(32);
    let mut out = Vec::new();
    for w in spec.g().edges().windows(2) {
        let (c, h) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
        for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
            out.push((c + h * x, h * wt));
        }
    }
    out
}

pub fn cone_partition(spec: &SpectralState, cone: &ConeSurface) -> ConePartition {
    let ks = radial_rule(spec);
    let Some(axis) = spec.packet.boost() else {
        let s: f64 = ks.iter().map(|&(k, w)| w * spec.g().eval(k).norm_sqr()).sum();
        let frac = cone.solid_angle() / FOUR_PI;
        let ns = spec.norm_sq() - FOUR_PI * s;
        return ConePartition { inside: frac * (FOUR_PI * s + ns), outside: (1.0 - frac) * (FOUR_PI * s + ns) };
    };
    let parallel = (dot3(axis, cone.axis).abs() - norm3(axis)).abs() < 1e-12 * norm3(axis);
    let part = |c: &ConeSurface| -> f64 {
        let dirs = c.angular_rule(!parallel);
        ks.par_iter()
            .map(|&(k, w)| {
                let g = spec.g().eval(k);
                let mut s = 0.0;
                for (d, wd) in &dirs {
                    let kv = [k * d[0], k * d[1], k * d[2]];
                    // k^2 |psi_out|^2 = |g + k (psi_hat - psi_hat_s)|^2
                    s += wd * (g + k * spec.packet.non_s_hat(kv)).norm_sqr();
                }
                w * s
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum()
    };
    let inside = part(cone);
    let outside = cone.complement().map_or(0.0, |c| part(&c));
    ConePartition { inside, outside }
}

/// `P(Sigma, psi0) = int_{C(Sigma)} |psi_out(k)|^2 d^3k`
pub fn cone_probability(spec: &SpectralState, cone: &ConeSurface) -> f64 {
    cone_partition(spec, cone).inside
}

/// Momentum beyond which `4 pi int |g|^2 dk < tol`.
pub fn effective_momentum(spec: &SpectralState, tol: f64) -> f64 {
    let ks = radial_rule(spec);
    let mut acc = 0.0;
    for &(k, w) in ks.iter().rev() {
        acc += FOUR_PI * w * spec.g().eval(k).norm_sqr();
        if acc > tol {
            return k;
        }
    }
    0.0
}

/// `int_{C} |psi_t(x)|^2 d^3x` at time `t`.
pub fn dollard_probability(spec: &SpectralState, cone: &ConeSurface, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(FasError::InvalidInput(format!("Dollard time {t}")));
    }
    let k_eff = effective_momentum(spec, 1e-7);
    let spread = 10.0 * spec.packet.length_scale() + spec.packet.support_radius();
    let r_max = 2.0 * k_eff * t + spread;
    let residual = FOUR_PI * {
        let kc = (r_max - spread) / (2.0 * t.max(1e-300));
        radial_rule(spec).iter().filter(|(k, _)| *k > kc).map(|&(k, w)| w * spec.g().eval(k).norm_sqr()).sum::<f64>()
    };
    if residual > 1e-6 {
        return Err(accuracy("Dollard support truncation", residual));
    }
    let s = OscSettings::default();
    let r_v = spec.interaction_radius();
    let mut inner = 0.0;
    if let Some((nodes, weights)) = spec.interior_nodes() {
        inner = nodes
            .par_iter()
            .enumerate()
            .map(|(i, &r)| weights[i] * r * r * spec.interior_node_value(i, t, &s).norm_sqr())
            .collect::<Vec<f64>>()
            .iter()
            .sum::<f64>();
    }
    let axis = spec.packet.boost();
    let parallel = axis.map_or(true, |a| (dot3(a, cone.axis).abs() - norm3(a)).abs() < 1e-12 * norm3(a));
    let dirs = cone.angular_rule(!parallel);
    let f = |r: f64| -> Vec<f64> {
        let sw = spec.radial_sample(r, t, &s);
        let v = match axis {
            None => cone.solid_angle() * sw.psi().norm_sqr(),
            Some(_) => dirs.iter().map(|(d, w)| w * spec.sample_with(&sw, [r * d[0], r * d[1], r * d[2]], t).psi().norm_sqr()).sum(),
        };
        vec![r * r * v]
    };
    let width = (spec.packet.length_scale() * 0.5).max(0.25 * t / spec.packet.length_scale().max(1e-3)).min(r_max);
    let mut bp = vec![r_v];
    while *bp.last().unwrap() < r_max {
        bp.push((bp.last().unwrap() + width).min(r_max));
    }
    let (v, _) = integrate_adaptive(&f, &bp, 1e-11, 1e-10, 200000)?;
    Ok(v[0] + cone.solid_angle() * inner)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FasEntry {
    pub radius: f64,
    pub t2: f64,
    pub lhs: f64,
    pub lhs_abs: f64,
    pub rhs: f64,
    pub rel_error: f64,
    pub tail_estimate: f64,
    pub envelope_exponent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FasReport {
    pub entries: Vec<FasEntry>,
    pub t1: f64,
    pub cone: ConeSurface,
    /// fitted `eps` in `lhs_abs ~ R^-eps`
    pub cross_decay_rate: Option<f64>,
}

impl FasReport {
    pub fn rel_error_decreasing(&self) -> bool {
        self.entries.windows(2).all(|w| w[1].rel_error < w[0].rel_error)
    }

    pub fn cross_decreasing(&self) -> bool {
        self.entries.windows(2).all(|w| w[1].lhs_abs < w[0].lhs_abs)
    }
}

/// How `T2` is chosen per radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeHorizon {
    Fixed(f64),
    /// `T2 = factor * R^2`
    Quadratic(f64),
}

impl TimeHorizon {
    pub fn at(&self, r: f64) -> f64 {
        match *self {
            TimeHorizon::Fixed(t) => t,
            TimeHorizon::Quadratic(f) => f * r * r,
        }
    }
}

/// Compare the time-integrated flux with the cone probability for each radius.
pub fn fas_verify(spec: &SpectralState, cone: &ConeSurface, radii: &[f64], t1: f64, horizon: TimeHorizon, opts: &TimeOptions) -> Result<FasReport> {
    let mut radii = radii.to_vec();
    radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if radii.is_empty() {
        return Err(FasError::InvalidInput("no radii".into()));
    }
    let rhs = cone_probability(spec, cone);
    let k_fast = effective_momentum(spec, 1e-10).max(1e-3);
    let mut entries = Vec::new();
    for &r in &radii {
        let t2 = horizon.at(r);
        let annotate = |e: FasError| match e {
            FasError::Accuracy { what, residual } => FasError::Accuracy { what: format!("{what} at R = {r}, T2 = {t2}"), residual },
            FasError::Numerical(m) => FasError::Numerical(format!("{m} at R = {r}")),
            other => other,
        };
        let signed = time_integrated_flux(spec, r, cone, t1, t2, FluxMode::Signed, k_fast, opts).map_err(annotate)?;
        let cross = if spec.is_free() {
            TimeIntegral { integral: 0.0, tail_estimate: 0.0, envelope_exponent: f64::INFINITY }
        } else {
            // |j1| has a cusp at every sign change; only its trend in R is used
            let loose = TimeOptions { abs_tol: opts.abs_tol.max(1e-6), rel_tol: opts.rel_tol.max(5e-2), ..*opts };
            time_integrated_flux(spec, r, cone, t1, t2, FluxMode::CrossAbsolute, k_fast, &loose).map_err(annotate)?
        };
        let lhs = signed.integral + signed.tail_estimate;
        let rel_error = (lhs - rhs).abs() / rhs;
        log::info!("R = {r}: lhs {lhs:.8} rhs {rhs:.8} rel_error {rel_error:.3e}");
        entries.push(FasEntry {
            radius: r,
            t2,
            lhs,
            lhs_abs: cross.integral + cross.tail_estimate,
            rhs,
            rel_error,
            tail_estimate: signed.tail_estimate,
            envelope_exponent: signed.envelope_exponent,
        });
    }
    let cross_decay_rate = (entries.len() >= 2 && entries.iter().all(|e| e.lhs_abs > 0.0)).then(|| {
        let x: Vec<f64> = entries.iter().map(|e| e.radius.ln()).collect();
        let y: Vec<f64> = entries.iter().map(|e| e.lhs_abs.ln()).collect();
        -crate::pointmodel::linear_fit(&x, &y).0
    });
    Ok(FasReport { entries, t1, cone: *cone, cross_decay_rate })
}

/// Radial current from a value and a radial derivative; re-exported for symmetry.
pub fn radial_current(value: crate::Complex, gradient: crate::Complex) -> f64 {
    current(value, gradient)
}

#[cfg(test)]
mod tests;
