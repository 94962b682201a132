//! Short-range radial potentials: scattering solutions, zero-energy
//! analysis, resonance coefficients and outgoing states.
//!
//! The radial equation `u'' = (V - k^2) u` is integrated with classical RK4
//! on a uniform grid over `[0, R_V]`; outside `R_V` the potential is taken to
//! vanish and the solution is matched to free waves.

use crate::pointmodel::{
    build_state_with_interior, c2pi, linear_fit, Interior, Scatterer, SpectralOptions, SpectralState, WavePacket,
    FOUR_PI,
};
use crate::quadrature::gauss_legendre;
use crate::{Complex, FasError, Result};
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;

fn ci(re: f64, im: f64) -> Complex {
    Complex::new(re, im)
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    /// `V = -2 b^2 sech^2(b r)`
    Bargmann { b: f64 },
    /// `V = -depth exp(-r^2 / width^2)`
    GaussianWell { depth: f64, width: f64 },
    /// cubic interpolation through `(r_i, V_i)`; zero beyond the last point
    Tabulated { r: Vec<f64>, v: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    /// coupling multiplying the potential
    pub lambda: f64,
}

impl PotentialSpec {
    pub fn bargmann(b: f64) -> Result<PotentialSpec> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(FasError::InvalidInput(format!("Bargmann parameter b = {b}")));
        }
        Ok(PotentialSpec { kind: PotentialKind::Bargmann { b }, lambda: 1.0 })
    }

    pub fn gaussian_well(depth: f64, width: f64) -> Result<PotentialSpec> {
        if !(depth.is_finite() && width > 0.0 && width.is_finite()) {
            return Err(FasError::InvalidInput(format!("Gaussian well depth {depth}, width {width}")));
        }
        Ok(PotentialSpec { kind: PotentialKind::GaussianWell { depth, width }, lambda: 1.0 })
    }

    pub fn tabulated(r: Vec<f64>, v: Vec<f64>) -> Result<PotentialSpec> {
        if r.len() != v.len() || r.len() < 4 {
            return Err(FasError::InvalidInput("tabulated potential needs at least 4 matching points".into()));
        }
        if r[0] != 0.0 || r.windows(2).any(|w| !(w[1] > w[0])) || v.iter().any(|x| !x.is_finite()) {
            return Err(FasError::InvalidInput("tabulated radii must start at 0 and increase".into()));
        }
        let last = *r.last().unwrap();
        let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if v.last().unwrap().abs() > 1e-10 * scale.max(1e-300) || last < 1e-12 {
            return Err(FasError::InvalidInput(format!(
                "tabulated potential has not decayed at r = {last} (|V| = {:.3e})",
                v.last().unwrap().abs()
            )));
        }
        Ok(PotentialSpec { kind: PotentialKind::Tabulated { r, v }, lambda: 1.0 })
    }

    pub fn scaled(&self, lambda: f64) -> PotentialSpec {
        PotentialSpec { kind: self.kind.clone(), lambda }
    }

    pub fn value(&self, r: f64) -> f64 {
        self.lambda * self.bare(r)
    }

    fn bare(&self, r: f64) -> f64 {
        match &self.kind {
            PotentialKind::Bargmann { b } => {
                let s = 1.0 / (b * r).cosh();
                -2.0 * b * b * s * s
            }
            PotentialKind::GaussianWell { depth, width } => -depth * (-(r / width).powi(2)).exp(),
            PotentialKind::Tabulated { r: rs, v } => {
                if r >= *rs.last().unwrap() {
                    return 0.0;
                }
                let i = rs.partition_point(|&x| x <= r).saturating_sub(1).min(rs.len() - 2);
                let (x0, x1) = (rs[i], rs[i + 1]);
                let h = x1 - x0;
                let slope = |j: usize| {
                    if j == 0 {
                        (v[1] - v[0]) / (rs[1] - rs[0])
                    } else if j == rs.len() - 1 {
                        (v[j] - v[j - 1]) / (rs[j] - rs[j - 1])
                    } else {
                        (v[j + 1] - v[j - 1]) / (rs[j + 1] - rs[j - 1])
                    }
                };
                let s = (r - x0) / h;
                let (h00, h10, h01, h11) =
                    (2.0 * s.powi(3) - 3.0 * s * s + 1.0, s.powi(3) - 2.0 * s * s + s, -2.0 * s.powi(3) + 3.0 * s * s, s.powi(3) - s * s);
                h00 * v[i] + h10 * h * slope(i) + h01 * v[i + 1] + h11 * h * slope(i + 1)
            }
        }
    }

    /// Radius beyond which `|V| < 1e-14 max |V|`.
    pub fn range(&self) -> f64 {
        match &self.kind {
            PotentialKind::Bargmann { b } => (4f64.ln() + 14.0 * 10f64.ln()) / (2.0 * b),
            PotentialKind::GaussianWell { width, .. } => width * (14.0 * 10f64.ln()).sqrt(),
            PotentialKind::Tabulated { r, .. } => *r.last().unwrap(),
        }
    }
}

/// Potential tabulated on the integration grid.
#[derive(Debug, Clone)]
pub struct PotentialModel {
    pub spec: PotentialSpec,
    pub r_v: f64,
    pub h: f64,
    steps: usize,
    /// values at `j h / 2`
    v: Vec<f64>,
}

pub const DEFAULT_STEP: f64 = 5e-4;

impl PotentialModel {
    pub fn new(spec: PotentialSpec) -> Result<PotentialModel> {
        PotentialModel::with_step(spec, DEFAULT_STEP)
    }

    pub fn with_step(spec: PotentialSpec, h: f64) -> Result<PotentialModel> {
        if !(spec.lambda.is_finite()) || !(h > 0.0) {
            return Err(FasError::InvalidInput("coupling and step must be finite and positive".into()));
        }
        let r_v = spec.range();
        let mut steps = (r_v / h).ceil() as usize;
        steps += steps % 2;
        let h = r_v / steps as f64;
        let v = (0..=2 * steps).map(|j| spec.value(0.5 * h * j as f64)).collect();
        Ok(PotentialModel { spec, r_v, h, steps, v })
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..=self.steps).map(|j| j as f64 * self.h).collect()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// RK4 for `u'' = (V - k2) u` from `u(0) = 0, u'(0) = 1`.
    fn integrate(&self, k2: f64) -> (Vec<f64>, Vec<f64>) {
        let n = self.steps;
        let h = self.h;
        let mut u = Vec::with_capacity(n + 1);
        let mut du = Vec::with_capacity(n + 1);
        let (mut y, mut p) = (0.0, 1.0);
        u.push(y);
        du.push(p);
        for j in 0..n {
            let (q0, q1, q2) = (self.v[2 * j] - k2, self.v[2 * j + 1] - k2, self.v[2 * j + 2] - k2);
            let (k1y, k1p) = (p, q0 * y);
            let (k2y, k2p) = (p + 0.5 * h * k1p, q1 * (y + 0.5 * h * k1y));
            let (k3y, k3p) = (p + 0.5 * h * k2p, q1 * (y + 0.5 * h * k2y));
            let (k4y, k4p) = (p + h * k3p, q2 * (y + h * k3y));
            y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
            p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
            u.push(y);
            du.push(p);
        }
        (u, du)
    }

    /// Simpson's rule over the grid, composite at even node `split`.
    fn simpson_split(&self, split: usize, f: impl Fn(usize) -> Complex) -> Complex {
        let part = |lo: usize, hi: usize| {
            let mut s = f(lo) + f(hi);
            for j in lo + 1..hi {
                s += if (j - lo) % 2 == 1 { 4.0 } else { 2.0 } * f(j);
            }
            s * self.h / 3.0
        };
        if split == self.steps {
            part(0, split)
        } else {
            part(0, split) + part(split, self.steps)
        }
    }

    /// Simpson's rule over the grid.
    fn simpson(&self, f: impl Fn(usize) -> Complex) -> Complex {
        let n = self.steps;
        let mut s = f(0) + f(n);
        for j in 1..n {
            s += if j % 2 == 1 { 4.0 } else { 2.0 } * f(j);
        }
        s * self.h / 3.0
    }
}

/// Regular s-wave solution at momentum `k`, normalized by `u'(0) = 1` and
/// matched to `A sin(k r + delta)` at `R_V`.
#[derive(Debug, Clone)]
pub struct RadialSolution {
    pub k: f64,
    /// phase shift in `(-pi/2, pi/2]`
    pub delta: f64,
    pub amplitude: f64,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
}

impl RadialSolution {
    pub fn s_matrix(&self) -> Complex {
        ci(0.0, -2.0 * self.delta).exp()
    }

    /// `k r phi_+(r, k) = exp(-i delta) u / A` at grid node `j`.
    pub fn krphi(&self, j: usize) -> Complex {
        ci(0.0, -self.delta).exp() * self.u[j] / self.amplitude
    }

    /// Cubic Hermite value of `u` at `r`.
    pub fn u_at(&self, model: &PotentialModel, r: f64) -> f64 {
        let h = model.h;
        let j = ((r / h).floor() as usize).min(model.steps - 1);
        let s = r / h - j as f64;
        let (h00, h10, h01, h11) =
            (2.0 * s.powi(3) - 3.0 * s * s + 1.0, s.powi(3) - 2.0 * s * s + s, -2.0 * s.powi(3) + 3.0 * s * s, s.powi(3) - s * s);
        h00 * self.u[j] + h10 * h * self.du[j] + h01 * self.u[j + 1] + h11 * h * self.du[j + 1]
    }
}

pub fn solve_radial(k: f64, model: &PotentialModel) -> Result<RadialSolution> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(FasError::InvalidInput(format!("radial solve needs k > 0, got {k}")));
    }
    let (u, du) = model.integrate(k * k);
    let (ur, dr) = (u[model.steps], du[model.steps]);
    if !(ur.is_finite() && dr.is_finite()) {
        return Err(FasError::Numerical(format!("radial solution overflow at k = {k}")));
    }
    let theta = (k * ur).atan2(dr);
    let mut delta = (theta - k * model.r_v).rem_euclid(PI);
    if delta > 0.5 * PI {
        delta -= PI;
    }
    let arg = k * model.r_v + delta;
    let amplitude = if arg.sin().abs() > 0.5 { ur / arg.sin() } else { dr / (k * arg.cos()) };
    Ok(RadialSolution { k, delta, amplitude, u, du })
}

/// `eta = phi_+ - j0` at radius `r`.
pub fn eta_eigenfunction(sol: &RadialSolution, model: &PotentialModel, r: f64) -> Complex {
    let k = sol.k;
    let j0 = if k * r < 1e-8 { 1.0 } else { (k * r).sin() / (k * r) };
    if r >= model.r_v {
        return (1.0 - sol.s_matrix()) * ci(0.0, -k * r).exp() / ci(0.0, 2.0 * k * r);
    }
    if r == 0.0 {
        return ci(0.0, -sol.delta).exp() / (sol.amplitude * k) - 1.0;
    }
    ci(0.0, -sol.delta).exp() * sol.u_at(model, r) / (sol.amplitude * k * r) - j0
}

/// `|eta(r) - int G(r, r') V(r') phi_+(r') r'^2 dr'|` with the incoming-wave
/// Green's function `sin(k r_<) exp(-i k r_>) / (-k r r')`.
/// The radius is snapped to an even grid node so the kink of the kernel
/// falls on a Simpson panel boundary.
pub fn ls_residual(sol: &RadialSolution, model: &PotentialModel, r: f64) -> f64 {
    let k = sol.k;
    let grid = model.grid();
    let node = (2 * (r / (2.0 * model.h)).round() as usize).clamp(2, model.steps);
    let r = grid[node];
    let integral = model.simpson_split(node, |j| {
        let rp = grid[j];
        let (lo, hi) = if rp < r { (rp, r) } else { (r, rp) };
        let green = (k * lo).sin() * ci(0.0, -k * hi).exp() / (-k);
        green * model.v[2 * j] * sol.krphi(j) / k
    });
    (eta_eigenfunction(sol, model, r) - integral / r).norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZeroEnergyClass {
    Generic,
    Resonance,
    Eigenvalue,
    Indeterminate,
}

/// Zero-energy solution `u ~ a r^-l + b r^(l+1)` outside the potential.
#[derive(Debug, Clone)]
pub struct ResonanceProfile {
    pub ell: u32,
    pub lambda: f64,
    pub a: f64,
    pub b: f64,
    /// `|b| R^(2l+1) / sqrt(a^2 + b^2 R^(4l+2))`
    pub ratio: f64,
    pub class: ZeroEnergyClass,
    pub bound_states: usize,
    /// `int V psi d^3x` with `psi = (u / a r) P_l(cos theta)`
    pub discriminant: f64,
    /// same integral with `|V psi|`
    pub discriminant_scale: f64,
    /// raw solution on the grid, `u ~ r^(l+1)` at the origin
    pub u: Vec<f64>,
    r_v: f64,
    h: f64,
}

impl ResonanceProfile {
    /// Resonance function `psi_res = u / (a r)`, tending to `1/r` at infinity.
    pub fn psi_res(&self, r: f64) -> f64 {
        self.u_norm(r) / r
    }

    /// `u / a`
    pub fn u_norm(&self, r: f64) -> f64 {
        if r >= self.r_v {
            let l = self.ell as i32;
            return (self.a * r.powi(-l) + self.b * r.powi(l + 1)) / self.a;
        }
        let j = ((r / self.h).floor() as usize).min(self.u.len() - 2);
        let s = r / self.h - j as f64;
        ((1.0 - s) * self.u[j] + s * self.u[j + 1]) / self.a
    }

    /// Raw solution normalized by `u'(0) = 1` (`l = 0`).
    pub fn u_raw(&self, r: f64) -> f64 {
        self.u_norm(r) * self.a
    }
}

fn classify(ratio: f64) -> Option<bool> {
    if ratio < 1e-6 {
        Some(true)
    } else if ratio > 1e-3 {
        Some(false)
    } else {
        None
    }
}

/// Integrate at zero energy in channel `ell` and classify.
pub fn zero_energy_solve(model: &PotentialModel, ell: u32) -> Result<ResonanceProfile> {
    let n = model.steps;
    let h = model.h;
    let r_v = model.r_v;
    let (u, du) = if ell == 0 {
        model.integrate(0.0)
    } else {
        zero_energy_higher(model, ell)
    };
    let (ur, dr) = (u[n], du[n]);
    let l = ell as i32;
    let lf = ell as f64;
    let (a, b) = if ell == 0 {
        (ur - r_v * dr, dr)
    } else {
        (
            r_v.powi(l + 1) * ((lf + 1.0) * ur / r_v - dr) / (2.0 * lf + 1.0),
            (lf * ur / r_v + dr) * r_v.powi(-l) / (2.0 * lf + 1.0),
        )
    };
    if !(a.is_finite() && b.is_finite()) {
        return Err(FasError::Numerical("zero-energy solution overflow".into()));
    }
    let big = b.abs() * r_v.powi(2 * l + 1);
    let ratio = big / (a * a + big * big).sqrt();
    let class = match classify(ratio) {
        Some(true) => {
            if ell == 0 {
                ZeroEnergyClass::Resonance
            } else {
                ZeroEnergyClass::Eigenvalue
            }
        }
        Some(false) => ZeroEnergyClass::Generic,
        None => ZeroEnergyClass::Indeterminate,
    };
    let mut nodes = u.windows(2).skip(1).filter(|w| w[0] * w[1] < 0.0 || w[1] == 0.0).count();
    if b != 0.0 && -a / b > r_v.powi(2 * l + 1) {
        nodes += 1;
    }
    let grid = model.grid();
    let radial = model.simpson(|j| ci(model.v[2 * j] * u[j] * grid[j], 0.0)).re / a;
    let radial_abs = model.simpson(|j| ci((model.v[2 * j] * u[j] * grid[j]).abs(), 0.0)).re / a.abs();
    let (ang, ang_abs) = angular_factor(ell);
    Ok(ResonanceProfile {
        ell,
        lambda: model.spec.lambda,
        a,
        b,
        ratio,
        class,
        bound_states: nodes,
        discriminant: radial * ang,
        discriminant_scale: radial_abs * ang_abs,
        u,
        r_v,
        h,
    })
}

/// `int P_l(cos theta) dOmega` and `int |P_l| dOmega` by Gauss-Legendre in `cos(theta)`.
fn angular_factor(ell: u32) -> (f64, f64) {
    let rule = gauss_legendre(64);
    let (mut s, mut sa) = (0.0, 0.0);
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        let p = legendre(ell, *x);
        s += w * p;
        sa += w * p.abs();
    }
    (2.0 * PI * s, 2.0 * PI * sa)
}

fn legendre(l: u32, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, x);
    if l == 0 {
        return p0;
    }
    for n in 1..l {
        let nf = n as f64;
        let p2 = ((2.0 * nf + 1.0) * x * p1 - nf * p0) / (nf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// `u = r^(l+1) w` with `w'' + 2(l+1) w'/r = V w`, started from a series.
fn zero_energy_higher(model: &PotentialModel, ell: u32) -> (Vec<f64>, Vec<f64>) {
    let n = model.steps;
    let h = model.h;
    let lf = ell as f64;
    let v0 = model.v[0];
    let v2 = (model.spec.value(1e-3) - v0) / 1e-6;
    let c1 = v0 / (2.0 * (2.0 * lf + 3.0));
    let c2 = (v0 * c1 + v2) / (4.0 * (2.0 * lf + 5.0));
    let mut u = vec![0.0; n + 1];
    let mut du = vec![0.0; n + 1];
    // start at the second node and fill the first two from the series
    let series = |r: f64| (1.0 + c1 * r * r + c2 * r.powi(4), 2.0 * c1 * r + 4.0 * c2 * r.powi(3));
    let to_u = |r: f64, w: f64, dw: f64| (r.powi(ell as i32 + 1) * w, (lf + 1.0) * r.powi(ell as i32) * w + r.powi(ell as i32 + 1) * dw);
    let start = 20usize;
    for j in 0..=start {
        let r = j as f64 * h;
        let (w, dw) = series(r);
        let (a, b) = to_u(r, w, dw);
        u[j] = a;
        du[j] = b;
    }
    let (mut w, mut p) = series(start as f64 * h);
    let f = |j2: usize, r: f64, w: f64, p: f64| model.v[j2] * w - 2.0 * (lf + 1.0) * p / r;
    for j in start..n {
        let r = j as f64 * h;
        let k1 = (p, f(2 * j, r, w, p));
        let k2 = (p + 0.5 * h * k1.1, f(2 * j + 1, r + 0.5 * h, w + 0.5 * h * k1.0, p + 0.5 * h * k1.1));
        let k3 = (p + 0.5 * h * k2.1, f(2 * j + 1, r + 0.5 * h, w + 0.5 * h * k2.0, p + 0.5 * h * k2.1));
        let k4 = (p + h * k3.1, f(2 * j + 2, r + h, w + h * k3.0, p + h * k3.1));
        w += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        p += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        let (a, b) = to_u(r + h, w, p);
        u[j + 1] = a;
        du[j + 1] = b;
    }
    (u, du)
}

/// Coefficients of the `1/|k|` singularity for an s-wave resonance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceCoefficients {
    /// `k eta(r, k) -> r0 psi_res(r)` as `k -> 0`
    pub r0: Complex,
    /// `psi_out_s(k) ~ r / k`
    pub r: Complex,
    /// `int V psi_res d^3x`
    pub discriminant: f64,
}

pub fn resonance_coefficients(profile: &ResonanceProfile, psi0: &WavePacket) -> Result<ResonanceCoefficients> {
    if profile.ell != 0 || profile.class != ZeroEnergyClass::Resonance {
        return Err(FasError::Domain(format!("no s-wave resonance (class {:?})", profile.class)));
    }
    let d = profile.discriminant;
    let r0 = ci(0.0, FOUR_PI / d);
    let overlap = psi0.overlap_radial(|r| profile.u_norm(r));
    let r = r0.conj() * (2.0 * PI).powf(-1.5) * overlap;
    Ok(ResonanceCoefficients { r0, r, discriminant: d })
}

/// Outgoing state of a radial packet for a potential model.
pub fn outgoing_state_potential(psi0: &WavePacket, model: &Arc<PotentialModel>, opts: &SpectralOptions) -> Result<SpectralState> {
    if !psi0.is_radial() {
        return Err(FasError::InvalidInput("potential models take radial packets only".into()));
    }
    let zero = zero_energy_solve(model, 0)?;
    if zero.bound_states > 0 {
        log::warn!("potential has {} bound state(s); their component of the packet is not removed", zero.bound_states);
    }
    let grid = model.grid();
    let hvals: Vec<Complex> = grid.iter().map(|&r| psi0.radial_profile().eval(r)).collect();
    let nodes = interior_nodes(model.r_v);
    let sample = |k: f64| -> Vec<Complex> {
        let sol = match solve_radial(k, model) {
            Ok(s) => s,
            Err(_) => return vec![ci(f64::NAN, 0.0); 2 + nodes.0.len()],
        };
        let s = sol.s_matrix();
        let inside = model.simpson(|j| sol.krphi(j).conj() * hvals[j]);
        let jp = model.simpson(|j| ci(0.0, k * grid[j]).exp() * hvals[j]);
        let jm = model.simpson(|j| ci(0.0, -k * grid[j]).exp() * hvals[j]);
        let ip = psi0.spherical_moments(k, 0)[0];
        let im = psi0.spherical_moments(-k, 0)[0];
        let outside = (s.conj() * (ip - jp) - (im - jm)) / ci(0.0, 2.0);
        let mut row = vec![c2pi() * (inside + outside), s];
        let phase = ci(0.0, -sol.delta).exp() / sol.amplitude;
        row.extend(nodes.0.iter().map(|&r| phase * sol.u_at(model, r) / r));
        row
    };
    let r_coef = if zero.class == ZeroEnergyClass::Resonance { None } else { Some(ci(0.0, 0.0)) };
    let interior = Interior { r_v: model.r_v, nodes: nodes.0.clone(), weights: nodes.1.clone(), chi: vec![] };
    let opts = SpectralOptions { fit_tol: opts.fit_tol.max(1e-11), ..*opts };
    build_state_with_interior(psi0, Scatterer::Potential(model.clone()), &opts, &sample, r_coef, interior)
}

/// Gauss-Legendre nodes on `[0, R_V]` in panels of width at most 0.2.
fn interior_nodes(r_v: f64) -> (Vec<f64>, Vec<f64>) {
    let panels = (r_v / 0.2).ceil() as usize;
    let h = r_v / panels as f64;
    let rule = gauss_legendre(8);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for j in 0..panels {
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            nodes.push((j as f64 + 0.5 + 0.5 * x) * h);
            weights.push(0.5 * h * w);
        }
    }
    (nodes, weights)
}

/// One point of the Jensen-Kato extraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JkSample {
    pub k: f64,
    /// `max_r |k eta(r, k) - r0 psi_res(r)|`
    pub pole_deviation: f64,
    /// `max_r |eta(r, k) - r0 psi_res(r) / k|`
    pub remainder: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JkResidue {
    pub samples: Vec<JkSample>,
    /// `max_r |lim_{k->0} k eta - r0 psi_res|` from a polynomial fit in `k`
    pub extrapolated_deviation: f64,
    pub r0: Complex,
}

/// Check `k eta(r, k) -> r0 psi_res(r)` on radii `rs` for small momenta `ks`.
pub fn jk_residue_extract(model: &PotentialModel, profile: &ResonanceProfile, ks: &[f64], rs: &[f64]) -> Result<JkResidue> {
    if profile.class != ZeroEnergyClass::Resonance {
        return Err(FasError::Domain("JK extraction needs an s-wave resonance".into()));
    }
    if ks.len() < 3 || rs.is_empty() {
        return Err(FasError::InvalidInput("need at least three momenta and one radius".into()));
    }
    let r0 = ci(0.0, FOUR_PI / profile.discriminant);
    let rows: Vec<Vec<Complex>> = ks
        .par_iter()
        .map(|&k| {
            let sol = solve_radial(k, model)?;
            Ok(rs.iter().map(|&r| k * eta_eigenfunction(&sol, model, r)).collect())
        })
        .collect::<Result<_>>()?;
    let samples = ks
        .iter()
        .zip(&rows)
        .map(|(&k, row)| {
            let (mut dev, mut rem) = (0.0f64, 0.0f64);
            for (j, &r) in rs.iter().enumerate() {
                let pole = r0 * profile.psi_res(r);
                dev = dev.max((row[j] - pole).norm());
                rem = rem.max(((row[j] - pole) / k).norm());
            }
            JkSample { k, pole_deviation: dev, remainder: rem }
        })
        .collect();
    // quadratic least squares in k for each radius, using the three smallest momenta and more
    let mut order: Vec<usize> = (0..ks.len()).collect();
    order.sort_by(|&a, &b| ks[a].partial_cmp(&ks[b]).unwrap());
    let use_n = order.len().min(6);
    let mut extrap = 0.0f64;
    for (j, &r) in rs.iter().enumerate() {
        let pts: Vec<(f64, Complex)> = order[..use_n].iter().map(|&i| (ks[i], rows[i][j])).collect();
        let c0 = poly_intercept(&pts, 2);
        extrap = extrap.max((c0 - r0 * profile.psi_res(r)).norm());
    }
    Ok(JkResidue { samples, extrapolated_deviation: extrap, r0 })
}

/// Constant term of a least-squares polynomial of degree `deg`.
fn poly_intercept(pts: &[(f64, Complex)], deg: usize) -> Complex {
    let m = deg + 1;
    let mut a = vec![vec![0.0; m]; m];
    let mut rhs = vec![ci(0.0, 0.0); m];
    for &(x, y) in pts {
        for i in 0..m {
            for j in 0..m {
                a[i][j] += x.powi((i + j) as i32);
            }
            rhs[i] += y * x.powi(i as i32);
        }
    }
    for col in 0..m {
        let piv = (col..m).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap()).unwrap();
        a.swap(col, piv);
        rhs.swap(col, piv);
        for row in 0..m {
            if row != col {
                let f = a[row][col] / a[col][col];
                for c in col..m {
                    a[row][c] -= f * a[col][c];
                }
                let rc = rhs[col];
                rhs[row] -= f * rc;
            }
        }
    }
    rhs[0] / a[0][0]
}

/// Closed forms for the Bargmann potential `-2 b^2 sech^2(b r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BargmannReference {
    pub b: f64,
}

impl BargmannReference {
    /// zero-energy solution with `u'(0) = 1`
    pub fn zero_energy(&self, r: f64) -> f64 {
        (self.b * r).tanh() / self.b
    }

    pub fn phase_shift(&self, k: f64) -> f64 {
        (self.b / k).atan()
    }

    /// Jost solution `exp(ikr) (k + i b tanh(b r)) / (k + i b)`
    pub fn jost(&self, k: f64, r: f64) -> Complex {
        ci(0.0, k * r).exp() * ci(k, self.b * (self.b * r).tanh()) / ci(k, self.b)
    }
}

/// One coupling in a resonance scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPoint {
    pub lambda: f64,
    pub ratio: f64,
    pub class: ZeroEnergyClass,
    pub bound_states: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResonanceScan {
    pub points: Vec<ScanPoint>,
    /// couplings where the bound-state count changes, refined by bisection
    pub transitions: Vec<f64>,
}

pub fn resonance_scan(spec: &PotentialSpec, lambdas: &[f64], step: f64) -> Result<ResonanceScan> {
    let b_of = |lambda: f64| -> Result<(f64, ResonanceProfile)> {
        let m = PotentialModel::with_step(spec.scaled(lambda), step)?;
        let p = zero_energy_solve(&m, 0)?;
        Ok((p.b, p))
    };
    let profiles: Vec<ResonanceProfile> = lambdas.par_iter().map(|&l| b_of(l).map(|x| x.1)).collect::<Result<_>>()?;
    let points: Vec<ScanPoint> = profiles
        .iter()
        .map(|p| ScanPoint { lambda: p.lambda, ratio: p.ratio, class: p.class, bound_states: p.bound_states })
        .collect();
    let mut transitions = Vec::new();
    for w in profiles.windows(2) {
        if w[0].bound_states != w[1].bound_states && w[0].b * w[1].b < 0.0 {
            let (mut lo, mut hi) = (w[0].lambda, w[1].lambda);
            let sign_lo = w[0].b.signum();
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if b_of(mid)?.0.signum() == sign_lo {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-12 * mid.abs().max(1.0) {
                    break;
                }
            }
            transitions.push(0.5 * (lo + hi));
        }
    }
    Ok(ResonanceScan { points, transitions })
}

/// Depth of a Gaussian well of given width with a zero-energy eigenvalue in
/// channel `ell >= 1`, bracketed by `[lo, hi]`.
pub fn tune_eigenvalue(width: f64, ell: u32, lo: f64, hi: f64, step: f64) -> Result<(f64, ResonanceProfile)> {
    if ell == 0 {
        return Err(FasError::InvalidInput("s-waves have no zero-energy eigenvalue".into()));
    }
    let b_of = |depth: f64| -> Result<ResonanceProfile> {
        let m = PotentialModel::with_step(PotentialSpec::gaussian_well(depth, width)?, step)?;
        zero_energy_solve(&m, ell)
    };
    let (mut lo, mut hi) = (lo, hi);
    let s_lo = b_of(lo)?.b.signum();
    if b_of(hi)?.b.signum() == s_lo {
        return Err(FasError::InvalidInput("depth bracket does not contain a sign change".into()));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if b_of(mid)?.b.signum() == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    let depth = 0.5 * (lo + hi);
    Ok((depth, b_of(depth)?))
}

/// Phase shift by the variable phase method `delta' = -V sin^2(k r + delta) / k`,
/// integrated with RK4 on the model grid.
pub fn phase_shift_vpm(model: &PotentialModel, k: f64) -> f64 {
    let h = model.h;
    let mut d = 0.0f64;
    let f = |j2: usize, r: f64, d: f64| -model.v[j2] * (k * r + d).sin().powi(2) / k;
    for j in 0..model.steps {
        let r = j as f64 * h;
        let k1 = f(2 * j, r, d);
        let k2 = f(2 * j + 1, r + 0.5 * h, d + 0.5 * h * k1);
        let k3 = f(2 * j + 1, r + 0.5 * h, d + 0.5 * h * k2);
        let k4 = f(2 * j + 2, r + h, d + h * k3);
        d += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    d
}

/// Fitted power of `|f(k)|` against `k` on a log grid, for diagnostics.
pub fn loglog_slope(ks: &[f64], values: &[f64]) -> f64 {
    let x: Vec<f64> = ks.iter().map(|k| k.ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    linear_fit(&x, &y).0
}
