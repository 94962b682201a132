//! Zero-range point interaction at the origin, wave packets, outgoing states
//! and the evolution of their s-wave part.
//!
//! Only the s-wave scatters, for the point interaction and for the radial
//! potentials of [`crate::lsradial`] alike. A [`SpectralState`] therefore
//! stores `g(k) = k * psi_out_s(k)` and the s-wave S-matrix on Chebyshev
//! panels; the rest of a boosted packet evolves freely in closed form.
//!
//! Conventions: dispersion `exp(-i k^2 t)`, unitary Fourier transform with
//! `(2 pi)^{-3/2}`, boundary condition `u'(0) = -4 pi gamma u(0)` for
//! `u = r psi`, so `gamma > 0` carries the bound state `exp(-4 pi gamma r)/r`.

use crate::quadrature::{
    free_evolve_with_gradient, gauss_legendre, osc_integrate, ChebPanels, Exponent, FnAmplitude, OscSettings,
};
use crate::specfun::{gauss_moment, phi_odd};
use crate::{accuracy, Complex, FasError, Result};
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;

pub(crate) const FOUR_PI: f64 = 4.0 * PI;

pub(crate) fn c2pi() -> f64 {
    (2.0 / PI).sqrt()
}

fn ci(re: f64, im: f64) -> Complex {
    Complex::new(re, im)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointInteraction {
    /// `f64::INFINITY` is the free case
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

/// `Phi(x, k) = plane * exp(i k.x) + spherical`, the spherical wave already
/// evaluated at radius `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenfunctionParts {
    pub plane: Complex,
    pub spherical: Complex,
}

impl PointInteraction {
    pub fn new(gamma: f64) -> Result<PointInteraction> {
        if gamma.is_nan() || gamma == f64::NEG_INFINITY {
            return Err(FasError::InvalidInput(format!("coupling gamma = {gamma}")));
        }
        Ok(PointInteraction { gamma })
    }

    pub fn free() -> PointInteraction {
        PointInteraction { gamma: f64::INFINITY }
    }

    pub fn is_free(&self) -> bool {
        self.gamma.is_infinite()
    }

    pub fn is_resonant(&self) -> bool {
        self.gamma == 0.0
    }

    pub fn has_bound_state(&self) -> bool {
        self.gamma > 0.0 && self.gamma.is_finite()
    }

    /// Decay rate `4 pi gamma` of the bound state.
    pub fn kappa(&self) -> Option<f64> {
        self.has_bound_state().then(|| FOUR_PI * self.gamma)
    }

    pub fn bound_state_energy(&self) -> Option<f64> {
        self.kappa().map(|k| -k * k)
    }

    /// Coefficient of `exp(-+ i k r)/r` in `Phi_+-`.
    pub fn spherical_coefficient(&self, k: f64, sign: Sign) -> Complex {
        if self.is_free() {
            return ci(0.0, 0.0);
        }
        let g = FOUR_PI * self.gamma;
        match sign {
            Sign::Plus => -1.0 / ci(g, -k),
            Sign::Minus => -1.0 / ci(g, k),
        }
    }

    /// s-wave S-matrix `exp(-2 i delta_0)` in the convention
    /// `phi = [exp(ikr) - S exp(-ikr)] / (2ikr)`.
    pub fn s_matrix(&self, k: f64) -> Complex {
        if self.is_free() {
            return ci(1.0, 0.0);
        }
        let g = FOUR_PI * self.gamma;
        ci(g, k) / ci(g, -k)
    }

    /// Normalized bound state `sqrt(kappa / 2 pi) exp(-kappa r) / r`.
    pub fn bound_state(&self, r: f64) -> Option<f64> {
        self.kappa().map(|k| (k / (2.0 * PI)).sqrt() * (-k * r).exp() / r)
    }
}

pub fn eigenfunction_point(x: f64, k: f64, pi: &PointInteraction, sign: Sign) -> Result<EigenfunctionParts> {
    if pi.is_resonant() && k == 0.0 {
        return Err(FasError::Domain("eigenfunction at k = 0 for the resonant coupling".into()));
    }
    if !(x > 0.0) || !(k >= 0.0) {
        return Err(FasError::InvalidInput(format!("eigenfunction at x = {x}, k = {k}")));
    }
    let c = pi.spherical_coefficient(k, sign);
    let phase = match sign {
        Sign::Plus => ci(0.0, -k * x).exp(),
        Sign::Minus => ci(0.0, k * x).exp(),
    };
    Ok(EigenfunctionParts { plane: ci(1.0, 0.0), spherical: c * phase / x })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianShape {
    pub sigma: f64,
    pub shell_offset: f64,
    pub boost: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundComponent {
    pub coefficient: Complex,
    pub kappa: f64,
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// `exp(e0) sinh(c) / c`
fn shc(e0: Complex, c: Complex) -> Complex {
    if c.norm() < 1.0 {
        let c2 = c * c;
        let (mut term, mut sum) = (ci(1.0, 0.0), ci(1.0, 0.0));
        for n in 1..14 {
            term *= c2 / ((2 * n) * (2 * n + 1)) as f64;
            sum += term;
        }
        e0.exp() * sum
    } else {
        ((e0 + c).exp() - (e0 - c).exp()) / (2.0 * c)
    }
}

/// `exp(e0) (cosh(c) - sinh(c)/c)`
fn chm(e0: Complex, c: Complex) -> Complex {
    if c.norm() < 1.0 {
        let c2 = c * c;
        let mut pow = ci(1.0, 0.0);
        let mut fact = 1.0;
        let mut sum = ci(0.0, 0.0);
        for n in 1..14 {
            pow *= c2;
            fact *= ((2 * n) * (2 * n + 1)) as f64;
            sum += pow * (2 * n) as f64 / fact;
        }
        e0.exp() * sum
    } else {
        let (p, m) = ((e0 + c).exp(), (e0 - c).exp());
        0.5 * (p + m) - (p - m) / (2.0 * c)
    }
}

/// Initial state: a Gaussian (optionally boosted or shell-shaped) or a
/// general radial profile, minus an optional bound-state component.
#[derive(Debug, Clone)]
pub struct WavePacket {
    gaussian: Option<GaussianShape>,
    amplitude: Complex,
    bound: Option<BoundComponent>,
    rpsi: ChebPanels,
    r_max: f64,
    scale: f64,
}

impl WavePacket {
    /// Normalized `N exp(-(r - r_s)^2 / 4 sigma^2 + i p0.x)`.
    pub fn gaussian(sigma: f64, shell_offset: f64, boost: [f64; 3]) -> Result<WavePacket> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(FasError::InvalidInput(format!("packet width sigma = {sigma}")));
        }
        if !(shell_offset >= 0.0 && shell_offset.is_finite()) || boost.iter().any(|b| !b.is_finite()) {
            return Err(FasError::InvalidInput("packet shell offset and boost must be finite".into()));
        }
        if shell_offset > 0.0 && norm3(boost) > 0.0 {
            return Err(FasError::InvalidInput("a packet cannot have both a shell offset and a boost".into()));
        }
        let shape = GaussianShape { sigma, shell_offset, boost };
        let r_max = shell_offset + 14.0 * sigma;
        let amplitude = if shell_offset == 0.0 {
            (2.0 * PI * sigma * sigma).powf(-0.75)
        } else {
            let rule = gauss_legendre(40);
            let panels = (r_max / sigma).ceil() as usize * 2;
            let h = r_max / panels as f64;
            let mut s = 0.0;
            for j in 0..panels {
                for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                    let r = (j as f64 + 0.5 + 0.5 * x) * h;
                    s += 0.5 * h * w * r * r * (-(r - shell_offset).powi(2) / (2.0 * sigma * sigma)).exp();
                }
            }
            1.0 / (FOUR_PI * s).sqrt()
        };
        let mut p = WavePacket {
            gaussian: Some(shape),
            amplitude: ci(amplitude, 0.0),
            bound: None,
            rpsi: ChebPanels::fit(&[0.0, 1.0], 4, |_| ci(0.0, 0.0)),
            r_max,
            scale: sigma,
        };
        p.rebuild_profile()?;
        Ok(p)
    }

    /// Normalized radial packet from `f(r)` on `[0, r_max]`.
    pub fn from_radial_profile(f: impl Fn(f64) -> Complex + Sync, r_max: f64, scale: f64) -> Result<WavePacket> {
        let edges = uniform_edges(0.0, r_max, (r_max / (0.5 * scale)).ceil() as usize);
        let probe = ChebPanels::fit(&edges, 24, |r| r * f(r));
        let peak = (0..200).map(|i| probe.eval(r_max * i as f64 / 199.0).norm()).fold(0.0, f64::max);
        let rpsi = ChebPanels::adaptive(&edges, 24, 2e-14 * peak.max(1e-300), |r| r * f(r))?;
        let n2 = FOUR_PI * panel_integral(&rpsi, |v| v.norm_sqr());
        if !(n2 > 0.0) {
            return Err(FasError::DegenerateProjection("radial profile has zero norm".into()));
        }
        let n = n2.sqrt();
        let rpsi = ChebPanels::fit(rpsi.edges(), rpsi.degree() + 1, |r| rpsi.eval(r) / n);
        Ok(WavePacket { gaussian: None, amplitude: ci(0.0, 0.0), bound: None, rpsi, r_max, scale })
    }

    fn gaussian_s(&self, r: f64) -> Complex {
        let Some(g) = self.gaussian else { return ci(0.0, 0.0) };
        let p0 = norm3(g.boost);
        let env = (-(r - g.shell_offset).powi(2) / (4.0 * g.sigma * g.sigma)).exp();
        let sinc = if p0 * r < 1e-4 { 1.0 - (p0 * r).powi(2) / 6.0 } else { (p0 * r).sin() / (p0 * r) };
        ci(env * sinc, 0.0)
    }

    fn rebuild_profile(&mut self) -> Result<()> {
        let mut r_max = self.r_max;
        if let Some(b) = self.bound {
            r_max = r_max.max(40.0 / b.kappa);
        }
        self.r_max = r_max;
        let h = 0.5 * self.scale.min(self.bound.map_or(f64::INFINITY, |b| 1.0 / b.kappa));
        let edges = uniform_edges(0.0, r_max, (r_max / h).ceil() as usize);
        let this = &*self;
        let f = |r: f64| {
            let mut v = this.amplitude * r * this.gaussian_s(r);
            if let Some(b) = this.bound {
                v -= b.coefficient * (b.kappa / (2.0 * PI)).sqrt() * (-b.kappa * r).exp();
            }
            v
        };
        let peak = (0..400).map(|i| f(r_max * i as f64 / 399.0).norm()).fold(0.0, f64::max);
        self.rpsi = ChebPanels::adaptive(&edges, 24, 2e-14 * peak.max(1e-300), f)?;
        Ok(())
    }

    pub fn shape(&self) -> Option<GaussianShape> {
        self.gaussian
    }

    pub fn bound_component(&self) -> Option<BoundComponent> {
        self.bound
    }

    pub fn length_scale(&self) -> f64 {
        self.scale
    }

    /// Radius beyond which the packet is negligible.
    pub fn support_radius(&self) -> f64 {
        self.r_max
    }

    /// Nonzero boost vector, if any.
    pub fn boost(&self) -> Option<[f64; 3]> {
        self.gaussian.map(|g| g.boost).filter(|b| norm3(*b) > 0.0)
    }

    pub fn is_radial(&self) -> bool {
        self.boost().is_none()
    }

    /// `r * psi0_s(r)` on Chebyshev panels.
    pub fn radial_profile(&self) -> &ChebPanels {
        &self.rpsi
    }

    /// s-wave (angular average) part of the packet.
    pub fn s_wave(&self, r: f64) -> Complex {
        if r < 1e-8 {
            self.rpsi.derivative(0.0)
        } else {
            self.rpsi.eval(r) / r
        }
    }

    /// `psi(r) = int psi0(r w) dw = 4 pi psi0_s(r)`
    pub fn angular_average(&self, r: f64) -> Complex {
        FOUR_PI * self.s_wave(r)
    }

    pub fn value(&self, x: [f64; 3]) -> Complex {
        self.s_wave(norm3(x)) + self.free_non_s(x, 0.0).0
    }

    /// Non-s-wave part evolved freely to time `t`: value and radial derivative.
    pub fn free_non_s(&self, x: [f64; 3], t: f64) -> (Complex, Complex) {
        let (Some(g), Some(p)) = (self.gaussian, self.boost()) else {
            return (ci(0.0, 0.0), ci(0.0, 0.0));
        };
        let s2 = g.sigma * g.sigma;
        let a = ci(s2, t);
        let r = norm3(x);
        let p0 = norm3(p);
        let pref = self.amplitude * (s2 / a).powf(1.5);
        let w = [ci(2.0 * s2 * p[0], x[0]), ci(2.0 * s2 * p[1], x[1]), ci(2.0 * s2 * p[2], x[2])];
        let ww = w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
        let e = ww / (4.0 * a) - s2 * p0 * p0;
        let full = pref * e.exp();
        let e0 = (4.0 * s2 * s2 * p0 * p0 - r * r) / (4.0 * a) - s2 * p0 * p0;
        let c = ci(0.0, s2 * p0 * r) / a;
        let avg = pref * shc(e0, c);
        if r == 0.0 {
            return (full - avg, ci(0.0, 0.0));
        }
        let xw = (x[0] * w[0] + x[1] * w[1] + x[2] * w[2]) / r;
        let d_full = full * ci(0.0, 1.0) * xw / (2.0 * a);
        let d_avg = pref * (-r / (2.0 * a) * shc(e0, c) + chm(e0, c) / r);
        (full - avg, d_full - d_avg)
    }

    /// Full momentum-space wave function.
    pub fn psi_hat(&self, k: [f64; 3]) -> Complex {
        self.psi_hat_s(norm3(k)) + self.non_s_hat(k)
    }

    pub fn non_s_hat(&self, k: [f64; 3]) -> Complex {
        let (Some(g), Some(p)) = (self.gaussian, self.boost()) else { return ci(0.0, 0.0) };
        let s2 = g.sigma * g.sigma;
        let km = norm3(k);
        let p0 = norm3(p);
        let d2 = (k[0] - p[0]).powi(2) + (k[1] - p[1]).powi(2) + (k[2] - p[2]).powi(2);
        let pref = self.amplitude * (2.0 * s2).powf(1.5);
        let full = (-s2 * d2).exp();
        let arg = 2.0 * s2 * km * p0;
        let avg = if arg < 1e-6 {
            (-s2 * (km * km + p0 * p0)).exp() * (1.0 + arg * arg / 6.0)
        } else {
            ((-s2 * (km - p0).powi(2)).exp() - (-s2 * (km + p0).powi(2)).exp()) / (2.0 * arg)
        };
        pref * (full - avg)
    }

    /// `sqrt(2/pi) int j0(k r) psi0_s(r) r^2 dr`
    pub fn psi_hat_s(&self, k: f64) -> Complex {
        free_evolve_with_gradient(&self.rpsi, k, 0.0, &OscSettings::default()).0
    }

    /// `int_0^inf exp(i k r) r psi0_s(r) dr` and its first `m` derivatives in `k`.
    pub fn spherical_moments(&self, k: f64, m: u32) -> Vec<Complex> {
        let moments: Vec<u32> = (0..=m).collect();
        let v = osc_integrate(&self.rpsi, Exponent { a: ci(0.0, 0.0), b: ci(0.0, -k) }, &moments, &OscSettings::default());
        v.into_iter().enumerate().map(|(j, x)| ci(0.0, 1.0).powu(j as u32) * x).collect()
    }

    /// `||psi0||^2` from the s-wave profile plus the closed-form rest.
    pub fn norm_sq(&self) -> f64 {
        let s = FOUR_PI * panel_integral(&self.rpsi, |v| v.norm_sqr());
        s + self.non_s_norm_sq()
    }

    fn non_s_norm_sq(&self) -> f64 {
        let (Some(g), Some(_)) = (self.gaussian, self.boost()) else { return 0.0 };
        let full = self.amplitude.norm_sqr() * (2.0 * PI * g.sigma * g.sigma).powf(1.5);
        let bare = FOUR_PI * panel_integral(&self.rpsi, |v| v.norm_sqr());
        full - bare
    }

    /// `<phi, psi0>` for a radial function `phi` given as `r phi(r)`.
    pub fn overlap_radial(&self, r_phi: impl Fn(f64) -> f64) -> Complex {
        let rule = gauss_legendre(32);
        let mut s = ci(0.0, 0.0);
        for w in self.rpsi.edges().windows(2) {
            let (c, h) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
            for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
                let r = c + h * x;
                s += h * wt * r_phi(r) * self.rpsi.eval(r);
            }
        }
        FOUR_PI * s
    }

    /// Linear combination `a * self + b * other` of two radial packets, not renormalized.
    pub fn combine(&self, a: Complex, other: &WavePacket, b: Complex) -> Result<WavePacket> {
        if !(self.is_radial() && other.is_radial()) {
            return Err(FasError::InvalidInput("only radial packets can be combined".into()));
        }
        let r_max = self.r_max.max(other.r_max);
        let scale = self.scale.min(other.scale);
        let edges = uniform_edges(0.0, r_max, (r_max / (0.5 * scale)).ceil() as usize);
        let f = |r: f64| a * self.rpsi.eval(r) + b * other.rpsi.eval(r);
        let rpsi = ChebPanels::adaptive(&edges, 24, 1e-14, f)?;
        Ok(WavePacket { gaussian: None, amplitude: ci(0.0, 0.0), bound: None, rpsi, r_max, scale })
    }
}

pub(crate) fn uniform_edges(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let n = n.max(1);
    (0..=n).map(|j| lo + (hi - lo) * j as f64 / n as f64).collect()
}

/// `int f(p(r)) dr` over the panels of `p` with Gauss-Legendre.
pub(crate) fn panel_integral(p: &ChebPanels, f: impl Fn(Complex) -> f64) -> f64 {
    let rule = gauss_legendre(32);
    let mut s = 0.0;
    for w in p.edges().windows(2) {
        let (c, h) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
        for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
            s += h * wt * f(p.eval(c + h * x));
        }
    }
    s
}

pub(crate) fn panel_integral_r(edges: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let rule = gauss_legendre(32);
    let mut s = 0.0;
    for w in edges.windows(2) {
        let (c, h) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
        for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
            s += h * wt * f(c + h * x);
        }
    }
    s
}

/// Remove the bound-state component for `gamma > 0` and renormalize.
pub fn project_ac(psi0: &WavePacket, pi: &PointInteraction) -> Result<WavePacket> {
    let Some(kappa) = pi.kappa() else { return Ok(psi0.clone()) };
    if psi0.bound.is_some() {
        return Err(FasError::InvalidInput("packet already carries a bound-state projection".into()));
    }
    let norm = (kappa / (2.0 * PI)).sqrt();
    let c = psi0.overlap_radial(|r| norm * (-kappa * r).exp());
    let rpsi = &psi0.rpsi;
    let reach = psi0.r_max.max(40.0 / kappa);
    let edges = uniform_edges(0.0, reach, (reach / (0.5 * psi0.scale.min(1.0 / kappa))).ceil() as usize);
    let rest = FOUR_PI
        * panel_integral_r(&edges, |r| (rpsi.eval(r) - c * norm * (-kappa * r).exp()).norm_sqr())
        + psi0.non_s_norm_sq();
    if !(rest.max(0.0).sqrt() >= 1e-8) {
        return Err(FasError::DegenerateProjection("packet is parallel to the bound state".into()));
    }
    let n = rest.sqrt();
    if psi0.gaussian.is_none() {
        let bound = BoundComponent { coefficient: c, kappa };
        let rpsi = psi0.rpsi.clone();
        let f = move |r: f64| (rpsi.eval(r) - bound.coefficient * norm * (-kappa * r).exp()) / n;
        let mut p = WavePacket::from_radial_profile(move |r| if r > 0.0 { f(r) / r } else { ci(0.0, 0.0) }, psi0.r_max.max(40.0 / kappa), psi0.scale.min(1.0 / kappa))?;
        p.bound = None;
        return Ok(p);
    }
    let mut out = psi0.clone();
    out.amplitude = psi0.amplitude / n;
    out.bound = Some(BoundComponent { coefficient: c / n, kappa });
    out.rebuild_profile()?;
    Ok(out)
}

/// What scatters the s-wave.
#[derive(Debug, Clone)]
pub enum Scatterer {
    Free,
    Point(PointInteraction),
    Potential(Arc<crate::lsradial::PotentialModel>),
}

/// Interior table for potential models: `k phi(r_i, k)` on the panels of `g`.
#[derive(Debug, Clone)]
pub(crate) struct Interior {
    pub r_v: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub chi: Vec<ChebPanels>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralOptions {
    /// bound on `int_{K}^inf |g|^2 dk` beyond the cutoff
    pub tail_tol: f64,
    pub degree: usize,
    /// Chebyshev tail tolerance relative to `max |g|`
    pub fit_tol: f64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions { tail_tol: 1e-10, degree: 24, fit_tol: 1e-13 }
    }
}

/// Outgoing state `psi_out = F_+ psi0`.
#[derive(Debug, Clone)]
pub struct SpectralState {
    pub packet: WavePacket,
    pub scatterer: Scatterer,
    g: ChebPanels,
    s: ChebPanels,
    interior: Option<Interior>,
    /// coefficient of `1/|k|` in `psi_out`
    pub singular_coefficient: Complex,
    /// zeroth-order Laurent coefficient of `psi_out` at `k = 0`
    pub laurent_c: Complex,
    pub k_max: f64,
    pub tail: f64,
}

/// Values and radial derivatives at one point, split into the free part
/// `alpha` and the scattered part `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FieldSample {
    pub alpha: Complex,
    pub beta: Complex,
    pub d_alpha: Complex,
    /// full radial derivative of beta
    pub d_beta: Complex,
    /// `d_beta + beta / r`, the part of the derivative that is not `-beta/r`
    pub d_beta_r: Complex,
}

impl FieldSample {
    pub fn psi(&self) -> Complex {
        self.alpha + self.beta
    }

    pub fn d_psi(&self) -> Complex {
        self.d_alpha + self.d_beta
    }

    pub fn current(&self) -> f64 {
        current(self.psi(), self.d_psi())
    }

    /// `Im(alpha* d beta + beta* d alpha + beta* d beta)` with the real
    /// `-|beta|^2 / r` term dropped analytically.
    pub fn cross_current(&self) -> f64 {
        (self.alpha.conj() * self.d_beta + self.beta.conj() * self.d_alpha + self.beta.conj() * self.d_beta_r).im
    }
}

/// Radial probability current `Im(psi* d psi)`.
pub fn current(value: Complex, gradient: Complex) -> f64 {
    (value.conj() * gradient).im
}

/// Pieces of the s-wave evolution for the resonant point interaction.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Decomposition {
    pub alpha_reg: Complex,
    pub alpha_sing: Complex,
    pub beta_sing2: Complex,
    pub beta_sing1: Complex,
    pub beta_reg: Complex,
    /// radial derivatives of the beta pieces without their `-beta/x` terms
    pub d_beta_sing2_r: Complex,
    pub d_beta_sing1_r: Complex,
    pub d_beta_reg_r: Complex,
}

impl Decomposition {
    pub fn alpha(&self) -> Complex {
        self.alpha_reg + self.alpha_sing
    }
    pub fn beta(&self) -> Complex {
        self.beta_sing2 + self.beta_sing1 + self.beta_reg
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolutionRecord {
    pub value: Complex,
    pub gradient: Complex,
    pub sample: FieldSample,
    pub decomposition: Decomposition,
}

/// Closed form of `sqrt(2/pi) int exp(-(1+it) k^2) j0(k x) k dk`.
pub fn alpha_sing_kernel(x: f64, t: f64) -> Result<Complex> {
    let sa = ci(1.0, t).sqrt();
    let z = ci(0.0, x) / (2.0 * sa);
    if x == 0.0 {
        return Ok(c2pi() / (2.0 * ci(1.0, t)));
    }
    Ok(ci(0.0, 1.0) * phi_odd(z)? / (2.0 * 2f64.sqrt() * x * sa))
}

impl SpectralState {
    pub(crate) fn assemble(
        packet: WavePacket,
        scatterer: Scatterer,
        g: ChebPanels,
        s: ChebPanels,
        interior: Option<Interior>,
        singular_coefficient: Complex,
        tail: f64,
    ) -> SpectralState {
        let laurent_c = g.derivative(0.0);
        let k_max = *g.edges().last().unwrap();
        SpectralState { packet, scatterer, g, s, interior, singular_coefficient, laurent_c, k_max, tail }
    }

    /// `g(k) = k psi_out_s(k)`
    pub fn g(&self) -> &ChebPanels {
        &self.g
    }

    pub fn s_matrix(&self) -> &ChebPanels {
        &self.s
    }

    pub fn is_free(&self) -> bool {
        matches!(self.scatterer, Scatterer::Free)
    }

    /// Radius outside which the s-wave has its exterior form.
    pub fn interaction_radius(&self) -> f64 {
        self.interior.as_ref().map_or(0.0, |i| i.r_v)
    }

    pub fn psi_out_s(&self, k: f64) -> Complex {
        self.g.eval(k) / k
    }

    pub fn psi_out(&self, k: [f64; 3]) -> Complex {
        self.psi_out_s(norm3(k)) + self.packet.non_s_hat(k)
    }

    /// `psi_out - (r/k) exp(-k^2)`, bounded at the origin.
    pub fn f1(&self, k: f64) -> Complex {
        if k < 1e-6 {
            return self.laurent_c;
        }
        (self.g.eval(k) - self.singular_coefficient * (-k * k).exp()) / k
    }

    pub fn f2(&self, k: f64) -> Complex {
        self.g.eval(k)
    }

    /// `psi_out/k - (r/k^2 + c/k) exp(-k^2)`
    pub fn f3(&self, k: f64) -> Complex {
        let r = self.singular_coefficient;
        (self.g.eval(k) - (r + self.laurent_c * k) * (-k * k).exp()) / (k * k)
    }

    /// `int |psi_out|^2 d^3k`
    pub fn norm_sq(&self) -> f64 {
        FOUR_PI * panel_integral(&self.g, |v| v.norm_sqr()) + self.packet.non_s_norm_sq()
    }

    /// s-wave part at radius `r` and time `t`.
    pub fn radial_sample(&self, r: f64, t: f64, s: &OscSettings) -> FieldSample {
        let (alpha, d_alpha) = free_evolve_with_gradient(&self.g, r, t, s);
        if self.is_free() {
            return FieldSample { alpha, d_alpha, ..Default::default() };
        }
        if let Some(int) = &self.interior {
            if r < int.r_v {
                let psi = self.interior_value(r, t, s);
                let nan = ci(f64::NAN, f64::NAN);
                return FieldSample { alpha, beta: psi - alpha, d_alpha, d_beta: nan, d_beta_r: nan };
            }
        }
        let amp = FnAmplitude { edges: self.g.edges(), f: |p, k: Complex| self.g.eval_panel(p, k) * (1.0 - self.s.eval_panel(p, k)), growth: 0.0 };
        let v = osc_integrate(&amp, Exponent::schrodinger(t, r, 0.0), &[0, 1], s);
        let beta = c2pi() * v[0] / ci(0.0, 2.0 * r);
        let d_beta_r = -c2pi() * v[1] / (2.0 * r);
        FieldSample { alpha, beta, d_alpha, d_beta: d_beta_r - beta / r, d_beta_r }
    }

    /// s-wave value inside the potential range, by interpolation of the
    /// tabulated interior eigenfunctions in `r`.
    fn interior_value(&self, r: f64, t: f64, s: &OscSettings) -> Complex {
        let int = self.interior.as_ref().unwrap();
        let e = Exponent::schrodinger(t, 0.0, 0.0);
        let eval_node = |i: usize| {
            let amp = FnAmplitude { edges: self.g.edges(), f: |p, k: Complex| self.g.eval_panel(p, k) * int.chi[i].eval_panel(p, k), growth: 0.0 };
            c2pi() * osc_integrate(&amp, e, &[0], s)[0]
        };
        if let Some(i) = int.nodes.iter().position(|&x| (x - r).abs() <= 1e-12 * int.r_v) {
            return eval_node(i);
        }
        // local Lagrange interpolation on the nearest eight nodes
        let n = int.nodes.len();
        let j = int.nodes.partition_point(|&x| x < r).clamp(4, n - 4);
        let idx: Vec<usize> = (j - 4..j + 4).collect();
        let vals: Vec<Complex> = idx.iter().map(|&i| eval_node(i)).collect();
        let mut out = ci(0.0, 0.0);
        for (a, &ia) in idx.iter().enumerate() {
            let mut w = 1.0;
            for &ib in &idx {
                if ib != ia {
                    w *= (r - int.nodes[ib]) / (int.nodes[ia] - int.nodes[ib]);
                }
            }
            out += w * vals[a];
        }
        out
    }

    /// Interior quadrature nodes and weights of a potential model.
    pub fn interior_nodes(&self) -> Option<(&[f64], &[f64])> {
        self.interior.as_ref().map(|i| (i.nodes.as_slice(), i.weights.as_slice()))
    }

    /// s-wave value at an interior quadrature node.
    pub fn interior_node_value(&self, i: usize, t: f64, s: &OscSettings) -> Complex {
        let int = self.interior.as_ref().expect("interior table");
        let amp = FnAmplitude { edges: self.g.edges(), f: |p, k: Complex| self.g.eval_panel(p, k) * int.chi[i].eval_panel(p, k), growth: 0.0 };
        c2pi() * osc_integrate(&amp, Exponent::schrodinger(t, 0.0, 0.0), &[0], s)[0]
    }

    /// Full field at point `x` (3D) and time `t`, reusing an s-wave sample at `|x|`.
    pub fn sample_with(&self, swave: &FieldSample, x: [f64; 3], t: f64) -> FieldSample {
        let (v, d) = self.packet.free_non_s(x, t);
        FieldSample { alpha: swave.alpha + v, d_alpha: swave.d_alpha + d, ..*swave }
    }

    pub fn sample(&self, x: [f64; 3], t: f64) -> FieldSample {
        let sw = self.radial_sample(norm3(x), t, &OscSettings::default());
        self.sample_with(&sw, x, t)
    }
}

/// Outgoing state of a packet for the point interaction (or the free case).
pub fn outgoing_state_point(psi0: &WavePacket, pi: &PointInteraction, opts: &SpectralOptions) -> Result<SpectralState> {
    if pi.has_bound_state() {
        let kappa = pi.kappa().unwrap();
        let ov = psi0.overlap_radial(|r| (kappa / (2.0 * PI)).sqrt() * (-kappa * r).exp());
        if ov.norm() > 1e-8 {
            return Err(FasError::InvalidInput(format!(
                "packet overlaps the bound state ({:.2e}); project it first",
                ov.norm()
            )));
        }
    }
    let gamma4 = FOUR_PI * pi.gamma;
    let free = pi.is_free();
    let sample = |k: f64| -> Vec<Complex> {
        let plus = psi0.spherical_moments(k, 0)[0];
        let minus = psi0.spherical_moments(-k, 0)[0];
        let mut g = (plus - minus) / ci(0.0, 2.0);
        if !free {
            g += -k / ci(gamma4, k) * plus;
        }
        vec![c2pi() * g, pi.s_matrix(k)]
    };
    let r = if pi.is_resonant() { ci(0.0, 1.0) * c2pi() * psi0.spherical_moments(0.0, 0)[0] } else { ci(0.0, 0.0) };
    let scatterer = if free { Scatterer::Free } else { Scatterer::Point(*pi) };
    build_state(psi0, scatterer, opts, &sample, r)
}

pub(crate) fn momentum_core(psi0: &WavePacket) -> f64 {
    psi0.boost().map_or(0.0, norm3) + 12.0 / psi0.length_scale()
}

/// Choose the cutoff, fit `g`, the S-matrix and any extra columns, and assemble.
pub(crate) fn build_state(
    psi0: &WavePacket,
    scatterer: Scatterer,
    opts: &SpectralOptions,
    sample: &(dyn Fn(f64) -> Vec<Complex> + Sync),
    r: Complex,
) -> Result<SpectralState> {
    let (edges, tail) = momentum_edges(psi0, opts, &|k| sample(k)[0])?;
    let fits = fit_columns(&edges, opts, sample, 2)?;
    let mut it = fits.into_iter();
    let (g, s) = (it.next().unwrap(), it.next().unwrap());
    Ok(SpectralState::assemble(psi0.clone(), scatterer, g, s, None, r, tail))
}

pub(crate) fn build_state_with_interior(
    psi0: &WavePacket,
    scatterer: Scatterer,
    opts: &SpectralOptions,
    sample: &(dyn Fn(f64) -> Vec<Complex> + Sync),
    r: Option<Complex>,
    mut interior: Interior,
) -> Result<SpectralState> {
    let (edges, tail) = momentum_edges(psi0, opts, &|k| sample(k)[0])?;
    let mut fits = fit_columns(&edges, opts, sample, 2)?.into_iter();
    let (g, s) = (fits.next().unwrap(), fits.next().unwrap());
    interior.chi = fits.collect();
    let r = r.unwrap_or_else(|| g.eval(0.0));
    Ok(SpectralState::assemble(psi0.clone(), scatterer, g, s, Some(interior), r, tail))
}

pub(crate) fn momentum_edges(psi0: &WavePacket, opts: &SpectralOptions, g: &(dyn Fn(f64) -> Complex + Sync)) -> Result<(Vec<f64>, f64)> {
    let core = momentum_core(psi0);
    let mut kmax = core;
    let tail = loop {
        let t = g(kmax).norm_sqr() * kmax;
        if t <= opts.tail_tol {
            break t;
        }
        if kmax > 2e5 {
            return Err(accuracy("momentum cutoff search", t));
        }
        kmax *= 2.0;
    };
    let w = (6.0 / psi0.support_radius()).min(0.5);
    let mut edges = uniform_edges(0.0, core, (core / w).ceil() as usize);
    let mut k = core;
    while k < kmax {
        k = (k * 1.25).min(kmax);
        edges.push(k);
    }
    Ok((edges, tail))
}

/// Adaptive Chebyshev fit of several columns sampled together; the first
/// `checked` columns drive the refinement.
pub(crate) fn fit_columns(
    edges: &[f64],
    opts: &SpectralOptions,
    sample: &(dyn Fn(f64) -> Vec<Complex> + Sync),
    checked: usize,
) -> Result<Vec<ChebPanels>> {
    let n = opts.degree;
    let u: Vec<f64> = (0..n).map(|j| (PI * (j as f64 + 0.5) / n as f64).cos()).collect();
    let mut pending: Vec<(f64, f64, usize)> = edges.windows(2).map(|w| (w[0], w[1], 0)).collect();
    let mut done: Vec<(f64, f64, Vec<Vec<Complex>>)> = Vec::new();
    let mut scale: Vec<f64> = Vec::new();
    while !pending.is_empty() {
        let vals: Vec<Vec<Vec<Complex>>> = pending
            .par_iter()
            .map(|&(a, b, _)| u.iter().map(|&x| sample(0.5 * (a + b) + 0.5 * (b - a) * x)).collect())
            .collect();
        let ncol = vals[0][0].len();
        if scale.is_empty() {
            scale = vec![0.0; ncol];
        }
        for panel in &vals {
            for row in panel {
                for (c, v) in row.iter().enumerate() {
                    if !v.re.is_finite() || !v.im.is_finite() {
                        return Err(FasError::Numerical("non-finite spectral sample".into()));
                    }
                    scale[c] = scale[c].max(v.norm());
                }
            }
        }
        let mut next = Vec::new();
        for ((a, b, depth), panel) in pending.into_iter().zip(vals) {
            let cols: Vec<Vec<Complex>> = (0..ncol).map(|c| panel.iter().map(|row| row[c]).collect()).collect();
            let coeffs: Vec<Vec<Complex>> = cols.iter().map(|v| crate::quadrature::chebyshev_coefficients(v)).collect();
            let worst = (0..checked)
                .map(|c| coeffs[c][n - 1].norm().max(coeffs[c][n - 2].norm()) / scale[c].max(1e-300))
                .fold(0.0, f64::max);
            if worst <= opts.fit_tol || (depth >= 12 && worst <= 100.0 * opts.fit_tol) {
                done.push((a, b, coeffs));
            } else if depth >= 24 {
                return Err(accuracy(format!("spectral fit on [{a:.3e}, {b:.3e}]"), worst));
            } else {
                let m = 0.5 * (a + b);
                next.push((a, m, depth + 1));
                next.push((m, b, depth + 1));
            }
        }
        pending = next;
    }
    done.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let mut e: Vec<f64> = done.iter().map(|d| d.0).collect();
    e.push(done.last().unwrap().1);
    let ncol = done[0].2.len();
    Ok((0..ncol)
        .map(|c| ChebPanels::from_coefficients(e.clone(), done.iter().map(|d| d.2[c].clone()).collect()))
        .collect())
}

/// Evaluate the s-wave at `(x, t)` together with the decomposition into
/// singular and regular pieces (nonzero singular pieces only for `gamma = 0`).
pub fn evolve_point(spec: &SpectralState, x: f64, t: f64) -> Result<EvolutionRecord> {
    if !(x > 0.0) || !(t >= 0.0) {
        return Err(FasError::InvalidInput(format!("evolve_point at x = {x}, t = {t}")));
    }
    let s = OscSettings::default();
    let sample = spec.radial_sample(x, t, &s);
    let r = spec.singular_coefficient;
    let c = spec.laurent_c;
    let mut d = Decomposition::default();
    let a = ci(1.0, t);
    let e = Exponent::schrodinger(t, x, 0.0);
    let pre = c2pi() * ci(0.0, -1.0) / x;
    if r != ci(0.0, 0.0) {
        d.alpha_sing = r * alpha_sing_kernel(x, t)?;
        let f1 = FnAmplitude { edges: spec.g.edges(), f: |p, k: Complex| spec.g.eval_panel(p, k) - r * (-k * k).exp(), growth: 0.0 };
        d.alpha_reg = free_evolve_with_gradient(&f1, x, t, &s).0;
        let b = ci(0.0, x);
        d.beta_sing2 = pre * r * gauss_moment(0, a, b)?;
        d.beta_sing1 = pre * c * gauss_moment(1, a, b)?;
        d.d_beta_sing2_r = -c2pi() / x * r * gauss_moment(1, a, b)?;
        d.d_beta_sing1_r = -c2pi() / x * c * gauss_moment(2, a, b)?;
        // S = -1 at gamma = 0, so 1 - S = 2
        let f3 = FnAmplitude {
            edges: spec.g.edges(),
            f: |p, k: Complex| spec.g.eval_panel(p, k) - (r + c * k) * (-k * k).exp(),
            growth: 0.0,
        };
        let v = osc_integrate(&f3, e, &[0, 1], &s);
        d.beta_reg = pre * v[0];
        d.d_beta_reg_r = -c2pi() / x * v[1];
    } else {
        d.alpha_reg = sample.alpha;
        d.beta_reg = sample.beta;
        d.d_beta_reg_r = sample.d_beta_r;
    }
    Ok(EvolutionRecord { value: sample.psi(), gradient: sample.d_psi(), sample, decomposition: d })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub order: u32,
    pub slope: f64,
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayProfile {
    /// false when the outgoing state has no scattered part
    pub singular: bool,
    pub k_range: (f64, f64),
    pub fits: Vec<DecayFit>,
}

/// Scattered part `zeta(k) = psi_out_s - psi0_s` of the point model and its
/// `k`-derivatives up to order `m`, differentiating under the integral.
pub fn zeta_derivatives(spec: &SpectralState, k: f64, m: u32) -> Result<Vec<Complex>> {
    let Scatterer::Point(pi) = spec.scatterer else {
        return Ok(vec![ci(0.0, 0.0); m as usize + 1]);
    };
    let g4 = FOUR_PI * pi.gamma;
    let moments = spec.packet.spherical_moments(k, m);
    // coefficient -sqrt(2/pi) / (4 pi gamma + i k) and its derivatives
    let denom = ci(g4, k);
    let coef = |n: u32| -> Complex {
        let mut f = 1.0;
        for j in 1..=n {
            f *= j as f64;
        }
        -c2pi() * f * ci(0.0, -1.0).powu(n) / denom.powu(n + 1)
    };
    let mut out = Vec::with_capacity(m as usize + 1);
    for order in 0..=m {
        let mut s = ci(0.0, 0.0);
        let mut binom = 1.0;
        for j in 0..=order {
            if j > 0 {
                binom *= (order - j + 1) as f64 / j as f64;
            }
            s += binom * coef(order - j) * moments[j as usize];
        }
        out.push(s);
    }
    Ok(out)
}

/// Log-log decay fits of `|d^m zeta / dk^m|` over two decades ending at `k_hi`.
pub fn decay_profile(spec: &SpectralState, orders: &[u32], k_hi: f64) -> Result<DecayProfile> {
    let k_lo = k_hi / 100.0;
    if spec.is_free() || !matches!(spec.scatterer, Scatterer::Point(_)) {
        return Ok(DecayProfile { singular: false, k_range: (k_lo, k_hi), fits: vec![] });
    }
    if orders.iter().any(|&m| m > 5) {
        return Err(FasError::InvalidInput("decay orders above 5".into()));
    }
    let m_max = orders.iter().copied().max().unwrap_or(0);
    let ks: Vec<f64> = (0..=40).map(|i| k_lo * 100f64.powf(i as f64 / 40.0)).collect();
    let values: Vec<Vec<Complex>> = ks.par_iter().map(|&k| zeta_derivatives(spec, k, m_max)).collect::<Result<_>>()?;
    let mut fits = Vec::new();
    for &m in orders {
        let ys: Vec<f64> = values.iter().map(|v| v[m as usize].norm()).collect();
        if ys.iter().any(|&y| !(y > 1e-14)) {
            let worst = ys.iter().copied().fold(f64::INFINITY, f64::min);
            return Err(accuracy(format!("decay fit for order {m}: signal below 1e-14"), worst));
        }
        let (slope, icpt) = linear_fit(&ks.iter().map(|k| k.ln()).collect::<Vec<_>>(), &ys.iter().map(|y| y.ln()).collect::<Vec<_>>());
        fits.push(DecayFit { order: m, slope, constant: icpt.exp() });
    }
    Ok(DecayProfile { singular: true, k_range: (k_lo, k_hi), fits })
}

/// Least-squares line `y = slope x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
