//! Quadrature rules, piecewise Chebyshev interpolants and the oscillatory
//! integrator behind every time evolution in the crate.
//!
//! The integrator evaluates `int_0^K A(k) k^m exp(-(a k^2 + b k)) dk` where
//! `A` is analytic on each panel (a Chebyshev polynomial, possibly times an
//! entire factor). Away from the saddle of the exponent each panel piece is
//! replaced by two steepest descent paths leaving its endpoints, integrated
//! with Gauss-Laguerre. The cost is then independent of `t` and `r`. Pieces
//! near the saddle, or with too few oscillations for the path to stay close
//! to the panel, fall back to composite Gauss-Legendre.

use crate::{accuracy, Complex, FasError, Result};
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::OnceLock;

#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

const MAX_GL: usize = 64;

fn compute_gauss_legendre(n: usize) -> Rule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 1.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[n - 1 - i] = z;
        weights[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
    }
    Rule { nodes, weights }
}

/// Gauss-Legendre rule on `[-1, 1]` with nodes in ascending order, `1 <= n <= 64`.
pub fn gauss_legendre(n: usize) -> &'static Rule {
    static CACHE: OnceLock<Vec<Rule>> = OnceLock::new();
    assert!((1..=MAX_GL).contains(&n), "Gauss-Legendre order {n} out of range");
    &CACHE.get_or_init(|| (1..=MAX_GL).map(compute_gauss_legendre).collect())[n - 1]
}

fn compute_gauss_laguerre(n: usize) -> Rule {
    let mut nodes = vec![0.0f64; n];
    let mut weights = vec![0.0f64; n];
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..n {
        z = match i {
            0 => 3.0 / (1.0 + 2.4 * nf),
            1 => z + 15.0 / (1.0 + 2.5 * nf),
            _ => {
                let ai = (i - 1) as f64;
                z + (1.0 + 2.55 * ai) / (1.9 * ai) * (z - nodes[i - 2])
            }
        };
        let (mut p1, mut p2, mut pp) = (1.0, 0.0, 1.0);
        for _ in 0..200 {
            p1 = 1.0;
            p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 - z) * p2 / (j + 1) as f64 - j as f64 * p3 / (j + 1) as f64;
            }
            pp = nf * (p1 - p2) / z;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs() {
                break;
            }
        }
        let _ = p1;
        nodes[i] = z;
        weights[i] = -1.0 / (pp * nf * p2);
    }
    Rule { nodes, weights }
}

/// Gauss-Laguerre rule for `int_0^inf exp(-p) f(p) dp`.
pub fn gauss_laguerre(n: usize) -> &'static Rule {
    static CACHE: OnceLock<Vec<(usize, Rule)>> = OnceLock::new();
    let rules = CACHE.get_or_init(|| [24, 32, 48].iter().map(|&n| (n, compute_gauss_laguerre(n))).collect());
    &rules
        .iter()
        .find(|(m, _)| *m == n)
        .unwrap_or_else(|| panic!("Gauss-Laguerre order {n} not tabulated"))
        .1
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridKind {
    Uniform,
    Graded { exponent: f64 },
}

/// Composite Gauss-Legendre nodes and weights on `[0, r_max]`.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub edges: Vec<f64>,
    pub kind: GridKind,
}

impl RadialGrid {
    pub fn uniform(r_max: f64, panels: usize, order: usize) -> RadialGrid {
        let edges = (0..=panels).map(|j| r_max * j as f64 / panels as f64).collect();
        Self::from_edges(edges, order, GridKind::Uniform)
    }

    /// Edges `r_max (j/M)^exponent`, clustering panels near the origin.
    pub fn graded(r_max: f64, panels: usize, order: usize, exponent: f64) -> RadialGrid {
        let edges = (0..=panels)
            .map(|j| r_max * (j as f64 / panels as f64).powf(exponent))
            .collect();
        Self::from_edges(edges, order, GridKind::Graded { exponent })
    }

    pub fn from_edges(edges: Vec<f64>, order: usize, kind: GridKind) -> RadialGrid {
        let rule = gauss_legendre(order);
        let mut nodes = Vec::with_capacity((edges.len() - 1) * order);
        let mut weights = Vec::with_capacity(nodes.capacity());
        for w in edges.windows(2) {
            let (c, h) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
            for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
                nodes.push(c + h * x);
                weights.push(h * wt);
            }
        }
        RadialGrid { nodes, weights, edges, kind }
    }

    pub fn r_max(&self) -> f64 {
        *self.edges.last().unwrap()
    }
}

/// Spherical Bessel `j0(z) = sin z / z`.
pub fn sinc(z: Complex) -> Complex {
    if z.norm() < 1e-3 {
        let z2 = z * z;
        1.0 - z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sin() / z
    }
}

/// Spherical Bessel `j1(z) = (sin z - z cos z) / z^2`.
pub fn sph_j1(z: Complex) -> Complex {
    if z.norm() < 0.05 {
        let z2 = z * z;
        z * (1.0 / 3.0 - z2 / 30.0 + z2 * z2 / 840.0 - z2 * z2 * z2 / 45360.0)
    } else {
        (z.sin() - z * z.cos()) / (z * z)
    }
}

/// Discrete radial transform `sqrt(2/pi) int j0(k r) f(r) r^2 dr` on a grid.
/// The same kernel serves both directions. `tail_bound` is the caller's bound
/// on the neglected part of the integral beyond the grid.
pub fn radial_fourier(profile: &[Complex], grid: &RadialGrid, ks: &[f64], tail_bound: f64) -> Result<Vec<Complex>> {
    if profile.len() != grid.nodes.len() {
        return Err(FasError::InvalidInput(format!(
            "radial_fourier: {} samples for {} grid nodes",
            profile.len(),
            grid.nodes.len()
        )));
    }
    if !(tail_bound <= 1e-10) {
        return Err(accuracy("radial_fourier: profile not contained in grid", tail_bound));
    }
    let c = (2.0 / PI).sqrt();
    Ok(ks
        .par_iter()
        .map(|&k| {
            let mut s = Complex::new(0.0, 0.0);
            for ((&r, &w), &f) in grid.nodes.iter().zip(&grid.weights).zip(profile) {
                s += w * r * r * sinc(Complex::new(k * r, 0.0)).re * f;
            }
            c * s
        })
        .collect())
}

/// Piecewise Chebyshev interpolant with complex values, evaluable at complex
/// arguments inside each panel's Bernstein ellipse.
#[derive(Debug, Clone)]
pub struct ChebPanels {
    edges: Vec<f64>,
    coeffs: Vec<Vec<Complex>>,
}

fn cheb_nodes(n: usize) -> Vec<f64> {
    (0..n).map(|j| (PI * (j as f64 + 0.5) / n as f64).cos()).collect()
}

pub(crate) fn chebyshev_coefficients(values: &[Complex]) -> Vec<Complex> {
    cheb_coeffs(values)
}

fn cheb_coeffs(values: &[Complex]) -> Vec<Complex> {
    let n = values.len();
    let mut c = vec![Complex::new(0.0, 0.0); n];
    for (m, cm) in c.iter_mut().enumerate() {
        let mut s = Complex::new(0.0, 0.0);
        for (j, v) in values.iter().enumerate() {
            s += v * (PI * m as f64 * (j as f64 + 0.5) / n as f64).cos();
        }
        *cm = s * (2.0 / n as f64);
    }
    c[0] *= 0.5;
    c
}

fn clenshaw(c: &[Complex], u: Complex) -> Complex {
    let (mut b1, mut b2) = (Complex::new(0.0, 0.0), Complex::new(0.0, 0.0));
    for &cm in c.iter().skip(1).rev() {
        let b0 = 2.0 * u * b1 - b2 + cm;
        b2 = b1;
        b1 = b0;
    }
    u * b1 - b2 + c[0]
}

impl ChebPanels {
    /// Interpolate `f` at `n` Chebyshev points on each panel.
    pub fn fit(edges: &[f64], n: usize, f: impl Fn(f64) -> Complex + Sync) -> ChebPanels {
        let u = cheb_nodes(n);
        let coeffs = edges
            .par_windows(2)
            .map(|w| {
                let vals: Vec<Complex> = u.iter().map(|&x| f(0.5 * (w[0] + w[1]) + 0.5 * (w[1] - w[0]) * x)).collect();
                cheb_coeffs(&vals)
            })
            .collect();
        ChebPanels { edges: edges.to_vec(), coeffs }
    }

    /// Like [`fit`](Self::fit) but bisects panels until the last two
    /// coefficients fall below `abs_tol`.
    pub fn adaptive(edges: &[f64], n: usize, abs_tol: f64, f: impl Fn(f64) -> Complex + Sync) -> Result<ChebPanels> {
        let u = cheb_nodes(n);
        let mut pending: Vec<(f64, f64, usize)> = edges.windows(2).map(|w| (w[0], w[1], 0)).collect();
        let mut done: Vec<(f64, Vec<Complex>)> = Vec::new();
        while !pending.is_empty() {
            let fitted: Vec<Vec<Complex>> = pending
                .par_iter()
                .map(|&(a, b, _)| {
                    let vals: Vec<Complex> = u.iter().map(|&x| f(0.5 * (a + b) + 0.5 * (b - a) * x)).collect();
                    cheb_coeffs(&vals)
                })
                .collect();
            let mut next = Vec::new();
            for ((a, b, depth), c) in pending.into_iter().zip(fitted) {
                let tail = c[n - 1].norm().max(c[n - 2].norm());
                if !tail.is_finite() {
                    return Err(FasError::Numerical(format!("non-finite samples on [{a}, {b}]")));
                }
                if tail <= abs_tol {
                    done.push((a, c));
                } else if depth >= 20 {
                    return Err(accuracy(format!("Chebyshev fit on [{a}, {b}]"), tail));
                } else {
                    let m = 0.5 * (a + b);
                    next.push((a, m, depth + 1));
                    next.push((m, b, depth + 1));
                }
            }
            pending = next;
        }
        done.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        let mut new_edges: Vec<f64> = done.iter().map(|d| d.0).collect();
        new_edges.push(*edges.last().unwrap());
        Ok(ChebPanels { edges: new_edges, coeffs: done.into_iter().map(|d| d.1).collect() })
    }

    pub(crate) fn from_coefficients(edges: Vec<f64>, coeffs: Vec<Vec<Complex>>) -> ChebPanels {
        ChebPanels { edges, coeffs }
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn degree(&self) -> usize {
        self.coeffs[0].len() - 1
    }

    pub fn panel_of(&self, k: f64) -> Option<usize> {
        let e = &self.edges;
        if !(k >= e[0] && k <= e[e.len() - 1]) {
            return None;
        }
        let p = e.partition_point(|&x| x <= k);
        Some(p.saturating_sub(1).min(e.len() - 2))
    }

    fn local(&self, p: usize, k: Complex) -> Complex {
        let (a, b) = (self.edges[p], self.edges[p + 1]);
        (2.0 * k - (a + b)) / (b - a)
    }

    /// Value at real `k`; zero outside the covered interval.
    pub fn eval(&self, k: f64) -> Complex {
        match self.panel_of(k) {
            Some(p) => clenshaw(&self.coeffs[p], self.local(p, Complex::new(k, 0.0))),
            None => Complex::new(0.0, 0.0),
        }
    }

    pub fn eval_panel(&self, p: usize, k: Complex) -> Complex {
        clenshaw(&self.coeffs[p], self.local(p, k))
    }

    /// First derivative at real `k`.
    pub fn derivative(&self, k: f64) -> Complex {
        let Some(p) = self.panel_of(k) else { return Complex::new(0.0, 0.0) };
        let c = &self.coeffs[p];
        let n = c.len();
        let mut d = vec![Complex::new(0.0, 0.0); n];
        for m in (1..n).rev() {
            let above = if m + 1 < n { d[m + 1] } else { Complex::new(0.0, 0.0) };
            d[m - 1] = above + 2.0 * m as f64 * c[m];
        }
        d[0] *= 0.5;
        let scale = 2.0 / (self.edges[p + 1] - self.edges[p]);
        clenshaw(&d[..n - 1], self.local(p, Complex::new(k, 0.0))) * scale
    }

    /// Largest trailing coefficient over all panels.
    pub fn tail_coefficient(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|c| c[c.len() - 1].norm().max(c[c.len() - 2].norm()))
            .fold(0.0, f64::max)
    }
}

/// Integrand factor that is analytic on each panel.
pub trait Amplitude: Sync {
    fn edges(&self) -> &[f64];
    fn eval(&self, panel: usize, k: Complex) -> Complex;
    /// Exponential growth rate of the amplitude off the real axis.
    fn growth(&self) -> f64 {
        0.0
    }
}

impl Amplitude for ChebPanels {
    fn edges(&self) -> &[f64] {
        &self.edges
    }
    fn eval(&self, panel: usize, k: Complex) -> Complex {
        self.eval_panel(panel, k)
    }
}

/// Amplitude given by a closure over the panels of another amplitude.
pub struct FnAmplitude<'a, F> {
    pub edges: &'a [f64],
    pub f: F,
    pub growth: f64,
}

impl<'a, F: Fn(usize, Complex) -> Complex + Sync> Amplitude for FnAmplitude<'a, F> {
    fn edges(&self) -> &[f64] {
        self.edges
    }
    fn eval(&self, panel: usize, k: Complex) -> Complex {
        (self.f)(panel, k)
    }
    fn growth(&self) -> f64 {
        self.growth
    }
}

/// Exponent `-(a k^2 + b k)` with `Re a >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponent {
    pub a: Complex,
    pub b: Complex,
}

impl Exponent {
    /// `exp(-i (t k^2 + s k)) * exp(-damping k^2)`
    pub fn schrodinger(t: f64, s: f64, damping: f64) -> Exponent {
        Exponent { a: Complex::new(damping, t), b: Complex::new(0.0, s) }
    }

    fn slope(&self, x: f64) -> Complex {
        2.0 * self.a * x + self.b
    }

    fn value(&self, x: f64) -> Complex {
        (-(self.a * x * x + self.b * x)).exp()
    }

    /// Which asymptotic valley the descent path from `x` ends in.
    fn valley(&self, x: f64) -> i32 {
        if self.a.norm() == 0.0 {
            return 1;
        }
        if (self.a.sqrt() * self.slope(x).conj()).re >= 0.0 {
            1
        } else {
            -1
        }
    }

    /// Sub-interval of `[lo, hi]` on which `|2 a x + b| < thr`.
    fn slow_interval(&self, thr: f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
        let qa = 4.0 * self.a.norm_sqr();
        let qb = 4.0 * (self.a * self.b.conj()).re;
        let qc = self.b.norm_sqr() - thr * thr;
        let (l, u) = if qa <= 1e-300 {
            if qc < 0.0 {
                (lo, hi)
            } else {
                return None;
            }
        } else {
            let disc = qb * qb - 4.0 * qa * qc;
            if disc <= 0.0 {
                return None;
            }
            let sd = disc.sqrt();
            ((-qb - sd) / (2.0 * qa), (-qb + sd) / (2.0 * qa))
        };
        let (l, u) = (l.max(lo), u.min(hi));
        (l < u).then_some((l, u))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscSettings {
    /// minimum `|2 a x + b| * panel width` for a descent path
    pub omega: f64,
    /// minimum `|2 a x + b|^2 / (4 |a|)` for a descent path
    pub nonlinear: f64,
    pub laguerre: usize,
    pub gl_order: usize,
    /// phase budget per Gauss-Legendre sub-panel
    pub phase: f64,
}

impl Default for OscSettings {
    fn default() -> Self {
        OscSettings { omega: 150.0, nonlinear: 40.0, laguerre: 32, gl_order: 32, phase: 12.0 }
    }
}

impl OscSettings {
    pub fn refined() -> Self {
        OscSettings { omega: 300.0, nonlinear: 80.0, laguerre: 48, gl_order: 40, phase: 6.0 }
    }
}

struct Accum<'a> {
    moments: &'a [u32],
    out: Vec<Complex>,
}

impl Accum<'_> {
    fn add(&mut self, k: Complex, f: Complex) {
        for (o, &m) in self.out.iter_mut().zip(self.moments) {
            *o += f * k.powu(m);
        }
    }
}

/// `int k^m A(k) exp(-(a k^2 + b k)) dk` over the panels of `amp`, one value
/// per requested moment.
pub fn osc_integrate(amp: &dyn Amplitude, e: Exponent, moments: &[u32], s: &OscSettings) -> Vec<Complex> {
    let edges = amp.edges();
    let lag = gauss_laguerre(s.laguerre);
    let gl = gauss_legendre(s.gl_order);
    let mut acc = Accum { moments, out: vec![Complex::new(0.0, 0.0); moments.len()] };
    let base_thr = (4.0 * e.a.norm() * s.nonlinear).sqrt().max(4.0 * amp.growth());

    let descent = |acc: &mut Accum, p: usize, x0: f64, sign: f64| {
        let b0 = e.slope(x0);
        let pre = e.value(x0) * sign;
        if pre == Complex::new(0.0, 0.0) {
            return;
        }
        let b0sq = b0 * b0;
        for (&pj, &wj) in lag.nodes.iter().zip(&lag.weights) {
            let mut sq = (b0sq + 4.0 * e.a * pj).sqrt();
            if (sq * b0.conj()).re < 0.0 {
                sq = -sq;
            }
            let k = x0 + 2.0 * pj / (b0 + sq);
            acc.add(k, pre * wj * amp.eval(p, k) / sq);
        }
    };
    let legendre = |acc: &mut Accum, p: usize, lo: f64, hi: f64| {
        let rate = e.slope(lo).norm().max(e.slope(hi).norm());
        let subs = ((rate * (hi - lo) / s.phase).ceil() as usize).max(1);
        let h = (hi - lo) / subs as f64;
        for j in 0..subs {
            let c = lo + (j as f64 + 0.5) * h;
            for (&x, &w) in gl.nodes.iter().zip(&gl.weights) {
                let k = c + 0.5 * h * x;
                let kc = Complex::new(k, 0.0);
                acc.add(kc, 0.5 * h * w * e.value(k) * amp.eval(p, kc));
            }
        }
    };

    for p in 0..edges.len() - 1 {
        let (lo, hi) = (edges[p], edges[p + 1]);
        if hi <= lo {
            continue;
        }
        let thr = base_thr.max(s.omega / (hi - lo));
        let fast = |acc: &mut Accum, x0: f64, x1: f64| {
            if e.valley(x0) == e.valley(x1) {
                descent(acc, p, x0, 1.0);
                descent(acc, p, x1, -1.0);
            } else {
                legendre(acc, p, x0, x1);
            }
        };
        match e.slow_interval(thr, lo, hi) {
            None => fast(&mut acc, lo, hi),
            Some((l, u)) => {
                if l > lo {
                    fast(&mut acc, lo, l);
                }
                legendre(&mut acc, p, l, u);
                if u < hi {
                    fast(&mut acc, u, hi);
                }
            }
        }
    }
    acc.out
}

/// [`osc_integrate`] with an error estimate from a second, refined pass.
pub fn osc_integrate_checked(
    amp: &dyn Amplitude,
    e: Exponent,
    moments: &[u32],
    abs_tol: f64,
    rel_tol: f64,
) -> Result<(Vec<Complex>, f64)> {
    let coarse = osc_integrate(amp, e, moments, &OscSettings::default());
    let fine = osc_integrate(amp, e, moments, &OscSettings::refined());
    let mut err = 0.0f64;
    let mut ok = true;
    for (c, f) in coarse.iter().zip(&fine) {
        let d = (c - f).norm();
        if !d.is_finite() {
            return Err(FasError::Numerical("oscillatory integral is not finite".into()));
        }
        err = err.max(d);
        ok &= d <= abs_tol.max(rel_tol * f.norm());
    }
    if ok {
        Ok((fine, err))
    } else {
        Err(accuracy("oscillatory integral", err))
    }
}

/// `int_0^inf exp(-i (k^2 t + k r)) f(k) k^m dk`, optionally times `exp(-k^2)`,
/// with certified error `<= max(1e-9, 1e-6 |result|)`.
pub fn oscillatory_radial_integral(f: &ChebPanels, t: f64, r: f64, damping: bool, m: u32) -> Result<(Complex, f64)> {
    let e = Exponent::schrodinger(t, r, if damping { 1.0 } else { 0.0 });
    let (v, err) = osc_integrate_checked(f, e, &[m], 1e-9, 1e-6)?;
    Ok((v[0], err))
}

/// Free evolution of a radial state given `g(k) = k fhat(k)`:
/// returns `alpha(x,t) = sqrt(2/pi) int exp(-i k^2 t) fhat(k) j0(k x) k^2 dk`
/// and its radial derivative.
pub fn free_evolve_with_gradient(g: &dyn Amplitude, x: f64, t: f64, s: &OscSettings) -> (Complex, Complex) {
    let c = (2.0 / PI).sqrt();
    let kmax = *g.edges().last().unwrap();
    if x * kmax < 5.0 || x < 1e-3 {
        let e = Exponent::schrodinger(t, 0.0, 0.0);
        let val = FnAmplitude {
            edges: g.edges(),
            f: |p, k: Complex| g.eval(p, k) * k * sinc(k * x),
            growth: x + g.growth(),
        };
        let grad = FnAmplitude {
            edges: g.edges(),
            f: |p, k: Complex| -g.eval(p, k) * k * k * sph_j1(k * x),
            growth: x + g.growth(),
        };
        let a = osc_integrate(&val, e, &[0], s)[0];
        let d = osc_integrate(&grad, e, &[0], s)[0];
        return (c * a, c * d);
    }
    let out = osc_integrate(g, Exponent::schrodinger(t, -x, 0.0), &[0, 1], s);
    let inc = osc_integrate(g, Exponent::schrodinger(t, x, 0.0), &[0, 1], s);
    let alpha = c * (out[0] - inc[0]) / Complex::new(0.0, 2.0 * x);
    let grad = -alpha / x + c * (out[1] + inc[1]) / (2.0 * x);
    (alpha, grad)
}

pub fn free_evolve(g: &dyn Amplitude, x: f64, t: f64) -> Complex {
    free_evolve_with_gradient(g, x, t, &OscSettings::default()).0
}

/// Radial derivative by a sixth-order central difference.
pub fn gradient_radial(f: impl Fn(f64) -> Complex, x: f64, h: f64) -> Complex {
    let c = [(1.0, 3.0 / 4.0), (2.0, -3.0 / 20.0), (3.0, 1.0 / 60.0)];
    let mut s = Complex::new(0.0, 0.0);
    for (j, w) in c {
        s += w * (f(x + j * h) - f(x - j * h));
    }
    s / h
}

/// [`gradient_radial`] with the step picked from a halving ladder: the step
/// whose estimate agrees best with the next finer one is used. Fails when no
/// two neighbouring estimates agree to `rel`.
pub fn gradient_radial_controlled(f: impl Fn(f64) -> Complex, x: f64, rel: f64) -> Result<Complex> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(FasError::InvalidInput(format!("gradient at x = {x}")));
    }
    let h0 = (0.25 * x).min(0.5);
    let d: Vec<Complex> = (0..14).map(|j| gradient_radial(&f, x, h0 * 0.5f64.powi(j))).collect();
    let (j, diff) = d.windows(2).map(|w| (w[0] - w[1]).norm()).enumerate().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    let best = d[j + 1];
    if !(diff <= rel * best.norm()) {
        return Err(FasError::Numerical(format!("difference quotient at x = {x} does not settle (spread {diff:.2e})")));
    }
    Ok(best)
}

/// Adaptive Gauss-Legendre integration of a vector-valued integrand.
/// Intervals are refined level by level; the integrand is evaluated in
/// parallel and the sum is taken in interval order, so the result does not
/// depend on the thread count.
pub fn integrate_adaptive(
    f: &(dyn Fn(f64) -> Vec<f64> + Sync),
    breakpoints: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let lo = gauss_legendre(8);
    let hi = gauss_legendre(16);
    let total_len = breakpoints[breakpoints.len() - 1] - breakpoints[0];
    let mut pending: Vec<(f64, f64)> = breakpoints.windows(2).map(|w| (w[0], w[1])).collect();
    let mut accepted: Vec<(f64, Vec<f64>, Vec<f64>)> = Vec::new();
    let mut scale: Option<Vec<f64>> = None;
    while !pending.is_empty() {
        let res: Vec<(Vec<f64>, Vec<f64>)> = pending
            .par_iter()
            .map(|&(a, b)| {
                let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
                let eval = |rule: &Rule| -> Vec<f64> {
                    let mut acc: Vec<f64> = Vec::new();
                    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                        let v = f(c + h * x);
                        if acc.is_empty() {
                            acc = vec![0.0; v.len()];
                        }
                        for (s, vi) in acc.iter_mut().zip(v) {
                            *s += h * w * vi;
                        }
                    }
                    acc
                };
                (eval(hi), eval(lo))
            })
            .collect();
        let sc = scale.get_or_insert_with(|| {
            let n = res[0].0.len();
            (0..n).map(|i| res.iter().map(|r| r.0[i].abs()).sum::<f64>()).collect()
        });
        for (i, s) in sc.iter_mut().enumerate() {
            let est: f64 = accepted.iter().map(|a| a.1[i]).sum::<f64>() + res.iter().map(|r| r.0[i]).sum::<f64>();
            *s = s.max(est.abs());
        }
        let mut next = Vec::new();
        for ((a, b), (vh, vl)) in pending.into_iter().zip(res) {
            let frac = (b - a) / total_len;
            let err: Vec<f64> = vh.iter().zip(&vl).map(|(x, y)| (x - y).abs()).collect();
            let ok = err
                .iter()
                .zip(sc.iter())
                .all(|(e, s)| *e <= frac * abs_tol.max(rel_tol * s) || *e <= 1e-15 * s);
            if ok {
                accepted.push((a, vh, err));
            } else {
                let m = 0.5 * (a + b);
                next.push((a, m));
                next.push((m, b));
            }
        }
        if accepted.len() + next.len() > max_intervals {
            let err: f64 = next.len() as f64;
            return Err(accuracy("adaptive quadrature exceeded its interval budget", err));
        }
        pending = next;
    }
    accepted.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let n = accepted[0].1.len();
    let mut total = vec![0.0; n];
    let mut errs = vec![0.0; n];
    for (_, v, e) in &accepted {
        for i in 0..n {
            total[i] += v[i];
            errs[i] += e[i];
        }
    }
    Ok((total, errs))
}
