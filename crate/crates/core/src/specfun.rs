//! Scaled complementary error function on the complex plane, the odd
//! combination `erfcx(z) - erfcx(-z)`, truncated Gaussian moments and the
//! homogeneity test used for the `O_{[a,b]}` bounds.
//!
//! `erfcx` is evaluated through the Faddeeva function `w(z) = erfcx(-iz)`
//! in the closed upper half-plane with a shifted trapezoidal rule plus the
//! pole correction of Matta and Reichel. The aliasing error is of order
//! `exp(-(pi/h)^2)`, far below double precision for the step used here.

use crate::{Complex, FasError, Result};
use std::f64::consts::PI;

const SQRT_PI: f64 = 1.772_453_850_905_516;
const STEP: f64 = 0.45;
const NODE_CUTOFF: f64 = 6.8;

/// Faddeeva function for `Im z >= 0`.
fn faddeeva_upper(z: Complex) -> Complex {
    let h = STEP;
    let (x, y) = (z.re, z.im);
    // shift the nodes so that Re z sits halfway between two of them
    let theta = (x / h + 0.5).rem_euclid(1.0);
    let n_lo = ((-NODE_CUTOFF / h) - theta).floor() as i64;
    let n_hi = ((NODE_CUTOFF / h) - theta).ceil() as i64;
    let mut sum = Complex::new(0.0, 0.0);
    for n in n_lo..=n_hi {
        let t = (n as f64 + theta) * h;
        sum += (-t * t).exp() / (z - t);
    }
    let mut w = Complex::new(0.0, h / PI) * sum;
    if y < PI / h {
        let q = (Complex::new(0.0, -2.0 * PI / h) * (z - theta * h)).exp();
        w += 2.0 * (-z * z).exp() / (1.0 - q);
    }
    w
}

fn erfcx_raw(z: Complex) -> Complex {
    if z.re >= 0.0 {
        faddeeva_upper(Complex::new(-z.im, z.re))
    } else {
        2.0 * (z * z).exp() - faddeeva_upper(Complex::new(z.im, -z.re))
    }
}

/// `exp(z^2) erfc(z)` for complex `z`.
///
/// Accurate to about 1e-13 relative error for `|arg z| <= 3pi/4`, `|z| <= 50`,
/// and wherever the value itself is representable.
pub fn erfcx(z: Complex) -> Result<Complex> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(FasError::Domain(format!("erfcx: non-finite argument {z}")));
    }
    let w = erfcx_raw(z);
    if w.re.is_finite() && w.im.is_finite() {
        Ok(w)
    } else {
        Err(FasError::Domain(format!("erfcx({z}) overflows")))
    }
}

/// Series for `erf` near the origin.
fn erf_series(z: Complex) -> Complex {
    let z2 = z * z;
    let mut term = z;
    let mut sum = z;
    for n in 1..60 {
        term *= -z2 / n as f64;
        let add = term / (2 * n + 1) as f64;
        sum += add;
        if add.norm() < 1e-17 * sum.norm() {
            break;
        }
    }
    sum * (2.0 / SQRT_PI)
}

/// `phi(z) = erfcx(z) - erfcx(-z)`, odd in `z`, with `phi(z)/z -> -4/sqrt(pi)`.
pub fn phi_odd(z: Complex) -> Result<Complex> {
    if z.norm() < 0.5 {
        return Ok(-2.0 * (z * z).exp() * erf_series(z));
    }
    Ok(erfcx(z)? - erfcx(-z)?)
}

/// `1 - sqrt(pi) z erfcx(z)`, computed without cancellation for large `|z|`.
pub fn erfcx_remainder(z: Complex) -> Result<Complex> {
    let r = z.norm();
    if r < 8.0 {
        return Ok(1.0 - SQRT_PI * z * erfcx(z)?);
    }
    if z.re < 0.0 {
        let e = (z * z).exp();
        let v = erfcx_remainder(-z)? - 2.0 * SQRT_PI * z * e;
        return if v.re.is_finite() && v.im.is_finite() {
            Ok(v)
        } else {
            Err(FasError::Domain(format!("erfcx_remainder({z}) overflows")))
        };
    }
    // asymptotic series, truncated well before its smallest term
    let inv = 1.0 / (2.0 * z * z);
    let mut term = Complex::new(-1.0, 0.0);
    let mut sum = Complex::new(0.0, 0.0);
    for n in 1..40 {
        term *= -inv * (2 * n - 1) as f64;
        sum += term;
        if term.norm() < 1e-17 * sum.norm() {
            break;
        }
    }
    Ok(sum)
}

/// Truncated Gaussian moment `G_m(a, b) = int_0^inf k^m exp(-a k^2 - b k) dk`
/// for `Re a > 0` and `m <= 4`.
pub fn gauss_moment(m: u32, a: Complex, b: Complex) -> Result<Complex> {
    if !(a.re > 0.0) {
        return Err(FasError::Domain(format!("gauss_moment: Re a must be positive, got {a}")));
    }
    if m > 4 {
        return Err(FasError::InvalidInput(format!("gauss_moment: order {m} > 4")));
    }
    let sa = a.sqrt();
    let z = b / (2.0 * sa);
    let g0 = SQRT_PI / (2.0 * sa) * erfcx(z)?;
    if m == 0 {
        return Ok(g0);
    }
    let g1 = erfcx_remainder(z)? / (2.0 * a);
    let (mut prev, mut cur) = (g0, g1);
    for j in 2..=m {
        let next = ((j - 1) as f64 * prev - b * cur) / (2.0 * a);
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Samples `|F(x_i, t_j)|` on a tensor lattice, stored row-major in `x`.
#[derive(Debug, Clone)]
pub struct Lattice {
    pub xs: Vec<f64>,
    pub ts: Vec<f64>,
    pub values: Vec<f64>,
}

impl Lattice {
    /// Log-spaced lattice filled from a closure.
    pub fn sample(
        x_range: (f64, f64),
        t_range: (f64, f64),
        per_decade: usize,
        f: impl Fn(f64, f64) -> f64,
    ) -> Lattice {
        let xs = log_space(x_range.0, x_range.1, per_decade);
        let ts = log_space(t_range.0, t_range.1, per_decade);
        let mut values = Vec::with_capacity(xs.len() * ts.len());
        for &x in &xs {
            for &t in &ts {
                values.push(f(x, t).abs());
            }
        }
        Lattice { xs, ts, values }
    }

    fn sup(&self, nu: f64, tau: f64, ix: &[usize], it: &[usize]) -> f64 {
        let mut best = 0.0f64;
        for &i in ix {
            for &j in it {
                let (x, t) = (self.xs[i], self.ts[j]);
                let v = (x / t.powf(nu)).powf(tau) * self.values[i * self.ts.len() + j];
                best = if v.is_nan() { f64::INFINITY } else { best.max(v) };
            }
        }
        best
    }
}

pub fn log_space(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let n = ((decades * per_decade as f64).round() as usize).max(1);
    (0..=n).map(|i| lo * (hi / lo).powf(i as f64 / n as f64)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneityResult {
    pub tau: f64,
    pub constant: f64,
    /// relative change of the constant between the lattice and its
    /// every-other-node sub-lattice
    pub refinement_drift: f64,
    /// relative growth of the constant from the lower half (in log scale) of
    /// the lattice to the full lattice
    pub extension_drift: f64,
    pub stable: bool,
}

/// Sampled estimate of `sup (x / t^nu)^tau |F(x,t)|` for each `tau`.
pub fn homogeneity_check(lattice: &Lattice, nu: f64, taus: &[f64]) -> Vec<HomogeneityResult> {
    let all_x: Vec<usize> = (0..lattice.xs.len()).collect();
    let all_t: Vec<usize> = (0..lattice.ts.len()).collect();
    let coarse = |n: usize| -> Vec<usize> {
        let mut v: Vec<usize> = (0..n).step_by(2).collect();
        if *v.last().unwrap() != n - 1 {
            v.push(n - 1);
        }
        v
    };
    let inner = |g: &[f64]| -> Vec<usize> {
        let mid = (g[0] * g[g.len() - 1]).sqrt() * (1.0 + 1e-12);
        (0..g.len()).filter(|&i| g[i] <= mid).collect()
    };
    let (cx, ct) = (coarse(lattice.xs.len()), coarse(lattice.ts.len()));
    let (ix, it) = (inner(&lattice.xs), inner(&lattice.ts));
    taus.iter()
        .map(|&tau| {
            let c = lattice.sup(nu, tau, &all_x, &all_t);
            let c_coarse = lattice.sup(nu, tau, &cx, &ct);
            let c_inner = lattice.sup(nu, tau, &ix, &it);
            let refinement_drift = if c > 0.0 { (c - c_coarse).abs() / c } else { 0.0 };
            let extension_drift = if c_inner > 0.0 { c / c_inner - 1.0 } else if c > 0.0 { f64::INFINITY } else { 0.0 };
            let stable = c.is_finite() && refinement_drift < 0.2 && extension_drift < 0.2;
            HomogeneityResult { tau, constant: c, refinement_drift, extension_drift, stable }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    // erfcx(z) = 2/sqrt(pi) int_0^inf exp(-t^2 - 2 z t) dt, valid for every z
    fn erfcx_by_quadrature(z: Complex) -> Complex {
        let (x, w) = gl(64);
        let mut s = Complex::new(0.0, 0.0);
        let panels = 400;
        let len = 12.0 / panels as f64;
        for p in 0..panels {
            let a = p as f64 * len;
            for i in 0..x.len() {
                let t = a + 0.5 * len * (x[i] + 1.0);
                s += 0.5 * len * w[i] * (-t * t - 2.0 * z * t).exp();
            }
        }
        s * 2.0 / SQRT_PI
    }

    fn gl(n: usize) -> (Vec<f64>, Vec<f64>) {
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        for i in 0..n {
            let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (mut p1, mut p2) = (1.0, 0.0);
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
                }
                let pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
                let dz = p1 / pp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    x[i] = z;
                    w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
                    break;
                }
            }
        }
        (x, w)
    }

    #[test]
    fn erfcx_at_origin_is_one() {
        let v = erfcx(c(0.0, 0.0)).unwrap();
        assert!((v - 1.0).norm() < 1e-15);
    }

    #[test]
    fn erfcx_real_five() {
        let v = erfcx(c(5.0, 0.0)).unwrap();
        assert_relative_eq!(v.re, 0.110_704_637_733_068_6, max_relative = 1e-13);
        assert!(v.im.abs() < 1e-16);
    }

    #[test]
    fn erfcx_matches_quadrature() {
        for z in [c(0.0, 2.0), c(0.3, -1.7), c(-0.8, 0.4), c(2.5, 3.5), c(-1.0, -2.0)] {
            let a = erfcx(z).unwrap();
            let b = erfcx_by_quadrature(z);
            assert!((a - b).norm() / b.norm() < 1e-12, "z={z}: {a} vs {b}");
        }
    }

    #[test]
    fn erfcx_overflow_is_an_error() {
        assert!(erfcx(c(-30.0, 0.0)).is_err());
        assert!(erfcx(c(f64::NAN, 0.0)).is_err());
    }

    #[test]
    fn phi_odd_matches_quadrature() {
        let z = c(0.5, 0.5);
        let want = erfcx_by_quadrature(z) - erfcx_by_quadrature(-z);
        let got = phi_odd(z).unwrap();
        assert!((got - want).norm() / want.norm() < 1e-12);
    }

    #[test]
    fn phi_odd_small_argument_limit() {
        let z = c(1e-9, 2e-9);
        let r = phi_odd(z).unwrap() / z;
        assert!((r + 4.0 / SQRT_PI).norm() < 1e-12);
    }

    #[test]
    fn phi_odd_bounded_for_nonpositive_tau() {
        // |z^tau phi(z)| on the closed sector pi/4 <= arg z <= 3pi/4
        for tau in [-1.0, -0.5, 0.0] {
            let mut inner = 0.0f64;
            let mut outer = 0.0f64;
            for i in 0..=40 {
                let arg = PI / 4.0 + i as f64 / 40.0 * PI / 2.0;
                for &r in &log_space(0.1, 100.0, 30) {
                    let z = Complex::from_polar(r, arg);
                    let v = r.powf(tau) * phi_odd(z).unwrap().norm();
                    if r <= 10.0 {
                        inner = inner.max(v);
                    }
                    outer = outer.max(v);
                }
            }
            assert!(outer.is_finite() && outer <= 1.2 * inner, "tau={tau}: {inner} {outer}");
        }
    }

    #[test]
    fn phi_odd_bounded_for_positive_tau_away_from_diagonals() {
        let d = 0.2;
        for tau in [0.5, 1.0] {
            let mut inner = 0.0f64;
            let mut outer = 0.0f64;
            for i in 0..=40 {
                let arg = PI / 4.0 + d + i as f64 / 40.0 * (PI / 2.0 - 2.0 * d);
                for &r in &log_space(0.1, 100.0, 30) {
                    let v = r.powf(tau) * phi_odd(Complex::from_polar(r, arg)).unwrap().norm();
                    if r <= 10.0 {
                        inner = inner.max(v);
                    }
                    outer = outer.max(v);
                }
            }
            assert!(outer <= 1.2 * inner, "tau={tau}: {inner} {outer}");
        }
    }

    #[test]
    fn phi_odd_grows_on_the_diagonal_for_positive_tau() {
        // on arg z = pi/4 we have |exp(z^2)| = 1, so |z phi(z)| ~ 2|z|
        let at = |r: f64| r * phi_odd(Complex::from_polar(r, PI / 4.0)).unwrap().norm();
        assert!(at(100.0) > 8.0 * at(10.0));
        assert_relative_eq!(at(100.0) / 100.0, 2.0, max_relative = 0.02);
    }

    #[test]
    fn gauss_moment_basic_values() {
        let one = c(1.0, 0.0);
        let zero = c(0.0, 0.0);
        assert_relative_eq!(gauss_moment(0, one, zero).unwrap().re, SQRT_PI / 2.0, max_relative = 1e-14);
        assert_relative_eq!(gauss_moment(1, one, zero).unwrap().re, 0.5, max_relative = 1e-14);
        assert_relative_eq!(gauss_moment(2, one, zero).unwrap().re, SQRT_PI / 4.0, max_relative = 1e-14);
        assert_relative_eq!(gauss_moment(3, one, zero).unwrap().re, 0.5, max_relative = 1e-14);
    }

    #[test]
    fn gauss_moment_matches_quadrature() {
        let (x, w) = gl(64);
        for (a, b) in [(c(1.0, 2.0), c(0.0, 3.0)), (c(0.5, -1.0), c(1.0, -2.0)), (c(1.0, 5.0), c(0.0, 20.0))] {
            for m in 0..=4u32 {
                let mut s = Complex::new(0.0, 0.0);
                let panels = 800;
                let len = 12.0 / a.re.sqrt() / panels as f64;
                for p in 0..panels {
                    for i in 0..x.len() {
                        let k = p as f64 * len + 0.5 * len * (x[i] + 1.0);
                        s += 0.5 * len * w[i] * k.powi(m as i32) * (-a * k * k - b * k).exp();
                    }
                }
                let g = gauss_moment(m, a, b).unwrap();
                assert!((g - s).norm() <= 1e-11 * s.norm().max(1e-3), "m={m} a={a} b={b}: {g} vs {s}");
            }
        }
    }

    #[test]
    fn gauss_moment_rejects_bad_input() {
        assert!(matches!(gauss_moment(0, c(0.0, 1.0), c(0.0, 0.0)), Err(FasError::Domain(_))));
        assert!(gauss_moment(5, c(1.0, 0.0), c(0.0, 0.0)).is_err());
    }

    #[test]
    fn remainder_asymptotic_matches_direct_form() {
        for z in [c(8.5, 0.5), c(6.0, 6.0), c(-6.0, 6.5), c(0.5, 9.0)] {
            let a = erfcx_remainder(z).unwrap();
            let b = 1.0 - SQRT_PI * z * erfcx(z).unwrap();
            assert!((a - b).norm() < 1e-12, "{z}: {a} {b}");
        }
    }

    #[test]
    fn homogeneity_flags_exponential_growth() {
        let lat = Lattice::sample((1.0, 100.0), (1.0, 100.0), 10, |x, t| x * (x / t).exp());
        let r = homogeneity_check(&lat, 1.0, &[0.0]);
        assert!(!r[0].stable);
    }

    #[test]
    fn homogeneity_accepts_homogeneous_decay() {
        let lat = Lattice::sample((10.0, 1000.0), (10.0, 1000.0), 10, |x, t| t.powf(-1.5) / (1.0 + x / t));
        for r in homogeneity_check(&lat, 1.0, &[0.0, 0.5, 1.0]) {
            assert!(r.stable, "{r:?}");
        }
    }

    proptest! {
        #[test]
        fn conjugate_symmetry(re in -8.0f64..8.0, im in -8.0f64..8.0) {
            let z = c(re, im);
            prop_assume!(erfcx(z).is_ok());
            let a = erfcx(z.conj()).unwrap();
            let b = erfcx(z).unwrap().conj();
            prop_assert!((a - b).norm() <= 1e-13 * b.norm());
        }

        #[test]
        fn reflection_identity(re in -5.0f64..5.0, im in -5.0f64..5.0) {
            let z = c(re, im);
            let lhs = erfcx(z).unwrap() + erfcx(-z).unwrap();
            let rhs = 2.0 * (z * z).exp();
            prop_assert!((lhs - rhs).norm() <= 1e-12 * rhs.norm().max(1.0));
        }

        #[test]
        fn phi_is_odd(re in -6.0f64..6.0, im in -6.0f64..6.0) {
            let z = c(re, im);
            let a = phi_odd(z).unwrap();
            let b = phi_odd(-z).unwrap();
            prop_assert!((a + b).norm() <= 1e-12 * a.norm().max(1e-300));
        }

        #[test]
        fn moment_recurrence(ar in 0.1f64..3.0, ai in -5.0f64..5.0, br in -2.0f64..2.0, bi in -10.0f64..10.0) {
            let (a, b) = (c(ar, ai), c(br, bi));
            let g: Vec<Complex> = (0..=4).map(|m| gauss_moment(m, a, b).unwrap()).collect();
            for m in 2..=4usize {
                let lhs = 2.0 * a * g[m] + b * g[m - 1];
                let rhs = (m - 1) as f64 * g[m - 2];
                prop_assert!((lhs - rhs).norm() <= 1e-12 * (rhs.norm() + (b * g[m - 1]).norm()));
            }
        }
    }
}
