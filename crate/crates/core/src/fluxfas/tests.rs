use super::*;
use crate::pointmodel::{alpha_sing_kernel, evolve_point, outgoing_state_point, SpectralOptions, WavePacket};
use crate::Complex;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

fn state(gamma: Option<f64>, boost: [f64; 3]) -> SpectralState {
    let p = WavePacket::gaussian(1.0, 0.0, boost).unwrap();
    let pi = gamma.map_or(PointInteraction::free(), |g| PointInteraction::new(g).unwrap());
    outgoing_state_point(&p, &pi, &SpectralOptions::default()).unwrap()
}

#[test]
fn plane_wave_current() {
    for (k, r) in [(0.5, 1.0), (2.0, 7.3), (-1.5, 0.2)] {
        let v = Complex::new(0.0, k * r).exp();
        assert!((radial_current(v, Complex::new(0.0, k) * v) - k).abs() < 1e-15);
    }
    assert_eq!(radial_current(Complex::new(0.7, 0.0), Complex::new(-3.0, 0.0)), 0.0);
}

#[test]
fn current_matches_finite_difference() {
    let st = state(Some(0.0), [0.0; 3]);
    let (x, t, h) = (40.0, 10.0, 1e-2);
    let f = |y: f64| evolve_point(&st, y, t).unwrap().value;
    let d = (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h);
    let oracle = radial_current(f(x), d);
    let j = st.radial_sample(x, t, &OscSettings::default()).current();
    assert!((j - oracle).abs() < 1e-5 * oracle.abs(), "{j} {oracle}");
}

#[test]
fn half_sphere_carries_half_the_radial_flux() {
    let st = state(Some(0.0), [0.0; 3]);
    let full = surface_flux(&st, 20.0, 8.0, &ConeSurface::full_sphere(), FluxMode::Signed).unwrap();
    let half = surface_flux(&st, 20.0, 8.0, &ConeSurface::new([1.0, 2.0, 0.5], 0.5 * PI).unwrap(), FluxMode::Signed).unwrap();
    assert!((half - 0.5 * full).abs() < 1e-14 * full.abs());
}

#[test]
fn free_gaussian_flux_matches_closed_form() {
    // psi_t = N (a / (a + it))^{3/2} exp(-r^2 / 4(a + it)), a = sigma^2
    let st = state(None, [0.0; 3]);
    let r = 30.0;
    let oracle = |t: f64| {
        let w = Complex::new(1.0, t);
        let psi = (2.0 * PI).powf(-0.75) * (1.0 / w).powf(1.5) * (-r * r / (4.0 * w)).exp();
        let d = -r / (2.0 * w) * psi;
        2.0 * FOUR_PI * r * r * radial_current(psi, d)
    };
    let t_peak = (1..400).map(|i| 0.25 * i as f64).max_by(|a, b| oracle(*a).partial_cmp(&oracle(*b)).unwrap()).unwrap();
    for t in [t_peak, 0.7 * t_peak, 1.5 * t_peak] {
        let f = surface_flux(&st, r, t, &ConeSurface::full_sphere(), FluxMode::Signed).unwrap();
        assert!((f - oracle(t)).abs() < 1e-6 * oracle(t_peak), "{t}: {f} {}", oracle(t));
    }
}

#[test]
fn stationary_bound_state_has_no_flux() {
    let field = BoundStateField { interaction: PointInteraction::new(0.05).unwrap() };
    let ti = time_integrated_flux(&field, 5.0, &ConeSurface::full_sphere(), 0.0, 50.0, FluxMode::Signed, 1.0, &TimeOptions::default()).unwrap();
    assert!(ti.integral.abs() + ti.tail_estimate < 1e-10);
    let free = BoundStateField { interaction: PointInteraction::new(-0.1).unwrap() };
    assert!(matches!(free.radial(1.0, 0.0), Err(FasError::Domain(_))));
}

#[test]
fn free_flux_across_surfaces() {
    let st = state(None, [0.0, 0.0, 2.0]);
    let cone = ConeSurface::new([0.0, 0.0, 1.0], PI / 4.0).unwrap();
    let rep = fas_verify(&st, &cone, &[40.0], 0.0, TimeHorizon::Fixed(400.0), &TimeOptions::default()).unwrap();
    let e = &rep.entries[0];
    assert!(e.rel_error < 1e-3, "{e:?}");
    assert!(e.tail_estimate < 1e-4 && e.envelope_exponent > 1.1);
}

#[test]
fn cone_probability_limits() {
    for st in [state(Some(0.0), [0.0; 3]), state(None, [0.3, 0.0, 1.0])] {
        let all = cone_probability(&st, &ConeSurface::full_sphere());
        assert!((all - st.norm_sq()).abs() < 1e-10, "{all}");
        assert!((all - 1.0).abs() < 1e-8);
    }
    let st = state(Some(0.0), [0.0; 3]);
    let half = cone_probability(&st, &ConeSurface::new([0.0, 1.0, 0.0], 0.5 * PI).unwrap());
    assert!((half - 0.5 * st.norm_sq()).abs() < 1e-13);
}

#[test]
fn cone_probability_matches_monte_carlo() {
    // free outgoing state: |psi_out|^2 is a normal density, centre p0, std 1/(2 sigma)
    let st = state(None, [0.0, 0.0, 2.0]);
    let cone = ConeSurface::new([1.0, 0.0, 1.0], 0.6).unwrap();
    let p = cone_probability(&st, &cone);
    let n = 4_000_000usize;
    let hits: usize = (0..8u64)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = rand::rngs::StdRng::seed_from_u64(17 + chunk);
            let g = Normal::new(0.0, 0.5).unwrap();
            (0..n / 8)
                .filter(|_| {
                    let k = [g.sample(&mut rng), g.sample(&mut rng), 2.0 + g.sample(&mut rng)];
                    dot3(k, cone.axis) >= norm3(k) * cone.half_angle.cos()
                })
                .count()
        })
        .sum();
    let mc = hits as f64 / n as f64;
    assert!((mc - p).abs() < 1e-3, "{mc} {p}");
}

#[test]
fn dollard_probability_matches_cone_probability() {
    let st = state(None, [0.0, 0.0, 2.0]);
    let cone = ConeSurface::new([0.0, 0.0, 1.0], PI / 4.0).unwrap();
    let d = dollard_probability(&st, &cone, 200.0).unwrap();
    let p = cone_probability(&st, &cone);
    assert!((d - p).abs() < 1e-3, "{d} {p}");
    let total = dollard_probability(&st, &ConeSurface::full_sphere(), 200.0).unwrap();
    assert!((total - 1.0).abs() < 1e-5, "{total}");
    assert!(dollard_probability(&st, &cone, -1.0).is_err());
}

#[test]
fn alpha_sing_scaling_constants_are_stable() {
    let f = |x: f64, t: f64| (alpha_sing_kernel(x, t).unwrap() * x * t.sqrt()).norm();
    let lat = Lattice::sample((5.0, 500.0), (2.0, 200.0), 6, f);
    for r in homogeneity_check(&lat, 0.5, &[-1.0, 0.0]) {
        assert!(r.stable && r.constant.is_finite(), "{r:?}");
    }
}

#[test]
fn rejects_bad_geometry() {
    assert!(ConeSurface::new([0.0; 3], 1.0).is_err());
    assert!(ConeSurface::new([0.0, 0.0, 1.0], 0.0).is_err());
    assert!(ConeSurface::new([0.0, 0.0, 1.0], 3.5).is_err());
    let st = state(None, [0.0; 3]);
    assert!(surface_flux(&st, -1.0, 1.0, &ConeSurface::full_sphere(), FluxMode::Signed).is_err());
    assert!(time_integrated_flux(&st, 10.0, &ConeSurface::full_sphere(), 5.0, 1.0, FluxMode::Signed, 1.0, &TimeOptions::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn cone_and_complement_add_up(theta in 0.1f64..3.0, ax in -1.0f64..1.0, ay in -1.0f64..1.0) {
        let st = state(Some(0.0), [0.0, 0.4, 1.0]);
        let cone = ConeSurface::new([ax, ay, 1.0], theta).unwrap();
        let part = cone_partition(&st, &cone);
        prop_assert!((part.total() - st.norm_sq()).abs() < 1e-9, "{:?}", part);
    }

    #[test]
    fn angular_rule_weights_sum_to_solid_angle(theta in 0.05f64..PI, azimuthal: bool) {
        let cone = ConeSurface::new([0.2, -0.3, 0.9], theta).unwrap();
        let s: f64 = cone.angular_rule(azimuthal).iter().map(|(_, w)| w).sum();
        prop_assert!((s - cone.solid_angle()).abs() < 1e-13 * cone.solid_angle().max(1.0), "{}", s - cone.solid_angle());
    }
}
