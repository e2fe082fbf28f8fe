use impact_hedge::kernels::{
    kernel_k, kernel_k_integral, kernel_k_moment, kernel_kxi, kernel_kxi_integral, kernel_kxi_moment, rate_constrained,
    rate_unconstrained,
};
use impact_hedge::quadrature::{integrate, QuadratureConfig};
use impact_hedge::{Error, ModelParams};
use proptest::prelude::*;

fn kappa() -> impl Strategy<Value = f64> {
    (-2.0f64..2.0).prop_map(|e| 10f64.powf(e))
}

proptest! {
    #[test]
    fn kernels_are_normalized(k in kappa(), t in 0.0f64..0.999) {
        let p = ModelParams::new(k, 1.0, 0.0).unwrap();
        prop_assert!((kernel_k_integral(&p, t, t, 1.0).unwrap() - 1.0).abs() < 1e-12);
        prop_assert!((kernel_kxi_integral(&p, t, t, 1.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kernel_mass_is_additive(k in kappa(), t in 0.0f64..0.9, s in 0.0f64..1.0, r in 0.0f64..1.0) {
        let p = ModelParams::new(k, 1.0, 0.0).unwrap();
        let a = t + (1.0 - t) * s.min(r);
        let b = t + (1.0 - t) * s.max(r);
        let k3 = kernel_k_integral(&p, t, t, a).unwrap() + kernel_k_integral(&p, t, a, b).unwrap() + kernel_k_integral(&p, t, b, 1.0).unwrap();
        let x3 = kernel_kxi_integral(&p, t, t, a).unwrap() + kernel_kxi_integral(&p, t, a, b).unwrap() + kernel_kxi_integral(&p, t, b, 1.0).unwrap();
        prop_assert!((k3 - 1.0).abs() < 1e-12);
        prop_assert!((x3 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kernels_are_positive_and_speeds_ordered(k in kappa(), t in 0.0f64..0.99, s in 0.0f64..0.999) {
        let p = ModelParams::new(k, 1.0, 0.0).unwrap();
        let u = t + (1.0 - t) * s;
        prop_assert!(kernel_k(&p, t, u).unwrap() > 0.0);
        prop_assert!(kernel_kxi(&p, t, u).unwrap() >= 0.0);
        let free = rate_unconstrained(&p, t).unwrap();
        let pinned = rate_constrained(&p, t).unwrap();
        prop_assert!(free <= pinned);
        prop_assert!((free * pinned * k - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_moment_is_the_mass(k in kappa(), t in 0.0f64..0.9, c in -5.0f64..5.0) {
        let p = ModelParams::new(k, 1.0, 0.0).unwrap();
        let m = kernel_k_moment(&p, t, t, 1.0, &[c]).unwrap();
        prop_assert!((m - c).abs() < 1e-11 * (1.0 + c.abs()));
        let m = kernel_kxi_moment(&p, t, 0.5 * (t + 1.0), 1.0, &[c]).unwrap();
        let mass = kernel_kxi_integral(&p, t, 0.5 * (t + 1.0), 1.0).unwrap();
        prop_assert!((m - c * mass).abs() < 1e-11 * (1.0 + c.abs()));
    }
}

#[test]
fn closed_form_mass_matches_quadrature() {
    let cfg = QuadratureConfig::default();
    for k in [0.05, 1.0, 10.0] {
        let p = ModelParams::new(k, 1.0, 0.0).unwrap();
        for (t, a, b) in [(0.0, 0.2, 0.7), (0.3, 0.3, 0.9), (0.5, 0.6, 0.99)] {
            let q = integrate(|u| kernel_k(&p, t, u).unwrap(), a, b, &cfg).unwrap();
            assert!((q - kernel_k_integral(&p, t, a, b).unwrap()).abs() < 1e-10);
            let q = integrate(|u| kernel_kxi(&p, t, u).unwrap(), a, b, &cfg).unwrap();
            assert!((q - kernel_kxi_integral(&p, t, a, b).unwrap()).abs() < 1e-10);
        }
    }
}

#[test]
fn linear_moment_matches_quadrature() {
    let p = ModelParams::new(0.3, 1.0, 0.0).unwrap();
    let cfg = QuadratureConfig::default();
    let q = integrate(|u| (1.0 - 2.0 * u) * kernel_k(&p, 0.1, u).unwrap(), 0.2, 0.8, &cfg).unwrap();
    assert!((q - kernel_k_moment(&p, 0.1, 0.2, 0.8, &[1.0, -2.0]).unwrap()).abs() < 1e-10);
}

#[test]
fn argument_errors() {
    let p = ModelParams::new(1.0, 1.0, 0.0).unwrap();
    assert!(matches!(kernel_k(&p, 0.5, 0.4), Err(Error::Domain(_))));
    assert!(matches!(kernel_k_integral(&p, 0.5, 0.4, 0.6), Err(Error::Domain(_))));
    assert!(matches!(kernel_kxi_integral(&p, 1.0, 1.0, 1.0), Err(Error::Domain(_))));
    assert!(matches!(rate_constrained(&p, 1.0), Err(Error::Singularity { .. })));
    assert_eq!(rate_unconstrained(&p, 1.0).unwrap(), 0.0);
}
