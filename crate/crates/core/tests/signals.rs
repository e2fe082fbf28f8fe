use impact_hedge::bachelier::BachelierAsianSpec;
use impact_hedge::targets::{
    signal_asian, signal_constrained, signal_monte_carlo, signal_unconstrained, AsianState, McOptions, SignalFlavor,
    TargetProcess, TargetSegment, TerminalConstraint,
};
use impact_hedge::{ModelParams, TimeGrid};
use proptest::prelude::*;

/// Piecewise-constant target on `[0, 1]` with breakpoints at multiples of 1/8.
fn steps(levels: &[f64]) -> TargetProcess {
    let n = levels.len() as f64;
    TargetProcess::Segments(
        levels
            .iter()
            .enumerate()
            .map(|(i, v)| TargetSegment::constant(i as f64 / n, (i + 1) as f64 / n, *v))
            .collect(),
    )
}

fn levels() -> impl Strategy<Value = Vec<f64>> {
    prop::sample::select(vec![1usize, 2, 4, 8]).prop_flat_map(|n| prop::collection::vec(-3.0f64..3.0, n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn signal_is_an_average(v in levels(), k in 0.01f64..10.0, end in -3.0f64..3.0) {
        let p = ModelParams::new(k, 1.0, 0.0).unwrap();
        let g = TimeGrid::uniform(1.0, 64).unwrap();
        let t = steps(&v);
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let s = signal_unconstrained(&p, &t, &g, &Default::default()).unwrap();
        for x in &s.values {
            prop_assert!(*x >= lo - 1e-12 && *x <= hi + 1e-12);
        }
        let c = signal_constrained(&p, &t, &TerminalConstraint::Deterministic(end), &g, &Default::default()).unwrap();
        for x in &c.values {
            prop_assert!(*x >= lo.min(end) - 1e-12 && *x <= hi.max(end) + 1e-12);
        }
        prop_assert_eq!(c.terminal(), end);
    }

    #[test]
    fn signal_is_affine_in_the_target(v in levels(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let p = ModelParams::new(0.2, 1.0, 0.0).unwrap();
        let g = TimeGrid::uniform(1.0, 32).unwrap();
        let s = signal_unconstrained(&p, &steps(&v), &g, &Default::default()).unwrap();
        let w: Vec<f64> = v.iter().map(|x| a * x + b).collect();
        let s2 = signal_unconstrained(&p, &steps(&w), &g, &Default::default()).unwrap();
        for (x, y) in s.values.iter().zip(&s2.values) {
            prop_assert!((a * x + b - y).abs() < 1e-11);
        }
    }
}

fn asian() -> (ModelParams, BachelierAsianSpec, TimeGrid) {
    (
        ModelParams::new(0.04, 1.0, 0.5).unwrap(),
        BachelierAsianSpec::new(100.0, 2.0, 100.0, 1.0).unwrap(),
        TimeGrid::uniform(1.0, 200).unwrap(),
    )
}

#[test]
fn asian_closed_form_matches_monte_carlo() {
    let (p, spec, g) = asian();
    let opts = McOptions { n_paths: 20_000, seed: 3, use_martingale_structure: true };
    for (t, s) in [(0.0, 100.0), (0.2, 97.5), (0.45, 101.0)] {
        let st = AsianState { spot: s, fixing: None };
        for flavor in [SignalFlavor::Unconstrained, SignalFlavor::Constrained] {
            let cf = signal_asian(&p, &spec, t, &st, flavor, 0.0).unwrap();
            let mc = signal_monte_carlo(&p, &spec, t, &st, &g, flavor, 0.0, &opts).unwrap();
            // The Monte Carlo route sums cell masses on the grid; allow for that plus 4 SE.
            assert!((cf - mc.mean).abs() < 4.0 * mc.std_error + 2e-3, "t = {t}: {cf} vs {} ± {}", mc.mean, mc.std_error);
        }
    }
}

#[test]
fn asian_signal_is_the_delta_after_fixing() {
    let (p, spec, g) = asian();
    let opts = McOptions { n_paths: 100, seed: 1, use_martingale_structure: true };
    for (t, s, f) in [(0.5, 100.0, 100.0), (0.7, 98.0, 103.0), (0.995, 101.0, 99.5)] {
        let st = AsianState { spot: s, fixing: Some(f) };
        let delta = spec.delta_right(t, s, Some(f)).unwrap();
        assert_eq!(signal_asian(&p, &spec, t, &st, SignalFlavor::Unconstrained, 0.0).unwrap(), delta);
        let mc = signal_monte_carlo(&p, &spec, t, &st, &g, SignalFlavor::Unconstrained, 0.0, &opts).unwrap();
        assert_eq!(mc.mean, delta);
        assert_eq!(mc.std_error, 0.0);
    }
}

#[test]
fn asian_signal_stays_in_the_delta_range() {
    let (p, spec, _) = asian();
    for t in [0.0, 0.1, 0.3, 0.49] {
        for s in [90.0, 99.0, 100.0, 101.0, 110.0] {
            let v = signal_asian(&p, &spec, t, &AsianState { spot: s, fixing: None }, SignalFlavor::Unconstrained, 0.0).unwrap();
            assert!((0.0..=1.0).contains(&v), "{v}");
        }
    }
}
