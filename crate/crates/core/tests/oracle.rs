use impact_hedge::bachelier::BachelierAsianSpec;
use impact_hedge::oracle::{
    asian_tree_comparison, gateaux_check, perturbation_directions, solve_lq_deterministic, solve_lq_tree, DiscreteLQProblem,
    TreeModel, TreeNode,
};
use impact_hedge::scenario::{builtin, discrete_comparison};
use impact_hedge::strategies::{StrategyFlavor, StrategyPath};
use impact_hedge::strategies::{integrate_unconstrained, SignalFreeze};
use impact_hedge::targets::{cell_moments, signal_unconstrained, CellMoments};
use impact_hedge::{Error, ModelParams, TimeGrid};

#[test]
fn two_step_problem_has_the_hand_solution() {
    let s = solve_lq_deterministic(&DiscreteLQProblem { dt: 0.5, xi: vec![0.0, 1.0], kappa: 1.0, initial_position: 0.0, terminal: None })
        .unwrap();
    assert!((s.rates[0] - 0.4).abs() < 1e-15);
    assert!(s.rates[1].abs() < 1e-15);
    assert!((s.value - 0.2).abs() < 1e-15);
}

#[test]
fn discrete_optimum_beats_the_projected_continuous_strategy() {
    let s = builtin("fig1_jump").unwrap();
    let p = s.params().unwrap();
    let mut last = (f64::INFINITY, f64::INFINITY);
    for n in [250, 500, 1000, 2000] {
        let g = TimeGrid::uniform(1.0, n).unwrap();
        let signal = signal_unconstrained(&p, &s.target, &g, &Default::default()).unwrap();
        let x = integrate_unconstrained(&p, &signal, SignalFreeze::LeftNode).unwrap();
        let xi = cell_moments(s.target.segments().unwrap(), &g, &Default::default()).unwrap().iter().map(|m| m.mean).collect();
        let problem = DiscreteLQProblem { dt: 1.0 / n as f64, xi, kappa: p.kappa, initial_position: 0.0, terminal: None };
        let best = solve_lq_deterministic(&problem).unwrap();
        let projected = problem.objective(&x.position).unwrap();
        assert!(best.value <= projected);
        let closed = discrete_comparison(&p, &s.target, &s.constraint, n).unwrap().closed_form_value;
        let gaps = (projected - best.value, (best.value - closed).abs());
        assert!(gaps.0 < last.0 && gaps.1 < last.1, "N = {n}: {gaps:?}");
        last = gaps;
    }
}

#[test]
fn strategy_gap_is_first_order() {
    for name in ["fig1_jump", "fig2_singularity"] {
        let s = builtin(name).unwrap();
        let p = s.params().unwrap();
        let a = discrete_comparison(&p, &s.target, &s.constraint, 1000).unwrap();
        let b = discrete_comparison(&p, &s.target, &s.constraint, 2000).unwrap();
        let r = a.sup_gap / b.sup_gap;
        assert!((1.5..=2.5).contains(&r), "{name}: ratio {r}");
        let rc = a.sup_gap_constrained.unwrap() / b.sup_gap_constrained.unwrap();
        assert!((1.5..=2.5).contains(&rc), "{name}: constrained ratio {rc}");
    }
}

#[test]
fn tree_coefficients_are_convex() {
    let spec = BachelierAsianSpec::new(100.0, 2.0, 100.0, 1.0).unwrap();
    let tree = TreeModel::for_asian(&spec, 10).unwrap();
    let target = |t: &TreeModel, n: &TreeNode| if n.fixing_ups.is_some() { 0.25 } else { 0.5 + 0.01 * (t.spot(n) - 100.0) };
    for end in [None, Some(0.0)] {
        let s = solve_lq_tree(&tree, target, 0.04, 0.5, end.map(|v| move |_: &TreeModel, _: &TreeNode| v)).unwrap();
        for level in &s.a[..10] {
            assert!(level.iter().all(|a| *a > 0.0));
        }
        assert!(s.b.iter().chain(&s.c).flatten().all(|v| v.is_finite()));
        if end.is_some() {
            assert!(s.forward(&[false; 10]).unwrap()[10].abs() < 1e-12);
        }
    }
    assert!(matches!(TreeModel::new(0.0, 1.0, 1.0, 25, None), Err(Error::Size(_))));
}

#[test]
fn tree_gap_shrinks_with_depth() {
    let p = ModelParams::new(0.04, 1.0, 0.5).unwrap();
    let spec = BachelierAsianSpec::new(100.0, 2.0, 100.0, 1.0).unwrap();
    let gaps: Vec<f64> = [8, 12, 16].iter().map(|d| asian_tree_comparison(&p, &spec, *d).unwrap().relative_gap).collect();
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
    assert!(gaps[1] < 0.1);
}

#[test]
fn idle_strategy_on_its_target_has_zero_pairings() {
    let p = ModelParams::new(1.0, 1.0, 2.0).unwrap();
    let g = TimeGrid::uniform(1.0, 50).unwrap();
    let s = StrategyPath { grid: g.clone(), position: vec![2.0; 51], rate: vec![0.0; 51], flavor: StrategyFlavor::Unconstrained, terminal_gap: None };
    let m = vec![CellMoments::held(2.0); 50];
    let dirs = perturbation_directions(&g, 20, 1, false);
    let r = gateaux_check(&p, &s, &m, &dirs, false).unwrap();
    assert_eq!(r.max_abs_pairing, 0.0);
    assert!(matches!(gateaux_check(&p, &s, &m, &dirs, true), Err(Error::Input(_))));
}

#[test]
fn directions_are_normalized_and_balanced() {
    let g = TimeGrid::uniform(1.0, 400).unwrap();
    for mean_zero in [false, true] {
        let dirs = perturbation_directions(&g, 20, 3, mean_zero);
        assert_eq!(dirs.len(), 20);
        for w in &dirs {
            let norm: f64 = w.iter().map(|v| v * v / 400.0).sum();
            assert!((norm - 1.0).abs() < 1e-12);
            if mean_zero {
                assert!(w.iter().sum::<f64>().abs() / 400.0 < 1e-12);
            }
        }
    }
    assert_eq!(perturbation_directions(&g, 6, 3, false), perturbation_directions(&g, 6, 3, false));
}
