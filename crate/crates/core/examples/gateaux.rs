//! First-order optimality test: directional derivatives of the cost at several strategies.
//!
//! `cargo run --release --example gateaux`

use impact_hedge::costs::cost_direct;
use impact_hedge::oracle::{gateaux_check, perturbation_directions};
use impact_hedge::scenario::builtin;
use impact_hedge::strategies::{integrate_constrained, integrate_myopic, integrate_unconstrained, myopic_targets, SignalFreeze};
use impact_hedge::targets::{cell_moments, signal_constrained, signal_unconstrained};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let s = builtin("fig1_jump").ok_or("missing built-in")?;
    let p = s.params()?;
    let grid = s.build_grid()?;
    let opts = Default::default();
    let segs = s.target.segments().ok_or("deterministic target expected")?;
    let moments = cell_moments(segs, &grid, &Default::default())?;

    let optimal = integrate_unconstrained(&p, &signal_unconstrained(&p, &s.target, &grid, &opts)?, SignalFreeze::LeftNode)?;
    let pinned = integrate_constrained(&p, &signal_constrained(&p, &s.target, &s.constraint, &grid, &opts)?, 0.0, SignalFreeze::LeftNode)?;
    let myopic = integrate_myopic(&p, &grid, &myopic_targets(segs, &grid), None)?;
    let bound = 1e-3 * cost_direct(&p, &optimal, &moments)?.total;

    let free = perturbation_directions(&grid, 20, 7, false);
    let balanced = perturbation_directions(&grid, 20, 7, true);
    for (name, strategy, dirs, constrained) in [
        ("optimal", &optimal, &free, false),
        ("myopic", &myopic, &free, false),
        ("constrained", &pinned, &balanced, true),
    ] {
        let r = gateaux_check(&p, strategy, &moments, dirs, constrained)?;
        println!("{name:12} max |<J'(u), w>| = {:.3e}  (bound {bound:.3e})", r.max_abs_pairing);
    }
    Ok(())
}
