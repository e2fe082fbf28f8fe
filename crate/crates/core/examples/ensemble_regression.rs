//! Signals and costs for a target given only as a weighted ensemble of simulated paths.
//!
//! The target here is the Asian delta, but any path sampler works: the signal is obtained by
//! regressing the kernel-weighted future target on the current state.
//!
//! `cargo run --release --example ensemble_regression [paths]`

use impact_hedge::bachelier::{simulate_paths, BachelierAsianSpec};
use impact_hedge::scenario::{builtin, compute_scenario, GridSpec, RunOptions, Scenario};
use impact_hedge::targets::{TargetEnsemble, TargetProcess, TerminalConstraint};
use impact_hedge::TimeGrid;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n_paths: usize = std::env::args().nth(1).map_or(Ok(4000), |a| a.parse())?;
    let spec = BachelierAsianSpec::new(100.0, 2.0, 100.0, 1.0)?;
    let grid = TimeGrid::uniform(1.0, 200)?;
    let sim = simulate_paths(&spec, &grid, n_paths, 11)?;
    let nodes = grid.nodes();
    let mut targets = Vec::with_capacity(n_paths);
    for p in sim.paths() {
        let mut row = Vec::with_capacity(nodes.len());
        for (k, &t) in nodes.iter().enumerate() {
            row.push(if k + 1 == nodes.len() {
                f64::from(u8::from(p[100] + p[k] > 200.0)) * 0.5
            } else {
                spec.delta_right(t, p[k], (t >= 0.5).then_some(p[100]))?
            });
        }
        targets.push(row);
    }
    let ensemble = TargetEnsemble {
        grid: grid.clone(),
        paths: targets,
        weights: vec![1.0 / n_paths as f64; n_paths],
        // After the fixing the delta depends on the price only through S_{T/2} + S_t.
        state: Some(
            sim.paths()
                .map(|p| p.iter().enumerate().map(|(k, s)| if k < 100 { *s } else { s + p[100] }).collect())
                .collect(),
        ),
    };
    let mut s: Scenario = builtin("fig3_asian").ok_or("built-in")?;
    s.name = "asian_ensemble".into();
    s.target = TargetProcess::Ensemble(ensemble);
    s.constraint = TerminalConstraint::Deterministic(0.0);
    s.grid = GridSpec::Steps(200);
    s.monte_carlo = None;
    let out = compute_scenario(&s, &RunOptions::default())?;
    let c = &out.costs;
    println!("optimal     J = {:.6} ± {:.1e}  closed form {:.6}", c.optimal.mean.total, c.optimal.std_error, c.optimal.mean.closed_form.unwrap().total);
    if let Some(k) = &c.constrained {
        println!("constrained J = {:.6} ± {:.1e}  closed form {:.6}", k.mean.total, k.std_error, k.mean.closed_form.unwrap().total);
    }
    println!("myopic      J = {:.6} ± {:.1e}", c.myopic.mean.total, c.myopic.std_error);
    Ok(())
}
