//! Jump target: signals, optimal and myopic strategies, costs and the discrete oracle.
//!
//! `cargo run --release --example fig1_jump [out_dir]`

use std::path::PathBuf;

use impact_hedge::scenario::{builtin, run_scenario, OracleReport, RunOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out".into()));
    let scenario = builtin("fig1_jump").expect("built-in");
    let summary = run_scenario(&scenario, &out, &RunOptions::default())?;
    let c = &summary.outcome.costs;
    println!("optimal     J = {:.6}  closed form {:.6}", c.optimal.mean.total, c.optimal.mean.closed_form.unwrap().total);
    if let Some(k) = &c.constrained {
        println!("constrained J = {:.6}  closed form {:.6}", k.mean.total, k.mean.closed_form.unwrap().total);
    }
    println!("myopic      J = {:.6}", c.myopic.mean.total);
    if let Some(OracleReport::Deterministic(o)) = &summary.outcome.oracle {
        for r in &o.refinement {
            println!(
                "N = {:5}  sup|X - X*| = {:.3e}  constrained {:.3e}  J* = {:.6}",
                r.steps,
                r.sup_gap,
                r.sup_gap_constrained.unwrap_or(f64::NAN),
                r.discrete_value
            );
        }
        let g = &o.gateaux;
        println!(
            "first-order pairings: optimal {:.3e}  constrained {:.3e}  myopic {:.3e}  (bound {:.3e})",
            g.optimal,
            g.constrained.unwrap_or(f64::NAN),
            g.myopic,
            g.bound
        );
    }
    let t = &summary.outcome.paths;
    let half = t.t.iter().position(|&s| s == 0.5).unwrap();
    println!("X_opt(T/2) = {:.6}  X_myopic(T/2) = {:.6}", t.x_opt[half], t.x_myopic[half]);
    for f in &summary.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
