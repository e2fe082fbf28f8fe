//! Target with an integrable singularity at T/2 (a jump from -∞ to +∞).
//!
//! `cargo run --release --example fig2_singularity [out_dir]`

use std::path::PathBuf;

use impact_hedge::scenario::{builtin, run_scenario, OracleReport, RunOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out".into()));
    let scenario = builtin("fig2_singularity").expect("built-in");
    let summary = run_scenario(&scenario, &out, &RunOptions::default())?;
    let c = &summary.outcome.costs;
    for (name, est) in [("optimal", Some(&c.optimal)), ("constrained", c.constrained.as_ref()), ("myopic", Some(&c.myopic))] {
        if let Some(e) = est {
            print!("{name:12} J = {:.6}", e.mean.total);
            if let Some(cf) = e.mean.closed_form {
                print!("  closed form {:.6}  relative gap {:.2e}", cf.total, e.closed_form_gap().unwrap());
            }
            println!();
        }
    }
    if let Some(OracleReport::Deterministic(o)) = &summary.outcome.oracle {
        for r in &o.refinement {
            println!("N = {:5}  sup|X - X*| = {:.3e}  J* = {:.6}", r.steps, r.sup_gap, r.discrete_value);
        }
        println!("first-order pairing of the optimum {:.3e} (bound {:.3e})", o.gateaux.optimal, o.gateaux.bound);
    }
    let t = &summary.outcome.paths;
    let k = t.t.len() / 2;
    println!("around T/2: xi_hat = {:.4} {:.4} {:.4}", t.xi_hat[k - 1], t.xi_hat[k], t.xi_hat[k + 1]);
    Ok(())
}
