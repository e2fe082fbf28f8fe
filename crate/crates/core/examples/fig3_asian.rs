//! Bachelier discrete Asian call: delta target, closed-form signals, Monte Carlo costs and the
//! binomial-tree oracle.
//!
//! `cargo run --release --example fig3_asian [out_dir] [paths]`

use std::path::PathBuf;

use impact_hedge::scenario::{builtin, run_scenario, MonteCarloSpec, OracleReport, RunOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out".into()));
    let mut scenario = builtin("fig3_asian").expect("built-in");
    if let Some(n) = args.next() {
        let seed = scenario.monte_carlo.map_or(42, |m| m.seed);
        scenario.monte_carlo = Some(MonteCarloSpec { paths: n.parse()?, seed });
    }
    let summary = run_scenario(&scenario, &out, &RunOptions::default())?;
    let c = &summary.outcome.costs;
    for (name, est) in [("optimal", Some(&c.optimal)), ("constrained", c.constrained.as_ref()), ("myopic", Some(&c.myopic))] {
        if let Some(e) = est {
            print!("{name:12} J = {:.6} ± {:.1e}", e.mean.total, e.std_error);
            if let Some(cf) = e.mean.closed_form {
                print!(
                    "  closed form {:.6} ± {:.1e}  paired difference SE {:.1e}",
                    cf.total,
                    e.closed_form_std_error.unwrap(),
                    e.paired_std_error.unwrap()
                );
            }
            println!();
        }
    }
    if let Some(OracleReport::Asian(o)) = &summary.outcome.oracle {
        println!(
            "tree depth {}: optimal value {:.6}, closed form on the tree {:.6}, gap {:.2}%",
            o.tree.depth,
            o.tree.tree_value,
            o.tree.closed_form_value,
            100.0 * o.tree.relative_gap
        );
        for s in &o.signal_checks {
            println!(
                "t = {:.3}  closed form {:.6}  Monte Carlo {:.6} ± {:.1e}",
                s.t, s.closed_form, s.monte_carlo, s.std_error
            );
        }
        println!("Monte Carlo signal equals the delta after the fixing: {}", o.after_fixing_exact);
    }
    Ok(())
}
