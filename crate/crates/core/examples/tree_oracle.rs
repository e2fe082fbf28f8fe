//! Riccati backward induction on a binomial tree for the Asian delta target.
//!
//! `cargo run --release --example tree_oracle [max_depth]`

use impact_hedge::bachelier::BachelierAsianSpec;
use impact_hedge::oracle::{asian_tree_comparison, solve_lq_tree, TreeModel, TreeNode};
use impact_hedge::ModelParams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let max_depth: usize = std::env::args().nth(1).map_or(Ok(16), |a| a.parse())?;
    let p = ModelParams::new(0.04, 1.0, 0.5)?;
    let spec = BachelierAsianSpec::new(100.0, 2.0, 100.0, 1.0)?;
    println!("{:>5} {:>12} {:>14} {:>8}", "depth", "tree optimum", "closed form", "gap");
    for depth in (4..=max_depth.min(20)).step_by(4) {
        let c = asian_tree_comparison(&p, &spec, depth)?;
        println!("{depth:5} {:12.6} {:14.6} {:7.2}%", c.tree_value, c.closed_form_value, 100.0 * c.relative_gap);
    }

    // The optimal policy along the all-up path of a small tree.
    let tree = TreeModel::for_asian(&spec, 8)?;
    let sol = solve_lq_tree(&tree, |_, n: &TreeNode| n.level as f64 / 8.0, p.kappa, p.initial_position, None::<fn(&TreeModel, &TreeNode) -> f64>)?;
    println!("positions along the up path for a ramp target: {:?}", sol.forward(&[true; 8])?);
    Ok(())
}
