//! Bachelier discrete Asian call: price, delta, jump at the fixing date and simulated paths.
//!
//! `cargo run --release --example asian_analytics`

use impact_hedge::bachelier::{simulate_paths, BachelierAsianSpec};
use impact_hedge::TimeGrid;

fn main() -> impact_hedge::Result<()> {
    let spec = BachelierAsianSpec::new(100.0, 2.0, 100.0, 1.0)?;
    for s in [96.0, 100.0, 104.0] {
        let before = spec.delta(0.5, s, None)?;
        let after = spec.delta_right(0.5, s, Some(s))?;
        println!(
            "S = {s:5}  price(0) {:.6}  delta(0) {:.6}  delta(T/2-) {before:.6}  delta(T/2+) {after:.6}  jump {:.6}",
            spec.price(0.0, s, None)?,
            spec.delta(0.0, s, None)?,
            spec.delta_jump(s)
        );
    }
    let grid = TimeGrid::uniform(1.0, 1000)?;
    let paths = simulate_paths(&spec, &grid, 20_000, 42)?;
    let n = paths.paths().count() as f64;
    let payoffs: Vec<f64> = paths.paths().map(|p| spec.payoff(p[500], p[1000])).collect();
    let mean = payoffs.iter().sum::<f64>() / n;
    let se = (payoffs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    println!("Monte Carlo payoff mean {mean:.4} ± {se:.4} vs price {:.4}", spec.price(0.0, 100.0, None)?);
    Ok(())
}
