//! Continuous strategies against the exact discrete-time optimum as the grid is refined.
//!
//! `cargo run --release --example oracle_convergence [scenario]`

use impact_hedge::scenario::{builtin, discrete_comparison};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "fig1_jump".into());
    let s = builtin(&name).ok_or("unknown built-in scenario")?;
    let p = s.params()?;
    let mut last: Option<(f64, f64)> = None;
    println!("{:>6} {:>12} {:>12} {:>7} {:>12} {:>7} {:>10} {:>10}", "N", "sup gap", "constrained", "ratio", "J*", "", "J closed", "multiplier");
    for n in [500, 1000, 2000, 4000] {
        let c = discrete_comparison(&p, &s.target, &s.constraint, n)?;
        let cons = c.sup_gap_constrained.unwrap_or(f64::NAN);
        let ratio = last.map(|(a, _)| a / c.sup_gap).unwrap_or(f64::NAN);
        let ratio_c = last.map(|(_, b)| b / cons).unwrap_or(f64::NAN);
        println!(
            "{n:6} {:12.4e} {:12.4e} {ratio:7.3} {:12.8} {ratio_c:7.3} {:10.6} {:10.6}",
            c.sup_gap,
            cons,
            c.discrete_value,
            c.closed_form_value,
            c.multiplier.unwrap_or(f64::NAN)
        );
        last = Some((c.sup_gap, cons));
    }
    Ok(())
}
