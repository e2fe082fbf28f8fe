//! Whether a random terminal position can be reached at finite cost.
//!
//! `cargo run --release --example reachability`

use impact_hedge::costs::{reachability_check, reachability_numeric, ReachabilityConfig};
use impact_hedge::targets::{BrownianConstraint, TerminalConstraint};
use impact_hedge::ModelParams;

fn main() -> impact_hedge::Result<()> {
    let p = ModelParams::new(1.0, 1.0, 0.0)?;
    let cases = [
        ("fixed terminal position", TerminalConstraint::Deterministic(0.0)),
        ("revealed by T/2", TerminalConstraint::Brownian(BrownianConstraint { offset: 0.0, scale: 1.0, reveal_until: 0.5 })),
        ("revealed until T", TerminalConstraint::Brownian(BrownianConstraint { offset: 0.0, scale: 1.0, reveal_until: 1.0 })),
    ];
    for (name, c) in &cases {
        let r = reachability_check(&p, c)?;
        println!("{name:24} reachable {:5}  integral {:?}  {}", r.reachable, r.integral, r.diagnostic.unwrap_or_default());
    }

    // Arbitrary second-moment curves go through the numeric rule.
    let cfg = ReachabilityConfig::default();
    type Curve = (&'static str, fn(f64) -> f64);
    let curves: [Curve; 4] = [
        ("min(t, T/2)", |t| t.min(0.5)),
        ("1 - (1 - t)^2", |t| 1.0 - (1.0 - t).powi(2)),
        ("1 - sqrt(1 - t)", |t| 1.0 - (1.0 - t).sqrt()),
        ("t", |t| t),
    ];
    for (name, m) in curves {
        let r = reachability_numeric(&p, m, &cfg)?;
        println!("E[Xi_t^2] = {name:16} reachable {:5}  integral {:?}", r.reachable, r.integral);
    }
    println!("analytic: ln 2 = {}, 2 for 1 - (1 - t)^2", std::f64::consts::LN_2);
    Ok(())
}
