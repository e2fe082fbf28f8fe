//! Loading, validating and running a scenario from its JSON file.
//!
//! `cargo run --release --example scenario_file [scenario.json] [out_dir]`

use std::path::PathBuf;

use impact_hedge::scenario::{run_scenario, validate, RunOptions, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = PathBuf::from(args.next().unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/fig1_jump.json").into()));
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out".into()));
    let scenario = Scenario::load(&path)?;
    let report = validate(&scenario);
    if !report.is_valid() {
        for i in &report.issues {
            eprintln!("{}: {}", i.field, i.message);
        }
        return Err("scenario failed validation".into());
    }
    let summary = run_scenario(&scenario, &out, &RunOptions { threads: Some(2), seed_override: None })?;
    println!("{}: optimal J = {:.6}", scenario.name, summary.outcome.costs.optimal.mean.total);
    for f in &summary.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
