use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::model::ModelParams;
use crate::rng::PathRng;
use crate::strategies::StrategyPath;
use crate::targets::CellMoments;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateauxReport {
    pub max_abs_pairing: f64,
    pub pairings: Vec<f64>,
}

/// `⟨J'(u), w⟩ = ∫ w_s (κ u_s + ∫_s^T (X_t - ξ_t) dt) ds` for each direction.
///
/// Directions are constant on cells (one value per cell) and are normalized in `L²(dt)` here.
/// The strategy is the piecewise-linear interpolant of its node positions, so the inner
/// integrals are exact given the target's cell moments. In constrained mode every direction
/// must integrate to zero.
pub fn gateaux_check(
    params: &ModelParams,
    strategy: &StrategyPath,
    target: &[CellMoments],
    directions: &[Vec<f64>],
    constrained: bool,
) -> Result<GateauxReport> {
    params.validate()?;
    let grid = &strategy.grid;
    grid.check_horizon(params.horizon)?;
    let n = grid.steps();
    if target.len() != n {
        return Err(Error::Alignment(format!("{} cell moments for {n} cells", target.len())));
    }
    let x = &strategy.position;
    let dts: Vec<f64> = grid.cells().map(|(a, b)| b - a).collect();
    // Per cell: κ ū Δ + Δ ∫_b^T (X - ξ) + ∫_a^b (t - a)(X - ξ) dt.
    let mut weight = vec![0.0; n];
    let mut tail = 0.0;
    for k in (0..n).rev() {
        let dt = dts[k];
        let u = (x[k + 1] - x[k]) / dt;
        weight[k] = params.kappa * u * dt + dt * tail + target[k].tilted_distance(x[k], x[k + 1], dt);
        tail += target[k].distance(x[k], x[k + 1], dt);
    }
    let pairings = directions
        .par_iter()
        .map(|w| {
            if w.len() != n {
                return Err(Error::Alignment(format!("direction has {} values for {n} cells", w.len())));
            }
            let norm = w.iter().zip(&dts).map(|(v, d)| v * v * d).sum::<f64>().sqrt();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(Error::Input("direction must have a positive finite norm".into()));
            }
            if constrained {
                let mass = w.iter().zip(&dts).map(|(v, d)| v * d).sum::<f64>();
                if mass.abs() > 1e-9 * norm * params.horizon.sqrt() {
                    return Err(Error::Input(format!(
                        "constrained directions must integrate to zero, got {mass:e}"
                    )));
                }
            }
            Ok(w.iter().zip(&weight).map(|(v, g)| v * g).sum::<f64>() / norm)
        })
        .collect::<Result<Vec<f64>>>()?;
    let max_abs_pairing = pairings.iter().fold(0.0f64, |m, p| m.max(p.abs()));
    Ok(GateauxReport { max_abs_pairing, pairings })
}

/// `count` unit-norm cell directions: sine modes `sin(mπt/T)` for the first half, Brownian
/// sample paths (Karhunen–Loève, 64 terms) for the rest. With `mean_zero` each is projected
/// onto `∫ w dt = 0`.
pub fn perturbation_directions(grid: &TimeGrid, count: usize, seed: u64, mean_zero: bool) -> Vec<Vec<f64>> {
    let horizon = grid.horizon();
    let mids: Vec<f64> = grid.cells().map(|(a, b)| 0.5 * (a + b) / horizon).collect();
    let dts: Vec<f64> = grid.cells().map(|(a, b)| b - a).collect();
    let fourier = count.div_ceil(2);
    (0..count)
        .map(|i| {
            let mut w: Vec<f64> = if i < fourier {
                let m = (i + 1) as f64;
                mids.iter().map(|s| (m * std::f64::consts::PI * s).sin()).collect()
            } else {
                let mut rng = PathRng::new(seed, i as u64);
                let coeffs: Vec<f64> = (0..64).map(|_| rng.normal()).collect();
                mids.iter()
                    .map(|s| {
                        coeffs
                            .iter()
                            .enumerate()
                            .map(|(j, z)| {
                                let f = (j as f64 + 0.5) * std::f64::consts::PI;
                                z * std::f64::consts::SQRT_2 * (f * s).sin() / f
                            })
                            .sum()
                    })
                    .collect()
            };
            if mean_zero {
                let mean = w.iter().zip(&dts).map(|(v, d)| v * d).sum::<f64>() / horizon;
                w.iter_mut().for_each(|v| *v -= mean);
            }
            let norm = w.iter().zip(&dts).map(|(v, d)| v * v * d).sum::<f64>().sqrt();
            w.iter_mut().for_each(|v| *v /= norm);
            w
        })
        .collect()
}
