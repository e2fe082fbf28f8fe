//! Exact exponential-integrator solutions of the optimal and myopic tracking ODEs.
//!
//! On each step the signal is frozen, so the linear ODE `dX = r(t)(s - X)dt` is solved exactly
//! through its integrating factor:
//!
//! * unconstrained, `r = tanh(tau)/sqrt(kappa)`: factor `cosh(tau(t_{k+1})) / cosh(tau(t_k))`
//! * constrained, `r = coth(tau)/sqrt(kappa)`: factor `sinh(tau(t_{k+1})) / sinh(tau(t_k))`
//! * myopic, constant `r`: factor `exp(-r dt)`

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::kernels::{cosh_ratio, sinh_ratio, tau_unchecked};
use crate::model::ModelParams;
use crate::targets::{deterministic_left_limit, deterministic_value, SignalFlavor, SignalPath, TargetSegment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyFlavor {
    Unconstrained,
    Constrained,
    Myopic,
}

/// Signal value used over a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SignalFreeze {
    #[default]
    LeftNode,
    /// Average of the two end values; for convergence studies.
    Midpoint,
}

/// Holdings and trading rate at each grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyPath {
    pub grid: TimeGrid,
    pub position: Vec<f64>,
    /// Instantaneous rate at the node (right-hand side of the ODE).
    pub rate: Vec<f64>,
    pub flavor: StrategyFlavor,
    pub terminal_gap: Option<f64>,
}

impl StrategyPath {
    /// Average rate over each cell, `(X_{k+1} - X_k) / dt`.
    pub fn cell_rates(&self) -> Vec<f64> {
        self.position
            .windows(2)
            .zip(self.grid.cells())
            .map(|(x, (a, b))| (x[1] - x[0]) / (b - a))
            .collect()
    }

    pub fn terminal(&self) -> f64 {
        *self.position.last().expect("nonempty")
    }
}

fn frozen(signal: &[f64], k: usize, freeze: SignalFreeze) -> f64 {
    match freeze {
        SignalFreeze::LeftNode => signal[k],
        SignalFreeze::Midpoint => 0.5 * (signal[k] + signal[k + 1]),
    }
}

fn check_signal(params: &ModelParams, signal: &SignalPath, flavor: SignalFlavor) -> Result<()> {
    params.validate()?;
    signal.grid.check_horizon(params.horizon)?;
    if signal.flavor != flavor {
        return Err(Error::Misuse(format!("expected a {flavor:?} signal, got {:?}", signal.flavor)));
    }
    if signal.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("signal has non-finite values".into()));
    }
    Ok(())
}

/// Integrating factors and node speeds of one flavor on one grid.
///
/// They depend on time only, so an ensemble of paths on a common grid can share them.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFactors {
    flavor: SignalFlavor,
    grid: TimeGrid,
    /// Per cell, the factor multiplying `X_k - s`.
    decay: Vec<f64>,
    /// Per node, the speed `r(t_k)`; for the constrained flavor the last entry is the factor
    /// giving the left derivative at `T`.
    speed: Vec<f64>,
}

impl StepFactors {
    pub fn new(params: &ModelParams, grid: &TimeGrid, flavor: SignalFlavor) -> Result<Self> {
        params.validate()?;
        grid.check_horizon(params.horizon)?;
        let nodes = grid.nodes();
        let n = nodes.len();
        let sk = params.sqrt_kappa();
        let (decay, speed) = match flavor {
            SignalFlavor::Unconstrained => (
                nodes.windows(2).map(|w| cosh_ratio(params, w[1], w[0])).collect(),
                nodes.iter().map(|&t| tau_unchecked(params, t).tanh() / sk).collect(),
            ),
            SignalFlavor::Constrained => {
                let mut speed: Vec<f64> = nodes[..n - 1].iter().map(|&t| 1.0 / (tau_unchecked(params, t).tanh() * sk)).collect();
                speed.push(1.0 / (sk * tau_unchecked(params, nodes[n - 2]).sinh()));
                (nodes.windows(2).map(|w| sinh_ratio(params, w[1], w[0])).collect(), speed)
            }
        };
        Ok(Self { flavor, grid: grid.clone(), decay, speed })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }
}

fn check_factors(signal: &SignalPath, factors: &StepFactors) -> Result<()> {
    if factors.flavor != signal.flavor || factors.grid != signal.grid {
        return Err(Error::Misuse("step factors belong to another grid or flavor".into()));
    }
    Ok(())
}

/// `dX = tanh(tau)/sqrt(kappa) (ξ̂ - X) dt` from `X_0 = x`.
pub fn integrate_unconstrained(params: &ModelParams, signal: &SignalPath, freeze: SignalFreeze) -> Result<StrategyPath> {
    let factors = StepFactors::new(params, &signal.grid, SignalFlavor::Unconstrained)?;
    integrate_unconstrained_with(params, signal, freeze, &factors)
}

/// [`integrate_unconstrained`] with precomputed factors.
pub fn integrate_unconstrained_with(
    params: &ModelParams,
    signal: &SignalPath,
    freeze: SignalFreeze,
    factors: &StepFactors,
) -> Result<StrategyPath> {
    check_signal(params, signal, SignalFlavor::Unconstrained)?;
    check_factors(signal, factors)?;
    let n = signal.values.len();
    let mut x = vec![params.initial_position; n];
    for k in 0..n - 1 {
        let s = frozen(&signal.values, k, freeze);
        x[k + 1] = s + (x[k] - s) * factors.decay[k];
    }
    let rate = (0..n).map(|k| factors.speed[k] * (signal.values[k] - x[k])).collect();
    Ok(StrategyPath {
        grid: signal.grid.clone(),
        position: x,
        rate,
        flavor: StrategyFlavor::Unconstrained,
        terminal_gap: None,
    })
}

/// `dX = coth(tau)/sqrt(kappa) (ξ̂^Ξ - X) dt` from `X_0 = x`, ending at `terminal`.
///
/// The last step uses the signal's terminal value: its factor `sinh(0)/sinh(tau)` is zero, so
/// `X_T` equals that value exactly.
pub fn integrate_constrained(params: &ModelParams, signal: &SignalPath, terminal: f64, freeze: SignalFreeze) -> Result<StrategyPath> {
    let factors = StepFactors::new(params, &signal.grid, SignalFlavor::Constrained)?;
    integrate_constrained_with(params, signal, terminal, freeze, &factors)
}

/// [`integrate_constrained`] with precomputed factors.
pub fn integrate_constrained_with(
    params: &ModelParams,
    signal: &SignalPath,
    terminal: f64,
    freeze: SignalFreeze,
    factors: &StepFactors,
) -> Result<StrategyPath> {
    check_signal(params, signal, SignalFlavor::Constrained)?;
    check_factors(signal, factors)?;
    let n = signal.values.len();
    let mut x = vec![params.initial_position; n];
    for k in 0..n - 2 {
        let s = frozen(&signal.values, k, freeze);
        x[k + 1] = s + (x[k] - s) * factors.decay[k];
    }
    let s_last = signal.values[n - 1];
    x[n - 1] = s_last;
    let mut rate: Vec<f64> = (0..n - 1).map(|k| (signal.values[k] - x[k]) * factors.speed[k]).collect();
    // Left derivative at T of the exact last step.
    rate.push((s_last - x[n - 2]) * factors.speed[n - 1]);
    Ok(StrategyPath {
        grid: signal.grid.clone(),
        position: x,
        rate,
        flavor: StrategyFlavor::Constrained,
        terminal_gap: Some((s_last - terminal).abs()),
    })
}

/// `dX = (c/sqrt(kappa)) (ξ - X) dt` toward the current target, with `c = volatility_scale`
/// (1 if absent). `target` holds the value used on the cell starting at each node.
pub fn integrate_myopic(
    params: &ModelParams,
    grid: &TimeGrid,
    target: &[f64],
    volatility_scale: Option<f64>,
) -> Result<StrategyPath> {
    params.validate()?;
    grid.check_horizon(params.horizon)?;
    if target.len() != grid.len() {
        return Err(Error::Alignment(format!("{} target values for {} nodes", target.len(), grid.len())));
    }
    if target[..grid.steps()].iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("myopic target must be finite at every node".into()));
    }
    let r = volatility_scale.unwrap_or(1.0) / params.sqrt_kappa();
    let n = grid.len();
    let mut x = vec![params.initial_position; n];
    for (k, (a, b)) in grid.cells().enumerate() {
        x[k + 1] = target[k] + (x[k] - target[k]) * (-r * (b - a)).exp();
    }
    let rate = x
        .iter()
        .zip(target)
        .map(|(xk, tk)| if tk.is_finite() { r * (tk - xk) } else { 0.0 })
        .collect();
    Ok(StrategyPath {
        grid: grid.clone(),
        position: x,
        rate,
        flavor: StrategyFlavor::Myopic,
        terminal_gap: None,
    })
}

/// Node values of a deterministic target for the myopic strategy.
///
/// Right-continuous values at interior nodes, the left limit at `T`. A node sitting on a
/// singular point is clipped to the target half a step away on the side the value is used.
pub fn myopic_targets(segs: &[TargetSegment], grid: &TimeGrid) -> Vec<f64> {
    let nodes = grid.nodes();
    let last = nodes.len() - 1;
    nodes
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            if k == last {
                let v = deterministic_left_limit(segs, t);
                if v.is_finite() { v } else { deterministic_value(segs, t - 0.5 * grid.step(k - 1)) }
            } else {
                let v = deterministic_value(segs, t);
                if v.is_finite() { v } else { deterministic_value(segs, t + 0.5 * grid.step(k)) }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::{SignalMethod, TargetProcess};

    fn unit(x: f64) -> ModelParams {
        ModelParams::new(1.0, 1.0, x).unwrap()
    }

    fn flat(g: &TimeGrid, v: f64, flavor: SignalFlavor) -> SignalPath {
        SignalPath::new(g.clone(), vec![v; g.len()], flavor, SignalMethod::ClosedForm).unwrap()
    }

    #[test]
    fn factors_must_match_the_signal() {
        let g = TimeGrid::uniform(1.0, 50).unwrap();
        let h = TimeGrid::uniform(1.0, 40).unwrap();
        let f = StepFactors::new(&unit(0.0), &h, SignalFlavor::Unconstrained).unwrap();
        let s = flat(&g, 1.0, SignalFlavor::Unconstrained);
        assert!(matches!(integrate_unconstrained_with(&unit(0.0), &s, SignalFreeze::LeftNode, &f), Err(Error::Misuse(_))));
        let f = StepFactors::new(&unit(0.0), &g, SignalFlavor::Unconstrained).unwrap();
        assert_eq!(
            integrate_unconstrained_with(&unit(0.0), &s, SignalFreeze::LeftNode, &f).unwrap(),
            integrate_unconstrained(&unit(0.0), &s, SignalFreeze::LeftNode).unwrap()
        );
    }

    #[test]
    fn fixed_point() {
        let g = TimeGrid::uniform(1.0, 50).unwrap();
        let s = integrate_unconstrained(&unit(0.4), &flat(&g, 0.4, SignalFlavor::Unconstrained), SignalFreeze::LeftNode).unwrap();
        assert!(s.position.iter().all(|x| *x == 0.4));
        assert!(s.rate.iter().all(|u| *u == 0.0));
        let c = integrate_constrained(&unit(0.0), &flat(&g, 0.0, SignalFlavor::Constrained), 0.0, SignalFreeze::LeftNode).unwrap();
        assert!(c.position.iter().all(|x| *x == 0.0));
        assert_eq!(c.terminal_gap, Some(0.0));
    }

    #[test]
    fn final_unconstrained_rate_is_zero() {
        let g = TimeGrid::uniform(1.0, 10).unwrap();
        let s = integrate_unconstrained(&unit(0.0), &flat(&g, 1.0, SignalFlavor::Unconstrained), SignalFreeze::LeftNode).unwrap();
        assert_eq!(*s.rate.last().unwrap(), 0.0);
        assert!(s.position.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn constant_signal_matches_closed_form() {
        // With ξ̂ ≡ c the ODE solution is c + (x - c) cosh(tau(t)) / cosh(tau(0)).
        let p = unit(0.0);
        let g = TimeGrid::uniform(1.0, 7).unwrap();
        let s = integrate_unconstrained(&p, &flat(&g, 1.0, SignalFlavor::Unconstrained), SignalFreeze::LeftNode).unwrap();
        for (t, x) in g.nodes().iter().zip(&s.position) {
            let exact = 1.0 - (1.0 - t).cosh() / 1f64.cosh();
            assert!((x - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn myopic_closed_form() {
        let p = unit(0.0);
        let g = TimeGrid::uniform(1.0, 13).unwrap();
        let m = integrate_myopic(&p, &g, &[2.0; 14], None).unwrap();
        for (t, x) in g.nodes().iter().zip(&m.position) {
            assert!((x - (2.0 - 2.0 * (-t).exp())).abs() < 1e-14);
        }
        assert!(integrate_myopic(&p, &g, &[1.0; 3], None).is_err());
    }

    #[test]
    fn wrong_flavor_is_misuse() {
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        let r = integrate_unconstrained(&unit(0.0), &flat(&g, 1.0, SignalFlavor::Constrained), SignalFreeze::LeftNode);
        assert!(matches!(r, Err(Error::Misuse(_))));
    }

    #[test]
    fn myopic_clip_rule() {
        let target = TargetProcess::Segments(crate::scenario::singular_segments(1.0, 0.25, 1.0));
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        let v = myopic_targets(target.segments().unwrap(), &g);
        assert!(v.iter().all(|x| x.is_finite()));
        assert!((v[2] - 0.125f64.powf(-0.25)).abs() < 1e-12);
    }
}
