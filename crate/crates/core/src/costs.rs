//! The tracking objective evaluated directly, its closed-form minimum, and the reachability
//! test for a terminal constraint.
//!
//! Direct evaluation treats a strategy as the piecewise-linear interpolant of its node
//! positions (constant rate per cell) and integrates `½∫(X - ξ)² + ½κ∫u²` exactly against the
//! target's cell moments.

use serde::{Deserialize, Serialize};

use crate::error::{Diagnostic, Error, Result};
use crate::kernels::tau_unchecked;
use crate::model::ModelParams;
use crate::strategies::StrategyPath;
use crate::targets::{CellMoments, SignalFlavor, SignalPath, TerminalConstraint};

/// The three components of the closed-form minimal cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ClosedFormCost {
    pub initial_gap_term: f64,
    pub signal_distance_term: f64,
    pub qv_term: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct CostBreakdown {
    pub tracking_term: f64,
    pub effort_term: f64,
    pub total: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed_form: Option<ClosedFormCost>,
}

fn check_cells(len: usize, moments: &[CellMoments]) -> Result<()> {
    if moments.len() + 1 != len {
        return Err(Error::Alignment(format!("{} cell moments for {len} nodes", moments.len())));
    }
    Ok(())
}

/// `½∫(X - ξ)² dt + ½κ∫u² dt` for one path.
pub fn cost_direct(params: &ModelParams, strategy: &StrategyPath, target: &[CellMoments]) -> Result<CostBreakdown> {
    check_cells(strategy.position.len(), target)?;
    strategy.grid.check_horizon(params.horizon)?;
    let x = &strategy.position;
    let mut tracking = 0.0;
    let mut effort = 0.0;
    for (k, ((a, b), m)) in strategy.grid.cells().zip(target).enumerate() {
        let dt = b - a;
        tracking += m.squared_distance(x[k], x[k + 1], dt);
        let u = (x[k + 1] - x[k]) / dt;
        effort += u * u * dt;
    }
    let tracking_term = 0.5 * tracking;
    let effort_term = 0.5 * params.kappa * effort;
    Ok(CostBreakdown {
        tracking_term,
        effort_term,
        total: tracking_term + effort_term,
        closed_form: None,
    })
}

fn closed_form(params: &ModelParams, signal: &SignalPath, target: &[CellMoments], flavor: SignalFlavor) -> Result<ClosedFormCost> {
    if signal.flavor != flavor {
        return Err(Error::Misuse(format!("expected a {flavor:?} signal")));
    }
    check_cells(signal.values.len(), target)?;
    let qv = signal
        .qv
        .as_ref()
        .ok_or_else(|| Error::Requirement("stochastic signal carries no quadratic variation".into()))?;
    let sk = params.sqrt_kappa();
    let weight = |t: f64| {
        let x = tau_unchecked(params, t);
        match flavor {
            SignalFlavor::Unconstrained => sk * x.tanh(),
            SignalFlavor::Constrained => sk / x.tanh(),
        }
    };
    let nodes = signal.grid.nodes();
    let s = &signal.values;
    let initial_gap_term = 0.5 * weight(0.0) * (params.initial_position - s[0]).powi(2);
    let mut distance = 0.0;
    let mut qv_sum = 0.0;
    for (k, m) in target.iter().enumerate() {
        let dt = nodes[k + 1] - nodes[k];
        distance += m.squared_distance(s[k], s[k + 1], dt);
        let dq = qv[k + 1] - qv[k];
        if dq != 0.0 {
            qv_sum += weight(nodes[k]) * dq;
        }
    }
    let signal_distance_term = 0.5 * distance;
    let qv_term = 0.5 * qv_sum;
    Ok(ClosedFormCost {
        initial_gap_term,
        signal_distance_term,
        qv_term,
        total: initial_gap_term + signal_distance_term + qv_term,
    })
}

/// `½√κ tanh(tau(0))(x - ξ̂_0)² + ½∫(ξ - ξ̂)² dt + ½∫√κ tanh(tau(t)) d<ξ̂>_t`.
pub fn cost_closed_form_unconstrained(params: &ModelParams, signal: &SignalPath, target: &[CellMoments]) -> Result<ClosedFormCost> {
    closed_form(params, signal, target, SignalFlavor::Unconstrained)
}

/// `½√κ coth(tau(0))(x - ξ̂^Ξ_0)² + ½∫(ξ - ξ̂^Ξ)² dt + ½∫√κ coth(tau(t)) d<ξ̂^Ξ>_t`.
pub fn cost_closed_form_constrained(params: &ModelParams, signal: &SignalPath, target: &[CellMoments]) -> Result<ClosedFormCost> {
    closed_form(params, signal, target, SignalFlavor::Constrained)
}

/// Running mean and standard error of per-path costs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct CostEstimate {
    pub mean: CostBreakdown,
    pub std_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed_form_std_error: Option<f64>,
    /// Standard error of the per-path difference between direct and closed-form totals.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paired_std_error: Option<f64>,
    pub n_paths: usize,
}

/// Averages per-path breakdowns in order, so the result does not depend on how they were produced.
///
/// With `weights` (nonnegative, one per path) the means are weighted and the standard errors
/// use `sqrt(Σ w_i² (c_i - c̄)²) / Σ w_i`.
pub fn average_costs(per_path: &[CostBreakdown], weights: Option<&[f64]>) -> Result<CostEstimate> {
    let n = per_path.len();
    if n == 0 {
        return Err(Error::Input("no paths to average".into()));
    }
    if let Some(w) = weights {
        if w.len() != n || w.iter().any(|v| !(*v >= 0.0)) || !(w.iter().sum::<f64>() > 0.0) {
            return Err(Error::Input("need one nonnegative weight per path".into()));
        }
    }
    let nf = n as f64;
    let wt = |i: usize| weights.map_or(1.0, |w| w[i]);
    let total_weight: f64 = (0..n).map(wt).sum();
    let mean_of = |f: &dyn Fn(&CostBreakdown) -> f64| {
        per_path.iter().enumerate().map(|(i, c)| wt(i) * f(c)).sum::<f64>() / total_weight
    };
    let se_of = |f: &dyn Fn(&CostBreakdown) -> f64| {
        if n < 2 {
            return 0.0;
        }
        let m = mean_of(f);
        match weights {
            None => (per_path.iter().map(|c| (f(c) - m).powi(2)).sum::<f64>() / (nf - 1.0) / nf).sqrt(),
            Some(w) => {
                per_path.iter().zip(w).map(|(c, w)| (w * (f(c) - m)).powi(2)).sum::<f64>().sqrt() / total_weight
            }
        }
    };
    let tracking_term = mean_of(&|c| c.tracking_term);
    let effort_term = mean_of(&|c| c.effort_term);
    let with_cf = per_path.iter().all(|c| c.closed_form.is_some());
    let cf = |c: &CostBreakdown| c.closed_form.unwrap_or_default();
    let closed = with_cf.then(|| ClosedFormCost {
        initial_gap_term: mean_of(&|c| cf(c).initial_gap_term),
        signal_distance_term: mean_of(&|c| cf(c).signal_distance_term),
        qv_term: mean_of(&|c| cf(c).qv_term),
        total: mean_of(&|c| cf(c).total),
    });
    Ok(CostEstimate {
        mean: CostBreakdown {
            tracking_term,
            effort_term,
            total: tracking_term + effort_term,
            closed_form: closed,
        },
        std_error: se_of(&|c| c.total),
        closed_form_std_error: with_cf.then(|| se_of(&|c| cf(c).total)),
        paired_std_error: with_cf.then(|| se_of(&|c| c.total - cf(c).total)),
        n_paths: n,
    })
}

impl CostEstimate {
    /// `|direct - closed form| / closed form` of the means.
    pub fn closed_form_gap(&self) -> Option<f64> {
        self.mean.closed_form.map(|c| (self.mean.total - c.total).abs() / c.total.abs())
    }
}

/// Outcome of the reachability test for a terminal constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reachability {
    pub reachable: bool,
    /// `∫_0^T dE[Ξ_t²]/(T - t)` when finite.
    pub integral: Option<f64>,
    pub method: ReachabilityMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReachabilityMethod {
    Analytic,
    Numeric,
}

/// Settings of the numeric divergence rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReachabilityConfig {
    /// Dyadic levels `[T(1-2^-j), T(1-2^-(j+1))]` examined.
    pub levels: usize,
    pub subdivisions: usize,
    /// Divergence when the partial integral exceeds this multiple of the first nonzero level.
    pub growth_bound: f64,
    /// Divergence when the last level still carries this share of the level `decay_lag` earlier.
    pub decay_ratio: f64,
    pub decay_lag: usize,
}

impl Default for ReachabilityConfig {
    fn default() -> Self {
        Self {
            levels: 40,
            subdivisions: 64,
            growth_bound: 1e6,
            decay_ratio: 0.5,
            decay_lag: 8,
        }
    }
}

impl Reachability {
    pub fn into_result(self) -> Result<f64> {
        match (self.reachable, self.integral) {
            (true, Some(v)) => Ok(v),
            _ => Err(Error::Unreachable(Diagnostic {
                partial_integral: self.integral.unwrap_or(f64::INFINITY),
                levels: 0,
                reason: self.diagnostic.unwrap_or_else(|| "divergent".into()),
            })),
        }
    }
}

/// Decides whether `Ξ_T` can be reached with finite expected cost.
///
/// Known constraint families are answered analytically; use [`reachability_numeric`] for an
/// arbitrary second-moment curve.
pub fn reachability_check(params: &ModelParams, constraint: &TerminalConstraint) -> Result<Reachability> {
    params.validate()?;
    let horizon = params.horizon;
    match constraint {
        TerminalConstraint::None => Err(Error::Misuse("no terminal constraint to check".into())),
        TerminalConstraint::Deterministic(_) => Ok(Reachability {
            reachable: true,
            integral: Some(0.0),
            method: ReachabilityMethod::Analytic,
            diagnostic: None,
        }),
        TerminalConstraint::Brownian(b) => {
            if !(b.reveal_until >= 0.0 && b.reveal_until <= horizon) {
                return Err(Error::Input("reveal_until must lie in [0, T]".into()));
            }
            if b.scale == 0.0 {
                return Ok(Reachability { reachable: true, integral: Some(0.0), method: ReachabilityMethod::Analytic, diagnostic: None });
            }
            if b.reveal_until >= horizon {
                return Ok(Reachability {
                    reachable: false,
                    integral: None,
                    method: ReachabilityMethod::Analytic,
                    diagnostic: Some(format!(
                        "terminal position keeps being revealed until maturity: {}² ∫_0^T dt/(T-t) = ∞",
                        b.scale
                    )),
                });
            }
            Ok(Reachability {
                reachable: true,
                integral: Some(b.scale * b.scale * (horizon / (horizon - b.reveal_until)).ln()),
                method: ReachabilityMethod::Analytic,
                diagnostic: None,
            })
        }
    }
}

/// Numeric Stieltjes integral `∫_0^T dm(t)/(T - t)` on a dyadic refinement toward `T`.
///
/// `m` is `E[Ξ_t²]` and must be nondecreasing. On each sub-interval `m` is taken linear, which
/// integrates `1/(T-t)` exactly; a piecewise-linear `m` with dyadic kinks is integrated exactly.
/// Divergence is declared when the partial sum passes `growth_bound` times the first nonzero
/// level, when level contributions fail to decay, or when mass is revealed only at `T`.
pub fn reachability_numeric<M: Fn(f64) -> f64>(params: &ModelParams, m: M, cfg: &ReachabilityConfig) -> Result<Reachability> {
    params.validate()?;
    let horizon = params.horizon;
    let mut prev_t = 0.0;
    let mut prev_m = m(0.0);
    let mut contributions = Vec::with_capacity(cfg.levels);
    let mut total = 0.0;
    let scale = |v: f64| 1e-12 * (1.0 + v.abs());
    for j in 0..cfg.levels {
        let hi = horizon * (1.0 - 0.5f64.powi(j as i32 + 1));
        let lo = prev_t;
        let mut level = 0.0;
        for i in 1..=cfg.subdivisions {
            let t = lo + (hi - lo) * i as f64 / cfg.subdivisions as f64;
            let mt = m(t);
            if !mt.is_finite() {
                return Err(Error::Input(format!("E[Xi_t^2] is not finite at t = {t}")));
            }
            let dm = mt - prev_m;
            if dm < -scale(mt) {
                return Err(Error::Input(format!(
                    "E[Xi_t^2] must be nondecreasing; it drops by {:e} near t = {t}",
                    -dm
                )));
            }
            if dm > 0.0 {
                let (a, b) = (prev_t, t);
                level += dm / (b - a) * ((b - a) / (horizon - b)).ln_1p();
            }
            prev_t = t;
            prev_m = mt;
        }
        total += level;
        contributions.push(level);
    }
    let levels = contributions.len();
    let diverged = |reason: String| Reachability {
        reachable: false,
        integral: None,
        method: ReachabilityMethod::Numeric,
        diagnostic: Some(format!("{reason}; partial integral {total:.6e} after {levels} dyadic levels")),
    };
    let atom = m(horizon) - prev_m;
    if atom > 1e-9 * (1.0 + m(horizon).abs()) {
        return Ok(diverged(format!("E[Xi_t^2] jumps by {atom:e} at maturity")));
    }
    let baseline = contributions.iter().copied().find(|c| *c > 0.0).unwrap_or(0.0);
    if baseline > 0.0 && total > cfg.growth_bound * baseline {
        return Ok(diverged("partial integral exceeds the growth bound".into()));
    }
    if levels > cfg.decay_lag {
        let last = contributions[levels - 1];
        let earlier = contributions[levels - 1 - cfg.decay_lag];
        if earlier > 0.0 && last >= cfg.decay_ratio * earlier {
            return Ok(diverged(format!(
                "dyadic contributions do not decay ({last:.3e} vs {earlier:.3e} {} levels earlier)",
                cfg.decay_lag
            )));
        }
    }
    Ok(Reachability {
        reachable: true,
        integral: Some(total),
        method: ReachabilityMethod::Numeric,
        diagnostic: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;
    use crate::strategies::StrategyFlavor;
    use crate::targets::{BrownianConstraint, SignalMethod};

    fn idle(g: &TimeGrid, x: f64) -> StrategyPath {
        StrategyPath {
            grid: g.clone(),
            position: vec![x; g.len()],
            rate: vec![0.0; g.len()],
            flavor: StrategyFlavor::Myopic,
            terminal_gap: None,
        }
    }

    #[test]
    fn direct_cost_trivial_cases() {
        let p = ModelParams::new(3.0, 1.0, 0.2).unwrap();
        let g = TimeGrid::uniform(1.0, 10).unwrap();
        let zero = cost_direct(&p, &idle(&g, 0.2), &vec![CellMoments::held(0.2); 10]).unwrap();
        assert_eq!(zero.total, 0.0);
        let one = cost_direct(&p, &idle(&g, 0.2), &vec![CellMoments::held(1.2); 10]).unwrap();
        assert!((one.tracking_term - 0.5).abs() < 1e-12);
        assert_eq!(one.effort_term, 0.0);
        assert!(cost_direct(&p, &idle(&g, 0.2), &[CellMoments::held(0.0); 3]).is_err());
    }

    #[test]
    fn closed_form_constant_target() {
        let p = ModelParams::new(0.5, 1.0, 0.0).unwrap();
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        let mut s = SignalPath::new(g.clone(), vec![2.0; 5], SignalFlavor::Unconstrained, SignalMethod::ClosedForm).unwrap();
        assert!(matches!(
            cost_closed_form_unconstrained(&p, &s, &[CellMoments::held(2.0); 4]),
            Err(Error::Requirement(_))
        ));
        s.qv = Some(vec![0.0; 5]);
        let c = cost_closed_form_unconstrained(&p, &s, &[CellMoments::held(2.0); 4]).unwrap();
        let want = 0.5 * 0.5f64.sqrt() * (1.0 / 0.5f64.sqrt()).tanh() * 4.0;
        assert!((c.total - want).abs() < 1e-14);
        assert_eq!(c.signal_distance_term, 0.0);
    }

    #[test]
    fn analytic_reachability() {
        let p = ModelParams::new(1.0, 1.0, 0.0).unwrap();
        let det = reachability_check(&p, &TerminalConstraint::Deterministic(3.0)).unwrap();
        assert_eq!(det.integral, Some(0.0));
        let half = reachability_check(
            &p,
            &TerminalConstraint::Brownian(BrownianConstraint { offset: 0.0, scale: 1.0, reveal_until: 0.5 }),
        )
        .unwrap();
        assert!((half.integral.unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        let full = reachability_check(
            &p,
            &TerminalConstraint::Brownian(BrownianConstraint { offset: 0.0, scale: 1.0, reveal_until: 1.0 }),
        )
        .unwrap();
        assert!(!full.reachable);
        assert!(full.into_result().is_err());
    }

    #[test]
    fn numeric_reachability() {
        let p = ModelParams::new(1.0, 1.0, 0.0).unwrap();
        let cfg = ReachabilityConfig::default();
        let half = reachability_numeric(&p, |t| t.min(0.5), &cfg).unwrap();
        assert!((half.integral.unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(!reachability_numeric(&p, |t| t, &cfg).unwrap().reachable);
        assert!(reachability_numeric(&p, |_| 4.0, &cfg).unwrap().reachable);
        assert!(!reachability_numeric(&p, |t| if t < 1.0 { 0.0 } else { 1.0 }, &cfg).unwrap().reachable);
        assert!(matches!(reachability_numeric(&p, |t| -t, &cfg), Err(Error::Input(_))));
        // m(t) = 1 - (1-t)²: ∫ 2(1-t)/(1-t) dt = 2, up to the chord error of 64 sub-pieces.
        let smooth = reachability_numeric(&p, |t| 1.0 - (1.0 - t).powi(2), &cfg).unwrap();
        assert!((smooth.integral.unwrap() - 2.0).abs() < 5e-5, "{:?}", smooth.integral);
    }
}
