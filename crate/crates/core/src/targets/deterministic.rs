use rayon::prelude::*;

use super::{
    deterministic_left_limit, SegmentShape, SignalFlavor, SignalMethod, SignalPath, TargetProcess,
    TargetSegment, TerminalConstraint,
};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::kernels::{self, ln_cosh, ln_cosh_m1, tau_unchecked};
use crate::model::ModelParams;
use crate::quadrature::QuadratureConfig;

/// How kernel averages over deterministic segments are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeterministicRoute {
    /// Closed-form masses and moments; quadrature only for singular segments.
    #[default]
    Exact,
    /// Adaptive quadrature for every segment.
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SignalOptions {
    pub route: DeterministicRoute,
    pub quadrature: QuadratureConfig,
}

#[derive(Clone, Copy)]
enum Kernel {
    K,
    KXi,
}

fn kernel_value(params: &ModelParams, kernel: Kernel, t: f64, u: f64) -> f64 {
    let (xt, xu) = (tau_unchecked(params, t), tau_unchecked(params, u));
    let ln = match kernel {
        Kernel::K => ln_cosh(xu) - kernels::ln_sinh(xt),
        Kernel::KXi if xu == 0.0 => return 0.0,
        Kernel::KXi => kernels::ln_sinh(xu) - ln_cosh_m1(xt),
    };
    ln.exp() / params.sqrt_kappa()
}

fn segment_average(
    params: &ModelParams,
    kernel: Kernel,
    seg: &TargetSegment,
    t: f64,
    lo: f64,
    hi: f64,
    opts: &SignalOptions,
) -> Result<(f64, bool)> {
    if opts.route == DeterministicRoute::Exact {
        match &seg.shape {
            SegmentShape::Constant(c) => {
                let m = match kernel {
                    Kernel::K => kernels::k_mass(params, t, lo, hi),
                    Kernel::KXi => kernels::kxi_mass(params, t, lo, hi),
                };
                return Ok((c * m, false));
            }
            SegmentShape::Polynomial(c) => {
                let m = match kernel {
                    Kernel::K => kernels::kernel_k_moment(params, t, lo, hi, c)?,
                    Kernel::KXi => kernels::kernel_kxi_moment(params, t, lo, hi, c)?,
                };
                return Ok((m, false));
            }
            SegmentShape::PowerSingularity(_) => {}
        }
    }
    let v = seg.integrate_weighted(|u| kernel_value(params, kernel, t, u), lo, hi, 1, &opts.quadrature)?;
    Ok((v, true))
}

/// `∫_t^T ξ_u kernel(t, u) du` for `t < T`.
fn kernel_average(
    params: &ModelParams,
    kernel: Kernel,
    segs: &[TargetSegment],
    t: f64,
    opts: &SignalOptions,
) -> Result<(f64, bool)> {
    let remaining: Vec<&TargetSegment> = segs.iter().filter(|s| s.to > t).collect();
    // Measure everything relative to a constant final level so that a target constant on
    // [t, T] is reproduced exactly even though the kernel masses sum to 1 only up to rounding.
    let anchor = match (opts.route, remaining.last().map(|s| &s.shape)) {
        (DeterministicRoute::Exact, Some(SegmentShape::Constant(c))) => *c,
        _ => 0.0,
    };
    let mut total = anchor;
    let mut used_quadrature = false;
    for seg in remaining {
        let lo = seg.from.max(t);
        let (v, q) = segment_average(params, kernel, seg, t, lo, seg.to, opts)?;
        let mass = match kernel {
            Kernel::K => kernels::k_mass(params, t, lo, seg.to),
            Kernel::KXi => kernels::kxi_mass(params, t, lo, seg.to),
        };
        total += v - anchor * mass;
        used_quadrature |= q;
    }
    Ok((total, used_quadrature))
}

fn deterministic_segments(target: &TargetProcess) -> Result<&[TargetSegment]> {
    target.segments().ok_or_else(|| {
        Error::Misuse(
            "stochastic targets need signal_asian, signal_monte_carlo or signal_regression".into(),
        )
    })
}

fn check_inputs(params: &ModelParams, target: &TargetProcess, grid: &TimeGrid) -> Result<()> {
    params.validate()?;
    target.validate(params.horizon)?;
    target.check_alignment(grid, params.horizon)
}

/// `ξ̂_t = ∫_t^T ξ_u K(t, u) du` at every node of `grid` for a deterministic target.
///
/// The value at `T` is the limit `ξ_{T-}`.
pub fn signal_unconstrained(
    params: &ModelParams,
    target: &TargetProcess,
    grid: &TimeGrid,
    opts: &SignalOptions,
) -> Result<SignalPath> {
    let segs = deterministic_segments(target)?;
    check_inputs(params, target, grid)?;
    let horizon = params.horizon;
    let nodes = grid.nodes();
    let evaluated: Vec<(f64, bool)> = nodes
        .par_iter()
        .map(|&t| {
            if t >= horizon {
                Ok((deterministic_left_limit(segs, horizon), false))
            } else {
                kernel_average(params, Kernel::K, segs, t, opts)
            }
        })
        .collect::<Result<_>>()?;
    finish(grid, evaluated, SignalFlavor::Unconstrained)
}

/// `ξ̂^Ξ_t = Ξ_T / cosh(tau(t)) + (1 - 1/cosh(tau(t))) ∫_t^T ξ_u KΞ(t, u) du` for a
/// deterministic target and terminal position.
pub fn signal_constrained(
    params: &ModelParams,
    target: &TargetProcess,
    constraint: &TerminalConstraint,
    grid: &TimeGrid,
    opts: &SignalOptions,
) -> Result<SignalPath> {
    let terminal = match constraint {
        TerminalConstraint::None => {
            return Err(Error::Misuse("constrained signal requested without a terminal constraint".into()))
        }
        TerminalConstraint::Deterministic(v) => *v,
        TerminalConstraint::Brownian(_) => {
            return Err(Error::Misuse(
                "a random terminal position needs a stochastic driver; use signal_asian".into(),
            ))
        }
    };
    let segs = deterministic_segments(target)?;
    check_inputs(params, target, grid)?;
    let horizon = params.horizon;
    let evaluated: Vec<(f64, bool)> = grid
        .nodes()
        .par_iter()
        .map(|&t| {
            if t >= horizon {
                return Ok((terminal, false));
            }
            let x = tau_unchecked(params, t);
            let weight = (-ln_cosh(x)).exp();
            let complement = (ln_cosh_m1(x) - ln_cosh(x)).exp();
            let (avg, q) = kernel_average(params, Kernel::KXi, segs, t, opts)?;
            Ok((weight * terminal + complement * avg, q))
        })
        .collect::<Result<_>>()?;
    finish(grid, evaluated, SignalFlavor::Constrained)
}

fn finish(grid: &TimeGrid, evaluated: Vec<(f64, bool)>, flavor: SignalFlavor) -> Result<SignalPath> {
    let quadrature = evaluated.iter().any(|e| e.1);
    let values = evaluated.into_iter().map(|e| e.0).collect();
    let method = if quadrature { SignalMethod::Quadrature } else { SignalMethod::ClosedForm };
    let mut path = SignalPath::new(grid.clone(), values, flavor, method)?;
    path.qv = Some(vec![0.0; grid.len()]);
    Ok(path)
}
