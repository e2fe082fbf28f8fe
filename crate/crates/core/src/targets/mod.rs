//! Frictionless targets, terminal constraints and the averaged signals the optimal strategies
//! trade toward.

mod deterministic;
mod stochastic;

use serde::{Deserialize, Serialize};

pub use deterministic::{signal_constrained, signal_unconstrained, DeterministicRoute, SignalOptions};
pub use stochastic::{
    realized_qv, signal_asian, signal_monte_carlo, signal_regression, AsianSignalTable, AsianState, AsianTarget,
    McEstimate, McOptions, StochasticTarget,
};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::model::ModelParams;
use crate::kernels::MAX_POLY_DEGREE;
use crate::quadrature::{integrate, integrate_power_weight, QuadratureConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerSingularity {
    pub center: f64,
    pub exponent: f64,
    pub left_sign: f64,
    pub right_sign: f64,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

impl PowerSingularity {
    /// `scale * sign * |u - c|^(-exponent)`; infinite at the center.
    pub fn value(&self, u: f64) -> f64 {
        let sign = if u < self.center { self.left_sign } else { self.right_sign };
        self.scale * sign * (u - self.center).abs().powf(-self.exponent)
    }

    fn side_factor(&self, u: f64) -> f64 {
        self.scale * if u < self.center { self.left_sign } else { self.right_sign }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentShape {
    Constant(f64),
    /// Coefficients of `Σ c_i t^i`, lowest order first.
    Polynomial(Vec<f64>),
    PowerSingularity(PowerSingularity),
}

/// Target on `[from, to)`; the last segment also covers its right endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSegment {
    pub from: f64,
    pub to: f64,
    pub shape: SegmentShape,
}

impl TargetSegment {
    pub fn constant(from: f64, to: f64, level: f64) -> Self {
        Self { from, to, shape: SegmentShape::Constant(level) }
    }

    pub fn value(&self, u: f64) -> f64 {
        match &self.shape {
            SegmentShape::Constant(c) => *c,
            SegmentShape::Polynomial(c) => horner(c, u),
            SegmentShape::PowerSingularity(p) => p.value(u),
        }
    }

    /// `∫_a^b g(u) ξ(u)^power du` over a subinterval, splitting at a singular point if present.
    pub(crate) fn integrate_weighted<G: Fn(f64) -> f64>(
        &self,
        g: G,
        a: f64,
        b: f64,
        power: i32,
        cfg: &QuadratureConfig,
    ) -> Result<f64> {
        if b <= a {
            return Ok(0.0);
        }
        match &self.shape {
            SegmentShape::PowerSingularity(p) => {
                let beta = p.exponent * power as f64;
                let weighted = |u: f64| g(u) * p.side_factor(u).powi(power);
                if p.center > a && p.center < b {
                    Ok(integrate_power_weight(weighted, a, p.center, p.center, beta, cfg)?
                        + integrate_power_weight(weighted, p.center, b, p.center, beta, cfg)?)
                } else {
                    integrate_power_weight(weighted, a, b, p.center, beta, cfg)
                }
            }
            _ => integrate(|u| g(u) * self.value(u).powi(power), a, b, cfg),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Input(m));
        if !(self.from < self.to) {
            return bad(format!("segment [{}, {}) is empty", self.from, self.to));
        }
        match &self.shape {
            SegmentShape::Constant(c) if !c.is_finite() => bad("constant level must be finite".into()),
            SegmentShape::Polynomial(c) if c.is_empty() || c.len() > MAX_POLY_DEGREE + 1 => {
                bad(format!("polynomial needs 1..={} coefficients", MAX_POLY_DEGREE + 1))
            }
            SegmentShape::PowerSingularity(p) => {
                if !(p.exponent > 0.0 && p.exponent < 0.5) {
                    bad(format!("singularity exponent {} must lie in (0, 1/2)", p.exponent))
                } else if !(p.center >= self.from && p.center <= self.to) {
                    bad("singular point must lie in its segment".into())
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

pub(crate) fn horner(c: &[f64], u: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * u + ci)
}

/// Per-cell integrals of a target over `[a, b]`: the mean `ξ̄`, the tilt
/// `∫(ξ - ξ̄)(u - a)/(b - a) du` and the spread `∫(ξ - ξ̄)² du`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CellMoments {
    pub mean: f64,
    pub tilt: f64,
    pub spread: f64,
}

impl CellMoments {
    /// A value held constant over the cell.
    pub fn held(value: f64) -> Self {
        Self { mean: value, tilt: 0.0, spread: 0.0 }
    }

    fn from_raw(m0: f64, m1: f64, m2: f64, dt: f64) -> Self {
        let mean = m0 / dt;
        Self { mean, tilt: m1 - 0.5 * m0, spread: (m2 - m0 * mean).max(0.0) }
    }

    /// `∫_a^b (X(u) - ξ(u))² du` for `X` linear from `xa` to `xb`.
    pub fn squared_distance(&self, xa: f64, xb: f64, dt: f64) -> f64 {
        let (da, db) = (xa - self.mean, xb - self.mean);
        (dt * (da * da + da * db + db * db) / 3.0 - 2.0 * (xb - xa) * self.tilt + self.spread).max(0.0)
    }

    /// `∫_a^b (X(u) - ξ(u)) du` for `X` linear from `xa` to `xb`.
    pub fn distance(&self, xa: f64, xb: f64, dt: f64) -> f64 {
        dt * (0.5 * (xa + xb) - self.mean)
    }

    /// `∫_a^b (u - a)(X(u) - ξ(u)) du` for `X` linear from `xa` to `xb`.
    pub fn tilted_distance(&self, xa: f64, xb: f64, dt: f64) -> f64 {
        dt * dt * ((xa - self.mean) / 6.0 + (xb - self.mean) / 3.0) - dt * self.tilt
    }
}

/// Path ensemble of target positions with optional Markov state for regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetEnsemble {
    pub grid: TimeGrid,
    /// One row of target values per path, sampled at every node.
    pub paths: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// State variable per path and node; the target itself if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<Vec<Vec<f64>>>,
}

impl TargetEnsemble {
    pub fn validate(&self) -> Result<()> {
        if self.paths.is_empty() || self.paths.len() != self.weights.len() {
            return Err(Error::Input("ensemble needs one weight per path".into()));
        }
        if self.paths.iter().any(|p| p.len() != self.grid.len()) {
            return Err(Error::Input("every ensemble path must cover the grid".into()));
        }
        if let Some(s) = &self.state {
            if s.len() != self.paths.len() || s.iter().any(|p| p.len() != self.grid.len()) {
                return Err(Error::Input("state paths must match target paths".into()));
            }
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Input("ensemble weights must be nonnegative".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Input(format!("ensemble weights sum to {total}, not 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetProcess {
    Segments(Vec<TargetSegment>),
    Asian(AsianTarget),
    Ensemble(TargetEnsemble),
}

impl TargetProcess {
    /// Fails unless the definition is internally consistent on `[0, horizon]`.
    pub fn validate(&self, horizon: f64) -> Result<()> {
        match self {
            TargetProcess::Segments(segs) => {
                let first = segs.first().ok_or_else(|| Error::Input("no target segments".into()))?;
                if first.from != 0.0 {
                    return Err(Error::Input("target segments must start at 0".into()));
                }
                for w in segs.windows(2) {
                    if w[0].to != w[1].from {
                        return Err(Error::Input(format!(
                            "segments must tile [0, T]: gap or overlap at {}",
                            w[0].to
                        )));
                    }
                }
                let last = segs.last().expect("nonempty");
                if (last.to - horizon).abs() > 1e-12 * horizon.max(1.0) {
                    return Err(Error::Input(format!(
                        "target segments end at {} but the horizon is {horizon}",
                        last.to
                    )));
                }
                segs.iter().try_for_each(TargetSegment::validate)
            }
            TargetProcess::Asian(a) => a.spec(horizon).map(|_| ()),
            TargetProcess::Ensemble(e) => {
                e.validate()?;
                e.grid.check_horizon(horizon)
            }
        }
    }

    pub fn segments(&self) -> Option<&[TargetSegment]> {
        match self {
            TargetProcess::Segments(s) => Some(s),
            _ => None,
        }
    }

    /// Times the grid must contain: segment boundaries, singular points, the Asian fixing date.
    pub fn required_nodes(&self, horizon: f64) -> Vec<f64> {
        let mut out = Vec::new();
        match self {
            TargetProcess::Segments(segs) => {
                for s in segs {
                    out.push(s.from);
                    out.push(s.to);
                    if let SegmentShape::PowerSingularity(p) = &s.shape {
                        out.push(p.center);
                    }
                }
            }
            TargetProcess::Asian(_) => out.push(0.5 * horizon),
            TargetProcess::Ensemble(e) => out.extend_from_slice(e.grid.nodes()),
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    pub fn check_alignment(&self, grid: &TimeGrid, horizon: f64) -> Result<()> {
        grid.check_horizon(horizon)?;
        if let TargetProcess::Ensemble(e) = self {
            if e.grid != *grid {
                return Err(Error::Alignment("ensemble grid differs from the run grid".into()));
            }
        }
        for t in self.required_nodes(horizon) {
            if !grid.contains(t) {
                return Err(Error::Alignment(format!("grid has no node at t = {t}")));
            }
        }
        Ok(())
    }
}

/// Segment holding `u` on the right (`[from, to)`), the last segment for `u = T`.
pub(crate) fn segment_at(segs: &[TargetSegment], u: f64) -> &TargetSegment {
    let i = segs.partition_point(|s| s.to <= u);
    &segs[i.min(segs.len() - 1)]
}

/// Right-continuous value of a deterministic target; infinite at a singular point.
pub fn deterministic_value(segs: &[TargetSegment], u: f64) -> f64 {
    segment_at(segs, u).value(u)
}

/// Left limit `ξ_{u-}` (for `u = 0` the right value).
pub fn deterministic_left_limit(segs: &[TargetSegment], u: f64) -> f64 {
    if u <= 0.0 {
        return deterministic_value(segs, 0.0);
    }
    let i = segs.partition_point(|s| s.to < u);
    segs[i.min(segs.len() - 1)].value(u)
}

/// Exact (or singularity-aware quadrature) cell moments of a deterministic target.
pub fn cell_moments(segs: &[TargetSegment], grid: &TimeGrid, cfg: &QuadratureConfig) -> Result<Vec<CellMoments>> {
    grid.cells()
        .map(|(a, b)| {
            let dt = b - a;
            let inside: Vec<&TargetSegment> = segs.iter().filter(|s| s.to > a && s.from < b).collect();
            if let [only] = inside.as_slice() {
                if let SegmentShape::Constant(c) = only.shape {
                    return Ok(CellMoments::held(c));
                }
            }
            let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
            for s in inside {
                let (lo, hi) = (s.from.max(a), s.to.min(b));
                if let SegmentShape::Constant(c) = s.shape {
                    let (x0, x1) = ((lo - a) / dt, (hi - a) / dt);
                    m0 += c * (hi - lo);
                    m1 += c * dt * 0.5 * (x1 * x1 - x0 * x0);
                    m2 += c * c * (hi - lo);
                } else {
                    m0 += s.integrate_weighted(|_| 1.0, lo, hi, 1, cfg)?;
                    m1 += s.integrate_weighted(|u| (u - a) / dt, lo, hi, 1, cfg)?;
                    m2 += s.integrate_weighted(|_| 1.0, lo, hi, 2, cfg)?;
                }
            }
            Ok(CellMoments::from_raw(m0, m1, m2, dt))
        })
        .collect()
}

/// Terminal position the constrained problem must reach.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TerminalConstraint {
    #[default]
    None,
    Deterministic(f64),
    /// `Ξ_t = offset + scale W_{min(t, reveal_until)}` for the market's driving Brownian motion.
    Brownian(BrownianConstraint),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BrownianConstraint {
    pub offset: f64,
    pub scale: f64,
    pub reveal_until: f64,
}

impl BrownianConstraint {
    /// `Ξ_t` given `W_{min(t, reveal_until)}`.
    pub fn value(&self, w_revealed: f64) -> f64 {
        self.offset + self.scale * w_revealed
    }

    /// `d<Ξ>_t / dt`.
    pub fn qv_density(&self, t: f64) -> f64 {
        if t < self.reveal_until {
            self.scale * self.scale
        } else {
            0.0
        }
    }
}

impl TerminalConstraint {
    pub fn is_none(&self) -> bool {
        matches!(self, TerminalConstraint::None)
    }

    /// `E[Ξ_t²]`; `None` when there is no constraint.
    pub fn second_moment(&self, t: f64) -> Option<f64> {
        match self {
            TerminalConstraint::None => None,
            TerminalConstraint::Deterministic(v) => Some(v * v),
            TerminalConstraint::Brownian(b) => {
                Some(b.offset * b.offset + b.scale * b.scale * t.min(b.reveal_until))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalFlavor {
    Unconstrained,
    Constrained,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalMethod {
    ClosedForm,
    Quadrature,
    MonteCarlo { n_paths: usize, seed: u64 },
    Regression { degree: usize },
}

/// Signal values at the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalPath {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub flavor: SignalFlavor,
    pub method: SignalMethod,
    /// Cumulative quadratic variation per node, starting at 0.
    pub qv: Option<Vec<f64>>,
}

impl SignalPath {
    pub fn new(grid: TimeGrid, values: Vec<f64>, flavor: SignalFlavor, method: SignalMethod) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Alignment(format!(
                "{} signal values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values, flavor, method, qv: None })
    }

    pub fn with_qv(mut self, qv: Vec<f64>) -> Result<Self> {
        if qv.len() != self.grid.len() || qv[0] != 0.0 || qv.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Input("quadratic variation must start at 0 and be nondecreasing".into()));
        }
        self.qv = Some(qv);
        Ok(self)
    }

    pub fn initial(&self) -> f64 {
        self.values[0]
    }

    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("nonempty")
    }

    /// Per-path realized quadratic variation of this single signal path.
    pub fn realized_qv(&self) -> Vec<f64> {
        let mut acc = 0.0;
        std::iter::once(0.0)
            .chain(self.values.windows(2).map(|w| {
                acc += (w[1] - w[0]).powi(2);
                acc
            }))
            .collect()
    }

    /// Realized quadratic variation of the martingale part of the signal.
    ///
    /// The signal drifts toward the target at rate coth/√κ (unconstrained) or
    /// tanh/√κ (constrained). Removing the left-node drift from each increment
    /// drops the squared drift, which is first order in the step.
    pub fn compensated_qv(&self, params: &ModelParams, xi: &[f64]) -> Result<Vec<f64>> {
        if xi.len() + 1 < self.values.len() {
            return Err(Error::Alignment(format!("{} target values for {} nodes", xi.len(), self.values.len())));
        }
        let mut out = Vec::with_capacity(self.values.len());
        out.push(0.0);
        let mut acc = 0.0;
        for (k, (t, b)) in self.grid.cells().enumerate() {
            let rate = match self.flavor {
                SignalFlavor::Unconstrained => crate::kernels::rate_constrained(params, t)?,
                SignalFlavor::Constrained => crate::kernels::rate_unconstrained(params, t)?,
            };
            let drift = rate * (self.values[k] - xi[k]) * (b - t);
            acc += (self.values[k + 1] - self.values[k] - drift).powi(2);
            out.push(acc);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig1() -> Vec<TargetSegment> {
        vec![TargetSegment::constant(0.0, 0.5, 1.0), TargetSegment::constant(0.5, 1.0, 2.0)]
    }

    #[test]
    fn json_shape() {
        let t = TargetProcess::Segments(fig1());
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(
            s,
            r#"{"segments":[{"from":0.0,"to":0.5,"shape":{"constant":1.0}},{"from":0.5,"to":1.0,"shape":{"constant":2.0}}]}"#
        );
        let a: TargetProcess =
            serde_json::from_str(r#"{"asian":{"sigma":1.0,"strike":0.0,"s0":0.0}}"#).unwrap();
        assert!(matches!(a, TargetProcess::Asian(_)));
        let c: TerminalConstraint = serde_json::from_str(r#""none""#).unwrap();
        assert!(c.is_none());
        let d: TerminalConstraint = serde_json::from_str(r#"{"deterministic":0.0}"#).unwrap();
        assert_eq!(d, TerminalConstraint::Deterministic(0.0));
    }

    #[test]
    fn validation() {
        assert!(TargetProcess::Segments(fig1()).validate(1.0).is_ok());
        let gap = vec![TargetSegment::constant(0.0, 0.4, 1.0), TargetSegment::constant(0.5, 1.0, 2.0)];
        assert!(TargetProcess::Segments(gap).validate(1.0).is_err());
        let bad_alpha = vec![TargetSegment {
            from: 0.0,
            to: 1.0,
            shape: SegmentShape::PowerSingularity(PowerSingularity {
                center: 0.5,
                exponent: 0.5,
                left_sign: -1.0,
                right_sign: 1.0,
                scale: 1.0,
            }),
        }];
        assert!(TargetProcess::Segments(bad_alpha).validate(1.0).is_err());
    }

    #[test]
    fn values_and_limits() {
        let s = fig1();
        assert_eq!(deterministic_value(&s, 0.5), 2.0);
        assert_eq!(deterministic_left_limit(&s, 0.5), 1.0);
        assert_eq!(deterministic_value(&s, 1.0), 2.0);
        assert_eq!(deterministic_value(&s, 0.0), 1.0);
    }

    #[test]
    fn alignment() {
        let t = TargetProcess::Segments(fig1());
        assert!(t.check_alignment(&TimeGrid::uniform(1.0, 4).unwrap(), 1.0).is_ok());
        assert!(matches!(
            t.check_alignment(&TimeGrid::uniform(1.0, 3).unwrap(), 1.0),
            Err(Error::Alignment(_))
        ));
    }

    #[test]
    fn singular_cell_moments_are_finite_and_exact() {
        let p = PowerSingularity { center: 0.5, exponent: 0.25, left_sign: -1.0, right_sign: 1.0, scale: 1.0 };
        let segs = vec![
            TargetSegment { from: 0.0, to: 0.5, shape: SegmentShape::PowerSingularity(p) },
            TargetSegment { from: 0.5, to: 1.0, shape: SegmentShape::PowerSingularity(p) },
        ];
        let g = TimeGrid::uniform(1.0, 2).unwrap();
        let m = cell_moments(&segs, &g, &QuadratureConfig::default()).unwrap();
        // ∫_0^{1/2} (1/2-u)^{-1/4} du = (4/3)(1/2)^{3/4}; ∫ ξ² = 2 (1/2)^{1/2}.
        let m0 = 4.0 / 3.0 * 0.5f64.powf(0.75);
        assert!((m[0].mean * 0.5 + m0).abs() < 1e-10);
        assert!((m[1].mean * 0.5 - m0).abs() < 1e-10);
        let m2 = 2.0 * 0.5f64.sqrt();
        assert!((m[0].spread + 2.0 * m0 * m0 - m2).abs() < 1e-10);
    }

    #[test]
    fn linear_distance_formulas() {
        // ξ(u) = u on [0, 1], X linear from 1 to 3: ∫(X-ξ)² = ∫(1+u)² = 7/3.
        let segs = vec![TargetSegment { from: 0.0, to: 1.0, shape: SegmentShape::Polynomial(vec![0.0, 1.0]) }];
        let g = TimeGrid::uniform(1.0, 1).unwrap();
        let m = cell_moments(&segs, &g, &QuadratureConfig::default()).unwrap()[0];
        assert!((m.squared_distance(1.0, 3.0, 1.0) - 7.0 / 3.0).abs() < 1e-12);
        assert!((m.distance(1.0, 3.0, 1.0) - 1.5).abs() < 1e-12);
        // ∫ u (1 + u) du = 5/6.
        assert!((m.tilted_distance(1.0, 3.0, 1.0) - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(CellMoments::held(2.0).squared_distance(2.0, 2.0, 0.1), 0.0);
    }

    #[test]
    fn realized_qv_of_single_path() {
        let g = TimeGrid::uniform(1.0, 3).unwrap();
        let s = SignalPath::new(g, vec![0.0, 1.0, 0.5, 0.5], SignalFlavor::Unconstrained, SignalMethod::ClosedForm).unwrap();
        assert_eq!(s.realized_qv(), vec![0.0, 1.0, 1.25, 1.25]);
        assert!(s.clone().with_qv(vec![0.0, 1.0, 0.5, 2.0]).is_err());
    }
}
