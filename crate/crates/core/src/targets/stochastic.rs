//! Signals of random targets: closed forms for the Bachelier Asian delta, a nested Monte Carlo
//! estimator for any simulable target, and least-squares regression over a path ensemble.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{SignalFlavor, SignalMethod, SignalPath, TargetEnsemble};
use crate::bachelier::BachelierAsianSpec;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::kernels::{k_mass, kxi_mass, ln_cosh, ln_cosh_m1, sinh_ratio, tau_unchecked};
use crate::model::ModelParams;
use crate::rng::PathRng;

/// An Asian-delta target as it appears in a scenario file; the horizon comes from the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsianTarget {
    pub s0: f64,
    pub sigma: f64,
    pub strike: f64,
}

impl AsianTarget {
    pub fn spec(&self, horizon: f64) -> Result<BachelierAsianSpec> {
        BachelierAsianSpec::new(self.s0, self.sigma, self.strike, horizon)
    }
}

/// Market state of the Asian problem: spot and, after the first fixing, `S_{T/2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsianState {
    pub spot: f64,
    pub fixing: Option<f64>,
}

/// `1/cosh(tau)` and `1 - 1/cosh(tau)` without cancellation.
fn terminal_weights(params: &ModelParams, t: f64) -> (f64, f64) {
    let x = tau_unchecked(params, t);
    if x == 0.0 {
        return (1.0, 0.0);
    }
    ((-ln_cosh(x)).exp(), (ln_cosh_m1(x) - ln_cosh(x)).exp())
}

/// Time-only factors of the Asian signal at one date.
#[derive(Debug, Clone, Copy, PartialEq)]
struct AsianFactors {
    /// `1 - ½ sinh(tau_h)/sinh(tau_t)` before the fixing, 1 after.
    free: f64,
    /// `1 - ½ (cosh(tau_h) + 1)/cosh(tau_t)` before the fixing, `1 - 1/cosh(tau_t)` after.
    pinned: f64,
    /// `1/cosh(tau_t)`.
    terminal: f64,
}

impl AsianFactors {
    fn new(params: &ModelParams, spec: &BachelierAsianSpec, t: f64) -> Self {
        let half = spec.fixing_time();
        let (w_term, w_avg) = terminal_weights(params, t);
        if t < half {
            let xh = tau_unchecked(params, half);
            let xt = tau_unchecked(params, t);
            // (cosh(tau_h) + 1) / cosh(tau_t)
            let ratio = (ln_cosh(xh) - ln_cosh(xt)).exp() + (-ln_cosh(xt)).exp();
            Self { free: 1.0 - 0.5 * sinh_ratio(params, half, t), pinned: 1.0 - 0.5 * ratio, terminal: w_term }
        } else {
            Self { free: 1.0, pinned: w_avg, terminal: w_term }
        }
    }

    fn signal(&self, delta: f64, flavor: SignalFlavor, terminal_mean: f64) -> f64 {
        match flavor {
            SignalFlavor::Unconstrained => self.free * delta,
            SignalFlavor::Constrained => self.pinned * delta + self.terminal * terminal_mean,
        }
    }
}

fn asian_terminal(spec: &BachelierAsianSpec, state: &AsianState, flavor: SignalFlavor, terminal_mean: f64) -> Result<f64> {
    let fix = state
        .fixing
        .ok_or_else(|| Error::State("S at the fixing date is required at maturity".into()))?;
    let end = if fix + state.spot > 2.0 * spec.strike { 0.5 } else { 0.0 };
    Ok(match flavor {
        SignalFlavor::Unconstrained => end,
        SignalFlavor::Constrained => terminal_mean,
    })
}

fn check_horizons(params: &ModelParams, spec: &BachelierAsianSpec) -> Result<()> {
    if (params.horizon - spec.horizon).abs() > 1e-12 * spec.horizon {
        return Err(Error::Input("model and option horizons differ".into()));
    }
    Ok(())
}

/// Closed-form signal of the Asian delta at `(t, S_t, S_{T/2})`.
///
/// `terminal_mean` is `E[Ξ_T | F_t]` and only enters the constrained flavor. At `t = T` the
/// limits are returned: the terminal delta, or `terminal_mean` when constrained.
pub fn signal_asian(
    params: &ModelParams,
    spec: &BachelierAsianSpec,
    t: f64,
    state: &AsianState,
    flavor: SignalFlavor,
    terminal_mean: f64,
) -> Result<f64> {
    check_horizons(params, spec)?;
    params.check_time(t)?;
    if t >= params.horizon {
        return asian_terminal(spec, state, flavor, terminal_mean);
    }
    let delta = spec.delta_right(t, state.spot, state.fixing)?;
    Ok(AsianFactors::new(params, spec, t).signal(delta, flavor, terminal_mean))
}

/// [`signal_asian`] on every node of a grid, with the time factors computed once.
///
/// For ensembles: evaluating many paths on one grid costs one delta per node and path.
#[derive(Debug, Clone, PartialEq)]
pub struct AsianSignalTable {
    spec: BachelierAsianSpec,
    grid: TimeGrid,
    factors: Vec<AsianFactors>,
}

impl AsianSignalTable {
    pub fn new(params: &ModelParams, spec: &BachelierAsianSpec, grid: &TimeGrid) -> Result<Self> {
        check_horizons(params, spec)?;
        grid.check_horizon(params.horizon)?;
        let factors = grid.nodes()[..grid.steps()].iter().map(|&t| AsianFactors::new(params, spec, t)).collect();
        Ok(Self { spec: *spec, grid: grid.clone(), factors })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Signal at node `k`; `delta` is the target held on the cell starting there (ignored at `T`).
    pub fn value(&self, k: usize, state: &AsianState, delta: f64, flavor: SignalFlavor, terminal_mean: f64) -> Result<f64> {
        match self.factors.get(k) {
            Some(f) => Ok(f.signal(delta, flavor, terminal_mean)),
            None if k == self.grid.steps() => asian_terminal(&self.spec, state, flavor, terminal_mean),
            None => Err(Error::Input(format!("node {k} is outside the grid"))),
        }
    }
}

/// A target that can be simulated forward from a known state.
pub trait StochasticTarget: Sync {
    type State: Clone + Send + Sync;

    /// Target position held on the cell that starts at `t`.
    fn target(&self, t: f64, state: &Self::State) -> Result<f64>;

    /// Draws the state at `t1` given the state at `t0`.
    fn advance(&self, t0: f64, t1: f64, state: &Self::State, rng: &mut PathRng) -> Self::State;

    /// Latest `m >= t` with `E[ξ_u | F_t] = target(t)` for all `u` in `[t, m)`.
    fn martingale_horizon(&self, t: f64, _state: &Self::State) -> f64 {
        t
    }
}

impl StochasticTarget for BachelierAsianSpec {
    type State = AsianState;

    fn target(&self, t: f64, state: &AsianState) -> Result<f64> {
        self.delta_right(t, state.spot, state.fixing)
    }

    fn advance(&self, t0: f64, t1: f64, state: &AsianState, rng: &mut PathRng) -> AsianState {
        let half = self.fixing_time();
        let mut spot = state.spot;
        let mut fixing = state.fixing;
        if t0 < half && t1 > half {
            spot += self.sigma * (half - t0).sqrt() * rng.normal();
            fixing = Some(spot);
            spot += self.sigma * (t1 - half).sqrt() * rng.normal();
        } else {
            spot += self.sigma * (t1 - t0).sqrt() * rng.normal();
            if t1 == half {
                fixing = Some(spot);
            }
        }
        AsianState { spot, fixing }
    }

    fn martingale_horizon(&self, t: f64, _state: &AsianState) -> f64 {
        // The delta is a martingale on [0, T/2] and, after the fixing, on (T/2, T).
        if t < self.fixing_time() {
            self.fixing_time()
        } else {
            self.horizon
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOptions {
    pub n_paths: usize,
    pub seed: u64,
    /// Skip simulation over stretches where the target reports itself a martingale.
    pub use_martingale_structure: bool,
}

/// Nested Monte Carlo estimate of the signal at node `t` from `state`.
///
/// Each continuation path contributes `Σ_j ξ(t_j) ∫_{t_j}^{t_{j+1}} kernel(t, u) du` over the
/// remaining cells of `grid`; for the constrained flavor the result is blended with
/// `terminal_mean` as in the closed form.
#[allow(clippy::too_many_arguments)]
pub fn signal_monte_carlo<S: StochasticTarget>(
    params: &ModelParams,
    target: &S,
    t: f64,
    state: &S::State,
    grid: &TimeGrid,
    flavor: SignalFlavor,
    terminal_mean: f64,
    opts: &McOptions,
) -> Result<McEstimate> {
    if opts.n_paths < 2 {
        return Err(Error::Input("Monte Carlo needs at least two paths".into()));
    }
    grid.check_horizon(params.horizon)?;
    let k0 = grid
        .position(t)
        .ok_or_else(|| Error::Alignment(format!("t = {t} is not a grid node")))?;
    let (w_term, w_avg) = terminal_weights(params, t);
    if k0 == grid.steps() {
        let v = match flavor {
            SignalFlavor::Unconstrained => target.target(t, state)?,
            SignalFlavor::Constrained => terminal_mean,
        };
        return Ok(McEstimate { mean: v, std_error: 0.0, n_paths: opts.n_paths });
    }
    if opts.use_martingale_structure && target.martingale_horizon(t, state) >= params.horizon {
        // Every future cell carries the current target in expectation.
        let v = target.target(t, state)?;
        let mean = match flavor {
            SignalFlavor::Unconstrained => v,
            SignalFlavor::Constrained => w_term * terminal_mean + w_avg * v,
        };
        return Ok(McEstimate { mean, std_error: 0.0, n_paths: opts.n_paths });
    }
    let nodes = &grid.nodes()[k0..];
    let mass = |a: f64, b: f64| match flavor {
        SignalFlavor::Unconstrained => k_mass(params, t, a, b),
        SignalFlavor::Constrained => kxi_mass(params, t, a, b),
    };
    let cell_mass: Vec<f64> = nodes.windows(2).map(|w| mass(w[0], w[1])).collect();

    let samples: Vec<f64> = (0..opts.n_paths)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let mut rng = PathRng::new(opts.seed, i as u64);
            let mut st = state.clone();
            let mut j = 0usize;
            let mut acc = 0.0;
            while j + 1 < nodes.len() {
                let now = nodes[j];
                let value = target.target(now, &st)?;
                let mut end = j + 1;
                if opts.use_martingale_structure {
                    let m = target.martingale_horizon(now, &st);
                    while end + 1 < nodes.len() && nodes[end + 1] <= m {
                        end += 1;
                    }
                }
                acc += value * cell_mass[j..end].iter().sum::<f64>();
                if end + 1 < nodes.len() {
                    st = target.advance(now, nodes[end], &st, &mut rng);
                }
                j = end;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;

    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    Ok(match flavor {
        SignalFlavor::Unconstrained => McEstimate { mean, std_error: se, n_paths: opts.n_paths },
        SignalFlavor::Constrained => McEstimate {
            mean: w_term * terminal_mean + w_avg * mean,
            std_error: w_avg * se,
            n_paths: opts.n_paths,
        },
    })
}

/// Ensemble signals by regressing each path's kernel-weighted future target on a polynomial in
/// the current state (degree at most 3).
///
/// `terminal` is the deterministic terminal position used by the constrained flavor.
pub fn signal_regression(
    params: &ModelParams,
    ensemble: &TargetEnsemble,
    flavor: SignalFlavor,
    terminal: f64,
    degree: usize,
) -> Result<Vec<SignalPath>> {
    if degree > 3 {
        return Err(Error::Input("regression degree must be at most 3".into()));
    }
    ensemble.validate()?;
    let grid = &ensemble.grid;
    grid.check_horizon(params.horizon)?;
    let n = grid.len();
    let paths = ensemble.paths.len();
    let state = ensemble.state.as_ref().unwrap_or(&ensemble.paths);

    let columns: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let t = grid.nodes()[k];
            if k + 1 == n {
                return ensemble
                    .paths
                    .iter()
                    .map(|p| match flavor {
                        SignalFlavor::Unconstrained => p[n - 2],
                        SignalFlavor::Constrained => terminal,
                    })
                    .collect();
            }
            let masses: Vec<f64> = grid.nodes()[k..]
                .windows(2)
                .map(|w| match flavor {
                    SignalFlavor::Unconstrained => k_mass(params, t, w[0], w[1]),
                    SignalFlavor::Constrained => kxi_mass(params, t, w[0], w[1]),
                })
                .collect();
            let y: Vec<f64> = ensemble
                .paths
                .iter()
                .map(|p| p[k..n - 1].iter().zip(&masses).map(|(a, m)| a * m).sum())
                .collect();
            let x: Vec<f64> = state.iter().map(|s| s[k]).collect();
            let fitted = weighted_poly_fit(&x, &y, &ensemble.weights, degree);
            let (w_term, w_avg) = terminal_weights(params, t);
            fitted
                .into_iter()
                .map(|f| match flavor {
                    SignalFlavor::Unconstrained => f,
                    SignalFlavor::Constrained => w_term * terminal + w_avg * f,
                })
                .collect()
        })
        .collect();

    (0..paths)
        .map(|i| {
            let values: Vec<f64> = columns.iter().map(|c| c[i]).collect();
            let path = SignalPath::new(grid.clone(), values, flavor, SignalMethod::Regression { degree })?;
            let qv = path.compensated_qv(params, &ensemble.paths[i])?;
            path.with_qv(qv)
        })
        .collect()
}

/// Weighted least squares fit of `y` on `1, z, .., z^degree` with `z` the standardized `x`.
fn weighted_poly_fit(x: &[f64], y: &[f64], w: &[f64], degree: usize) -> Vec<f64> {
    let mean = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
    let var = x.iter().zip(w).map(|(a, b)| b * (a - mean).powi(2)).sum::<f64>();
    let sd = var.sqrt();
    let degree = if sd <= 1e-14 * (1.0 + mean.abs()) { 0 } else { degree };
    let z: Vec<f64> = x.iter().map(|a| if degree == 0 { 0.0 } else { (a - mean) / sd }).collect();
    let m = degree + 1;
    let mut ata = vec![vec![0.0; m + 1]; m];
    for ((zi, yi), wi) in z.iter().zip(y).zip(w) {
        let mut pow = vec![1.0; m];
        for j in 1..m {
            pow[j] = pow[j - 1] * zi;
        }
        for r in 0..m {
            for c in 0..m {
                ata[r][c] += wi * pow[r] * pow[c];
            }
            ata[r][m] += wi * pow[r] * yi;
        }
    }
    let beta = solve_augmented(ata);
    z.iter()
        .map(|zi| beta.iter().rev().fold(0.0, |acc, b| acc * zi + b))
        .collect()
}

/// Gaussian elimination with partial pivoting on an augmented `m x (m+1)` system.
fn solve_augmented(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let m = a.len();
    for col in 0..m {
        let piv = (col..m)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("nonempty");
        a.swap(col, piv);
        let d = a[col][col];
        if d.abs() < 1e-300 {
            continue;
        }
        for r in col + 1..m {
            let f = a[r][col] / d;
            for c in col..=m {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    let mut x = vec![0.0; m];
    for r in (0..m).rev() {
        let s: f64 = (r + 1..m).map(|c| a[r][c] * x[c]).sum();
        x[r] = if a[r][r].abs() < 1e-300 { 0.0 } else { (a[r][m] - s) / a[r][r] };
    }
    x
}

/// Ensemble-averaged cumulative realized quadratic variation `Σ (Δξ̂)²` per node.
pub fn realized_qv<'a, I>(paths: I, weights: Option<&[f64]>) -> Result<Vec<f64>>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut acc: Option<Vec<f64>> = None;
    let mut total_weight = 0.0;
    for (i, p) in paths.into_iter().enumerate() {
        if p.len() < 2 {
            return Err(Error::Domain("quadratic variation needs at least two nodes".into()));
        }
        let w = weights.map_or(1.0, |w| w[i]);
        let a = acc.get_or_insert_with(|| vec![0.0; p.len()]);
        if a.len() != p.len() {
            return Err(Error::Alignment("ensemble paths have different lengths".into()));
        }
        let mut run = 0.0;
        for k in 1..p.len() {
            run += (p[k] - p[k - 1]).powi(2);
            a[k] += w * run;
        }
        total_weight += w;
    }
    let mut a = acc.ok_or_else(|| Error::Input("empty ensemble".into()))?;
    for v in &mut a {
        *v /= total_weight;
    }
    Ok(a)
}
