//! Scenario files, the built-in scenarios and the end-to-end run behind the command line.
//!
//! A run writes `<name>_paths.csv`, `<name>_costs.json` and `<name>_oracle.json` (each when
//! requested). Results are identical for any thread count: per-path work is collected in path
//! order before any reduction.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bachelier::{fill_path, BachelierAsianSpec};
use crate::costs::{
    average_costs, cost_closed_form_constrained, cost_closed_form_unconstrained, cost_direct, reachability_check,
    CostBreakdown, CostEstimate, Reachability,
};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::model::ModelParams;
use crate::oracle::{
    asian_tree_comparison, gateaux_check, perturbation_directions, solve_lq_deterministic, AsianTreeComparison,
    DiscreteLQProblem,
};
use crate::rng::PathRng;
use crate::strategies::{
    integrate_constrained, integrate_constrained_with, integrate_myopic, integrate_unconstrained,
    integrate_unconstrained_with, myopic_targets, SignalFreeze, StepFactors, StrategyFlavor, StrategyPath,
};
use crate::targets::{
    cell_moments, deterministic_value, signal_asian, signal_constrained, signal_monte_carlo, signal_regression,
    signal_unconstrained, AsianSignalTable, AsianState, AsianTarget, BrownianConstraint, CellMoments, McOptions, PowerSingularity,
    SegmentShape, SignalFlavor, SignalMethod, SignalOptions, SignalPath, TargetEnsemble, TargetProcess, TargetSegment,
    TerminalConstraint,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Column header of the path CSV.
pub const PATH_COLUMNS: [&str; 10] =
    ["t", "xi", "xi_hat", "xi_hat_const", "X_opt", "X_const", "X_myopic", "u_opt", "u_const", "u_myopic"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSpec {
    /// Uniform grid with this many steps.
    Steps(usize),
    Nodes(Vec<f64>),
}

impl GridSpec {
    pub fn build(&self, horizon: f64) -> Result<TimeGrid> {
        match self {
            GridSpec::Steps(n) => TimeGrid::uniform(horizon, *n),
            GridSpec::Nodes(v) => TimeGrid::from_nodes(v.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSpec {
    pub paths: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    /// Perturbation directions for the first-order check.
    #[serde(default = "default_directions")]
    pub directions: usize,
    #[serde(default = "default_direction_seed")]
    pub direction_seed: u64,
    /// Coarser uniform grids `N / 2^j`, `j = 1..=refinements`, for the convergence table.
    #[serde(default = "default_refinements")]
    pub refinements: usize,
    /// Depth of the binomial tree for stochastic targets.
    #[serde(default = "default_tree_depth")]
    pub tree_depth: usize,
    /// Grid times before the fixing date at which the Monte Carlo signal is compared.
    #[serde(default = "default_signal_checks")]
    pub signal_checks: usize,
}

/// Costs of one path: optimal, constrained, myopic, plus the optional path table.
type PathOutcome = (CostBreakdown, Option<CostBreakdown>, CostBreakdown, Option<PathTable>);

fn default_directions() -> usize {
    20
}
fn default_direction_seed() -> u64 {
    7
}
fn default_refinements() -> usize {
    2
}
fn default_tree_depth() -> usize {
    12
}
fn default_signal_checks() -> usize {
    10
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self {
            directions: default_directions(),
            direction_seed: default_direction_seed(),
            refinements: default_refinements(),
            tree_depth: default_tree_depth(),
            signal_checks: default_signal_checks(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Paths,
    Costs,
    Oracle,
}

fn all_outputs() -> Vec<OutputKind> {
    vec![OutputKind::Paths, OutputKind::Costs, OutputKind::Oracle]
}

fn default_degree() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub kappa: f64,
    pub horizon: f64,
    pub initial_position: f64,
    pub target: TargetProcess,
    #[serde(default, skip_serializing_if = "TerminalConstraint::is_none")]
    pub constraint: TerminalConstraint,
    pub grid: GridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<MonteCarloSpec>,
    /// Rate multiplier `c` of the myopic benchmark `dX = (c/√κ)(ξ - X)dt`; 1 for deterministic
    /// targets and σ for the Asian target when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub myopic_scale: Option<f64>,
    /// Polynomial degree of the regression signal for ensemble targets.
    #[serde(default = "default_degree")]
    pub regression_degree: usize,
    #[serde(default)]
    pub oracle: OracleSpec,
    #[serde(default = "all_outputs")]
    pub outputs: Vec<OutputKind>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            Error::Schema { field, message: e.into_inner().to_string() }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.kappa, self.horizon, self.initial_position)
    }

    pub fn build_grid(&self) -> Result<TimeGrid> {
        let g = self.grid.build(self.horizon)?;
        g.check_horizon(self.horizon)?;
        Ok(g)
    }

    fn wants(&self, k: OutputKind) -> bool {
        self.outputs.contains(&k)
    }
}

/// `scale * sign(t - T/2) * |t - T/2|^(-exponent)` on `[0, T]`, split at the singular point.
pub fn singular_segments(scale: f64, exponent: f64, horizon: f64) -> Vec<TargetSegment> {
    let shape = SegmentShape::PowerSingularity(PowerSingularity {
        center: 0.5 * horizon,
        exponent,
        left_sign: -1.0,
        right_sign: 1.0,
        scale,
    });
    vec![
        TargetSegment { from: 0.0, to: 0.5 * horizon, shape: shape.clone() },
        TargetSegment { from: 0.5 * horizon, to: horizon, shape },
    ]
}

pub const BUILTIN_NAMES: [&str; 3] = ["fig1_jump", "fig2_singularity", "fig3_asian"];

/// Built-in scenario by name.
pub fn builtin(name: &str) -> Option<Scenario> {
    let base = |name: &str, description: &str, kappa: f64, x: f64, target: TargetProcess, steps: usize| Scenario {
        schema_version: SCHEMA_VERSION,
        name: name.into(),
        description: Some(description.into()),
        kappa,
        horizon: 1.0,
        initial_position: x,
        target,
        constraint: TerminalConstraint::Deterministic(0.0),
        grid: GridSpec::Steps(steps),
        monte_carlo: None,
        myopic_scale: None,
        regression_degree: default_degree(),
        oracle: OracleSpec::default(),
        outputs: all_outputs(),
    };
    match name {
        "fig1_jump" => Some(base(
            name,
            "target steps from 1 to 2 at T/2; terminal position 0",
            1.0,
            0.0,
            TargetProcess::Segments(vec![TargetSegment::constant(0.0, 0.5, 1.0), TargetSegment::constant(0.5, 1.0, 2.0)]),
            4000,
        )),
        "fig2_singularity" => Some(base(
            name,
            "target sign(t - T/2)|t - T/2|^(-1/4); kappa = 0.1 is a repository choice",
            0.1,
            0.0,
            TargetProcess::Segments(singular_segments(1.0, 0.25, 1.0)),
            4000,
        )),
        "fig3_asian" => Some(Scenario {
            monte_carlo: Some(MonteCarloSpec { paths: 100_000, seed: 42 }),
            ..base(
                name,
                "Bachelier discrete Asian call delta, S0 = K = 100, sigma = 2, kappa = 0.04 (repository choices)",
                0.04,
                0.5,
                TargetProcess::Asian(AsianTarget { s0: 100.0, sigma: 2.0, strike: 100.0 }),
                1000,
            )
        }),
        _ => None,
    }
}

pub fn builtins() -> Vec<Scenario> {
    BUILTIN_NAMES.iter().filter_map(|n| builtin(n)).collect()
}

/// A problem found by [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub field: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub scenario: String,
    pub issues: Vec<Issue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reachability: Option<Reachability>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Schema, parameter, alignment and reachability checks without running anything.
pub fn validate(s: &Scenario) -> ValidationReport {
    let mut issues = Vec::new();
    let mut issue = |field: &str, message: String| issues.push(Issue { field: field.into(), message });
    if s.schema_version != SCHEMA_VERSION {
        issue("schema_version", format!("unsupported version {}, expected {SCHEMA_VERSION}", s.schema_version));
    }
    if s.name.is_empty() || s.name.contains(['/', '\\']) {
        issue("name", "name must be nonempty and usable as a file prefix".into());
    }
    if !(s.kappa > 0.0 && s.kappa.is_finite()) {
        issue("kappa", format!("kappa must be positive and finite, got {}", s.kappa));
    }
    if !(s.horizon > 0.0 && s.horizon.is_finite()) {
        issue("horizon", format!("horizon must be positive and finite, got {}", s.horizon));
    }
    if !s.initial_position.is_finite() {
        issue("initial_position", "initial position must be finite".into());
    }
    let params = s.params().ok();
    if let Err(e) = s.target.validate(s.horizon) {
        issue("target", e.to_string());
    }
    match s.build_grid() {
        Err(e) => issue("grid", e.to_string()),
        Ok(grid) => {
            if let Err(e) = s.target.check_alignment(&grid, s.horizon) {
                issue("grid", e.to_string());
            }
            if let TerminalConstraint::Brownian(b) = &s.constraint {
                if b.reveal_until < s.horizon && !grid.contains(b.reveal_until) {
                    issue("grid", format!("grid has no node at the reveal time {}", b.reveal_until));
                }
            }
        }
    }
    match (&s.target, &s.constraint) {
        (TargetProcess::Asian(_), _) => {}
        (_, TerminalConstraint::Brownian(_)) => {
            issue("constraint", "a random terminal position is only supported with the asian target".into())
        }
        _ => {}
    }
    if matches!(s.target, TargetProcess::Asian(_)) {
        match s.monte_carlo {
            None => issue("monte_carlo", "the asian target needs a monte_carlo block with paths and seed".into()),
            Some(mc) if mc.paths < 2 => issue("monte_carlo.paths", "need at least two paths".into()),
            _ => {}
        }
    }
    if s.regression_degree > 3 {
        issue("regression_degree", "degree must be at most 3".into());
    }
    if let Some(c) = s.myopic_scale {
        if !(c > 0.0 && c.is_finite()) {
            issue("myopic_scale", "myopic scale must be positive".into());
        }
    }
    if s.oracle.directions == 0 {
        issue("oracle.directions", "need at least one direction".into());
    }
    let mut reachability = None;
    if let (Some(p), false) = (params, s.constraint.is_none()) {
        match reachability_check(&p, &s.constraint) {
            Ok(r) => {
                if !r.reachable {
                    issue(
                        "constraint",
                        format!(
                            "terminal constraint is unreachable: {}",
                            r.diagnostic.as_deref().unwrap_or("integral of dE[Xi_t^2]/(T-t) diverges")
                        ),
                    );
                }
                reachability = Some(r);
            }
            Err(e) => issue("constraint", e.to_string()),
        }
    }
    ValidationReport { scenario: s.name.clone(), issues, reachability }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunOptions {
    pub threads: Option<usize>,
    pub seed_override: Option<u64>,
}

/// Node columns of the path CSV; absent columns are written empty.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PathTable {
    pub t: Vec<f64>,
    pub xi: Vec<f64>,
    pub xi_hat: Vec<f64>,
    pub xi_hat_const: Option<Vec<f64>>,
    pub x_opt: Vec<f64>,
    pub x_const: Option<Vec<f64>>,
    pub x_myopic: Vec<f64>,
    pub u_opt: Vec<f64>,
    pub u_const: Option<Vec<f64>>,
    pub u_myopic: Vec<f64>,
}

fn cell(v: Option<&f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:?}"),
        _ => String::new(),
    }
}

impl PathTable {
    fn new(xi: Vec<f64>, signal: &SignalPath, opt: &StrategyPath, cons: Option<(&SignalPath, &StrategyPath)>, my: &StrategyPath) -> Self {
        Self {
            t: signal.grid.nodes().to_vec(),
            xi,
            xi_hat: signal.values.clone(),
            xi_hat_const: cons.map(|c| c.0.values.clone()),
            x_opt: opt.position.clone(),
            x_const: cons.map(|c| c.1.position.clone()),
            x_myopic: my.position.clone(),
            u_opt: opt.rate.clone(),
            u_const: cons.map(|c| c.1.rate.clone()),
            u_myopic: my.rate.clone(),
        }
    }

    /// CSV with a header row; floats in shortest round-trip form, non-finite and absent values empty.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", PATH_COLUMNS.join(","))?;
        for k in 0..self.t.len() {
            let row = [
                cell(self.t.get(k)),
                cell(self.xi.get(k)),
                cell(self.xi_hat.get(k)),
                cell(self.xi_hat_const.as_ref().and_then(|v| v.get(k))),
                cell(self.x_opt.get(k)),
                cell(self.x_const.as_ref().and_then(|v| v.get(k))),
                cell(self.x_myopic.get(k)),
                cell(self.u_opt.get(k)),
                cell(self.u_const.as_ref().and_then(|v| v.get(k))),
                cell(self.u_myopic.get(k)),
            ];
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub scenario: String,
    pub steps: usize,
    pub n_paths: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub optimal: CostEstimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constrained: Option<CostEstimate>,
    pub myopic: CostEstimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reachability: Option<Reachability>,
}

/// Discrete optimum against the continuous strategies on one uniform grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscreteComparison {
    pub steps: usize,
    pub discrete_value: f64,
    pub closed_form_value: f64,
    /// `max_k |X̂(t_k) - X*_k|`.
    pub sup_gap: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub discrete_value_constrained: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed_form_value_constrained: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sup_gap_constrained: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub multiplier: Option<f64>,
    /// `|X̂^Ξ_T - Ξ_T|` of the continuous constrained strategy.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub terminal_gap: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateauxSummary {
    pub directions: usize,
    pub seed: u64,
    /// `1e-3 J(û)`.
    pub bound: f64,
    pub optimal: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constrained: Option<f64>,
    pub myopic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterministicOracleReport {
    pub scenario: String,
    /// Finest grid last.
    pub refinement: Vec<DiscreteComparison>,
    pub gateaux: GateauxSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalCheck {
    pub t: f64,
    pub closed_form: f64,
    pub monte_carlo: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsianOracleReport {
    pub scenario: String,
    pub tree: AsianTreeComparison,
    /// Monte Carlo signal against the closed form along path 0 before the fixing date.
    pub signal_checks: Vec<SignalCheck>,
    /// Whether the Monte Carlo signal equals the delta at every node in `[T/2, T)` of path 0.
    pub after_fixing_exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleReport {
    Deterministic(DeterministicOracleReport),
    Asian(AsianOracleReport),
    Skipped { scenario: String, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub paths: PathTable,
    pub costs: CostReport,
    pub oracle: Option<OracleReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub outcome: RunOutcome,
    pub files: Vec<PathBuf>,
}

/// Validates, computes and writes the requested artifacts to `out_dir`.
pub fn run_scenario(s: &Scenario, out_dir: &Path, opts: &RunOptions) -> Result<RunSummary> {
    let outcome = compute_scenario(s, opts)?;
    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    if s.wants(OutputKind::Paths) {
        let p = out_dir.join(format!("{}_paths.csv", s.name));
        let mut buf = Vec::new();
        outcome.paths.write_csv(&mut buf)?;
        fs::write(&p, buf)?;
        files.push(p);
    }
    if s.wants(OutputKind::Costs) {
        let p = out_dir.join(format!("{}_costs.json", s.name));
        fs::write(&p, serde_json::to_string_pretty(&outcome.costs)? + "\n")?;
        files.push(p);
    }
    if let (true, Some(o)) = (s.wants(OutputKind::Oracle), &outcome.oracle) {
        let p = out_dir.join(format!("{}_oracle.json", s.name));
        fs::write(&p, serde_json::to_string_pretty(o)? + "\n")?;
        files.push(p);
    }
    Ok(RunSummary { outcome, files })
}

/// Everything [`run_scenario`] writes, without touching the file system.
pub fn compute_scenario(s: &Scenario, opts: &RunOptions) -> Result<RunOutcome> {
    let mut s = s.clone();
    if let (Some(seed), Some(mc)) = (opts.seed_override, s.monte_carlo.as_mut()) {
        mc.seed = seed;
    }
    if let Some(seed) = opts.seed_override {
        s.oracle.direction_seed = seed;
    }
    let report = validate(&s);
    if let Some(r) = report.reachability.clone().filter(|r| !r.reachable) {
        r.into_result()?;
    }
    if let Some(i) = report.issues.first() {
        return Err(Error::Schema { field: i.field.clone(), message: i.message.clone() });
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = opts.threads {
        pool = pool.num_threads(n.max(1));
    }
    let pool = pool.build().map_err(|e| Error::Internal(e.to_string()))?;
    pool.install(|| {
        let params = s.params()?;
        let grid = s.build_grid()?;
        let mut out = match &s.target {
            TargetProcess::Segments(segs) => run_deterministic(&s, &params, segs, &grid),
            TargetProcess::Asian(a) => run_asian(&s, &params, &a.spec(s.horizon)?, &grid),
            TargetProcess::Ensemble(e) => run_ensemble(&s, &params, e),
        }?;
        out.costs.reachability = report.reachability;
        if !s.wants(OutputKind::Oracle) {
            out.oracle = None;
        }
        Ok(out)
    })
}

fn breakdown(params: &ModelParams, strategy: &StrategyPath, signal: Option<&SignalPath>, moments: &[CellMoments]) -> Result<CostBreakdown> {
    let mut c = cost_direct(params, strategy, moments)?;
    if let Some(sig) = signal {
        c.closed_form = Some(match strategy.flavor {
            StrategyFlavor::Constrained => cost_closed_form_constrained(params, sig, moments)?,
            _ => cost_closed_form_unconstrained(params, sig, moments)?,
        });
    }
    Ok(c)
}

fn deterministic_terminal(c: &TerminalConstraint) -> Result<Option<f64>> {
    match c {
        TerminalConstraint::None => Ok(None),
        TerminalConstraint::Deterministic(v) => Ok(Some(*v)),
        TerminalConstraint::Brownian(_) => Err(Error::Misuse("random terminal position needs a stochastic target".into())),
    }
}

struct DeterministicRun {
    signal: SignalPath,
    optimal: StrategyPath,
    constrained: Option<(SignalPath, StrategyPath)>,
    moments: Vec<CellMoments>,
}

fn deterministic_strategies(params: &ModelParams, target: &TargetProcess, constraint: &TerminalConstraint, grid: &TimeGrid) -> Result<DeterministicRun> {
    let opts = SignalOptions::default();
    let segs = target.segments().ok_or_else(|| Error::Misuse("deterministic target expected".into()))?;
    let moments = cell_moments(segs, grid, &opts.quadrature)?;
    let signal = signal_unconstrained(params, target, grid, &opts)?;
    let optimal = integrate_unconstrained(params, &signal, SignalFreeze::LeftNode)?;
    let constrained = match deterministic_terminal(constraint)? {
        Some(v) => {
            let cs = signal_constrained(params, target, constraint, grid, &opts)?;
            let st = integrate_constrained(params, &cs, v, SignalFreeze::LeftNode)?;
            Some((cs, st))
        }
        None => None,
    };
    Ok(DeterministicRun { signal, optimal, constrained, moments })
}

/// Solves the discrete problem on a uniform `steps` grid and compares it with the continuous
/// strategies on the same nodes.
pub fn discrete_comparison(params: &ModelParams, target: &TargetProcess, constraint: &TerminalConstraint, steps: usize) -> Result<DiscreteComparison> {
    let grid = TimeGrid::uniform(params.horizon, steps)?;
    let run = deterministic_strategies(params, target, constraint, &grid)?;
    let dt = params.horizon / steps as f64;
    let xi: Vec<f64> = run.moments.iter().map(|m| m.mean).collect();
    let sup = |a: &[f64], b: &[f64]| a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let free = solve_lq_deterministic(&DiscreteLQProblem {
        dt,
        xi: xi.clone(),
        kappa: params.kappa,
        initial_position: params.initial_position,
        terminal: None,
    })?;
    let closed = cost_closed_form_unconstrained(params, &run.signal, &run.moments)?;
    let mut out = DiscreteComparison {
        steps,
        discrete_value: free.value,
        closed_form_value: closed.total,
        sup_gap: sup(&free.positions, &run.optimal.position),
        discrete_value_constrained: None,
        closed_form_value_constrained: None,
        sup_gap_constrained: None,
        multiplier: None,
        terminal_gap: None,
    };
    if let (Some(v), Some((cs, st))) = (deterministic_terminal(constraint)?, &run.constrained) {
        let fixed = solve_lq_deterministic(&DiscreteLQProblem {
            dt,
            xi,
            kappa: params.kappa,
            initial_position: params.initial_position,
            terminal: Some(v),
        })?;
        out.discrete_value_constrained = Some(fixed.value);
        out.closed_form_value_constrained = Some(cost_closed_form_constrained(params, cs, &run.moments)?.total);
        out.sup_gap_constrained = Some(sup(&fixed.positions, &st.position));
        out.multiplier = Some(fixed.multiplier);
        out.terminal_gap = st.terminal_gap;
    }
    Ok(out)
}

fn run_deterministic(s: &Scenario, params: &ModelParams, segs: &[TargetSegment], grid: &TimeGrid) -> Result<RunOutcome> {
    let run = deterministic_strategies(params, &s.target, &s.constraint, grid)?;
    let my_target = myopic_targets(segs, grid);
    let myopic = integrate_myopic(params, grid, &my_target, s.myopic_scale)?;
    let m = &run.moments;
    let one = |c: CostBreakdown| average_costs(&[c], None);
    let optimal = one(breakdown(params, &run.optimal, Some(&run.signal), m)?)?;
    let constrained = match &run.constrained {
        Some((cs, st)) => Some(one(breakdown(params, st, Some(cs), m)?)?),
        None => None,
    };
    let myopic_cost = one(breakdown(params, &myopic, None, m)?)?;
    let xi: Vec<f64> = grid.nodes().iter().map(|&t| deterministic_value(segs, t)).collect();
    let paths = PathTable::new(
        xi,
        &run.signal,
        &run.optimal,
        run.constrained.as_ref().map(|(a, b)| (a, b)),
        &myopic,
    );

    let oracle = if s.wants(OutputKind::Oracle) {
        Some(deterministic_oracle(s, params, grid, &run, &myopic, optimal.mean.total)?)
    } else {
        None
    };
    Ok(RunOutcome {
        paths,
        costs: CostReport {
            scenario: s.name.clone(),
            steps: grid.steps(),
            n_paths: 1,
            seed: None,
            optimal,
            constrained,
            myopic: myopic_cost,
            reachability: None,
        },
        oracle,
    })
}

fn deterministic_oracle(
    s: &Scenario,
    params: &ModelParams,
    grid: &TimeGrid,
    run: &DeterministicRun,
    myopic: &StrategyPath,
    optimal_cost: f64,
) -> Result<OracleReport> {
    let o = &s.oracle;
    let free_dirs = perturbation_directions(grid, o.directions, o.direction_seed, false);
    let optimal = gateaux_check(params, &run.optimal, &run.moments, &free_dirs, false)?.max_abs_pairing;
    let myopic_pairing = gateaux_check(params, myopic, &run.moments, &free_dirs, false)?.max_abs_pairing;
    let constrained = match &run.constrained {
        Some((_, st)) => {
            let dirs = perturbation_directions(grid, o.directions, o.direction_seed, true);
            Some(gateaux_check(params, st, &run.moments, &dirs, true)?.max_abs_pairing)
        }
        None => None,
    };
    let gateaux = GateauxSummary {
        directions: o.directions,
        seed: o.direction_seed,
        bound: 1e-3 * optimal_cost,
        optimal,
        constrained,
        myopic: myopic_pairing,
    };
    let n = grid.steps();
    if !grid.is_uniform(1e-9) {
        return Ok(OracleReport::Deterministic(DeterministicOracleReport {
            scenario: s.name.clone(),
            refinement: Vec::new(),
            gateaux,
            note: Some("the discrete oracle needs a uniform grid".into()),
        }));
    }
    let mut steps: Vec<usize> = (1..=o.refinements.min(16))
        .rev()
        .filter(|j| n.is_multiple_of(1 << j) && n >> j >= 2)
        .map(|j| n >> j)
        .filter(|m| TimeGrid::uniform(s.horizon, *m).is_ok_and(|g| s.target.check_alignment(&g, s.horizon).is_ok()))
        .collect();
    steps.push(n);
    let refinement = steps
        .into_iter()
        .map(|m| discrete_comparison(params, &s.target, &s.constraint, m))
        .collect::<Result<Vec<_>>>()?;
    Ok(OracleReport::Deterministic(DeterministicOracleReport { scenario: s.name.clone(), refinement, gateaux, note: None }))
}

struct AsianPath {
    optimal: CostBreakdown,
    constrained: Option<CostBreakdown>,
    myopic: CostBreakdown,
    table: Option<PathTable>,
    states: Option<Vec<AsianState>>,
}

fn terminal_mean(constraint: &TerminalConstraint, spec: &BachelierAsianSpec, row: &[f64], reveal_index: Option<usize>, k: usize) -> Option<f64> {
    match constraint {
        TerminalConstraint::None => None,
        TerminalConstraint::Deterministic(v) => Some(*v),
        TerminalConstraint::Brownian(b) => {
            let j = reveal_index.map_or(k, |r| k.min(r));
            Some(b.value((row[j] - spec.s0) / spec.sigma))
        }
    }
}

/// Time-only quantities shared by every path of an Asian run.
struct AsianShared {
    signals: AsianSignalTable,
    free: StepFactors,
    pinned: StepFactors,
    fixing_index: usize,
    reveal_index: Option<usize>,
}

impl AsianShared {
    fn new(s: &Scenario, params: &ModelParams, spec: &BachelierAsianSpec, grid: &TimeGrid) -> Result<Self> {
        Ok(Self {
            signals: AsianSignalTable::new(params, spec, grid)?,
            free: StepFactors::new(params, grid, SignalFlavor::Unconstrained)?,
            pinned: StepFactors::new(params, grid, SignalFlavor::Constrained)?,
            fixing_index: grid.position(spec.fixing_time()).ok_or_else(|| Error::Alignment("grid has no node at T/2".into()))?,
            reveal_index: match &s.constraint {
                TerminalConstraint::Brownian(BrownianConstraint { reveal_until, .. }) => grid.position(*reveal_until),
                _ => None,
            },
        })
    }
}

fn asian_path(s: &Scenario, params: &ModelParams, spec: &BachelierAsianSpec, shared: &AsianShared, seed: u64, i: usize) -> Result<AsianPath> {
    let grid = shared.signals.grid();
    let n = grid.len();
    let nodes = grid.nodes();
    let mut row = vec![0.0; n];
    let mut rng = PathRng::new(seed, i as u64);
    fill_path(spec.s0, spec.sigma, grid, &mut rng, &mut row);
    let kh = shared.fixing_index;
    let reveal = shared.reveal_index;
    let states: Vec<AsianState> = (0..n)
        .map(|k| AsianState { spot: row[k], fixing: (k >= kh).then_some(row[kh]) })
        .collect();
    let mut xi = Vec::with_capacity(n);
    for k in 0..n - 1 {
        xi.push(spec.delta_right(nodes[k], states[k].spot, states[k].fixing)?);
    }
    xi.push(if row[kh] + row[n - 1] > 2.0 * spec.strike { 0.5 } else { 0.0 });
    let moments: Vec<CellMoments> = xi[..n - 1].iter().map(|v| CellMoments::held(*v)).collect();
    let signal_of = |flavor: SignalFlavor| -> Result<SignalPath> {
        let values = (0..n)
            .map(|k| {
                let tm = terminal_mean(&s.constraint, spec, &row, reveal, k).unwrap_or(0.0);
                shared.signals.value(k, &states[k], xi[k], flavor, tm)
            })
            .collect::<Result<Vec<f64>>>()?;
        let p = SignalPath::new(grid.clone(), values, flavor, SignalMethod::ClosedForm)?;
        let qv = p.compensated_qv(params, &xi)?;
        p.with_qv(qv)
    };
    let signal = signal_of(SignalFlavor::Unconstrained)?;
    let optimal = integrate_unconstrained_with(params, &signal, SignalFreeze::LeftNode, &shared.free)?;
    let constrained = match terminal_mean(&s.constraint, spec, &row, reveal, n - 1) {
        Some(end) => {
            let cs = signal_of(SignalFlavor::Constrained)?;
            let st = integrate_constrained_with(params, &cs, end, SignalFreeze::LeftNode, &shared.pinned)?;
            Some((cs, st))
        }
        None => None,
    };
    let myopic = integrate_myopic(params, grid, &xi, Some(s.myopic_scale.unwrap_or(spec.sigma)))?;
    let costs = (
        breakdown(params, &optimal, Some(&signal), &moments)?,
        match &constrained {
            Some((cs, st)) => Some(breakdown(params, st, Some(cs), &moments)?),
            None => None,
        },
        breakdown(params, &myopic, None, &moments)?,
    );
    let first = i == 0;
    Ok(AsianPath {
        optimal: costs.0,
        constrained: costs.1,
        myopic: costs.2,
        table: first.then(|| PathTable::new(xi.clone(), &signal, &optimal, constrained.as_ref().map(|(a, b)| (a, b)), &myopic)),
        states: first.then_some(states),
    })
}

fn run_asian(s: &Scenario, params: &ModelParams, spec: &BachelierAsianSpec, grid: &TimeGrid) -> Result<RunOutcome> {
    let mc = s.monte_carlo.ok_or_else(|| Error::Requirement("monte_carlo block".into()))?;
    let shared = AsianShared::new(s, params, spec, grid)?;
    let mut results = (0..mc.paths)
        .into_par_iter()
        .map(|i| asian_path(s, params, spec, &shared, mc.seed, i))
        .collect::<Result<Vec<_>>>()?;
    let optimal: Vec<CostBreakdown> = results.iter().map(|r| r.optimal).collect();
    let myopic: Vec<CostBreakdown> = results.iter().map(|r| r.myopic).collect();
    let constrained: Option<Vec<CostBreakdown>> = results.iter().map(|r| r.constrained).collect();
    let first = results.swap_remove(0);
    let table = first.table.expect("path 0 keeps its table");
    let states = first.states.expect("path 0 keeps its states");
    let oracle = if s.wants(OutputKind::Oracle) {
        Some(asian_oracle(s, params, spec, grid, &states, mc)?)
    } else {
        None
    };
    Ok(RunOutcome {
        paths: table,
        costs: CostReport {
            scenario: s.name.clone(),
            steps: grid.steps(),
            n_paths: mc.paths,
            seed: Some(mc.seed),
            optimal: average_costs(&optimal, None)?,
            constrained: constrained.map(|c| average_costs(&c, None)).transpose()?,
            myopic: average_costs(&myopic, None)?,
            reachability: None,
        },
        oracle,
    })
}

fn asian_oracle(
    s: &Scenario,
    params: &ModelParams,
    spec: &BachelierAsianSpec,
    grid: &TimeGrid,
    states: &[AsianState],
    mc: MonteCarloSpec,
) -> Result<OracleReport> {
    let tree = asian_tree_comparison(params, spec, s.oracle.tree_depth)?;
    let nodes = grid.nodes();
    let kh = grid.position(spec.fixing_time()).expect("validated");
    let count = s.oracle.signal_checks.min(kh);
    let mc_at = |k: usize, j: u64| {
        signal_monte_carlo(
            params,
            spec,
            nodes[k],
            &states[k],
            grid,
            SignalFlavor::Unconstrained,
            0.0,
            &McOptions { n_paths: mc.paths, seed: mc.seed.wrapping_add(1 + j), use_martingale_structure: true },
        )
    };
    let signal_checks = (0..count)
        .map(|j| {
            let k = j * kh / count;
            let est = mc_at(k, j as u64)?;
            Ok(SignalCheck {
                t: nodes[k],
                closed_form: signal_asian(params, spec, nodes[k], &states[k], SignalFlavor::Unconstrained, 0.0)?,
                monte_carlo: est.mean,
                std_error: est.std_error,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut after_fixing_exact = true;
    for k in kh..grid.steps() {
        let want = spec.delta_right(nodes[k], states[k].spot, states[k].fixing)?;
        after_fixing_exact &= mc_at(k, 0)?.mean == want;
    }
    Ok(OracleReport::Asian(AsianOracleReport { scenario: s.name.clone(), tree, signal_checks, after_fixing_exact }))
}

fn run_ensemble(s: &Scenario, params: &ModelParams, e: &TargetEnsemble) -> Result<RunOutcome> {
    let grid = &e.grid;
    let n = grid.len();
    let terminal = deterministic_terminal(&s.constraint)?;
    let free = signal_regression(params, e, SignalFlavor::Unconstrained, 0.0, s.regression_degree)?;
    let fixed = match terminal {
        Some(v) => Some(signal_regression(params, e, SignalFlavor::Constrained, v, s.regression_degree)?),
        None => None,
    };
    let per_path = (0..e.paths.len())
        .into_par_iter()
        .map(|i| -> Result<PathOutcome> {
            let xi = &e.paths[i];
            let moments: Vec<CellMoments> = xi[..n - 1].iter().map(|v| CellMoments::held(*v)).collect();
            let opt = integrate_unconstrained(params, &free[i], SignalFreeze::LeftNode)?;
            let cons = match (&fixed, terminal) {
                (Some(f), Some(v)) => Some((&f[i], integrate_constrained(params, &f[i], v, SignalFreeze::LeftNode)?)),
                _ => None,
            };
            let my = integrate_myopic(params, grid, xi, s.myopic_scale)?;
            let table = (i == 0).then(|| PathTable::new(xi.clone(), &free[i], &opt, cons.as_ref().map(|(a, b)| (*a, b)), &my));
            Ok((
                breakdown(params, &opt, Some(&free[i]), &moments)?,
                match &cons {
                    Some((cs, st)) => Some(breakdown(params, st, Some(cs), &moments)?),
                    None => None,
                },
                breakdown(params, &my, None, &moments)?,
                table,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let w = Some(e.weights.as_slice());
    let optimal: Vec<_> = per_path.iter().map(|r| r.0).collect();
    let constrained: Option<Vec<_>> = per_path.iter().map(|r| r.1).collect();
    let myopic: Vec<_> = per_path.iter().map(|r| r.2).collect();
    let table = per_path.into_iter().next().and_then(|r| r.3).expect("nonempty ensemble");
    Ok(RunOutcome {
        paths: table,
        costs: CostReport {
            scenario: s.name.clone(),
            steps: grid.steps(),
            n_paths: e.paths.len(),
            seed: None,
            optimal: average_costs(&optimal, w)?,
            constrained: constrained.map(|c| average_costs(&c, w)).transpose()?,
            myopic: average_costs(&myopic, w)?,
            reachability: None,
        },
        oracle: Some(OracleReport::Skipped {
            scenario: s.name.clone(),
            reason: "no oracle for ensemble targets".into(),
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_validate() {
        for s in builtins() {
            let r = validate(&s);
            assert!(r.is_valid(), "{}: {:?}", s.name, r.issues);
        }
    }

    #[test]
    fn json_round_trip() {
        for s in builtins() {
            let back = Scenario::from_json(&s.to_json().unwrap()).unwrap();
            assert_eq!(back, s);
        }
    }

    #[test]
    fn schema_errors_name_the_field() {
        let mut v: serde_json::Value = serde_json::from_str(&builtin("fig1_jump").unwrap().to_json().unwrap()).unwrap();
        v["grid"] = serde_json::json!({"step": 10});
        match Scenario::from_json(&v.to_string()) {
            Err(Error::Schema { field, .. }) => assert_eq!(field, "grid"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_jump_node_is_an_alignment_issue() {
        let mut s = builtin("fig1_jump").unwrap();
        s.grid = GridSpec::Nodes(vec![0.0, 0.3, 0.7, 1.0]);
        let r = validate(&s);
        assert_eq!(r.issues.len(), 1);
        assert_eq!(r.issues[0].field, "grid");
        assert!(r.issues[0].message.contains("0.5"));
    }

    #[test]
    fn nonpositive_kappa_is_a_parameter_issue() {
        let mut s = builtin("fig1_jump").unwrap();
        s.kappa = 0.0;
        assert!(validate(&s).issues.iter().any(|i| i.field == "kappa"));
    }

    #[test]
    fn small_fig1_run() {
        let mut s = builtin("fig1_jump").unwrap();
        s.grid = GridSpec::Steps(200);
        let out = compute_scenario(&s, &RunOptions::default()).unwrap();
        assert_eq!(*out.paths.x_const.as_ref().unwrap().last().unwrap(), 0.0);
        assert_eq!(*out.paths.u_opt.last().unwrap(), 0.0);
        assert!(out.costs.myopic.mean.total > out.costs.optimal.mean.total);
    }
}
