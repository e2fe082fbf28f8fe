use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Discrete tracking problem on a uniform grid of `N` steps.
///
/// `J = ½Δ Σ_{k<N} (X_k - ξ_k)² + ½κΔ Σ_{k<N} u_k²` with `X_{k+1} = X_k + Δ u_k`, `X_0 = x`
/// and optionally `X_N = Ξ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteLQProblem {
    pub dt: f64,
    /// Target per step, `N` values.
    pub xi: Vec<f64>,
    pub kappa: f64,
    pub initial_position: f64,
    pub terminal: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteLQSolution {
    pub rates: Vec<f64>,
    pub positions: Vec<f64>,
    pub value: f64,
    /// `∂J/∂X_N` at the optimum; zero without a terminal constraint.
    pub multiplier: f64,
}

impl DiscreteLQProblem {
    pub fn steps(&self) -> usize {
        self.xi.len()
    }

    fn validate(&self) -> Result<()> {
        if self.xi.len() < 2 {
            return Err(Error::Input("the discrete problem needs N >= 2".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) || !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::Input("dt and kappa must be positive and finite".into()));
        }
        if self.xi.iter().any(|v| !v.is_finite()) || !self.initial_position.is_finite() {
            return Err(Error::Input("discrete targets must be finite".into()));
        }
        Ok(())
    }

    /// Objective of an arbitrary position path `X_0..X_N`.
    pub fn objective(&self, positions: &[f64]) -> Result<f64> {
        if positions.len() != self.xi.len() + 1 {
            return Err(Error::Alignment("positions must have N + 1 entries".into()));
        }
        let dt = self.dt;
        let mut j = 0.0;
        for (k, xi) in self.xi.iter().enumerate() {
            let u = (positions[k + 1] - positions[k]) / dt;
            j += 0.5 * dt * (positions[k] - xi).powi(2) + 0.5 * self.kappa * dt * u * u;
        }
        Ok(j)
    }
}

/// Exact minimizer via an `O(N)` LDLᵀ solve of the tridiagonal normal equations in `X_1..X_N`
/// (`X_1..X_{N-1}` with the terminal position eliminated when constrained).
pub fn solve_lq_deterministic(problem: &DiscreteLQProblem) -> Result<DiscreteLQSolution> {
    problem.validate()?;
    let n = problem.steps();
    let dt = problem.dt;
    let c = problem.kappa / dt;
    let x0 = problem.initial_position;
    // Row j (1 <= j < N): (Δ + 2c) X_j - c X_{j-1} - c X_{j+1} = Δ ξ_j.
    // Row N, free end: c X_N - c X_{N-1} = 0.
    let m = if problem.terminal.is_some() { n - 1 } else { n };
    let mut diag = vec![dt + 2.0 * c; m];
    let mut rhs: Vec<f64> = (1..=m).map(|j| if j < n { dt * problem.xi[j] } else { 0.0 }).collect();
    rhs[0] += c * x0;
    match problem.terminal {
        Some(xi_end) => rhs[m - 1] += c * xi_end,
        None => diag[m - 1] = c,
    }
    let off = -c;
    // Factor and forward-substitute.
    let mut d = vec![0.0; m];
    let mut l = vec![0.0; m];
    d[0] = diag[0];
    for j in 1..m {
        l[j] = off / d[j - 1];
        d[j] = diag[j] - l[j] * off;
        rhs[j] -= l[j] * rhs[j - 1];
    }
    if d.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Internal("normal equations are not positive definite".into()));
    }
    let mut sol = vec![0.0; m];
    sol[m - 1] = rhs[m - 1] / d[m - 1];
    for j in (0..m - 1).rev() {
        sol[j] = (rhs[j] - off * sol[j + 1]) / d[j];
    }
    let mut positions = Vec::with_capacity(n + 1);
    positions.push(x0);
    positions.extend_from_slice(&sol);
    if let Some(xi_end) = problem.terminal {
        positions.push(xi_end);
    }
    let rates: Vec<f64> = positions.windows(2).map(|w| (w[1] - w[0]) / dt).collect();
    let value = problem.objective(&positions)?;
    let multiplier = if problem.terminal.is_some() { problem.kappa * rates[n - 1] } else { 0.0 };
    Ok(DiscreteLQSolution { rates, positions, value, multiplier })
}
