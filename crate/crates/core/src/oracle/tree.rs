use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bachelier::BachelierAsianSpec;
use crate::error::{Error, Result};
use crate::kernels::tau_unchecked;
use crate::model::ModelParams;
use crate::targets::{signal_asian, AsianState, SignalFlavor};

pub const MAX_TREE_DEPTH: usize = 24;

/// Recombining binomial Bachelier tree: `S = S_0 ± σ√Δ` per level with probability ½ each.
///
/// With a fixing level the state also remembers the up-move count at that level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub s0: f64,
    pub sigma: f64,
    pub horizon: f64,
    pub depth: usize,
    pub fixing_level: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeNode {
    pub level: usize,
    pub ups: usize,
    pub fixing_ups: Option<usize>,
}

impl TreeModel {
    pub fn new(s0: f64, sigma: f64, horizon: f64, depth: usize, fixing_level: Option<usize>) -> Result<Self> {
        if depth < 2 {
            return Err(Error::Input("tree depth must be at least 2".into()));
        }
        if depth > MAX_TREE_DEPTH {
            return Err(Error::Size(format!("tree depth {depth} exceeds {MAX_TREE_DEPTH}")));
        }
        if !(sigma > 0.0) || !(horizon > 0.0) {
            return Err(Error::Input("tree needs positive sigma and horizon".into()));
        }
        if fixing_level.is_some_and(|m| m > depth) {
            return Err(Error::Input("fixing level beyond the tree".into()));
        }
        Ok(Self { s0, sigma, horizon, depth, fixing_level })
    }

    /// Tree for the Asian option, fixing at the middle level (`depth` must be even).
    pub fn for_asian(spec: &BachelierAsianSpec, depth: usize) -> Result<Self> {
        if !depth.is_multiple_of(2) {
            return Err(Error::Input("Asian tree depth must be even".into()));
        }
        Self::new(spec.s0, spec.sigma, spec.horizon, depth, Some(depth / 2))
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.depth as f64
    }

    pub fn time(&self, level: usize) -> f64 {
        if level == self.depth {
            self.horizon
        } else {
            level as f64 * self.dt()
        }
    }

    fn spot_at(&self, level: usize, ups: usize) -> f64 {
        self.s0 + self.sigma * self.dt().sqrt() * (2.0 * ups as f64 - level as f64)
    }

    pub fn spot(&self, node: &TreeNode) -> f64 {
        self.spot_at(node.level, node.ups)
    }

    pub fn fixing_spot(&self, node: &TreeNode) -> Option<f64> {
        let m = self.fixing_level?;
        node.fixing_ups.map(|f| self.spot_at(m, f))
    }

    /// All states of a level, in index order.
    pub fn nodes(&self, level: usize) -> Vec<TreeNode> {
        match self.fixing_level {
            Some(m) if level >= m => (0..=m)
                .flat_map(|f| (f..=f + level - m).map(move |ups| TreeNode { level, ups, fixing_ups: Some(f) }))
                .collect(),
            _ => (0..=level).map(|ups| TreeNode { level, ups, fixing_ups: None }).collect(),
        }
    }

    fn index(&self, node: &TreeNode) -> usize {
        match (self.fixing_level, node.fixing_ups) {
            (Some(m), Some(f)) if node.level >= m => f * (node.level - m + 1) + node.ups - f,
            _ => node.ups,
        }
    }

    fn child(&self, node: &TreeNode, up: bool) -> TreeNode {
        let level = node.level + 1;
        let ups = node.ups + up as usize;
        let fixing_ups = match self.fixing_level {
            Some(m) if level == m => Some(ups),
            _ => node.fixing_ups,
        };
        TreeNode { level, ups, fixing_ups }
    }

    /// Node sequence along a path of up/down moves.
    pub fn walk(&self, moves: &[bool]) -> Vec<TreeNode> {
        let mut node = TreeNode { level: 0, ups: 0, fixing_ups: (self.fixing_level == Some(0)).then_some(0) };
        let mut out = vec![node];
        for &m in moves {
            node = self.child(&node, m);
            out.push(node);
        }
        out
    }
}

/// Value function `V_k(X) = a X² + b X + c` and policy `u = p X + q` per level and state.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeSolution {
    pub tree: TreeModel,
    pub kappa: f64,
    pub initial_position: f64,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    /// `V_0(x)`.
    pub value: f64,
}

impl TreeSolution {
    /// Optimal positions `X_0..X_N` along a path of moves.
    pub fn forward(&self, moves: &[bool]) -> Result<Vec<f64>> {
        if moves.len() != self.tree.depth {
            return Err(Error::Input(format!("path needs {} moves", self.tree.depth)));
        }
        let dt = self.tree.dt();
        let mut x = self.initial_position;
        let mut out = vec![x];
        for node in self.tree.walk(moves).iter().take(self.tree.depth) {
            let i = self.tree.index(node);
            x += dt * (self.p[node.level][i] * x + self.q[node.level][i]);
            out.push(x);
        }
        Ok(out)
    }
}

/// Backward induction for `E[½Δ Σ_{k<N} (X_k - ξ_k)² + ½κΔ Σ u_k²]`.
///
/// `target(tree, node)` is `ξ_k`, held over the step leaving `node`. With `terminal`, the last
/// step is forced to `X_N = Ξ(node at N-1)`, so `Ξ` must be known one step before maturity.
pub fn solve_lq_tree<F, G>(tree: &TreeModel, target: F, kappa: f64, initial_position: f64, terminal: Option<G>) -> Result<TreeSolution>
where
    F: Fn(&TreeModel, &TreeNode) -> f64 + Sync,
    G: Fn(&TreeModel, &TreeNode) -> f64 + Sync,
{
    if tree.depth > MAX_TREE_DEPTH {
        return Err(Error::Size(format!("tree depth {} exceeds {MAX_TREE_DEPTH}", tree.depth)));
    }
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::Input("kappa must be positive".into()));
    }
    let n = tree.depth;
    let dt = tree.dt();
    let mut a = vec![Vec::new(); n + 1];
    let mut b = vec![Vec::new(); n + 1];
    let mut c = vec![Vec::new(); n + 1];
    let mut p = vec![Vec::new(); n + 1];
    let mut q = vec![Vec::new(); n + 1];
    let size = tree.nodes(n).len();
    a[n] = vec![0.0; size];
    b[n] = vec![0.0; size];
    c[n] = vec![0.0; size];
    let start = match &terminal {
        Some(xi_end) => {
            // V_{N-1}(X) = ½Δ(X - ξ)² + ½(κ/Δ)(Ξ - X)².
            let nodes = tree.nodes(n - 1);
            let k = kappa / dt;
            let (mut aa, mut bb, mut cc, mut pp, mut qq) = (vec![], vec![], vec![], vec![], vec![]);
            for node in &nodes {
                let xi = target(tree, node);
                let e = xi_end(tree, node);
                aa.push(0.5 * dt + 0.5 * k);
                bb.push(-dt * xi - k * e);
                cc.push(0.5 * dt * xi * xi + 0.5 * k * e * e);
                pp.push(-1.0 / dt);
                qq.push(e / dt);
            }
            a[n - 1] = aa;
            b[n - 1] = bb;
            c[n - 1] = cc;
            p[n - 1] = pp;
            q[n - 1] = qq;
            n - 1
        }
        None => n,
    };
    for k in (0..start).rev() {
        let nodes = tree.nodes(k);
        let (an, bn, cn) = (&a[k + 1], &b[k + 1], &c[k + 1]);
        let rows: Vec<[f64; 5]> = nodes
            .par_iter()
            .map(|node| {
                let up = tree.index(&tree.child(node, true));
                let dn = tree.index(&tree.child(node, false));
                let ea = 0.5 * (an[up] + an[dn]);
                let eb = 0.5 * (bn[up] + bn[dn]);
                let ec = 0.5 * (cn[up] + cn[dn]);
                let xi = target(tree, node);
                let den = kappa + 2.0 * ea * dt;
                let pk = -2.0 * ea / den;
                let qk = -eb / den;
                // Next position X + Δ(pX + q) = gX + h.
                let g = 1.0 + dt * pk;
                let h = dt * qk;
                let ak = 0.5 * dt + 0.5 * kappa * dt * pk * pk + ea * g * g;
                let bk = -dt * xi + kappa * dt * pk * qk + 2.0 * ea * g * h + eb * g;
                let ck = 0.5 * dt * xi * xi + 0.5 * kappa * dt * qk * qk + ea * h * h + eb * h + ec;
                [ak, bk, ck, pk, qk]
            })
            .collect();
        a[k] = rows.iter().map(|r| r[0]).collect();
        b[k] = rows.iter().map(|r| r[1]).collect();
        c[k] = rows.iter().map(|r| r[2]).collect();
        p[k] = rows.iter().map(|r| r[3]).collect();
        q[k] = rows.iter().map(|r| r[4]).collect();
    }
    let check = a.iter().take(n).flatten().chain(b.iter().flatten()).chain(c.iter().flatten());
    if check.clone().any(|v| !v.is_finite()) || a.iter().take(n).flatten().any(|v| !(*v > 0.0)) {
        return Err(Error::Internal("tree Riccati coefficients lost convexity".into()));
    }
    let x = initial_position;
    let value = a[0][0] * x * x + b[0][0] * x + c[0][0];
    Ok(TreeSolution { tree: *tree, kappa, initial_position, a, b, c, p, q, value })
}

/// Tree-optimal value of the Asian problem against the continuous closed-form cost evaluated
/// exactly on the same tree measure (all `2^N` paths).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsianTreeComparison {
    pub depth: usize,
    pub tree_value: f64,
    pub closed_form_value: f64,
    pub relative_gap: f64,
}

/// Target on the tree: the post-fixing delta from the fixing level on, the pre-fixing delta before.
fn asian_target(spec: &BachelierAsianSpec, tree: &TreeModel, node: &TreeNode) -> f64 {
    let t = tree.time(node.level);
    match tree.fixing_spot(node) {
        Some(f) => spec.delta_after_fixing(t, tree.spot(node), f),
        None => spec.delta_before_fixing(t, tree.spot(node)),
    }
}

pub fn asian_tree_comparison(params: &ModelParams, spec: &BachelierAsianSpec, depth: usize) -> Result<AsianTreeComparison> {
    if depth > 20 {
        return Err(Error::Size("exact path enumeration is limited to depth 20".into()));
    }
    let tree = TreeModel::for_asian(spec, depth)?;
    let sol = solve_lq_tree(
        &tree,
        |t, n| asian_target(spec, t, n),
        params.kappa,
        params.initial_position,
        None::<fn(&TreeModel, &TreeNode) -> f64>,
    )?;
    let dt = tree.dt();
    let sk = params.sqrt_kappa();
    let total: f64 = (0u64..1 << depth)
        .into_par_iter()
        .map(|mask| -> Result<f64> {
            let moves: Vec<bool> = (0..depth).map(|i| mask >> i & 1 == 1).collect();
            let nodes = tree.walk(&moves);
            let signal: Vec<f64> = nodes
                .iter()
                .map(|node| {
                    let st = AsianState { spot: tree.spot(node), fixing: tree.fixing_spot(node) };
                    signal_asian(params, spec, tree.time(node.level), &st, SignalFlavor::Unconstrained, 0.0)
                })
                .collect::<Result<_>>()?;
            let mut cost = 0.5 * sk * tau_unchecked(params, 0.0).tanh() * (params.initial_position - signal[0]).powi(2);
            for k in 0..depth {
                let xi = asian_target(spec, &tree, &nodes[k]);
                cost += 0.5 * dt * (xi - signal[k]).powi(2);
                cost += 0.5 * sk * tau_unchecked(params, tree.time(k)).tanh() * (signal[k + 1] - signal[k]).powi(2);
            }
            Ok(cost)
        })
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum::<f64>()
        / (1u64 << depth) as f64;
    Ok(AsianTreeComparison {
        depth,
        tree_value: sol.value,
        closed_form_value: total,
        relative_gap: (total - sol.value).abs() / sol.value.abs(),
    })
}
