use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing time nodes from 0 to the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TimeGrid {
    nodes: Vec<f64>,
}

impl TimeGrid {
    pub fn uniform(horizon: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Domain("grid needs at least one step".into()));
        }
        let mut nodes: Vec<f64> = (0..=steps)
            .map(|k| horizon * k as f64 / steps as f64)
            .collect();
        nodes[steps] = horizon;
        Self::from_nodes(nodes)
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::Domain("grid needs at least two nodes".into()));
        }
        if nodes[0] != 0.0 {
            return Err(Error::Domain(format!("first node must be 0, got {}", nodes[0])));
        }
        for w in nodes.windows(2) {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::Domain(format!(
                    "grid nodes must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        *self.nodes.last().expect("grid is never empty")
    }

    pub fn step(&self, k: usize) -> f64 {
        self.nodes[k + 1] - self.nodes[k]
    }

    /// Cells `[t_k, t_{k+1})` as pairs.
    pub fn cells(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn is_uniform(&self, rel_tol: f64) -> bool {
        let h = self.horizon() / self.steps() as f64;
        self.nodes
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= rel_tol * h)
    }

    pub fn contains(&self, t: f64) -> bool {
        self.position(t).is_some()
    }

    /// Index of the node equal to `t` up to a relative tolerance of 1e-12.
    pub fn position(&self, t: f64) -> Option<usize> {
        let tol = 1e-12 * self.horizon().max(1.0);
        let i = self.nodes.partition_point(|&s| s < t - tol);
        (i < self.nodes.len() && (self.nodes[i] - t).abs() <= tol).then_some(i)
    }

    pub fn check_horizon(&self, horizon: f64) -> Result<()> {
        if (self.horizon() - horizon).abs() > 1e-12 * horizon.max(1.0) {
            return Err(Error::Alignment(format!(
                "grid ends at {} but horizon is {horizon}",
                self.horizon()
            )));
        }
        Ok(())
    }

    /// Every node of `self` followed by each node between consecutive nodes split `factor` ways.
    pub fn refine(&self, factor: usize) -> Result<Self> {
        let factor = factor.max(1);
        let mut nodes = Vec::with_capacity(self.steps() * factor + 1);
        for (a, b) in self.cells() {
            for j in 0..factor {
                nodes.push(a + (b - a) * j as f64 / factor as f64);
            }
        }
        nodes.push(self.horizon());
        Self::from_nodes(nodes)
    }
}

impl TryFrom<Vec<f64>> for TimeGrid {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::from_nodes(v)
    }
}

impl From<TimeGrid> for Vec<f64> {
    fn from(g: TimeGrid) -> Self {
        g.nodes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid_hits_horizon_exactly() {
        let g = TimeGrid::uniform(1.0, 3).unwrap();
        assert_eq!(g.horizon(), 1.0);
        assert_eq!(g.steps(), 3);
        assert!(g.is_uniform(1e-12));
    }

    #[test]
    fn rejects_bad_nodes() {
        assert!(TimeGrid::from_nodes(vec![0.1, 1.0]).is_err());
        assert!(TimeGrid::from_nodes(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(TimeGrid::from_nodes(vec![0.0]).is_err());
    }

    #[test]
    fn finds_nodes() {
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        assert_eq!(g.position(0.5), Some(2));
        assert_eq!(g.position(0.6), None);
        assert!(!TimeGrid::uniform(1.0, 3).unwrap().contains(0.5));
    }

    #[test]
    fn refine_keeps_old_nodes() {
        let g = TimeGrid::from_nodes(vec![0.0, 0.3, 1.0]).unwrap();
        let r = g.refine(2).unwrap();
        assert_eq!(r.len(), 5);
        assert!(r.contains(0.3));
    }
}
