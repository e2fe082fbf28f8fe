//! Independent optimality checks: exact discrete LQ solutions on a uniform grid and on a
//! binomial tree, and the first-order (Gâteaux) condition of the continuous problem.

mod deterministic;
mod gateaux;
mod tree;

pub use deterministic::{solve_lq_deterministic, DiscreteLQProblem, DiscreteLQSolution};
pub use gateaux::{gateaux_check, perturbation_directions, GateauxReport};
pub use tree::{asian_tree_comparison, solve_lq_tree, AsianTreeComparison, TreeModel, TreeNode, TreeSolution, MAX_TREE_DEPTH};
