//! Exact rational oracles on small discrete instances.

pub mod budgetize;
pub mod dp;
pub mod lattice;
pub mod reduction_search;
pub mod tree;

pub use budgetize::{budgetize_policy_tree, SurgeryReport};
pub use dp::{
    min_opened_budgeted, optimal_cost_dp, single_bin_optimal_iid, ActionTable, DpSolution, Field, TableAction,
    TablePolicy, DEFAULT_MAX_STATES, DEFAULT_USAGE_LIMIT,
};
pub use lattice::Lattice;
pub use reduction_search::{constructive_policy_value, restricted_policy_search, SearchLimits, SearchReport};
pub use tree::{
    budget_violation, build_policy_tree, eval_opened, eval_policy_tree, PolicyTree, TreeArc, TreeNode,
    DEFAULT_TREE_LIMIT,
};
