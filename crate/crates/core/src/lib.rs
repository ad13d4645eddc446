//! Decision trees whose final split targets a probability threshold, plus
//! the forest teacher, the population-level theory lab, synthetic data
//! generators and the simulation harness built on them.

pub mod data;
pub mod dgp;
pub mod experiments;
pub mod forest;
pub mod io;
pub mod parallel;
pub mod split;
pub mod theory;
pub mod tree;

pub use data::{node_stats, DataError, Dataset, KdFinalResponse, NodeStats, TrainConfig};
pub use forest::{fit_forest, fit_forest_with, predict_proba, Forest, ForestConfig, MaxFeatures};
pub use parallel::{par_map, par_map_with, Execution};
pub use split::{
    candidate_thresholds, distance_penalty, find_best_split, find_best_split_cart,
    find_final_split, impurity, weighted_risk, CriterionKind, PenaltyForm, ScanOutcome,
    SplitCriterion, SplitDecision, SplitError, WeightFn,
};
pub use tree::{
    format_threshold, grow_tree, grow_tree_kd, policy_report, predict, render_tree, Condition,
    PolicyReport, TargetedLeaf, Tree, TreeError, TreeNode,
};
