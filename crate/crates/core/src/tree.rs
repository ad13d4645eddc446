//! Tree growth with modified final splits, prediction, text rendering and
//! targeted-leaf policy extraction.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, Dataset, KdFinalResponse, TrainConfig};
use crate::split::{best_split_presorted, scan_sorted, CriterionKind, SplitCriterion, Sums};

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("empty dataset")]
    EmptyDataset,
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("feature count mismatch: tree expects {expected}, data has {found}")]
    FeatureMismatch { expected: usize, found: usize },
    #[error("teacher probabilities have {found} rows, dataset has {expected}")]
    TeacherLength { expected: usize, found: usize },
    #[error("tree serialization: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Internal {
        feature_index: usize,
        threshold: f64,
        /// training mean of the node
        value: f64,
        samples: usize,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        value: f64,
        samples: usize,
    },
}

impl TreeNode {
    pub fn samples(&self) -> usize {
        match self {
            TreeNode::Internal { samples, .. } | TreeNode::Leaf { samples, .. } => *samples,
        }
    }

    pub fn value(&self) -> f64 {
        match self {
            TreeNode::Internal { value, .. } | TreeNode::Leaf { value, .. } => *value,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, TreeNode::Leaf { .. })
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaves(&self) -> Vec<&TreeNode> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a TreeNode>) {
        match self {
            TreeNode::Leaf { .. } => out.push(self),
            TreeNode::Internal { left, right, .. } => {
                left.collect_leaves(out);
                right.collect_leaves(out);
            }
        }
    }

    /// Leaf value for one feature vector; `<=` goes left.
    pub fn route(&self, row: impl Fn(usize) -> f64) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value, .. } => return *value,
                TreeNode::Internal {
                    feature_index,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if row(*feature_index) <= *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }
}

/// A fitted tree together with the feature layout it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub root: TreeNode,
    pub feature_names: Vec<String>,
}

impl Tree {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn to_json(&self) -> Result<String, TreeError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, TreeError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn render(&self) -> String {
        render_tree(&self.root, &self.feature_names)
    }
}

/// When a node stops growing on its response values.
#[derive(Debug, Clone, Copy)]
pub(crate) enum StopRule {
    /// all responses equal
    Pure,
    /// all responses strictly above, or strictly below, `c`
    Threshold(f64),
}

pub(crate) struct GrowParams {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub min_split: usize,
    pub criterion: SplitCriterion,
    pub stop: StopRule,
    /// features inspected per split; `None` means all
    pub max_features: Option<usize>,
}

pub(crate) struct Grower<'a> {
    ds: &'a Dataset,
    response: &'a [f64],
    /// response used by the PFS/MDFS final-split search
    penalty_response: &'a [f64],
    params: GrowParams,
    goes_left: Vec<bool>,
    rng: Option<ChaCha8Rng>,
    features: Vec<usize>,
}

impl<'a> Grower<'a> {
    pub fn new(
        ds: &'a Dataset,
        response: &'a [f64],
        penalty_response: &'a [f64],
        params: GrowParams,
        rng: Option<ChaCha8Rng>,
    ) -> Self {
        Self {
            ds,
            response,
            penalty_response,
            params,
            goes_left: vec![false; ds.n_rows()],
            rng,
            features: (0..ds.n_features()).collect(),
        }
    }

    /// Grows from the full dataset, each row taken `counts[row]` times when
    /// counts are given (bootstrap), once otherwise.
    pub fn grow(mut self, counts: Option<&[u32]>) -> TreeNode {
        let rows: Vec<Vec<u32>> = (0..self.ds.n_features())
            .map(|j| {
                let order = self.ds.sorted_order(j);
                match counts {
                    None => order.to_vec(),
                    Some(counts) => order
                        .iter()
                        .flat_map(|&r| std::iter::repeat_n(r, counts[r as usize] as usize))
                        .collect(),
                }
            })
            .collect();
        self.grow_node(rows, 0)
    }

    fn is_terminal(&self, n: usize, lo: f64, hi: f64) -> bool {
        let p = &self.params;
        if n < p.min_split.max(2) || n < 2 * p.min_leaf {
            return true;
        }
        match p.stop {
            StopRule::Pure => lo == hi,
            StopRule::Threshold(c) => lo == hi || lo > c || hi < c,
        }
    }

    fn range(&self, rows: &[u32]) -> (f64, f64, f64) {
        let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
        for &r in rows {
            let y = self.response[r as usize];
            lo = lo.min(y);
            hi = hi.max(y);
            sum += y;
        }
        (lo, hi, sum / rows.len() as f64)
    }

    fn leaf(&self, rows: &[u32]) -> TreeNode {
        let sum: f64 = rows.iter().map(|&r| self.response[r as usize]).sum();
        TreeNode::Leaf {
            value: sum / rows.len() as f64,
            samples: rows.len(),
        }
    }

    fn grow_node(&mut self, rows: Vec<Vec<u32>>, depth: usize) -> TreeNode {
        let n = rows[0].len();
        let (lo, hi, mean) = self.range(&rows[0]);
        let depth_reached = self.params.max_depth.is_some_and(|m| depth >= m);
        if depth_reached || self.is_terminal(n, lo, hi) {
            return self.leaf(&rows[0]);
        }

        let cart = SplitCriterion {
            kind: CriterionKind::Cart,
            ..self.params.criterion
        };
        let Some(best) = self.best_cart_split(&rows, &cart) else {
            return self.leaf(&rows[0]);
        };
        let f = best.feature_index;

        if !self.params.criterion.is_cart() && self.is_final_split(&rows[f], best.left_count, depth)
        {
            return self.final_split(&rows[f], f, best.threshold, mean);
        }

        let (left, right) = self.partition(&rows, &rows[f][..best.left_count]);
        TreeNode::Internal {
            feature_index: f,
            threshold: best.threshold,
            value: mean,
            samples: n,
            left: Box::new(self.grow_node(left, depth + 1)),
            right: Box::new(self.grow_node(right, depth + 1)),
        }
    }

    fn best_cart_split(
        &mut self,
        rows: &[Vec<u32>],
        cart: &SplitCriterion,
    ) -> Option<crate::split::SplitDecision> {
        let p = self.ds.n_features();
        match self.params.max_features {
            Some(k) if k < p => {
                // visit features in random order until k non-constant ones
                // have been inspected
                let rng = self.rng.as_mut().expect("feature sampling needs an rng");
                self.features.shuffle(rng);
                let mut chosen = Vec::with_capacity(k);
                for &j in &self.features {
                    let list = &rows[j];
                    let col = self.ds.column(j);
                    let first = col[list[0] as usize];
                    let last = col[list[list.len() - 1] as usize];
                    if first < last {
                        chosen.push(j);
                        if chosen.len() == k {
                            break;
                        }
                    }
                }
                chosen.sort_unstable();
                best_split_presorted(
                    self.ds,
                    self.response,
                    rows,
                    &chosen,
                    cart,
                    self.params.min_leaf,
                )
            }
            _ => best_split_presorted(
                self.ds,
                self.response,
                rows,
                &self.features,
                cart,
                self.params.min_leaf,
            ),
        }
    }

    /// A split is final when both of its children are certain to be leaves.
    fn is_final_split(&self, sorted_f: &[u32], left_count: usize, depth: usize) -> bool {
        if self.params.max_depth.is_some_and(|m| depth + 1 >= m) {
            return true;
        }
        let (l, r) = sorted_f.split_at(left_count);
        let (llo, lhi, _) = self.range(l);
        let (rlo, rhi, _) = self.range(r);
        self.is_terminal(l.len(), llo, lhi) && self.is_terminal(r.len(), rlo, rhi)
    }

    fn final_split(&self, sorted_f: &[u32], f: usize, cart_threshold: f64, mean: f64) -> TreeNode {
        let crit = &self.params.criterion;
        let resp = match crit.kind {
            CriterionKind::Pfs | CriterionKind::Mdfs => self.penalty_response,
            _ => self.response,
        };
        let col = self.ds.column(f);
        let total = Sums::of(sorted_f.iter().map(|&r| resp[r as usize]), crit.c);
        let pairs = sorted_f
            .iter()
            .map(|&r| (col[r as usize], resp[r as usize]));
        let threshold = scan_sorted(pairs, total, crit, self.params.min_leaf)
            .map_or(cart_threshold, |s| s.threshold);
        let cut = sorted_f.partition_point(|&r| col[r as usize] <= threshold);
        let (l, r) = sorted_f.split_at(cut);
        TreeNode::Internal {
            feature_index: f,
            threshold,
            value: mean,
            samples: sorted_f.len(),
            left: Box::new(self.leaf(l)),
            right: Box::new(self.leaf(r)),
        }
    }

    fn partition(&mut self, rows: &[Vec<u32>], left_rows: &[u32]) -> (Vec<Vec<u32>>, Vec<Vec<u32>>) {
        for &r in left_rows {
            self.goes_left[r as usize] = true;
        }
        let nl = left_rows.len();
        let (left, right) = rows
            .iter()
            .map(|list| {
                let mut l = Vec::with_capacity(nl);
                let mut r = Vec::with_capacity(list.len() - nl);
                for &row in list {
                    if self.goes_left[row as usize] {
                        l.push(row);
                    } else {
                        r.push(row);
                    }
                }
                (l, r)
            })
            .unzip();
        for &r in left_rows {
            self.goes_left[r as usize] = false;
        }
        (left, right)
    }
}

fn check_config(ds: &Dataset, config: &TrainConfig) -> Result<(), TreeError> {
    if ds.n_rows() == 0 {
        return Err(TreeError::EmptyDataset);
    }
    config.validate().map_err(TreeError::Config)
}

/// Grows a depth-limited tree on binary responses. With a non-CART criterion
/// only the final splits are re-optimised, on the feature CART selected.
pub fn grow_tree(ds: &Dataset, config: &TrainConfig) -> Result<Tree, TreeError> {
    check_config(ds, config)?;
    ds.require_binary()?;
    let params = GrowParams {
        max_depth: Some(config.max_depth),
        min_leaf: config.min_leaf_size(ds.n_rows()),
        min_split: 2,
        criterion: config.criterion,
        stop: StopRule::Pure,
        max_features: None,
    };
    let root = Grower::new(ds, ds.response(), ds.response(), params, None).grow(None);
    Ok(Tree {
        root,
        feature_names: ds.feature_names().to_vec(),
    })
}

/// Grows a student tree on teacher probabilities. Splits and leaf values use
/// the probabilities; a node stops once all of its probabilities sit on one
/// side of `c`.
pub fn grow_tree_kd(
    ds: &Dataset,
    teacher_probs: &[f64],
    config: &TrainConfig,
) -> Result<Tree, TreeError> {
    check_config(ds, config)?;
    if teacher_probs.len() != ds.n_rows() {
        return Err(TreeError::TeacherLength {
            expected: ds.n_rows(),
            found: teacher_probs.len(),
        });
    }
    if let Some(row) = teacher_probs
        .iter()
        .position(|p| !(0.0..=1.0).contains(p))
    {
        return Err(DataError::ResponseOutOfRange {
            row,
            value: teacher_probs[row],
        }
        .into());
    }
    let penalty_response = match config.kd_final_response {
        KdFinalResponse::Labels => ds.response(),
        KdFinalResponse::Teacher => teacher_probs,
    };
    let params = GrowParams {
        max_depth: Some(config.max_depth),
        min_leaf: config.min_leaf_size(ds.n_rows()),
        min_split: 2,
        criterion: config.criterion,
        stop: StopRule::Threshold(config.criterion.c),
        max_features: None,
    };
    let root = Grower::new(ds, teacher_probs, penalty_response, params, None).grow(None);
    Ok(Tree {
        root,
        feature_names: ds.feature_names().to_vec(),
    })
}

pub fn predict(tree: &Tree, ds: &Dataset) -> Result<Vec<f64>, TreeError> {
    if tree.n_features() != ds.n_features() {
        return Err(TreeError::FeatureMismatch {
            expected: tree.n_features(),
            found: ds.n_features(),
        });
    }
    Ok((0..ds.n_rows())
        .map(|i| tree.root.route(|j| ds.value(i, j)))
        .collect())
}

/// Formats a threshold the way it is printed in tree listings: up to ten
/// decimals with trailing zeros trimmed, keeping at least one decimal.
pub fn format_threshold(t: f64) -> String {
    let mut s = format!("{t:.10}");
    while s.ends_with('0') && !s.ends_with(".0") {
        s.pop();
    }
    if s == "-0.0" {
        s = "0.0".into();
    }
    s
}

/// Indented text listing: `if <name> <= <threshold>` followed by the left
/// then the right block, four spaces per level; leaves as
/// `value: <3 decimals>, samples: <n>`.
pub fn render_tree(root: &TreeNode, feature_names: &[String]) -> String {
    let mut out = String::new();
    render_into(root, feature_names, 0, &mut out);
    out.pop();
    out
}

fn render_into(node: &TreeNode, names: &[String], depth: usize, out: &mut String) {
    let indent = "    ".repeat(depth);
    match node {
        TreeNode::Leaf { value, samples } => {
            let _ = writeln!(out, "{indent}value: {value:.3}, samples: {samples}");
        }
        TreeNode::Internal {
            feature_index,
            threshold,
            left,
            right,
            ..
        } => {
            let name = feature_label(names, *feature_index);
            let _ = writeln!(out, "{indent}if {name} <= {}", format_threshold(*threshold));
            render_into(left, names, depth + 1, out);
            render_into(right, names, depth + 1, out);
        }
    }
}

fn feature_label(names: &[String], j: usize) -> String {
    names.get(j).cloned().unwrap_or_else(|| format!("x{}", j + 1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub feature_index: usize,
    pub feature: String,
    /// true for `<=`, false for `>`
    pub le: bool,
    pub threshold: f64,
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let op = if self.le { "<=" } else { ">" };
        write!(f, "{} {op} {}", self.feature, format_threshold(self.threshold))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetedLeaf {
    pub path: Vec<Condition>,
    pub value: f64,
    pub samples: usize,
}

impl TargetedLeaf {
    pub fn predicate(&self) -> String {
        if self.path.is_empty() {
            return "all".into();
        }
        self.path
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(" and ")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyReport {
    pub c: f64,
    pub targeted_leaves: Vec<TargetedLeaf>,
    /// targeted fraction of the training sample
    pub cost: f64,
}

/// Leaves whose value exceeds `c`, with their root-to-leaf predicates.
pub fn policy_report(tree: &Tree, c: f64) -> PolicyReport {
    let mut targeted = Vec::new();
    let mut path = Vec::new();
    collect_targeted(&tree.root, &tree.feature_names, c, &mut path, &mut targeted);
    let total = tree.root.samples();
    let hit: usize = targeted.iter().map(|l: &TargetedLeaf| l.samples).sum();
    PolicyReport {
        c,
        targeted_leaves: targeted,
        cost: if total == 0 { 0.0 } else { hit as f64 / total as f64 },
    }
}

fn collect_targeted(
    node: &TreeNode,
    names: &[String],
    c: f64,
    path: &mut Vec<Condition>,
    out: &mut Vec<TargetedLeaf>,
) {
    match node {
        TreeNode::Leaf { value, samples } => {
            if *value > c {
                out.push(TargetedLeaf {
                    path: path.clone(),
                    value: *value,
                    samples: *samples,
                });
            }
        }
        TreeNode::Internal {
            feature_index,
            threshold,
            left,
            right,
            ..
        } => {
            for (le, child) in [(true, left), (false, right)] {
                path.push(Condition {
                    feature_index: *feature_index,
                    feature: feature_label(names, *feature_index),
                    le,
                    threshold: *threshold,
                });
                collect_targeted(child, names, c, path, out);
                path.pop();
            }
        }
    }
}
