//! Split objectives and best-split searches.
//!
//! Every search is a single ordered pass over `(feature value, response)`
//! pairs sorted by feature value, keeping running sums for the left child.
//! Candidate thresholds are midpoints between consecutive distinct values and
//! rows with `x <= threshold` go left.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{node_stats, Dataset};

/// Objective values closer than this are treated as tied; the earlier
/// (smaller) threshold is kept.
pub const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SplitError {
    #[error("no valid split: every feature is constant or violates the minimum leaf size")]
    NoValidSplit,
}

/// Decreasing penalty on the distance between a child mean and `c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum WeightFn {
    /// `1 - d`
    #[default]
    Linear,
    /// `(1 - d)^2`
    Quadratic,
    /// `exp(-d)`
    Exponential,
}

impl WeightFn {
    pub fn weight(self, d: f64) -> f64 {
        match self {
            WeightFn::Linear => 1.0 - d,
            WeightFn::Quadratic => (1.0 - d) * (1.0 - d),
            WeightFn::Exponential => (-d).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriterionKind {
    Cart,
    Pfs,
    Mdfs,
    Wefs,
}

/// How the distance penalty is combined with the impurity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum PenaltyForm {
    /// `(1 - lambda) * impurity + lambda * penalty`; `lambda = 1` is MDFS.
    #[default]
    Convex,
    /// `impurity + lambda * penalty`.
    Additive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitCriterion {
    pub kind: CriterionKind,
    pub c: f64,
    pub lambda: f64,
    pub weight: WeightFn,
    pub form: PenaltyForm,
}

impl SplitCriterion {
    pub const DEFAULT_LAMBDA: f64 = 0.1;

    pub fn cart() -> Self {
        Self {
            kind: CriterionKind::Cart,
            c: 0.5,
            lambda: 0.0,
            weight: WeightFn::Linear,
            form: PenaltyForm::Convex,
        }
    }

    pub fn pfs(c: f64, lambda: f64) -> Self {
        Self {
            kind: CriterionKind::Pfs,
            c,
            lambda,
            ..Self::cart()
        }
    }

    pub fn mdfs(c: f64) -> Self {
        Self {
            kind: CriterionKind::Mdfs,
            c,
            lambda: 1.0,
            ..Self::cart()
        }
    }

    pub fn wefs(c: f64) -> Self {
        Self {
            kind: CriterionKind::Wefs,
            c,
            ..Self::cart()
        }
    }

    /// Builds a criterion of the given kind with the default lambda.
    pub fn of_kind(kind: CriterionKind, c: f64) -> Self {
        match kind {
            CriterionKind::Cart => Self { c, ..Self::cart() },
            CriterionKind::Pfs => Self::pfs(c, Self::DEFAULT_LAMBDA),
            CriterionKind::Mdfs => Self::mdfs(c),
            CriterionKind::Wefs => Self::wefs(c),
        }
    }

    pub fn with_weight(mut self, weight: WeightFn) -> Self {
        self.weight = weight;
        self
    }

    pub fn with_form(mut self, form: PenaltyForm) -> Self {
        self.form = form;
        self
    }

    pub fn is_cart(&self) -> bool {
        self.kind == CriterionKind::Cart
    }

    pub fn effective_lambda(&self) -> f64 {
        match self.kind {
            CriterionKind::Cart | CriterionKind::Wefs => 0.0,
            CriterionKind::Mdfs => 1.0,
            CriterionKind::Pfs => self.lambda,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.is_cart() {
            return Ok(());
        }
        if !(self.c > 0.0 && self.c < 1.0) {
            return Err(format!("threshold c must be in (0,1), got {}", self.c));
        }
        if self.kind == CriterionKind::Pfs {
            let ok = match self.form {
                PenaltyForm::Convex => (0.0..=1.0).contains(&self.lambda),
                PenaltyForm::Additive => self.lambda >= 0.0 && self.lambda.is_finite(),
            };
            if !ok {
                return Err(format!("lambda out of range: {}", self.lambda));
            }
        }
        Ok(())
    }

    /// Objective of a split given the running sums of both children.
    pub(crate) fn objective(&self, left: &Sums, right: &Sums) -> f64 {
        let n = (left.n + right.n) as f64;
        match self.kind {
            CriterionKind::Cart => impurity_from(left, right, n),
            CriterionKind::Pfs | CriterionKind::Mdfs => {
                let lambda = self.effective_lambda();
                let pen = penalty_from(left, right, n, self.c, self.weight);
                if lambda == 1.0 {
                    return pen;
                }
                let imp = impurity_from(left, right, n);
                match self.form {
                    PenaltyForm::Convex => (1.0 - lambda) * imp + lambda * pen,
                    PenaltyForm::Additive => imp + lambda * pen,
                }
            }
            CriterionKind::Wefs => risk_from(left, right, self.c),
        }
    }
}

/// Running sums of one child.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Sums {
    pub n: usize,
    pub sum: f64,
    pub sumsq: f64,
    /// responses strictly above `c`
    pub above: usize,
}

impl Sums {
    pub fn push(&mut self, y: f64, c: f64) {
        self.n += 1;
        self.sum += y;
        self.sumsq += y * y;
        self.above += usize::from(y > c);
    }

    pub fn of(ys: impl IntoIterator<Item = f64>, c: f64) -> Self {
        let mut s = Self::default();
        for y in ys {
            s.push(y, c);
        }
        s
    }

    pub fn minus(&self, other: &Sums) -> Sums {
        Sums {
            n: self.n - other.n,
            sum: self.sum - other.sum,
            sumsq: self.sumsq - other.sumsq,
            above: self.above - other.above,
        }
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum / self.n as f64
        }
    }

    /// `n * Var` (sum of squared deviations), clamped at zero.
    fn sse(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        (self.sumsq - self.sum * self.sum / self.n as f64).max(0.0)
    }
}

fn impurity_from(left: &Sums, right: &Sums, n: f64) -> f64 {
    (left.sse() + right.sse()) / n
}

fn penalty_from(left: &Sums, right: &Sums, n: f64, c: f64, w: WeightFn) -> f64 {
    let term = |s: &Sums| {
        if s.n == 0 {
            0.0
        } else {
            w.weight((c - s.mean()).abs()) * s.n as f64 / n
        }
    };
    term(left) + term(right)
}

fn risk_from(left: &Sums, right: &Sums, c: f64) -> f64 {
    let term = |s: &Sums| {
        if s.n == 0 {
            0.0
        } else if s.mean() > c {
            (s.n - s.above) as f64 * c
        } else {
            s.above as f64 * (1.0 - c)
        }
    };
    term(left) + term(right)
}

/// Ascending midpoints between consecutive distinct values.
pub fn candidate_thresholds(feature_values: &[f64]) -> Vec<f64> {
    let mut v = feature_values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.windows(2).map(|w| midpoint(w[0], w[1])).collect()
}

/// Midpoint of `a < b` that is guaranteed to satisfy `a <= m < b`.
pub fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b {
        a
    } else {
        m
    }
}

/// Weighted child variance, `Var(l)|l|/n + Var(r)|r|/n`.
pub fn impurity(left: &[f64], right: &[f64]) -> f64 {
    let n = (left.len() + right.len()) as f64;
    let (l, r) = (node_stats(left), node_stats(right));
    l.variance * l.count as f64 / n + r.variance * r.count as f64 / n
}

/// `W(|c - mean(l)|)|l|/n + W(|c - mean(r)|)|r|/n`.
pub fn distance_penalty(left: &[f64], right: &[f64], c: f64, w: WeightFn) -> f64 {
    let n = (left.len() + right.len()) as f64;
    let term = |ys: &[f64]| {
        if ys.is_empty() {
            return 0.0;
        }
        let s = node_stats(ys);
        w.weight((c - s.mean).abs()) * s.count as f64 / n
    };
    term(left) + term(right)
}

/// Cost-weighted misclassification count of a split. A child is targeted when
/// its mean is strictly above `c`; targeted rows with `y <= c` cost `c`,
/// untargeted rows with `y > c` cost `1 - c`.
pub fn weighted_risk(left: &[f64], right: &[f64], c: f64) -> f64 {
    let term = |ys: &[f64]| {
        if ys.is_empty() {
            return 0.0;
        }
        let mean = node_stats(ys).mean;
        let above = ys.iter().filter(|&&y| y > c).count() as f64;
        if mean > c {
            (ys.len() as f64 - above) * c
        } else {
            above * (1.0 - c)
        }
    };
    term(left) + term(right)
}

/// Outcome of scanning one feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanOutcome {
    pub threshold: f64,
    pub objective: f64,
    pub left_count: usize,
    pub right_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitDecision {
    pub feature_index: usize,
    pub threshold: f64,
    pub objective_value: f64,
    pub left_count: usize,
    pub right_count: usize,
}

impl SplitDecision {
    fn from_scan(feature_index: usize, s: ScanOutcome) -> Self {
        Self {
            feature_index,
            threshold: s.threshold,
            objective_value: s.objective,
            left_count: s.left_count,
            right_count: s.right_count,
        }
    }
}

/// Scans `(x, y)` pairs sorted ascending by `x`. `total` must be the sums over
/// all pairs. Returns the best admissible candidate, if any.
pub(crate) fn scan_sorted<I>(
    pairs: I,
    total: Sums,
    criterion: &SplitCriterion,
    min_leaf: usize,
) -> Option<ScanOutcome>
where
    I: IntoIterator<Item = (f64, f64)>,
{
    let min_leaf = min_leaf.max(1);
    if total.n < 2 * min_leaf {
        return None;
    }
    let c = criterion.c;
    let mut left = Sums::default();
    let mut best: Option<ScanOutcome> = None;
    let mut iter = pairs.into_iter().peekable();
    while let Some((x, y)) = iter.next() {
        left.push(y, c);
        let Some(&(next_x, _)) = iter.peek() else {
            break;
        };
        if left.n < min_leaf {
            continue;
        }
        if total.n - left.n < min_leaf {
            break;
        }
        if next_x <= x {
            continue;
        }
        let right = total.minus(&left);
        let obj = criterion.objective(&left, &right);
        if best.is_none_or(|b| obj < b.objective - TIE_EPS) {
            best = Some(ScanOutcome {
                threshold: midpoint(x, next_x),
                objective: obj,
                left_count: left.n,
                right_count: right.n,
            });
        }
    }
    best
}

fn sorted_pairs(feature_values: &[f64], responses: &[f64]) -> Vec<(f64, f64)> {
    let mut pairs: Vec<(f64, f64)> = feature_values
        .iter()
        .copied()
        .zip(responses.iter().copied())
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs
}

/// Best threshold on one (already chosen) feature under `criterion`,
/// honouring the minimum leaf size.
pub fn find_final_split(
    feature_values: &[f64],
    responses: &[f64],
    criterion: &SplitCriterion,
    min_leaf: usize,
) -> Result<ScanOutcome, SplitError> {
    assert_eq!(feature_values.len(), responses.len());
    let pairs = sorted_pairs(feature_values, responses);
    let total = Sums::of(responses.iter().copied(), criterion.c);
    scan_sorted(pairs, total, criterion, min_leaf).ok_or(SplitError::NoValidSplit)
}

/// CART best split over all features for the rows in `rows`, fitted against
/// the dataset response.
pub fn find_best_split_cart(
    dataset: &Dataset,
    rows: &[usize],
    min_leaf: usize,
) -> Result<SplitDecision, SplitError> {
    find_best_split(dataset, dataset.response(), rows, &SplitCriterion::cart(), min_leaf)
}

/// Best split over all features for an arbitrary criterion and response.
pub fn find_best_split(
    dataset: &Dataset,
    response: &[f64],
    rows: &[usize],
    criterion: &SplitCriterion,
    min_leaf: usize,
) -> Result<SplitDecision, SplitError> {
    let total = Sums::of(rows.iter().map(|&r| response[r]), criterion.c);
    let mut best: Option<SplitDecision> = None;
    for j in 0..dataset.n_features() {
        let col = dataset.column(j);
        let mut sorted = rows.to_vec();
        sorted.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
        let pairs = sorted.iter().map(|&r| (col[r], response[r]));
        if let Some(s) = scan_sorted(pairs, total, criterion, min_leaf) {
            if best.is_none_or(|b| s.objective < b.objective_value - TIE_EPS) {
                best = Some(SplitDecision::from_scan(j, s));
            }
        }
    }
    best.ok_or(SplitError::NoValidSplit)
}

/// Best split restricted to `features`, over per-feature row lists that are
/// already sorted by the respective feature.
pub(crate) fn best_split_presorted<'a>(
    dataset: &Dataset,
    response: &[f64],
    sorted_rows: &[Vec<u32>],
    features: impl IntoIterator<Item = &'a usize>,
    criterion: &SplitCriterion,
    min_leaf: usize,
) -> Option<SplitDecision> {
    let mut best: Option<SplitDecision> = None;
    let first = sorted_rows.first()?;
    let total = Sums::of(first.iter().map(|&r| response[r as usize]), criterion.c);
    for &j in features {
        let col = dataset.column(j);
        let pairs = sorted_rows[j]
            .iter()
            .map(|&r| (col[r as usize], response[r as usize]));
        if let Some(s) = scan_sorted(pairs, total, criterion, min_leaf) {
            if best.is_none_or(|b| s.objective < b.objective_value - TIE_EPS) {
                best = Some(SplitDecision::from_scan(j, s));
            }
        }
    }
    best
}
