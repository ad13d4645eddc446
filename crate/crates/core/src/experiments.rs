//! Monte-Carlo comparison harness and the real-data case studies.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Dataset, TrainConfig};
use crate::dgp::{sample, DgpKind, DgpSpec};
use crate::forest::{fit_forest_with, predict_proba, ForestConfig};
use crate::parallel::{derive_seed, par_map_with, Execution};
use crate::split::{CriterionKind, SplitCriterion};
use crate::tree::{grow_tree, grow_tree_kd, policy_report, predict, PolicyReport, Tree, TreeError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("length mismatch: {predictions} predictions for {eta} eta values")]
    LengthMismatch { predictions: usize, eta: usize },
}

/// Fraction of rows where the estimate and `η` fall strictly on opposite
/// sides of `c`. A product of exactly zero counts as correct.
pub fn mr(predictions: &[f64], eta: &[f64], c: f64) -> Result<f64, ExperimentError> {
    if predictions.len() != eta.len() {
        return Err(ExperimentError::LengthMismatch {
            predictions: predictions.len(),
            eta: eta.len(),
        });
    }
    if eta.is_empty() {
        return Ok(0.0);
    }
    let wrong = predictions
        .iter()
        .zip(eta)
        .filter(|(p, e)| (*p - c) * (*e - c) < 0.0)
        .count();
    Ok(wrong as f64 / eta.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    Cart,
    Pfs,
    Mdfs,
    Wefs,
    RfCart,
    RfMdfs,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Cart,
        Method::Pfs,
        Method::Mdfs,
        Method::Wefs,
        Method::RfCart,
        Method::RfMdfs,
    ];
    pub const DIRECT: [Method; 4] = [Method::Cart, Method::Pfs, Method::Mdfs, Method::Wefs];
    pub const DISTILLED: [Method; 2] = [Method::RfCart, Method::RfMdfs];

    pub fn label(self) -> &'static str {
        match self {
            Method::Cart => "CART",
            Method::Pfs => "PFS",
            Method::Mdfs => "MDFS",
            Method::Wefs => "wEFS",
            Method::RfCart => "RF-CART",
            Method::RfMdfs => "RF-MDFS",
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            Method::Cart => "cart",
            Method::Pfs => "pfs",
            Method::Mdfs => "mdfs",
            Method::Wefs => "wefs",
            Method::RfCart => "rf-cart",
            Method::RfMdfs => "rf-mdfs",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.slug().eq_ignore_ascii_case(s) || m.label().eq_ignore_ascii_case(s))
    }

    pub fn uses_teacher(self) -> bool {
        matches!(self, Method::RfCart | Method::RfMdfs)
    }

    fn criterion(self, c: f64, lambda: f64) -> SplitCriterion {
        match self {
            Method::Cart | Method::RfCart => SplitCriterion::of_kind(CriterionKind::Cart, c),
            Method::Pfs => SplitCriterion::pfs(c, lambda),
            Method::Mdfs | Method::RfMdfs => SplitCriterion::mdfs(c),
            Method::Wefs => SplitCriterion::wefs(c),
        }
    }
}

/// Fits one method. Distilled methods need the teacher's probabilities.
pub fn fit_method(
    method: Method,
    ds: &Dataset,
    teacher: Option<&[f64]>,
    c: f64,
    max_depth: usize,
    min_leaf_fraction: f64,
    lambda: f64,
) -> Result<Tree, TreeError> {
    let cfg = TrainConfig::new(max_depth, min_leaf_fraction, method.criterion(c, lambda));
    if method.uses_teacher() {
        let probs = teacher.ok_or_else(|| TreeError::Config("distilled method without a teacher".into()))?;
        grow_tree_kd(ds, probs, &cfg)
    } else {
        grow_tree(ds, &cfg)
    }
}

pub const C_GRID: [f64; 3] = [0.8, 0.7, 0.6];
pub const DEPTH_GRID: [usize; 4] = [4, 5, 6, 7];
pub const SMOKE_DEPTHS: [usize; 2] = [4, 6];
pub const RHO_GRID: [f64; 3] = [0.01, 0.02, 0.03];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSetting {
    pub dgp: DgpSpec,
    pub c: f64,
    pub max_depth: usize,
    pub min_leaf_fraction: f64,
    pub n: usize,
    pub replicates: usize,
    pub methods: Vec<Method>,
    pub base_seed: u64,
    pub lambda: f64,
    pub teacher_trees: usize,
    /// Score on an independent sample of the same size instead of the
    /// training sample.
    pub holdout: bool,
}

impl ExperimentSetting {
    pub fn new(dgp: DgpSpec, c: f64, max_depth: usize, min_leaf_fraction: f64) -> Self {
        Self {
            dgp,
            c,
            max_depth,
            min_leaf_fraction,
            n: 5000,
            replicates: 50,
            methods: Method::DIRECT.to_vec(),
            base_seed: 0,
            lambda: SplitCriterion::DEFAULT_LAMBDA,
            teacher_trees: 100,
            holdout: false,
        }
    }

    /// Seed of replicate `rep`'s training sample. It depends on the process
    /// and replicate only, so every threshold and configuration of a process
    /// sees the same draws.
    pub fn data_seed(&self, rep: usize) -> u64 {
        derive_seed(self.base_seed, &[self.dgp.kind.index() as u64, u64::from(self.dgp.poly2_uses_x4), rep as u64, 0])
    }

    fn holdout_seed(&self, rep: usize) -> u64 {
        derive_seed(self.base_seed, &[self.dgp.kind.index() as u64, u64::from(self.dgp.poly2_uses_x4), rep as u64, 1])
    }

    fn teacher_seed(&self, rep: usize) -> u64 {
        derive_seed(self.base_seed, &[self.dgp.kind.index() as u64, u64::from(self.dgp.poly2_uses_x4), rep as u64, 2])
    }

    fn shares_data_with(&self, other: &Self) -> bool {
        self.dgp == other.dgp
            && self.n == other.n
            && self.base_seed == other.base_seed
            && self.holdout == other.holdout
            && self.teacher_trees == other.teacher_trees
    }
}

fn grid(
    base_seed: u64,
    methods: &[Method],
    depths: &[usize],
    replicates: usize,
    dgps: &[DgpKind],
) -> Vec<ExperimentSetting> {
    let mut out = Vec::new();
    for &kind in dgps {
        for c in C_GRID {
            for &depth in depths {
                for rho in RHO_GRID {
                    let mut s = ExperimentSetting::new(kind.into(), c, depth, rho);
                    s.methods = methods.to_vec();
                    s.base_seed = base_seed;
                    s.replicates = replicates;
                    out.push(s);
                }
            }
        }
    }
    out
}

/// 8 processes × 3 thresholds × 4 depths × 3 leaf fractions, 50 replicates.
pub fn full_grid(base_seed: u64, methods: &[Method]) -> Vec<ExperimentSetting> {
    grid(base_seed, methods, &DEPTH_GRID, 50, &DgpKind::ALL)
}

/// Depths {4, 6} and 5 replicates.
pub fn smoke_grid(base_seed: u64, methods: &[Method]) -> Vec<ExperimentSetting> {
    grid(base_seed, methods, &SMOKE_DEPTHS, 5, &DgpKind::ALL)
}

/// The 12 configurations of one (process, threshold) task.
pub fn task_grid(dgp: DgpSpec, c: f64, base_seed: u64, methods: &[Method]) -> Vec<ExperimentSetting> {
    let mut out = Vec::new();
    for depth in DEPTH_GRID {
        for rho in RHO_GRID {
            let mut s = ExperimentSetting::new(dgp, c, depth, rho);
            s.methods = methods.to_vec();
            s.base_seed = base_seed;
            out.push(s);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodResult {
    pub method: Method,
    /// percent
    pub mean: f64,
    /// sample standard deviation, percent
    pub std: f64,
    /// per-replicate MR in percent, failed replicates omitted
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SettingResult {
    pub setting: ExperimentSetting,
    pub methods: Vec<MethodResult>,
    pub seeds: Vec<u64>,
    pub diagnostics: Vec<String>,
}

impl SettingResult {
    pub fn method(&self, m: Method) -> Option<&MethodResult> {
        self.methods.iter().find(|r| r.method == m)
    }

    pub fn mean(&self, m: Method) -> Option<f64> {
        self.method(m).map(|r| r.mean).filter(|v| v.is_finite())
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    (mean, (ss / (n - 1) as f64).sqrt())
}

type ReplicateScores = Vec<Vec<Result<f64, String>>>;

/// One replicate of every setting in a data-sharing group.
fn run_replicate(group: &[&ExperimentSetting], rep: usize, exec: Execution) -> ReplicateScores {
    let head = group[0];
    let train = sample(&head.dgp, head.n, head.data_seed(rep));
    let test = head
        .holdout
        .then(|| sample(&head.dgp, head.n, head.holdout_seed(rep)));
    let needs_teacher = group
        .iter()
        .any(|s| rep < s.replicates && s.methods.iter().any(|m| m.uses_teacher()));
    let teacher = needs_teacher.then(|| {
        let cfg = ForestConfig {
            n_trees: head.teacher_trees,
            seed: head.teacher_seed(rep),
            ..ForestConfig::default()
        };
        fit_forest_with(&train.dataset, &cfg, exec)
            .and_then(|f| predict_proba(&f, &train.dataset))
            .map_err(|e| e.to_string())
    });
    let eval = test.as_ref().unwrap_or(&train);
    let eta = eval.dataset.eta_true().expect("synthetic samples carry eta");

    group
        .iter()
        .map(|s| {
            if rep >= s.replicates {
                return Vec::new();
            }
            s.methods
                .iter()
                .map(|&m| {
                    let probs = match (&teacher, m.uses_teacher()) {
                        (Some(Err(e)), true) => return Err(format!("teacher: {e}")),
                        (Some(Ok(p)), true) => Some(p.as_slice()),
                        _ => None,
                    };
                    let tree = fit_method(m, &train.dataset, probs, s.c, s.max_depth, s.min_leaf_fraction, s.lambda)
                        .map_err(|e| e.to_string())?;
                    let pred = predict(&tree, &eval.dataset).map_err(|e| e.to_string())?;
                    mr(&pred, eta, s.c).map(|v| 100.0 * v).map_err(|e| e.to_string())
                })
                .collect()
        })
        .collect()
}

pub fn run_setting(setting: &ExperimentSetting) -> SettingResult {
    run_suite(std::slice::from_ref(setting)).results.remove(0)
}

pub fn run_suite(grid: &[ExperimentSetting]) -> SuiteReport {
    run_suite_with(grid, Execution::Parallel)
}

/// Runs every setting. Settings that share a process (and sample size,
/// seed and teacher size) reuse each replicate's sample and forest teacher.
/// Work units are (group, replicate) pairs; aggregation is by index, so the
/// report does not depend on scheduling.
pub fn run_suite_with(grid: &[ExperimentSetting], exec: Execution) -> SuiteReport {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, s) in grid.iter().enumerate() {
        match groups.iter_mut().find(|g| grid[g[0]].shares_data_with(s)) {
            Some(g) => g.push(i),
            None => groups.push(vec![i]),
        }
    }
    let units: Vec<(usize, usize)> = groups
        .iter()
        .enumerate()
        .flat_map(|(g, members)| {
            let reps = members.iter().map(|&i| grid[i].replicates).max().unwrap_or(0);
            (0..reps).map(move |r| (g, r))
        })
        .collect();
    // Parallelism is over units; forests inside a unit run sequentially.
    let scores = par_map_with(exec, units.len(), |u| {
        let (g, rep) = units[u];
        let members: Vec<&ExperimentSetting> = groups[g].iter().map(|&i| &grid[i]).collect();
        run_replicate(&members, rep, Execution::Sequential)
    });

    let mut per_setting: Vec<Vec<Vec<Result<f64, String>>>> = vec![Vec::new(); grid.len()];
    for (u, unit_scores) in scores.into_iter().enumerate() {
        let (g, _) = units[u];
        for (k, s) in unit_scores.into_iter().enumerate() {
            if !s.is_empty() {
                per_setting[groups[g][k]].push(s);
            }
        }
    }
    let results = grid
        .iter()
        .zip(per_setting)
        .map(|(s, reps)| {
            let mut diagnostics = Vec::new();
            let methods = s
                .methods
                .iter()
                .enumerate()
                .map(|(mi, &m)| {
                    let mut values = Vec::new();
                    for (rep, scores) in reps.iter().enumerate() {
                        match &scores[mi] {
                            Ok(v) => values.push(*v),
                            Err(e) => diagnostics.push(format!(
                                "{} c={} depth={} rho={} replicate {rep} {}: {e}",
                                s.dgp.name(),
                                s.c,
                                s.max_depth,
                                s.min_leaf_fraction,
                                m.label()
                            )),
                        }
                    }
                    let (mean, std) = mean_std(&values);
                    MethodResult { method: m, mean, std, values }
                })
                .collect();
            SettingResult {
                setting: s.clone(),
                methods,
                seeds: (0..s.replicates).map(|r| s.data_seed(r)).collect(),
                diagnostics,
            }
        })
        .collect();
    SuiteReport::new(results)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WinRate {
    pub method: Method,
    pub baseline: Method,
    pub wins: usize,
    pub settings: usize,
}

impl WinRate {
    pub fn rate(&self) -> f64 {
        if self.settings == 0 {
            f64::NAN
        } else {
            self.wins as f64 / self.settings as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestEntry {
    pub method: Method,
    pub mean: f64,
    pub std: f64,
    pub max_depth: usize,
    pub min_leaf_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestRow {
    pub dgp: DgpSpec,
    pub c: f64,
    pub entries: Vec<BestEntry>,
}

impl BestRow {
    pub fn entry(&self, m: Method) -> Option<&BestEntry> {
        self.entries.iter().find(|e| e.method == m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub results: Vec<SettingResult>,
    pub methods: Vec<Method>,
    pub win_rates: Vec<WinRate>,
    /// Per task, every method at the configuration with the lowest CART MR.
    pub best_joint: Vec<BestRow>,
    /// Per task, each method at its own best configuration.
    pub best_per_method: Vec<BestRow>,
}

const WIN_PAIRS: [(Method, Method); 5] = [
    (Method::Pfs, Method::Cart),
    (Method::Mdfs, Method::Cart),
    (Method::Wefs, Method::Cart),
    (Method::RfMdfs, Method::RfCart),
    (Method::RfCart, Method::Cart),
];

impl SuiteReport {
    pub fn new(results: Vec<SettingResult>) -> Self {
        let mut methods: Vec<Method> = results
            .iter()
            .flat_map(|r| r.setting.methods.iter().copied())
            .collect();
        methods.sort();
        methods.dedup();

        let win_rates = WIN_PAIRS
            .iter()
            .filter(|(m, b)| methods.contains(m) && methods.contains(b))
            .map(|&(method, baseline)| {
                let paired: Vec<(f64, f64)> = results
                    .iter()
                    .filter_map(|r| Some((r.mean(method)?, r.mean(baseline)?)))
                    .collect();
                WinRate {
                    method,
                    baseline,
                    wins: paired.iter().filter(|(m, b)| m < b).count(),
                    settings: paired.len(),
                }
            })
            .collect();

        // tasks in first-appearance order
        let mut tasks: Vec<(DgpSpec, f64)> = Vec::new();
        for r in &results {
            let key = (r.setting.dgp, r.setting.c);
            if !tasks.contains(&key) {
                tasks.push(key);
            }
        }
        let in_task = |t: (DgpSpec, f64)| {
            results
                .iter()
                .filter(move |r| r.setting.dgp == t.0 && r.setting.c == t.1)
        };
        let entry = |r: &SettingResult, m: Method| {
            r.method(m).map(|mr| BestEntry {
                method: m,
                mean: mr.mean,
                std: mr.std,
                max_depth: r.setting.max_depth,
                min_leaf_fraction: r.setting.min_leaf_fraction,
            })
        };
        let argmin = |t: &(DgpSpec, f64), m: Method| {
            in_task(*t)
                .filter(|r| r.mean(m).is_some())
                .fold(None::<&SettingResult>, |best, r| match best {
                    Some(b) if b.mean(m).unwrap() <= r.mean(m).unwrap() => Some(b),
                    _ => Some(r),
                })
        };
        let selector = if methods.contains(&Method::Cart) {
            Method::Cart
        } else {
            methods.first().copied().unwrap_or(Method::Cart)
        };
        let best_joint = tasks
            .iter()
            .map(|t| BestRow {
                dgp: t.0,
                c: t.1,
                entries: argmin(t, selector)
                    .map(|r| methods.iter().filter_map(|&m| entry(r, m)).collect())
                    .unwrap_or_default(),
            })
            .collect();
        let best_per_method = tasks
            .iter()
            .map(|t| BestRow {
                dgp: t.0,
                c: t.1,
                entries: methods
                    .iter()
                    .filter_map(|&m| argmin(t, m).and_then(|r| entry(r, m)))
                    .collect(),
            })
            .collect();

        Self {
            results,
            methods,
            win_rates,
            best_joint,
            best_per_method,
        }
    }

    pub fn win_rate(&self, method: Method, baseline: Method) -> Option<&WinRate> {
        self.win_rates
            .iter()
            .find(|w| w.method == method && w.baseline == baseline)
    }

    /// One row per setting × method; MR columns in percent.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "dgp,c,max_depth,min_leaf_fraction,n,replicates,method,mean_mr,std_mr,completed\n",
        );
        for r in &self.results {
            let s = &r.setting;
            for m in &r.methods {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{:.4},{:.4},{}\n",
                    s.dgp.name(),
                    s.c,
                    s.max_depth,
                    s.min_leaf_fraction,
                    s.n,
                    s.replicates,
                    m.method.label(),
                    m.mean,
                    m.std,
                    m.values.len()
                ));
            }
        }
        out
    }

    fn table(&self, rows: &[BestRow], with_config: bool) -> String {
        let mut out = String::from("| DGP | c |");
        for m in &self.methods {
            out.push_str(&format!(" {} |", m.label()));
        }
        out.push_str("\n|---|---|");
        out.push_str(&"---|".repeat(self.methods.len()));
        out.push('\n');
        for row in rows {
            out.push_str(&format!("| {} | {} |", row.dgp.kind.label(), row.c));
            for m in &self.methods {
                match row.entry(*m) {
                    Some(e) if with_config => out.push_str(&format!(
                        " {:.1} ({:.1}) [m={}, ρ={}] |",
                        e.mean, e.std, e.max_depth, e.min_leaf_fraction
                    )),
                    Some(e) => out.push_str(&format!(" {:.1} ({:.1}) |", e.mean, e.std)),
                    None => out.push_str(" – |"),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("# Misclassification rate (%)\n\n");
        out.push_str("## Best configuration per task, chosen by CART\n\n");
        out.push_str(&self.table(&self.best_joint, false));
        out.push_str("\n## Best configuration per task and method\n\n");
        out.push_str(&self.table(&self.best_per_method, true));
        out.push_str("\n## Win rates over all settings\n\n| Method | Baseline | Wins | Settings | Rate |\n|---|---|---|---|---|\n");
        for w in &self.win_rates {
            out.push_str(&format!(
                "| {} | {} | {} | {} | {:.2}% |\n",
                w.method.label(),
                w.baseline.label(),
                w.wins,
                w.settings,
                100.0 * w.rate()
            ));
        }
        out
    }

    pub fn diagnostics(&self) -> Vec<String> {
        self.results
            .iter()
            .flat_map(|r| r.diagnostics.iter().cloned())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseStudyName {
    Pima,
    ForestFire,
}

impl CaseStudyName {
    pub fn slug(self) -> &'static str {
        match self {
            CaseStudyName::Pima => "pima",
            CaseStudyName::ForestFire => "forestfire",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pima" => Some(CaseStudyName::Pima),
            "forestfire" | "forest-fire" | "forestfires" => Some(CaseStudyName::ForestFire),
            _ => None,
        }
    }

    pub fn default_c(self) -> f64 {
        match self {
            CaseStudyName::Pima => 0.6,
            CaseStudyName::ForestFire => 1.0 / 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseStudyConfig {
    pub c: f64,
    pub depth: usize,
    pub min_leaf_fraction: f64,
    pub teacher: ForestConfig,
}

impl CaseStudyConfig {
    pub fn new(c: f64) -> Self {
        Self {
            c,
            depth: 3,
            min_leaf_fraction: 0.01,
            teacher: ForestConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseStudyTree {
    pub method: Method,
    pub tree: Tree,
    pub policy: PolicyReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseStudy {
    pub name: String,
    pub c: f64,
    pub trees: Vec<CaseStudyTree>,
}

pub const CASE_STUDY_METHODS: [Method; 4] =
    [Method::Cart, Method::Mdfs, Method::RfCart, Method::RfMdfs];

/// CART, MDFS and their distilled counterparts on one dataset. The teacher
/// forest is fitted on the full data and its in-sample probabilities are
/// distilled.
pub fn run_case_study(
    name: &str,
    ds: &Dataset,
    config: &CaseStudyConfig,
) -> Result<CaseStudy, TreeError> {
    let forest = fit_forest_with(ds, &config.teacher, Execution::Parallel)?;
    let probs = predict_proba(&forest, ds)?;
    let trees = CASE_STUDY_METHODS
        .iter()
        .map(|&m| {
            let tree = fit_method(m, ds, Some(&probs), config.c, config.depth, config.min_leaf_fraction, SplitCriterion::DEFAULT_LAMBDA)?;
            let policy = policy_report(&tree, config.c);
            Ok(CaseStudyTree { method: m, tree, policy })
        })
        .collect::<Result<Vec<_>, TreeError>>()?;
    Ok(CaseStudy {
        name: name.to_string(),
        c: config.c,
        trees,
    })
}

impl CaseStudy {
    pub fn tree(&self, m: Method) -> Option<&CaseStudyTree> {
        self.trees.iter().find(|t| t.method == m)
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!("# Case study: {} (c = {:.3})\n", self.name, self.c);
        for t in &self.trees {
            out.push_str(&format!("\n## {}\n\n```\n{}\n```\n\n", t.method.label(), t.tree.render()));
            out.push_str("| Targeted subgroup | Value | Samples |\n|---|---|---|\n");
            for leaf in &t.policy.targeted_leaves {
                out.push_str(&format!("| {} | {:.3} | {} |\n", leaf.predicate(), leaf.value, leaf.samples));
            }
            out.push_str(&format!("\nTargeted share of the sample: {:.1}%\n", 100.0 * t.policy.cost));
        }
        out
    }

    /// One row per targeted leaf.
    pub fn policies_csv(&self) -> String {
        let mut out = String::from("method,subgroup,value,samples\n");
        for t in &self.trees {
            for leaf in &t.policy.targeted_leaves {
                out.push_str(&format!(
                    "{},\"{}\",{:.3},{}\n",
                    t.method.label(),
                    leaf.predicate(),
                    leaf.value,
                    leaf.samples
                ));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mr_examples() {
        let eta = [0.2, 0.8, 0.55];
        assert_eq!(mr(&eta, &eta, 0.5).unwrap(), 0.0);
        assert_eq!(mr(&[0.5; 3], &eta, 0.5).unwrap(), 0.0);
        assert_eq!(mr(&[0.9, 0.1], &[0.2, 0.8], 0.5).unwrap(), 1.0);
        assert!(mr(&[0.1], &eta, 0.5).is_err());
    }

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(mean_std(&[3.0]), (3.0, 0.0));
    }

    #[test]
    fn grids() {
        let full = full_grid(0, &Method::DIRECT);
        assert_eq!(full.len(), 288);
        assert!(full.iter().all(|s| s.replicates == 50 && s.n == 5000));
        let smoke = smoke_grid(0, &Method::ALL);
        assert_eq!(smoke.len(), 144);
        assert!(smoke.iter().all(|s| s.replicates == 5));
        assert_eq!(task_grid(DgpKind::Ball.into(), 0.8, 0, &Method::DIRECT).len(), 12);
    }

    fn tiny(methods: &[Method]) -> ExperimentSetting {
        let mut s = ExperimentSetting::new(DgpKind::Ball.into(), 0.7, 3, 0.02);
        s.n = 400;
        s.replicates = 3;
        s.methods = methods.to_vec();
        s.teacher_trees = 5;
        s
    }

    #[test]
    fn setting_runs_and_is_deterministic() {
        let s = tiny(&Method::ALL);
        let a = run_setting(&s);
        let b = run_suite_with(std::slice::from_ref(&s), Execution::Sequential).results.remove(0);
        assert_eq!(a, b);
        assert_eq!(a.methods.len(), 6);
        for m in &a.methods {
            assert_eq!(m.values.len(), 3);
            assert!(m.values.iter().all(|v| (0.0..=100.0).contains(v)));
            assert!(m.std >= 0.0);
        }
        assert!(a.diagnostics.is_empty());
        assert_eq!(a.seeds.len(), 3);
    }

    #[test]
    fn shared_groups_match_isolated_runs() {
        let a = tiny(&Method::DIRECT);
        let mut b = a.clone();
        b.c = 0.6;
        b.max_depth = 2;
        let together = run_suite(&[a.clone(), b.clone()]);
        assert_eq!(together.results[0], run_setting(&a));
        assert_eq!(together.results[1], run_setting(&b));
    }

    #[test]
    fn report_tables() {
        let report = run_suite(&[tiny(&Method::DIRECT)]);
        assert_eq!(report.best_joint.len(), 1);
        assert_eq!(report.win_rates.len(), 3);
        assert_eq!(report.to_csv().lines().count(), 1 + 4);
        let md = report.to_markdown();
        assert!(md.contains("| Ball | 0.7 |"));
        let empty = SuiteReport::new(Vec::new());
        assert_eq!(empty.to_csv().lines().count(), 1);
    }

    #[test]
    fn holdout_changes_scores_only() {
        let mut s = tiny(&[Method::Cart]);
        let train = run_setting(&s);
        s.holdout = true;
        let held = run_setting(&s);
        assert_eq!(train.seeds, held.seeds);
        assert_eq!(held.methods[0].values.len(), 3);
    }

    #[test]
    fn method_names() {
        for m in Method::ALL {
            assert_eq!(Method::parse(m.slug()), Some(m));
            assert_eq!(Method::parse(m.label()), Some(m));
        }
    }

    #[test]
    fn win_rate_counts_strict_improvements() {
        let mk = |cart: f64, mdfs: f64| SettingResult {
            setting: tiny(&[Method::Cart, Method::Mdfs]),
            methods: vec![
                MethodResult { method: Method::Cart, mean: cart, std: 0.0, values: vec![cart] },
                MethodResult { method: Method::Mdfs, mean: mdfs, std: 0.0, values: vec![mdfs] },
            ],
            seeds: vec![],
            diagnostics: vec![],
        };
        let report = SuiteReport::new(vec![mk(5.0, 4.0), mk(5.0, 5.0), mk(5.0, 6.0)]);
        let w = report.win_rate(Method::Mdfs, Method::Cart).unwrap();
        assert_eq!((w.wins, w.settings), (1, 3));
    }
}
