//! Population-level one-split, one-feature analysis on `[0, 1]`.
//!
//! Integrals of the density `f` and of `η·f` are tabulated once per model
//! with composite Simpson on 10⁵ cells (cells are split at declared
//! breakpoints). Any primitive is then a table lookup plus one Simpson step
//! over the partial cell, which keeps grid searches cheap without losing
//! accuracy.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::parallel::{derive_seed, par_map};
use crate::split::{midpoint, WeightFn, TIE_EPS};

const CELLS: usize = 100_000;
const BISECT_TOL: f64 = 1e-10;
const GOLDEN_TOL: f64 = 1e-10;
const DOMINANCE_GRID: usize = 20_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TheoryError {
    #[error("{what} = {value} is outside its domain")]
    OutOfDomain { what: &'static str, value: f64 },
    #[error("model '{model}': {reason}")]
    InvalidModel { model: String, reason: String },
    #[error("objective is flat; no unique split")]
    FlatObjective,
    #[error("this operation assumes a uniform density")]
    NotUniform,
    #[error("no candidate split inside ({lo}, {hi})")]
    NoCandidates { lo: f64, hi: f64 },
    #[error("sample lengths differ: x has {x}, y has {y}")]
    LengthMismatch { x: usize, y: usize },
}

type Func = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

struct Tables {
    mass: Vec<f64>,
    eta_mass: Vec<f64>,
}

/// Latent probability `η` with a density `f` on `[0, 1]`.
#[derive(Clone)]
pub struct EtaModel {
    name: String,
    eta: Func,
    density: Func,
    uniform: bool,
    breakpoints: Vec<f64>,
    tables: Arc<Tables>,
}

impl fmt::Debug for EtaModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EtaModel")
            .field("name", &self.name)
            .field("uniform", &self.uniform)
            .field("breakpoints", &self.breakpoints)
            .finish()
    }
}

fn simpson(g: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (g(a) + 4.0 * g(0.5 * (a + b)) + g(b))
}

impl EtaModel {
    /// Uniform density. `breakpoints` lists kinks or jumps of `η`.
    pub fn new(
        name: &str,
        eta: impl Fn(f64) -> f64 + Send + Sync + 'static,
        breakpoints: Vec<f64>,
    ) -> Result<Self, TheoryError> {
        Self::build(name, Arc::new(eta), Arc::new(|_| 1.0), true, breakpoints)
    }

    pub fn with_density(
        name: &str,
        eta: impl Fn(f64) -> f64 + Send + Sync + 'static,
        density: impl Fn(f64) -> f64 + Send + Sync + 'static,
        breakpoints: Vec<f64>,
    ) -> Result<Self, TheoryError> {
        Self::build(name, Arc::new(eta), Arc::new(density), false, breakpoints)
    }

    fn build(
        name: &str,
        eta: Func,
        density: Func,
        uniform: bool,
        mut breakpoints: Vec<f64>,
    ) -> Result<Self, TheoryError> {
        let invalid = |reason: String| TheoryError::InvalidModel {
            model: name.to_string(),
            reason,
        };
        breakpoints.retain(|b| *b > 0.0 && *b < 1.0);
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup();
        for i in 0..=2 * CELLS {
            let x = i as f64 / (2 * CELLS) as f64;
            let (e, d) = (eta(x), density(x));
            if !(0.0..=1.0).contains(&e) {
                return Err(invalid(format!("eta({x}) = {e} outside [0,1]")));
            }
            if !(d >= 0.0 && d.is_finite()) {
                return Err(invalid(format!("density({x}) = {d} is not a finite non-negative value")));
            }
        }
        let mut model = Self {
            name: name.to_string(),
            eta,
            density,
            uniform,
            breakpoints,
            tables: Arc::new(Tables { mass: Vec::new(), eta_mass: Vec::new() }),
        };
        let mut mass = Vec::with_capacity(CELLS + 1);
        let mut eta_mass = Vec::with_capacity(CELLS + 1);
        let (mut m, mut em) = (0.0, 0.0);
        mass.push(0.0);
        eta_mass.push(0.0);
        for k in 0..CELLS {
            let (dm, dem) = model.piece(k as f64 / CELLS as f64, (k + 1) as f64 / CELLS as f64);
            m += dm;
            em += dem;
            mass.push(m);
            eta_mass.push(em);
        }
        if (m - 1.0).abs() > 1e-6 {
            return Err(invalid(format!("density integrates to {m}, not 1")));
        }
        model.tables = Arc::new(Tables { mass, eta_mass });
        Ok(model)
    }

    /// `(∫f, ∫ηf)` over `[a, b]`, split at breakpoints.
    fn piece(&self, a: f64, b: f64) -> (f64, f64) {
        let f = |x: f64| (self.density)(x);
        let g = |x: f64| (self.eta)(x) * (self.density)(x);
        let mut lo = a;
        let (mut m, mut em) = (0.0, 0.0);
        let inner = self.breakpoints.iter().filter(|&&p| p > a && p < b);
        for &hi in inner.chain(std::iter::once(&b)) {
            m += simpson(&f, lo, hi);
            em += simpson(&g, lo, hi);
            lo = hi;
        }
        (m, em)
    }

    /// `(F(s), ∫_0^s ηf)`.
    fn primitive(&self, s: f64) -> (f64, f64) {
        let s = s.clamp(0.0, 1.0);
        let k = ((s * CELLS as f64).floor() as usize).min(CELLS - 1);
        let x_k = k as f64 / CELLS as f64;
        let (dm, dem) = if s > x_k { self.piece(x_k, s) } else { (0.0, 0.0) };
        (self.tables.mass[k] + dm, self.tables.eta_mass[k] + dem)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eta(&self, x: f64) -> f64 {
        (self.eta)(x)
    }

    pub fn density(&self, x: f64) -> f64 {
        (self.density)(x)
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    pub fn cdf(&self, s: f64) -> f64 {
        self.primitive(s).0
    }

    /// `∫ η dF` over `[0, 1]`.
    pub fn mean_eta(&self) -> f64 {
        self.tables.eta_mass[CELLS]
    }

    /// `(sin 2πx + 1) / 2`.
    pub fn sine() -> Self {
        Self::new("sine", |x| ((2.0 * std::f64::consts::PI * x).sin() + 1.0) / 2.0, vec![])
            .expect("valid model")
    }

    /// The sine between its peak at 1/4 and trough at 3/4, flat outside.
    /// Monotone decreasing, so each level in (0, 1) is crossed once.
    pub fn capped_sine() -> Self {
        Self::new(
            "capped_sine",
            |x| {
                if x <= 0.25 {
                    1.0
                } else if x >= 0.75 {
                    0.0
                } else {
                    ((2.0 * std::f64::consts::PI * x).sin() + 1.0) / 2.0
                }
            },
            vec![0.25, 0.75],
        )
        .expect("valid model")
    }

    /// `9x / 11`.
    pub fn linear() -> Self {
        Self::new("linear", |x| 9.0 * x / 11.0, vec![]).expect("valid model")
    }

    /// Continuous near-step: 1 left of 0.395, 0 right of 0.405, linear between.
    pub fn step() -> Self {
        Self::new("step", |x| (0.5 - (x - 0.4) / 0.01).clamp(0.0, 1.0), vec![0.395, 0.405])
            .expect("valid model")
    }

    /// `1{x ≤ 0.4}`; discontinuous, used for noiseless estimation checks.
    pub fn hard_step() -> Self {
        Self::new("hard_step", |x| f64::from(u8::from(x <= 0.4)), vec![0.4]).expect("valid model")
    }

    /// Rises from 0.1 to 0.9 at x = 2/3 and falls back to 0.1; crosses any
    /// level in (0.1, 0.9) twice.
    pub fn double_crossing() -> Self {
        Self::new("double_crossing", |x| 0.1 + 0.8 * 6.75 * x * x * (1.0 - x), vec![])
            .expect("valid model")
    }

    /// The five models used for property checks.
    pub fn shipped() -> Vec<Self> {
        vec![
            Self::sine(),
            Self::capped_sine(),
            Self::linear(),
            Self::step(),
            Self::double_crossing(),
        ]
    }

    pub const NAMES: [&'static str; 6] =
        ["sine", "capped_sine", "linear", "step", "hard_step", "double_crossing"];

    pub fn by_name(name: &str) -> Option<Self> {
        Some(match name {
            "sine" => Self::sine(),
            "capped_sine" => Self::capped_sine(),
            "linear" => Self::linear(),
            "step" => Self::step(),
            "hard_step" => Self::hard_step(),
            "double_crossing" => Self::double_crossing(),
            _ => return None,
        })
    }
}

/// `(F(s), μ_L, μ_R)`; means are NaN when a side has no mass.
fn parts(model: &EtaModel, s: f64) -> (f64, f64, f64) {
    let (m, em) = model.primitive(s);
    let total = model.mean_eta();
    (m, em / m, (total - em) / (1.0 - m))
}

fn check_open_unit(what: &'static str, value: f64) -> Result<(), TheoryError> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(TheoryError::OutOfDomain { what, value })
    }
}

pub fn node_means(model: &EtaModel, s: f64) -> Result<(f64, f64), TheoryError> {
    check_open_unit("s", s)?;
    let (m, l, r) = parts(model, s);
    if !(m > 0.0 && m < 1.0) {
        return Err(TheoryError::OutOfDomain { what: "F(s)", value: m });
    }
    Ok((l, r))
}

pub fn g_cart(model: &EtaModel, s: f64) -> f64 {
    let (m, l, r) = parts(model, s);
    m * l * (1.0 - l) + (1.0 - m) * r * (1.0 - r)
}

/// `G^CART + λ[F·W(|μ_L − c|) + (1 − F)·W(|μ_R − c|)]`.
pub fn g_pfs(model: &EtaModel, c: f64, lambda: f64, w: WeightFn, s: f64) -> f64 {
    let (m, l, r) = parts(model, s);
    m * l * (1.0 - l)
        + (1.0 - m) * r * (1.0 - r)
        + lambda * (m * w.weight((l - c).abs()) + (1.0 - m) * w.weight((r - c).abs()))
}

/// `F(s)|μ_L − c| + (1 − F(s))|μ_R − c|`; with uniform X, `F(s) = s`.
pub fn g_star(model: &EtaModel, c: f64, s: f64) -> f64 {
    let (m, l, r) = parts(model, s);
    m * (l - c).abs() + (1.0 - m) * (r - c).abs()
}

/// Misclassification risk of splitting at `s` and labelling each side by
/// whether its mean exceeds `c`. Points with `η = c` count as not above.
pub struct RiskEvaluator<'a> {
    model: &'a EtaModel,
    c: f64,
    above: Vec<(f64, f64)>,
}

impl<'a> RiskEvaluator<'a> {
    pub fn new(model: &'a EtaModel, c: f64) -> Result<Self, TheoryError> {
        check_open_unit("c", c)?;
        Ok(Self {
            model,
            c,
            above: above_intervals(model, c),
        })
    }

    /// Maximal intervals on which `η > c`.
    pub fn above_intervals(&self) -> &[(f64, f64)] {
        &self.above
    }

    fn mass_above(&self, lo: f64, hi: f64) -> f64 {
        self.above
            .iter()
            .map(|&(a, b)| {
                let (a, b) = (a.max(lo), b.min(hi));
                if b > a {
                    self.model.cdf(b) - self.model.cdf(a)
                } else {
                    0.0
                }
            })
            .sum()
    }

    pub fn risk(&self, s: f64) -> Result<f64, TheoryError> {
        let (l, r) = node_means(self.model, s)?;
        let f_s = self.model.cdf(s);
        let (above_l, above_r) = (self.mass_above(0.0, s), self.mass_above(s, 1.0));
        let left = if l > self.c { f_s - above_l } else { above_l };
        let right = if r > self.c { (1.0 - f_s) - above_r } else { above_r };
        Ok((left + right).clamp(0.0, 1.0))
    }
}

fn above_intervals(model: &EtaModel, c: f64) -> Vec<(f64, f64)> {
    let above = |x: f64| model.eta(x) > c;
    let mut out = Vec::new();
    let mut start = above(0.0).then_some(0.0);
    let mut prev_x = 0.0;
    let mut prev = above(0.0);
    for i in 1..=CELLS {
        let x = i as f64 / CELLS as f64;
        let cur = above(x);
        if cur != prev {
            let (mut a, mut b) = (prev_x, x);
            while b - a > BISECT_TOL {
                let m = 0.5 * (a + b);
                if above(m) == prev {
                    a = m;
                } else {
                    b = m;
                }
            }
            let edge = 0.5 * (a + b);
            match start.take() {
                Some(s0) => out.push((s0, edge)),
                None => start = Some(edge),
            }
        }
        prev = cur;
        prev_x = x;
    }
    if let Some(s0) = start {
        out.push((s0, 1.0));
    }
    out
}

/// Points where `η − c` changes sign.
pub fn crossings(model: &EtaModel, c: f64) -> Vec<f64> {
    above_intervals(model, c)
        .into_iter()
        .flat_map(|(a, b)| [a, b])
        .filter(|&x| x > 0.0 && x < 1.0)
        .collect()
}

pub fn risk(model: &EtaModel, c: f64, s: f64) -> Result<f64, TheoryError> {
    RiskEvaluator::new(model, c)?.risk(s)
}

fn golden(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > GOLDEN_TOL {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        }
    }
    0.5 * (a + b)
}

/// Exhaustive grid over `(lo, hi)` followed by golden-section polishing in
/// the bracketing cells. Non-finite values count as +∞.
fn grid_minimize(obj: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<f64, TheoryError> {
    let f = |s: f64| {
        let v = obj(s);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let step = (hi - lo) / CELLS as f64;
    let (mut best_k, mut best) = (0, f64::INFINITY);
    let mut worst = f64::NEG_INFINITY;
    for k in 1..CELLS {
        let v = f(lo + k as f64 * step);
        if v < best - 1e-15 {
            best = v;
            best_k = k;
        }
        if v.is_finite() {
            worst = worst.max(v);
        }
    }
    if best_k == 0 || worst - best <= 1e-13 * (1.0 + best.abs()) {
        return Err(TheoryError::FlatObjective);
    }
    let s_grid = lo + best_k as f64 * step;
    let s_polished = golden(&f, s_grid - step, s_grid + step);
    Ok(if f(s_polished) <= best { s_polished } else { s_grid })
}

pub fn cart_split(model: &EtaModel) -> Result<f64, TheoryError> {
    grid_minimize(|s| g_cart(model, s), 0.0, 1.0)
}

/// `|2η(s) − μ_L(s) − μ_R(s)|`.
pub fn midpoint_residual(model: &EtaModel, s: f64) -> Result<f64, TheoryError> {
    let (l, r) = node_means(model, s)?;
    Ok((2.0 * model.eta(s) - l - r).abs())
}

pub fn pfs_split(model: &EtaModel, c: f64, lambda: f64, w: WeightFn) -> Result<f64, TheoryError> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(TheoryError::OutOfDomain { what: "lambda", value: lambda });
    }
    check_open_unit("c", c)?;
    grid_minimize(|s| g_pfs(model, c, lambda, w, s), 0.0, 1.0)
}

pub fn mdfs_split(model: &EtaModel, c: f64) -> Result<f64, TheoryError> {
    if !model.is_uniform() {
        return Err(TheoryError::NotUniform);
    }
    check_open_unit("c", c)?;
    grid_minimize(|s| -g_star(model, c, s), 0.0, 1.0)
}

/// True when `s_prime` classifies correctly everywhere `s` does (on a fine
/// grid) and additionally somewhere with positive density.
pub fn dominates(model: &EtaModel, c: f64, s: f64, s_prime: f64) -> Result<bool, TheoryError> {
    let (l, r) = node_means(model, s)?;
    let (lp, rp) = node_means(model, s_prime)?;
    let correct = |x: f64, cut: f64, l: f64, r: f64| {
        let targeted = if x <= cut { l > c } else { r > c };
        targeted == (model.eta(x) > c)
    };
    let mut strict = false;
    for i in 0..DOMINANCE_GRID {
        let x = (i as f64 + 0.5) / DOMINANCE_GRID as f64;
        let (a, b) = (correct(x, s, l, r), correct(x, s_prime, lp, rp));
        if a && !b {
            return Ok(false);
        }
        if b && !a && model.density(x) > 0.0 {
            strict = true;
        }
    }
    Ok(strict)
}

/// Sample maximiser of `s|ȳ_L − c| + (1 − s)|ȳ_R − c|` over midpoints of
/// consecutive distinct `x` inside `(ε, 1 − ε)`. Ties keep the smallest `s`.
pub fn mdfs_estimate(x: &[f64], y: &[f64], c: f64, epsilon: f64) -> Result<f64, TheoryError> {
    if x.len() != y.len() {
        return Err(TheoryError::LengthMismatch { x: x.len(), y: y.len() });
    }
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(TheoryError::OutOfDomain { what: "epsilon", value: epsilon });
    }
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let n = idx.len();
    let total: f64 = y.iter().sum();
    let mut left = 0.0;
    let mut best: Option<(f64, f64)> = None;
    for i in 0..n.saturating_sub(1) {
        left += y[idx[i]];
        let (a, b) = (x[idx[i]], x[idx[i + 1]]);
        if a >= b {
            continue;
        }
        let s = midpoint(a, b);
        if s <= epsilon || s >= 1.0 - epsilon {
            continue;
        }
        let n_l = (i + 1) as f64;
        let mean_l = left / n_l;
        let mean_r = (total - left) / (n as f64 - n_l);
        let g = s * (mean_l - c).abs() + (1.0 - s) * (mean_r - c).abs();
        if best.is_none_or(|(_, bg)| g > bg + TIE_EPS) {
            best = Some((s, g));
        }
    }
    best.map(|(s, _)| s).ok_or(TheoryError::NoCandidates {
        lo: epsilon,
        hi: 1.0 - epsilon,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyConfig {
    pub epsilon: f64,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
}

impl Default for ConsistencyConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            n_grid: vec![1_000, 10_000, 100_000],
            replicates: 50,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyRow {
    pub n: usize,
    /// NaN when `η = c` has no single crossing
    pub median_abs_error: f64,
    pub median_risk: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Draws `X ~ U(0,1)`, `Y ~ Bernoulli(η(X))`, estimates the split with
/// [`mdfs_estimate`] and reports median distance to the crossing and median
/// population risk for each sample size.
pub fn consistency_experiment(
    model: &EtaModel,
    c: f64,
    config: &ConsistencyConfig,
) -> Result<Vec<ConsistencyRow>, TheoryError> {
    if !model.is_uniform() {
        return Err(TheoryError::NotUniform);
    }
    let evaluator = RiskEvaluator::new(model, c)?;
    let cross = crossings(model, c);
    let s_star = (cross.len() == 1).then(|| cross[0]);
    config
        .n_grid
        .iter()
        .map(|&n| {
            let runs = par_map(config.replicates, |rep| {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[n as u64, rep as u64]));
                let mut x = Vec::with_capacity(n);
                let mut y = Vec::with_capacity(n);
                for _ in 0..n {
                    let xi: f64 = rng.random();
                    let yi = rng.random::<f64>() < model.eta(xi);
                    x.push(xi);
                    y.push(f64::from(u8::from(yi)));
                }
                let s_hat = mdfs_estimate(&x, &y, c, config.epsilon)?;
                let err = s_star.map_or(f64::NAN, |s| (s_hat - s).abs());
                Ok((err, evaluator.risk(s_hat)?))
            });
            let runs = runs.into_iter().collect::<Result<Vec<_>, TheoryError>>()?;
            Ok(ConsistencyRow {
                n,
                median_abs_error: median(runs.iter().map(|r| r.0).collect()),
                median_risk: median(runs.iter().map(|r| r.1).collect()),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitEvaluation {
    pub s: f64,
    #[serde(rename = "mu_L")]
    pub mu_l: f64,
    #[serde(rename = "mu_R")]
    pub mu_r: f64,
    pub risk: f64,
    pub g_cart: f64,
    pub g_pfs: f64,
    pub g_star: f64,
}

/// Objective curves at `points` equally spaced splits `i / (points + 1)`.
pub fn evaluation_grid(
    model: &EtaModel,
    c: f64,
    lambda: f64,
    w: WeightFn,
    points: usize,
) -> Result<Vec<SplitEvaluation>, TheoryError> {
    let evaluator = RiskEvaluator::new(model, c)?;
    (1..=points)
        .map(|i| {
            let s = i as f64 / (points + 1) as f64;
            let (mu_l, mu_r) = node_means(model, s)?;
            Ok(SplitEvaluation {
                s,
                mu_l,
                mu_r,
                risk: evaluator.risk(s)?,
                g_cart: g_cart(model, s),
                g_pfs: g_pfs(model, c, lambda, w, s),
                g_star: g_star(model, c, s),
            })
        })
        .collect()
}

pub fn evaluations_csv(rows: &[SplitEvaluation]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(["s", "mu_L", "mu_R", "risk", "g_cart", "g_pfs", "g_star"])
            .expect("in-memory write");
    }
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8")
}
