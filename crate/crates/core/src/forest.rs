//! Random-forest classifier used as the distillation teacher.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::parallel::{derive_seed, par_map_with, Execution};
use crate::split::SplitCriterion;
use crate::tree::{GrowParams, Grower, StopRule, TreeError, TreeNode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaxFeatures {
    /// `floor(sqrt(p))`, at least one
    Sqrt,
    All,
    Fixed(usize),
}

impl MaxFeatures {
    pub fn resolve(self, p: usize) -> usize {
        let k = match self {
            MaxFeatures::Sqrt => (p as f64).sqrt().floor() as usize,
            MaxFeatures::All => p,
            MaxFeatures::Fixed(k) => k,
        };
        k.clamp(1, p.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub min_split: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
            min_split: 2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<TreeNode>,
    pub n_features: usize,
}

pub fn fit_forest(ds: &Dataset, config: &ForestConfig) -> Result<Forest, TreeError> {
    fit_forest_with(ds, config, Execution::Parallel)
}

/// Fits `n_trees` trees grown to purity on bootstrap resamples with random
/// feature subsets per split. Tree `t` draws from its own generator seeded by
/// `(seed, t)`, so the forest does not depend on scheduling.
pub fn fit_forest_with(
    ds: &Dataset,
    config: &ForestConfig,
    exec: Execution,
) -> Result<Forest, TreeError> {
    if ds.n_rows() == 0 {
        return Err(TreeError::EmptyDataset);
    }
    if config.n_trees == 0 {
        return Err(TreeError::Config("n_trees must be at least 1".into()));
    }
    if let MaxFeatures::Fixed(k) = config.max_features {
        if k == 0 || k > ds.n_features() {
            return Err(TreeError::Config(format!(
                "max_features {k} outside 1..={}",
                ds.n_features()
            )));
        }
    }
    ds.require_binary()?;
    let n = ds.n_rows();
    let k = config.max_features.resolve(ds.n_features());

    let trees = par_map_with(exec, config.n_trees, |t| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[t as u64]));
        let counts = config.bootstrap.then(|| {
            let mut counts = vec![0u32; n];
            for _ in 0..n {
                counts[rng.random_range(0..n)] += 1;
            }
            counts
        });
        let params = GrowParams {
            max_depth: None,
            min_leaf: 1,
            min_split: config.min_split,
            criterion: SplitCriterion::cart(),
            stop: StopRule::Pure,
            max_features: Some(k),
        };
        Grower::new(ds, ds.response(), ds.response(), params, Some(rng)).grow(counts.as_deref())
    });
    Ok(Forest {
        trees,
        n_features: ds.n_features(),
    })
}

/// Per-row mean of the trees' leaf class-1 fractions.
pub fn predict_proba(forest: &Forest, ds: &Dataset) -> Result<Vec<f64>, TreeError> {
    if forest.n_features != ds.n_features() {
        return Err(TreeError::FeatureMismatch {
            expected: forest.n_features,
            found: ds.n_features(),
        });
    }
    let m = forest.trees.len() as f64;
    Ok((0..ds.n_rows())
        .map(|i| {
            let total: f64 = forest
                .trees
                .iter()
                .map(|t| t.route(|j| ds.value(i, j)))
                .sum();
            (total / m).clamp(0.0, 1.0)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::TrainConfig;
    use crate::tree::{grow_tree, predict, Tree};

    fn sample(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x1: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let x2: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let y = x1
            .iter()
            .zip(&x2)
            .map(|(a, b)| f64::from(u8::from(rng.random::<f64>() < 0.2 + 0.6 * a * b)))
            .collect();
        Dataset::from_columns(vec![x1, x2], y, None).unwrap()
    }

    #[test]
    fn sqrt_rule() {
        assert_eq!(MaxFeatures::Sqrt.resolve(5), 2);
        assert_eq!(MaxFeatures::Sqrt.resolve(8), 2);
        assert_eq!(MaxFeatures::Sqrt.resolve(11), 3);
        assert_eq!(MaxFeatures::Sqrt.resolve(1), 1);
        assert_eq!(MaxFeatures::All.resolve(6), 6);
    }

    #[test]
    fn degenerate_forest_is_pure_cart() {
        let ds = sample(200, 3);
        let cfg = ForestConfig {
            n_trees: 1,
            max_features: MaxFeatures::All,
            bootstrap: false,
            ..ForestConfig::default()
        };
        let forest = fit_forest(&ds, &cfg).unwrap();
        // a single unconstrained CART, depth cap far beyond purity
        let cart = grow_tree(&ds, &TrainConfig::new(32, 1e-9, SplitCriterion::cart())).unwrap();
        assert_eq!(forest.trees[0], cart.root);
        let single = Tree {
            root: forest.trees[0].clone(),
            feature_names: ds.feature_names().to_vec(),
        };
        assert_eq!(predict_proba(&forest, &ds).unwrap(), predict(&single, &ds).unwrap());
        // grown to purity: training data is reproduced exactly when x is unique
        assert_eq!(predict_proba(&forest, &ds).unwrap(), ds.response());
    }

    #[test]
    fn constant_labels() {
        let ds = Dataset::from_columns(vec![vec![1.0, 2.0, 3.0, 4.0]], vec![1.0; 4], None).unwrap();
        let forest = fit_forest(&ds, &ForestConfig { n_trees: 5, ..Default::default() }).unwrap();
        assert!(forest.trees.iter().all(TreeNode::is_leaf));
        assert_eq!(predict_proba(&forest, &ds).unwrap(), vec![1.0; 4]);
    }

    #[test]
    fn hand_built_average() {
        let forest = Forest {
            trees: vec![
                TreeNode::Leaf { value: 0.2, samples: 1 },
                TreeNode::Leaf { value: 0.6, samples: 1 },
            ],
            n_features: 1,
        };
        let ds = Dataset::from_columns(vec![vec![0.0]], vec![0.0], None).unwrap();
        let p = predict_proba(&forest, &ds).unwrap();
        assert!((p[0] - 0.4).abs() < 1e-12);
        let wrong = Dataset::from_columns(vec![vec![0.0], vec![1.0]], vec![0.0], None).unwrap();
        assert!(predict_proba(&forest, &wrong).is_err());
    }

    #[test]
    fn deterministic_and_schedule_free() {
        let ds = sample(300, 11);
        let cfg = ForestConfig { n_trees: 8, seed: 42, ..Default::default() };
        let a = fit_forest_with(&ds, &cfg, Execution::Parallel).unwrap();
        let b = fit_forest_with(&ds, &cfg, Execution::Sequential).unwrap();
        assert_eq!(a, b);
        let c = fit_forest_with(&ds, &ForestConfig { seed: 43, ..cfg }, Execution::Parallel).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn leaves_hold_fractions() {
        let ds = sample(300, 5);
        let forest = fit_forest(&ds, &ForestConfig { n_trees: 4, ..Default::default() }).unwrap();
        for t in &forest.trees {
            for leaf in t.leaves() {
                assert!((0.0..=1.0).contains(&leaf.value()));
            }
        }
    }

    #[test]
    fn config_errors() {
        let ds = sample(20, 1);
        assert!(fit_forest(&ds, &ForestConfig { n_trees: 0, ..Default::default() }).is_err());
        assert!(fit_forest(
            &ds,
            &ForestConfig { max_features: MaxFeatures::Fixed(3), ..Default::default() }
        )
        .is_err());
    }

    #[test]
    fn prediction_equals_average_of_tree_predictions() {
        let ds = sample(150, 9);
        let forest = fit_forest(&ds, &ForestConfig { n_trees: 6, seed: 1, ..Default::default() }).unwrap();
        let probs = predict_proba(&forest, &ds).unwrap();
        for (i, p) in probs.iter().enumerate() {
            let mean = forest
                .trees
                .iter()
                .map(|t| {
                    let single = Tree { root: t.clone(), feature_names: ds.feature_names().to_vec() };
                    predict(&single, &ds).unwrap()[i]
                })
                .sum::<f64>()
                / 6.0;
            assert!((p - mean).abs() < 1e-12);
        }
    }
}
