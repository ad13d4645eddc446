use finalsplit::dgp::{self, DgpKind, DgpSpec};
use finalsplit::experiments::mr;
use finalsplit::io::{dump_csv, load_csv, CsvSchema};
use finalsplit::parallel::{par_map_with, Execution};
use finalsplit::theory::{self, EtaModel};
use finalsplit::{
    fit_forest_with, grow_tree, grow_tree_kd, policy_report, predict, predict_proba, CriterionKind, Dataset,
    ForestConfig, SplitCriterion, TrainConfig, Tree, TreeNode,
};
use proptest::prelude::*;

/// Small datasets with many duplicate feature values.
fn dataset(binary: bool) -> impl Strategy<Value = Dataset> {
    (4usize..120, 1usize..4, 2u32..12).prop_flat_map(move |(n, p, levels)| {
        let cols = prop::collection::vec(prop::collection::vec(0..levels, n), p);
        let ys = if binary {
            prop::collection::vec(prop_oneof![Just(0.0), Just(1.0)], n).boxed()
        } else {
            prop::collection::vec(0.0..=1.0f64, n).boxed()
        };
        (cols, ys).prop_map(|(cols, y)| {
            let cols = cols.into_iter().map(|c| c.into_iter().map(f64::from).collect()).collect();
            Dataset::from_columns(cols, y, None).unwrap()
        })
    })
}

fn kind() -> impl Strategy<Value = CriterionKind> {
    prop_oneof![Just(CriterionKind::Pfs), Just(CriterionKind::Mdfs), Just(CriterionKind::Wefs)]
}

/// Walks the tree with the row's values and returns the reached leaf.
fn leaf_of<'a>(node: &'a TreeNode, ds: &Dataset, i: usize) -> &'a TreeNode {
    match node {
        TreeNode::Leaf { .. } => node,
        TreeNode::Internal { feature_index, threshold, left, right, .. } => {
            if ds.value(i, *feature_index) <= *threshold {
                leaf_of(left, ds, i)
            } else {
                leaf_of(right, ds, i)
            }
        }
    }
}

fn internal_nodes(node: &TreeNode) -> Vec<&TreeNode> {
    match node {
        TreeNode::Leaf { .. } => vec![],
        TreeNode::Internal { left, right, .. } => {
            let mut v = vec![node];
            v.extend(internal_nodes(left));
            v.extend(internal_nodes(right));
            v
        }
    }
}

/// Same structure, except that final splits (both children leaves) may move
/// their threshold on the same feature.
fn same_above_final_level(cart: &TreeNode, other: &TreeNode) -> Result<(), String> {
    match (cart, other) {
        (TreeNode::Leaf { samples: a, .. }, TreeNode::Leaf { samples: b, .. }) if a == b => Ok(()),
        (
            TreeNode::Internal { feature_index: f1, threshold: t1, left: l1, right: r1, .. },
            TreeNode::Internal { feature_index: f2, threshold: t2, left: l2, right: r2, .. },
        ) => {
            if f1 != f2 {
                return Err(format!("feature {f1} vs {f2}"));
            }
            if l1.is_leaf() && r1.is_leaf() {
                return if l2.is_leaf() && r2.is_leaf() { Ok(()) } else { Err("final split grew children".into()) };
            }
            if t1 != t2 {
                return Err(format!("non-final threshold {t1} vs {t2}"));
            }
            same_above_final_level(l1, l2)?;
            same_above_final_level(r1, r2)
        }
        _ => Err("shape differs".into()),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn internal_value_is_weighted_child_mean(ds in dataset(true), depth in 1usize..5, rho in 0.001f64..0.2) {
        let tree = grow_tree(&ds, &TrainConfig::new(depth, rho, SplitCriterion::cart())).unwrap();
        for node in internal_nodes(&tree.root) {
            let TreeNode::Internal { value, samples, left, right, .. } = node else { unreachable!() };
            let recombined = (left.samples() as f64 * left.value() + right.samples() as f64 * right.value())
                / *samples as f64;
            prop_assert!((recombined - value).abs() < 1e-9);
            prop_assert_eq!(left.samples() + right.samples(), *samples);
        }
    }

    #[test]
    fn only_final_splits_differ_from_cart(
        ds in dataset(true),
        depth in 1usize..5,
        rho in 0.001f64..0.15,
        kind in kind(),
        c in 0.55f64..0.9,
    ) {
        let cart = grow_tree(&ds, &TrainConfig::new(depth, rho, SplitCriterion::cart())).unwrap();
        let other = grow_tree(&ds, &TrainConfig::new(depth, rho, SplitCriterion::of_kind(kind, c))).unwrap();
        prop_assert_eq!(same_above_final_level(&cart.root, &other.root), Ok(()));
    }

    #[test]
    fn leaves_respect_min_leaf_size(ds in dataset(true), depth in 1usize..6, rho in 0.001f64..0.3, kind in kind()) {
        let cfg = TrainConfig::new(depth, rho, SplitCriterion::of_kind(kind, 0.7));
        let tree = grow_tree(&ds, &cfg).unwrap();
        let min_leaf = cfg.min_leaf_size(ds.n_rows());
        if !tree.root.is_leaf() {
            for leaf in tree.root.leaves() {
                prop_assert!(leaf.samples() >= min_leaf, "{} < {}", leaf.samples(), min_leaf);
            }
        }
        prop_assert!(tree.root.depth() <= depth);
    }

    #[test]
    fn predictions_come_from_the_rows_partition(ds in dataset(false), depth in 1usize..5, kind in kind()) {
        // soft responses exercise the distillation path
        let binary: Vec<f64> = ds.response().iter().map(|&p| f64::from(u8::from(p > 0.5))).collect();
        let labelled = ds.with_response(binary).unwrap();
        let tree = grow_tree_kd(&labelled, ds.response(), &TrainConfig::new(depth, 0.02, SplitCriterion::of_kind(kind, 0.6))).unwrap();
        let preds = predict(&tree, &labelled).unwrap();
        let leaves = tree.root.leaves();
        for leaf in leaves {
            let rows: Vec<usize> = (0..labelled.n_rows())
                .filter(|&i| std::ptr::eq(leaf_of(&tree.root, &labelled, i), leaf))
                .collect();
            prop_assert_eq!(rows.len(), leaf.samples());
            let mean = rows.iter().map(|&i| ds.response()[i]).sum::<f64>() / rows.len() as f64;
            prop_assert!((mean - leaf.value()).abs() < 1e-9);
            for &i in &rows {
                prop_assert_eq!(preds[i], leaf.value());
            }
        }
    }

    #[test]
    fn policy_cost_is_a_fraction_and_falls_with_c(ds in dataset(true), depth in 1usize..5, a in 0.01f64..0.99, b in 0.01f64..0.99) {
        let tree = grow_tree(&ds, &TrainConfig::new(depth, 0.02, SplitCriterion::cart())).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let p_lo = policy_report(&tree, lo);
        let p_hi = policy_report(&tree, hi);
        prop_assert!((0.0..=1.0).contains(&p_lo.cost));
        prop_assert!(p_hi.cost <= p_lo.cost);
        for leaf in &p_hi.targeted_leaves {
            prop_assert!(leaf.value > hi);
        }
    }

    #[test]
    fn json_round_trip(ds in dataset(true), depth in 1usize..4) {
        let tree = grow_tree(&ds, &TrainConfig::new(depth, 0.01, SplitCriterion::mdfs(0.6))).unwrap();
        let back = Tree::from_json(&tree.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, tree);
    }

    #[test]
    fn mr_is_a_symmetric_fraction(
        pairs in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..100),
        c in 0.05f64..0.95,
    ) {
        let (p, e): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let m = mr(&p, &e, c).unwrap();
        prop_assert!((0.0..=1.0).contains(&m));
        prop_assert_eq!(m, mr(&e, &p, c).unwrap());
        prop_assert_eq!(mr(&e, &e, c).unwrap(), 0.0);
    }

    #[test]
    fn total_mean_is_recovered(s in 0.001f64..0.999, which in 0usize..5) {
        let model = &EtaModel::shipped()[which];
        let (l, r) = theory::node_means(model, s).unwrap();
        let f = model.cdf(s);
        prop_assert!((f * l + (1.0 - f) * r - model.mean_eta()).abs() < 1e-7);
        prop_assert!(theory::g_star(model, 0.6, s) >= 0.0);
    }

    #[test]
    fn mdfs_split_has_least_risk(s in 0.001f64..0.999, c in 0.1f64..0.8) {
        // the linear model crosses every c below 9/11 exactly once
        let model = EtaModel::linear();
        let best = theory::mdfs_split(&model, c).unwrap();
        let r_best = theory::risk(&model, c, best).unwrap();
        let r_s = theory::risk(&model, c, s).unwrap();
        prop_assert!(r_best <= r_s + 1e-6);
        prop_assert!((0.0..=1.0).contains(&r_s));
    }

    #[test]
    fn csv_round_trip(ds in dataset(false)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        dump_csv(&ds, &path).unwrap();
        let names: Vec<&str> = ds.feature_names().iter().map(String::as_str).collect();
        let back = load_csv(&path, &CsvSchema::numeric(&names, "y")).unwrap();
        prop_assert_eq!(back.columns(), ds.columns());
        prop_assert_eq!(back.response(), ds.response());
    }

    #[test]
    fn par_map_matches_sequential(n in 0usize..300, k in 1u64..1000) {
        let f = |i: usize| (i as u64).wrapping_mul(k) ^ 0x9e37;
        prop_assert_eq!(par_map_with(Execution::Parallel, n, f), par_map_with(Execution::Sequential, n, f));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn forest_probabilities_are_schedule_free(ds in dataset(true), seed in any::<u64>()) {
        let cfg = ForestConfig { n_trees: 6, seed, ..ForestConfig::default() };
        let a = fit_forest_with(&ds, &cfg, Execution::Parallel).unwrap();
        let b = fit_forest_with(&ds, &cfg, Execution::Sequential).unwrap();
        prop_assert_eq!(&a, &b);
        for p in predict_proba(&a, &ds).unwrap() {
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn synthetic_samples_are_reproducible(idx in 0usize..8, n in 1usize..200, seed in any::<u64>()) {
        let spec = DgpSpec::from(DgpKind::ALL[idx]);
        let a = dgp::sample(&spec, n, seed);
        let b = dgp::sample(&spec, n, seed);
        prop_assert_eq!(dgp::sample_csv(&a), dgp::sample_csv(&b));
        let eta = a.dataset.eta_true().unwrap();
        for i in 0..n {
            let x: Vec<f64> = (0..spec.n_features()).map(|j| a.dataset.value(i, j)).collect();
            prop_assert_eq!(eta[i], dgp::sigmoid(spec.f(&x) - spec.center()));
            prop_assert!(a.dataset.response()[i] == 0.0 || a.dataset.response()[i] == 1.0);
        }
    }
}

#[test]
fn labels_track_eta_at_scale() {
    for kind in DgpKind::ALL {
        let s = dgp::sample(&kind.into(), 100_000, 17);
        let n = s.dataset.n_rows() as f64;
        let y = s.dataset.response().iter().sum::<f64>() / n;
        let eta = s.dataset.eta_true().unwrap().iter().sum::<f64>() / n;
        assert!((y - eta).abs() <= 3.0 * (0.25 / n).sqrt(), "{}: {y} vs {eta}", kind.name());
    }
}

#[test]
fn centering_is_unbiased_on_fresh_draws() {
    let mut specs: Vec<DgpSpec> = DgpKind::ALL.iter().map(|&k| k.into()).collect();
    specs.push(DgpSpec { kind: DgpKind::Poly2, poly2_uses_x4: true });
    for spec in specs {
        // independent of the reserved centering seed
        let s = dgp::sample(&spec, 1_000_000, 99);
        let fs: Vec<f64> = (0..s.dataset.n_rows())
            .map(|i| {
                let x: Vec<f64> = (0..spec.n_features()).map(|j| s.dataset.value(i, j)).collect();
                spec.f(&x) - spec.center()
            })
            .collect();
        let n = fs.len() as f64;
        let mean = fs.iter().sum::<f64>() / n;
        let sd = (fs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(mean.abs() <= 3.0 * sd / n.sqrt(), "{}: {mean}", spec.name());
    }
}
