//! Exact path-dependent TreeSHAP attributions for tree ensembles, plus the
//! global and per-class importance aggregations.
//!
//! Attributions are in logit space. For every sample and class,
//! `phi0 + sum(phi) == predict_logits` within 1e-6 (additivity).

use serde::Serialize;

use crate::gbt::{DecisionTree, TreeEnsemble};
use crate::{Error, Result};

/// Per-sample attribution: K classes x M features of Shapley values plus
/// per-class baselines.
#[derive(Debug, Clone, Serialize)]
pub struct Attribution {
    /// phi[k][j]: contribution of feature j to the class-k logit.
    pub phi: Vec<Vec<f64>>,
    /// Baseline logit per class (base score + tree expectations).
    pub phi0: Vec<f64>,
    pub sample_ref: usize,
}

/// Exact TreeSHAP for one feature row, summed over rounds per class.
pub fn tree_shap(model: &TreeEnsemble, x: &[f64], sample_ref: usize) -> Result<Attribution> {
    model.check_row(x)?;
    let k = model.num_outputs();
    let m = model.num_features;
    let mut phi = vec![vec![0.0f64; m]; k];
    let mut phi0 = model.base_scores.clone();
    for round in &model.trees {
        for (class, tree) in round.iter().enumerate() {
            phi0[class] += tree.expected_value();
            shap_single_tree(tree, x, &mut phi[class]);
        }
    }
    Ok(Attribution {
        phi,
        phi0,
        sample_ref,
    })
}

#[derive(Debug, Clone, Default)]
struct PathItem {
    feature: Option<usize>,
    zero_fraction: f64,
    one_fraction: f64,
    pweight: f64,
}

fn tree_depth(tree: &DecisionTree, idx: usize) -> usize {
    let node = &tree.nodes[idx];
    if node.is_leaf {
        return 0;
    }
    1 + tree_depth(tree, node.left).max(tree_depth(tree, node.right))
}

fn shap_single_tree(tree: &DecisionTree, x: &[f64], phi: &mut [f64]) {
    let max_depth = tree_depth(tree, 0) + 2;
    let mut path = vec![PathItem::default(); max_depth * (max_depth + 1) / 2];
    recurse(tree, x, phi, 0, &mut path, 0, 1.0, 1.0, None);
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    tree: &DecisionTree,
    x: &[f64],
    phi: &mut [f64],
    node_index: usize,
    path: &mut [PathItem],
    mut unique_depth: usize,
    parent_zero_fraction: f64,
    parent_one_fraction: f64,
    parent_feature: Option<usize>,
) {
    extend_path(
        path,
        unique_depth,
        parent_zero_fraction,
        parent_one_fraction,
        parent_feature,
    );
    let node = &tree.nodes[node_index];
    if node.is_leaf {
        for i in 1..=unique_depth {
            let weight = unwound_path_sum(path, unique_depth, i);
            let item = &path[i];
            phi[item.feature.expect("interior path items carry a feature")] +=
                weight * (item.one_fraction - item.zero_fraction) * node.leaf_value;
        }
        return;
    }

    let (hot, cold) = if x[node.split_feature] < node.threshold {
        (node.left, node.right)
    } else {
        (node.right, node.left)
    };
    let hot_zero_fraction = tree.nodes[hot].cover / node.cover;
    let cold_zero_fraction = tree.nodes[cold].cover / node.cover;
    let mut incoming_zero_fraction = 1.0;
    let mut incoming_one_fraction = 1.0;
    // a feature already on the path is unwound and its fractions folded in
    if let Some(i) = (1..=unique_depth).find(|&i| path[i].feature == Some(node.split_feature)) {
        incoming_zero_fraction = path[i].zero_fraction;
        incoming_one_fraction = path[i].one_fraction;
        unwind_path(path, unique_depth, i);
        unique_depth -= 1;
    }

    let feature = Some(node.split_feature);
    let (parent_path, child_path) = path.split_at_mut(unique_depth + 1);
    child_path[..parent_path.len()].clone_from_slice(parent_path);
    recurse(
        tree,
        x,
        phi,
        hot,
        child_path,
        unique_depth + 1,
        hot_zero_fraction * incoming_zero_fraction,
        incoming_one_fraction,
        feature,
    );
    child_path[..parent_path.len()].clone_from_slice(parent_path);
    recurse(
        tree,
        x,
        phi,
        cold,
        child_path,
        unique_depth + 1,
        cold_zero_fraction * incoming_zero_fraction,
        0.0,
        feature,
    );
}

fn extend_path(
    path: &mut [PathItem],
    unique_depth: usize,
    zero_fraction: f64,
    one_fraction: f64,
    feature: Option<usize>,
) {
    path[unique_depth] = PathItem {
        feature,
        zero_fraction,
        one_fraction,
        pweight: if unique_depth == 0 { 1.0 } else { 0.0 },
    };
    for i in (0..unique_depth).rev() {
        path[i + 1].pweight +=
            one_fraction * path[i].pweight * (i + 1) as f64 / (unique_depth + 1) as f64;
        path[i].pweight =
            zero_fraction * path[i].pweight * (unique_depth - i) as f64 / (unique_depth + 1) as f64;
    }
}

fn unwind_path(path: &mut [PathItem], unique_depth: usize, path_index: usize) {
    let one_fraction = path[path_index].one_fraction;
    let zero_fraction = path[path_index].zero_fraction;
    let mut next_one_portion = path[unique_depth].pweight;
    for i in (0..unique_depth).rev() {
        if one_fraction != 0.0 {
            let tmp = path[i].pweight;
            path[i].pweight =
                next_one_portion * (unique_depth + 1) as f64 / ((i + 1) as f64 * one_fraction);
            next_one_portion = tmp
                - path[i].pweight * zero_fraction * (unique_depth - i) as f64
                    / (unique_depth + 1) as f64;
        } else {
            path[i].pweight = path[i].pweight * (unique_depth + 1) as f64
                / (zero_fraction * (unique_depth - i) as f64);
        }
    }
    for i in path_index..unique_depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
}

fn unwound_path_sum(path: &[PathItem], unique_depth: usize, path_index: usize) -> f64 {
    let one_fraction = path[path_index].one_fraction;
    let zero_fraction = path[path_index].zero_fraction;
    let mut next_one_portion = path[unique_depth].pweight;
    let mut total = 0.0;
    if one_fraction != 0.0 {
        for i in (0..unique_depth).rev() {
            let tmp = next_one_portion / ((i + 1) as f64 * one_fraction);
            total += tmp;
            next_one_portion = path[i].pweight - tmp * zero_fraction * (unique_depth - i) as f64;
        }
    } else {
        for i in (0..unique_depth).rev() {
            total += path[i].pweight / (zero_fraction * (unique_depth - i) as f64);
        }
    }
    total * (unique_depth + 1) as f64
}

/// Normalized mean-|phi| shares per feature.
#[derive(Debug, Clone, Serialize)]
pub struct ImportanceSummary {
    pub mean_abs: Vec<f64>,
    /// mean_abs normalized to sum 1.
    pub shares: Vec<f64>,
}

fn summarize(values: impl Iterator<Item = Vec<f64>>, m: usize) -> Result<ImportanceSummary> {
    let mut acc = vec![0.0f64; m];
    let mut n = 0usize;
    for row in values {
        for (a, v) in acc.iter_mut().zip(&row) {
            *a += v.abs();
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::Shap("no attributions given".into()));
    }
    for a in acc.iter_mut() {
        *a /= n as f64;
    }
    let total: f64 = acc.iter().sum();
    if total <= 0.0 {
        return Err(Error::Shap("no signal: all attributions are zero".into()));
    }
    let shares = acc.iter().map(|a| a / total).collect();
    Ok(ImportanceSummary {
        mean_abs: acc,
        shares,
    })
}

/// Mean |phi| over all samples and classes, normalized to shares.
pub fn global_importance(attributions: &[Attribution]) -> Result<ImportanceSummary> {
    let m = attributions
        .first()
        .map(|a| a.phi[0].len())
        .ok_or_else(|| Error::Shap("no attributions given".into()))?;
    summarize(attributions.iter().flat_map(|a| a.phi.iter().cloned()), m)
}

/// Mean |phi| restricted to one class.
pub fn class_importance(attributions: &[Attribution], class: usize) -> Result<ImportanceSummary> {
    let m = attributions
        .first()
        .map(|a| a.phi[0].len())
        .ok_or_else(|| Error::Shap("no attributions given".into()))?;
    if attributions.iter().any(|a| class >= a.phi.len()) {
        return Err(Error::Shap(format!("class {class} out of range")));
    }
    summarize(attributions.iter().map(|a| a.phi[class].clone()), m)
}

/// (feature value, phi) pairs for one feature and class, sorted by value
/// with ties in stable sample order.
pub fn dependence_table(
    attributions: &[Attribution],
    feature_values: &[Vec<f64>],
    feature: usize,
    class: usize,
) -> Vec<(f64, f64)> {
    let mut rows: Vec<(usize, f64, f64)> = attributions
        .iter()
        .zip(feature_values)
        .map(|(a, x)| (a.sample_ref, x[feature], a.phi[class][feature]))
        .collect();
    rows.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    rows.into_iter().map(|(_, v, p)| (v, p)).collect()
}

/// Independent brute-force Shapley reference over the path-dependent
/// conditional-expectation value function. Exponential in the feature
/// count; only for verification on small models.
pub mod oracle {
    use crate::gbt::{DecisionTree, TreeEnsemble};

    /// v(S): expected tree output when features outside S are marginalized
    /// by cover weights and features in S follow x.
    fn subset_expectation(tree: &DecisionTree, x: &[f64], subset: u64, idx: usize) -> f64 {
        let node = &tree.nodes[idx];
        if node.is_leaf {
            return node.leaf_value;
        }
        if subset & (1 << node.split_feature) != 0 {
            let next = if x[node.split_feature] < node.threshold {
                node.left
            } else {
                node.right
            };
            subset_expectation(tree, x, subset, next)
        } else {
            let l = &tree.nodes[node.left];
            let r = &tree.nodes[node.right];
            (l.cover * subset_expectation(tree, x, subset, node.left)
                + r.cover * subset_expectation(tree, x, subset, node.right))
                / node.cover
        }
    }

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|i| i as f64).product()
    }

    /// Exact Shapley values of one tree by subset enumeration.
    pub fn shapley_single_tree(tree: &DecisionTree, x: &[f64], num_features: usize) -> Vec<f64> {
        assert!(num_features <= 20, "oracle is exponential in features");
        let m = num_features;
        let mut phi = vec![0.0f64; m];
        for j in 0..m {
            for subset in 0u64..(1 << m) {
                if subset & (1 << j) != 0 {
                    continue;
                }
                let s = subset.count_ones() as usize;
                let weight = factorial(s) * factorial(m - s - 1) / factorial(m);
                let with = subset_expectation(tree, x, subset | (1 << j), 0);
                let without = subset_expectation(tree, x, subset, 0);
                phi[j] += weight * (with - without);
            }
        }
        phi
    }

    /// Exact Shapley values per class, summed over an ensemble's trees.
    pub fn shapley_ensemble(model: &TreeEnsemble, x: &[f64]) -> Vec<Vec<f64>> {
        let k = model.num_outputs();
        let m = model.num_features;
        let mut phi = vec![vec![0.0f64; m]; k];
        for round in &model.trees {
            for (class, tree) in round.iter().enumerate() {
                let t = shapley_single_tree(tree, x, m);
                for (acc, v) in phi[class].iter_mut().zip(t) {
                    *acc += v;
                }
            }
        }
        phi
    }

    /// Random small ensemble for oracle-equivalence suites: single-output
    /// trees with cover-consistent internal nodes.
    pub fn random_small_ensemble(
        rng: &mut rand_chacha::ChaCha8Rng,
        num_features: usize,
        max_depth: usize,
        max_trees: usize,
    ) -> TreeEnsemble {
        use crate::gbt::{Objective, TrainConfig};
        use rand::Rng;
        let n_trees = rng.gen_range(1..=max_trees);
        let trees: Vec<Vec<DecisionTree>> = (0..n_trees)
            .map(|_| {
                let depth = rng.gen_range(1..=max_depth);
                vec![random_tree(rng, num_features, depth)]
            })
            .collect();
        TreeEnsemble {
            objective: Objective::SquaredError,
            base_scores: vec![rng.gen_range(-1.0..1.0)],
            trees,
            config: TrainConfig::default(),
            num_features,
        }
    }

    pub fn random_tree(rng: &mut rand_chacha::ChaCha8Rng, m: usize, depth: usize) -> DecisionTree {
        use crate::gbt::TreeNode;
        use rand::Rng;
        fn grow(
            rng: &mut rand_chacha::ChaCha8Rng,
            nodes: &mut Vec<TreeNode>,
            m: usize,
            depth: usize,
        ) -> (usize, f64) {
            if depth == 0 || rng.gen_bool(0.25) {
                let cover = rng.gen_range(0.5..10.0);
                nodes.push(TreeNode {
                    split_feature: 0,
                    threshold: 0.0,
                    left: 0,
                    right: 0,
                    leaf_value: rng.gen_range(-2.0..2.0),
                    cover,
                    is_leaf: true,
                });
                return (nodes.len() - 1, cover);
            }
            let idx = nodes.len();
            nodes.push(TreeNode {
                split_feature: rng.gen_range(0..m),
                threshold: rng.gen_range(0.0..1.0),
                left: 0,
                right: 0,
                leaf_value: 0.0,
                cover: 0.0,
                is_leaf: false,
            });
            let (l, cl) = grow(rng, nodes, m, depth - 1);
            let (r, cr) = grow(rng, nodes, m, depth - 1);
            nodes[idx].left = l;
            nodes[idx].right = r;
            nodes[idx].cover = cl + cr;
            (idx, cl + cr)
        }
        let mut nodes = Vec::new();
        grow(rng, &mut nodes, m, depth);
        DecisionTree { nodes }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbt::{fit_multiclass, Objective, TrainConfig, TreeEnsemble, TreeNode};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn stump(
        feature: usize,
        threshold: f64,
        a: f64,
        b: f64,
        cover_l: f64,
        cover_r: f64,
    ) -> DecisionTree {
        DecisionTree {
            nodes: vec![
                TreeNode {
                    split_feature: feature,
                    threshold,
                    left: 1,
                    right: 2,
                    leaf_value: 0.0,
                    cover: cover_l + cover_r,
                    is_leaf: false,
                },
                TreeNode {
                    split_feature: 0,
                    threshold: 0.0,
                    left: 0,
                    right: 0,
                    leaf_value: a,
                    cover: cover_l,
                    is_leaf: true,
                },
                TreeNode {
                    split_feature: 0,
                    threshold: 0.0,
                    left: 0,
                    right: 0,
                    leaf_value: b,
                    cover: cover_r,
                    is_leaf: true,
                },
            ],
        }
    }

    fn single_tree_model(tree: DecisionTree, m: usize) -> TreeEnsemble {
        TreeEnsemble {
            objective: Objective::SquaredError,
            base_scores: vec![0.0],
            trees: vec![vec![tree]],
            config: TrainConfig::default(),
            num_features: m,
        }
    }

    #[test]
    fn stump_equal_covers_closed_form() {
        // stump on feature 1, leaves {a, b}, equal covers; x lands in b:
        // phi_1 = (b - a) / 2, phi0 = (a + b) / 2
        let (a, b) = (-1.0, 3.0);
        let model = single_tree_model(stump(1, 0.5, a, b, 10.0, 10.0), 3);
        let x = [0.0, 0.9, 0.0];
        let attr = tree_shap(&model, &x, 0).unwrap();
        assert!((attr.phi[0][1] - (b - a) / 2.0).abs() < 1e-12);
        assert!(attr.phi[0][0].abs() < 1e-12);
        assert!(attr.phi[0][2].abs() < 1e-12);
        assert!((attr.phi0[0] - (a + b) / 2.0).abs() < 1e-12);
        // brute-force agreement
        let oracle = oracle::shapley_ensemble(&model, &x);
        assert!((oracle[0][1] - attr.phi[0][1]).abs() < 1e-12);
    }

    #[test]
    fn constant_tree_all_zero() {
        let tree = DecisionTree {
            nodes: vec![TreeNode {
                split_feature: 0,
                threshold: 0.0,
                left: 0,
                right: 0,
                leaf_value: 2.5,
                cover: 7.0,
                is_leaf: true,
            }],
        };
        let model = single_tree_model(tree, 2);
        let attr = tree_shap(&model, &[1.0, 2.0], 0).unwrap();
        assert!(attr.phi[0].iter().all(|&v| v == 0.0));
        assert!((attr.phi0[0] - 2.5).abs() < 1e-15);
    }

    #[test]
    fn duplicated_tree_doubles_phi() {
        let tree = stump(0, 0.5, -1.0, 1.0, 4.0, 6.0);
        let single = single_tree_model(tree.clone(), 2);
        let double = TreeEnsemble {
            trees: vec![vec![tree.clone()], vec![tree]],
            ..single.clone()
        };
        let x = [0.2, 0.0];
        let a = tree_shap(&single, &x, 0).unwrap();
        let b = tree_shap(&double, &x, 0).unwrap();
        assert!((b.phi[0][0] - 2.0 * a.phi[0][0]).abs() < 1e-12);
    }

    use super::oracle::random_tree;

    #[test]
    fn matches_brute_force_on_random_ensembles() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        for _trial in 0..200 {
            let m = rng.gen_range(1..=5usize);
            let n_trees = rng.gen_range(1..=3usize);
            let trees: Vec<Vec<DecisionTree>> = (0..n_trees)
                .map(|_| {
                    let depth = rng.gen_range(1..=3usize);
                    vec![random_tree(&mut rng, m, depth)]
                })
                .collect();
            let model = TreeEnsemble {
                objective: Objective::SquaredError,
                base_scores: vec![rng.gen_range(-1.0..1.0)],
                trees,
                config: TrainConfig::default(),
                num_features: m,
            };
            let x: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..1.0)).collect();
            let fast = tree_shap(&model, &x, 0).unwrap();
            let slow = oracle::shapley_ensemble(&model, &x);
            for j in 0..m {
                assert!(
                    (fast.phi[0][j] - slow[0][j]).abs() < 1e-6,
                    "feature {j}: fast {} vs oracle {}",
                    fast.phi[0][j],
                    slow[0][j]
                );
            }
            // additivity
            let z = model.predict_logits(&x).unwrap();
            let total = fast.phi0[0] + fast.phi[0].iter().sum::<f64>();
            assert!((total - z[0]).abs() < 1e-6);
        }
    }

    #[test]
    fn additivity_on_trained_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let xs: Vec<Vec<f64>> = (0..100)
            .map(|_| (0..4).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let ys: Vec<usize> = xs
            .iter()
            .map(|x| ((x[0] + x[1] > 1.0) as usize) + ((x[2] > 0.8) as usize))
            .collect();
        let cfg = TrainConfig {
            rounds: 20,
            max_depth: 4,
            min_child_weight: 0.0,
            ..TrainConfig::default()
        };
        let model = fit_multiclass(&xs, &ys, 3, &cfg).unwrap();
        for (i, x) in xs.iter().enumerate().take(20) {
            let attr = tree_shap(&model, x, i).unwrap();
            let z = model.predict_logits(x).unwrap();
            for k in 0..3 {
                let total = attr.phi0[k] + attr.phi[k].iter().sum::<f64>();
                assert!(
                    (total - z[k]).abs() < 1e-6,
                    "class {k}: {total} vs {}",
                    z[k]
                );
            }
        }
    }

    #[test]
    fn dummy_feature_gets_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        // feature 2 never used by any split
        let trees: Vec<Vec<DecisionTree>> =
            (0..3).map(|_| vec![random_tree(&mut rng, 2, 3)]).collect();
        let model = TreeEnsemble {
            objective: Objective::SquaredError,
            base_scores: vec![0.0],
            trees,
            config: TrainConfig::default(),
            num_features: 3,
        };
        let attr = tree_shap(&model, &[0.3, 0.6, 0.9], 0).unwrap();
        assert_eq!(attr.phi[0][2], 0.0);
    }

    #[test]
    fn symmetric_duplicate_features_equal_phi() {
        // two stumps with identical structure on features 0 and 1
        let t0 = stump(0, 0.5, -1.0, 1.0, 5.0, 5.0);
        let t1 = stump(1, 0.5, -1.0, 1.0, 5.0, 5.0);
        let model = TreeEnsemble {
            objective: Objective::SquaredError,
            base_scores: vec![0.0],
            trees: vec![vec![t0], vec![t1]],
            config: TrainConfig::default(),
            num_features: 2,
        };
        let attr = tree_shap(&model, &[0.8, 0.8], 0).unwrap();
        assert!((attr.phi[0][0] - attr.phi[0][1]).abs() < 1e-12);
    }

    #[test]
    fn importance_aggregations() {
        let attr = |phi: Vec<Vec<f64>>| Attribution {
            phi,
            phi0: vec![0.0],
            sample_ref: 0,
        };
        // single feature -> share 1.0
        let single = vec![attr(vec![vec![0.7]]), attr(vec![vec![-0.2]])];
        let g = global_importance(&single).unwrap();
        assert!((g.shares[0] - 1.0).abs() < 1e-12);

        // two features with equal |phi| -> 0.5 / 0.5
        let even = vec![attr(vec![vec![0.5, -0.5]]), attr(vec![vec![-0.3, 0.3]])];
        let g = global_importance(&even).unwrap();
        assert!((g.shares[0] - 0.5).abs() < 1e-12);
        assert!((g.shares[1] - 0.5).abs() < 1e-12);
        assert!((g.shares.iter().sum::<f64>() - 1.0).abs() < 1e-9);

        // all-zero -> error
        let zero = vec![attr(vec![vec![0.0, 0.0]])];
        assert!(global_importance(&zero).is_err());
    }

    #[test]
    fn class_importance_cases() {
        let a = Attribution {
            phi: vec![vec![0.4, 0.0], vec![0.0, 0.0]],
            phi0: vec![0.0, 0.0],
            sample_ref: 0,
        };
        // class 1 all zero -> error for that class only
        assert!(class_importance(&[a.clone()], 0).is_ok());
        assert!(class_importance(&[a.clone()], 1).is_err());

        // K=1 equals global
        let b = Attribution {
            phi: vec![vec![0.2, 0.6]],
            phi0: vec![0.0],
            sample_ref: 0,
        };
        let g = global_importance(&[b.clone()]).unwrap();
        let c = class_importance(&[b], 0).unwrap();
        assert_eq!(g.shares, c.shares);
    }

    #[test]
    fn class_importance_order_invariant() {
        let mk = |s: usize, v: f64| Attribution {
            phi: vec![vec![v, 1.0 - v]],
            phi0: vec![0.0],
            sample_ref: s,
        };
        let fwd = vec![mk(0, 0.1), mk(1, 0.7), mk(2, 0.4)];
        let mut rev = fwd.clone();
        rev.reverse();
        let a = class_importance(&fwd, 0).unwrap().shares;
        let b = class_importance(&rev, 0).unwrap().shares;
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
    }

    #[test]
    fn dependence_table_ordering() {
        let mk = |s: usize, phi: f64| Attribution {
            phi: vec![vec![phi]],
            phi0: vec![0.0],
            sample_ref: s,
        };
        let attrs = vec![mk(0, 0.1), mk(1, 0.2), mk(2, 0.3)];
        let xs = vec![vec![5.0], vec![1.0], vec![5.0]];
        let table = dependence_table(&attrs, &xs, 0, 0);
        assert_eq!(table.len(), 3);
        assert_eq!(table[0], (1.0, 0.2));
        // tie at 5.0 resolved by sample id: sample 0 before sample 2
        assert_eq!(table[1], (5.0, 0.1));
        assert_eq!(table[2], (5.0, 0.3));

        assert!(dependence_table(&[], &[], 0, 0).is_empty());
    }
}
