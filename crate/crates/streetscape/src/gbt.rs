//! Regularized gradient-boosted decision trees with exact greedy split
//! search. Serves the five-class accident model (softmax objective) and
//! the propensity-score treatment models (classifier and regressor).
//!
//! Training is deterministic: splits are searched over sorted unique
//! values and ties break on lowest feature index, then lowest threshold.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrainConfig {
    pub rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub l2_lambda: f64,
    pub min_child_weight: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            rounds: 200,
            max_depth: 6,
            learning_rate: 0.1,
            l2_lambda: 1.0,
            min_child_weight: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::Train("rounds must be >= 1".into()));
        }
        if !(0.0 < self.learning_rate && self.learning_rate <= 1.0) {
            return Err(Error::Train(format!(
                "learning_rate must be in (0,1], got {}",
                self.learning_rate
            )));
        }
        if self.max_depth == 0 {
            return Err(Error::Train("max_depth must be >= 1".into()));
        }
        if self.l2_lambda < 0.0 || self.min_child_weight < 0.0 {
            return Err(Error::Train(
                "l2_lambda and min_child_weight must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TreeNode {
    pub split_feature: usize,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
    pub leaf_value: f64,
    /// Summed hessian weight of the training rows routed through this node.
    pub cover: f64,
    pub is_leaf: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
}

impl DecisionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut idx = 0usize;
        loop {
            let node = &self.nodes[idx];
            if node.is_leaf {
                return node.leaf_value;
            }
            idx = if x[node.split_feature] < node.threshold {
                node.left
            } else {
                node.right
            };
        }
    }

    /// Cover-weighted expected leaf value of the whole tree.
    pub fn expected_value(&self) -> f64 {
        self.expected_value_at(0)
    }

    pub fn expected_value_at(&self, idx: usize) -> f64 {
        let node = &self.nodes[idx];
        if node.is_leaf {
            return node.leaf_value;
        }
        let l = &self.nodes[node.left];
        let r = &self.nodes[node.right];
        (l.cover * self.expected_value_at(node.left) + r.cover * self.expected_value_at(node.right))
            / node.cover
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub enum Objective {
    /// K-class softmax probabilities.
    MulticlassSoftprob {
        k: usize,
    },
    SquaredError,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TreeEnsemble {
    pub objective: Objective,
    /// Per-class initial logit (log class prior) or the target mean.
    pub base_scores: Vec<f64>,
    /// trees[round][class]; the inner vec has K entries (1 for regression).
    pub trees: Vec<Vec<DecisionTree>>,
    pub config: TrainConfig,
    pub num_features: usize,
}

impl TreeEnsemble {
    pub fn num_outputs(&self) -> usize {
        self.base_scores.len()
    }

    pub fn check_row(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.num_features {
            return Err(Error::FeatureCount {
                expected: self.num_features,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// z_k(x) = base_k + sum over rounds of tree_k(x).
    pub fn predict_logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_row(x)?;
        let mut z = self.base_scores.clone();
        for round in &self.trees {
            for (k, tree) in round.iter().enumerate() {
                z[k] += tree.predict(x);
            }
        }
        Ok(z)
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax_probabilities(&self.predict_logits(x)?))
    }

    pub fn predict_class(&self, x: &[f64]) -> Result<usize> {
        let z = self.predict_logits(x)?;
        Ok(argmax(&z))
    }

    /// Scalar prediction for regression ensembles.
    pub fn predict_value(&self, x: &[f64]) -> Result<f64> {
        self.check_row(x)?;
        let mut v = self.base_scores[0];
        for round in &self.trees {
            v += round[0].predict(x);
        }
        Ok(v)
    }

    /// Mean softmax cross-entropy on (features, labels) after each round;
    /// entry 0 is the base-score-only loss.
    pub fn staged_log_loss(&self, features: &[Vec<f64>], labels: &[usize]) -> Vec<f64> {
        let n = features.len();
        let k = self.num_outputs();
        let mut logits: Vec<Vec<f64>> = features.iter().map(|_| self.base_scores.clone()).collect();
        let loss = |logits: &[Vec<f64>]| -> f64 {
            let mut total = 0.0;
            for (z, &y) in logits.iter().zip(labels) {
                let p = softmax_probabilities(z);
                total -= p[y].max(1e-300).ln();
            }
            total / n as f64
        };
        let mut out = vec![loss(&logits)];
        for round in &self.trees {
            for (i, x) in features.iter().enumerate() {
                for kk in 0..k {
                    logits[i][kk] += round[kk].predict(x);
                }
            }
            out.push(loss(&logits));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = ModelFile {
            schema_version: MODEL_SCHEMA_VERSION,
            model: self.clone(),
        };
        let text = serde_json::to_string(&file)?;
        std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let file: ModelFile = serde_json::from_str(&text)?;
        if file.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::Train(format!(
                "unsupported model schema version {}",
                file.schema_version
            )));
        }
        Ok(file.model)
    }
}

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    schema_version: u32,
    model: TreeEnsemble,
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax.
pub fn softmax_probabilities(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn validate_features(features: &[Vec<f64>], num_features: usize) -> Result<()> {
    for (i, row) in features.iter().enumerate() {
        if row.len() != num_features {
            return Err(Error::FeatureCount {
                expected: num_features,
                got: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Train(format!(
                "row {i} contains a missing or non-finite value; impute upstream"
            )));
        }
    }
    Ok(())
}

/// Five-class (or K-class) softprob boosting on cross-entropy with
/// second-order gradients.
pub fn fit_multiclass(
    features: &[Vec<f64>],
    labels: &[usize],
    num_classes: usize,
    cfg: &TrainConfig,
) -> Result<TreeEnsemble> {
    cfg.validate()?;
    if features.is_empty() || features.len() != labels.len() {
        return Err(Error::Train(
            "features and labels must be non-empty and aligned".into(),
        ));
    }
    let num_features = features[0].len();
    validate_features(features, num_features)?;
    let n = features.len();
    let mut counts = vec![0usize; num_classes];
    for &y in labels {
        if y >= num_classes {
            return Err(Error::Train(format!(
                "label {y} out of range 0..{num_classes}"
            )));
        }
        counts[y] += 1;
    }
    let present = counts.iter().filter(|&&c| c > 0).count();
    if present < 2 {
        return Err(Error::Train("need at least 2 classes present".into()));
    }
    // log priors; absent classes get a strongly negative base logit
    let base_scores: Vec<f64> = counts
        .iter()
        .map(|&c| {
            if c == 0 {
                (1.0 / (n as f64 * num_classes as f64)).ln()
            } else {
                (c as f64 / n as f64).ln()
            }
        })
        .collect();

    let sorted = presort(features, num_features);
    let mut logits: Vec<Vec<f64>> = vec![base_scores.clone(); n];
    let mut trees: Vec<Vec<DecisionTree>> = Vec::with_capacity(cfg.rounds);
    let mut grad = vec![0.0f64; n];
    let mut hess = vec![0.0f64; n];
    for _round in 0..cfg.rounds {
        let probs: Vec<Vec<f64>> = logits.iter().map(|z| softmax_probabilities(z)).collect();
        let mut round_trees = Vec::with_capacity(num_classes);
        for k in 0..num_classes {
            for i in 0..n {
                let p = probs[i][k];
                grad[i] = p - if labels[i] == k { 1.0 } else { 0.0 };
                hess[i] = (p * (1.0 - p)).max(1e-16);
            }
            let tree = build_tree(features, &sorted, &grad, &hess, cfg);
            for (i, x) in features.iter().enumerate() {
                logits[i][k] += tree.predict(x);
            }
            round_trees.push(tree);
        }
        trees.push(round_trees);
    }
    Ok(TreeEnsemble {
        objective: Objective::MulticlassSoftprob { k: num_classes },
        base_scores,
        trees,
        config: cfg.clone(),
        num_features,
    })
}

/// Squared-error boosting; base score is the target mean.
pub fn fit_regressor(
    features: &[Vec<f64>],
    targets: &[f64],
    cfg: &TrainConfig,
) -> Result<TreeEnsemble> {
    cfg.validate()?;
    if features.is_empty() || features.len() != targets.len() {
        return Err(Error::Train(
            "features and targets must be non-empty and aligned".into(),
        ));
    }
    let num_features = features[0].len();
    validate_features(features, num_features)?;
    if targets.iter().any(|v| !v.is_finite()) {
        return Err(Error::Train("non-finite regression target".into()));
    }
    let n = features.len();
    let base = targets.iter().sum::<f64>() / n as f64;
    let sorted = presort(features, num_features);
    let mut preds = vec![base; n];
    let mut trees = Vec::with_capacity(cfg.rounds);
    let mut grad = vec![0.0f64; n];
    let hess = vec![1.0f64; n];
    for _round in 0..cfg.rounds {
        for i in 0..n {
            grad[i] = preds[i] - targets[i];
        }
        let tree = build_tree(features, &sorted, &grad, &hess, cfg);
        for (i, x) in features.iter().enumerate() {
            preds[i] += tree.predict(x);
        }
        trees.push(vec![tree]);
    }
    Ok(TreeEnsemble {
        objective: Objective::SquaredError,
        base_scores: vec![base],
        trees,
        config: cfg.clone(),
        num_features,
    })
}

/// Row indices sorted by feature value (ties by index), one list per feature.
fn presort(features: &[Vec<f64>], num_features: usize) -> Vec<Vec<u32>> {
    (0..num_features)
        .map(|j| {
            let mut idx: Vec<u32> = (0..features.len() as u32).collect();
            idx.sort_by(|&a, &b| {
                features[a as usize][j]
                    .total_cmp(&features[b as usize][j])
                    .then(a.cmp(&b))
            });
            idx
        })
        .collect()
}

struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
}

fn build_tree(
    features: &[Vec<f64>],
    sorted: &[Vec<u32>],
    grad: &[f64],
    hess: &[f64],
    cfg: &TrainConfig,
) -> DecisionTree {
    let mut nodes = Vec::new();
    build_node(features, sorted, grad, hess, cfg, 0, &mut nodes);
    DecisionTree { nodes }
}

/// Recursively grow a node from per-feature sorted row lists; returns the
/// node index.
fn build_node(
    features: &[Vec<f64>],
    sorted: &[Vec<u32>],
    grad: &[f64],
    hess: &[f64],
    cfg: &TrainConfig,
    depth: usize,
    nodes: &mut Vec<TreeNode>,
) -> usize {
    let rows = &sorted[0];
    let g_total: f64 = rows.iter().map(|&i| grad[i as usize]).sum();
    let h_total: f64 = rows.iter().map(|&i| hess[i as usize]).sum();

    let make_leaf = |nodes: &mut Vec<TreeNode>| -> usize {
        let value = -g_total / (h_total + cfg.l2_lambda) * cfg.learning_rate;
        nodes.push(TreeNode {
            split_feature: 0,
            threshold: 0.0,
            left: 0,
            right: 0,
            leaf_value: value,
            cover: h_total,
            is_leaf: true,
        });
        nodes.len() - 1
    };

    if depth >= cfg.max_depth || rows.len() < 2 {
        return make_leaf(nodes);
    }

    let parent_score = g_total * g_total / (h_total + cfg.l2_lambda);
    let mut best: Option<BestSplit> = None;
    for (j, order) in sorted.iter().enumerate() {
        let mut g_left = 0.0;
        let mut h_left = 0.0;
        for w in 0..order.len() - 1 {
            let i = order[w] as usize;
            g_left += grad[i];
            h_left += hess[i];
            let v_here = features[i][j];
            let v_next = features[order[w + 1] as usize][j];
            if v_next <= v_here {
                continue;
            }
            let h_right = h_total - h_left;
            if h_left < cfg.min_child_weight || h_right < cfg.min_child_weight {
                continue;
            }
            let g_right = g_total - g_left;
            let gain = g_left * g_left / (h_left + cfg.l2_lambda)
                + g_right * g_right / (h_right + cfg.l2_lambda)
                - parent_score;
            // strict > keeps the first (lowest feature, lowest threshold) on ties
            if gain > 1e-12 && best.as_ref().map_or(true, |b| gain > b.gain) {
                best = Some(BestSplit {
                    gain,
                    feature: j,
                    threshold: 0.5 * (v_here + v_next),
                });
            }
        }
    }

    let Some(best) = best else {
        return make_leaf(nodes);
    };

    // stable partition of every per-feature order
    let mut left_sorted = Vec::with_capacity(sorted.len());
    let mut right_sorted = Vec::with_capacity(sorted.len());
    for order in sorted {
        let mut l = Vec::new();
        let mut r = Vec::new();
        for &i in order {
            if features[i as usize][best.feature] < best.threshold {
                l.push(i);
            } else {
                r.push(i);
            }
        }
        left_sorted.push(l);
        right_sorted.push(r);
    }

    let node_idx = nodes.len();
    nodes.push(TreeNode {
        split_feature: best.feature,
        threshold: best.threshold,
        left: 0,
        right: 0,
        leaf_value: 0.0,
        cover: h_total,
        is_leaf: false,
    });
    let left = build_node(features, &left_sorted, grad, hess, cfg, depth + 1, nodes);
    let right = build_node(features, &right_sorted, grad, hess, cfg, depth + 1, nodes);
    nodes[node_idx].left = left;
    nodes[node_idx].right = right;
    node_idx
}

/// Accuracy, macro-F1 and the confusion matrix (rows = true class).
#[derive(Debug, Clone, Serialize)]
pub struct ClassifierEval {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub confusion: Vec<Vec<usize>>,
}

pub fn evaluate_classifier(
    model: &TreeEnsemble,
    features: &[Vec<f64>],
    labels: &[usize],
) -> Result<ClassifierEval> {
    if features.is_empty() {
        return Err(Error::Train("empty test set".into()));
    }
    let k = model.num_outputs();
    let mut confusion = vec![vec![0usize; k]; k];
    let mut correct = 0usize;
    for (x, &y) in features.iter().zip(labels) {
        let pred = model.predict_class(x)?;
        confusion[y][pred] += 1;
        if pred == y {
            correct += 1;
        }
    }
    let mut f1_sum = 0.0;
    for c in 0..k {
        let tp = confusion[c][c] as f64;
        let fp: f64 = (0..k)
            .filter(|&r| r != c)
            .map(|r| confusion[r][c] as f64)
            .sum();
        let fn_: f64 = (0..k)
            .filter(|&p| p != c)
            .map(|p| confusion[c][p] as f64)
            .sum();
        let denom = 2.0 * tp + fp + fn_;
        f1_sum += if denom > 0.0 { 2.0 * tp / denom } else { 0.0 };
    }
    Ok(ClassifierEval {
        accuracy: correct as f64 / features.len() as f64,
        macro_f1: f1_sum / k as f64,
        confusion,
    })
}
