//! The five traditional classifiers: logistic regression, CART decision
//! tree, k-nearest neighbours, Gaussian naive Bayes and a linear SVM.
//!
//! All of them train on a normalized `[n, d]` feature matrix with labels in
//! `{0, 1}` and predict through [`ClassicModel::predict`]. Gradient-trained
//! models use full-batch descent from zero weights, so training is
//! deterministic and independent of row order.
//!
//! Tie rules: a logistic probability of exactly 0.5 and an SVM score of
//! exactly 0 predict class 1; a k-NN vote tie takes the nearest neighbour's
//! class; a naive-Bayes posterior tie predicts class 0; a tree leaf with equal
//! class counts predicts class 1.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::exec::{map_ordered, Execution};
use crate::tensor::{dot, NumArray};
use crate::{Error, Result};

/// Variance floor applied to every per-class feature variance.
pub const GNB_VARIANCE_FLOOR: f64 = 1e-9;

/// Hyperparameters shared by the classic trainers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub k: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            epochs: 300,
            l2: 1e-3,
            k: 1,
            max_depth: 5,
            min_leaf: 2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Param(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            ));
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad(format!("l2 must be >= 0, got {}", self.l2));
        }
        if self.k == 0 || self.max_depth == 0 || self.min_leaf == 0 {
            return bad("k, max_depth and min_leaf must all be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassicKind {
    Logreg,
    Dtree,
    Knn,
    Gnb,
    Svm,
}

/// Weights and bias of a linear decision function `w . x + b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        class: u8,
        gini: f64,
        samples: usize,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        gini: f64,
        samples: usize,
    },
}

/// Binary tree stored as an arena; node 0 is the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
    pub n_features: usize,
    pub max_depth: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub features: NumArray,
    pub labels: Vec<u8>,
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    /// Indexed by class.
    pub priors: [f64; 2],
    pub means: [Vec<f64>; 2],
    pub variances: [Vec<f64>; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassicModel {
    Logreg(LinearModel),
    Dtree(DecisionTree),
    Knn(KnnModel),
    Gnb(GaussianNb),
    Svm(LinearModel),
}

fn check_training(x: &NumArray, y: &[u8]) -> Result<()> {
    x.expect_rank(2, "training")?;
    if x.nrows() != y.len() {
        return Err(Error::Shape(format!(
            "{} training rows but {} labels",
            x.nrows(),
            y.len()
        )));
    }
    if y.iter().any(|&l| l > 1) {
        return Err(Error::Contract("training labels must be 0 or 1".into()));
    }
    if !x.all_finite() {
        return Err(Error::Numeric(
            "training features contain NaN or Inf".into(),
        ));
    }
    Ok(())
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Value and gradient of the mean negative log-likelihood plus
/// `(l2 / 2) * ||w||^2`. The bias is not regularized.
pub fn logreg_objective(
    model: &LinearModel,
    x: &NumArray,
    y: &[u8],
    l2: f64,
) -> (f64, Vec<f64>, f64) {
    let n = x.nrows() as f64;
    let mut loss = 0.0;
    let mut grad_w = vec![0.0; model.weights.len()];
    let mut grad_b = 0.0;
    for (row, &label) in x.rows().zip(y) {
        let z = dot(&model.weights, row) + model.bias;
        let t = f64::from(label);
        loss += softplus(z) - t * z;
        let err = sigmoid(z) - t;
        for (g, &xi) in grad_w.iter_mut().zip(row) {
            *g += err * xi;
        }
        grad_b += err;
    }
    let reg: f64 = model.weights.iter().map(|w| w * w).sum();
    let loss = loss / n + 0.5 * l2 * reg;
    for (g, &w) in grad_w.iter_mut().zip(&model.weights) {
        *g = *g / n + l2 * w;
    }
    (loss, grad_w, grad_b / n)
}

/// Value and subgradient of `(l2 / 2) * ||w||^2 + mean(max(0, 1 - y (w . x + b)))`
/// with `y` in `{-1, +1}`. At a margin of exactly 1 the hinge contributes no
/// subgradient.
pub fn svm_objective(model: &LinearModel, x: &NumArray, y: &[u8], l2: f64) -> (f64, Vec<f64>, f64) {
    let n = x.nrows() as f64;
    let mut hinge = 0.0;
    let mut grad_w = vec![0.0; model.weights.len()];
    let mut grad_b = 0.0;
    for (row, &label) in x.rows().zip(y) {
        let t = if label == 1 { 1.0 } else { -1.0 };
        let margin = t * (dot(&model.weights, row) + model.bias);
        if margin < 1.0 {
            hinge += 1.0 - margin;
            for (g, &xi) in grad_w.iter_mut().zip(row) {
                *g -= t * xi;
            }
            grad_b -= t;
        }
    }
    let reg: f64 = model.weights.iter().map(|w| w * w).sum();
    let value = 0.5 * l2 * reg + hinge / n;
    for (g, &w) in grad_w.iter_mut().zip(&model.weights) {
        *g = *g / n + l2 * w;
    }
    (value, grad_w, grad_b / n)
}

type Objective = fn(&LinearModel, &NumArray, &[u8], f64) -> (f64, Vec<f64>, f64);

fn gradient_descent(
    x: &NumArray,
    y: &[u8],
    cfg: &TrainConfig,
    objective: Objective,
) -> Result<LinearModel> {
    check_training(x, y)?;
    cfg.validate()?;
    let mut model = LinearModel {
        weights: vec![0.0; x.ncols()],
        bias: 0.0,
    };
    for epoch in 0..cfg.epochs {
        let (loss, grad_w, grad_b) = objective(&model, x, y, cfg.l2);
        if !loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                learning_rate: cfg.learning_rate,
            });
        }
        for (w, g) in model.weights.iter_mut().zip(&grad_w) {
            *w -= cfg.learning_rate * g;
        }
        model.bias -= cfg.learning_rate * grad_b;
    }
    if !model.bias.is_finite() || model.weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Divergence {
            epoch: cfg.epochs,
            learning_rate: cfg.learning_rate,
        });
    }
    Ok(model)
}

pub fn train_logreg(x: &NumArray, y: &[u8], cfg: &TrainConfig) -> Result<ClassicModel> {
    gradient_descent(x, y, cfg, logreg_objective).map(ClassicModel::Logreg)
}

pub fn train_svm(x: &NumArray, y: &[u8], cfg: &TrainConfig) -> Result<ClassicModel> {
    gradient_descent(x, y, cfg, svm_objective).map(ClassicModel::Svm)
}

/// Gini impurity `1 - p0^2 - p1^2` of a node with the given class counts.
pub fn gini(count0: usize, count1: usize) -> f64 {
    let n = (count0 + count1) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let (p0, p1) = (count0 as f64 / n, count1 as f64 / n);
    1.0 - p0 * p0 - p1 * p1
}

/// Best split of the rows in `indices`: `(feature, threshold, weighted gini)`.
///
/// Candidate thresholds are midpoints of consecutive distinct sorted values.
/// Ties within 1e-12 keep the earlier candidate, which means the lowest
/// feature index and then the lowest threshold.
fn best_split(
    x: &NumArray,
    y: &[u8],
    indices: &[usize],
    min_leaf: usize,
) -> Option<(usize, f64, f64)> {
    let n = indices.len();
    let total_ones = indices.iter().filter(|&&i| y[i] == 1).count();
    let mut best: Option<(usize, f64, f64)> = None;
    let mut sorted = indices.to_vec();
    for feature in 0..x.ncols() {
        let value = |i: usize| x.row(i)[feature];
        sorted.sort_by(|&a, &b| value(a).total_cmp(&value(b)));
        let mut left_ones = 0;
        for pos in 0..n - 1 {
            left_ones += usize::from(y[sorted[pos]] == 1);
            let (lo, hi) = (value(sorted[pos]), value(sorted[pos + 1]));
            if lo == hi {
                continue;
            }
            let n_left = pos + 1;
            let n_right = n - n_left;
            if n_left < min_leaf || n_right < min_leaf {
                continue;
            }
            let right_ones = total_ones - left_ones;
            let weighted = (n_left as f64 * gini(n_left - left_ones, left_ones)
                + n_right as f64 * gini(n_right - right_ones, right_ones))
                / n as f64;
            if best.is_none_or(|(_, _, b)| weighted < b - 1e-12) {
                best = Some((feature, lo + (hi - lo) / 2.0, weighted));
            }
        }
    }
    best
}

struct TreeBuilder<'a> {
    x: &'a NumArray,
    y: &'a [u8],
    max_depth: usize,
    min_leaf: usize,
    nodes: Vec<TreeNode>,
}

impl TreeBuilder<'_> {
    fn grow(&mut self, indices: Vec<usize>, depth: usize) -> usize {
        let ones = indices.iter().filter(|&&i| self.y[i] == 1).count();
        let zeros = indices.len() - ones;
        let node_gini = gini(zeros, ones);
        let id = self.nodes.len();
        let leaf = TreeNode::Leaf {
            class: u8::from(ones >= zeros),
            gini: node_gini,
            samples: indices.len(),
        };
        self.nodes.push(leaf.clone());

        let splittable =
            ones > 0 && zeros > 0 && depth < self.max_depth && indices.len() >= 2 * self.min_leaf;
        let split = if splittable {
            best_split(self.x, self.y, &indices, self.min_leaf)
        } else {
            None
        };
        if let Some((feature, threshold, _)) = split {
            let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
                .iter()
                .partition(|&&i| self.x.row(i)[feature] <= threshold);
            let left = self.grow(left_idx, depth + 1);
            let right = self.grow(right_idx, depth + 1);
            self.nodes[id] = TreeNode::Split {
                feature,
                threshold,
                left,
                right,
                gini: node_gini,
                samples: indices.len(),
            };
        }
        id
    }
}

/// Greedy CART induction minimizing weighted Gini impurity.
///
/// A node becomes a leaf when it is pure, sits at `max_depth`, holds fewer
/// than `2 * min_leaf` rows, or has no split leaving `min_leaf` rows on each
/// side.
pub fn train_dtree(x: &NumArray, y: &[u8], cfg: &TrainConfig) -> Result<ClassicModel> {
    check_training(x, y)?;
    cfg.validate()?;
    if y.is_empty() {
        return Err(Error::Shape("cannot grow a tree on zero rows".into()));
    }
    let mut builder = TreeBuilder {
        x,
        y,
        max_depth: cfg.max_depth,
        min_leaf: cfg.min_leaf,
        nodes: Vec::new(),
    };
    builder.grow((0..y.len()).collect(), 0);
    Ok(ClassicModel::Dtree(DecisionTree {
        nodes: builder.nodes,
        n_features: x.ncols(),
        max_depth: cfg.max_depth,
    }))
}

impl DecisionTree {
    pub fn predict_row(&self, row: &[f64]) -> u8 {
        let mut node = 0;
        loop {
            match self.nodes[node] {
                TreeNode::Leaf { class, .. } => return class,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if row[feature] <= threshold {
                        left
                    } else {
                        right
                    }
                }
            }
        }
    }

    /// Index of the leaf a row lands in.
    pub fn leaf_of(&self, row: &[f64]) -> usize {
        let mut node = 0;
        while let TreeNode::Split {
            feature,
            threshold,
            left,
            right,
            ..
        } = self.nodes[node]
        {
            node = if row[feature] <= threshold {
                left
            } else {
                right
            };
        }
        node
    }

    /// `(feature, threshold)` of the root, if the root was split.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes.first()? {
            TreeNode::Split {
                feature, threshold, ..
            } => Some((*feature, *threshold)),
            TreeNode::Leaf { .. } => None,
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + walk(nodes, left).max(walk(nodes, right))
                }
            }
        }
        walk(&self.nodes, 0)
    }
}

pub fn train_knn(x: &NumArray, y: &[u8], cfg: &TrainConfig) -> Result<ClassicModel> {
    check_training(x, y)?;
    if cfg.k == 0 || cfg.k > y.len() {
        return Err(Error::Param(format!(
            "k must be in 1..={}, got {}",
            y.len(),
            cfg.k
        )));
    }
    Ok(ClassicModel::Knn(KnnModel {
        features: x.clone(),
        labels: y.to_vec(),
        k: cfg.k,
    }))
}

fn by_distance(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

impl KnnModel {
    /// Majority vote of the `k` nearest training rows by Euclidean distance;
    /// equal distances are ordered by training row index.
    pub fn predict_row(&self, query: &[f64]) -> u8 {
        let mut dist: Vec<(f64, usize)> = self
            .features
            .rows()
            .enumerate()
            .map(|(i, r)| {
                let d2 = r
                    .iter()
                    .zip(query)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>();
                (d2, i)
            })
            .collect();
        let k = self.k;
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, by_distance);
            dist.truncate(k);
        }
        let ones = dist.iter().filter(|&&(_, i)| self.labels[i] == 1).count();
        match (2 * ones).cmp(&k) {
            Ordering::Greater => 1,
            Ordering::Less => 0,
            Ordering::Equal => {
                let nearest = dist
                    .iter()
                    .min_by(|a, b| by_distance(a, b))
                    .expect("k >= 1");
                self.labels[nearest.1]
            }
        }
    }
}

pub fn train_gnb(x: &NumArray, y: &[u8], cfg: &TrainConfig) -> Result<ClassicModel> {
    check_training(x, y)?;
    let _ = cfg;
    let d = x.ncols();
    let n = y.len();
    if n == 0 {
        return Err(Error::Shape("naive Bayes needs at least one row".into()));
    }
    let mut counts = [0usize; 2];
    let mut sums = [vec![0.0; d], vec![0.0; d]];
    for (row, &label) in x.rows().zip(y) {
        let c = usize::from(label);
        counts[c] += 1;
        for (s, &v) in sums[c].iter_mut().zip(row) {
            *s += v;
        }
    }
    let means = [0, 1].map(|c| {
        sums[c]
            .iter()
            .map(|s| {
                if counts[c] > 0 {
                    s / counts[c] as f64
                } else {
                    0.0
                }
            })
            .collect::<Vec<f64>>()
    });
    let mut sq = [vec![0.0; d], vec![0.0; d]];
    for (row, &label) in x.rows().zip(y) {
        let c = usize::from(label);
        for ((s, &v), m) in sq[c].iter_mut().zip(row).zip(&means[c]) {
            *s += (v - m) * (v - m);
        }
    }
    let variances = [0, 1].map(|c| {
        sq[c]
            .iter()
            .map(|s| {
                let var = if counts[c] > 0 {
                    s / counts[c] as f64
                } else {
                    1.0
                };
                var.max(GNB_VARIANCE_FLOOR)
            })
            .collect::<Vec<f64>>()
    });
    Ok(ClassicModel::Gnb(GaussianNb {
        priors: counts.map(|c| c as f64 / n as f64),
        means,
        variances,
    }))
}

impl GaussianNb {
    /// Unnormalized log posteriors `ln prior + sum ln N(x | mean, var)` per class.
    pub fn log_posteriors(&self, row: &[f64]) -> [f64; 2] {
        [0, 1].map(|c| {
            let mut lp = self.priors[c].ln();
            for ((&x, &m), &v) in row.iter().zip(&self.means[c]).zip(&self.variances[c]) {
                lp += -0.5 * (2.0 * std::f64::consts::PI * v).ln() - (x - m) * (x - m) / (2.0 * v);
            }
            lp
        })
    }

    pub fn predict_row(&self, row: &[f64]) -> u8 {
        let [lp0, lp1] = self.log_posteriors(row);
        u8::from(lp1 > lp0)
    }
}

impl LinearModel {
    pub fn score(&self, row: &[f64]) -> f64 {
        dot(&self.weights, row) + self.bias
    }
}

/// Trains the requested kind.
pub fn train(kind: ClassicKind, x: &NumArray, y: &[u8], cfg: &TrainConfig) -> Result<ClassicModel> {
    match kind {
        ClassicKind::Logreg => train_logreg(x, y, cfg),
        ClassicKind::Dtree => train_dtree(x, y, cfg),
        ClassicKind::Knn => train_knn(x, y, cfg),
        ClassicKind::Gnb => train_gnb(x, y, cfg),
        ClassicKind::Svm => train_svm(x, y, cfg),
    }
}

impl ClassicModel {
    pub fn kind(&self) -> ClassicKind {
        match self {
            ClassicModel::Logreg(_) => ClassicKind::Logreg,
            ClassicModel::Dtree(_) => ClassicKind::Dtree,
            ClassicModel::Knn(_) => ClassicKind::Knn,
            ClassicModel::Gnb(_) => ClassicKind::Gnb,
            ClassicModel::Svm(_) => ClassicKind::Svm,
        }
    }

    /// Feature count the model was trained on.
    pub fn n_features(&self) -> usize {
        match self {
            ClassicModel::Logreg(m) | ClassicModel::Svm(m) => m.weights.len(),
            ClassicModel::Dtree(t) => t.n_features,
            ClassicModel::Knn(m) => m.features.ncols(),
            ClassicModel::Gnb(m) => m.means[0].len(),
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> u8 {
        match self {
            ClassicModel::Logreg(m) => u8::from(sigmoid(m.score(row)) >= 0.5),
            ClassicModel::Svm(m) => u8::from(m.score(row) >= 0.0),
            ClassicModel::Dtree(t) => t.predict_row(row),
            ClassicModel::Knn(m) => m.predict_row(row),
            ClassicModel::Gnb(m) => m.predict_row(row),
        }
    }

    /// One label per row of a rank-2 feature batch.
    pub fn predict(&self, features: &NumArray) -> Result<Vec<u8>> {
        self.predict_with(features, Execution::default())
    }

    pub fn predict_with(&self, features: &NumArray, exec: Execution) -> Result<Vec<u8>> {
        features.expect_rank(2, "predict")?;
        if features.ncols() != self.n_features() {
            return Err(Error::Shape(format!(
                "model expects {} features, batch has {}",
                self.n_features(),
                features.ncols()
            )));
        }
        let rows: Vec<&[f64]> = features.rows().collect();
        Ok(map_ordered(rows, exec, |r| self.predict_row(r)))
    }
}
