//! A small from-scratch classifier suite used by the utility metric.
//!
//! Hyperparameters are fixed so that utility scores are reproducible:
//! - logistic regression: multinomial softmax, 200 full-batch gradient
//!   iterations, step size 0.5 on standardized features;
//! - decision tree: Gini impurity, max depth 8;
//! - random forest: 20 bootstrapped depth-8 trees, sqrt(F) features per split;
//! - AdaBoost: 50 decision stumps, SAMME weighting;
//! - naive Bayes: Gaussian numerics x categorical frequencies, Laplace 1.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    LogisticRegression,
    DecisionTree,
    RandomForest,
    AdaboostStumps,
    NaiveBayes,
}

pub const DEFAULT_CLASSIFIERS: [ClassifierKind; 5] = [
    ClassifierKind::LogisticRegression,
    ClassifierKind::DecisionTree,
    ClassifierKind::RandomForest,
    ClassifierKind::AdaboostStumps,
    ClassifierKind::NaiveBayes,
];

impl ClassifierKind {
    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::LogisticRegression => "logistic_regression",
            ClassifierKind::DecisionTree => "decision_tree",
            ClassifierKind::RandomForest => "random_forest",
            ClassifierKind::AdaboostStumps => "adaboost_stumps",
            ClassifierKind::NaiveBayes => "naive_bayes",
        }
    }
}

/// Training/test design shared by all classifiers. `dense` carries numerics
/// followed by one-hot categorical blocks; `numeric` and `cats` carry the raw
/// per-column views used by naive Bayes.
pub struct Design {
    pub dense: Vec<Vec<f64>>,
    pub numeric: Vec<Vec<f64>>,
    pub cats: Vec<Vec<u32>>,
    /// Union vocabulary size per raw categorical feature column.
    pub cat_sizes: Vec<usize>,
}

impl Design {
    pub fn len(&self) -> usize {
        self.dense.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dense.is_empty()
    }
}

pub fn predict(
    kind: ClassifierKind,
    train: &Design,
    labels: &[usize],
    n_classes: usize,
    test: &Design,
) -> Vec<usize> {
    match kind {
        ClassifierKind::LogisticRegression => logistic(train, labels, n_classes, test),
        ClassifierKind::DecisionTree => {
            let w = vec![1.0; labels.len()];
            let tree = Tree::fit(&train.dense, labels, &w, n_classes, 8, None, &mut no_rng());
            test.dense.iter().map(|x| tree.predict(x)).collect()
        }
        ClassifierKind::RandomForest => forest(train, labels, n_classes, test),
        ClassifierKind::AdaboostStumps => adaboost(train, labels, n_classes, test),
        ClassifierKind::NaiveBayes => naive_bayes(train, labels, n_classes, test),
    }
}

// ---------------------------------------------------------------------------
// Logistic regression

fn logistic(train: &Design, labels: &[usize], n_classes: usize, test: &Design) -> Vec<usize> {
    const ITERS: usize = 200;
    const STEP: f64 = 0.5;
    let n = train.len();
    let f = train.dense[0].len();
    // Standardize by training moments so one step size fits all columns.
    let mut mean = vec![0.0; f];
    let mut sd = vec![0.0; f];
    for row in &train.dense {
        for (j, &v) in row.iter().enumerate() {
            mean[j] += v / n as f64;
        }
    }
    for row in &train.dense {
        for (j, &v) in row.iter().enumerate() {
            sd[j] += (v - mean[j]) * (v - mean[j]) / n as f64;
        }
    }
    for s in &mut sd {
        *s = s.sqrt().max(1e-12);
    }
    let std_row = |row: &[f64]| -> Vec<f64> {
        row.iter().enumerate().map(|(j, &v)| (v - mean[j]) / sd[j]).collect()
    };
    let xs: Vec<Vec<f64>> = train.dense.iter().map(|r| std_row(r)).collect();

    // Weights [class][feature] plus a bias per class.
    let mut w = vec![vec![0.0; f]; n_classes];
    let mut b = vec![0.0; n_classes];
    let mut logits = vec![0.0; n_classes];
    for _ in 0..ITERS {
        let mut gw = vec![vec![0.0; f]; n_classes];
        let mut gb = vec![0.0; n_classes];
        for (x, &y) in xs.iter().zip(labels) {
            softmax_logits(&w, &b, x, &mut logits);
            for k in 0..n_classes {
                let err = logits[k] - if k == y { 1.0 } else { 0.0 };
                gb[k] += err / n as f64;
                for (j, &v) in x.iter().enumerate() {
                    gw[k][j] += err * v / n as f64;
                }
            }
        }
        for k in 0..n_classes {
            b[k] -= STEP * gb[k];
            for j in 0..f {
                w[k][j] -= STEP * gw[k][j];
            }
        }
    }
    test.dense
        .iter()
        .map(|row| {
            let x = std_row(row);
            softmax_logits(&w, &b, &x, &mut logits);
            argmax(&logits)
        })
        .collect()
}

fn softmax_logits(w: &[Vec<f64>], b: &[f64], x: &[f64], out: &mut [f64]) {
    for (k, wk) in w.iter().enumerate() {
        out[k] = b[k] + wk.iter().zip(x).map(|(a, c)| a * c).sum::<f64>();
    }
    let m = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for v in out.iter_mut() {
        *v = (*v - m).exp();
        z += *v;
    }
    for v in out.iter_mut() {
        *v /= z;
    }
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate() {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Decision trees (weighted CART, shared by tree / forest / AdaBoost)

struct Node {
    feature: usize,
    threshold: f64,
    left: usize,
    right: usize,
    class: usize,
    leaf: bool,
}

struct Tree {
    nodes: Vec<Node>,
}

fn no_rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0)
}

impl Tree {
    /// Fits a CART tree on the rows in `x`, minimizing weighted Gini
    /// impurity. `feature_subset` caps the number of features examined per
    /// split (random forests); `None` examines all of them.
    fn fit(
        x: &[Vec<f64>],
        y: &[usize],
        w: &[f64],
        n_classes: usize,
        max_depth: usize,
        feature_subset: Option<usize>,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let mut tree = Tree { nodes: Vec::new() };
        let idx: Vec<usize> = (0..x.len()).collect();
        tree.grow(x, y, w, n_classes, &idx, max_depth, feature_subset, rng);
        tree
    }

    #[allow(clippy::too_many_arguments)]
    fn grow(
        &mut self,
        x: &[Vec<f64>],
        y: &[usize],
        w: &[f64],
        n_classes: usize,
        idx: &[usize],
        depth: usize,
        feature_subset: Option<usize>,
        rng: &mut ChaCha8Rng,
    ) -> usize {
        let mut class_w = vec![0.0; n_classes];
        for &i in idx {
            class_w[y[i]] += w[i];
        }
        let majority = argmax(&class_w);
        let total: f64 = class_w.iter().sum();
        let pure = class_w.iter().filter(|&&c| c > 0.0).count() <= 1;
        let make_leaf = depth == 0 || pure || idx.len() < 2 || total == 0.0;

        let node = self.nodes.len();
        self.nodes.push(Node { feature: 0, threshold: 0.0, left: 0, right: 0, class: majority, leaf: true });
        if make_leaf {
            return node;
        }

        let n_features = x[0].len();
        let features: Vec<usize> = match feature_subset {
            Some(k) if k < n_features => {
                rand::seq::index::sample(rng, n_features, k).into_vec()
            }
            _ => (0..n_features).collect(),
        };

        let parent_gini = gini(&class_w, total);
        let mut best: Option<(usize, f64, f64)> = None; // (feature, threshold, impurity drop)
        let mut order = idx.to_vec();
        for &feat in &features {
            order.sort_by(|&a, &b| x[a][feat].partial_cmp(&x[b][feat]).expect("finite features"));
            let mut left_w = vec![0.0; n_classes];
            let mut left_total = 0.0;
            for k in 0..order.len() - 1 {
                let i = order[k];
                left_w[y[i]] += w[i];
                left_total += w[i];
                let v = x[i][feat];
                let next = x[order[k + 1]][feat];
                if v == next {
                    continue;
                }
                let right_total = total - left_total;
                if left_total == 0.0 || right_total == 0.0 {
                    continue;
                }
                let right_w: Vec<f64> =
                    class_w.iter().zip(&left_w).map(|(c, l)| c - l).collect();
                let split_gini = (left_total * gini(&left_w, left_total)
                    + right_total * gini(&right_w, right_total))
                    / total;
                let drop = parent_gini - split_gini;
                if best.map_or(drop > 1e-12, |(_, _, d)| drop > d) {
                    best = Some((feat, 0.5 * (v + next), drop));
                }
            }
        }

        let Some((feature, threshold, _)) = best else {
            return node;
        };
        let (li, ri): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| x[i][feature] <= threshold);
        let left = self.grow(x, y, w, n_classes, &li, depth - 1, feature_subset, rng);
        let right = self.grow(x, y, w, n_classes, &ri, depth - 1, feature_subset, rng);
        let n = &mut self.nodes[node];
        n.feature = feature;
        n.threshold = threshold;
        n.left = left;
        n.right = right;
        n.leaf = false;
        node
    }

    fn predict(&self, x: &[f64]) -> usize {
        let mut at = 0;
        loop {
            let n = &self.nodes[at];
            if n.leaf {
                return n.class;
            }
            at = if x[n.feature] <= n.threshold { n.left } else { n.right };
        }
    }
}

fn gini(class_w: &[f64], total: f64) -> f64 {
    1.0 - class_w.iter().map(|&c| (c / total) * (c / total)).sum::<f64>()
}

// ---------------------------------------------------------------------------
// Random forest

fn forest(train: &Design, labels: &[usize], n_classes: usize, test: &Design) -> Vec<usize> {
    const N_TREES: usize = 20;
    const SEED: u64 = 0xf0_4e57;
    let n = train.len();
    let k = (train.dense[0].len() as f64).sqrt().ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut votes = vec![vec![0u32; n_classes]; test.len()];
    for _ in 0..N_TREES {
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let bx: Vec<Vec<f64>> = idx.iter().map(|&i| train.dense[i].clone()).collect();
        let by: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
        let w = vec![1.0; n];
        let tree = Tree::fit(&bx, &by, &w, n_classes, 8, Some(k), &mut rng);
        for (row, v) in test.dense.iter().zip(&mut votes) {
            v[tree.predict(row)] += 1;
        }
    }
    votes
        .iter()
        .map(|v| {
            let mut best = 0;
            for (c, &n) in v.iter().enumerate() {
                if n > v[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

// ---------------------------------------------------------------------------
// AdaBoost (SAMME) on decision stumps

fn adaboost(train: &Design, labels: &[usize], n_classes: usize, test: &Design) -> Vec<usize> {
    const ROUNDS: usize = 50;
    let n = train.len();
    let mut w = vec![1.0 / n as f64; n];
    let mut scores = vec![vec![0.0; n_classes]; test.len()];
    let mut rng = no_rng();
    for _ in 0..ROUNDS {
        let stump = Tree::fit(&train.dense, labels, &w, n_classes, 1, None, &mut rng);
        let preds: Vec<usize> = train.dense.iter().map(|x| stump.predict(x)).collect();
        let err: f64 = preds
            .iter()
            .zip(labels)
            .zip(&w)
            .filter(|((p, y), _)| p != y)
            .map(|(_, &wi)| wi)
            .sum();
        // SAMME requires better-than-random; err = 0 means a perfect stump.
        if err >= 1.0 - 1.0 / n_classes as f64 {
            break;
        }
        let alpha = if err <= 0.0 {
            for (row, s) in test.dense.iter().zip(&mut scores) {
                s[stump.predict(row)] += 1e6;
            }
            break;
        } else {
            ((1.0 - err) / err).ln() + (n_classes as f64 - 1.0).ln()
        };
        for (row, s) in test.dense.iter().zip(&mut scores) {
            s[stump.predict(row)] += alpha;
        }
        let mut z = 0.0;
        for ((p, &y), wi) in preds.iter().zip(labels).zip(&mut w) {
            if *p != y {
                *wi *= alpha.exp();
            }
            z += *wi;
        }
        for wi in &mut w {
            *wi /= z;
        }
    }
    scores.iter().map(|s| argmax(s)).collect()
}

// ---------------------------------------------------------------------------
// Naive Bayes: Gaussian numerics x Laplace-smoothed categorical frequencies

fn naive_bayes(train: &Design, labels: &[usize], n_classes: usize, test: &Design) -> Vec<usize> {
    const LAPLACE: f64 = 1.0;
    const VAR_FLOOR: f64 = 1e-9;
    let n = train.len();
    let n_num = train.numeric.first().map_or(0, Vec::len);
    let mut count = vec![0usize; n_classes];
    for &y in labels {
        count[y] += 1;
    }

    let mut mean = vec![vec![0.0; n_num]; n_classes];
    let mut var = vec![vec![0.0; n_num]; n_classes];
    for (row, &y) in train.numeric.iter().zip(labels) {
        for (j, &v) in row.iter().enumerate() {
            mean[y][j] += v;
        }
    }
    for k in 0..n_classes {
        for j in 0..n_num {
            if count[k] > 0 {
                mean[k][j] /= count[k] as f64;
            }
        }
    }
    for (row, &y) in train.numeric.iter().zip(labels) {
        for (j, &v) in row.iter().enumerate() {
            var[y][j] += (v - mean[y][j]) * (v - mean[y][j]);
        }
    }
    for k in 0..n_classes {
        for j in 0..n_num {
            var[k][j] = if count[k] > 0 { var[k][j] / count[k] as f64 } else { 0.0 };
            var[k][j] = var[k][j].max(VAR_FLOOR);
        }
    }

    // cat_counts[class][feature][category]
    let mut cat_counts: Vec<Vec<Vec<f64>>> = (0..n_classes)
        .map(|_| train.cat_sizes.iter().map(|&s| vec![LAPLACE; s]).collect())
        .collect();
    for (row, &y) in train.cats.iter().zip(labels) {
        for (j, &id) in row.iter().enumerate() {
            cat_counts[y][j][id as usize] += 1.0;
        }
    }

    let log_prior: Vec<f64> = count
        .iter()
        .map(|&c| ((c as f64 + LAPLACE) / (n as f64 + LAPLACE * n_classes as f64)).ln())
        .collect();

    (0..test.len())
        .map(|i| {
            let mut log_post = log_prior.clone();
            for (k, lp) in log_post.iter_mut().enumerate() {
                for (j, &v) in test.numeric[i].iter().enumerate() {
                    let d = v - mean[k][j];
                    *lp += -0.5 * (2.0 * std::f64::consts::PI * var[k][j]).ln()
                        - 0.5 * d * d / var[k][j];
                }
                for (j, &id) in test.cats[i].iter().enumerate() {
                    let denom = count[k] as f64 + LAPLACE * train.cat_sizes[j] as f64;
                    *lp += (cat_counts[k][j][id as usize] / denom).ln();
                }
            }
            argmax(&log_post)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two well-separated Gaussian blobs in 2-D, plus a categorical feature
    /// correlated with the label.
    fn blobs(n_per: usize, seed: u64) -> (Design, Vec<usize>) {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dense = Vec::new();
        let mut numeric = Vec::new();
        let mut cats = Vec::new();
        let mut labels = Vec::new();
        for class in 0..2usize {
            let center = if class == 0 { -2.0 } else { 2.0 };
            for _ in 0..n_per {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                let x = center + 0.5 * a;
                let y = -center + 0.5 * b;
                let c = if rng.random_range(0..10) < 9 { class as u32 } else { 1 - class as u32 };
                let mut row = vec![x, y, 0.0, 0.0];
                row[2 + c as usize] = 1.0;
                dense.push(row);
                numeric.push(vec![x, y]);
                cats.push(vec![c]);
                labels.push(class);
            }
        }
        (Design { dense, numeric, cats, cat_sizes: vec![2] }, labels)
    }

    #[test]
    fn all_classifiers_separate_blobs() {
        let (train, train_y) = blobs(60, 1);
        let (test, test_y) = blobs(40, 2);
        for kind in DEFAULT_CLASSIFIERS {
            let preds = predict(kind, &train, &train_y, 2, &test);
            let acc = preds.iter().zip(&test_y).filter(|(p, y)| p == y).count() as f64
                / test_y.len() as f64;
            assert!(acc >= 0.95, "{} accuracy {acc}", kind.name());
        }
    }

    #[test]
    fn classifiers_are_deterministic() {
        let (train, train_y) = blobs(30, 3);
        let (test, _) = blobs(20, 4);
        for kind in DEFAULT_CLASSIFIERS {
            let a = predict(kind, &train, &train_y, 2, &test);
            let b = predict(kind, &train, &train_y, 2, &test);
            assert_eq!(a, b, "{}", kind.name());
        }
    }

    #[test]
    fn stump_is_depth_one() {
        let (train, train_y) = blobs(30, 5);
        let w = vec![1.0; train_y.len()];
        let tree = Tree::fit(&train.dense, &train_y, &w, 2, 1, None, &mut no_rng());
        // Root plus at most two leaves.
        assert!(tree.nodes.len() <= 3);
    }

    #[test]
    fn tree_handles_single_class() {
        let x = vec![vec![0.0], vec![1.0], vec![2.0]];
        let y = vec![1, 1, 1];
        let w = vec![1.0; 3];
        let tree = Tree::fit(&x, &y, &w, 2, 8, None, &mut no_rng());
        assert_eq!(tree.nodes.len(), 1);
        assert_eq!(tree.predict(&[5.0]), 1);
    }

    #[test]
    fn three_region_pattern_needs_depth_two() {
        // 0 | 1 | 0 along one axis: a stump gets at most two of the three
        // regions, a depth-2 tree fits all of them.
        let x = vec![vec![0.0], vec![1.0], vec![2.0]];
        let y = vec![0, 1, 0];
        let w = vec![1.0; 3];
        let stump = Tree::fit(&x, &y, &w, 2, 1, None, &mut no_rng());
        let hits = x.iter().zip(&y).filter(|(xi, &yi)| stump.predict(xi) == yi).count();
        assert!(hits < 3);
        let deep = Tree::fit(&x, &y, &w, 2, 2, None, &mut no_rng());
        for (xi, &yi) in x.iter().zip(&y) {
            assert_eq!(deep.predict(xi), yi);
        }
    }
}
