//! Classical baselines over fixed-length featurizations of rounds: k-nearest
//! neighbors, a linear SVM, and a random forest, all from scratch.
//!
//! Every predictor returns scores oriented the same way (higher = more
//! likely label 1) so ROC-AUC is comparable across models.

use crate::data::Round;
use crate::error::{Error, Result};
use crate::tensor::SeededRng;

/// Rounds flattened to equal-width rows: (p1, p2) per timestep, zero-padded
/// or truncated to a reference length fixed from the training split.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    width: usize,
    rows: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let width = rows.first().map_or(0, |r| r.len());
        for (i, r) in rows.iter().enumerate() {
            if r.len() != width {
                return Err(Error::Dimension(format!(
                    "row 0 has {} columns but row {i} has {}",
                    width,
                    r.len()
                )));
            }
        }
        Ok(FeatureMatrix {
            width,
            rows: rows.len(),
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }
}

/// Longest round in a split; the usual choice of reference length.
pub fn max_round_length(rounds: &[Round]) -> usize {
    rounds.iter().map(|r| r.features.len()).max().unwrap_or(0)
}

/// Flattens each round to `[p1_0, p2_0, p1_1, p2_1, ...]` of width 2*t_ref,
/// truncating longer rounds and zero-padding shorter ones.
pub fn featurize(rounds: &[Round], t_ref: usize) -> Result<FeatureMatrix> {
    if t_ref == 0 {
        return Err(Error::Parameter(
            "reference length must be at least 1".to_string(),
        ));
    }
    let width = 2 * t_ref;
    let mut data = Vec::with_capacity(rounds.len() * width);
    for r in rounds {
        for t in 0..t_ref {
            match r.features.get(t) {
                Some(&(p1, p2)) => {
                    data.push(p1);
                    data.push(p2);
                }
                None => {
                    data.push(0.0);
                    data.push(0.0);
                }
            }
        }
    }
    Ok(FeatureMatrix {
        width,
        rows: rounds.len(),
        data,
    })
}

pub fn labels_of(rounds: &[Round]) -> Vec<f64> {
    rounds.iter().map(|r| r.winner as f64).collect()
}

fn check_labels(labels: &[f64], rows: usize) -> Result<()> {
    if labels.len() != rows {
        return Err(Error::Dimension(format!(
            "{} labels against {} rows",
            labels.len(),
            rows
        )));
    }
    for &y in labels {
        if y != 0.0 && y != 1.0 {
            return Err(Error::Label(format!("labels must be 0 or 1, got {y}")));
        }
    }
    Ok(())
}

fn check_widths(train: &FeatureMatrix, queries: &FeatureMatrix) -> Result<()> {
    if train.width != queries.width {
        return Err(Error::Dimension(format!(
            "training rows have width {} but queries have width {}",
            train.width, queries.width
        )));
    }
    Ok(())
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Fraction of label 1 among the k nearest training rows by Euclidean
/// distance; distance ties go to the lower training-row index.
pub fn knn_predict(
    train: &FeatureMatrix,
    labels: &[f64],
    queries: &FeatureMatrix,
    k: usize,
) -> Result<Vec<f64>> {
    if train.rows == 0 {
        return Err(Error::Data("empty training set".to_string()));
    }
    check_labels(labels, train.rows)?;
    check_widths(train, queries)?;
    if k == 0 || k > train.rows {
        return Err(Error::Parameter(format!(
            "k must lie in 1..={}, got {k}",
            train.rows
        )));
    }
    let mut scores = Vec::with_capacity(queries.rows);
    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(train.rows);
    for q in 0..queries.rows {
        dist.clear();
        for i in 0..train.rows {
            dist.push((squared_distance(queries.row(q), train.row(i)), i));
        }
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let ones = dist[..k].iter().filter(|&&(_, i)| labels[i] == 1.0).count();
        scores.push(ones as f64 / k as f64);
    }
    Ok(scores)
}

/// Linear SVM trained by deterministic full-batch subgradient descent on
/// the hinge loss with L2 penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

// Damage percentages live in [0, 100]; shrinking them to [0, 1] keeps the
// default regularization strength meaningful and the early large-step
// iterations well behaved.
const SVM_FEATURE_SCALE: f64 = 0.01;

pub fn svm_train(
    train: &FeatureMatrix,
    labels: &[f64],
    epochs: usize,
    lambda: f64,
) -> Result<SvmModel> {
    if train.rows == 0 {
        return Err(Error::Data("empty training set".to_string()));
    }
    check_labels(labels, train.rows)?;
    if epochs == 0 {
        return Err(Error::Parameter("epoch count must be positive".to_string()));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Parameter(format!(
            "regularization strength must be positive, got {lambda}"
        )));
    }
    let ones = labels.iter().filter(|&&y| y == 1.0).count();
    if ones == 0 || ones == train.rows {
        return Err(Error::Label(
            "SVM training needs at least one sample of each class".to_string(),
        ));
    }
    let signed: Vec<f64> = labels.iter().map(|&y| 2.0 * y - 1.0).collect();

    let n = train.rows as f64;
    let mut w = vec![0.0; train.width];
    let mut b = 0.0;
    for t in 0..epochs {
        let eta = 1.0 / (lambda * (t + 1) as f64);
        let mut dw = vec![0.0; train.width];
        let mut db = 0.0;
        for i in 0..train.rows {
            let x = train.row(i);
            let margin = signed[i]
                * (x.iter()
                    .zip(&w)
                    .map(|(xi, wi)| xi * SVM_FEATURE_SCALE * wi)
                    .sum::<f64>()
                    + b);
            if margin < 1.0 {
                for (d, xi) in dw.iter_mut().zip(x) {
                    *d += signed[i] * xi * SVM_FEATURE_SCALE;
                }
                db += signed[i];
            }
        }
        for (wi, d) in w.iter_mut().zip(&dw) {
            *wi -= eta * (lambda * *wi - d / n);
        }
        b += eta * db / n;
    }
    Ok(SvmModel { weights: w, bias: b })
}

/// Signed margins; positive means label 1, and the raw value ranks rounds
/// for AUC.
pub fn svm_predict(model: &SvmModel, queries: &FeatureMatrix) -> Result<Vec<f64>> {
    if queries.width != model.weights.len() {
        return Err(Error::Dimension(format!(
            "model has {} weights but queries have width {}",
            model.weights.len(),
            queries.width
        )));
    }
    Ok((0..queries.rows)
        .map(|q| {
            queries
                .row(q)
                .iter()
                .zip(&model.weights)
                .map(|(xi, wi)| xi * SVM_FEATURE_SCALE * wi)
                .sum::<f64>()
                + model.bias
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
enum TreeNode {
    Leaf(u8),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<TreeNode>,
}

impl DecisionTree {
    fn predict(&self, row: &[f64]) -> u8 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                TreeNode::Leaf(label) => return label,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    trees: Vec<DecisionTree>,
}

impl RandomForest {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }
}

fn gini(ones: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = ones as f64 / total as f64;
    2.0 * p * (1.0 - p)
}

fn majority(labels: &[f64], idx: &[usize]) -> u8 {
    let ones = idx.iter().filter(|&&i| labels[i] == 1.0).count();
    // An exact tie defaults to label 0.
    (2 * ones > idx.len()) as u8
}

struct TreeBuilder<'a> {
    train: &'a FeatureMatrix,
    labels: &'a [f64],
    n_candidates: usize,
    max_depth: Option<usize>,
    nodes: Vec<TreeNode>,
}

impl TreeBuilder<'_> {
    fn build(&mut self, idx: &[usize], depth: usize, rng: &mut SeededRng) -> usize {
        let ones = idx.iter().filter(|&&i| self.labels[i] == 1.0).count();
        let node_gini = gini(ones, idx.len());
        let depth_capped = self.max_depth.is_some_and(|d| depth >= d);
        if node_gini == 0.0 || depth_capped || idx.len() < 2 {
            self.nodes.push(TreeNode::Leaf(majority(self.labels, idx)));
            return self.nodes.len() - 1;
        }

        let mut candidates: Vec<usize> = (0..self.train.width).collect();
        rng.shuffle(&mut candidates);
        candidates.truncate(self.n_candidates);

        // Best split = lowest weighted child Gini over midpoint thresholds
        // of each candidate feature's distinct values.
        let mut best: Option<(f64, usize, f64)> = None;
        for &feature in &candidates {
            let mut values: Vec<f64> = idx.iter().map(|&i| self.train.row(i)[feature]).collect();
            values.sort_by(f64::total_cmp);
            values.dedup();
            for pair in values.windows(2) {
                let threshold = (pair[0] + pair[1]) / 2.0;
                let mut left_n = 0;
                let mut left_ones = 0;
                for &i in idx {
                    if self.train.row(i)[feature] <= threshold {
                        left_n += 1;
                        left_ones += (self.labels[i] == 1.0) as usize;
                    }
                }
                let right_n = idx.len() - left_n;
                let right_ones = ones - left_ones;
                let weighted = (left_n as f64 * gini(left_ones, left_n)
                    + right_n as f64 * gini(right_ones, right_n))
                    / idx.len() as f64;
                if best.is_none_or(|(score, _, _)| weighted < score) {
                    best = Some((weighted, feature, threshold));
                }
            }
        }

        match best {
            Some((score, feature, threshold)) if score < node_gini => {
                let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
                    .iter()
                    .partition(|&&i| self.train.row(i)[feature] <= threshold);
                let at = self.nodes.len();
                self.nodes.push(TreeNode::Leaf(0));
                let left = self.build(&left_idx, depth + 1, rng);
                let right = self.build(&right_idx, depth + 1, rng);
                self.nodes[at] = TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
                at
            }
            _ => {
                self.nodes.push(TreeNode::Leaf(majority(self.labels, idx)));
                self.nodes.len() - 1
            }
        }
    }
}

/// Bootstrap-aggregated Gini trees with sqrt(width) random feature
/// candidates per node. Deterministic in the rng seed.
pub fn rf_train(
    train: &FeatureMatrix,
    labels: &[f64],
    n_trees: usize,
    max_depth: Option<usize>,
    rng: &mut SeededRng,
) -> Result<RandomForest> {
    if train.rows == 0 {
        return Err(Error::Data("empty training set".to_string()));
    }
    check_labels(labels, train.rows)?;
    if n_trees == 0 {
        return Err(Error::Parameter("forest needs at least one tree".to_string()));
    }
    let n_candidates = ((train.width as f64).sqrt().floor() as usize).max(1);
    let mut trees = Vec::with_capacity(n_trees);
    for tree_index in 0..n_trees {
        let mut tree_rng = rng.derive(tree_index as u64);
        let sample: Vec<usize> = (0..train.rows)
            .map(|_| tree_rng.next_below(train.rows))
            .collect();
        let mut builder = TreeBuilder {
            train,
            labels,
            n_candidates,
            max_depth,
            nodes: Vec::new(),
        };
        builder.build(&sample, 0, &mut tree_rng);
        trees.push(DecisionTree {
            nodes: builder.nodes,
        });
    }
    Ok(RandomForest { trees })
}

/// Fraction of trees voting label 1.
pub fn rf_predict(forest: &RandomForest, queries: &FeatureMatrix) -> Result<Vec<f64>> {
    if forest.trees.is_empty() {
        return Err(Error::Data("empty forest".to_string()));
    }
    Ok((0..queries.rows)
        .map(|q| {
            let votes: usize = forest
                .trees
                .iter()
                .map(|t| t.predict(queries.row(q)) as usize)
                .sum();
            votes as f64 / forest.trees.len() as f64
        })
        .collect())
}
