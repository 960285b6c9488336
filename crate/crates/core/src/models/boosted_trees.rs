use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Omitted fields take their defaults when deserialized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtConfig {
    pub trees: usize,
    pub depth: usize,
    pub rate: f64,
    pub seed: u64,
    /// Minimum training rows per leaf.
    pub min_leaf: usize,
    /// Fraction of rows drawn (without replacement) for each tree.
    pub subsample: f64,
    /// Smallest reduction in squared error a split must achieve.
    pub min_split_gain: f64,
}

impl Default for GbtConfig {
    fn default() -> Self {
        GbtConfig {
            trees: 200,
            depth: 3,
            rate: 0.1,
            seed: 0,
            min_leaf: 1,
            subsample: 1.0,
            min_split_gain: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Regression tree; rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, row: &dyn Fn(usize) -> f64) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row(feature) <= threshold { left } else { right },
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

/// Gradient-boosted regression trees under squared loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedTrees {
    pub n_columns: usize,
    pub base: f64,
    pub config: GbtConfig,
    pub trees: Vec<Tree>,
    /// Training mean squared error after each round (first entry: constant model).
    pub train_mse: Vec<f64>,
}

impl BoostedTrees {
    pub fn predict_row(&self, row: &dyn Fn(usize) -> f64) -> f64 {
        self.base + self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>()
    }
}

struct Grower<'a> {
    columns: &'a [Vec<f64>],
    residual: &'a [f64],
    depth: usize,
    min_leaf: usize,
    min_gain: f64,
    rate: f64,
    nodes: Vec<Node>,
}

struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

const MIN_GAIN: f64 = 1e-12;

impl Grower<'_> {
    fn leaf(&mut self, rows: &[usize]) -> usize {
        let mean = rows.iter().map(|&i| self.residual[i]).sum::<f64>() / rows.len() as f64;
        self.nodes.push(Node::Leaf {
            value: self.rate * mean,
        });
        self.nodes.len() - 1
    }

    fn best_split(&self, rows: &[usize]) -> Option<BestSplit> {
        let n = rows.len();
        let total: f64 = rows.iter().map(|&i| self.residual[i]).sum();
        let parent = total * total / n as f64;
        let mut best: Option<(f64, usize, f64, usize)> = None;
        let mut order = rows.to_vec();
        for (f, col) in self.columns.iter().enumerate() {
            order.copy_from_slice(rows);
            order.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
            let mut left_sum = 0.0;
            for t in 0..n - 1 {
                left_sum += self.residual[order[t]];
                let (lo, hi) = (col[order[t]], col[order[t + 1]]);
                let n_left = t + 1;
                if lo == hi || n_left < self.min_leaf || n - n_left < self.min_leaf {
                    continue;
                }
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / n_left as f64
                    + right_sum * right_sum / (n - n_left) as f64
                    - parent;
                if gain > self.min_gain && best.is_none_or(|b| gain > b.0) {
                    let mid = 0.5 * (lo + hi);
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some((gain, f, threshold, n_left));
                }
            }
        }
        let (gain, feature, threshold, _) = best?;
        let (left, right): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| self.columns[feature][i] <= threshold);
        Some(BestSplit {
            gain,
            feature,
            threshold,
            left,
            right,
        })
    }

    fn grow(&mut self, rows: &[usize], depth: usize) -> usize {
        if depth >= self.depth || rows.len() < 2 * self.min_leaf.max(1) {
            return self.leaf(rows);
        }
        let Some(split) = self.best_split(rows) else {
            return self.leaf(rows);
        };
        debug_assert!(split.gain > 0.0);
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { value: 0.0 });
        let left = self.grow(&split.left, depth + 1);
        let right = self.grow(&split.right, depth + 1);
        self.nodes[at] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        at
    }
}

fn mse(y: &[f64], pred: &[f64]) -> f64 {
    y.iter().zip(pred).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64
}

/// Greedy variance-reduction boosting. A constant target yields a constant
/// model with no trees.
pub fn train_boosted_trees(x: &DMatrix<f64>, y: &[f64], config: &GbtConfig) -> Result<BoostedTrees> {
    let (n, c) = x.shape();
    if y.len() != n {
        return Err(Error::Training(format!("{n} rows but {} targets", y.len())));
    }
    if n < 2 {
        return Err(Error::Training("boosting needs at least two rows".into()));
    }
    if !(config.rate > 0.0 && config.rate <= 1.0) {
        return Err(Error::Training(format!("learning rate {} outside (0, 1]", config.rate)));
    }
    if !(config.min_split_gain >= 0.0 && config.min_split_gain.is_finite()) {
        return Err(Error::Training(format!("min split gain {} must be >= 0", config.min_split_gain)));
    }
    if !(config.subsample > 0.0 && config.subsample <= 1.0) {
        return Err(Error::Training(format!("subsample {} outside (0, 1]", config.subsample)));
    }
    if config.depth == 0 {
        return Err(Error::Training("tree depth must be at least 1".into()));
    }
    let columns: Vec<Vec<f64>> = x.column_iter().map(|col| col.iter().copied().collect()).collect();
    let base = y.iter().sum::<f64>() / n as f64;
    let mut pred = vec![base; n];
    let mut train_mse = vec![mse(y, &pred)];
    let mut trees = Vec::new();
    let constant = y.iter().all(|v| *v == y[0]);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let draw = ((config.subsample * n as f64).round() as usize).clamp(1, n);

    if !constant {
        for _ in 0..config.trees {
            let residual: Vec<f64> = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
            let rows: Vec<usize> = if draw < n {
                let mut r = rand::seq::index::sample(&mut rng, n, draw).into_vec();
                r.sort_unstable();
                r
            } else {
                (0..n).collect()
            };
            let mut grower = Grower {
                columns: &columns,
                residual: &residual,
                depth: config.depth,
                min_leaf: config.min_leaf.max(1),
                min_gain: config.min_split_gain.max(MIN_GAIN),
                rate: config.rate,
                nodes: Vec::new(),
            };
            grower.grow(&rows, 0);
            let tree = Tree {
                nodes: grower.nodes,
            };
            for (i, p) in pred.iter_mut().enumerate() {
                *p += tree.predict_row(&|j| columns[j][i]);
            }
            train_mse.push(mse(y, &pred));
            trees.push(tree);
        }
    }
    Ok(BoostedTrees {
        n_columns: c,
        base,
        config: *config,
        trees,
        train_mse,
    })
}
