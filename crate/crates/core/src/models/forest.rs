//! Random forest of Gini-split classification trees grown on bootstrap
//! samples. A tree's vote for a row is the class-1 share of the leaf the row
//! lands in, which is exactly 0 or 1 whenever the tree was grown to purity.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_training_data, ModelError};
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub trees: usize,
    /// Features tried per split; `None` means `ceil(sqrt(d))`.
    pub mtry: Option<usize>,
    pub min_leaf: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            trees: 100,
            mtry: None,
            min_leaf: 1,
        }
    }
}

impl ForestConfig {
    pub fn effective_mtry(&self, d: usize) -> usize {
        self.mtry
            .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
            .clamp(1, d.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub n_features: usize,
    pub trees: Vec<Tree>,
    pub config: ForestConfig,
    pub seed: u64,
}

impl ForestModel {
    pub fn score(&self, x: &[f64]) -> f64 {
        if self.trees.is_empty() {
            return 0.5;
        }
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

/// A fitted forest with its out-of-bag scores (`None` for rows that were in
/// every bootstrap sample).
#[derive(Debug, Clone)]
pub struct ForestFit {
    pub model: ForestModel,
    pub oob_scores: Vec<Option<f64>>,
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    y: &'a [u8],
    mtry: usize,
    min_leaf: usize,
    nodes: Vec<Node>,
}

fn gini(pos: f64, total: f64) -> f64 {
    if total == 0.0 {
        return 0.0;
    }
    let p = pos / total;
    2.0 * p * (1.0 - p)
}

impl Grower<'_> {
    fn leaf(&mut self, rows: &[usize]) -> usize {
        let pos = rows.iter().filter(|&&i| self.y[i] == 1).count();
        self.nodes.push(Node::Leaf {
            value: pos as f64 / rows.len() as f64,
        });
        self.nodes.len() - 1
    }

    /// Best `(threshold, weighted child impurity)` on one feature.
    fn best_on_feature(&self, rows: &mut [usize], f: usize) -> Option<(f64, f64)> {
        rows.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
        let n = rows.len();
        let total_pos = rows.iter().filter(|&&i| self.y[i] == 1).count() as f64;
        let mut left_pos = 0.0;
        let mut best: Option<(f64, f64)> = None;
        for k in 0..n - 1 {
            left_pos += f64::from(self.y[rows[k]]);
            let (here, next) = (self.x[rows[k]][f], self.x[rows[k + 1]][f]);
            let left_n = k + 1;
            if here == next || left_n < self.min_leaf || n - left_n < self.min_leaf {
                continue;
            }
            let (ln, rn) = (left_n as f64, (n - left_n) as f64);
            let impurity = (ln * gini(left_pos, ln) + rn * gini(total_pos - left_pos, rn)) / n as f64;
            if best.is_none_or(|(_, b)| impurity < b) {
                best = Some((here + (next - here) / 2.0, impurity));
            }
        }
        best
    }

    fn grow(&mut self, rows: &mut [usize], rng: &mut ChaCha8Rng) -> usize {
        let pos = rows.iter().filter(|&&i| self.y[i] == 1).count();
        if pos == 0 || pos == rows.len() || rows.len() < 2 * self.min_leaf {
            return self.leaf(rows);
        }
        let d = self.x[0].len();
        let mut features: Vec<usize> = (0..d).collect();
        features.shuffle(rng);
        // try the sampled features first, the rest only if none can split
        let mut best: Option<(usize, f64, f64)> = None;
        for (k, &f) in features.iter().enumerate() {
            if k >= self.mtry && best.is_some() {
                break;
            }
            if let Some((t, imp)) = self.best_on_feature(rows, f) {
                if best.is_none_or(|(_, _, b)| imp < b) {
                    best = Some((f, t, imp));
                }
            }
        }
        let Some((feature, threshold, _)) = best else {
            return self.leaf(rows);
        };
        let (mut left, mut right): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&i| self.x[i][feature] <= threshold);
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { value: f64::NAN });
        let l = self.grow(&mut left, rng);
        let r = self.grow(&mut right, rng);
        self.nodes[at] = Node::Split {
            feature,
            threshold,
            left: l,
            right: r,
        };
        at
    }
}

fn grow_tree(x: &[Vec<f64>], y: &[u8], cfg: &ForestConfig, seed: u64, tree_index: usize) -> (Tree, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, tree_index as u64]));
    let n = x.len();
    let mut in_bag = vec![false; n];
    let mut rows: Vec<usize> = (0..n)
        .map(|_| {
            let i = rng.random_range(0..n);
            in_bag[i] = true;
            i
        })
        .collect();
    let mut g = Grower {
        x,
        y,
        mtry: cfg.effective_mtry(x[0].len()),
        min_leaf: cfg.min_leaf.max(1),
        nodes: Vec::new(),
    };
    g.grow(&mut rows, &mut rng);
    (Tree { nodes: g.nodes }, in_bag)
}

pub fn fit_random_forest(x: &[Vec<f64>], y: &[u8], cfg: &ForestConfig, seed: u64) -> Result<ForestFit, ModelError> {
    let d = check_training_data(x, y)?;
    let grown: Vec<(Tree, Vec<bool>)> = (0..cfg.trees)
        .into_par_iter()
        .map(|t| grow_tree(x, y, cfg, seed, t))
        .collect();
    let oob_scores = (0..x.len())
        .map(|i| {
            let votes: Vec<f64> = grown
                .iter()
                .filter(|(_, bag)| !bag[i])
                .map(|(t, _)| t.predict(&x[i]))
                .collect();
            (!votes.is_empty()).then(|| votes.iter().sum::<f64>() / votes.len() as f64)
        })
        .collect();
    Ok(ForestFit {
        model: ForestModel {
            n_features: d,
            trees: grown.into_iter().map(|(t, _)| t).collect(),
            config: *cfg,
            seed,
        },
        oob_scores,
    })
}

pub fn train_random_forest(x: &[Vec<f64>], y: &[u8], cfg: &ForestConfig, seed: u64) -> Result<ForestModel, ModelError> {
    fit_random_forest(x, y, cfg, seed).map(|f| f.model)
}
