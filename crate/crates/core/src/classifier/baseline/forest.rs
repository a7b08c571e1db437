//! Random forest of CART trees (gini impurity, bootstrap samples, a random
//! feature subset per split); predictions average leaf class distributions.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::train::stream_rng;
use crate::error::{Error, Result};

const DOMAIN_FOREST: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Features tried per split; `None` means `round(sqrt(p))`.
    pub max_features: Option<usize>,
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_features: None,
            min_samples_split: 2,
            max_depth: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf(Vec<f64>),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Node 0 is the root.
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_distribution(&self, x: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf(d) => return d,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<Tree>,
    pub num_classes: usize,
}

fn gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

struct Split {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

fn best_split(
    x: &[Vec<f64>],
    labels: &[usize],
    samples: &[usize],
    num_classes: usize,
    features: &[usize],
    max_features: usize,
) -> Option<Split> {
    let n = samples.len();
    let mut total = vec![0usize; num_classes];
    for &s in samples {
        total[labels[s]] += 1;
    }
    let mut best: Option<Split> = None;
    let mut tried = 0;
    let mut sorted = samples.to_vec();
    for &f in features {
        if tried == max_features {
            break;
        }
        sorted.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]));
        if x[sorted[0]][f] == x[sorted[n - 1]][f] {
            continue;
        }
        tried += 1;
        let mut left = vec![0usize; num_classes];
        for i in 0..n - 1 {
            left[labels[sorted[i]]] += 1;
            let (a, b) = (x[sorted[i]][f], x[sorted[i + 1]][f]);
            if a == b {
                continue;
            }
            let right: Vec<usize> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
            let nl = i + 1;
            let impurity = (nl as f64 * gini(&left, nl) + (n - nl) as f64 * gini(&right, n - nl)) / n as f64;
            if best.as_ref().is_none_or(|s| impurity < s.impurity) {
                best = Some(Split {
                    feature: f,
                    threshold: a + (b - a) / 2.0,
                    impurity,
                });
            }
        }
    }
    best
}

fn build_tree(x: &[Vec<f64>], labels: &[usize], num_classes: usize, cfg: &ForestConfig, tree: usize) -> Tree {
    let mut rng = stream_rng(cfg.seed, DOMAIN_FOREST, tree as u64);
    let n = x.len();
    let p = x[0].len();
    let max_features = cfg
        .max_features
        .unwrap_or_else(|| ((p as f64).sqrt().round() as usize).max(1))
        .min(p);
    let bootstrap: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
    let mut nodes = vec![Node::Leaf(Vec::new())];
    let mut work = vec![(0usize, bootstrap, 0usize)];
    let mut features: Vec<usize> = (0..p).collect();
    while let Some((id, samples, depth)) = work.pop() {
        let mut counts = vec![0usize; num_classes];
        for &s in &samples {
            counts[labels[s]] += 1;
        }
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let can_split = !pure
            && samples.len() >= cfg.min_samples_split
            && cfg.max_depth.is_none_or(|d| depth < d);
        let split = if can_split {
            features.shuffle(&mut rng);
            best_split(x, labels, &samples, num_classes, &features, max_features)
        } else {
            None
        };
        match split {
            Some(s) => {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    samples.iter().partition(|&&i| x[i][s.feature] <= s.threshold);
                let left = nodes.len();
                nodes.push(Node::Leaf(Vec::new()));
                nodes.push(Node::Leaf(Vec::new()));
                nodes[id] = Node::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left,
                    right: left + 1,
                };
                work.push((left + 1, r, depth + 1));
                work.push((left, l, depth + 1));
            }
            None => {
                let total = samples.len() as f64;
                nodes[id] = Node::Leaf(counts.iter().map(|&c| c as f64 / total).collect());
            }
        }
    }
    Tree { nodes }
}

impl RandomForest {
    pub fn fit(x: &[Vec<f64>], labels: &[usize], num_classes: usize, cfg: &ForestConfig) -> Result<Self> {
        super::check_training_data(x, labels, num_classes)?;
        if cfg.n_trees == 0 || cfg.min_samples_split < 2 {
            return Err(Error::InvalidArgument(
                "forest: n_trees must be positive and min_samples_split >= 2".into(),
            ));
        }
        let trees = (0..cfg.n_trees)
            .into_par_iter()
            .map(|t| build_tree(x, labels, num_classes, cfg, t))
            .collect();
        Ok(RandomForest { trees, num_classes })
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.num_classes];
        for tree in &self.trees {
            for (a, d) in acc.iter_mut().zip(tree.leaf_distribution(x)) {
                *a += d;
            }
        }
        let n = self.trees.len() as f64;
        acc.into_iter().map(|a| a / n).collect()
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        crate::classifier::argmax(&self.predict_proba(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xor_data() -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..200 {
            let a = (i % 2) as f64;
            let b = ((i / 2) % 2) as f64;
            let noise = (i as f64 * 0.618).fract();
            x.push(vec![a, b, noise]);
            y.push(((a + b) as usize) % 2);
        }
        (x, y)
    }

    #[test]
    fn learns_xor() {
        let (x, y) = xor_data();
        let cfg = ForestConfig { n_trees: 20, max_features: Some(2), ..ForestConfig::default() };
        let rf = RandomForest::fit(&x, &y, 2, &cfg).unwrap();
        let correct = x.iter().zip(&y).filter(|(r, &l)| rf.predict(r) == l).count();
        assert_eq!(correct, x.len());
    }

    #[test]
    fn deterministic_and_normalized() {
        let (x, y) = xor_data();
        let cfg = ForestConfig { n_trees: 10, seed: 4, ..ForestConfig::default() };
        let a = RandomForest::fit(&x, &y, 2, &cfg).unwrap();
        let b = RandomForest::fit(&x, &y, 2, &cfg).unwrap();
        assert_eq!(a, b);
        let p = a.predict_proba(&x[3]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gini_values() {
        assert_eq!(gini(&[5, 0], 5), 0.0);
        assert!((gini(&[1, 1], 2) - 0.5).abs() < 1e-12);
        assert!((gini(&[1, 1, 1], 3) - 2.0 / 3.0).abs() < 1e-12);
    }
}
