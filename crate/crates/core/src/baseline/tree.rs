//! CART classification tree for two classes with Gini impurity.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::seed::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    /// Class counts indexed by class (bad = 0, good = 1).
    Leaf { counts: [u32; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
    /// Seed of the tree's random stream (bootstrap and feature sampling).
    pub seed: u64,
}

/// Dense row-major feature matrix.
pub struct Features<'a> {
    pub data: &'a [f64],
    pub dim: usize,
}

impl Features<'_> {
    fn at(&self, row: usize, feature: usize) -> f64 {
        self.data[row * self.dim + feature]
    }
}

fn gini(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p = counts[1] as f64 / n;
    2.0 * p * (1.0 - p)
}

struct Candidate {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

/// Best threshold for one feature over `rows`; `None` if the feature is constant there.
fn best_split_on(x: &Features, y: &[usize], rows: &[usize], feature: usize) -> Option<Candidate> {
    let mut vals: Vec<(f64, usize)> = rows.iter().map(|&r| (x.at(r, feature), y[r])).collect();
    vals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = vals.len();
    let mut total = [0usize; 2];
    for &(_, c) in &vals {
        total[c] += 1;
    }
    let mut left = [0usize; 2];
    let mut best: Option<Candidate> = None;
    for k in 0..n - 1 {
        left[vals[k].1] += 1;
        if vals[k].0 == vals[k + 1].0 {
            continue;
        }
        let right = [total[0] - left[0], total[1] - left[1]];
        let nl = (k + 1) as f64;
        let nr = (n - k - 1) as f64;
        let impurity = (nl * gini(left) + nr * gini(right)) / n as f64;
        if best.as_ref().is_none_or(|b| impurity < b.impurity) {
            best = Some(Candidate {
                feature,
                threshold: 0.5 * (vals[k].0 + vals[k + 1].0),
                impurity,
            });
        }
    }
    best
}

impl DecisionTree {
    /// Grows a tree on `rows` (with repetition for bootstrap samples) until
    /// every leaf is pure or holds fewer than two samples. At each node
    /// `max_features` randomly chosen features are searched; if none of them
    /// admits a split, the remaining features are tried in random order.
    pub fn fit(x: &Features, y: &[usize], rows: &[usize], max_features: usize, seed: u64, rng: &mut Rng) -> Self {
        let mut nodes = Vec::new();
        let mut stack: Vec<(usize, Vec<usize>)> = Vec::new();
        nodes.push(Node::Leaf { counts: [0, 0] });
        stack.push((0, rows.to_vec()));
        let mut order: Vec<usize> = (0..x.dim).collect();
        while let Some((slot, rows)) = stack.pop() {
            let mut counts = [0usize; 2];
            for &r in &rows {
                counts[y[r]] += 1;
            }
            let leaf = Node::Leaf {
                counts: [counts[0] as u32, counts[1] as u32],
            };
            if rows.len() < 2 || counts[0] == 0 || counts[1] == 0 {
                nodes[slot] = leaf;
                continue;
            }
            order.shuffle(rng);
            let mut best: Option<Candidate> = None;
            for (searched, &f) in order.iter().enumerate() {
                if searched >= max_features && best.is_some() {
                    break;
                }
                if let Some(c) = best_split_on(x, y, &rows, f) {
                    if best.as_ref().is_none_or(|b| c.impurity < b.impurity) {
                        best = Some(c);
                    }
                }
            }
            let Some(best) = best else {
                nodes[slot] = leaf;
                continue;
            };
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&row| x.at(row, best.feature) <= best.threshold);
            let left = nodes.len();
            nodes.push(Node::Leaf { counts: [0, 0] });
            let right = nodes.len();
            nodes.push(Node::Leaf { counts: [0, 0] });
            nodes[slot] = Node::Split {
                feature: best.feature as u32,
                threshold: best.threshold,
                left: left as u32,
                right: right as u32,
            };
            // Right first so the left subtree is expanded first.
            stack.push((right, r));
            stack.push((left, l));
        }
        DecisionTree { nodes, seed }
    }

    pub fn leaf_counts(&self, feature_value: impl Fn(u32) -> f64) -> [u32; 2] {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                Node::Leaf { counts } => return *counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if feature_value(*feature) <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    /// Fraction of class-good training samples in the leaf reached by the input.
    pub fn predict_proba(&self, feature_value: impl Fn(u32) -> f64) -> f64 {
        let counts = self.leaf_counts(feature_value);
        counts[1] as f64 / (counts[0] + counts[1]) as f64
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left as usize).max(go(nodes, *right as usize)),
            }
        }
        go(&self.nodes, 0)
    }
}
