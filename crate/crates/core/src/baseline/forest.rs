use std::cmp::Ordering;
use std::path::Path;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tfidf::{fit_tfidf, transform_source, SparseVector, TfidfModel};
use super::tree::{DecisionTree, Features};
use crate::corpus::{Dataset, Label};
use crate::error::{Error, Result};
use crate::seed::rng_from_seed;
use crate::tokenizer::Vocabulary;

pub const DEFAULT_TREES: usize = 100;
const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    /// `ceil(sqrt(d))` features per split.
    Sqrt,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub seed: u64,
    pub max_features: MaxFeatures,
    /// When false every tree sees the whole training set once.
    pub bootstrap: bool,
}

impl ForestParams {
    pub fn new(n_trees: usize, seed: u64) -> Self {
        ForestParams {
            n_trees,
            seed,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
        }
    }
}

impl Default for ForestParams {
    fn default() -> Self {
        Self::new(DEFAULT_TREES, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    pub dim: usize,
    pub params: ForestParams,
    /// Out-of-bag accuracy over samples left out by at least one tree.
    pub oob_accuracy: Option<f64>,
}

fn cmp_sparse(a: &SparseVector, b: &SparseVector) -> Ordering {
    for (x, y) in a.entries.iter().zip(&b.entries) {
        let o = x.0.cmp(&y.0).then_with(|| x.1.total_cmp(&y.1));
        if o != Ordering::Equal {
            return o;
        }
    }
    a.entries.len().cmp(&b.entries.len())
}

pub fn train_forest(x: &[SparseVector], y: &[Label], dim: usize, params: &ForestParams) -> Result<RandomForest> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("{} feature rows but {} labels", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument("a forest needs at least two training samples".into()));
    }
    if !y.contains(&Label::Good) || !y.contains(&Label::Bad) {
        return Err(Error::InvalidArgument("training labels contain a single class".into()));
    }
    if params.n_trees == 0 {
        return Err(Error::InvalidArgument("n_trees must be positive".into()));
    }
    if dim == 0 || x.iter().any(|v| v.entries.iter().any(|&(i, _)| i as usize >= dim)) {
        return Err(Error::Shape(format!("feature index outside dimension {dim}")));
    }

    // Canonical order makes the forest independent of input order.
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| y[a].class_index().cmp(&y[b].class_index()).then_with(|| cmp_sparse(&x[a], &x[b])));
    let n = order.len();
    let mut dense = vec![0.0; n * dim];
    for (row, &i) in order.iter().enumerate() {
        for &(f, v) in &x[i].entries {
            dense[row * dim + f as usize] = v;
        }
    }
    let labels: Vec<usize> = order.iter().map(|&i| y[i].class_index()).collect();
    let features = Features { data: &dense, dim };
    let max_features = match params.max_features {
        MaxFeatures::Sqrt => ((dim as f64).sqrt().ceil() as usize).max(1),
        MaxFeatures::All => dim,
    };

    let grown: Vec<(DecisionTree, Vec<bool>)> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let seed = params.seed.wrapping_add(t as u64);
            let mut rng = rng_from_seed(seed);
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut in_bag = vec![false; n];
            for &r in &rows {
                in_bag[r] = true;
            }
            (DecisionTree::fit(&features, &labels, &rows, max_features, seed, &mut rng), in_bag)
        })
        .collect();

    let mut correct = 0usize;
    let mut counted = 0usize;
    for row in 0..n {
        let mut sum = 0.0;
        let mut k = 0usize;
        for (tree, in_bag) in &grown {
            if !in_bag[row] {
                sum += tree.predict_proba(|f| dense[row * dim + f as usize]);
                k += 1;
            }
        }
        if k > 0 {
            counted += 1;
            let predicted = usize::from(sum / k as f64 >= 0.5);
            correct += usize::from(predicted == labels[row]);
        }
    }

    Ok(RandomForest {
        trees: grown.into_iter().map(|(t, _)| t).collect(),
        dim,
        params: params.clone(),
        oob_accuracy: (counted > 0).then(|| correct as f64 / counted as f64),
    })
}

/// Mean over trees of the leaf frequency of class good.
pub fn forest_predict_proba(forest: &RandomForest, x: &SparseVector) -> f64 {
    let sum: f64 = forest.trees.iter().map(|t| t.predict_proba(|f| x.get(f))).sum();
    sum / forest.trees.len() as f64
}

/// Decision rule: good iff the probability is at least one half.
pub fn predict_label(proba: f64) -> Label {
    if proba >= 0.5 {
        Label::Good
    } else {
        Label::Bad
    }
}

/// TF-IDF features plus forest, as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub version: u32,
    pub tfidf: TfidfModel,
    pub forest: RandomForest,
}

impl ForestModel {
    pub fn seed(&self) -> u64 {
        self.forest.params.seed
    }

    pub fn predict_proba(&self, source: &str) -> f64 {
        forest_predict_proba(&self.forest, &transform_source(&self.tfidf, source))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: ForestModel = serde_json::from_slice(&std::fs::read(path)?)?;
        if m.version != MODEL_VERSION {
            return Err(Error::Format(format!("unsupported forest model version {}", m.version)));
        }
        if m.tfidf.df.len() != m.tfidf.vocabulary.len() || m.forest.dim != m.tfidf.dim() {
            return Err(Error::Format("forest model dimensions are inconsistent".into()));
        }
        Ok(m)
    }
}

/// Fits TF-IDF and the forest on the labelled samples of `train`.
pub fn fit_baseline(train: &Dataset, vocabulary: &Vocabulary, params: &ForestParams) -> Result<ForestModel> {
    let labelled: Vec<_> = train.samples.iter().filter(|s| s.label.is_some()).cloned().collect();
    let labelled = Dataset::new(labelled)?;
    let tfidf = fit_tfidf(&labelled, vocabulary)?;
    let x: Vec<SparseVector> = labelled.samples.iter().map(|s| transform_source(&tfidf, &s.source)).collect();
    let y: Vec<Label> = labelled.samples.iter().filter_map(|s| s.label).collect();
    let forest = train_forest(&x, &y, tfidf.dim(), params)?;
    Ok(ForestModel {
        version: MODEL_VERSION,
        tfidf,
        forest,
    })
}
