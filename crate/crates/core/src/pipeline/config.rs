//! Flat `key = value` configuration. Blank lines and `#` comments are
//! ignored; later assignments override earlier ones.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::baseline::DEFAULT_TREES;
use crate::corpus::{Label, SplitRatios};
use crate::encoder::ModelConfig;
use crate::error::{Error, Result};
use crate::training::{Scheme, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Labelled task dataset (JSONL); synthesized when absent.
    pub task_data: Option<PathBuf>,
    /// Score sidecar applied to `task_data`.
    pub labels: Option<PathBuf>,
    pub label_threshold: f64,
    pub generic_data: Option<PathBuf>,
    pub domain_data: Option<PathBuf>,
    pub task_unlabeled_data: Option<PathBuf>,
    pub synthetic: usize,
    pub bad_fraction: f64,
    pub n_generic: usize,
    pub n_domain: usize,
    pub n_task_unlabeled: usize,
    pub split: (f64, f64, f64),
    pub min_freq: usize,
    pub max_vocab: usize,
    pub n_layers: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub max_len: usize,
    pub dropout: f64,
    pub pretrain_lr: f64,
    pub pretrain_epochs: usize,
    pub pretrain_batch: usize,
    pub finetune_lr: f64,
    pub finetune_epochs: usize,
    pub finetune_batch: usize,
    pub weight_decay: f64,
    pub mask_rate: f64,
    pub n_trees: usize,
    pub schemes: Vec<Scheme>,
    pub positive: Label,
    pub max_span: usize,
    pub permutations: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 1,
            task_data: None,
            labels: None,
            label_threshold: 0.5,
            generic_data: None,
            domain_data: None,
            task_unlabeled_data: None,
            synthetic: 500,
            bad_fraction: 0.3,
            n_generic: 600,
            n_domain: 300,
            n_task_unlabeled: 300,
            split: (0.7, 0.15, 0.15),
            min_freq: 2,
            max_vocab: 20_000,
            n_layers: 4,
            d_model: 128,
            n_heads: 4,
            d_ff: 512,
            max_len: 256,
            dropout: 0.1,
            pretrain_lr: 1e-3,
            pretrain_epochs: 1,
            pretrain_batch: 16,
            finetune_lr: 3e-4,
            finetune_epochs: 3,
            finetune_batch: 16,
            weight_decay: 0.01,
            mask_rate: 0.15,
            n_trees: DEFAULT_TREES,
            schemes: Scheme::ALL.to_vec(),
            positive: Label::Good,
            max_span: 4,
            permutations: 2000,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| Error::InvalidArgument(format!("bad value `{value}` for `{key}`: {e}")))
}

fn path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl PipelineConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim().replace('-', "_").as_str() {
            "seed" => self.seed = parse(key, value)?,
            "task_data" => self.task_data = path(value),
            "labels" => self.labels = path(value),
            "label_threshold" => self.label_threshold = parse(key, value)?,
            "generic_data" => self.generic_data = path(value),
            "domain_data" => self.domain_data = path(value),
            "task_unlabeled_data" => self.task_unlabeled_data = path(value),
            "synthetic" => self.synthetic = parse(key, value)?,
            "bad_fraction" => self.bad_fraction = parse(key, value)?,
            "n_generic" => self.n_generic = parse(key, value)?,
            "n_domain" => self.n_domain = parse(key, value)?,
            "n_task_unlabeled" => self.n_task_unlabeled = parse(key, value)?,
            "train_ratio" => self.split.0 = parse(key, value)?,
            "val_ratio" => self.split.1 = parse(key, value)?,
            "test_ratio" => self.split.2 = parse(key, value)?,
            "min_freq" => self.min_freq = parse(key, value)?,
            "max_vocab" => self.max_vocab = parse(key, value)?,
            "n_layers" => self.n_layers = parse(key, value)?,
            "d_model" => self.d_model = parse(key, value)?,
            "n_heads" => self.n_heads = parse(key, value)?,
            "d_ff" => self.d_ff = parse(key, value)?,
            "max_len" => self.max_len = parse(key, value)?,
            "dropout" => self.dropout = parse(key, value)?,
            "pretrain_lr" => self.pretrain_lr = parse(key, value)?,
            "pretrain_epochs" => self.pretrain_epochs = parse(key, value)?,
            "pretrain_batch" => self.pretrain_batch = parse(key, value)?,
            "finetune_lr" => self.finetune_lr = parse(key, value)?,
            "finetune_epochs" => self.finetune_epochs = parse(key, value)?,
            "finetune_batch" => self.finetune_batch = parse(key, value)?,
            "weight_decay" => self.weight_decay = parse(key, value)?,
            "mask_rate" => self.mask_rate = parse(key, value)?,
            "n_trees" => self.n_trees = parse(key, value)?,
            "schemes" => {
                self.schemes = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(Scheme::from_str)
                    .collect::<Result<_>>()?
            }
            "positive" => self.positive = parse(key, value)?,
            "max_span" => self.max_span = parse(key, value)?,
            "permutations" => self.permutations = parse(key, value)?,
            other => return Err(Error::InvalidArgument(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Applies every assignment in `text`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("config line {}: expected `key = value`", n + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, file: &Path) -> Result<()> {
        let text = std::fs::read_to_string(file)
            .map_err(|e| Error::InvalidArgument(format!("cannot read config {}: {e}", file.display())))?;
        self.apply_text(&text)
    }

    /// Every key with its current value, in a stable order.
    pub fn entries(&self) -> BTreeMap<&'static str, String> {
        let schemes: Vec<&str> = self.schemes.iter().map(|s| s.name()).collect();
        BTreeMap::from([
            ("seed", self.seed.to_string()),
            ("task_data", show_path(&self.task_data)),
            ("labels", show_path(&self.labels)),
            ("label_threshold", self.label_threshold.to_string()),
            ("generic_data", show_path(&self.generic_data)),
            ("domain_data", show_path(&self.domain_data)),
            ("task_unlabeled_data", show_path(&self.task_unlabeled_data)),
            ("synthetic", self.synthetic.to_string()),
            ("bad_fraction", self.bad_fraction.to_string()),
            ("n_generic", self.n_generic.to_string()),
            ("n_domain", self.n_domain.to_string()),
            ("n_task_unlabeled", self.n_task_unlabeled.to_string()),
            ("train_ratio", self.split.0.to_string()),
            ("val_ratio", self.split.1.to_string()),
            ("test_ratio", self.split.2.to_string()),
            ("min_freq", self.min_freq.to_string()),
            ("max_vocab", self.max_vocab.to_string()),
            ("n_layers", self.n_layers.to_string()),
            ("d_model", self.d_model.to_string()),
            ("n_heads", self.n_heads.to_string()),
            ("d_ff", self.d_ff.to_string()),
            ("max_len", self.max_len.to_string()),
            ("dropout", self.dropout.to_string()),
            ("pretrain_lr", self.pretrain_lr.to_string()),
            ("pretrain_epochs", self.pretrain_epochs.to_string()),
            ("pretrain_batch", self.pretrain_batch.to_string()),
            ("finetune_lr", self.finetune_lr.to_string()),
            ("finetune_epochs", self.finetune_epochs.to_string()),
            ("finetune_batch", self.finetune_batch.to_string()),
            ("weight_decay", self.weight_decay.to_string()),
            ("mask_rate", self.mask_rate.to_string()),
            ("n_trees", self.n_trees.to_string()),
            ("schemes", schemes.join(",")),
            ("positive", self.positive.to_string()),
            ("max_span", self.max_span.to_string()),
            ("permutations", self.permutations.to_string()),
        ])
    }

    /// The configuration as config-file text; reading it back gives the same values.
    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn ratios(&self) -> Result<SplitRatios> {
        SplitRatios::new(self.split.0, self.split.1, self.split.2)
    }

    /// Encoder shape for a vocabulary of `vocab_size` entries.
    pub fn model_config(&self, vocab_size: usize) -> ModelConfig {
        ModelConfig {
            n_layers: self.n_layers,
            d_model: self.d_model,
            n_heads: self.n_heads,
            d_ff: self.d_ff,
            max_len: self.max_len,
            vocab_size,
            dropout: self.dropout,
        }
    }

    pub fn pretrain_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.pretrain_lr,
            batch_size: self.pretrain_batch,
            epochs: self.pretrain_epochs,
            weight_decay: self.weight_decay,
            seed: self.seed,
            mask_rate: self.mask_rate,
        }
    }

    pub fn finetune_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.finetune_lr,
            batch_size: self.finetune_batch,
            epochs: self.finetune_epochs,
            weight_decay: self.weight_decay,
            seed: self.seed,
            mask_rate: self.mask_rate,
        }
    }

    /// Checks value ranges and that every referenced path exists.
    pub fn validate(&self) -> Result<()> {
        for (key, p) in [
            ("task_data", &self.task_data),
            ("labels", &self.labels),
            ("generic_data", &self.generic_data),
            ("domain_data", &self.domain_data),
            ("task_unlabeled_data", &self.task_unlabeled_data),
        ] {
            if let Some(p) = p {
                if !p.exists() {
                    return Err(Error::InvalidArgument(format!("{key} path {} does not exist", p.display())));
                }
            }
        }
        if self.labels.is_some() && self.task_data.is_none() {
            return Err(Error::InvalidArgument("labels given without task_data".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::InvalidArgument("no schemes selected".into()));
        }
        if self.n_trees == 0 || self.max_span == 0 || self.permutations == 0 {
            return Err(Error::InvalidArgument("n_trees, max_span and permutations must be positive".into()));
        }
        if self.min_freq == 0 {
            return Err(Error::InvalidArgument("min_freq must be at least 1".into()));
        }
        self.ratios()?;
        self.model_config(crate::tokenizer::N_SPECIALS + 1).validate()?;
        self.pretrain_config().validate()?;
        self.finetune_config().validate()
    }
}
