use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::adam::{adam_step, AdamState};
use super::masking::{mask_batch, IGNORE_INDEX};
use super::{batch_gradient, Item, LogRow, TrainConfig, TrainLog};
use crate::encoder::{Checkpoint, Head, ModelConfig, Parameters};
use crate::error::{Error, Result};
use crate::seed::SeedStream;
use crate::tokenizer::{EncodedSequence, Vocabulary};

/// Number of batches averaged for the recorded initial and final losses.
const LOSS_WINDOW: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusRole {
    Generic,
    Domain,
    Task,
}

impl CorpusRole {
    pub fn name(self) -> &'static str {
        match self {
            CorpusRole::Generic => "generic",
            CorpusRole::Domain => "domain",
            CorpusRole::Task => "task",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Base,
    Dapt,
    Tapt,
    TaskOnly,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Base, Scheme::Dapt, Scheme::Tapt, Scheme::TaskOnly];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Base => "base",
            Scheme::Dapt => "dapt",
            Scheme::Tapt => "tapt",
            Scheme::TaskOnly => "task-only",
        }
    }

    /// Pre-training corpora in the order they are used.
    pub fn stages(self) -> &'static [CorpusRole] {
        match self {
            Scheme::Base => &[CorpusRole::Generic],
            Scheme::Dapt => &[CorpusRole::Generic, CorpusRole::Domain],
            Scheme::Tapt => &[CorpusRole::Generic, CorpusRole::Task],
            Scheme::TaskOnly => &[CorpusRole::Task],
        }
    }

    /// Task-only models have half the layers of the others.
    pub fn model_config(self, base: &ModelConfig) -> ModelConfig {
        match self {
            Scheme::TaskOnly => base.half_depth(),
            _ => base.clone(),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name() == s.to_ascii_lowercase().replace('_', "-"))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown scheme `{s}` (expected base, dapt, tapt or task-only)")))
    }
}

#[derive(Debug, Clone)]
pub struct PretrainCorpus {
    pub role: CorpusRole,
    pub sequences: Vec<EncodedSequence>,
    pub hash: String,
}

/// Freshly initialised model for `scheme`, before any pre-training.
pub fn init_checkpoint(base: &ModelConfig, vocabulary: &Vocabulary, seed: u64, scheme: Scheme) -> Result<Checkpoint> {
    let config = scheme.model_config(base);
    let params = Parameters::init(&config, &mut SeedStream::new(seed).derive("init").rng())?;
    Checkpoint::new(params, vocabulary.clone(), seed, 0, json!({"scheme": scheme.name(), "stages": []}))
}

/// Runs MLM epochs over one corpus starting from `start`, with fresh
/// optimizer state. Random streams depend on the seed and the corpus role
/// only, so a shared first stage gives the same result for every scheme.
pub fn continue_pretraining(start: &Checkpoint, corpus: &PretrainCorpus, cfg: &TrainConfig, scheme: Scheme) -> Result<(Checkpoint, TrainLog)> {
    cfg.validate()?;
    if corpus.sequences.is_empty() {
        return Err(Error::InvalidArgument(format!("{} corpus is empty", corpus.role.name())));
    }
    let mut params = start.params.clone();
    let config = params.config.clone();
    let stage = SeedStream::new(cfg.seed).derive("pretrain").derive(corpus.role.name());
    let mut mask_rng = stage.derive("mask").rng();
    let mut adam = AdamState::new(&params);
    let mut log = TrainLog::default();
    let mut step = start.header.step;
    let mut order: Vec<usize> = (0..corpus.sequences.len()).collect();
    for epoch in 0..cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut stage.derive_index("shuffle", epoch as u64).rng());
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<EncodedSequence> = chunk.iter().map(|&i| corpus.sequences[i].clone()).collect();
            let (masked, targets) = mask_batch(&batch, cfg.mask_rate, config.vocab_size, &mut mask_rng);
            let total: usize = targets.iter().flatten().filter(|&&t| t != IGNORE_INDEX).count();
            if total == 0 {
                continue;
            }
            let items: Vec<Item> = masked
                .into_iter()
                .zip(targets)
                .filter_map(|(seq, t)| {
                    let positions: Vec<usize> = (0..t.len()).filter(|&i| t[i] != IGNORE_INDEX).collect();
                    if positions.is_empty() {
                        return None;
                    }
                    let weight = positions.len() as f64 / total as f64;
                    let targets = positions.iter().map(|&i| t[i]).collect();
                    Some(Item {
                        seq,
                        head: Head::Mlm(positions),
                        targets,
                        weight,
                    })
                })
                .collect();
            let dropout_seed = stage.derive_index("dropout", step).root();
            let (loss, grads) = batch_gradient(&params, &items, Some(dropout_seed))?;
            adam_step(&mut params, &grads, &mut adam, cfg.learning_rate, cfg.weight_decay)?;
            step += 1;
            log.rows.push(LogRow {
                step,
                loss,
                lr: cfg.learning_rate,
            });
        }
    }

    let mut provenance = start.header.provenance.clone();
    let (initial, last) = log.window_means(LOSS_WINDOW).unzip();
    let record = json!({
        "corpus": corpus.role.name(),
        "corpus_hash": corpus.hash,
        "sequences": corpus.sequences.len(),
        "epochs": cfg.epochs,
        "learning_rate": cfg.learning_rate,
        "batch_size": cfg.batch_size,
        "weight_decay": cfg.weight_decay,
        "mask_rate": cfg.mask_rate,
        "seed": cfg.seed,
        "steps": log.rows.len(),
        "initial_loss": initial,
        "final_loss": last,
    });
    provenance["scheme"] = json!(scheme.name());
    match provenance.get_mut("stages").and_then(|s| s.as_array_mut()) {
        Some(stages) => stages.push(record),
        None => provenance["stages"] = json!([record]),
    }
    let ck = Checkpoint::new(params, start.header.vocabulary.clone(), start.header.seed, step, provenance)?;
    Ok((ck, log))
}

/// Initialises a model for `scheme` and pre-trains it on the scheme's corpora in order.
pub fn pretrain(
    scheme: Scheme,
    base: &ModelConfig,
    cfg: &TrainConfig,
    vocabulary: &Vocabulary,
    corpora: &[PretrainCorpus],
) -> Result<(Checkpoint, TrainLog)> {
    let mut ck = init_checkpoint(base, vocabulary, cfg.seed, scheme)?;
    let mut log = TrainLog::default();
    for role in scheme.stages() {
        let corpus = corpora
            .iter()
            .find(|c| c.role == *role)
            .ok_or_else(|| Error::InvalidArgument(format!("scheme {scheme} needs a {} corpus", role.name())))?;
        let (next, stage_log) = continue_pretraining(&ck, corpus, cfg, scheme)?;
        ck = next;
        log.rows.extend(stage_log.rows);
    }
    Ok((ck, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{synthesize_unlabeled, CorpusKind};
    use crate::tokenizer::{build_vocab, encode};

    fn setup() -> (Vocabulary, ModelConfig, Vec<PretrainCorpus>) {
        let kinds = [
            (CorpusRole::Generic, CorpusKind::Generic),
            (CorpusRole::Domain, CorpusKind::Domain),
            (CorpusRole::Task, CorpusKind::Task),
        ];
        let sets: Vec<_> = kinds.iter().map(|&(r, k)| (r, synthesize_unlabeled(k, 12, 3))).collect();
        let mut all = Vec::new();
        for (_, d) in &sets {
            all.extend(d.samples.iter().cloned());
        }
        let union = crate::corpus::Dataset::new(all).unwrap();
        let vocab = build_vocab(&union, 1, 100_000).unwrap();
        let config = ModelConfig {
            n_layers: 2,
            d_model: 8,
            n_heads: 2,
            d_ff: 16,
            max_len: 32,
            vocab_size: vocab.len(),
            dropout: 0.1,
        };
        let corpora = sets
            .into_iter()
            .map(|(role, d)| PretrainCorpus {
                role,
                hash: d.content_hash(),
                sequences: d.samples.iter().map(|s| encode(s, &vocab, 32).unwrap()).collect(),
            })
            .collect();
        (vocab, config, corpora)
    }

    fn cfg(epochs: usize) -> TrainConfig {
        TrainConfig {
            learning_rate: 1e-2,
            batch_size: 4,
            epochs,
            weight_decay: 0.01,
            seed: 5,
            mask_rate: 0.15,
        }
    }

    #[test]
    fn scheme_names_and_stages() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("bert".parse::<Scheme>().is_err());
        assert_eq!(Scheme::Dapt.stages(), &[CorpusRole::Generic, CorpusRole::Domain]);
        let base = ModelConfig::desk(100);
        assert_eq!(Scheme::TaskOnly.model_config(&base).n_layers, base.n_layers / 2);
        assert_eq!(Scheme::Tapt.model_config(&base).n_layers, base.n_layers);
    }

    #[test]
    fn zero_epochs_is_initialisation() {
        let (vocab, config, corpora) = setup();
        let (ck, log) = pretrain(Scheme::Tapt, &config, &cfg(0), &vocab, &corpora).unwrap();
        let init = init_checkpoint(&config, &vocab, 5, Scheme::Tapt).unwrap();
        assert_eq!(ck.params, init.params);
        assert!(log.rows.is_empty());
    }

    #[test]
    fn missing_corpus_is_an_error() {
        let (vocab, config, corpora) = setup();
        let only_generic: Vec<_> = corpora.into_iter().filter(|c| c.role == CorpusRole::Generic).collect();
        assert!(pretrain(Scheme::Dapt, &config, &cfg(1), &vocab, &only_generic).is_err());
        assert!(pretrain(Scheme::Base, &config, &cfg(1), &vocab, &only_generic).is_ok());
    }

    #[test]
    fn deterministic_and_stage_sharing() {
        let (vocab, config, corpora) = setup();
        let (a, la) = pretrain(Scheme::Dapt, &config, &cfg(1), &vocab, &corpora).unwrap();
        let (b, lb) = pretrain(Scheme::Dapt, &config, &cfg(1), &vocab, &corpora).unwrap();
        let (mut x, mut y) = (Vec::new(), Vec::new());
        a.write_to(&mut x).unwrap();
        b.write_to(&mut y).unwrap();
        assert_eq!(x, y);
        assert_eq!(la, lb);

        let (base, _) = pretrain(Scheme::Base, &config, &cfg(1), &vocab, &corpora).unwrap();
        let (dapt, _) = continue_pretraining(&base, &corpora[1], &cfg(1), Scheme::Dapt).unwrap();
        assert_eq!(dapt, a);
        assert_eq!(a.header.provenance["stages"].as_array().unwrap().len(), 2);
        assert_eq!(a.header.provenance["scheme"], "dapt");
    }

    #[test]
    fn task_only_has_half_depth() {
        let (vocab, config, corpora) = setup();
        let (ck, _) = pretrain(Scheme::TaskOnly, &config, &cfg(1), &vocab, &corpora).unwrap();
        assert_eq!(ck.header.config.n_layers, 1);
    }
}
