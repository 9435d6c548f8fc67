use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::adam::{adam_step, AdamState};
use super::{batch_gradient, Item, LogRow, TrainConfig, TrainLog};
use crate::corpus::{Dataset, Label};
use crate::encoder::{predict_proba, Checkpoint, Head, Parameters};
use crate::error::{Error, Result};
use crate::seed::SeedStream;
use crate::tokenizer::{encode, EncodedSequence, Vocabulary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinetuneOutcome {
    pub checkpoint: Checkpoint,
    pub log: TrainLog,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept; 0 when no epoch ran.
    pub best_epoch: usize,
}

/// Encodes every sample of a labelled dataset.
pub fn encode_labelled(data: &Dataset, vocabulary: &Vocabulary, max_len: usize) -> Result<(Vec<EncodedSequence>, Vec<Label>)> {
    let mut seqs = Vec::with_capacity(data.len());
    let mut labels = Vec::with_capacity(data.len());
    for s in &data.samples {
        let label = s.label.ok_or_else(|| Error::Data(format!("sample {} has no label", s.id)))?;
        seqs.push(encode(s, vocabulary, max_len)?);
        labels.push(label);
    }
    Ok((seqs, labels))
}

/// Accuracy of the `proba ≥ 0.5 ⇒ good` rule.
pub fn evaluate_accuracy(params: &Parameters, seqs: &[EncodedSequence], labels: &[Label]) -> Result<f64> {
    if seqs.is_empty() {
        return Err(Error::InvalidArgument("cannot evaluate on an empty set".into()));
    }
    let probs = predict_proba(params, seqs)?;
    let correct = probs
        .iter()
        .zip(labels)
        .filter(|(p, l)| (**p >= 0.5) == (**l == Label::Good))
        .count();
    Ok(correct as f64 / seqs.len() as f64)
}

/// Trains all parameters plus a freshly initialised classification head for
/// `cfg.epochs` epochs and keeps the epoch with the best validation accuracy
/// (the earliest on ties; the last epoch when `val` is empty).
pub fn finetune(start: &Checkpoint, train: &Dataset, val: &Dataset, cfg: &TrainConfig) -> Result<FinetuneOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Data("fine-tuning set is empty".into()));
    }
    let vocab = &start.header.vocabulary;
    let max_len = start.params.config.max_len;
    let (train_x, train_y) = encode_labelled(train, vocab, max_len)?;
    let (val_x, val_y) = encode_labelled(val, vocab, max_len)?;

    let streams = SeedStream::new(cfg.seed).derive("finetune");
    let mut params = start.params.clone();
    params.reset_cls_head(&mut streams.derive("init").rng());
    let mut adam = AdamState::new(&params);
    let mut log = TrainLog::default();
    let mut records = Vec::new();
    let mut best: Option<(f64, usize, Parameters, u64)> = None;
    let mut step = start.header.step;
    let mut order: Vec<usize> = (0..train_x.len()).collect();

    for epoch in 1..=cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut streams.derive("shuffle").derive_index("epoch", epoch as u64).rng());
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let weight = 1.0 / chunk.len() as f64;
            let items: Vec<Item> = chunk
                .iter()
                .map(|&i| Item {
                    seq: train_x[i].clone(),
                    head: Head::Cls,
                    targets: vec![train_y[i].class_index()],
                    weight,
                })
                .collect();
            let dropout_seed = streams.derive("dropout").derive_index("step", step).root();
            let (loss, grads) = batch_gradient(&params, &items, Some(dropout_seed))?;
            adam_step(&mut params, &grads, &mut adam, cfg.learning_rate, cfg.weight_decay)?;
            step += 1;
            epoch_loss += loss;
            batches += 1;
            log.rows.push(LogRow {
                step,
                loss,
                lr: cfg.learning_rate,
            });
        }
        let val_accuracy = if val_x.is_empty() {
            None
        } else {
            Some(evaluate_accuracy(&params, &val_x, &val_y)?)
        };
        records.push(EpochRecord {
            epoch,
            train_loss: epoch_loss / batches as f64,
            val_accuracy,
        });
        let score = val_accuracy.unwrap_or(f64::NEG_INFINITY);
        let better = match &best {
            None => true,
            Some((b, ..)) => score > *b || val_accuracy.is_none(),
        };
        if better {
            best = Some((score, epoch, params.clone(), step));
        }
    }

    let (best_epoch, params, step) = match best {
        Some((_, e, p, s)) => (e, p, s),
        None => (0, params, step),
    };
    let mut provenance = start.header.provenance.clone();
    provenance["finetune"] = json!({
        "train_hash": train.content_hash(),
        "val_hash": val.content_hash(),
        "config": cfg,
        "epochs": records,
        "best_epoch": best_epoch,
    });
    let checkpoint = Checkpoint::new(params, vocab.clone(), start.header.seed, step, provenance)?;
    Ok(FinetuneOutcome {
        checkpoint,
        log,
        epochs: records,
        best_epoch,
    })
}
