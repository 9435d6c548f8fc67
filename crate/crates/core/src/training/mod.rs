//! MLM pre-training schemes, classification fine-tuning and the optimizer.

pub mod adam;
pub mod finetune;
pub mod masking;
pub mod pretrain;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoder::{backward, cross_entropy, forward_sequence, Head, Parameters};
use crate::error::{Error, Result};
use crate::tokenizer::EncodedSequence;

pub use adam::{adam_step, AdamState};
pub use finetune::{encode_labelled, evaluate_accuracy, finetune, FinetuneOutcome};
pub use masking::{is_eligible, mask_batch, IGNORE_INDEX};
pub use pretrain::{continue_pretraining, init_checkpoint, pretrain, CorpusRole, PretrainCorpus, Scheme};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub weight_decay: f64,
    pub seed: u64,
    pub mask_rate: f64,
}

impl Default for TrainConfig {
    /// Fine-tuning defaults: lr 2e-5, batch 16, 3 epochs, weight decay 0.01.
    fn default() -> Self {
        TrainConfig {
            learning_rate: 2e-5,
            batch_size: 16,
            epochs: 3,
            weight_decay: 0.01,
            seed: 0,
            mask_rate: 0.15,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::InvalidArgument(format!("weight decay {} must be non-negative", self.weight_decay)));
        }
        if !(0.0..=1.0).contains(&self.mask_rate) {
            return Err(Error::InvalidArgument(format!("mask rate {} outside [0, 1]", self.mask_rate)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub step: u64,
    pub loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub rows: Vec<LogRow>,
}

impl TrainLog {
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "step,loss,lr")?;
        for r in &self.rows {
            writeln!(w, "{},{},{}", r.step, r.loss, r.lr)?;
        }
        Ok(())
    }

    /// Mean loss of the first and last `window` rows.
    pub fn window_means(&self, window: usize) -> Option<(f64, f64)> {
        let n = self.rows.len();
        if n == 0 || window == 0 {
            return None;
        }
        let w = window.min(n);
        let mean = |rows: &[LogRow]| rows.iter().map(|r| r.loss).sum::<f64>() / rows.len() as f64;
        Some((mean(&self.rows[..w]), mean(&self.rows[n - w..])))
    }
}

/// One training example of a batch: a sequence, its head and targets, and
/// the weight of its mean loss in the batch loss.
pub(crate) struct Item {
    pub seq: EncodedSequence,
    pub head: Head,
    pub targets: Vec<usize>,
    pub weight: f64,
}

/// Weighted batch loss and its gradient. Per-example gradients are computed
/// in parallel and summed in batch order.
pub(crate) fn batch_gradient(params: &Parameters, items: &[Item], dropout_seed: Option<u64>) -> Result<(f64, Parameters)> {
    let parts: Vec<Result<(f64, Parameters)>> = items
        .par_iter()
        .enumerate()
        .map(|(i, item)| {
            let (logits, tape) = forward_sequence(params, &item.seq, &item.head, dropout_seed.map(|s| s.wrapping_add(i as u64)))?;
            let classes = logits.len() / item.targets.len();
            let (loss, mut dl) = cross_entropy(&logits, classes, &item.targets, IGNORE_INDEX)?;
            dl.iter_mut().for_each(|g| *g *= item.weight);
            let mut g = params.zeros_like();
            backward(params, &tape, &dl, &mut g)?;
            Ok((loss * item.weight, g))
        })
        .collect();
    let mut total = params.zeros_like();
    let mut loss = 0.0;
    for part in parts {
        let (l, g) = part?;
        loss += l;
        total.add_assign(&g);
    }
    Ok((loss, total))
}
