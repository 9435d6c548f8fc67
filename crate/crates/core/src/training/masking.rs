use rand::Rng as _;

use crate::seed::Rng;
use crate::tokenizer::{EncodedSequence, MASK, N_SPECIALS};

/// Target value of positions that carry no MLM loss.
pub const IGNORE_INDEX: usize = usize::MAX;

/// Whether MLM may select this position: attended and not a special token.
pub fn is_eligible(seq: &EncodedSequence, i: usize) -> bool {
    seq.attention_mask[i] == 1 && seq.ids[i] as usize >= N_SPECIALS
}

/// Selects each eligible position with probability `rate`; a selected
/// position becomes MASK (80%), a random non-special id (10%) or stays (10%).
/// Targets hold the original id at selected positions and
/// [`IGNORE_INDEX`] elsewhere.
pub fn mask_batch(batch: &[EncodedSequence], rate: f64, vocab_size: usize, rng: &mut Rng) -> (Vec<EncodedSequence>, Vec<Vec<usize>>) {
    let mut masked = Vec::with_capacity(batch.len());
    let mut targets = Vec::with_capacity(batch.len());
    for seq in batch {
        let mut out = seq.clone();
        let mut t = vec![IGNORE_INDEX; seq.ids.len()];
        for i in 0..seq.ids.len() {
            if !is_eligible(seq, i) || rng.random::<f64>() >= rate {
                continue;
            }
            t[i] = seq.ids[i] as usize;
            let r: f64 = rng.random();
            if r < 0.8 {
                out.ids[i] = MASK;
            } else if r < 0.9 && vocab_size > N_SPECIALS {
                out.ids[i] = rng.random_range(N_SPECIALS as u32..vocab_size as u32);
            }
        }
        masked.push(out);
        targets.push(t);
    }
    (masked, targets)
}
