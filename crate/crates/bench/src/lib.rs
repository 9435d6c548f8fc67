//! Shared inputs for the criterion benches.

use codeqa_core::corpus::{split_dataset, synthesize_corpus, SplitRatios};
use codeqa_core::encoder::{ModelConfig, Parameters};
use codeqa_core::seed::rng_from_seed;
use codeqa_core::tokenizer::{build_vocab, encode, EncodedSequence, Vocabulary};
use codeqa_core::Dataset;

/// A split synthetic task corpus with its vocabulary.
pub fn task_corpus(n: usize, seed: u64) -> (Dataset, Vocabulary) {
    let d = synthesize_corpus(n, 0.3, seed).expect("valid synthetic parameters");
    let d = split_dataset(&d, SplitRatios::default(), seed).expect("both classes present");
    let vocab = build_vocab(&d, 2, 20_000).expect("non-empty corpus");
    (d, vocab)
}

/// Randomly initialised encoder of the given depth and width.
pub fn encoder(vocab_size: usize, n_layers: usize, d_model: usize) -> Parameters {
    let config = ModelConfig {
        n_layers,
        d_model,
        n_heads: 4,
        d_ff: 4 * d_model,
        max_len: 256,
        vocab_size,
        dropout: 0.1,
    };
    Parameters::init(&config, &mut rng_from_seed(1)).expect("valid config")
}

pub fn encoded(data: &Dataset, vocab: &Vocabulary, max_len: usize) -> Vec<EncodedSequence> {
    data.samples.iter().map(|s| encode(s, vocab, max_len).expect("encodable")).collect()
}
