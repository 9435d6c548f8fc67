//! Shapley attribution over contiguous token spans.
//!
//! A span absent from a coalition has all of its positions replaced by the
//! MASK token; the value of a coalition is the model's probability of the
//! target label.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::encoder::{predict_proba, Parameters};
use crate::error::{Error, Result};
use crate::seed::rng_from_seed;
use crate::tokenizer::{EncodedSequence, MASK};

pub const DEFAULT_MAX_SPAN: usize = 4;
pub const MAX_EXACT_SPANS: usize = 12;

/// Half-open lexeme ranges, disjoint, in order and covering every lexeme.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanPartition {
    pub spans: Vec<(usize, usize)>,
}

impl SpanPartition {
    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }
}

fn bracket_pairs(lexemes: &[String]) -> Vec<(usize, usize)> {
    let mut stack: Vec<(usize, &str)> = Vec::new();
    let mut pairs = Vec::new();
    for (i, lx) in lexemes.iter().enumerate() {
        match lx.as_str() {
            "(" | "[" | "{" => stack.push((i, lx.as_str())),
            ")" | "]" | "}" => {
                let open = match lx.as_str() {
                    ")" => "(",
                    "]" => "[",
                    _ => "{",
                };
                if let Some(k) = stack.iter().rposition(|&(_, o)| o == open) {
                    pairs.push((stack[k].0, i));
                    stack.truncate(k);
                }
            }
            _ => {}
        }
    }
    pairs
}

/// Greedy left-to-right spans of at most `max_span` lexemes. A span ends
/// early rather than separate a bracket pair short enough to fit in one span.
pub fn partition_spans(lexemes: &[String], max_span: usize) -> Result<SpanPartition> {
    if max_span == 0 {
        return Err(Error::InvalidArgument("max_span must be at least 1".into()));
    }
    let pairs: Vec<(usize, usize)> = bracket_pairs(lexemes).into_iter().filter(|(o, c)| c - o < max_span).collect();
    let mut spans = Vec::new();
    let mut i = 0;
    while i < lexemes.len() {
        let mut end = (i + max_span).min(lexemes.len());
        while let Some(&(o, _)) = pairs.iter().filter(|&&(o, c)| o > i && o < end && c >= end).min() {
            end = o;
        }
        spans.push((i, end));
        i = end;
    }
    Ok(SpanPartition { spans })
}

/// Something that scores encoded sequences with a probability of class good.
pub trait Classifier: Sync {
    fn proba_good(&self, batch: &[EncodedSequence]) -> Result<Vec<f64>>;
}

impl Classifier for Parameters {
    fn proba_good(&self, batch: &[EncodedSequence]) -> Result<Vec<f64>> {
        predict_proba(self, batch)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub sample_id: String,
    pub target: Label,
    /// Value with every span masked.
    pub base_value: f64,
    /// Value of the unmasked sample.
    pub full_value: f64,
    pub spans: Vec<(usize, usize)>,
    pub values: Vec<f64>,
    /// Per-span standard errors of sampled estimates.
    pub std_errors: Option<Vec<f64>>,
    pub n_permutations: Option<usize>,
}

impl Attribution {
    pub fn efficiency_gap(&self) -> f64 {
        self.base_value + self.values.iter().sum::<f64>() - self.full_value
    }
}

/// Exact Shapley values of an `n`-player game given by `value(coalition bitmask)`.
pub fn shapley_exact_values(n: usize, value: impl Fn(u64) -> f64) -> Result<Vec<f64>> {
    if n > MAX_EXACT_SPANS {
        return Err(Error::InvalidArgument(format!(
            "{n} spans exceed the exact limit of {MAX_EXACT_SPANS}; use permutation sampling"
        )));
    }
    let table: Vec<f64> = (0..1u64 << n).map(&value).collect();
    Ok(exact_from_table(n, &table))
}

fn exact_from_table(n: usize, table: &[f64]) -> Vec<f64> {
    // weight(|S|) = |S|! (n - |S| - 1)! / n!
    let fact: Vec<f64> = (0..=n).scan(1.0, |acc, k| {
        if k > 0 {
            *acc *= k as f64;
        }
        Some(*acc)
    })
    .collect();
    let mut phi = vec![0.0; n];
    for (i, p) in phi.iter_mut().enumerate() {
        let bit = 1u64 << i;
        for s in 0..(1u64 << n) {
            if s & bit != 0 {
                continue;
            }
            let k = s.count_ones() as usize;
            let w = fact[k] * fact[n - k - 1] / fact[n];
            *p += w * (table[(s | bit) as usize] - table[s as usize]);
        }
    }
    phi
}

/// Permutation-sampling estimate with standard errors. Coalition values are
/// requested in batches through `values` and cached.
pub fn shapley_sample_values(
    n: usize,
    n_permutations: usize,
    seed: u64,
    mut values: impl FnMut(&[u64]) -> Result<Vec<f64>>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if n_permutations == 0 {
        return Err(Error::InvalidArgument("at least one permutation is required".into()));
    }
    if n > 63 {
        return Err(Error::InvalidArgument("at most 63 spans are supported".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut cache: HashMap<u64, f64> = HashMap::new();
    let mut sum = vec![0.0; n];
    let mut sum_sq = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..n_permutations {
        order.sort_unstable();
        order.shuffle(&mut rng);
        let mut chain = Vec::with_capacity(n + 1);
        let mut s = 0u64;
        chain.push(s);
        for &i in &order {
            s |= 1 << i;
            chain.push(s);
        }
        let missing: Vec<u64> = chain.iter().copied().filter(|c| !cache.contains_key(c)).collect();
        if !missing.is_empty() {
            let v = values(&missing)?;
            for (c, x) in missing.into_iter().zip(v) {
                cache.insert(c, x);
            }
        }
        for (k, &i) in order.iter().enumerate() {
            let delta = cache[&chain[k + 1]] - cache[&chain[k]];
            sum[i] += delta;
            sum_sq[i] += delta * delta;
        }
    }
    let m = n_permutations as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / m).collect();
    let se = sum_sq
        .iter()
        .zip(&mean)
        .map(|(sq, mu)| {
            if n_permutations < 2 {
                return f64::INFINITY;
            }
            let var = ((sq - m * mu * mu) / (m - 1.0)).max(0.0);
            (var / m).sqrt()
        })
        .collect();
    Ok((mean, se))
}

fn masked_sequence(seq: &EncodedSequence, partition: &SpanPartition, coalition: u64) -> EncodedSequence {
    let mut out = seq.clone();
    let body = seq.body_range();
    for (k, &(a, b)) in partition.spans.iter().enumerate() {
        if coalition & (1 << k) == 0 {
            for i in a..b {
                out.ids[body.start + i] = MASK;
            }
        }
    }
    out
}

fn check_partition(seq: &EncodedSequence, partition: &SpanPartition) -> Result<()> {
    let len = seq.body_range().len();
    if partition.spans.iter().any(|&(a, b)| a >= b || b > len) {
        return Err(Error::InvalidArgument(format!("span partition does not fit a body of {len} tokens")));
    }
    Ok(())
}

fn target_values(model: &dyn Classifier, seqs: &[EncodedSequence], target: Label) -> Result<Vec<f64>> {
    let p = model.proba_good(seqs)?;
    Ok(match target {
        Label::Good => p,
        Label::Bad => p.into_iter().map(|x| 1.0 - x).collect(),
    })
}

/// Exact Shapley values over at most twelve spans.
pub fn shapley_exact(
    model: &dyn Classifier,
    sample_id: &str,
    seq: &EncodedSequence,
    partition: &SpanPartition,
    target: Label,
) -> Result<Attribution> {
    check_partition(seq, partition)?;
    let n = partition.len();
    if n > MAX_EXACT_SPANS {
        return Err(Error::InvalidArgument(format!(
            "{n} spans exceed the exact limit of {MAX_EXACT_SPANS}; use permutation sampling"
        )));
    }
    let all: Vec<EncodedSequence> = (0..1u64 << n).map(|c| masked_sequence(seq, partition, c)).collect();
    let table = target_values(model, &all, target)?;
    let values = exact_from_table(n, &table);
    Ok(Attribution {
        sample_id: sample_id.to_string(),
        target,
        base_value: table[0],
        full_value: table[(1usize << n) - 1],
        spans: partition.spans.clone(),
        values,
        std_errors: None,
        n_permutations: None,
    })
}

/// Permutation-sampling Shapley values. The estimate's efficiency residual
/// is split equally across spans.
pub fn shapley_sample(
    model: &dyn Classifier,
    sample_id: &str,
    seq: &EncodedSequence,
    partition: &SpanPartition,
    target: Label,
    n_permutations: usize,
    seed: u64,
) -> Result<Attribution> {
    check_partition(seq, partition)?;
    let n = partition.len();
    let (mut values, se) = shapley_sample_values(n, n_permutations, seed, |coalitions| {
        let seqs: Vec<EncodedSequence> = coalitions.iter().map(|&c| masked_sequence(seq, partition, c)).collect();
        target_values(model, &seqs, target)
    })?;
    let ends = target_values(model, &[masked_sequence(seq, partition, 0), seq.clone()], target)?;
    let (base_value, full_value) = (ends[0], ends[1]);
    if n > 0 {
        let residual = full_value - base_value - values.iter().sum::<f64>();
        values.iter_mut().for_each(|v| *v += residual / n as f64);
    }
    Ok(Attribution {
        sample_id: sample_id.to_string(),
        target,
        base_value,
        full_value,
        spans: partition.spans.clone(),
        values,
        std_errors: Some(se),
        n_permutations: Some(n_permutations),
    })
}

/// Table of spans sorted by absolute attribution, values to three decimals.
pub fn render_report(a: &Attribution, lexemes: &[String]) -> String {
    let mut order: Vec<usize> = (0..a.values.len()).collect();
    order.sort_by(|&x, &y| a.values[y].abs().total_cmp(&a.values[x].abs()).then(x.cmp(&y)));
    let texts: Vec<String> = a.spans.iter().map(|&(s, e)| lexemes[s..e.min(lexemes.len())].join(" ")).collect();
    let width = texts.iter().map(|t| t.chars().count()).max().unwrap_or(0).max("Token n-gram".len());
    let mut out = format!(
        "sample {} | target {} | f(masked) {:.3} | f(full) {:.3}\n",
        a.sample_id, a.target, a.base_value, a.full_value
    );
    out.push_str(&format!("{:<width$}  Attribution", "Token n-gram"));
    if a.std_errors.is_some() {
        out.push_str("  Std.err");
    }
    out.push('\n');
    for i in order {
        out.push_str(&format!("{:<width$}  {:>+11.3}", texts[i], a.values[i]));
        if let Some(se) = &a.std_errors {
            out.push_str(&format!("  {:>7.3}", se[i]));
        }
        out.push('\n');
    }
    out
}
