//! Forward and backward passes of the pre-LayerNorm encoder.
//!
//! Only positions with `attention_mask == 1` are computed. PAD keys would
//! receive an additive `-inf` score and hence zero weight, so dropping them
//! gives the same hidden states for every real position; PAD rows of the
//! MLM logits are reported as zeros.

use rand::Rng as _;
use rayon::prelude::*;

use super::ops::{self, attention, attention_backward, gemm, layer_norm_rows, matmul, LnCache, View, LN_EPS};
use super::params::{LayerParam, Parameters};
use crate::error::{Error, Result};
use crate::seed::{rng_from_seed, Rng};
use crate::tokenizer::EncodedSequence;

/// Output head applied on top of the final hidden states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Head {
    /// Two logits from the CLS position.
    Cls,
    /// Vocabulary logits at the listed sequence positions.
    Mlm(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Mlm,
    Cls,
}

#[derive(Debug, Clone)]
struct LayerTape {
    ln1: LnCache,
    a: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    probs: Vec<Vec<f64>>,
    o: Vec<f64>,
    drop1: Option<Vec<f64>>,
    ln2: LnCache,
    b: Vec<f64>,
    pre: Vec<f64>,
    act: Vec<f64>,
    drop2: Option<Vec<f64>>,
}

/// Activations of one sequence's forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    specs_len: usize,
    head: Head,
    positions: Vec<usize>,
    ids: Vec<u32>,
    max_len: usize,
    emb_drop: Option<Vec<f64>>,
    layers: Vec<LayerTape>,
    final_ln: LnCache,
    z: Vec<f64>,
    pub logits: Vec<f64>,
}

impl Tape {
    /// Attention weights of one head over all `max_len` positions; PAD rows and columns are zero.
    pub fn attention_weights(&self, layer: usize, head: usize) -> Vec<f64> {
        let n = self.positions.len();
        let mut full = vec![0.0; self.max_len * self.max_len];
        let p = &self.layers[layer].probs[head];
        for (r, &pr) in self.positions.iter().enumerate() {
            for (c, &pc) in self.positions.iter().enumerate() {
                full[pr * self.max_len + pc] = p[r * n + c];
            }
        }
        full
    }

    /// Final hidden states (after the last layer norm) at the real positions.
    pub fn hidden(&self) -> &[f64] {
        &self.z
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }
}

fn gather_cols(x: &[f64], n: usize, d: usize, start: usize, w: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * w);
    for r in 0..n {
        out.extend_from_slice(&x[r * d + start..r * d + start + w]);
    }
    out
}

fn scatter_cols(x: &mut [f64], src: &[f64], n: usize, d: usize, start: usize, w: usize) {
    for r in 0..n {
        x[r * d + start..r * d + start + w].copy_from_slice(&src[r * w..(r + 1) * w]);
    }
}

fn dropout(x: &mut [f64], rate: f64, rng: Option<&mut Rng>) -> Option<Vec<f64>> {
    let rng = rng?;
    if rate == 0.0 {
        return None;
    }
    let keep = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = (0..x.len()).map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep }).collect();
    for (v, m) in x.iter_mut().zip(&mask) {
        *v *= m;
    }
    Some(mask)
}

fn add_into(x: &mut [f64], y: &[f64]) {
    for (a, b) in x.iter_mut().zip(y) {
        *a += b;
    }
}

/// Runs one sequence. `dropout_seed` enables dropout with a dedicated stream.
pub fn forward_sequence(p: &Parameters, seq: &EncodedSequence, head: &Head, dropout_seed: Option<u64>) -> Result<(Vec<f64>, Tape)> {
    let c = &p.config;
    if seq.ids.len() != c.max_len || seq.attention_mask.len() != c.max_len {
        return Err(Error::Shape(format!(
            "sequence of length {} does not match max_len {}",
            seq.ids.len(),
            c.max_len
        )));
    }
    if let Some(&bad) = seq.ids.iter().find(|&&id| id as usize >= c.vocab_size) {
        return Err(Error::Shape(format!("token id {bad} outside vocabulary of {}", c.vocab_size)));
    }
    let positions: Vec<usize> = (0..c.max_len).filter(|&i| seq.attention_mask[i] == 1).collect();
    if positions.is_empty() {
        return Err(Error::Shape("sequence has no attended positions".into()));
    }
    match head {
        Head::Cls if positions[0] != 0 => return Err(Error::Shape("CLS position is masked out".into())),
        Head::Mlm(at) => {
            if let Some(&bad) = at.iter().find(|&&i| i >= c.max_len || seq.attention_mask[i] != 1) {
                return Err(Error::Shape(format!("MLM position {bad} is not an attended position")));
            }
        }
        _ => {}
    }
    let (n, d, nh, dh) = (positions.len(), c.d_model, c.n_heads, c.head_dim());
    let ids: Vec<u32> = positions.iter().map(|&i| seq.ids[i]).collect();
    let mut rng = dropout_seed.map(rng_from_seed);

    let tok = p.get(p.token_emb());
    let pe = p.get(p.pos_emb());
    let mut x = vec![0.0; n * d];
    for (r, (&id, &pos)) in ids.iter().zip(&positions).enumerate() {
        let row = &mut x[r * d..(r + 1) * d];
        for j in 0..d {
            row[j] = tok[id as usize * d + j] + pe[pos * d + j];
        }
    }
    let emb_drop = dropout(&mut x, c.dropout, rng.as_mut());

    let mut layers = Vec::with_capacity(c.n_layers);
    for l in 0..c.n_layers {
        let w = |which| p.get(p.layer(l, which));
        let (a, ln1) = layer_norm_rows(&x, w(LayerParam::Ln1Gain), w(LayerParam::Ln1Bias), LN_EPS);
        let av = View::new(&a, n, d);
        let q = matmul(av, View::new(w(LayerParam::Wq), d, d));
        let k = matmul(av, View::new(w(LayerParam::Wk), d, d));
        let v = matmul(av, View::new(w(LayerParam::Wv), d, d));
        let mut o = vec![0.0; n * d];
        let mut probs = Vec::with_capacity(nh);
        for h in 0..nh {
            let qh = gather_cols(&q, n, d, h * dh, dh);
            let kh = gather_cols(&k, n, d, h * dh, dh);
            let vh = gather_cols(&v, n, d, h * dh, dh);
            let (oh, ph) = attention(&qh, &kh, &vh, n, dh, None);
            scatter_cols(&mut o, &oh, n, d, h * dh, dh);
            probs.push(ph);
        }
        let mut att = matmul(View::new(&o, n, d), View::new(w(LayerParam::Wo), d, d));
        let drop1 = dropout(&mut att, c.dropout, rng.as_mut());
        add_into(&mut x, &att);

        let (b, ln2) = layer_norm_rows(&x, w(LayerParam::Ln2Gain), w(LayerParam::Ln2Bias), LN_EPS);
        let mut pre = matmul(View::new(&b, n, d), View::new(w(LayerParam::W1), d, c.d_ff));
        ops::add_row(&mut pre, w(LayerParam::B1));
        let act: Vec<f64> = pre.iter().map(|&v| ops::gelu(v)).collect();
        let mut f = matmul(View::new(&act, n, c.d_ff), View::new(w(LayerParam::W2), c.d_ff, d));
        ops::add_row(&mut f, w(LayerParam::B2));
        let drop2 = dropout(&mut f, c.dropout, rng.as_mut());
        add_into(&mut x, &f);

        layers.push(LayerTape {
            ln1,
            a,
            q,
            k,
            v,
            probs,
            o,
            drop1,
            ln2,
            b,
            pre,
            act,
            drop2,
        });
    }
    let (z, final_ln) = layer_norm_rows(&x, p.get(p.final_gain()), p.get(p.final_bias()), LN_EPS);

    let logits = match head {
        Head::Cls => {
            let mut l = matmul(View::new(&z[..d], 1, d), View::new(p.get(p.cls_w()), d, 2));
            add_into(&mut l, p.get(p.cls_b()));
            l
        }
        Head::Mlm(at) => {
            let zs = select_rows(&z, d, &positions, at);
            let mut l = matmul(View::new(&zs, at.len(), d), View::new(p.get(p.mlm_w()), d, c.vocab_size));
            ops::add_row(&mut l, p.get(p.mlm_b()));
            l
        }
    };
    let tape = Tape {
        specs_len: p.specs.len(),
        head: head.clone(),
        positions,
        ids,
        max_len: c.max_len,
        emb_drop,
        layers,
        final_ln,
        z,
        logits: logits.clone(),
    };
    Ok((logits, tape))
}

fn row_of(positions: &[usize], pos: usize) -> usize {
    positions.binary_search(&pos).expect("position is attended")
}

fn select_rows(z: &[f64], d: usize, positions: &[usize], at: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(at.len() * d);
    for &pos in at {
        let r = row_of(positions, pos);
        out.extend_from_slice(&z[r * d..(r + 1) * d]);
    }
    out
}

/// Accumulates the gradient of `sum(d_logits · logits)` into `grads`.
pub fn backward(p: &Parameters, tape: &Tape, d_logits: &[f64], grads: &mut Parameters) -> Result<()> {
    let c = &p.config;
    if tape.specs_len != p.specs.len() || tape.layers.len() != c.n_layers || grads.specs != p.specs {
        return Err(Error::Shape("tape, parameters and gradients disagree".into()));
    }
    if d_logits.len() != tape.logits.len() {
        return Err(Error::Shape(format!(
            "upstream gradient has {} entries for {} logits",
            d_logits.len(),
            tape.logits.len()
        )));
    }
    let (n, d, nh, dh, ff) = (tape.positions.len(), c.d_model, c.n_heads, c.head_dim(), c.d_ff);
    let z = &tape.z;
    let mut dz = vec![0.0; n * d];
    match &tape.head {
        Head::Cls => {
            let (wi, bi) = (p.cls_w(), p.cls_b());
            gemm(View::new(&z[..d], 1, d).t(), View::new(d_logits, 1, 2), 1.0, &mut grads.tensors[wi]);
            add_into(&mut grads.tensors[bi], d_logits);
            gemm(View::new(d_logits, 1, 2), View::new(p.get(wi), d, 2).t(), 0.0, &mut dz[..d]);
        }
        Head::Mlm(at) => {
            let m = at.len();
            let v = c.vocab_size;
            let zs = select_rows(z, d, &tape.positions, at);
            let (wi, bi) = (p.mlm_w(), p.mlm_b());
            gemm(View::new(&zs, m, d).t(), View::new(d_logits, m, v), 1.0, &mut grads.tensors[wi]);
            ops::col_sum_into(d_logits, &mut grads.tensors[bi]);
            let dzs = matmul(View::new(d_logits, m, v), View::new(p.get(wi), d, v).t());
            for (k, &pos) in at.iter().enumerate() {
                let r = row_of(&tape.positions, pos);
                add_into(&mut dz[r * d..(r + 1) * d], &dzs[k * d..(k + 1) * d]);
            }
        }
    }

    let (fg, fb) = (p.final_gain(), p.final_bias());
    let mut dx = {
        let (g_gain, g_bias) = two_mut(&mut grads.tensors, fg, fb);
        ops::layer_norm_backward(&dz, p.get(fg), &tape.final_ln, g_gain, g_bias)
    };

    for l in (0..c.n_layers).rev() {
        let t = &tape.layers[l];
        let idx = |which| p.layer(l, which);
        // feed-forward block; dx is the gradient at the block output
        let mut df = dx.clone();
        if let Some(m) = &t.drop2 {
            df.iter_mut().zip(m).for_each(|(g, s)| *g *= s);
        }
        gemm(View::new(&t.act, n, ff).t(), View::new(&df, n, d), 1.0, &mut grads.tensors[idx(LayerParam::W2)]);
        ops::col_sum_into(&df, &mut grads.tensors[idx(LayerParam::B2)]);
        let mut dpre = matmul(View::new(&df, n, d), View::new(p.get(idx(LayerParam::W2)), ff, d).t());
        dpre.iter_mut().zip(&t.pre).for_each(|(g, &h)| *g *= ops::gelu_grad(h));
        gemm(View::new(&t.b, n, d).t(), View::new(&dpre, n, ff), 1.0, &mut grads.tensors[idx(LayerParam::W1)]);
        ops::col_sum_into(&dpre, &mut grads.tensors[idx(LayerParam::B1)]);
        let db = matmul(View::new(&dpre, n, ff), View::new(p.get(idx(LayerParam::W1)), d, ff).t());
        let dx1 = {
            let (g, b) = two_mut(&mut grads.tensors, idx(LayerParam::Ln2Gain), idx(LayerParam::Ln2Bias));
            ops::layer_norm_backward(&db, p.get(idx(LayerParam::Ln2Gain)), &t.ln2, g, b)
        };
        add_into(&mut dx, &dx1);

        // attention block
        let mut datt = dx.clone();
        if let Some(m) = &t.drop1 {
            datt.iter_mut().zip(m).for_each(|(g, s)| *g *= s);
        }
        gemm(View::new(&t.o, n, d).t(), View::new(&datt, n, d), 1.0, &mut grads.tensors[idx(LayerParam::Wo)]);
        let d_o = matmul(View::new(&datt, n, d), View::new(p.get(idx(LayerParam::Wo)), d, d).t());
        let mut dq = vec![0.0; n * d];
        let mut dk = vec![0.0; n * d];
        let mut dv = vec![0.0; n * d];
        for h in 0..nh {
            let qh = gather_cols(&t.q, n, d, h * dh, dh);
            let kh = gather_cols(&t.k, n, d, h * dh, dh);
            let vh = gather_cols(&t.v, n, d, h * dh, dh);
            let doh = gather_cols(&d_o, n, d, h * dh, dh);
            let (dqh, dkh, dvh) = attention_backward(&qh, &kh, &vh, &t.probs[h], &doh, n, dh);
            scatter_cols(&mut dq, &dqh, n, d, h * dh, dh);
            scatter_cols(&mut dk, &dkh, n, d, h * dh, dh);
            scatter_cols(&mut dv, &dvh, n, d, h * dh, dh);
        }
        let av = View::new(&t.a, n, d);
        let mut da = vec![0.0; n * d];
        for (which, g) in [(LayerParam::Wq, &dq), (LayerParam::Wk, &dk), (LayerParam::Wv, &dv)] {
            gemm(av.t(), View::new(g, n, d), 1.0, &mut grads.tensors[idx(which)]);
            gemm(View::new(g, n, d), View::new(p.get(idx(which)), d, d).t(), 1.0, &mut da);
        }
        let dx0 = {
            let (g, b) = two_mut(&mut grads.tensors, idx(LayerParam::Ln1Gain), idx(LayerParam::Ln1Bias));
            ops::layer_norm_backward(&da, p.get(idx(LayerParam::Ln1Gain)), &t.ln1, g, b)
        };
        add_into(&mut dx, &dx0);
    }

    if let Some(m) = &tape.emb_drop {
        dx.iter_mut().zip(m).for_each(|(g, s)| *g *= s);
    }
    let (te, pe) = two_mut(&mut grads.tensors, p.token_emb(), p.pos_emb());
    for (r, (&id, &pos)) in tape.ids.iter().zip(&tape.positions).enumerate() {
        let row = &dx[r * d..(r + 1) * d];
        add_into(&mut te[id as usize * d..(id as usize + 1) * d], row);
        add_into(&mut pe[pos * d..(pos + 1) * d], row);
    }
    Ok(())
}

fn two_mut(t: &mut [Vec<f64>], a: usize, b: usize) -> (&mut [f64], &mut [f64]) {
    assert!(a < b);
    let (lo, hi) = t.split_at_mut(b);
    (&mut lo[a], &mut hi[0])
}

/// Batched forward. MLM logits are `[batch × max_len × vocab]` with zero PAD
/// rows; classification logits are `[batch × 2]`.
pub fn forward(p: &Parameters, batch: &[EncodedSequence], mode: Mode, dropout_seed: Option<u64>) -> Result<(Vec<f64>, Vec<Tape>)> {
    let c = &p.config;
    let results: Vec<Result<(Vec<f64>, Tape)>> = batch
        .par_iter()
        .enumerate()
        .map(|(i, seq)| {
            let head = match mode {
                Mode::Cls => Head::Cls,
                Mode::Mlm => Head::Mlm((0..seq.attention_mask.len()).filter(|&j| seq.attention_mask[j] == 1).collect()),
            };
            forward_sequence(p, seq, &head, dropout_seed.map(|s| s.wrapping_add(i as u64)))
        })
        .collect();
    let mut logits = Vec::new();
    let mut tapes = Vec::with_capacity(batch.len());
    for r in results {
        let (l, tape) = r?;
        match mode {
            Mode::Cls => logits.extend_from_slice(&l),
            Mode::Mlm => {
                let v = c.vocab_size;
                let mut full = vec![0.0; c.max_len * v];
                for (k, &pos) in tape.positions.iter().enumerate() {
                    full[pos * v..(pos + 1) * v].copy_from_slice(&l[k * v..(k + 1) * v]);
                }
                logits.extend_from_slice(&full);
            }
        }
        tapes.push(tape);
    }
    Ok((logits, tapes))
}

/// Probability of class good (index 1) for each sequence, dropout disabled.
pub fn predict_proba(p: &Parameters, batch: &[EncodedSequence]) -> Result<Vec<f64>> {
    batch
        .par_iter()
        .map(|seq| {
            let (l, _) = forward_sequence(p, seq, &Head::Cls, None)?;
            Ok(ops::softmax(&l)[1])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::config::ModelConfig;
    use crate::seed::rng_from_seed;
    use crate::tokenizer::{CLS, PAD, SEP};

    fn tiny(dropout: f64) -> ModelConfig {
        ModelConfig {
            n_layers: 2,
            d_model: 8,
            n_heads: 2,
            d_ff: 12,
            max_len: 7,
            vocab_size: 15,
            dropout,
        }
    }

    fn seq(body: &[u32], max_len: usize) -> EncodedSequence {
        EncodedSequence::from_body(body, max_len)
    }

    #[test]
    fn duplicated_batch_gives_identical_logits() {
        let p = Parameters::init(&tiny(0.0), &mut rng_from_seed(3)).unwrap();
        let s = seq(&[7, 8, 9], 7);
        let (one, _) = forward(&p, std::slice::from_ref(&s), Mode::Cls, None).unwrap();
        let (two, _) = forward(&p, &[s.clone(), s], Mode::Cls, None).unwrap();
        assert_eq!(&two[..2], &one[..]);
        assert_eq!(&two[2..], &one[..]);
    }

    #[test]
    fn pad_ids_do_not_affect_logits() {
        let p = Parameters::init(&tiny(0.0), &mut rng_from_seed(3)).unwrap();
        let s = seq(&[7, 8], 7);
        let mut t = s.clone();
        for i in s.n_real..7 {
            t.ids[i] = 11;
        }
        let a = forward(&p, &[s], Mode::Cls, None).unwrap().0;
        let b = forward(&p, &[t], Mode::Cls, None).unwrap().0;
        assert_eq!(a, b);
    }

    #[test]
    fn forward_is_deterministic_and_replays() {
        let p = Parameters::init(&tiny(0.1), &mut rng_from_seed(3)).unwrap();
        let s = seq(&[7, 8, 9, 10], 7);
        let (a, tape) = forward_sequence(&p, &s, &Head::Cls, None).unwrap();
        let (b, _) = forward_sequence(&p, &s, &Head::Cls, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(tape.logits, a);
        let (c, _) = forward_sequence(&p, &s, &Head::Cls, Some(9)).unwrap();
        let (e, _) = forward_sequence(&p, &s, &Head::Cls, Some(9)).unwrap();
        assert_eq!(c, e);
        assert_ne!(a, c);
    }

    #[test]
    fn attention_ignores_pad_positions() {
        let p = Parameters::init(&tiny(0.0), &mut rng_from_seed(3)).unwrap();
        let s = seq(&[7, 8], 7);
        let (_, tape) = forward_sequence(&p, &s, &Head::Cls, None).unwrap();
        let w = tape.attention_weights(1, 1);
        for r in 0..s.n_real {
            let row = &w[r * 7..(r + 1) * 7];
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(row[s.n_real..].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn mlm_logits_have_full_shape() {
        let c = tiny(0.0);
        let p = Parameters::init(&c, &mut rng_from_seed(3)).unwrap();
        let s = seq(&[7, 8], 7);
        let (l, _) = forward(&p, &[s.clone()], Mode::Mlm, None).unwrap();
        assert_eq!(l.len(), c.max_len * c.vocab_size);
        assert!(l[s.n_real * c.vocab_size..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_errors() {
        let p = Parameters::init(&tiny(0.0), &mut rng_from_seed(3)).unwrap();
        assert!(forward_sequence(&p, &seq(&[7], 6), &Head::Cls, None).is_err());
        assert!(forward_sequence(&p, &seq(&[99], 7), &Head::Cls, None).is_err());
        assert!(forward_sequence(&p, &seq(&[7], 7), &Head::Mlm(vec![5]), None).is_err());
        let (_, tape) = forward_sequence(&p, &seq(&[7], 7), &Head::Cls, None).unwrap();
        let mut g = p.zeros_like();
        assert!(backward(&p, &tape, &[1.0], &mut g).is_err());
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_gradients() {
        let p = Parameters::init(&tiny(0.0), &mut rng_from_seed(3)).unwrap();
        let (_, tape) = forward_sequence(&p, &seq(&[7, 8, 9], 7), &Head::Cls, None).unwrap();
        let mut g = p.zeros_like();
        backward(&p, &tape, &[0.0, 0.0], &mut g).unwrap();
        assert!(g.tensors.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn unused_positions_get_no_gradient() {
        let p = Parameters::init(&tiny(0.0), &mut rng_from_seed(3)).unwrap();
        let s = seq(&[7, 8], 7);
        let (_, tape) = forward_sequence(&p, &s, &Head::Cls, None).unwrap();
        let mut g = p.zeros_like();
        backward(&p, &tape, &[1.0, -1.0], &mut g).unwrap();
        let d = p.config.d_model;
        let pe = &g.tensors[p.pos_emb()];
        assert!(pe[s.n_real * d..].iter().all(|&v| v == 0.0));
        assert!(pe[..d].iter().any(|&v| v != 0.0));
        // rows of tokens that do not occur, PAD included
        let te = &g.tensors[p.token_emb()];
        assert!(te[PAD as usize * d..(PAD as usize + 1) * d].iter().all(|&v| v == 0.0));
        assert!(te[12 * d..13 * d].iter().all(|&v| v == 0.0));
        assert!(te[CLS as usize * d..(CLS as usize + 1) * d].iter().any(|&v| v != 0.0));
        assert!(te[SEP as usize * d..(SEP as usize + 1) * d].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn swapping_tokens_and_positions_permutes_hidden_states() {
        let c = tiny(0.0);
        let mut p = Parameters::init(&c, &mut rng_from_seed(8)).unwrap();
        let s = seq(&[7, 8, 9], 7);
        let (_, a) = forward_sequence(&p, &s, &Head::Cls, None).unwrap();
        let (i, j) = (1usize, 3usize);
        let mut t = s.clone();
        t.ids.swap(i, j);
        let d = c.d_model;
        let pe = p.pos_emb();
        for k in 0..d {
            p.tensors[pe].swap(i * d + k, j * d + k);
        }
        let (_, b) = forward_sequence(&p, &t, &Head::Cls, None).unwrap();
        let (ha, hb) = (a.hidden(), b.hidden());
        for k in 0..d {
            assert!((ha[i * d + k] - hb[j * d + k]).abs() < 1e-12);
            assert!((ha[j * d + k] - hb[i * d + k]).abs() < 1e-12);
            assert!((ha[2 * d + k] - hb[2 * d + k]).abs() < 1e-12);
        }
    }
}
