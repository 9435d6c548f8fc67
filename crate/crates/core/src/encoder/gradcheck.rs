//! Central finite-difference check of the analytic gradients.

use rand_distr::{Distribution, StandardNormal};

use super::config::ModelConfig;
use super::model::{backward, forward_sequence, Head};
use super::ops::cross_entropy;
use super::params::Parameters;
use crate::error::Result;
use crate::seed::rng_from_seed;
use crate::tokenizer::{EncodedSequence, N_SPECIALS};

/// Denominator floor of the relative error, so entries that are zero up to
/// rounding are compared in absolute terms.
pub const REL_ERR_FLOOR: f64 = 1e-6;

/// Multiplier applied to the initial weights of the checked model.
const WEIGHT_SCALE: f64 = 5.0;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Largest relative error per tensor, in declared order.
    pub per_tensor: Vec<(String, f64)>,
    pub max_rel_err: f64,
    pub n_checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

struct Case {
    seq: EncodedSequence,
    head: Head,
    targets: Vec<usize>,
    dropout_seed: Option<u64>,
}

fn cases(config: &ModelConfig) -> Vec<Case> {
    let v = config.vocab_size as u32;
    let body_len = config.max_len.saturating_sub(3).max(1);
    let body_a: Vec<u32> = (0..body_len as u32).map(|i| N_SPECIALS as u32 + (i * 7 + 3) % (v - N_SPECIALS as u32)).collect();
    let body_b: Vec<u32> = (0..(body_len / 2).max(1) as u32)
        .map(|i| N_SPECIALS as u32 + (i * 11 + 5) % (v - N_SPECIALS as u32))
        .collect();
    let a = EncodedSequence::from_body(&body_a, config.max_len);
    let b = EncodedSequence::from_body(&body_b, config.max_len);
    let mlm_positions: Vec<usize> = (1..a.n_real).step_by(2).collect();
    let mlm_targets = mlm_positions.iter().map(|&i| a.ids[(i + 1) % a.n_real] as usize).collect();
    vec![
        Case {
            seq: a.clone(),
            head: Head::Cls,
            targets: vec![1],
            dropout_seed: Some(17),
        },
        Case {
            seq: b,
            head: Head::Cls,
            targets: vec![0],
            dropout_seed: None,
        },
        Case {
            seq: a,
            head: Head::Mlm(mlm_positions),
            targets: mlm_targets,
            dropout_seed: Some(23),
        },
    ]
}

fn total_loss(p: &Parameters, cases: &[Case], grads: Option<&mut Parameters>) -> Result<f64> {
    let mut loss = 0.0;
    let mut grads = grads;
    for case in cases {
        let (logits, tape) = forward_sequence(p, &case.seq, &case.head, case.dropout_seed)?;
        let classes = logits.len() / case.targets.len();
        let (l, dl) = cross_entropy(&logits, classes, &case.targets, usize::MAX)?;
        loss += l;
        if let Some(g) = grads.as_deref_mut() {
            backward(p, &tape, &dl, g)?;
        }
    }
    Ok(loss)
}

/// Compares every parameter's analytic gradient of a fixed classification
/// plus MLM loss against `(L(θ+h) − L(θ−h)) / 2h`.
pub fn gradient_check(config: &ModelConfig, seed: u64, h: f64) -> Result<GradCheckReport> {
    gradient_check_at_scale(config, seed, h, WEIGHT_SCALE)
}

pub fn gradient_check_at_scale(config: &ModelConfig, seed: u64, h: f64, weight_scale: f64) -> Result<GradCheckReport> {
    let mut p = Parameters::init(config, &mut rng_from_seed(seed))?;
    // Weights above the init scale keep layer-norm inputs away from the
    // near-zero variance where differences of width h are inaccurate;
    // norms and biases get noise so their gradients are exercised.
    let mut rng = rng_from_seed(seed ^ 0x5eed);
    for k in 0..p.tensors.len() {
        let name = &p.specs[k].name;
        if name.contains("gain") || name.contains("bias") || name.ends_with(".b1") || name.ends_with(".b2") {
            for v in &mut p.tensors[k] {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v += 0.1 * z;
            }
        } else {
            p.tensors[k].iter_mut().for_each(|v| *v *= weight_scale);
        }
    }
    let cases = cases(config);
    let mut grads = p.zeros_like();
    total_loss(&p, &cases, Some(&mut grads))?;

    let mut per_tensor = Vec::with_capacity(p.tensors.len());
    let mut n_checked = 0;
    for k in 0..p.tensors.len() {
        let mut worst = 0.0f64;
        for i in 0..p.tensors[k].len() {
            let orig = p.tensors[k][i];
            p.tensors[k][i] = orig + h;
            let up = total_loss(&p, &cases, None)?;
            p.tensors[k][i] = orig - h;
            let down = total_loss(&p, &cases, None)?;
            p.tensors[k][i] = orig;
            let numeric = (up - down) / (2.0 * h);
            worst = worst.max(relative_error(grads.tensors[k][i], numeric));
            n_checked += 1;
        }
        per_tensor.push((p.specs[k].name.clone(), worst));
    }
    let max_rel_err = per_tensor.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    Ok(GradCheckReport {
        per_tensor,
        max_rel_err,
        n_checked,
    })
}

/// Configuration used by the standard check: 2 layers, width 16, 50 tokens.
pub fn small_check_config() -> ModelConfig {
    ModelConfig {
        n_layers: 2,
        d_model: 16,
        n_heads: 2,
        d_ff: 32,
        max_len: 10,
        vocab_size: 50,
        dropout: 0.1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(1.0, 1.0), 0.0);
        assert!((relative_error(2.0, 1.0) - 0.5).abs() < 1e-15);
        assert!(relative_error(1e-12, 0.0) < 1e-5);
    }

    #[test]
    fn tiny_model_gradients_match() {
        let c = ModelConfig {
            n_layers: 1,
            d_model: 4,
            n_heads: 2,
            d_ff: 6,
            max_len: 6,
            vocab_size: 12,
            dropout: 0.2,
        };
        let r = gradient_check(&c, 1, 1e-4).unwrap();
        assert!(r.max_rel_err < 1e-4, "{:?}", r.per_tensor);
    }

    #[test]
    fn standard_configuration_gradients_match() {
        let r = gradient_check(&small_check_config(), 7, 1e-4).unwrap();
        assert!(r.max_rel_err < 1e-4, "{:?}", r.per_tensor);
        assert_eq!(r.n_checked, Parameters::zeros(&small_check_config()).unwrap().n_values());
    }
}
