use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::seed::Rng;

pub const INIT_STD: f64 = 0.02;

/// Tensors per transformer layer, in declared order.
pub const LAYER_TENSORS: [&str; 12] = ["ln1.gain", "ln1.bias", "wq", "wk", "wv", "wo", "ln2.gain", "ln2.bias", "w1", "b1", "w2", "b2"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerParam {
    Ln1Gain = 0,
    Ln1Bias,
    Wq,
    Wk,
    Wv,
    Wo,
    Ln2Gain,
    Ln2Bias,
    W1,
    B1,
    W2,
    B2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Init {
    Normal,
    Zero,
    One,
}

fn layout(c: &ModelConfig) -> Vec<(TensorSpec, Init)> {
    let t = |name: String, shape: Vec<usize>, init| (TensorSpec { name, shape }, init);
    let (d, f) = (c.d_model, c.d_ff);
    let mut out = vec![
        t("token_embedding".into(), vec![c.vocab_size, d], Init::Normal),
        t("position_embedding".into(), vec![c.max_len, d], Init::Normal),
    ];
    for l in 0..c.n_layers {
        let p = |s: &str| format!("layer{l}.{s}");
        out.push(t(p("ln1.gain"), vec![d], Init::One));
        out.push(t(p("ln1.bias"), vec![d], Init::Zero));
        for w in ["wq", "wk", "wv", "wo"] {
            out.push(t(p(w), vec![d, d], Init::Normal));
        }
        out.push(t(p("ln2.gain"), vec![d], Init::One));
        out.push(t(p("ln2.bias"), vec![d], Init::Zero));
        out.push(t(p("w1"), vec![d, f], Init::Normal));
        out.push(t(p("b1"), vec![f], Init::Zero));
        out.push(t(p("w2"), vec![f, d], Init::Normal));
        out.push(t(p("b2"), vec![d], Init::Zero));
    }
    out.push(t("final_ln.gain".into(), vec![d], Init::One));
    out.push(t("final_ln.bias".into(), vec![d], Init::Zero));
    out.push(t("mlm_head.weight".into(), vec![d, c.vocab_size], Init::Normal));
    out.push(t("mlm_head.bias".into(), vec![c.vocab_size], Init::Zero));
    out.push(t("cls_head.weight".into(), vec![d, 2], Init::Normal));
    out.push(t("cls_head.bias".into(), vec![2], Init::Zero));
    out
}

/// Named tensors in declared order. Also used for gradients and optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    pub config: ModelConfig,
    pub specs: Vec<TensorSpec>,
    pub tensors: Vec<Vec<f64>>,
}

impl Parameters {
    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let specs: Vec<TensorSpec> = layout(config).into_iter().map(|(s, _)| s).collect();
        let tensors = specs.iter().map(|s| vec![0.0; s.len()]).collect();
        Ok(Parameters {
            config: config.clone(),
            specs,
            tensors,
        })
    }

    /// Weights drawn from N(0, 0.02²), biases zero, layer-norm gains one.
    pub fn init(config: &ModelConfig, rng: &mut Rng) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        let layout = layout(config);
        for (k, (_, init)) in layout.iter().enumerate() {
            p.init_tensor(k, *init, rng);
        }
        Ok(p)
    }

    fn init_tensor(&mut self, k: usize, init: Init, rng: &mut Rng) {
        let normal = Normal::new(0.0, INIT_STD).expect("valid normal");
        for v in &mut self.tensors[k] {
            *v = match init {
                Init::Normal => normal.sample(rng),
                Init::Zero => 0.0,
                Init::One => 1.0,
            };
        }
    }

    /// Fresh classification head.
    pub fn reset_cls_head(&mut self, rng: &mut Rng) {
        let w = self.cls_w();
        self.init_tensor(w, Init::Normal, rng);
        let b = self.cls_b();
        self.init_tensor(b, Init::Zero, rng);
    }

    pub fn zeros_like(&self) -> Self {
        Parameters {
            config: self.config.clone(),
            specs: self.specs.clone(),
            tensors: self.tensors.iter().map(|t| vec![0.0; t.len()]).collect(),
        }
    }

    pub fn n_values(&self) -> usize {
        self.tensors.iter().map(Vec::len).sum()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.specs.iter().position(|s| s.name == name)
    }

    pub fn token_emb(&self) -> usize {
        0
    }

    pub fn pos_emb(&self) -> usize {
        1
    }

    pub fn layer(&self, l: usize, which: LayerParam) -> usize {
        2 + l * LAYER_TENSORS.len() + which as usize
    }

    pub fn final_gain(&self) -> usize {
        2 + self.config.n_layers * LAYER_TENSORS.len()
    }

    pub fn final_bias(&self) -> usize {
        self.final_gain() + 1
    }

    pub fn mlm_w(&self) -> usize {
        self.final_gain() + 2
    }

    pub fn mlm_b(&self) -> usize {
        self.final_gain() + 3
    }

    pub fn cls_w(&self) -> usize {
        self.final_gain() + 4
    }

    pub fn cls_b(&self) -> usize {
        self.final_gain() + 5
    }

    pub fn get(&self, k: usize) -> &[f64] {
        &self.tensors[k]
    }

    pub fn check_compatible(&self, other: &Parameters) -> Result<()> {
        if self.specs != other.specs {
            return Err(Error::Shape("parameter layouts differ".into()));
        }
        Ok(())
    }

    /// `self += other`, tensor by tensor.
    pub fn add_assign(&mut self, other: &Parameters) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.tensors.iter_mut().flatten().for_each(|x| *x *= s);
    }

    /// Name of the first tensor holding a NaN or infinity.
    pub fn first_non_finite(&self) -> Option<&str> {
        self.tensors
            .iter()
            .zip(&self.specs)
            .find(|(t, _)| t.iter().any(|v| !v.is_finite()))
            .map(|(_, s)| s.name.as_str())
    }

    /// Copies every tensor whose name and shape match `other` (used to seed a
    /// model from a checkpoint of a different vocabulary or depth).
    pub fn copy_matching(&mut self, other: &Parameters) -> usize {
        let mut copied = 0;
        for (k, spec) in self.specs.iter().enumerate() {
            if let Some(j) = other.specs.iter().position(|s| s == spec) {
                self.tensors[k].clone_from(&other.tensors[j]);
                copied += 1;
            }
        }
        copied
    }
}
