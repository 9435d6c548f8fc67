use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_layers: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub max_len: usize,
    pub vocab_size: usize,
    pub dropout: f64,
}

impl ModelConfig {
    /// Desk-scale defaults: 4 layers, width 128, 4 heads, feed-forward 512, 256 positions.
    pub fn desk(vocab_size: usize) -> Self {
        ModelConfig {
            n_layers: 4,
            d_model: 128,
            n_heads: 4,
            d_ff: 512,
            max_len: 256,
            vocab_size,
            dropout: 0.1,
        }
    }

    /// The same model with half the layers (at least one).
    pub fn half_depth(&self) -> Self {
        ModelConfig {
            n_layers: (self.n_layers / 2).max(1),
            ..self.clone()
        }
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("n_layers", self.n_layers),
            ("d_model", self.d_model),
            ("n_heads", self.n_heads),
            ("d_ff", self.d_ff),
            ("max_len", self.max_len),
            ("vocab_size", self.vocab_size),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidArgument(format!("{name} must be at least 1")));
        }
        if self.d_model % self.n_heads != 0 {
            return Err(Error::InvalidArgument(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(ModelConfig::desk(100).validate().is_ok());
        let mut c = ModelConfig::desk(100);
        c.n_heads = 3;
        assert!(c.validate().is_err());
        c = ModelConfig::desk(100);
        c.dropout = 1.0;
        assert!(c.validate().is_err());
        c = ModelConfig::desk(0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn half_depth() {
        assert_eq!(ModelConfig::desk(10).half_depth().n_layers, 2);
        let one = ModelConfig {
            n_layers: 1,
            ..ModelConfig::desk(10)
        };
        assert_eq!(one.half_depth().n_layers, 1);
    }
}
