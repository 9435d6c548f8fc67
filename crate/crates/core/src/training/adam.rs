use crate::encoder::Parameters;
use crate::error::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moment estimates mirroring the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Parameters,
    pub v: Parameters,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &Parameters) -> Self {
        AdamState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }
}

/// One Adam step with bias correction and decoupled weight decay
/// `p ← p − lr·wd·p − lr·m̂/(√v̂ + ε)`.
pub fn adam_step(p: &mut Parameters, g: &Parameters, s: &mut AdamState, lr: f64, weight_decay: f64) -> Result<()> {
    p.check_compatible(g)?;
    p.check_compatible(&s.m)?;
    if let Some(name) = g.first_non_finite() {
        return Err(Error::NonFiniteGradient(name.to_string()));
    }
    s.t += 1;
    let c1 = 1.0 - BETA1.powi(s.t as i32);
    let c2 = 1.0 - BETA2.powi(s.t as i32);
    for k in 0..p.tensors.len() {
        let (pt, gt) = (&mut p.tensors[k], &g.tensors[k]);
        let (mt, vt) = (&mut s.m.tensors[k], &mut s.v.tensors[k]);
        for i in 0..pt.len() {
            let gi = gt[i];
            mt[i] = BETA1 * mt[i] + (1.0 - BETA1) * gi;
            vt[i] = BETA2 * vt[i] + (1.0 - BETA2) * gi * gi;
            let mhat = mt[i] / c1;
            let vhat = vt[i] / c2;
            pt[i] -= lr * weight_decay * pt[i] + lr * mhat / (vhat.sqrt() + EPSILON);
        }
    }
    Ok(())
}
