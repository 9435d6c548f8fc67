//! Dense numeric kernels on row-major `f64` buffers.

use crate::error::{Error, Result};

pub const LN_EPS: f64 = 1e-5;

/// Read-only strided matrix view.
#[derive(Clone, Copy)]
pub struct View<'a> {
    pub data: &'a [f64],
    pub rows: usize,
    pub cols: usize,
    pub rs: usize,
    pub cs: usize,
}

impl<'a> View<'a> {
    pub fn new(data: &'a [f64], rows: usize, cols: usize) -> Self {
        View {
            data,
            rows,
            cols,
            rs: cols,
            cs: 1,
        }
    }

    pub fn t(self) -> Self {
        View {
            data: self.data,
            rows: self.cols,
            cols: self.rows,
            rs: self.cs,
            cs: self.rs,
        }
    }

    fn check(&self) {
        if self.rows > 0 && self.cols > 0 {
            let last = (self.rows - 1) * self.rs + (self.cols - 1) * self.cs;
            assert!(last < self.data.len(), "matrix view out of bounds");
        }
    }
}

/// `c = a·b + beta·c` where `c` is a contiguous `a.rows × b.cols` buffer.
pub fn gemm(a: View, b: View, beta: f64, c: &mut [f64]) {
    assert_eq!(a.cols, b.rows, "inner dimensions differ");
    let (m, k, n) = (a.rows, a.cols, b.cols);
    assert_eq!(c.len(), m * n, "output buffer has the wrong size");
    a.check();
    b.check();
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.iter_mut().for_each(|x| *x *= beta);
        return;
    }
    // SAFETY: every index touched is bounds-checked above through the view
    // extents, and `c` is an exclusively borrowed contiguous m×n buffer.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            a.rs as isize,
            a.cs as isize,
            b.data.as_ptr(),
            b.rs as isize,
            b.cs as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub fn matmul(a: View, b: View) -> Vec<f64> {
    let mut c = vec![0.0; a.rows * b.cols];
    gemm(a, b, 0.0, &mut c);
    c
}

/// Adds `row` to every row of the `rows × row.len()` buffer `x`.
pub fn add_row(x: &mut [f64], row: &[f64]) {
    for r in x.chunks_exact_mut(row.len()) {
        for (v, b) in r.iter_mut().zip(row) {
            *v += b;
        }
    }
}

/// Accumulates column sums of `x` into `out`.
pub fn col_sum_into(x: &[f64], out: &mut [f64]) {
    for r in x.chunks_exact(out.len()) {
        for (o, v) in out.iter_mut().zip(r) {
            *o += v;
        }
    }
}

/// Numerically stable softmax (max subtraction); `-inf` entries get weight 0.
pub fn softmax(x: &[f64]) -> Vec<f64> {
    let mut out = x.to_vec();
    softmax_in_place(&mut out);
    out
}

pub fn softmax_in_place(x: &mut [f64]) {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in x.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in x.iter_mut() {
        *v /= sum;
    }
}

pub fn log_softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + x.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    x.iter().map(|v| v - lse).collect()
}

/// Mean negative log-likelihood over rows whose target differs from
/// `ignore_index`, with its gradient with respect to the logits.
pub fn cross_entropy(logits: &[f64], classes: usize, targets: &[usize], ignore_index: usize) -> Result<(f64, Vec<f64>)> {
    if classes == 0 || logits.len() != targets.len() * classes {
        return Err(Error::Shape(format!(
            "{} logits do not match {} targets of {classes} classes",
            logits.len(),
            targets.len()
        )));
    }
    let counted = targets.iter().filter(|&&t| t != ignore_index).count();
    if counted == 0 {
        return Err(Error::InvalidArgument("every target position is ignored".into()));
    }
    let mut grad = vec![0.0; logits.len()];
    let mut loss = 0.0;
    for (r, &t) in targets.iter().enumerate() {
        if t == ignore_index {
            continue;
        }
        if t >= classes {
            return Err(Error::Shape(format!("target {t} outside {classes} classes")));
        }
        let row = &logits[r * classes..(r + 1) * classes];
        let ls = log_softmax(row);
        loss -= ls[t];
        let g = &mut grad[r * classes..(r + 1) * classes];
        for (gi, l) in g.iter_mut().zip(&ls) {
            *gi = l.exp() / counted as f64;
        }
        g[t] -= 1.0 / counted as f64;
    }
    Ok((loss / counted as f64, grad))
}

/// Normalised rows and reciprocal standard deviations kept for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct LnCache {
    pub xhat: Vec<f64>,
    pub rstd: Vec<f64>,
}

pub fn layer_norm(x: &[f64], gain: &[f64], bias: &[f64], eps: f64) -> Vec<f64> {
    layer_norm_rows(x, gain, bias, eps).0
}

pub fn layer_norm_rows(x: &[f64], gain: &[f64], bias: &[f64], eps: f64) -> (Vec<f64>, LnCache) {
    let d = gain.len();
    let rows = x.len() / d;
    let mut y = vec![0.0; x.len()];
    let mut cache = LnCache {
        xhat: vec![0.0; x.len()],
        rstd: vec![0.0; rows],
    };
    for r in 0..rows {
        let row = &x[r * d..(r + 1) * d];
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let rstd = 1.0 / (var + eps).sqrt();
        cache.rstd[r] = rstd;
        for j in 0..d {
            let xh = (row[j] - mean) * rstd;
            cache.xhat[r * d + j] = xh;
            y[r * d + j] = gain[j] * xh + bias[j];
        }
    }
    (y, cache)
}

/// Returns dx; accumulates gain and bias gradients.
pub fn layer_norm_backward(dy: &[f64], gain: &[f64], cache: &LnCache, dgain: &mut [f64], dbias: &mut [f64]) -> Vec<f64> {
    let d = gain.len();
    let mut dx = vec![0.0; dy.len()];
    for (r, &rstd) in cache.rstd.iter().enumerate() {
        let dyr = &dy[r * d..(r + 1) * d];
        let xh = &cache.xhat[r * d..(r + 1) * d];
        let mut mean_dxh = 0.0;
        let mut mean_dxh_xh = 0.0;
        for j in 0..d {
            dgain[j] += dyr[j] * xh[j];
            dbias[j] += dyr[j];
            let dxh = dyr[j] * gain[j];
            mean_dxh += dxh;
            mean_dxh_xh += dxh * xh[j];
        }
        mean_dxh /= d as f64;
        mean_dxh_xh /= d as f64;
        for j in 0..d {
            let dxh = dyr[j] * gain[j];
            dx[r * d + j] = rstd * (dxh - mean_dxh - xh[j] * mean_dxh_xh);
        }
    }
    dx
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044715;

/// GELU, tanh approximation.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

pub fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

/// Single-head scaled dot-product attention over `n` positions of width `dh`.
/// Keys with `key_mask[j] == false` get an additive `-inf` score.
/// Returns the output rows and the `n × n` weight matrix.
pub fn attention(q: &[f64], k: &[f64], v: &[f64], n: usize, dh: usize, key_mask: Option<&[bool]>) -> (Vec<f64>, Vec<f64>) {
    let scale = 1.0 / (dh as f64).sqrt();
    let mut p = matmul(View::new(q, n, dh), View::new(k, n, dh).t());
    for row in p.chunks_exact_mut(n) {
        for (j, s) in row.iter_mut().enumerate() {
            *s *= scale;
            if key_mask.is_some_and(|m| !m[j]) {
                *s = f64::NEG_INFINITY;
            }
        }
        softmax_in_place(row);
    }
    let out = matmul(View::new(&p, n, n), View::new(v, n, dh));
    (out, p)
}

/// Gradients of [`attention`] (without mask) given the cached weights.
pub fn attention_backward(q: &[f64], k: &[f64], v: &[f64], p: &[f64], d_out: &[f64], n: usize, dh: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let scale = 1.0 / (dh as f64).sqrt();
    let mut ds = matmul(View::new(d_out, n, dh), View::new(v, n, dh).t());
    let dv = matmul(View::new(p, n, n).t(), View::new(d_out, n, dh));
    for (dsr, pr) in ds.chunks_exact_mut(n).zip(p.chunks_exact(n)) {
        let dot: f64 = dsr.iter().zip(pr).map(|(a, b)| a * b).sum();
        for (d, &pv) in dsr.iter_mut().zip(pr) {
            *d = pv * (*d - dot) * scale;
        }
    }
    let dq = matmul(View::new(&ds, n, n), View::new(k, n, dh));
    let dk = matmul(View::new(&ds, n, n).t(), View::new(q, n, dh));
    (dq, dk, dv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax(&[0.0, 0.0]), vec![0.5, 0.5]);
        assert_eq!(softmax(&[1000.0, 1000.0]), vec![0.5, 0.5]);
        assert!(close(&softmax(&[1f64.ln(), 3f64.ln()]), &[0.25, 0.75], 1e-15));
        assert_eq!(softmax(&[0.0, f64::NEG_INFINITY]), vec![1.0, 0.0]);
    }

    #[test]
    fn cross_entropy_examples() {
        let (l, _) = cross_entropy(&[0.0, 0.0], 2, &[1], usize::MAX).unwrap();
        assert!((l - 2f64.ln()).abs() < 1e-15);
        assert!((l - 0.693147).abs() < 1e-6);
        let (l, _) = cross_entropy(&[1f64.ln(), 3f64.ln()], 2, &[0], usize::MAX).unwrap();
        assert!((l + 0.25f64.ln()).abs() < 1e-12);
        assert!((l - 1.3863).abs() < 1e-4);
        let (l, _) = cross_entropy(&[50.0, -50.0], 2, &[0], usize::MAX).unwrap();
        assert!(l < 1e-40);
        assert!(matches!(cross_entropy(&[0.0, 0.0], 2, &[7], 7), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn cross_entropy_ignores_positions() {
        let logits = [0.3, -0.2, 1.0, 2.0];
        let (both, _) = cross_entropy(&logits, 2, &[0, 9], 9).unwrap();
        let (one, g) = cross_entropy(&logits[..2], 2, &[0], 9).unwrap();
        assert_eq!(both, one);
        let (_, g2) = cross_entropy(&logits, 2, &[0, 9], 9).unwrap();
        assert_eq!(&g2[..2], &g[..]);
        assert_eq!(&g2[2..], &[0.0, 0.0]);
    }

    #[test]
    fn layer_norm_examples() {
        assert_eq!(layer_norm(&[2.0, 2.0, 2.0], &[1.0; 3], &[0.0; 3], 1e-5), vec![0.0; 3]);
        assert!(close(&layer_norm(&[1.0, 3.0], &[1.0; 2], &[0.0; 2], 0.0), &[-1.0, 1.0], 1e-15));
        let x = [0.3, -1.2, 4.0, 2.2, 0.0];
        let y = layer_norm(&x, &[1.0; 5], &[0.0; 5], 1e-12);
        let mean = y.iter().sum::<f64>() / 5.0;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 5.0;
        assert!(mean.abs() < 1e-9);
        assert!((var - 1.0).abs() < 1e-6);
    }

    #[test]
    fn gelu_derivative_matches_differences() {
        for &x in &[-3.0, -0.5, 0.0, 0.7, 2.5] {
            let h = 1e-6;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((fd - gelu_grad(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn gemm_with_transposes() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2×3
        let b = [1.0, 0.0, 0.0, 1.0, 1.0, 1.0]; // 3×2
        assert_eq!(matmul(View::new(&a, 2, 3), View::new(&b, 3, 2)), vec![4.0, 5.0, 10.0, 11.0]);
        // aᵀ·a is 3×3
        let ata = matmul(View::new(&a, 2, 3).t(), View::new(&a, 2, 3));
        assert_eq!(ata, vec![17.0, 22.0, 27.0, 22.0, 29.0, 36.0, 27.0, 36.0, 45.0]);
    }

    #[test]
    fn identical_values_pass_through_attention() {
        let n = 4;
        let dh = 3;
        let q: Vec<f64> = (0..n * dh).map(|i| (i as f64 * 0.37).sin()).collect();
        let k: Vec<f64> = (0..n * dh).map(|i| (i as f64 * 0.91).cos()).collect();
        let row = [0.5, -1.5, 2.0];
        let v: Vec<f64> = row.iter().cycle().take(n * dh).copied().collect();
        let (out, _) = attention(&q, &k, &v, n, dh, None);
        for r in out.chunks_exact(dh) {
            assert!(close(r, &row, 1e-12));
        }
    }

    #[test]
    fn zero_keys_give_uniform_weights_over_unmasked() {
        let n = 5;
        let dh = 2;
        let q: Vec<f64> = (0..n * dh).map(|i| i as f64).collect();
        let k = vec![0.0; n * dh];
        let v: Vec<f64> = (0..n * dh).map(|i| i as f64 * 0.1).collect();
        let mask = [true, true, true, false, false];
        let (_, p) = attention(&q, &k, &v, n, dh, Some(&mask));
        for r in p.chunks_exact(n) {
            assert!(close(&r[..3], &[1.0 / 3.0; 3], 1e-15));
            assert_eq!(&r[3..], &[0.0, 0.0]);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn softmax_is_a_distribution(x in proptest::collection::vec(-500.0f64..500.0, 1..40)) {
                let p = softmax(&x);
                prop_assert!(p.iter().all(|&v| v >= 0.0));
                prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }

            #[test]
            fn attention_rows_sum_to_one(n in 1usize..8, seed in 0u64..1000, masked in proptest::collection::vec(any::<bool>(), 8)) {
                let dh = 3;
                let f = |i: usize, s: f64| ((i as f64 + 1.0) * s + seed as f64).sin();
                let q: Vec<f64> = (0..n * dh).map(|i| f(i, 0.3)).collect();
                let k: Vec<f64> = (0..n * dh).map(|i| f(i, 0.7)).collect();
                let v: Vec<f64> = (0..n * dh).map(|i| f(i, 1.1)).collect();
                let mut mask: Vec<bool> = masked[..n].to_vec();
                mask[0] = true;
                let (_, p) = attention(&q, &k, &v, n, dh, Some(&mask));
                for r in p.chunks_exact(n) {
                    prop_assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                    for j in 0..n {
                        if !mask[j] {
                            prop_assert_eq!(r[j], 0.0);
                        }
                    }
                }
            }
        }
    }
}
