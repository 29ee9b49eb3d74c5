//! Differentiable layers. All forward maps are pure; backward passes
//! consume the cache captured by the matching forward call.
//!
//! Tie-breaking is pinned for determinism: relu takes subgradient 0 at
//! exactly 0, maxpool routes gradient to the first maximal index in scan
//! order.

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;

/// C = A(m x k) * B(k x n), all row-major, C overwritten.
fn gemm(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// C += A^T(k x m -> m x k view) ... helper for transposed operands:
/// computes C(m x n) = A^T * B where A is (k x m) row-major.
fn gemm_at(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            1,
            m as isize,
            b.as_ptr(),
            n as isize,
            1,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// C(m x n) = A(m x k) * B^T where B is (n x k) row-major.
fn gemm_bt(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            1,
            k as isize,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[derive(Debug, Clone)]
pub enum Layer {
    /// Stride-1 'same'-padding convolution; weights `[k, k, c_in, c_out]`,
    /// bias `[c_out]`.
    Conv2d { weights: Tensor, bias: Tensor },
    /// p x p max pooling with stride p; spatial dims must divide by p.
    MaxPool { pool: usize },
    Relu,
    /// Affine map on the flattened input; weights `[n, m]`, bias `[m]`.
    Dense { weights: Tensor, bias: Tensor },
}

/// Per-layer forward state needed by the backward pass.
pub enum LayerCache {
    Conv {
        cols: Vec<f64>,
        in_shape: Vec<usize>,
    },
    MaxPool {
        argmax: Vec<usize>,
        in_shape: Vec<usize>,
    },
    Relu {
        mask: Vec<bool>,
    },
    Dense {
        input: Vec<f64>,
        in_shape: Vec<usize>,
    },
}

fn conv_dims(x: &Tensor, weights: &Tensor) -> Result<(usize, usize, usize, usize, usize)> {
    let (h, w, c_in) = match *x.shape() {
        [h, w, c] => (h, w, c),
        _ => {
            return Err(Error::Shape(format!(
                "conv2d expects an h x w x c input, got {:?}",
                x.shape()
            )))
        }
    };
    let (k, c_out) = match *weights.shape() {
        [k1, k2, wc, c_out] if k1 == k2 && wc == c_in => (k1, c_out),
        _ => {
            return Err(Error::Shape(format!(
                "conv2d weights {:?} incompatible with input {:?}",
                weights.shape(),
                x.shape()
            )))
        }
    };
    Ok((h, w, c_in, k, c_out))
}

/// im2col for stride-1 'same' padding: row (r*w + c) holds the k x k x c_in
/// patch centered at (r, c), zero-filled outside the image.
fn im2col(x: &[f64], h: usize, w: usize, c_in: usize, k: usize) -> Vec<f64> {
    let half = k / 2;
    let patch = k * k * c_in;
    let mut cols = vec![0.0; h * w * patch];
    for r in 0..h {
        for c in 0..w {
            let row = (r * w + c) * patch;
            for kr in 0..k {
                let ir = r as isize + kr as isize - half as isize;
                if ir < 0 || ir >= h as isize {
                    continue;
                }
                for kc in 0..k {
                    let ic = c as isize + kc as isize - half as isize;
                    if ic < 0 || ic >= w as isize {
                        continue;
                    }
                    let src = ((ir as usize) * w + ic as usize) * c_in;
                    let dst = row + (kr * k + kc) * c_in;
                    cols[dst..dst + c_in].copy_from_slice(&x[src..src + c_in]);
                }
            }
        }
    }
    cols
}

/// Adjoint of im2col: scatter-adds patch rows back into image positions.
fn col2im(cols: &[f64], h: usize, w: usize, c_in: usize, k: usize) -> Vec<f64> {
    let half = k / 2;
    let patch = k * k * c_in;
    let mut x = vec![0.0; h * w * c_in];
    for r in 0..h {
        for c in 0..w {
            let row = (r * w + c) * patch;
            for kr in 0..k {
                let ir = r as isize + kr as isize - half as isize;
                if ir < 0 || ir >= h as isize {
                    continue;
                }
                for kc in 0..k {
                    let ic = c as isize + kc as isize - half as isize;
                    if ic < 0 || ic >= w as isize {
                        continue;
                    }
                    let dst = ((ir as usize) * w + ic as usize) * c_in;
                    let src = row + (kr * k + kc) * c_in;
                    for t in 0..c_in {
                        x[dst + t] += cols[src + t];
                    }
                }
            }
        }
    }
    x
}

impl Layer {
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, LayerCache)> {
        match self {
            Layer::Conv2d { weights, bias } => {
                let (h, w, c_in, k, c_out) = conv_dims(x, weights)?;
                if bias.len() != c_out {
                    return Err(Error::Shape(format!(
                        "conv2d bias length {} != c_out {}",
                        bias.len(),
                        c_out
                    )));
                }
                let cols = im2col(x.data(), h, w, c_in, k);
                let patch = k * k * c_in;
                let mut out = vec![0.0; h * w * c_out];
                gemm(h * w, patch, c_out, &cols, weights.data(), &mut out);
                for pos in 0..h * w {
                    for co in 0..c_out {
                        out[pos * c_out + co] += bias.data()[co];
                    }
                }
                Ok((
                    Tensor::new(vec![h, w, c_out], out)?,
                    LayerCache::Conv {
                        cols,
                        in_shape: x.shape().to_vec(),
                    },
                ))
            }
            Layer::MaxPool { pool } => {
                let p = *pool;
                let (h, w, c) = match *x.shape() {
                    [h, w, c] => (h, w, c),
                    _ => {
                        return Err(Error::Shape(format!(
                            "maxpool expects h x w x c, got {:?}",
                            x.shape()
                        )))
                    }
                };
                if h % p != 0 || w % p != 0 {
                    return Err(Error::Shape(format!(
                        "maxpool {p} does not divide spatial dims {h}x{w}"
                    )));
                }
                let (oh, ow) = (h / p, w / p);
                let mut out = vec![0.0; oh * ow * c];
                let mut argmax = vec![0usize; oh * ow * c];
                let xd = x.data();
                for or in 0..oh {
                    for oc in 0..ow {
                        for ch in 0..c {
                            let mut best = f64::NEG_INFINITY;
                            let mut best_idx = 0;
                            for dr in 0..p {
                                for dc in 0..p {
                                    let idx = ((or * p + dr) * w + (oc * p + dc)) * c + ch;
                                    if xd[idx] > best {
                                        best = xd[idx];
                                        best_idx = idx;
                                    }
                                }
                            }
                            let o = (or * ow + oc) * c + ch;
                            out[o] = best;
                            argmax[o] = best_idx;
                        }
                    }
                }
                Ok((
                    Tensor::new(vec![oh, ow, c], out)?,
                    LayerCache::MaxPool {
                        argmax,
                        in_shape: x.shape().to_vec(),
                    },
                ))
            }
            Layer::Relu => {
                let mask: Vec<bool> = x.data().iter().map(|&v| v > 0.0).collect();
                let data = x.data().iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
                Ok((
                    Tensor::new(x.shape().to_vec(), data)?,
                    LayerCache::Relu { mask },
                ))
            }
            Layer::Dense { weights, bias } => {
                let (n, m) = match *weights.shape() {
                    [n, m] => (n, m),
                    _ => {
                        return Err(Error::Shape(format!(
                            "dense weights must be n x m, got {:?}",
                            weights.shape()
                        )))
                    }
                };
                if x.len() != n {
                    return Err(Error::Shape(format!(
                        "dense input length {} != weight rows {}",
                        x.len(),
                        n
                    )));
                }
                if bias.len() != m {
                    return Err(Error::Shape(format!(
                        "dense bias length {} != {}",
                        bias.len(),
                        m
                    )));
                }
                let mut out = bias.data().to_vec();
                // y = x^T W + b as 1 x n times n x m
                let mut tmp = vec![0.0; m];
                gemm(1, n, m, x.data(), weights.data(), &mut tmp);
                for j in 0..m {
                    out[j] += tmp[j];
                }
                Ok((
                    Tensor::new(vec![m], out)?,
                    LayerCache::Dense {
                        input: x.data().to_vec(),
                        in_shape: x.shape().to_vec(),
                    },
                ))
            }
        }
    }

    /// Returns (grad wrt input, grads wrt this layer's parameters in
    /// `params()` order).
    pub fn backward(&self, cache: &LayerCache, grad_out: &Tensor) -> Result<(Tensor, Vec<Tensor>)> {
        match (self, cache) {
            (Layer::Conv2d { weights, .. }, LayerCache::Conv { cols, in_shape }) => {
                let (h, w, c_in) = (in_shape[0], in_shape[1], in_shape[2]);
                let k = weights.shape()[0];
                let c_out = weights.shape()[3];
                let patch = k * k * c_in;
                let m = h * w;
                let go = grad_out.data();
                // dW = cols^T (patch x m) * grad_out (m x c_out)
                let mut dw = vec![0.0; patch * c_out];
                gemm_at(patch, m, c_out, cols, go, &mut dw);
                // db = column sums of grad_out
                let mut db = vec![0.0; c_out];
                for pos in 0..m {
                    for co in 0..c_out {
                        db[co] += go[pos * c_out + co];
                    }
                }
                // dcols = grad_out (m x c_out) * W^T (c_out x patch)
                let mut dcols = vec![0.0; m * patch];
                gemm_bt(m, c_out, patch, go, weights.data(), &mut dcols);
                let dx = col2im(&dcols, h, w, c_in, k);
                Ok((
                    Tensor::new(in_shape.clone(), dx)?,
                    vec![
                        Tensor::new(weights.shape().to_vec(), dw)?,
                        Tensor::new(vec![c_out], db)?,
                    ],
                ))
            }
            (Layer::MaxPool { .. }, LayerCache::MaxPool { argmax, in_shape }) => {
                let mut dx = vec![0.0; in_shape.iter().product()];
                for (o, &src) in argmax.iter().enumerate() {
                    dx[src] += grad_out.data()[o];
                }
                Ok((Tensor::new(in_shape.clone(), dx)?, vec![]))
            }
            (Layer::Relu, LayerCache::Relu { mask }) => {
                let data = grad_out
                    .data()
                    .iter()
                    .zip(mask)
                    .map(|(&g, &m)| if m { g } else { 0.0 })
                    .collect();
                Ok((Tensor::new(grad_out.shape().to_vec(), data)?, vec![]))
            }
            (Layer::Dense { weights, .. }, LayerCache::Dense { input, in_shape }) => {
                let (n, m) = (weights.shape()[0], weights.shape()[1]);
                let go = grad_out.data();
                // dW = input (n x 1) * grad_out (1 x m) = outer product
                let mut dw = vec![0.0; n * m];
                for i in 0..n {
                    let xi = input[i];
                    for j in 0..m {
                        dw[i * m + j] = xi * go[j];
                    }
                }
                let db = go.to_vec();
                // dx = W (n x m) * grad_out (m)
                let mut dx = vec![0.0; n];
                gemm_bt(n, m, 1, weights.data(), go, &mut dx);
                Ok((
                    Tensor::new(in_shape.clone(), dx)?,
                    vec![
                        Tensor::new(vec![n, m], dw)?,
                        Tensor::new(vec![m], db)?,
                    ],
                ))
            }
            _ => Err(Error::Parameter("layer/cache kind mismatch".into())),
        }
    }

    /// Immutable views on this layer's trainable parameters.
    pub fn params(&self) -> Vec<&Tensor> {
        match self {
            Layer::Conv2d { weights, bias } | Layer::Dense { weights, bias } => {
                vec![weights, bias]
            }
            Layer::MaxPool { .. } | Layer::Relu => vec![],
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Layer::Conv2d { weights, bias } | Layer::Dense { weights, bias } => {
                vec![weights, bias]
            }
            Layer::MaxPool { .. } | Layer::Relu => vec![],
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Layer::Conv2d { .. } => "conv2d",
            Layer::MaxPool { .. } => "maxpool",
            Layer::Relu => "relu",
            Layer::Dense { .. } => "dense",
        }
    }
}

/// Channel-axis concatenation of equal-spatial parts. With |G| equal
/// parts this is the bridge from a G-product of feature maps to one
/// tensor on which the block-shift action permutes channel groups.
pub fn concat_channels(parts: &[Tensor]) -> Result<Tensor> {
    let first = parts
        .first()
        .ok_or_else(|| Error::Shape("concat_channels needs at least one part".into()))?;
    let (h, w) = match *first.shape() {
        [h, w, _] => (h, w),
        _ => {
            return Err(Error::Shape(format!(
                "concat_channels expects h x w x c parts, got {:?}",
                first.shape()
            )))
        }
    };
    let mut channels = Vec::with_capacity(parts.len());
    for p in parts {
        match *p.shape() {
            [ph, pw, pc] if ph == h && pw == w => channels.push(pc),
            _ => {
                return Err(Error::Shape(format!(
                    "concat_channels part {:?} mismatches {h}x{w}",
                    p.shape()
                )))
            }
        }
    }
    let total: usize = channels.iter().sum();
    let mut out = vec![0.0; h * w * total];
    for pos in 0..h * w {
        let mut off = 0;
        for (p, &pc) in parts.iter().zip(&channels) {
            out[pos * total + off..pos * total + off + pc]
                .copy_from_slice(&p.data()[pos * pc..(pos + 1) * pc]);
            off += pc;
        }
    }
    Tensor::new(vec![h, w, total], out)
}

/// Splits a channel-concatenated tensor back into equal-channel parts.
pub fn split_channels(x: &Tensor, parts: usize) -> Result<Vec<Tensor>> {
    let (h, w, c) = match *x.shape() {
        [h, w, c] => (h, w, c),
        _ => return Err(Error::Shape(format!("expected h x w x c, got {:?}", x.shape()))),
    };
    if c % parts != 0 {
        return Err(Error::Shape(format!("{c} channels not divisible into {parts} parts")));
    }
    let pc = c / parts;
    let mut out = Vec::with_capacity(parts);
    for p in 0..parts {
        let mut data = Vec::with_capacity(h * w * pc);
        for pos in 0..h * w {
            data.extend_from_slice(&x.data()[pos * c + p * pc..pos * c + (p + 1) * pc]);
        }
        out.push(Tensor::new(vec![h, w, pc], data)?);
    }
    Ok(out)
}

/// Softmax cross-entropy against a one-hot target: returns the loss and
/// the gradient wrt logits (softmax minus target).
pub fn softmax_cross_entropy(logits: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    if logits.shape() != target.shape() {
        return Err(Error::Shape(format!(
            "logits {:?} vs target {:?}",
            logits.shape(),
            target.shape()
        )));
    }
    let hot: Vec<usize> = target
        .data()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v != 0.0)
        .map(|(i, _)| i)
        .collect();
    if hot.len() != 1 || target.data()[hot[0]] != 1.0 {
        return Err(Error::Label("target must be one-hot".into()));
    }
    let probs = softmax(logits.data());
    let loss = -probs[hot[0]].max(f64::MIN_POSITIVE).ln();
    let grad: Vec<f64> = probs
        .iter()
        .zip(target.data())
        .map(|(p, t)| p - t)
        .collect();
    Ok((loss, Tensor::new(logits.shape().to_vec(), grad)?))
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_degenerate_one_by_one() {
        let layer = Layer::Conv2d {
            weights: Tensor::new(vec![1, 1, 1, 1], vec![3.0]).unwrap(),
            bias: Tensor::new(vec![1], vec![0.5]).unwrap(),
        };
        let x = Tensor::new(vec![1, 1, 1], vec![2.0]).unwrap();
        let (y, _) = layer.forward(&x).unwrap();
        assert_eq!(y.data(), &[6.5]);
    }

    #[test]
    fn conv_ones_same_padding() {
        // 3x3 of ones, 3x3 kernel of ones: center 9, corners 4
        let layer = Layer::Conv2d {
            weights: Tensor::new(vec![3, 3, 1, 1], vec![1.0; 9]).unwrap(),
            bias: Tensor::new(vec![1], vec![0.0]).unwrap(),
        };
        let x = Tensor::new(vec![3, 3, 1], vec![1.0; 9]).unwrap();
        let (y, _) = layer.forward(&x).unwrap();
        assert_eq!(y.data(), &[4.0, 6.0, 4.0, 6.0, 9.0, 6.0, 4.0, 6.0, 4.0]);
    }

    #[test]
    fn conv_zero_weights_gives_bias() {
        let layer = Layer::Conv2d {
            weights: Tensor::zeros(vec![3, 3, 2, 1]),
            bias: Tensor::new(vec![1], vec![-1.25]).unwrap(),
        };
        let x = Tensor::filled(vec![4, 4, 2], 7.0);
        let (y, _) = layer.forward(&x).unwrap();
        assert_eq!(y.shape(), &[4, 4, 1]);
        assert!(y.data().iter().all(|&v| v == -1.25));
    }

    #[test]
    fn conv_preserves_spatial_dims() {
        for (h, k, cin, cout) in [(5, 3, 2, 3), (7, 5, 1, 2), (4, 3, 3, 1)] {
            let layer = Layer::Conv2d {
                weights: Tensor::filled(vec![k, k, cin, cout], 0.1),
                bias: Tensor::zeros(vec![cout]),
            };
            let x = Tensor::filled(vec![h, h, cin], 1.0);
            let (y, _) = layer.forward(&x).unwrap();
            assert_eq!(y.shape(), &[h, h, cout]);
        }
    }

    #[test]
    fn maxpool_basic() {
        let layer = Layer::MaxPool { pool: 2 };
        let x = Tensor::new(vec![2, 2, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (y, _) = layer.forward(&x).unwrap();
        assert_eq!(y.data(), &[4.0]);
    }

    #[test]
    fn maxpool_constant_input() {
        let layer = Layer::MaxPool { pool: 2 };
        let x = Tensor::filled(vec![4, 4, 3], 2.5);
        let (y, _) = layer.forward(&x).unwrap();
        assert_eq!(y.shape(), &[2, 2, 3]);
        assert!(y.data().iter().all(|&v| v == 2.5));
    }

    #[test]
    fn maxpool_rejects_indivisible() {
        let layer = Layer::MaxPool { pool: 4 };
        let x = Tensor::filled(vec![6, 6, 1], 0.0);
        assert!(layer.forward(&x).is_err());
    }

    #[test]
    fn maxpool_channelwise_independent() {
        // pooling commutes with relabeling channels
        let layer = Layer::MaxPool { pool: 2 };
        let data: Vec<f64> = (0..8).map(|v| v as f64).collect();
        let x = Tensor::new(vec![2, 2, 2], data.clone()).unwrap();
        let swapped = Tensor::new(
            vec![2, 2, 2],
            data.chunks(2).flat_map(|p| [p[1], p[0]]).collect(),
        )
        .unwrap();
        let (y, _) = layer.forward(&x).unwrap();
        let (ys, _) = layer.forward(&swapped).unwrap();
        assert_eq!(y.data()[0], ys.data()[1]);
        assert_eq!(y.data()[1], ys.data()[0]);
    }

    #[test]
    fn dense_oracle() {
        let layer = Layer::Dense {
            weights: Tensor::new(vec![2, 1], vec![1.0, 2.0]).unwrap(),
            bias: Tensor::zeros(vec![1]),
        };
        let x = Tensor::new(vec![2], vec![3.0, 4.0]).unwrap();
        let (y, _) = layer.forward(&x).unwrap();
        assert_eq!(y.data(), &[11.0]);
    }

    #[test]
    fn dense_identity_and_bias_only() {
        let id = Layer::Dense {
            weights: Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap(),
            bias: Tensor::zeros(vec![2]),
        };
        let x = Tensor::new(vec![2], vec![5.0, -3.0]).unwrap();
        assert_eq!(id.forward(&x).unwrap().0.data(), &[5.0, -3.0]);
        let bias_only = Layer::Dense {
            weights: Tensor::zeros(vec![2, 2]),
            bias: Tensor::new(vec![2], vec![0.5, 1.5]).unwrap(),
        };
        assert_eq!(bias_only.forward(&x).unwrap().0.data(), &[0.5, 1.5]);
    }

    #[test]
    fn softmax_uniform_logits() {
        let logits = Tensor::zeros(vec![40]);
        let mut target = Tensor::zeros(vec![40]);
        target.data_mut()[7] = 1.0;
        let (loss, _) = softmax_cross_entropy(&logits, &target).unwrap();
        assert!((loss - (40f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn softmax_large_margin_loss_vanishes() {
        let mut logits = Tensor::zeros(vec![10]);
        logits.data_mut()[3] = 50.0;
        let mut target = Tensor::zeros(vec![10]);
        target.data_mut()[3] = 1.0;
        let (loss, _) = softmax_cross_entropy(&logits, &target).unwrap();
        assert!(loss < 1e-20);
    }

    #[test]
    fn softmax_two_class_closed_form() {
        let logits = Tensor::zeros(vec![2]);
        let target = Tensor::new(vec![2], vec![1.0, 0.0]).unwrap();
        let (loss, grad) = softmax_cross_entropy(&logits, &target).unwrap();
        assert!((loss - 2f64.ln()).abs() < 1e-12);
        assert!((grad.data()[0] + 0.5).abs() < 1e-12);
        assert!((grad.data()[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn softmax_probs_sum_to_one() {
        let p = softmax(&[1.0, -2.0, 0.3, 8.0, -1.1]);
        assert!(p.iter().all(|&v| v >= 0.0));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn softmax_rejects_non_one_hot() {
        let logits = Tensor::zeros(vec![3]);
        let bad = Tensor::new(vec![3], vec![0.5, 0.5, 0.0]).unwrap();
        assert!(matches!(
            softmax_cross_entropy(&logits, &bad),
            Err(Error::Label(_))
        ));
    }

    #[test]
    fn concat_and_split_round_trip() {
        let parts: Vec<Tensor> = (0..4)
            .map(|p| Tensor::filled(vec![2, 2, 3], p as f64))
            .collect();
        let cat = concat_channels(&parts).unwrap();
        assert_eq!(cat.shape(), &[2, 2, 12]);
        let back = split_channels(&cat, 4).unwrap();
        assert_eq!(back, parts);
    }

    #[test]
    fn concat_single_part_is_identity() {
        let x = Tensor::new(vec![2, 2, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(concat_channels(std::slice::from_ref(&x)).unwrap(), x);
    }

    #[test]
    fn concat_rejects_spatial_mismatch() {
        let a = Tensor::zeros(vec![2, 2, 1]);
        let b = Tensor::zeros(vec![3, 3, 1]);
        assert!(concat_channels(&[a, b]).is_err());
    }

    #[test]
    fn conv_backward_matches_finite_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let weights = Tensor::new(vec![3, 3, 2, 2], (0..36).map(|_| rng.gen_range(-0.5..0.5)).collect()).unwrap();
        let bias = Tensor::new(vec![2], vec![0.1, -0.2]).unwrap();
        let layer = Layer::Conv2d { weights: weights.clone(), bias };
        let x = Tensor::new(vec![4, 4, 2], (0..32).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let (y, cache) = layer.forward(&x).unwrap();
        // loss = sum of outputs, so grad_out is all ones
        let go = Tensor::filled(y.shape().to_vec(), 1.0);
        let (dx, grads) = layer.backward(&cache, &go).unwrap();
        let eps = 1e-6;
        for i in [0usize, 5, 17, 31] {
            let mut xp = x.clone();
            xp.data_mut()[i] += eps;
            let mut xm = x.clone();
            xm.data_mut()[i] -= eps;
            let fp: f64 = layer.forward(&xp).unwrap().0.data().iter().sum();
            let fm: f64 = layer.forward(&xm).unwrap().0.data().iter().sum();
            let fd = (fp - fm) / (2.0 * eps);
            assert!((dx.data()[i] - fd).abs() < 1e-6, "dx[{i}]: {} vs {fd}", dx.data()[i]);
        }
        for i in [0usize, 7, 20, 35] {
            let mut wp = weights.clone();
            wp.data_mut()[i] += eps;
            let lp = Layer::Conv2d { weights: wp, bias: Tensor::new(vec![2], vec![0.1, -0.2]).unwrap() };
            let mut wm = weights.clone();
            wm.data_mut()[i] -= eps;
            let lm = Layer::Conv2d { weights: wm, bias: Tensor::new(vec![2], vec![0.1, -0.2]).unwrap() };
            let fp: f64 = lp.forward(&x).unwrap().0.data().iter().sum();
            let fm: f64 = lm.forward(&x).unwrap().0.data().iter().sum();
            let fd = (fp - fm) / (2.0 * eps);
            assert!((grads[0].data()[i] - fd).abs() < 1e-6);
        }
    }
}
