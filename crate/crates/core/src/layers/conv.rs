//! Valid-mode 1-D cross-correlation and non-overlapping max pooling over
//! `batch × length × channels` tensors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{matmul, matmul_at, matmul_bt, RngState, Tensor};

/// Kernels are `out_ch × in_ch × k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvParams {
    pub kernels: Tensor,
    pub bias: Tensor,
}

impl ConvParams {
    pub fn glorot(in_ch: usize, out_ch: usize, kernel: usize, rng: &mut RngState) -> Self {
        Self {
            kernels: rng.glorot(&[out_ch, in_ch, kernel], in_ch * kernel, out_ch * kernel),
            bias: Tensor::zeros(&[out_ch]),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            kernels: Tensor::zeros(self.kernels.shape()),
            bias: Tensor::zeros(self.bias.shape()),
        }
    }

    fn dims(&self) -> (usize, usize, usize) {
        let s = self.kernels.shape();
        (s[0], s[1], s[2])
    }

    pub fn parameter_count(in_ch: usize, out_ch: usize, kernel: usize) -> usize {
        out_ch * in_ch * kernel + out_ch
    }
}

pub fn conv_output_len(len: usize, kernel: usize, stride: usize) -> Option<usize> {
    (len >= kernel && kernel > 0 && stride > 0).then(|| (len - kernel) / stride + 1)
}

fn check_input(x: &Tensor, p: &ConvParams, stride: usize) -> Result<(usize, usize, usize)> {
    let (out_ch, in_ch, k) = p.dims();
    let [batch, len, ch] = x.shape()[..] else {
        return Err(Error::shape(
            "conv1d",
            format!("input must be batch x len x ch, got {:?}", x.shape()),
        ));
    };
    if ch != in_ch || p.bias.shape() != [out_ch] {
        return Err(Error::Dimension {
            op: "conv1d",
            left: x.shape().to_vec(),
            right: p.kernels.shape().to_vec(),
        });
    }
    let out_len = conv_output_len(len, k, stride).ok_or_else(|| {
        Error::shape(
            "conv1d",
            format!("sequence length {len} shorter than kernel {k} (stride {stride})"),
        )
    })?;
    Ok((batch, len, out_len))
}

/// `out_len × (in_ch·k)` patch matrix for one sample, laid out to match
/// the flattened `in_ch × k` kernel rows.
fn patches(sample: &[f64], in_ch: usize, k: usize, stride: usize, out_len: usize) -> Tensor {
    let width = in_ch * k;
    let mut data = vec![0.0; out_len * width];
    for (t, row) in data.chunks_mut(width).enumerate() {
        let start = t * stride;
        for j in 0..k {
            let src = &sample[(start + j) * in_ch..(start + j + 1) * in_ch];
            for (c, &v) in src.iter().enumerate() {
                row[c * k + j] = v;
            }
        }
    }
    Tensor::new(vec![out_len, width], data).expect("patch shape")
}

pub fn conv1d(x: &Tensor, p: &ConvParams, stride: usize) -> Result<Tensor> {
    let (out_ch, in_ch, k) = p.dims();
    let (batch, len, out_len) = check_input(x, p, stride)?;
    let weights = p.kernels.clone().reshape(&[out_ch, in_ch * k])?;
    let mut out = Vec::with_capacity(batch * out_len * out_ch);
    for b in 0..batch {
        let sample = &x.data()[b * len * in_ch..(b + 1) * len * in_ch];
        let y = matmul_bt(&patches(sample, in_ch, k, stride, out_len), &weights)?;
        for row in y.data().chunks(out_ch) {
            out.extend(row.iter().zip(p.bias.data()).map(|(v, b)| v + b));
        }
    }
    Tensor::new(vec![batch, out_len, out_ch], out)
}

/// Returns `(dx, dparams)` given the forward input and upstream gradient.
pub fn conv1d_backward(
    x: &Tensor,
    p: &ConvParams,
    stride: usize,
    grad: &Tensor,
) -> Result<(Tensor, ConvParams)> {
    let (out_ch, in_ch, k) = p.dims();
    let (batch, len, out_len) = check_input(x, p, stride)?;
    if grad.shape() != [batch, out_len, out_ch] {
        return Err(Error::Dimension {
            op: "conv1d_backward",
            left: grad.shape().to_vec(),
            right: vec![batch, out_len, out_ch],
        });
    }
    let weights = p.kernels.clone().reshape(&[out_ch, in_ch * k])?;
    let mut dw = Tensor::zeros(&[out_ch, in_ch * k]);
    let mut db = Tensor::zeros(&[out_ch]);
    let mut dx = Tensor::zeros(x.shape());
    for b in 0..batch {
        let sample = &x.data()[b * len * in_ch..(b + 1) * len * in_ch];
        let g = Tensor::new(
            vec![out_len, out_ch],
            grad.data()[b * out_len * out_ch..(b + 1) * out_len * out_ch].to_vec(),
        )?;
        dw.add_assign(&matmul_at(&g, &patches(sample, in_ch, k, stride, out_len))?)?;
        for row in g.data().chunks(out_ch) {
            for (d, v) in db.data_mut().iter_mut().zip(row) {
                *d += v;
            }
        }
        let dpatch = matmul(&g, &weights)?;
        let dxs = &mut dx.data_mut()[b * len * in_ch..(b + 1) * len * in_ch];
        for (t, row) in dpatch.data().chunks(in_ch * k).enumerate() {
            let start = t * stride;
            for j in 0..k {
                let dst = &mut dxs[(start + j) * in_ch..(start + j + 1) * in_ch];
                for (c, d) in dst.iter_mut().enumerate() {
                    *d += row[c * k + j];
                }
            }
        }
    }
    Ok((
        dx,
        ConvParams {
            kernels: dw.reshape(&[out_ch, in_ch, k])?,
            bias: db,
        },
    ))
}

/// Pooling output plus the flat input offset of each window's maximum.
#[derive(Debug, Clone)]
pub struct PoolCache {
    pub input_shape: Vec<usize>,
    pub argmax: Vec<usize>,
}

/// Non-overlapping max pooling with stride = window; the trailing remainder
/// is dropped and ties resolve to the lowest index.
pub fn maxpool1d(x: &Tensor, window: usize) -> Result<(Tensor, PoolCache)> {
    let [batch, len, ch] = x.shape()[..] else {
        return Err(Error::shape(
            "maxpool1d",
            format!("input must be batch x len x ch, got {:?}", x.shape()),
        ));
    };
    if window == 0 || len < window {
        return Err(Error::shape(
            "maxpool1d",
            format!("sequence length {len} shorter than window {window}"),
        ));
    }
    let out_len = len / window;
    let mut out = Vec::with_capacity(batch * out_len * ch);
    let mut argmax = Vec::with_capacity(batch * out_len * ch);
    for b in 0..batch {
        for t in 0..out_len {
            for c in 0..ch {
                let mut best = (b * len + t * window) * ch + c;
                for j in 1..window {
                    let idx = (b * len + t * window + j) * ch + c;
                    if x.data()[idx] > x.data()[best] {
                        best = idx;
                    }
                }
                out.push(x.data()[best]);
                argmax.push(best);
            }
        }
    }
    Ok((
        Tensor::new(vec![batch, out_len, ch], out)?,
        PoolCache {
            input_shape: x.shape().to_vec(),
            argmax,
        },
    ))
}

pub fn maxpool1d_backward(cache: &PoolCache, grad: &Tensor) -> Result<Tensor> {
    if grad.len() != cache.argmax.len() {
        return Err(Error::shape(
            "maxpool1d_backward",
            format!("gradient {:?} does not match pooled output", grad.shape()),
        ));
    }
    let mut dx = Tensor::zeros(&cache.input_shape);
    for (&idx, &g) in cache.argmax.iter().zip(grad.data()) {
        dx.data_mut()[idx] += g;
    }
    Ok(dx)
}
