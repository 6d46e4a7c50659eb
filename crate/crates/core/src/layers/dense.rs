use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{matmul, matmul_at, matmul_bt, RngState, Tensor};

/// Affine map `x·W + b` with `W: in×out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseParams {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl DenseParams {
    pub fn glorot(input: usize, output: usize, rng: &mut RngState) -> Self {
        Self {
            weight: rng.glorot(&[input, output], input, output),
            bias: Tensor::zeros(&[output]),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            weight: Tensor::zeros(self.weight.shape()),
            bias: Tensor::zeros(self.bias.shape()),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn output_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn parameter_count(input: usize, output: usize) -> usize {
        input * output + output
    }
}

/// Applies the affine map over the last axis of `x`; leading axes are
/// treated as a batch.
pub fn dense(x: &Tensor, p: &DenseParams) -> Result<Tensor> {
    let (input, output) = (p.input_dim(), p.output_dim());
    if x.last_dim() != input || p.bias.shape() != [output] {
        return Err(Error::Dimension {
            op: "dense",
            left: x.shape().to_vec(),
            right: p.weight.shape().to_vec(),
        });
    }
    let rows = x.len() / input.max(1);
    let flat = x.clone().reshape(&[rows, input])?;
    let mut out = matmul(&flat, &p.weight)?;
    for row in out.data_mut().chunks_mut(output) {
        for (v, b) in row.iter_mut().zip(p.bias.data()) {
            *v += b;
        }
    }
    let mut shape = x.shape().to_vec();
    *shape.last_mut().unwrap() = output;
    out.reshape(&shape)
}

/// Returns `(dx, dW, db)` for upstream gradient `grad` of [`dense`].
pub fn dense_backward(x: &Tensor, p: &DenseParams, grad: &Tensor) -> Result<(Tensor, DenseParams)> {
    let (input, output) = (p.input_dim(), p.output_dim());
    let rows = x.len() / input.max(1);
    let flat_x = x.clone().reshape(&[rows, input])?;
    let flat_g = grad.clone().reshape(&[rows, output])?;
    let dw = matmul_at(&flat_x, &flat_g)?;
    let mut db = Tensor::zeros(&[output]);
    for row in flat_g.data().chunks(output.max(1)) {
        for (d, g) in db.data_mut().iter_mut().zip(row) {
            *d += g;
        }
    }
    let dx = matmul_bt(&flat_g, &p.weight)?.reshape(x.shape())?;
    Ok((
        dx,
        DenseParams {
            weight: dw,
            bias: db,
        },
    ))
}
