use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Integer id matrix, `rows × cols`, row-major (batch × sequence length).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenIds {
    rows: usize,
    cols: usize,
    data: Vec<usize>,
}

impl TokenIds {
    pub fn new(rows: usize, cols: usize, data: Vec<usize>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::shape(
                "TokenIds::new",
                format!(
                    "{rows}x{cols} needs {} ids, got {}",
                    rows * cols,
                    data.len()
                ),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    /// Stacks equal-length id sequences into a matrix.
    pub fn from_sequences<S: AsRef<[usize]>>(seqs: &[S]) -> Result<Self> {
        let cols = seqs.first().map_or(0, |s| s.as_ref().len());
        let mut data = Vec::with_capacity(seqs.len() * cols);
        for s in seqs {
            let s = s.as_ref();
            if s.len() != cols {
                return Err(Error::shape(
                    "TokenIds::from_sequences",
                    format!("ragged sequences: {} vs {cols}", s.len()),
                ));
            }
            data.extend_from_slice(s);
        }
        Ok(Self {
            rows: seqs.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[usize] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[usize] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// Row gather: `ids: batch×len`, `table: vocab×dim` → `batch×len×dim`.
pub fn embedding_lookup(ids: &TokenIds, table: &Tensor) -> Result<Tensor> {
    let (vocab, dim) = table_dims(table)?;
    let mut out = Vec::with_capacity(ids.data.len() * dim);
    for &id in &ids.data {
        if id >= vocab {
            return Err(Error::Index {
                what: "embedding table",
                index: id,
                size: vocab,
            });
        }
        out.extend_from_slice(&table.data()[id * dim..(id + 1) * dim]);
    }
    Tensor::new(vec![ids.rows, ids.cols, dim], out)
}

/// Scatters `grad_out` (`batch×len×dim`) into a zero table gradient; only
/// rows whose id occurs receive a contribution.
pub fn embedding_backward(ids: &TokenIds, grad_out: &Tensor, vocab: usize) -> Result<Tensor> {
    let dim = grad_out.last_dim();
    if grad_out.len() != ids.data.len() * dim {
        return Err(Error::shape(
            "embedding_backward",
            format!(
                "gradient {:?} does not match ids {}x{}",
                grad_out.shape(),
                ids.rows,
                ids.cols
            ),
        ));
    }
    let mut grad = Tensor::zeros(&[vocab, dim]);
    let g = grad.data_mut();
    for (pos, &id) in ids.data.iter().enumerate() {
        let src = &grad_out.data()[pos * dim..(pos + 1) * dim];
        for (d, s) in g[id * dim..(id + 1) * dim].iter_mut().zip(src) {
            *d += s;
        }
    }
    Ok(grad)
}

/// Fixed one-hot encoding: id 0 is the all-zero vector, ids `1..=depth`
/// select basis vectors `0..depth`. Output `batch×len×depth`.
pub fn one_hot(ids: &TokenIds, depth: usize) -> Result<Tensor> {
    let mut out = vec![0.0; ids.data.len() * depth];
    for (pos, &id) in ids.data.iter().enumerate() {
        if id > depth {
            return Err(Error::Index {
                what: "one-hot alphabet",
                index: id,
                size: depth + 1,
            });
        }
        if id > 0 {
            out[pos * depth + id - 1] = 1.0;
        }
    }
    Tensor::new(vec![ids.rows, ids.cols, depth], out)
}

fn table_dims(table: &Tensor) -> Result<(usize, usize)> {
    match table.shape() {
        &[v, d] => Ok((v, d)),
        s => Err(Error::shape(
            "embedding_lookup",
            format!("table must be vocab x dim, got {s:?}"),
        )),
    }
}
