//! Dense row-major tensors and the primitive math the layers are built from.
//!
//! Values are `f64` throughout. The training path keeps parameters on the
//! `f32` grid (see [`Tensor::round_to_f32`]) so checkpoints, which store
//! 32-bit payloads, round-trip bit for bit.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Work (in multiply-adds) above which matrix products fan out over rayon.
const PAR_THRESHOLD: usize = 1 << 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::shape(
                "Tensor::new",
                format!(
                    "shape {shape:?} needs {expected} elements, got {}",
                    data.len()
                ),
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    /// 1-D tensor from a vector.
    pub fn vector(data: Vec<f64>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    /// 2-D tensor from nested rows. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self {
            shape: vec![rows.len(), cols],
            data: rows.concat(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    /// Size of the last axis.
    pub fn last_dim(&self) -> usize {
        self.shape.last().copied().unwrap_or(1)
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(Error::Dimension {
                op: "reshape",
                left: self.shape,
                right: shape.to_vec(),
            });
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let o = self.offset(index);
        self.data[o] = value;
    }

    fn offset(&self, index: &[usize]) -> usize {
        assert_eq!(index.len(), self.shape.len(), "index rank");
        index.iter().zip(&self.shape).fold(0, |acc, (&i, &d)| {
            assert!(i < d, "index {i} out of bounds for axis of size {d}");
            acc * d + i
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_shape("zip_map", other)?;
        Ok(Self {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Tensor) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        self.check_same_shape("add_assign", other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.map(|v| v * factor)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Snaps every element onto the nearest `f32` value.
    pub fn round_to_f32(&mut self) {
        for v in &mut self.data {
            *v = *v as f32 as f64;
        }
    }

    fn check_same_shape(&self, op: &'static str, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Dimension {
                op,
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        Ok(())
    }

    fn matrix_dims(&self, op: &'static str) -> Result<(usize, usize)> {
        match self.shape[..] {
            [r, c] => Ok((r, c)),
            _ => Err(Error::shape(
                op,
                format!("expected a matrix, got shape {:?}", self.shape),
            )),
        }
    }
}

/// `a · b` for `a: m×k`, `b: k×n`.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = a.matrix_dims("matmul")?;
    let (k2, n) = b.matrix_dims("matmul")?;
    if k != k2 {
        return Err(Error::Dimension {
            op: "matmul",
            left: a.shape.clone(),
            right: b.shape.clone(),
        });
    }
    let mut out = vec![0.0; m * n];
    let row = |(i, out_row): (usize, &mut [f64])| {
        let a_row = &a.data[i * k..(i + 1) * k];
        for (p, &av) in a_row.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let b_row = &b.data[p * n..(p + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += av * bv;
            }
        }
    };
    if n > 0 {
        if m * k * n >= PAR_THRESHOLD {
            out.par_chunks_mut(n).enumerate().for_each(row);
        } else {
            out.chunks_mut(n).enumerate().for_each(row);
        }
    }
    Tensor::new(vec![m, n], out)
}

/// `aᵀ · b` for `a: k×m`, `b: k×n`.
pub fn matmul_at(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (k, m) = a.matrix_dims("matmul_at")?;
    let (k2, n) = b.matrix_dims("matmul_at")?;
    if k != k2 {
        return Err(Error::Dimension {
            op: "matmul_at",
            left: a.shape.clone(),
            right: b.shape.clone(),
        });
    }
    let mut out = vec![0.0; m * n];
    let row = |(i, out_row): (usize, &mut [f64])| {
        for r in 0..k {
            let av = a.data[r * m + i];
            if av == 0.0 {
                continue;
            }
            let b_row = &b.data[r * n..(r + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += av * bv;
            }
        }
    };
    if n > 0 {
        if m * k * n >= PAR_THRESHOLD {
            out.par_chunks_mut(n).enumerate().for_each(row);
        } else {
            out.chunks_mut(n).enumerate().for_each(row);
        }
    }
    Tensor::new(vec![m, n], out)
}

/// `a · bᵀ` for `a: m×k`, `b: n×k`.
pub fn matmul_bt(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = a.matrix_dims("matmul_bt")?;
    let (n, k2) = b.matrix_dims("matmul_bt")?;
    if k != k2 {
        return Err(Error::Dimension {
            op: "matmul_bt",
            left: a.shape.clone(),
            right: b.shape.clone(),
        });
    }
    let mut out = vec![0.0; m * n];
    let row = |(i, out_row): (usize, &mut [f64])| {
        let a_row = &a.data[i * k..(i + 1) * k];
        for (j, o) in out_row.iter_mut().enumerate() {
            let b_row = &b.data[j * k..(j + 1) * k];
            *o = a_row.iter().zip(b_row).map(|(x, y)| x * y).sum();
        }
    };
    if n > 0 {
        if m * k * n >= PAR_THRESHOLD {
            out.par_chunks_mut(n).enumerate().for_each(row);
        } else {
            out.chunks_mut(n).enumerate().for_each(row);
        }
    }
    Tensor::new(vec![m, n], out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Sigmoid,
    Tanh,
    Relu,
    /// Softmax over the last axis.
    Softmax,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn activation(x: &Tensor, kind: Activation) -> Tensor {
    match kind {
        Activation::Identity => x.clone(),
        Activation::Sigmoid => x.map(sigmoid),
        Activation::Tanh => x.map(f64::tanh),
        Activation::Relu => x.map(|v| v.max(0.0)),
        Activation::Softmax => softmax(x),
    }
}

/// Vector-Jacobian product of an activation, expressed through its output
/// `y` (ReLU uses `y > 0`, which matches `x > 0`).
pub fn activation_backward(y: &Tensor, grad: &Tensor, kind: Activation) -> Tensor {
    let elementwise = |f: fn(f64) -> f64| Tensor {
        shape: grad.shape.clone(),
        data: y
            .data
            .iter()
            .zip(&grad.data)
            .map(|(&yv, &g)| g * f(yv))
            .collect(),
    };
    match kind {
        Activation::Identity => grad.clone(),
        Activation::Sigmoid => elementwise(|y| y * (1.0 - y)),
        Activation::Tanh => elementwise(|y| 1.0 - y * y),
        Activation::Relu => elementwise(|y| if y > 0.0 { 1.0 } else { 0.0 }),
        Activation::Softmax => softmax_backward(y, grad),
    }
}

/// Softmax over the last axis, with max-subtraction.
pub fn softmax(x: &Tensor) -> Tensor {
    let c = x.last_dim();
    let mut out = x.data.clone();
    if c > 0 {
        for row in out.chunks_mut(c) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                total += *v;
            }
            for v in row.iter_mut() {
                *v /= total;
            }
        }
    }
    Tensor {
        shape: x.shape.clone(),
        data: out,
    }
}

/// Gradient through softmax: `dx = y ⊙ (g − ⟨g, y⟩)` per last-axis slice.
pub fn softmax_backward(y: &Tensor, grad: &Tensor) -> Tensor {
    let c = y.last_dim();
    let mut out = vec![0.0; y.len()];
    if c > 0 {
        for ((o, yr), gr) in out
            .chunks_mut(c)
            .zip(y.data.chunks(c))
            .zip(grad.data.chunks(c))
        {
            let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
            for ((ov, &yv), &gv) in o.iter_mut().zip(yr).zip(gr) {
                *ov = yv * (gv - dot);
            }
        }
    }
    Tensor {
        shape: y.shape.clone(),
        data: out,
    }
}

/// Concatenates along the last axis; all leading dimensions must agree.
pub fn concat_last(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (ra, rb) = (a.ndim(), b.ndim());
    if ra != rb || ra == 0 || a.shape[..ra - 1] != b.shape[..rb - 1] {
        return Err(Error::Dimension {
            op: "concat_last",
            left: a.shape.clone(),
            right: b.shape.clone(),
        });
    }
    let (ca, cb) = (a.last_dim(), b.last_dim());
    let rows = a.len() / ca.max(1);
    let mut data = Vec::with_capacity(a.len() + b.len());
    for r in 0..rows {
        data.extend_from_slice(&a.data[r * ca..(r + 1) * ca]);
        data.extend_from_slice(&b.data[r * cb..(r + 1) * cb]);
    }
    let mut shape = a.shape.clone();
    shape[ra - 1] = ca + cb;
    Tensor::new(shape, data)
}

/// Inverse of [`concat_last`]: splits the last axis at `at`.
pub fn split_last(x: &Tensor, at: usize) -> Result<(Tensor, Tensor)> {
    let c = x.last_dim();
    if x.ndim() == 0 || at > c {
        return Err(Error::shape(
            "split_last",
            format!("cannot split last axis of {:?} at {at}", x.shape),
        ));
    }
    let rows = x.len() / c.max(1);
    let (mut left, mut right) = (
        Vec::with_capacity(rows * at),
        Vec::with_capacity(rows * (c - at)),
    );
    for row in x.data.chunks(c.max(1)).take(rows) {
        left.extend_from_slice(&row[..at]);
        right.extend_from_slice(&row[at..]);
    }
    let mut ls = x.shape.clone();
    let mut rs = x.shape.clone();
    *ls.last_mut().unwrap() = at;
    *rs.last_mut().unwrap() = c - at;
    Ok((Tensor::new(ls, left)?, Tensor::new(rs, right)?))
}

/// Seeded random source. ChaCha8 keeps the stream identical across
/// platforms for a given seed.
#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of 32-bit words consumed so far.
    pub fn counter(&self) -> u128 {
        self.rng.get_word_pos()
    }

    /// Uniform sample in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.rng.random::<f64>()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.rng.random::<f64>() < p
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.rng);
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.random()
    }

    pub fn uniform_tensor(&mut self, shape: &[usize], lo: f64, hi: f64) -> Tensor {
        let mut t = Tensor::zeros(shape);
        for v in t.data_mut() {
            *v = self.uniform(lo, hi);
        }
        t
    }

    /// Glorot/Xavier uniform: `U(−a, a)` with `a = √(6 / (fan_in + fan_out))`.
    pub fn glorot(&mut self, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor {
        let limit = (6.0 / (fan_in + fan_out).max(1) as f64).sqrt();
        self.uniform_tensor(shape, -limit, limit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &Tensor, b: &Tensor) -> Tensor {
        let (m, k) = (a.shape()[0], a.shape()[1]);
        let n = b.shape()[1];
        let mut out = Tensor::zeros(&[m, n]);
        for i in 0..m {
            for j in 0..n {
                let mut s = 0.0;
                for p in 0..k {
                    s += a.get(&[i, p]) * b.get(&[p, j]);
                }
                out.set(&[i, j], s);
            }
        }
        out
    }

    fn transpose(t: &Tensor) -> Tensor {
        let (r, c) = (t.shape()[0], t.shape()[1]);
        let mut out = Tensor::zeros(&[c, r]);
        for i in 0..r {
            for j in 0..c {
                out.set(&[j, i], t.get(&[i, j]));
            }
        }
        out
    }

    fn assert_close(a: &Tensor, b: &Tensor, tol: f64) {
        assert_eq!(a.shape(), b.shape());
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() <= tol, "{x} vs {y}");
        }
    }

    #[test]
    fn matmul_identity_and_hand_product() {
        let eye = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let m = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(matmul(&eye, &m).unwrap(), m);

        let a = Tensor::from_rows(&[vec![1.0, 2.0]]);
        let b = Tensor::from_rows(&[vec![3.0], vec![4.0]]);
        assert_eq!(matmul(&a, &b).unwrap().data(), &[11.0]);
    }

    #[test]
    fn matmul_variants_match_triple_loop() {
        let mut rng = RngState::new(7);
        let a = rng.uniform_tensor(&[3, 4], -1.0, 1.0);
        let b = rng.uniform_tensor(&[4, 2], -1.0, 1.0);
        let expected = naive(&a, &b);
        assert_close(&matmul(&a, &b).unwrap(), &expected, 1e-12);
        assert_close(&matmul_at(&transpose(&a), &b).unwrap(), &expected, 1e-12);
        assert_close(&matmul_bt(&a, &transpose(&b)).unwrap(), &expected, 1e-12);

        // large enough to take the parallel path
        let a = rng.uniform_tensor(&[40, 50], -1.0, 1.0);
        let b = rng.uniform_tensor(&[50, 30], -1.0, 1.0);
        let expected = naive(&a, &b);
        assert_close(&matmul(&a, &b).unwrap(), &expected, 1e-12);
        assert_close(&matmul_at(&transpose(&a), &b).unwrap(), &expected, 1e-12);
        assert_close(&matmul_bt(&a, &transpose(&b)).unwrap(), &expected, 1e-12);
    }

    #[test]
    fn matmul_shape_mismatch_names_both_shapes() {
        let err = matmul(&Tensor::zeros(&[2, 3]), &Tensor::zeros(&[2, 3])).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3] vs [2, 3]"), "{msg}");
    }

    #[test]
    fn activations_at_known_points() {
        let x = Tensor::vector(vec![0.0, -3.2, 3.2]);
        assert_eq!(activation(&x, Activation::Sigmoid).data()[0], 0.5);
        assert_eq!(activation(&x, Activation::Tanh).data()[0], 0.0);
        let r = activation(&x, Activation::Relu);
        assert_eq!(r.data(), &[0.0, 0.0, 3.2]);
        let s = activation(&Tensor::vector(vec![-700.0, 700.0]), Activation::Sigmoid);
        assert!(s.is_finite());
        assert!(s.data()[0] > 0.0 && s.data()[0] < 1e-300);
    }

    #[test]
    fn softmax_uniform_and_stable() {
        let s = softmax(&Tensor::zeros(&[5]));
        for v in s.data() {
            assert!((v - 0.2).abs() < 1e-15);
        }
        let s = softmax(&Tensor::vector(vec![1000.0, 0.0]));
        assert!(s.is_finite());
        assert!((s.data()[0] - 1.0).abs() < 1e-12);
        assert!(s.data()[1] < 1e-300);
    }

    #[test]
    fn concat_and_split() {
        let a = Tensor::zeros(&[2, 3]);
        let b = Tensor::full(&[2, 5], 1.0);
        let c = concat_last(&a, &b).unwrap();
        assert_eq!(c.shape(), &[2, 8]);
        let (l, r) = split_last(&c, 3).unwrap();
        assert_eq!((l, r), (a, b));

        let c = concat_last(&Tensor::vector(vec![1.0]), &Tensor::vector(vec![2.0])).unwrap();
        assert_eq!(c.data(), &[1.0, 2.0]);

        assert!(concat_last(&Tensor::zeros(&[2, 3]), &Tensor::zeros(&[3, 3])).is_err());
    }

    #[test]
    fn rng_is_reproducible() {
        let mut a = RngState::new(42);
        let mut b = RngState::new(42);
        let ta = a.glorot(&[4, 4], 4, 4);
        let tb = b.glorot(&[4, 4], 4, 4);
        assert_eq!(ta.data(), tb.data());
        assert_eq!(a.counter(), b.counter());
        assert_ne!(RngState::new(43).glorot(&[4, 4], 4, 4), ta);
    }

    #[test]
    fn round_to_f32_snaps_values() {
        let mut t = Tensor::vector(vec![0.1, 1.0 / 3.0]);
        t.round_to_f32();
        for &v in t.data() {
            assert_eq!(v, v as f32 as f64);
        }
    }
}
