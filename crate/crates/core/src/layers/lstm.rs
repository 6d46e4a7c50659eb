//! LSTM cell and bidirectional wrapper.
//!
//! Each gate owns one weight matrix of shape `hidden × (hidden + input)`
//! that acts on the concatenation `[h_{t−1}, x_t]`:
//!
//! ```text
//! f_t = σ(W_f·[h_{t−1}, x_t] + b_f)
//! i_t = σ(W_i·[h_{t−1}, x_t] + b_i)
//! c̃_t = tanh(W_c·[h_{t−1}, x_t] + b_c)
//! C_t = f_t ⊙ C_{t−1} + i_t ⊙ c̃_t
//! o_t = σ(W_o·[h_{t−1}, x_t] + b_o)
//! h_t = o_t ⊙ tanh(C_t)
//! ```
//!
//! All state tensors carry a leading batch axis (`batch × hidden`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{
    concat_last, matmul, matmul_at, matmul_bt, sigmoid, split_last, RngState, Tensor,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmCellParams {
    pub w_f: Tensor,
    pub w_i: Tensor,
    pub w_c: Tensor,
    pub w_o: Tensor,
    pub b_f: Tensor,
    pub b_i: Tensor,
    pub b_c: Tensor,
    pub b_o: Tensor,
}

impl LstmCellParams {
    /// Glorot-uniform gate weights, zero biases except the forget gate (1.0).
    pub fn glorot(input: usize, hidden: usize, rng: &mut RngState) -> Self {
        let shape = [hidden, hidden + input];
        let mut w = || rng.glorot(&shape, hidden + input, hidden);
        let (w_f, w_i, w_c, w_o) = (w(), w(), w(), w());
        Self {
            w_f,
            w_i,
            w_c,
            w_o,
            b_f: Tensor::full(&[hidden], 1.0),
            b_i: Tensor::zeros(&[hidden]),
            b_c: Tensor::zeros(&[hidden]),
            b_o: Tensor::zeros(&[hidden]),
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        let w = Tensor::zeros(&[hidden, hidden + input]);
        let b = Tensor::zeros(&[hidden]);
        Self {
            w_f: w.clone(),
            w_i: w.clone(),
            w_c: w.clone(),
            w_o: w,
            b_f: b.clone(),
            b_i: b.clone(),
            b_c: b.clone(),
            b_o: b,
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_f.shape()[0]
    }

    pub fn input(&self) -> usize {
        self.w_f.shape()[1] - self.hidden()
    }

    pub fn parameter_count(input: usize, hidden: usize) -> usize {
        4 * (hidden * (hidden + input) + hidden)
    }

    pub fn named(&self) -> [(&'static str, &Tensor); 8] {
        [
            ("W_f", &self.w_f),
            ("W_i", &self.w_i),
            ("W_c", &self.w_c),
            ("W_o", &self.w_o),
            ("b_f", &self.b_f),
            ("b_i", &self.b_i),
            ("b_c", &self.b_c),
            ("b_o", &self.b_o),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 8] {
        [
            &mut self.w_f,
            &mut self.w_i,
            &mut self.w_c,
            &mut self.w_o,
            &mut self.b_f,
            &mut self.b_i,
            &mut self.b_c,
            &mut self.b_o,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let ws = [&self.w_f, &self.w_i, &self.w_c, &self.w_o];
        let bs = [&self.b_f, &self.b_i, &self.b_c, &self.b_o];
        let shape = self.w_f.shape();
        if shape.len() != 2 || shape[1] < shape[0] {
            return Err(Error::shape(
                "LstmCellParams",
                format!("gate weights must be hidden x (hidden + input), got {shape:?}"),
            ));
        }
        if ws.iter().any(|w| w.shape() != shape) || bs.iter().any(|b| b.shape() != [shape[0]]) {
            return Err(Error::shape("LstmCellParams", "gate shapes disagree"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Tensor,
    pub c: Tensor,
}

impl LstmState {
    pub fn zeros(batch: usize, hidden: usize) -> Self {
        Self {
            h: Tensor::zeros(&[batch, hidden]),
            c: Tensor::zeros(&[batch, hidden]),
        }
    }
}

/// Intermediate values of one step, kept for backpropagation through time.
#[derive(Debug, Clone)]
pub struct StepCache {
    z: Tensor,
    f: Tensor,
    i: Tensor,
    cand: Tensor,
    o: Tensor,
    c_prev: Tensor,
    tanh_c: Tensor,
}

fn gate(z: &Tensor, w: &Tensor, b: &Tensor, f: fn(f64) -> f64) -> Result<Tensor> {
    let mut pre = matmul_bt(z, w)?;
    let hidden = b.len();
    for row in pre.data_mut().chunks_mut(hidden) {
        for (v, bias) in row.iter_mut().zip(b.data()) {
            *v = f(*v + bias);
        }
    }
    Ok(pre)
}

/// [`lstm_step`] that also returns the values needed by
/// [`lstm_step_backward`].
pub fn lstm_step_cached(
    x_t: &Tensor,
    prev: &LstmState,
    p: &LstmCellParams,
) -> Result<(LstmState, StepCache)> {
    let hidden = p.hidden();
    if x_t.ndim() != 2
        || x_t.shape()[1] != p.input()
        || prev.h.shape() != [x_t.shape()[0], hidden]
        || prev.c.shape() != prev.h.shape()
    {
        return Err(Error::Dimension {
            op: "lstm_step",
            left: x_t.shape().to_vec(),
            right: p.w_f.shape().to_vec(),
        });
    }
    let z = concat_last(&prev.h, x_t)?;
    let f = gate(&z, &p.w_f, &p.b_f, sigmoid)?;
    let i = gate(&z, &p.w_i, &p.b_i, sigmoid)?;
    let cand = gate(&z, &p.w_c, &p.b_c, f64::tanh)?;
    let o = gate(&z, &p.w_o, &p.b_o, sigmoid)?;
    let mut c = Tensor::zeros(prev.c.shape());
    for (k, v) in c.data_mut().iter_mut().enumerate() {
        *v = f.data()[k] * prev.c.data()[k] + i.data()[k] * cand.data()[k];
    }
    let tanh_c = c.map(f64::tanh);
    let h = o.zip_map(&tanh_c, |a, b| a * b)?;
    let cache = StepCache {
        z,
        f,
        i,
        cand,
        o,
        c_prev: prev.c.clone(),
        tanh_c,
    };
    Ok((LstmState { h, c }, cache))
}

/// One LSTM step. `x_t: batch × input`, state tensors `batch × hidden`.
pub fn lstm_step(x_t: &Tensor, prev: &LstmState, p: &LstmCellParams) -> Result<LstmState> {
    lstm_step_cached(x_t, prev, p).map(|(s, _)| s)
}

/// Backward through one step. Accumulates parameter gradients into `grads`
/// and returns `(dx_t, dh_prev, dc_prev)`.
pub fn lstm_step_backward(
    cache: &StepCache,
    dh: &Tensor,
    dc: &Tensor,
    p: &LstmCellParams,
    grads: &mut LstmCellParams,
) -> Result<(Tensor, Tensor, Tensor)> {
    let n = dh.len();
    let mut d_f = vec![0.0; n];
    let mut d_i = vec![0.0; n];
    let mut d_cand = vec![0.0; n];
    let mut d_o = vec![0.0; n];
    let mut dc_prev = vec![0.0; n];
    for k in 0..n {
        let (f, i, g, o) = (
            cache.f.data()[k],
            cache.i.data()[k],
            cache.cand.data()[k],
            cache.o.data()[k],
        );
        let tc = cache.tanh_c.data()[k];
        let dc_total = dc.data()[k] + dh.data()[k] * o * (1.0 - tc * tc);
        d_o[k] = dh.data()[k] * tc * o * (1.0 - o);
        d_f[k] = dc_total * cache.c_prev.data()[k] * f * (1.0 - f);
        d_i[k] = dc_total * g * i * (1.0 - i);
        d_cand[k] = dc_total * i * (1.0 - g * g);
        dc_prev[k] = dc_total * f;
    }
    let shape = dh.shape().to_vec();
    let mut dz = Tensor::zeros(cache.z.shape());
    let pairs = [
        (d_f, &p.w_f, &mut grads.w_f, &mut grads.b_f),
        (d_i, &p.w_i, &mut grads.w_i, &mut grads.b_i),
        (d_cand, &p.w_c, &mut grads.w_c, &mut grads.b_c),
        (d_o, &p.w_o, &mut grads.w_o, &mut grads.b_o),
    ];
    for (d, w, gw, gb) in pairs {
        let d = Tensor::new(shape.clone(), d)?;
        gw.add_assign(&matmul_at(&d, &cache.z)?)?;
        let hidden = gb.len();
        for row in d.data().chunks(hidden) {
            for (acc, v) in gb.data_mut().iter_mut().zip(row) {
                *acc += v;
            }
        }
        dz.add_assign(&matmul(&d, w)?)?;
    }
    let (dh_prev, dx) = split_last(&dz, p.hidden())?;
    Ok((dx, dh_prev, Tensor::new(shape, dc_prev)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BiLstmMode {
    /// `batch × len × 2·hidden`, per-step concatenation.
    Sequence,
    /// `batch × 2·hidden`, last forward state ++ last backward state.
    Final,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiLstmParams {
    pub fwd: LstmCellParams,
    pub bwd: LstmCellParams,
}

impl BiLstmParams {
    pub fn glorot(input: usize, hidden: usize, rng: &mut RngState) -> Self {
        let fwd = LstmCellParams::glorot(input, hidden, rng);
        let bwd = LstmCellParams::glorot(input, hidden, rng);
        Self { fwd, bwd }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            fwd: LstmCellParams::zeros(input, hidden),
            bwd: LstmCellParams::zeros(input, hidden),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.fwd.input(), self.fwd.hidden())
    }

    pub fn parameter_count(input: usize, hidden: usize) -> usize {
        2 * LstmCellParams::parameter_count(input, hidden)
    }
}

#[derive(Debug, Clone)]
pub struct BiLstmCache {
    mode: BiLstmMode,
    batch: usize,
    len: usize,
    input: usize,
    fwd: Vec<StepCache>,
    /// Indexed by sequence position, not by processing order.
    bwd: Vec<StepCache>,
}

fn time_slice(x: &Tensor, t: usize) -> Tensor {
    let (batch, len, dim) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let mut out = Vec::with_capacity(batch * dim);
    for b in 0..batch {
        let start = (b * len + t) * dim;
        out.extend_from_slice(&x.data()[start..start + dim]);
    }
    Tensor::new(vec![batch, dim], out).expect("slice shape")
}

pub fn bilstm_forward(
    x: &Tensor,
    p: &BiLstmParams,
    mode: BiLstmMode,
) -> Result<(Tensor, BiLstmCache)> {
    let [batch, len, input] = x.shape()[..] else {
        return Err(Error::shape(
            "bilstm",
            format!("input must be batch x len x input, got {:?}", x.shape()),
        ));
    };
    if len == 0 {
        return Err(Error::shape("bilstm", "empty sequence"));
    }
    p.fwd.validate()?;
    p.bwd.validate()?;
    let hidden = p.fwd.hidden();
    if p.bwd.hidden() != hidden || p.fwd.input() != input || p.bwd.input() != input {
        return Err(Error::Dimension {
            op: "bilstm",
            left: x.shape().to_vec(),
            right: p.fwd.w_f.shape().to_vec(),
        });
    }
    let steps: Vec<Tensor> = (0..len).map(|t| time_slice(x, t)).collect();

    let mut fwd_h = Vec::with_capacity(len);
    let mut fwd_cache = Vec::with_capacity(len);
    let mut state = LstmState::zeros(batch, hidden);
    for x_t in &steps {
        let (next, cache) = lstm_step_cached(x_t, &state, &p.fwd)?;
        fwd_h.push(next.h.clone());
        fwd_cache.push(cache);
        state = next;
    }

    let mut bwd_h = vec![None; len];
    let mut bwd_cache = vec![None; len];
    let mut state = LstmState::zeros(batch, hidden);
    for t in (0..len).rev() {
        let (next, cache) = lstm_step_cached(&steps[t], &state, &p.bwd)?;
        bwd_h[t] = Some(next.h.clone());
        bwd_cache[t] = Some(cache);
        state = next;
    }
    let bwd_h: Vec<Tensor> = bwd_h.into_iter().map(Option::unwrap).collect();
    let bwd_cache: Vec<StepCache> = bwd_cache.into_iter().map(Option::unwrap).collect();

    let out = match mode {
        BiLstmMode::Final => concat_last(&fwd_h[len - 1], &bwd_h[0])?,
        BiLstmMode::Sequence => {
            let mut data = Vec::with_capacity(batch * len * 2 * hidden);
            for b in 0..batch {
                for t in 0..len {
                    data.extend_from_slice(&fwd_h[t].data()[b * hidden..(b + 1) * hidden]);
                    data.extend_from_slice(&bwd_h[t].data()[b * hidden..(b + 1) * hidden]);
                }
            }
            Tensor::new(vec![batch, len, 2 * hidden], data)?
        }
    };
    let cache = BiLstmCache {
        mode,
        batch,
        len,
        input,
        fwd: fwd_cache,
        bwd: bwd_cache,
    };
    Ok((out, cache))
}

pub fn bilstm(x: &Tensor, p: &BiLstmParams, mode: BiLstmMode) -> Result<Tensor> {
    bilstm_forward(x, p, mode).map(|(y, _)| y)
}

/// Backpropagation through time for both directions. Returns the input
/// gradient and parameter gradients.
pub fn bilstm_backward(
    cache: &BiLstmCache,
    p: &BiLstmParams,
    grad: &Tensor,
) -> Result<(Tensor, BiLstmParams)> {
    let (batch, len, hidden) = (cache.batch, cache.len, p.fwd.hidden());
    let expected = match cache.mode {
        BiLstmMode::Final => vec![batch, 2 * hidden],
        BiLstmMode::Sequence => vec![batch, len, 2 * hidden],
    };
    if grad.shape() != expected {
        return Err(Error::Dimension {
            op: "bilstm_backward",
            left: grad.shape().to_vec(),
            right: expected,
        });
    }
    // Per-position output gradients for each direction, `batch × hidden`.
    let mut d_fwd = vec![Tensor::zeros(&[batch, hidden]); len];
    let mut d_bwd = vec![Tensor::zeros(&[batch, hidden]); len];
    match cache.mode {
        BiLstmMode::Final => {
            let (f, b) = split_last(grad, hidden)?;
            d_fwd[len - 1] = f;
            d_bwd[0] = b;
        }
        BiLstmMode::Sequence => {
            for b in 0..batch {
                for t in 0..len {
                    let row =
                        &grad.data()[(b * len + t) * 2 * hidden..(b * len + t + 1) * 2 * hidden];
                    d_fwd[t].data_mut()[b * hidden..(b + 1) * hidden]
                        .copy_from_slice(&row[..hidden]);
                    d_bwd[t].data_mut()[b * hidden..(b + 1) * hidden]
                        .copy_from_slice(&row[hidden..]);
                }
            }
        }
    }

    let mut grads = p.zeros_like();
    let mut dx_steps = vec![Tensor::zeros(&[batch, cache.input]); len];

    let mut dh = Tensor::zeros(&[batch, hidden]);
    let mut dc = Tensor::zeros(&[batch, hidden]);
    for t in (0..len).rev() {
        dh.add_assign(&d_fwd[t])?;
        let (dx, dh_prev, dc_prev) =
            lstm_step_backward(&cache.fwd[t], &dh, &dc, &p.fwd, &mut grads.fwd)?;
        dx_steps[t].add_assign(&dx)?;
        dh = dh_prev;
        dc = dc_prev;
    }

    let mut dh = Tensor::zeros(&[batch, hidden]);
    let mut dc = Tensor::zeros(&[batch, hidden]);
    for t in 0..len {
        dh.add_assign(&d_bwd[t])?;
        let (dx, dh_prev, dc_prev) =
            lstm_step_backward(&cache.bwd[t], &dh, &dc, &p.bwd, &mut grads.bwd)?;
        dx_steps[t].add_assign(&dx)?;
        dh = dh_prev;
        dc = dc_prev;
    }

    let input = cache.input;
    let mut dx = vec![0.0; batch * len * input];
    for (t, step) in dx_steps.iter().enumerate() {
        for b in 0..batch {
            let dst = (b * len + t) * input;
            dx[dst..dst + input].copy_from_slice(&step.data()[b * input..(b + 1) * input]);
        }
    }
    Ok((Tensor::new(vec![batch, len, input], dx)?, grads))
}
