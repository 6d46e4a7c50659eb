//! Forward and backward passes over a [`ModelSpec`], composed layer by
//! layer. Backward consumes the [`Trace`] recorded by the forward pass.

use crate::error::{Error, Result};
use crate::layers::{
    bilstm_backward, bilstm_forward, conv1d, conv1d_backward, dense, dense_backward, dropout,
    dropout_backward, embedding_backward, embedding_lookup, maxpool1d, maxpool1d_backward, one_hot,
    residual_add, residual_backward, BiLstmCache, BiLstmMode, PoolCache, TokenIds,
};
use crate::model::params::{LayerParams, ModelParams};
use crate::model::spec::{Layer, LayerDesc, ModelSpec, Source};
use crate::tensor::{
    activation, activation_backward, concat_last, split_last, Activation, RngState, Tensor,
};

/// Encoded inputs for one mini-batch. A source may be omitted when the
/// model has no branch reading it.
#[derive(Debug, Clone, Default)]
pub struct Batch {
    pub words: Option<TokenIds>,
    pub chars: Option<TokenIds>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.words
            .as_ref()
            .or(self.chars.as_ref())
            .map_or(0, TokenIds::rows)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub enum Mode<'a> {
    Eval,
    /// Dropout active, masks drawn from the given source.
    Train(&'a mut RngState),
}

#[derive(Debug, Clone)]
enum Cache {
    Ids(TokenIds),
    Stateless,
    Activated { input: Tensor, output: Tensor },
    Pool(PoolCache),
    Reshape(Vec<usize>),
    Dropout(Option<Tensor>),
    BiLstm(BiLstmCache),
    Residual { input: Tensor, lstm: BiLstmCache },
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    caches: Vec<Cache>,
    branch_widths: Vec<usize>,
    /// Per-layer output shapes including the batch axis, in layer order.
    pub shapes: Vec<(String, Vec<usize>)>,
}

fn params_mismatch(name: &str) -> Error {
    Error::Config(format!("parameters do not match layer `{name}`"))
}

fn source_ids(batch: &Batch, source: Source, expected_len: Option<usize>) -> Result<&TokenIds> {
    let ids = match source {
        Source::Words => batch.words.as_ref(),
        Source::Chars => batch.chars.as_ref(),
    }
    .ok_or_else(|| Error::InvalidArgument(format!("batch has no {source:?} input")))?;
    if let Some(len) = expected_len {
        if ids.cols() != len {
            return Err(Error::Dimension {
                op: "forward",
                left: vec![ids.rows(), ids.cols()],
                right: vec![ids.rows(), len],
            });
        }
    }
    if ids.cols() == 0 {
        return Err(Error::shape("forward", "empty input sequence"));
    }
    Ok(ids)
}

fn first_layer(d: &LayerDesc, p: &LayerParams, ids: &TokenIds) -> Result<(Tensor, Cache)> {
    match (&d.layer, p) {
        (Layer::Embedding { .. }, LayerParams::Embedding(table)) => {
            Ok((embedding_lookup(ids, table)?, Cache::Ids(ids.clone())))
        }
        (Layer::OneHot { depth }, LayerParams::None) => {
            Ok((one_hot(ids, *depth)?, Cache::Stateless))
        }
        _ => Err(params_mismatch(&d.name)),
    }
}

fn layer_forward(
    d: &LayerDesc,
    p: &LayerParams,
    x: Tensor,
    mode: &mut Mode<'_>,
) -> Result<(Tensor, Cache)> {
    match (&d.layer, p) {
        (
            Layer::Conv1d {
                stride,
                activation: act,
                ..
            },
            LayerParams::Conv(c),
        ) => {
            let y = activation(&conv1d(&x, c, *stride)?, *act);
            Ok((
                y.clone(),
                Cache::Activated {
                    input: x,
                    output: y,
                },
            ))
        }
        (Layer::MaxPool1d { window }, LayerParams::None) => {
            let (y, cache) = maxpool1d(&x, *window)?;
            Ok((y, Cache::Pool(cache)))
        }
        (Layer::Flatten, LayerParams::None) => {
            let shape = x.shape().to_vec();
            let batch = shape[0];
            let y = x.reshape(&[batch, shape[1..].iter().product()])?;
            Ok((y, Cache::Reshape(shape)))
        }
        (Layer::AsSequence, LayerParams::None) => {
            let shape = x.shape().to_vec();
            let y = x.reshape(&[shape[0], 1, shape[1]])?;
            Ok((y, Cache::Reshape(shape)))
        }
        (
            Layer::Dense {
                activation: act, ..
            },
            LayerParams::Dense(dp),
        ) => {
            let y = activation(&dense(&x, dp)?, *act);
            Ok((
                y.clone(),
                Cache::Activated {
                    input: x,
                    output: y,
                },
            ))
        }
        (Layer::Dropout { rate }, LayerParams::None) => {
            let (y, mask) = match mode {
                Mode::Eval => (x, None),
                Mode::Train(rng) => dropout(&x, *rate, true, rng)?,
            };
            Ok((y, Cache::Dropout(mask)))
        }
        (Layer::BiLstm { mode: m, .. }, LayerParams::BiLstm(bp)) => {
            let (y, cache) = bilstm_forward(&x, bp, *m)?;
            Ok((y, Cache::BiLstm(cache)))
        }
        (Layer::ResidualBiLstm { .. }, LayerParams::Residual { lstm, projection }) => {
            let (block, cache) = bilstm_forward(&x, lstm, BiLstmMode::Sequence)?;
            let y = residual_add(&block, &x, projection.as_ref())?;
            Ok((
                y,
                Cache::Residual {
                    input: x,
                    lstm: cache,
                },
            ))
        }
        _ => Err(params_mismatch(&d.name)),
    }
}

/// Returns the input gradient (if the layer has a tensor input) and the
/// parameter gradients. `fused_softmax` marks the output layer, whose
/// incoming gradient is already taken w.r.t. its pre-softmax logits.
fn layer_backward(
    d: &LayerDesc,
    p: &LayerParams,
    cache: &Cache,
    grad: &Tensor,
    fused_softmax: bool,
) -> Result<(Option<Tensor>, LayerParams)> {
    match (&d.layer, p, cache) {
        (Layer::Embedding { vocab, .. }, LayerParams::Embedding(_), Cache::Ids(ids)) => Ok((
            None,
            LayerParams::Embedding(embedding_backward(ids, grad, *vocab)?),
        )),
        (Layer::OneHot { .. }, _, _) => Ok((None, LayerParams::None)),
        (
            Layer::Conv1d {
                stride,
                activation: act,
                ..
            },
            LayerParams::Conv(c),
            Cache::Activated { input, output },
        ) => {
            let g = activation_backward(output, grad, *act);
            let (dx, dp) = conv1d_backward(input, c, *stride, &g)?;
            Ok((Some(dx), LayerParams::Conv(dp)))
        }
        (Layer::MaxPool1d { .. }, _, Cache::Pool(pc)) => {
            Ok((Some(maxpool1d_backward(pc, grad)?), LayerParams::None))
        }
        (Layer::Flatten | Layer::AsSequence, _, Cache::Reshape(shape)) => {
            Ok((Some(grad.clone().reshape(shape)?), LayerParams::None))
        }
        (
            Layer::Dense {
                activation: act, ..
            },
            LayerParams::Dense(dp),
            Cache::Activated { input, output },
        ) => {
            let g = if fused_softmax && *act == Activation::Softmax {
                grad.clone()
            } else {
                activation_backward(output, grad, *act)
            };
            let (dx, dparams) = dense_backward(input, dp, &g)?;
            Ok((Some(dx), LayerParams::Dense(dparams)))
        }
        (Layer::Dropout { .. }, _, Cache::Dropout(mask)) => Ok((
            Some(dropout_backward(mask.as_ref(), grad)?),
            LayerParams::None,
        )),
        (Layer::BiLstm { .. }, LayerParams::BiLstm(bp), Cache::BiLstm(c)) => {
            let (dx, dp) = bilstm_backward(c, bp, grad)?;
            Ok((Some(dx), LayerParams::BiLstm(dp)))
        }
        (
            Layer::ResidualBiLstm { .. },
            LayerParams::Residual { lstm, projection },
            Cache::Residual { input, lstm: c },
        ) => {
            let (d_block, d_skip, d_proj) = residual_backward(input, projection.as_ref(), grad)?;
            let (mut dx, d_lstm) = bilstm_backward(c, lstm, &d_block)?;
            dx.add_assign(&d_skip)?;
            Ok((
                Some(dx),
                LayerParams::Residual {
                    lstm: d_lstm,
                    projection: d_proj,
                },
            ))
        }
        _ => Err(params_mismatch(&d.name)),
    }
}

fn check_params(spec: &ModelSpec, params: &ModelParams) -> Result<()> {
    let names: Vec<&String> = spec.layers().map(|d| &d.name).collect();
    if params.layer_names().iter().collect::<Vec<_>>() != names {
        return Err(Error::Config(
            "parameters were built for a different model layout".into(),
        ));
    }
    Ok(())
}

/// Runs the model and records the caches needed by [`backward`]. Returns
/// class probabilities `batch × classes`.
pub fn forward_traced(
    spec: &ModelSpec,
    params: &ModelParams,
    batch: &Batch,
    mut mode: Mode<'_>,
) -> Result<(Tensor, Trace)> {
    check_params(spec, params)?;
    let rows = batch.len();
    let mut caches = Vec::new();
    let mut shapes = Vec::new();
    let mut branch_widths = Vec::new();
    let mut merged: Option<Tensor> = None;
    let mut layer_params = params.layers.iter();

    for branch in &spec.branches {
        let ids = source_ids(batch, branch.source, branch.input_len)?;
        if ids.rows() != rows {
            return Err(Error::InvalidArgument(
                "word and char inputs have different batch sizes".into(),
            ));
        }
        shapes.push((
            format!("{}.input", branch.name),
            vec![ids.rows(), ids.cols()],
        ));
        let mut x: Option<Tensor> = None;
        for d in &branch.layers {
            let p = layer_params
                .next()
                .ok_or_else(|| params_mismatch(&d.name))?;
            let (y, cache) = match x.take() {
                None => first_layer(d, p, ids)?,
                Some(x) => layer_forward(d, p, x, &mut mode)?,
            };
            shapes.push((d.name.clone(), y.shape().to_vec()));
            caches.push(cache);
            x = Some(y);
        }
        let out = x.ok_or_else(|| Error::Config(format!("branch `{}` is empty", branch.name)))?;
        branch_widths.push(out.last_dim());
        merged = Some(match merged {
            None => out,
            Some(m) => concat_last(&m, &out)?,
        });
    }

    let mut x = merged.ok_or_else(|| Error::Config("model has no branches".into()))?;
    for d in &spec.head {
        let p = layer_params
            .next()
            .ok_or_else(|| params_mismatch(&d.name))?;
        let (y, cache) = layer_forward(d, p, x, &mut mode)?;
        shapes.push((d.name.clone(), y.shape().to_vec()));
        caches.push(cache);
        x = y;
    }
    Ok((
        x,
        Trace {
            caches,
            branch_widths,
            shapes,
        },
    ))
}

/// Evaluation-mode forward pass: class probabilities, dropout disabled.
pub fn forward(spec: &ModelSpec, params: &ModelParams, batch: &Batch) -> Result<Tensor> {
    forward_traced(spec, params, batch, Mode::Eval).map(|(p, _)| p)
}

/// Gradients of the loss w.r.t. every parameter, given the loss gradient
/// w.r.t. the output layer's pre-softmax logits.
pub fn backward(
    spec: &ModelSpec,
    params: &ModelParams,
    trace: &Trace,
    d_logits: &Tensor,
) -> Result<ModelParams> {
    let mut grads = params.zeros_like();
    let branch_layers: usize = spec.branches.iter().map(|b| b.layers.len()).sum();
    let head_len = spec.head.len();

    let mut g = d_logits.clone();
    for (k, d) in spec.head.iter().enumerate().rev() {
        let idx = branch_layers + k;
        let (dx, dp) = layer_backward(
            d,
            &params.layers[idx],
            &trace.caches[idx],
            &g,
            k + 1 == head_len,
        )?;
        grads.layers[idx] = dp;
        g = dx.ok_or_else(|| Error::Config(format!("layer `{}` has no input gradient", d.name)))?;
    }

    // Undo the branch concatenation from the right.
    let mut branch_grads = Vec::with_capacity(spec.branches.len());
    let mut rest = g;
    for &w in trace.branch_widths.iter().skip(1).rev() {
        let at = rest.last_dim() - w;
        let (left, right) = split_last(&rest, at)?;
        branch_grads.push(right);
        rest = left;
    }
    branch_grads.push(rest);
    branch_grads.reverse();

    let mut offset = 0;
    for (branch, bg) in spec.branches.iter().zip(branch_grads) {
        let mut g = Some(bg);
        for (k, d) in branch.layers.iter().enumerate().rev() {
            let idx = offset + k;
            let upstream = g
                .take()
                .ok_or_else(|| Error::Config(format!("layer `{}` received no gradient", d.name)))?;
            let (dx, dp) =
                layer_backward(d, &params.layers[idx], &trace.caches[idx], &upstream, false)?;
            grads.layers[idx] = dp;
            g = dx;
        }
        offset += branch.layers.len();
    }
    Ok(grads)
}
