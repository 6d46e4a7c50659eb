use crate::error::{Error, Result};
use crate::layers::{BiLstmParams, ConvParams, DenseParams};
use crate::model::spec::{Layer, ModelSpec};
use crate::tensor::{RngState, Tensor};

/// Trainable tensors of one layer.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerParams {
    None,
    Embedding(Tensor),
    Conv(ConvParams),
    Dense(DenseParams),
    BiLstm(BiLstmParams),
    Residual {
        lstm: BiLstmParams,
        projection: Option<DenseParams>,
    },
}

impl LayerParams {
    fn init(layer: &Layer, rng: &mut RngState) -> Self {
        match *layer {
            Layer::Embedding { vocab, dim } => {
                let mut table = rng.glorot(&[vocab, dim], vocab, dim);
                table.data_mut()[..dim.min(vocab * dim)].fill(0.0);
                LayerParams::Embedding(table)
            }
            Layer::Conv1d {
                in_ch,
                out_ch,
                kernel,
                ..
            } => LayerParams::Conv(ConvParams::glorot(in_ch, out_ch, kernel, rng)),
            Layer::Dense { input, output, .. } => {
                LayerParams::Dense(DenseParams::glorot(input, output, rng))
            }
            Layer::BiLstm { input, hidden, .. } => {
                LayerParams::BiLstm(BiLstmParams::glorot(input, hidden, rng))
            }
            Layer::ResidualBiLstm {
                input,
                hidden,
                projection,
            } => {
                let lstm = BiLstmParams::glorot(input, hidden, rng);
                let projection = projection.then(|| DenseParams::glorot(input, 2 * hidden, rng));
                LayerParams::Residual { lstm, projection }
            }
            Layer::OneHot { .. }
            | Layer::MaxPool1d { .. }
            | Layer::Flatten
            | Layer::AsSequence
            | Layer::Dropout { .. } => LayerParams::None,
        }
    }

    fn zeros(layer: &Layer) -> Self {
        let dense = |input: usize, output: usize| DenseParams {
            weight: Tensor::zeros(&[input, output]),
            bias: Tensor::zeros(&[output]),
        };
        match *layer {
            Layer::Embedding { vocab, dim } => LayerParams::Embedding(Tensor::zeros(&[vocab, dim])),
            Layer::Conv1d {
                in_ch,
                out_ch,
                kernel,
                ..
            } => LayerParams::Conv(ConvParams {
                kernels: Tensor::zeros(&[out_ch, in_ch, kernel]),
                bias: Tensor::zeros(&[out_ch]),
            }),
            Layer::Dense { input, output, .. } => LayerParams::Dense(dense(input, output)),
            Layer::BiLstm { input, hidden, .. } => {
                LayerParams::BiLstm(BiLstmParams::zeros(input, hidden))
            }
            Layer::ResidualBiLstm {
                input,
                hidden,
                projection,
            } => LayerParams::Residual {
                lstm: BiLstmParams::zeros(input, hidden),
                projection: projection.then(|| dense(input, 2 * hidden)),
            },
            Layer::OneHot { .. }
            | Layer::MaxPool1d { .. }
            | Layer::Flatten
            | Layer::AsSequence
            | Layer::Dropout { .. } => LayerParams::None,
        }
    }

    /// `(suffix, tensor)` pairs in a fixed order.
    pub fn named(&self) -> Vec<(String, &Tensor)> {
        fn lstm<'a>(prefix: &str, p: &'a BiLstmParams, out: &mut Vec<(String, &'a Tensor)>) {
            for (dir, cell) in [("fwd", &p.fwd), ("bwd", &p.bwd)] {
                for (name, t) in cell.named() {
                    out.push((format!("{prefix}{dir}.{name}"), t));
                }
            }
        }
        let mut out = Vec::new();
        match self {
            LayerParams::None => {}
            LayerParams::Embedding(t) => out.push(("table".into(), t)),
            LayerParams::Conv(c) => {
                out.push(("kernels".into(), &c.kernels));
                out.push(("bias".into(), &c.bias));
            }
            LayerParams::Dense(d) => {
                out.push(("weight".into(), &d.weight));
                out.push(("bias".into(), &d.bias));
            }
            LayerParams::BiLstm(p) => lstm("", p, &mut out),
            LayerParams::Residual {
                lstm: p,
                projection,
            } => {
                lstm("", p, &mut out);
                if let Some(d) = projection {
                    out.push(("proj.weight".into(), &d.weight));
                    out.push(("proj.bias".into(), &d.bias));
                }
            }
        }
        out
    }

    /// Mutable tensors in the same order as [`LayerParams::named`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            LayerParams::None => vec![],
            LayerParams::Embedding(t) => vec![t],
            LayerParams::Conv(c) => vec![&mut c.kernels, &mut c.bias],
            LayerParams::Dense(d) => vec![&mut d.weight, &mut d.bias],
            LayerParams::BiLstm(p) => {
                let mut v: Vec<&mut Tensor> = p.fwd.tensors_mut().into_iter().collect();
                v.extend(p.bwd.tensors_mut());
                v
            }
            LayerParams::Residual { lstm, projection } => {
                let mut v: Vec<&mut Tensor> = lstm.fwd.tensors_mut().into_iter().collect();
                v.extend(lstm.bwd.tensors_mut());
                if let Some(d) = projection {
                    v.push(&mut d.weight);
                    v.push(&mut d.bias);
                }
                v
            }
        }
    }

    fn zeros_like(&self) -> Self {
        match self {
            LayerParams::None => LayerParams::None,
            LayerParams::Embedding(t) => LayerParams::Embedding(Tensor::zeros(t.shape())),
            LayerParams::Conv(c) => LayerParams::Conv(c.zeros_like()),
            LayerParams::Dense(d) => LayerParams::Dense(d.zeros_like()),
            LayerParams::BiLstm(p) => LayerParams::BiLstm(p.zeros_like()),
            LayerParams::Residual { lstm, projection } => LayerParams::Residual {
                lstm: lstm.zeros_like(),
                projection: projection.as_ref().map(DenseParams::zeros_like),
            },
        }
    }
}

/// One [`LayerParams`] per layer of a [`ModelSpec`], in `spec.layers()` order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub layers: Vec<LayerParams>,
    names: Vec<String>,
}

impl ModelParams {
    /// Glorot-uniform weights, zero biases (forget gates at 1.0), zero
    /// padding row; every value snapped to the `f32` grid.
    pub fn init(spec: &ModelSpec, rng: &mut RngState) -> Self {
        let mut params = Self {
            layers: spec
                .layers()
                .map(|d| LayerParams::init(&d.layer, rng))
                .collect(),
            names: spec.layers().map(|d| d.name.clone()).collect(),
        };
        params.round_to_f32();
        params
    }

    /// All-zero tensors shaped for `spec`.
    pub fn zeros(spec: &ModelSpec) -> Self {
        Self {
            layers: spec
                .layers()
                .map(|d| LayerParams::zeros(&d.layer))
                .collect(),
            names: spec.layers().map(|d| d.name.clone()).collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self.layers.iter().map(LayerParams::zeros_like).collect(),
            names: self.names.clone(),
        }
    }

    pub fn layer_names(&self) -> &[String] {
        &self.names
    }

    /// Fully qualified `layer.tensor` names and tensors.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        self.layers
            .iter()
            .zip(&self.names)
            .flat_map(|(l, layer)| {
                l.named()
                    .into_iter()
                    .map(move |(suffix, t)| (format!("{layer}.{suffix}"), t))
            })
            .collect()
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        self.layers
            .iter()
            .flat_map(|l| l.named().into_iter().map(|(_, t)| t))
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(LayerParams::tensors_mut)
            .collect()
    }

    pub fn element_count(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn round_to_f32(&mut self) {
        for t in self.tensors_mut() {
            t.round_to_f32();
        }
    }

    pub fn is_finite(&self) -> bool {
        self.named_tensors().iter().all(|(_, t)| t.is_finite())
    }

    pub fn layer(&self, name: &str) -> Option<&LayerParams> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.layers[i])
    }

    pub fn layer_mut(&mut self, name: &str) -> Option<&mut LayerParams> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(move |i| &mut self.layers[i])
    }

    /// Replaces the tensors of every layer, in order, with `tensors`,
    /// checking each shape.
    pub fn assign_tensors(&mut self, tensors: Vec<Tensor>) -> Result<()> {
        let mut slots = self.tensors_mut();
        if slots.len() != tensors.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, got {}",
                slots.len(),
                tensors.len()
            )));
        }
        for (slot, t) in slots.iter_mut().zip(tensors) {
            if slot.shape() != t.shape() {
                return Err(Error::Dimension {
                    op: "assign_tensors",
                    left: slot.shape().to_vec(),
                    right: t.shape().to_vec(),
                });
            }
            **slot = t;
        }
        Ok(())
    }

    /// Copies the tensors of layer `name` from `other`, which must have
    /// identically shaped tensors.
    pub fn copy_layer_from(
        &mut self,
        name: &str,
        other: &ModelParams,
        other_name: &str,
    ) -> Result<()> {
        let src = other
            .layer(other_name)
            .ok_or_else(|| Error::Config(format!("source has no layer `{other_name}`")))?
            .clone();
        let dst = self
            .layer_mut(name)
            .ok_or_else(|| Error::Config(format!("target has no layer `{name}`")))?;
        let shapes = |l: &LayerParams| -> Vec<Vec<usize>> {
            l.named().iter().map(|(_, t)| t.shape().to_vec()).collect()
        };
        if shapes(dst) != shapes(&src) {
            return Err(Error::Config(format!(
                "layer `{other_name}` does not fit `{name}`"
            )));
        }
        *dst = src;
        Ok(())
    }
}
