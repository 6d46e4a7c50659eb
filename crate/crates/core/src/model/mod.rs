//! The three classifier architectures: construction, parameter counting
//! and end-to-end forward/backward passes.

pub mod forward;
pub mod params;
pub mod spec;

pub use forward::{backward, forward, forward_traced, Batch, Mode, Trace};
pub use params::{LayerParams, ModelParams};
pub use spec::{
    count_parameters, Branch, CharConfig, CombinedConfig, ConvStage, Layer, LayerDesc, ModelConfig,
    ModelKind, ModelSpec, ParamRow, ParamTable, Source, WordConfig,
};

use crate::error::{Error, Result};
use crate::tensor::{RngState, Tensor};

/// A spec together with its trainable tensors.
#[derive(Debug, Clone)]
pub struct Model {
    pub spec: ModelSpec,
    pub params: ModelParams,
}

impl Model {
    pub fn init(config: ModelConfig, rng: &mut RngState) -> Result<Self> {
        let spec = ModelSpec::new(config)?;
        let params = ModelParams::init(&spec, rng);
        Ok(Self { spec, params })
    }

    pub fn kind(&self) -> ModelKind {
        self.spec.kind()
    }

    pub fn forward(&self, batch: &Batch) -> Result<Tensor> {
        forward(&self.spec, &self.params, batch)
    }

    /// Replaces the word embedding table (e.g. with GloVe vectors).
    pub fn set_embedding(&mut self, table: Tensor) -> Result<()> {
        match self.params.layer_mut("word.embedding") {
            Some(LayerParams::Embedding(t)) => {
                if t.shape() != table.shape() {
                    return Err(Error::Dimension {
                        op: "set_embedding",
                        left: t.shape().to_vec(),
                        right: table.shape().to_vec(),
                    });
                }
                *t = table;
                t.round_to_f32();
                Ok(())
            }
            _ => Err(Error::Config(format!(
                "{} model has no word embedding",
                self.kind()
            ))),
        }
    }
}

/// Word model, optionally with a pretrained `vocab × embed_dim` table.
pub fn build_word_model(
    cfg: WordConfig,
    embedding: Option<Tensor>,
    rng: &mut RngState,
) -> Result<Model> {
    let mut model = Model::init(ModelConfig::Word(cfg), rng)?;
    if let Some(table) = embedding {
        model.set_embedding(table)?;
    }
    Ok(model)
}

pub fn build_char_model(cfg: CharConfig, rng: &mut RngState) -> Result<Model> {
    Model::init(ModelConfig::Char(cfg), rng)
}

pub fn build_combined_model(
    cfg: CombinedConfig,
    embedding: Option<Tensor>,
    rng: &mut RngState,
) -> Result<Model> {
    let mut model = Model::init(ModelConfig::Combined(cfg), rng)?;
    if let Some(table) = embedding {
        model.set_embedding(table)?;
    }
    Ok(model)
}

/// Initializes the combined model's branches from separately trained word
/// and char models: embedding, word BiLSTM (when the combined layout has
/// one), conv stack and, with `char_dense`, the char dense layers.
pub fn combine_pretrained(combined: &mut Model, word: &Model, char: &Model) -> Result<Vec<String>> {
    let ModelConfig::Combined(cfg) = &combined.spec.config else {
        return Err(Error::Config("target is not a combined model".into()));
    };
    if word.kind() != ModelKind::Word || char.kind() != ModelKind::Char {
        return Err(Error::Config(
            "pretraining needs one word and one char model".into(),
        ));
    }
    let mut pairs: Vec<(String, &Model)> = vec![("word.embedding".into(), word)];
    if cfg.entry_bilstm {
        pairs.push(("word.bilstm".into(), word));
    }
    for i in 1..=cfg.char.stages.len() {
        pairs.push((format!("char.conv{i}"), char));
    }
    if cfg.char_dense {
        for i in 1..=cfg.char.dense.len() {
            pairs.push((format!("char.dense{i}"), char));
        }
    }
    let mut copied = Vec::new();
    for (name, src) in pairs {
        combined.params.copy_layer_from(&name, &src.params, &name)?;
        copied.push(name);
    }
    Ok(copied)
}
