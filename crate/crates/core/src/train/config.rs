use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::spec::DEFAULT_WORD_LENGTH;
use crate::model::{CharConfig, CombinedConfig, ModelConfig, ModelKind, WordConfig};
use crate::train::AdamConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub word_length: usize,
    pub model: ModelKind,
    pub dropout: f64,
    /// Train the word and char models first and start the combined model
    /// from their weights.
    pub pretrain: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 64,
            adam: AdamConfig::default(),
            seed: 42,
            word_length: DEFAULT_WORD_LENGTH,
            model: ModelKind::Combined,
            dropout: 0.5,
            pretrain: false,
        }
    }
}

/// Keys accepted by [`TrainConfig::set`].
pub const CONFIG_KEYS: &[&str] = &[
    "epochs",
    "batch_size",
    "learning_rate",
    "beta1",
    "beta2",
    "epsilon",
    "seed",
    "word_length",
    "model",
    "dropout",
    "pretrain",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("`{key}`: cannot parse `{value}`: {e}")))
}

impl TrainConfig {
    /// Sets one field by name. `batch`, `lr` and `eps` are accepted as
    /// aliases.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "epochs" => self.epochs = parse(key, value)?,
            "batch_size" | "batch" => self.batch_size = parse(key, value)?,
            "learning_rate" | "lr" => self.adam.lr = parse(key, value)?,
            "beta1" => self.adam.beta1 = parse(key, value)?,
            "beta2" => self.adam.beta2 = parse(key, value)?,
            "epsilon" | "eps" => self.adam.eps = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "word_length" => self.word_length = parse(key, value)?,
            "model" => self.model = parse(key, value)?,
            "dropout" => self.dropout = parse(key, value)?,
            "pretrain" => self.pretrain = parse(key, value)?,
            other => {
                return Err(Error::Config(format!(
                    "unknown key `{other}` (expected one of {})",
                    CONFIG_KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// `key = value` lines over the defaults; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply(text)?;
        Ok(cfg)
    }

    /// Applies `key = value` lines on top of the current values.
    pub fn apply(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            self.set(k, v).map_err(|e| {
                Error::Config(format!(
                    "line {}: {}",
                    n + 1,
                    e.to_string().trim_start_matches("invalid config: ")
                ))
            })?;
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        format!(
            "epochs = {}\nbatch_size = {}\nlearning_rate = {}\nbeta1 = {}\nbeta2 = {}\nepsilon = {}\nseed = {}\nword_length = {}\nmodel = {}\ndropout = {}\npretrain = {}\n",
            self.epochs,
            self.batch_size,
            self.adam.lr,
            self.adam.beta1,
            self.adam.beta2,
            self.adam.eps,
            self.seed,
            self.word_length,
            self.model,
            self.dropout,
            self.pretrain
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if self.word_length == 0 {
            return bad("word_length must be positive".into());
        }
        if !(self.adam.lr >= 0.0 && self.adam.lr.is_finite()) {
            return bad(format!(
                "learning_rate must be non-negative, got {}",
                self.adam.lr
            ));
        }
        for (name, b) in [("beta1", self.adam.beta1), ("beta2", self.adam.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} must lie in [0, 1), got {b}"));
            }
        }
        if self.adam.eps.is_nan() || self.adam.eps <= 0.0 {
            return bad(format!("epsilon must be positive, got {}", self.adam.eps));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        if self.pretrain && self.model != ModelKind::Combined {
            return bad("pretrain only applies to the combined model".into());
        }
        Ok(())
    }

    /// Architecture for `self.model` with the given vocabulary size.
    pub fn model_config(&self, vocab: usize) -> ModelConfig {
        let word = WordConfig {
            vocab,
            seq_len: self.word_length,
            ..WordConfig::default()
        };
        let char = CharConfig {
            dropout: self.dropout,
            ..CharConfig::default()
        };
        match self.model {
            ModelKind::Word => ModelConfig::Word(word),
            ModelKind::Char => ModelConfig::Char(char),
            ModelKind::Combined => ModelConfig::Combined(CombinedConfig {
                word,
                char,
                ..CombinedConfig::default()
            }),
        }
    }
}
