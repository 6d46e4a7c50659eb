use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    backward, combine_pretrained, forward_traced, CombinedConfig, Mode, Model, ModelConfig,
};
use crate::tensor::{RngState, Tensor};
use crate::text::{make_batch, EncodedSample};
use crate::train::{adam_step, cross_entropy, AdamState, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean cross-entropy over the epoch's training samples.
    pub loss: f64,
    /// Training accuracy measured on the dropout-perturbed forward passes.
    pub accuracy: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
}

impl TrainLog {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.loss).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,accuracy,seconds\n");
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{:.3}\n",
                e.epoch, e.loss, e.accuracy, e.seconds
            ));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

fn argmax(row: &[f64]) -> usize {
    row.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| {
            if v > best.1 {
                (i, v)
            } else {
                best
            }
        })
        .0
}

/// Index of the largest probability in each row (first on ties).
pub fn predict_classes(probs: &Tensor) -> Vec<usize> {
    probs.data().chunks(probs.last_dim()).map(argmax).collect()
}

/// Mini-batch Adam on cross-entropy. Samples are reshuffled every epoch
/// from a generator seeded with `cfg.seed`; dropout masks come from a
/// second generator derived from the same seed. Parameters are kept on
/// the `f32` grid.
pub fn fit(model: &mut Model, data: &[EncodedSample], cfg: &TrainConfig) -> Result<TrainLog> {
    fit_with(model, data, cfg, |_| {})
}

/// [`fit`] with a callback after every epoch.
pub fn fit_with(
    model: &mut Model,
    data: &[EncodedSample],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainLog> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    let classes = model.spec.classes();
    if let Some(s) = data.iter().find(|s| s.label >= classes) {
        return Err(Error::Data(format!(
            "label {} out of range for {classes} classes",
            s.label
        )));
    }
    let kind = model.kind();
    let mut order_rng = RngState::new(cfg.seed);
    let mut dropout_rng = RngState::new(order_rng.next_u64());
    let mut adam = AdamState::new(model.params.tensors());
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut log = TrainLog::default();

    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        order_rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for (step, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let samples: Vec<&EncodedSample> = chunk.iter().map(|&i| &data[i]).collect();
            let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
            let batch = make_batch(&samples, kind)?;
            let (probs, trace) = forward_traced(
                &model.spec,
                &model.params,
                &batch,
                Mode::Train(&mut dropout_rng),
            )?;
            let (loss, d_logits) = cross_entropy(&probs, &labels)?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "loss is {loss} at epoch {epoch}, batch {} (learning rate {})",
                    step + 1,
                    cfg.adam.lr
                )));
            }
            let grads = backward(&model.spec, &model.params, &trace, &d_logits)?;
            adam_step(
                &mut model.params.tensors_mut(),
                &grads.tensors(),
                &mut adam,
                &cfg.adam,
            )?;
            model.params.round_to_f32();
            loss_sum += loss * labels.len() as f64;
            correct += predict_classes(&probs)
                .iter()
                .zip(&labels)
                .filter(|(p, l)| p == l)
                .count();
        }
        if !model.params.is_finite() {
            return Err(Error::Numeric(format!(
                "parameters became non-finite in epoch {epoch}"
            )));
        }
        let entry = EpochLog {
            epoch,
            loss: loss_sum / data.len() as f64,
            accuracy: correct as f64 / data.len() as f64,
            seconds: start.elapsed().as_secs_f64(),
        };
        on_epoch(&entry);
        log.epochs.push(entry);
    }
    Ok(log)
}

/// Logs of a pretrain-then-combine run.
#[derive(Debug, Clone)]
pub struct PretrainLogs {
    pub word: TrainLog,
    pub char: TrainLog,
    pub combined: TrainLog,
    /// Layers copied into the combined model.
    pub copied: Vec<String>,
    pub word_model: Model,
    pub char_model: Model,
}

/// Trains the word and char models on their own, copies their weights
/// into the combined model's branches, then trains the combined model.
pub fn fit_pretrained(
    combined: &mut Model,
    data: &[EncodedSample],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&str, &EpochLog),
) -> Result<PretrainLogs> {
    let ModelConfig::Combined(CombinedConfig { word, char, .. }) = combined.spec.config.clone()
    else {
        return Err(Error::Config("pretraining needs a combined model".into()));
    };
    let single = TrainConfig {
        pretrain: false,
        ..cfg.clone()
    };
    let mut rng = RngState::new(cfg.seed);
    let mut word_model = Model::init(ModelConfig::Word(word), &mut rng)?;
    if let Some(crate::model::LayerParams::Embedding(t)) = combined.params.layer("word.embedding") {
        word_model.set_embedding(t.clone())?;
    }
    let word_log = fit_with(&mut word_model, data, &single, |e| on_epoch("word", e))?;
    let mut char_model = Model::init(ModelConfig::Char(char), &mut rng)?;
    let char_log = fit_with(&mut char_model, data, &single, |e| on_epoch("char", e))?;
    let copied = combine_pretrained(combined, &word_model, &char_model)?;
    let combined_log = fit_with(combined, data, &single, |e| on_epoch("combined", e))?;
    Ok(PretrainLogs {
        word: word_log,
        char: char_log,
        combined: combined_log,
        copied,
        word_model,
        char_model,
    })
}

/// Class probabilities for `samples`, evaluated in chunks of `batch_size`.
pub fn predict_proba(
    model: &Model,
    samples: &[EncodedSample],
    batch_size: usize,
) -> Result<Tensor> {
    let classes = model.spec.classes();
    let mut data = Vec::with_capacity(samples.len() * classes);
    for chunk in samples.chunks(batch_size.max(1)) {
        let refs: Vec<&EncodedSample> = chunk.iter().collect();
        let probs = model.forward(&make_batch(&refs, model.kind())?)?;
        data.extend_from_slice(probs.data());
    }
    Tensor::new(vec![samples.len(), classes], data)
}
