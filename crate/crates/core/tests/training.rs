mod common;

use common::fixtures::{separable, tiny_combined, tiny_word};
use tweetclf::model::*;
use tweetclf::text::{make_batch, EncodedSample};
use tweetclf::train::*;
use tweetclf::{Error, RngState, Tensor};

fn smoke_word() -> WordConfig {
    WordConfig {
        vocab: 50,
        embed_dim: 16,
        hidden: 32,
        dense: 16,
        classes: 5,
        seq_len: 8,
    }
}

fn smoke_cfg(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 20,
        adam: AdamConfig {
            lr: 0.01,
            ..AdamConfig::default()
        },
        seed: 17,
        word_length: 8,
        model: ModelKind::Word,
        ..TrainConfig::default()
    }
}

#[test]
fn overfits_separable_set() {
    let data = separable(200, 50, 8, 20, 1);
    let mut model = Model::init(ModelConfig::Word(smoke_word()), &mut RngState::new(3)).unwrap();
    let log = fit(&mut model, &data, &smoke_cfg(50)).unwrap();
    assert_eq!(log.len(), 50);

    let probs = predict_proba(&model, &data, 64).unwrap();
    let preds = predict_classes(&probs);
    let acc = preds
        .iter()
        .zip(&data)
        .filter(|(p, s)| **p == s.label)
        .count() as f64
        / data.len() as f64;
    assert!(acc >= 0.99, "train accuracy {acc}");

    // 5-epoch moving average of the loss never goes up
    let losses = log.losses();
    let smooth: Vec<f64> = losses
        .windows(5)
        .map(|w| w.iter().sum::<f64>() / 5.0)
        .collect();
    for (i, w) in smooth.windows(2).enumerate() {
        assert!(
            w[1] <= w[0] + 1e-12,
            "smoothed loss rose at window {i}: {} -> {}",
            w[0],
            w[1]
        );
    }
}

#[test]
fn zero_epochs_change_nothing() {
    let data = separable(20, 50, 8, 20, 2);
    let mut model = Model::init(ModelConfig::Word(smoke_word()), &mut RngState::new(3)).unwrap();
    let before = model.params.clone();
    let log = fit(&mut model, &data, &smoke_cfg(0)).unwrap();
    assert!(log.is_empty());
    assert_eq!(model.params, before);
}

#[test]
fn zero_learning_rate_is_bit_identical() {
    let data = separable(20, 50, 8, 20, 2);
    let mut model = Model::init(ModelConfig::Word(smoke_word()), &mut RngState::new(3)).unwrap();
    let before = model.params.clone();
    let mut cfg = smoke_cfg(1);
    cfg.adam.lr = 0.0;
    fit(&mut model, &data, &cfg).unwrap();
    assert_eq!(model.params, before);
}

#[test]
fn same_config_same_run() {
    let data = separable(60, 10, 4, 20, 4);
    let cfg = TrainConfig {
        model: ModelKind::Combined,
        word_length: 4,
        ..smoke_cfg(3)
    };
    let run = || {
        let mut model = Model::init(
            ModelConfig::Combined(tiny_combined(true, true)),
            &mut RngState::new(5),
        )
        .unwrap();
        let log = fit(&mut model, &data, &cfg).unwrap();
        (model.params, log)
    };
    let (p1, l1) = run();
    let (p2, l2) = run();
    assert_eq!(p1, p2);
    assert_eq!(l1.len(), 3);
    for (a, b) in l1.epochs.iter().zip(&l2.epochs) {
        assert_eq!(
            (a.epoch, a.loss.to_bits(), a.accuracy.to_bits()),
            (b.epoch, b.loss.to_bits(), b.accuracy.to_bits())
        );
    }
}

fn loss_grads(model: &Model, samples: &[&EncodedSample]) -> ModelParams {
    let batch = make_batch(samples, model.kind()).unwrap();
    let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let (probs, trace) = forward_traced(&model.spec, &model.params, &batch, Mode::Eval).unwrap();
    let (_, d) = cross_entropy(&probs, &labels).unwrap();
    backward(&model.spec, &model.params, &trace, &d).unwrap()
}

#[test]
fn batch_gradient_is_mean_of_singletons() {
    let data = separable(3, 10, 4, 20, 6);
    let refs: Vec<&EncodedSample> = data.iter().collect();
    for cfg in [
        ModelConfig::Word(tiny_word()),
        ModelConfig::Combined(tiny_combined(true, true)),
    ] {
        let model = Model::init(cfg, &mut RngState::new(7)).unwrap();
        let batched = loss_grads(&model, &refs);
        let singles: Vec<ModelParams> = refs.iter().map(|s| loss_grads(&model, &[*s])).collect();
        let mut worst: f64 = 0.0;
        for (k, (_, g)) in batched.named_tensors().iter().enumerate() {
            for (i, &v) in g.data().iter().enumerate() {
                let mean = singles
                    .iter()
                    .map(|s| s.tensors()[k].data()[i])
                    .sum::<f64>()
                    / 3.0;
                worst = worst.max((v - mean).abs());
            }
        }
        assert!(worst < 1e-10, "{worst:e}");
    }
}

#[test]
fn nan_loss_aborts() {
    let data = separable(20, 50, 8, 20, 2);
    let mut model = Model::init(ModelConfig::Word(smoke_word()), &mut RngState::new(3)).unwrap();
    if let Some(LayerParams::Embedding(t)) = model.params.layer_mut("word.embedding") {
        t.data_mut().fill(f64::NAN);
    }
    let err = fit(&mut model, &data, &smoke_cfg(1)).unwrap_err();
    assert!(matches!(err, Error::Numeric(_)), "{err}");
}

#[test]
fn empty_dataset_and_bad_labels_are_rejected() {
    let mut model = Model::init(ModelConfig::Word(smoke_word()), &mut RngState::new(3)).unwrap();
    assert!(matches!(
        fit(&mut model, &[], &smoke_cfg(1)),
        Err(Error::Data(_))
    ));
    let mut data = separable(5, 50, 8, 20, 2);
    data[0].label = 9;
    assert!(fit(&mut model, &data, &smoke_cfg(1)).is_err());
}

#[test]
fn pretrain_then_combine() {
    let data = separable(30, 10, 4, 20, 8);
    let cfg = TrainConfig {
        model: ModelKind::Combined,
        pretrain: true,
        word_length: 4,
        ..smoke_cfg(1)
    };
    let mut model = Model::init(
        ModelConfig::Combined(tiny_combined(true, true)),
        &mut RngState::new(9),
    )
    .unwrap();
    let mut phases = Vec::new();
    let logs = fit_pretrained(&mut model, &data, &cfg, |phase, _| {
        phases.push(phase.to_string())
    })
    .unwrap();
    assert_eq!(phases, vec!["word", "char", "combined"]);
    assert!(logs.copied.contains(&"char.conv1".to_string()));
    assert_eq!(logs.combined.len(), 1);
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    for cfg in [
        ModelConfig::Word(tiny_word()),
        ModelConfig::Combined(tiny_combined(false, false)),
    ] {
        let mut model = Model::init(cfg, &mut RngState::new(10)).unwrap();
        let kind = model.kind();
        fit(
            &mut model,
            &separable(10, 10, 4, 20, 1),
            &TrainConfig {
                model: kind,
                word_length: 4,
                ..smoke_cfg(1)
            },
        )
        .unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&model.spec, &model.params, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back.spec, model.spec);
        for ((_, a), (_, b)) in model
            .params
            .named_tensors()
            .iter()
            .zip(back.params.named_tensors())
        {
            let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a), bits(b));
        }
        assert_eq!(
            checkpoint_bytes(&back.spec, &back.params).unwrap(),
            std::fs::read(&path).unwrap()
        );
    }
}

#[test]
fn checkpoint_errors() {
    let dir = tempfile::tempdir().unwrap();
    let model = Model::init(ModelConfig::Word(tiny_word()), &mut RngState::new(11)).unwrap();
    let bytes = checkpoint_bytes(&model.spec, &model.params).unwrap();

    let truncated = checkpoint_from_bytes(&bytes[..bytes.len() - 3]).unwrap_err();
    assert!(truncated.to_string().contains("truncated"), "{truncated}");
    let header_cut = checkpoint_from_bytes(&bytes[..20]).unwrap_err();
    assert!(header_cut.to_string().contains("truncated"), "{header_cut}");

    let text = String::from_utf8_lossy(&bytes).into_owned();
    let bumped = text.replacen("TWEETCLF-CKPT 1", "TWEETCLF-CKPT 2", 1);
    let err = checkpoint_from_bytes(bumped.as_bytes()).unwrap_err();
    assert!(err.to_string().contains("version"), "{err}");

    let mut reshaped = bytes.clone();
    let at = text.find("word.embedding.table 10,6").unwrap();
    reshaped[at + "word.embedding.table ".len()..at + "word.embedding.table 10,6".len()]
        .copy_from_slice(b"6,10");
    let err = checkpoint_from_bytes(&reshaped).unwrap_err();
    assert!(err.to_string().contains("shape mismatch"), "{err}");

    let path = dir.path().join("w.ckpt");
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(
        load_checkpoint_as(&path, ModelKind::Char),
        Err(Error::SpecMismatch { .. })
    ));
    assert!(load_checkpoint_as(&path, ModelKind::Word).is_ok());
    let other = ModelConfig::Word(WordConfig {
        hidden: 5,
        ..tiny_word()
    });
    assert!(matches!(
        load_checkpoint_for(&path, &other),
        Err(Error::SpecMismatch { .. })
    ));
}
