//! Finite-difference oracle shared by the gradient tests.
#![allow(dead_code)]

use tweetclf::Tensor;

pub const FD_EPS: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-4;

/// Central differences of a scalar function w.r.t. every element of `x`.
pub fn numeric_grad(x: &Tensor, mut f: impl FnMut(&Tensor) -> f64) -> Tensor {
    let mut grad = Tensor::zeros(x.shape());
    let mut probe = x.clone();
    for k in 0..x.len() {
        let orig = probe.data()[k];
        probe.data_mut()[k] = orig + FD_EPS;
        let up = f(&probe);
        probe.data_mut()[k] = orig - FD_EPS;
        let down = f(&probe);
        probe.data_mut()[k] = orig;
        grad.data_mut()[k] = (up - down) / (2.0 * FD_EPS);
    }
    grad
}

/// Largest elementwise relative error, with magnitudes below 1e-6 treated
/// as 1e-6 so that entries that are zero on both sides do not divide by 0.
pub fn max_rel_err(analytic: &Tensor, numeric: &Tensor) -> f64 {
    assert_eq!(analytic.shape(), numeric.shape());
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

/// `Σ y ⊙ w`: contracting an output with fixed random weights makes the
/// upstream gradient equal to `w`.
pub fn contract(y: &Tensor, w: &Tensor) -> f64 {
    assert_eq!(y.shape(), w.shape());
    y.data().iter().zip(w.data()).map(|(a, b)| a * b).sum()
}

pub mod fixtures {
    use tweetclf::model::{CharConfig, CombinedConfig, ConvStage, WordConfig};
    use tweetclf::text::EncodedSample;
    use tweetclf::RngState;

    pub fn tiny_word() -> WordConfig {
        WordConfig {
            vocab: 10,
            embed_dim: 6,
            hidden: 4,
            dense: 5,
            classes: 5,
            seq_len: 4,
        }
    }

    pub fn tiny_char() -> CharConfig {
        CharConfig {
            alphabet: 69,
            length: 20,
            filters: 3,
            stride: 1,
            stages: vec![
                ConvStage {
                    kernel: 3,
                    pool: Some(2),
                },
                ConvStage {
                    kernel: 3,
                    pool: Some(2),
                },
                ConvStage {
                    kernel: 2,
                    pool: None,
                },
            ],
            dense: vec![6],
            dropout: 0.5,
            bottleneck: 4,
            classes: 5,
        }
    }

    pub fn tiny_combined(entry_bilstm: bool, char_dense: bool) -> CombinedConfig {
        CombinedConfig {
            word: tiny_word(),
            char: tiny_char(),
            residual_blocks: 2,
            entry_bilstm,
            char_dense,
            branch_hidden: 3,
            head: 4,
            classes: 5,
        }
    }

    /// `n` samples over 5 classes. Each class owns a disjoint block of
    /// `vocab / 5` word ids (after the two reserved ids) and one letter;
    /// sequences mix class tokens with padding.
    pub fn separable(
        n: usize,
        vocab: usize,
        word_len: usize,
        char_len: usize,
        seed: u64,
    ) -> Vec<EncodedSample> {
        let mut rng = RngState::new(seed);
        let block = (vocab - 2) / 5;
        (0..n)
            .map(|i| {
                let label = i % 5;
                let used = 1 + rng.below(word_len);
                let mut word_ids: Vec<usize> = (0..used)
                    .map(|_| 2 + label * block + rng.below(block))
                    .collect();
                word_ids.resize(word_len, 0);
                let used = 1 + rng.below(char_len);
                let mut char_ids: Vec<usize> = (0..used)
                    .map(|_| {
                        if rng.below(2) == 0 {
                            1 + label
                        } else {
                            30 + rng.below(10)
                        }
                    })
                    .collect();
                char_ids.resize(char_len, 0);
                EncodedSample {
                    word_ids,
                    char_ids,
                    label,
                }
            })
            .collect()
    }
}
