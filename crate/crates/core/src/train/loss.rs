use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Probabilities are clamped from below before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// Mean negative log-likelihood of `labels` under row-wise probabilities,
/// with the gradient w.r.t. the pre-softmax logits, `(probs − onehot)/batch`.
pub fn cross_entropy(probs: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let [batch, classes] = probs.shape()[..] else {
        return Err(Error::shape(
            "cross_entropy",
            format!("expected batch x classes, got {:?}", probs.shape()),
        ));
    };
    if labels.len() != batch {
        return Err(Error::Dimension {
            op: "cross_entropy",
            left: probs.shape().to_vec(),
            right: vec![labels.len()],
        });
    }
    if batch == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let mut grad = probs.clone();
    let mut loss = 0.0;
    for (row, &label) in labels.iter().enumerate() {
        if label >= classes {
            return Err(Error::Index {
                what: "class labels",
                index: label,
                size: classes,
            });
        }
        let p = probs.data()[row * classes + label];
        loss -= p.max(PROB_FLOOR).ln();
        grad.data_mut()[row * classes + label] -= 1.0;
    }
    let n = batch as f64;
    Ok((loss / n, grad.scale(1.0 / n)))
}
