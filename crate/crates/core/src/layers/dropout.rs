use crate::error::{Error, Result};
use crate::tensor::{RngState, Tensor};

/// Inverted dropout. Returns the output and, in training mode, the
/// per-element scale mask (`0` or `1/(1−rate)`) needed for the backward pass.
pub fn dropout(
    x: &Tensor,
    rate: f64,
    training: bool,
    rng: &mut RngState,
) -> Result<(Tensor, Option<Tensor>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!(
            "dropout rate must be in [0, 1), got {rate}"
        )));
    }
    if !training || rate == 0.0 {
        return Ok((x.clone(), None));
    }
    let keep = 1.0 / (1.0 - rate);
    let mut mask = Tensor::zeros(x.shape());
    for m in mask.data_mut() {
        if !rng.bernoulli(rate) {
            *m = keep;
        }
    }
    let y = x.zip_map(&mask, |a, b| a * b)?;
    Ok((y, Some(mask)))
}

pub fn dropout_backward(mask: Option<&Tensor>, grad: &Tensor) -> Result<Tensor> {
    match mask {
        None => Ok(grad.clone()),
        Some(m) => grad.zip_map(m, |g, m| g * m),
    }
}
