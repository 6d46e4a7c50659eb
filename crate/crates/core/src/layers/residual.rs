use crate::error::{Error, Result};
use crate::layers::dense::{dense, dense_backward, DenseParams};
use crate::tensor::Tensor;

/// Skip connection: `block_out + block_in`, with `block_in` passed through
/// a dense projection when the shapes differ.
pub fn residual_add(
    block_out: &Tensor,
    block_in: &Tensor,
    projection: Option<&DenseParams>,
) -> Result<Tensor> {
    let skip = match projection {
        Some(p) => dense(block_in, p)?,
        None => block_in.clone(),
    };
    if skip.shape() != block_out.shape() {
        return Err(Error::Dimension {
            op: "residual_add",
            left: block_out.shape().to_vec(),
            right: block_in.shape().to_vec(),
        });
    }
    block_out.add(&skip)
}

/// Returns `(d_block_out, d_block_in, d_projection)`. The block-output
/// gradient is the upstream gradient itself.
pub fn residual_backward(
    block_in: &Tensor,
    projection: Option<&DenseParams>,
    grad: &Tensor,
) -> Result<(Tensor, Tensor, Option<DenseParams>)> {
    match projection {
        None => Ok((grad.clone(), grad.clone(), None)),
        Some(p) => {
            let (dx, dp) = dense_backward(block_in, p, grad)?;
            Ok((grad.clone(), dx, Some(dp)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::RngState;

    #[test]
    fn zero_block_returns_input() {
        let x = RngState::new(1).uniform_tensor(&[2, 1024], -1.0, 1.0);
        let y = residual_add(&Tensor::zeros(&[2, 1024]), &x, None).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn equal_shapes_sum_elementwise() {
        let a = Tensor::from_rows(&[vec![1.0, 2.0]]);
        let b = Tensor::from_rows(&[vec![0.5, -1.0]]);
        assert_eq!(residual_add(&a, &b, None).unwrap().data(), &[1.5, 1.0]);
    }

    #[test]
    fn mismatch_without_projection_fails() {
        let err = residual_add(&Tensor::zeros(&[2, 4]), &Tensor::zeros(&[2, 3]), None);
        assert!(err.is_err());
        let p = DenseParams::glorot(3, 4, &mut RngState::new(0));
        let y = residual_add(&Tensor::zeros(&[2, 4]), &Tensor::zeros(&[2, 3]), Some(&p)).unwrap();
        assert_eq!(y.shape(), &[2, 4]);
    }

    #[test]
    fn identity_path_carries_gradient() {
        let x = Tensor::zeros(&[1, 3]);
        let (_, dx, _) = residual_backward(&x, None, &Tensor::full(&[1, 3], 1.0)).unwrap();
        assert_eq!(dx.data(), &[1.0; 3]);
    }
}
