//! Mean absolute error.

use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

/// Scalar mean of `|pred - target|`.
pub fn l1_loss<T: Element>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<Tensor<T>> {
    check_same_shape("l1_loss", pred, target)?;
    let sum: f64 = pred.data().iter().zip(target.data()).map(|(p, t)| (p.as_f64() - t.as_f64()).abs()).sum();
    Ok(Tensor::scalar(T::from_f64(sum / pred.numel() as f64)))
}

/// d/dpred of the mean absolute error scaled by the upstream gradient; the
/// subgradient at zero difference is 0.
pub(crate) fn l1_backward<T: Element>(pred: &[T], target: &[T], upstream: T) -> Vec<T> {
    let scale = upstream / T::from_f64(pred.len() as f64);
    pred.iter()
        .zip(target)
        .map(|(&p, &t)| {
            if p > t {
                scale
            } else if p < t {
                -scale
            } else {
                T::zero()
            }
        })
        .collect()
}

pub(crate) fn check_same_shape<T: Element>(op: &'static str, a: &Tensor<T>, b: &Tensor<T>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::dim(op, format!("operand shapes differ: {:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}
