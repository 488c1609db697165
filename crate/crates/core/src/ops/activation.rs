//! GELU with the exact Gaussian CDF.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::tensor::{Element, Tensor};

#[inline]
fn gelu_scalar(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x * FRAC_1_SQRT_2))
}

#[inline]
fn gelu_derivative(x: f64) -> f64 {
    let cdf = 0.5 * (1.0 + libm::erf(x * FRAC_1_SQRT_2));
    let pdf = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
    cdf + x * pdf
}

/// `x · Φ(x)`, evaluated in f64 and rounded to the working dtype.
pub fn gelu<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| T::from_f64(gelu_scalar(v.as_f64())))
}

pub(crate) fn gelu_backward<T: Element>(x: &[T], gy: &[T]) -> Vec<T> {
    x.iter().zip(gy).map(|(&v, &g)| T::from_f64(g.as_f64() * gelu_derivative(v.as_f64()))).collect()
}
