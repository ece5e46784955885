use rand::Rng;

use super::{Mode, Real, Tensor};
use crate::error::Result;

pub fn relu<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Gradient passes where `x > 0`; at exactly zero it is blocked.
pub fn relu_backward<T: Real>(x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    grad_out.expect_dims("relu backward", x.dims())?;
    let data = x
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&v, &g)| if v > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::new(x.dims().to_vec(), data)
}

/// Per-element multiplier applied by inverted dropout (0 or `1 / (1 - rate)`).
#[derive(Debug, Clone)]
pub struct DropoutMask<T> {
    scale: Vec<T>,
}

/// Inverted dropout. Identity in [`Mode::Infer`] or when `rate == 0`.
pub fn dropout<T: Real, R: Rng + ?Sized>(
    x: &Tensor<T>,
    rate: f64,
    mode: Mode,
    rng: &mut R,
) -> (Tensor<T>, Option<DropoutMask<T>>) {
    if mode == Mode::Infer || rate <= 0.0 {
        return (x.clone(), None);
    }
    let keep = T::from_f64_lossy(1.0 / (1.0 - rate));
    let scale: Vec<T> = (0..x.len())
        .map(|_| if rng.random::<f64>() < rate { T::zero() } else { keep })
        .collect();
    let mut y = x.clone();
    for (v, s) in y.data_mut().iter_mut().zip(&scale) {
        *v = *v * *s;
    }
    (y, Some(DropoutMask { scale }))
}

pub fn dropout_backward<T: Real>(mask: Option<&DropoutMask<T>>, grad_out: &Tensor<T>) -> Tensor<T> {
    let mut g = grad_out.clone();
    if let Some(mask) = mask {
        for (v, s) in g.data_mut().iter_mut().zip(&mask.scale) {
            *v = *v * *s;
        }
    }
    g
}

/// `[n, h, w, c] -> [n, h * w * c]`, row-major.
pub fn flatten<T: Real>(x: Tensor<T>) -> Result<Tensor<T>> {
    let n = x.dims()[0];
    let rest = x.len() / n;
    x.reshape(&[n, rest])
}

pub fn unflatten<T: Real>(x: Tensor<T>, dims: &[usize]) -> Result<Tensor<T>> {
    x.reshape(dims)
}
