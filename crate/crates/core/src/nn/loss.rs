use super::{Real, Tensor};
use crate::error::{Error, Result};

/// Mean squared trajectory error over `N` rows of 5 components:
/// `(1 / 5N) * sum(l^T l)` with `l = desired - inferred`.
///
/// Returns the loss and its gradient with respect to `inferred`, `-2 l / (5N)`.
pub fn mse_loss<T: Real>(desired: &Tensor<T>, inferred: &Tensor<T>) -> Result<(f64, Tensor<T>)> {
    if desired.dims() != inferred.dims() || desired.dims().len() != 2 {
        return Err(Error::ShapeMismatch {
            op: "mse_loss",
            expected: desired.dims().to_vec(),
            got: inferred.dims().to_vec(),
        });
    }
    let count = desired.len() as f64;
    let mut total = 0.0f64;
    let mut grad = Vec::with_capacity(desired.len());
    for (&d, &y) in desired.data().iter().zip(inferred.data()) {
        let l = d.to_f64_lossy() - y.to_f64_lossy();
        total += l * l;
        grad.push(T::from_f64_lossy(-2.0 * l / count));
    }
    Ok((total / count, Tensor::new(inferred.dims().to_vec(), grad)?))
}

pub fn rmse(mse: f64) -> Result<f64> {
    if mse < 0.0 || mse.is_nan() {
        return Err(Error::NegativeInput(mse));
    }
    Ok(mse.sqrt())
}
