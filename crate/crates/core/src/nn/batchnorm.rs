use super::{Real, Tensor};
use crate::error::{Error, Result};

pub const BN_EPSILON: f64 = 1e-3;
pub const BN_MOMENTUM: f64 = 0.99;

/// Per-channel batch normalization over the last (channel) axis.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm<T = f32> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    pub epsilon: f64,
    pub momentum: f64,
}

/// Saved activations needed by the backward pass.
#[derive(Debug, Clone)]
pub struct BatchNormCache<T> {
    x_hat: Vec<T>,
    inv_std: Vec<f64>,
    dims: Vec<usize>,
}

/// Biased per-channel statistics of one training batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl<T: Real> BatchNorm<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Tensor::full(&[channels], T::one()),
            beta: Tensor::zeros(&[channels]),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::full(&[channels], T::one()),
            epsilon: BN_EPSILON,
            momentum: BN_MOMENTUM,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    pub fn trainable_count(&self) -> usize {
        2 * self.channels()
    }

    pub fn stored_count(&self) -> usize {
        4 * self.channels()
    }

    fn check(&self, op: &'static str, input: &Tensor<T>) -> Result<usize> {
        let c = *input.dims().last().unwrap_or(&0);
        if c != self.channels() {
            return Err(Error::ShapeMismatch {
                op,
                expected: vec![self.channels()],
                got: input.dims().to_vec(),
            });
        }
        Ok(c)
    }

    /// Normalizes with the batch's own statistics. Running statistics are not
    /// touched; apply [`BatchNorm::update_running`] with the returned stats.
    pub fn forward_train(&self, input: &Tensor<T>) -> Result<(Tensor<T>, BatchNormCache<T>, BatchStats)> {
        let c = self.check("batchnorm", input)?;
        let batch = input.dims()[0];
        if batch < 2 {
            return Err(Error::DegenerateBatch(batch));
        }
        let x = input.data();
        let m = (x.len() / c) as f64;

        let mut mean = vec![0.0f64; c];
        for row in x.chunks_exact(c) {
            for (acc, v) in mean.iter_mut().zip(row) {
                *acc += v.to_f64_lossy();
            }
        }
        mean.iter_mut().for_each(|v| *v /= m);
        let mut var = vec![0.0f64; c];
        for row in x.chunks_exact(c) {
            for ((acc, v), mu) in var.iter_mut().zip(row).zip(&mean) {
                let d = v.to_f64_lossy() - mu;
                *acc += d * d;
            }
        }
        var.iter_mut().for_each(|v| *v /= m);
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.epsilon).sqrt()).collect();

        let gamma = self.gamma.data();
        let beta = self.beta.data();
        let mut x_hat = Vec::with_capacity(x.len());
        let mut y = Vec::with_capacity(x.len());
        for row in x.chunks_exact(c) {
            for ch in 0..c {
                let xh = T::from_f64_lossy((row[ch].to_f64_lossy() - mean[ch]) * inv_std[ch]);
                x_hat.push(xh);
                y.push(gamma[ch] * xh + beta[ch]);
            }
        }
        Ok((
            Tensor::new(input.dims().to_vec(), y)?,
            BatchNormCache {
                x_hat,
                inv_std,
                dims: input.dims().to_vec(),
            },
            BatchStats { mean, var },
        ))
    }

    /// `r <- momentum * r + (1 - momentum) * batch_stat`
    pub fn update_running(&mut self, stats: &BatchStats) {
        let mom = self.momentum;
        for (r, s) in self.running_mean.data_mut().iter_mut().zip(&stats.mean) {
            *r = T::from_f64_lossy(mom * r.to_f64_lossy() + (1.0 - mom) * s);
        }
        for (r, s) in self.running_var.data_mut().iter_mut().zip(&stats.var) {
            *r = T::from_f64_lossy((mom * r.to_f64_lossy() + (1.0 - mom) * s).max(0.0));
        }
    }

    pub fn forward_infer(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let c = self.check("batchnorm", input)?;
        let eps = T::from_f64_lossy(self.epsilon);
        let scale: Vec<T> = self
            .gamma
            .data()
            .iter()
            .zip(self.running_var.data())
            .map(|(&g, &v)| g / (v + eps).sqrt())
            .collect();
        let mean = self.running_mean.data();
        let beta = self.beta.data();
        let mut y = Vec::with_capacity(input.len());
        for row in input.data().chunks_exact(c) {
            for ch in 0..c {
                y.push((row[ch] - mean[ch]) * scale[ch] + beta[ch]);
            }
        }
        Tensor::new(input.dims().to_vec(), y)
    }

    /// Returns `(grad_input, grad_gamma, grad_beta)` through the batch statistics.
    pub fn backward(
        &self,
        cache: &BatchNormCache<T>,
        grad_out: &Tensor<T>,
    ) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
        grad_out.expect_dims("batchnorm backward", &cache.dims)?;
        let c = self.channels();
        let g = grad_out.data();
        let m = (g.len() / c) as f64;

        let mut dgamma = vec![0.0f64; c];
        let mut dbeta = vec![0.0f64; c];
        for (grow, xrow) in g.chunks_exact(c).zip(cache.x_hat.chunks_exact(c)) {
            for ch in 0..c {
                let gv = grow[ch].to_f64_lossy();
                dbeta[ch] += gv;
                dgamma[ch] += gv * xrow[ch].to_f64_lossy();
            }
        }
        let gamma = self.gamma.data();
        let mut dx = Vec::with_capacity(g.len());
        for (grow, xrow) in g.chunks_exact(c).zip(cache.x_hat.chunks_exact(c)) {
            for ch in 0..c {
                let k = gamma[ch].to_f64_lossy() * cache.inv_std[ch] / m;
                let v = k * (m * grow[ch].to_f64_lossy() - dbeta[ch] - xrow[ch].to_f64_lossy() * dgamma[ch]);
                dx.push(T::from_f64_lossy(v));
            }
        }
        Ok((
            Tensor::new(cache.dims.clone(), dx)?,
            Tensor::new(vec![c], dgamma.into_iter().map(T::from_f64_lossy).collect())?,
            Tensor::new(vec![c], dbeta.into_iter().map(T::from_f64_lossy).collect())?,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_input() -> Tensor<f64> {
        let data: Vec<f64> = (0..3 * 4 * 2 * 3).map(|i| ((i * 37 % 23) as f64) * 0.7 - 5.0).collect();
        Tensor::new(vec![3, 4, 2, 3], data).unwrap()
    }

    #[test]
    fn table_one_counts() {
        assert_eq!(BatchNorm::<f32>::new(8).trainable_count(), 16);
        assert_eq!(BatchNorm::<f32>::new(8).stored_count(), 32);
        assert_eq!(BatchNorm::<f32>::new(256).stored_count(), 1024);
    }

    #[test]
    fn infer_with_fresh_stats_is_near_identity() {
        let bn = BatchNorm::<f64>::new(3);
        let x = sample_input();
        let y = bn.forward_infer(&x).unwrap();
        let scale = 1.0 / (1.0 + BN_EPSILON).sqrt();
        for (a, b) in x.data().iter().zip(y.data()) {
            assert!((a * scale - b).abs() < 1e-12);
        }
    }

    #[test]
    fn infer_affine() {
        let mut bn = BatchNorm::<f64>::new(3);
        bn.gamma.data_mut().fill(2.0);
        bn.beta.data_mut().fill(3.0);
        let x = sample_input();
        let y = bn.forward_infer(&x).unwrap();
        let scale = 1.0 / (1.0 + BN_EPSILON).sqrt();
        for (a, b) in x.data().iter().zip(y.data()) {
            assert!((2.0 * a * scale + 3.0 - b).abs() < 1e-12);
        }
    }

    #[test]
    fn train_output_is_standardized() {
        let bn = BatchNorm::<f64>::new(3);
        // large spread so the epsilon term stays below 1e-5
        let x = sample_input().map(|v| 100.0 * v + 7.0);
        let (y, _, stats) = bn.forward_train(&x).unwrap();
        for ch in 0..3 {
            let vals: Vec<f64> = y.data().iter().skip(ch).step_by(3).copied().collect();
            let m = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / m;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m;
            assert!(mean.abs() < 1e-5);
            // the epsilon term shrinks the variance slightly
            let expected = stats.var[ch] / (stats.var[ch] + BN_EPSILON);
            assert!((var - expected).abs() < 1e-9);
            assert!((var - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn running_stats_update() {
        let mut bn = BatchNorm::<f64>::new(1);
        bn.update_running(&BatchStats {
            mean: vec![10.0],
            var: vec![3.0],
        });
        assert!((bn.running_mean.data()[0] - 0.1).abs() < 1e-12);
        assert!((bn.running_var.data()[0] - (0.99 + 0.03)).abs() < 1e-12);
    }

    #[test]
    fn single_sample_batch_is_degenerate() {
        let bn = BatchNorm::<f32>::new(2);
        assert!(matches!(
            bn.forward_train(&Tensor::zeros(&[1, 3, 3, 2])),
            Err(Error::DegenerateBatch(1))
        ));
        assert!(bn.forward_infer(&Tensor::zeros(&[1, 3, 3, 2])).is_ok());
    }
}
