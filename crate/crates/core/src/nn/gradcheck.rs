//! Central finite-difference checks of every kernel's backward pass, in f64.
//!
//! Each layer output `y` is reduced to the scalar `sum(r * y)` with a fixed
//! random `r`; the analytic gradient is the layer's backward applied to `r`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{mse_loss, relu, relu_backward, BatchNorm, Conv2d, Dense, MaxPool2d, Tensor};
use crate::error::Result;

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;
/// Relative errors use `max(|analytic|, |numeric|, FLOOR)` as denominator.
const FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub kernel: &'static str,
    pub max_rel_error: f64,
    pub entries: usize,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.max_rel_error < TOLERANCE
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

fn random_tensor(rng: &mut ChaCha8Rng, dims: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    let n = dims.iter().product();
    Tensor::new(dims.to_vec(), (0..n).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

fn project(r: &Tensor<f64>, y: &Tensor<f64>) -> f64 {
    r.data().iter().zip(y.data()).map(|(a, b)| a * b).sum()
}

/// Worst relative error between `analytic` and central differences of `f`
/// with respect to every entry of `x`.
fn compare(
    x: &Tensor<f64>,
    analytic: &Tensor<f64>,
    mut f: impl FnMut(&Tensor<f64>) -> f64,
) -> (f64, usize) {
    let mut worst = 0.0f64;
    let mut probe = x.clone();
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + STEP;
        let up = f(&probe);
        probe.data_mut()[i] = orig - STEP;
        let down = f(&probe);
        probe.data_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * STEP);
        worst = worst.max(relative_error(analytic.data()[i], numeric));
    }
    (worst, x.len())
}

fn merge(kernel: &'static str, parts: &[(f64, usize)]) -> GradCheck {
    GradCheck {
        kernel,
        max_rel_error: parts.iter().map(|p| p.0).fold(0.0, f64::max),
        entries: parts.iter().map(|p| p.1).sum(),
    }
}

pub fn check_conv2d(seed: u64) -> Result<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random_tensor(&mut rng, &[2, 6, 5, 2], -1.0, 1.0);
    let mut conv = Conv2d::<f64>::zeros(2, 3, 3, 2);
    conv.weight = random_tensor(&mut rng, &[3, 3, 2, 2], -0.5, 0.5);
    conv.bias = random_tensor(&mut rng, &[3], -0.5, 0.5);
    let y = conv.forward(&x)?;
    let r = random_tensor(&mut rng, y.dims(), -1.0, 1.0);
    let grads = conv.backward(&x, &r, true)?;

    let gx = compare(&x, grads.input.as_ref().expect("input grad requested"), |xp| {
        project(&r, &conv.forward(xp).unwrap())
    });
    let gw = compare(&conv.weight, &grads.weight, |wp| {
        let c = Conv2d { weight: wp.clone(), bias: conv.bias.clone() };
        project(&r, &c.forward(&x).unwrap())
    });
    let gb = compare(&conv.bias, &grads.bias, |bp| {
        let c = Conv2d { weight: conv.weight.clone(), bias: bp.clone() };
        project(&r, &c.forward(&x).unwrap())
    });
    Ok(merge("conv2d", &[gx, gw, gb]))
}

pub fn check_maxpool2d(seed: u64) -> Result<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // distinct values on a 0.01 grid keep every window's maximum isolated
    let dims = [2usize, 7, 5, 2];
    let n: usize = dims.iter().product();
    let mut values: Vec<f64> = (0..n).map(|i| i as f64 * 0.01 - 1.0).collect();
    for i in (1..n).rev() {
        values.swap(i, rng.random_range(0..=i));
    }
    let x = Tensor::new(dims.to_vec(), values)?;
    let mut parts = Vec::new();
    for pool in [MaxPool2d::new(2, 2, 2, 2), MaxPool2d::new(3, 2, 3, 2)] {
        let (y, idx) = pool.forward(&x)?;
        let r = random_tensor(&mut rng, y.dims(), -1.0, 1.0);
        let gx = pool.backward(&idx, &r)?;
        parts.push(compare(&x, &gx, |xp| project(&r, &pool.forward(xp).unwrap().0)));
    }
    Ok(merge("maxpool2d", &parts))
}

pub fn check_batchnorm(seed: u64) -> Result<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random_tensor(&mut rng, &[3, 4, 3, 2], -2.0, 2.0);
    let mut bn = BatchNorm::<f64>::new(2);
    bn.gamma = random_tensor(&mut rng, &[2], 0.5, 1.5);
    bn.beta = random_tensor(&mut rng, &[2], -0.5, 0.5);
    let (y, cache, _) = bn.forward_train(&x)?;
    let r = random_tensor(&mut rng, y.dims(), -1.0, 1.0);
    let (gx, ggamma, gbeta) = bn.backward(&cache, &r)?;

    let px = compare(&x, &gx, |xp| project(&r, &bn.forward_train(xp).unwrap().0));
    let pg = compare(&bn.gamma, &ggamma, |gp| {
        let mut b = bn.clone();
        b.gamma = gp.clone();
        project(&r, &b.forward_train(&x).unwrap().0)
    });
    let pb = compare(&bn.beta, &gbeta, |bp| {
        let mut b = bn.clone();
        b.beta = bp.clone();
        project(&r, &b.forward_train(&x).unwrap().0)
    });
    Ok(merge("batchnorm", &[px, pg, pb]))
}

pub fn check_dense(seed: u64) -> Result<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random_tensor(&mut rng, &[3, 7], -1.0, 1.0);
    let mut dense = Dense::<f64>::zeros(7, 4);
    dense.weight = random_tensor(&mut rng, &[7, 4], -0.5, 0.5);
    dense.bias = random_tensor(&mut rng, &[4], -0.5, 0.5);
    let y = dense.forward(&x)?;
    let r = random_tensor(&mut rng, y.dims(), -1.0, 1.0);
    let grads = dense.backward(&x, &r)?;

    let px = compare(&x, &grads.input, |xp| project(&r, &dense.forward(xp).unwrap()));
    let pw = compare(&dense.weight, &grads.weight, |wp| {
        let d = Dense { weight: wp.clone(), bias: dense.bias.clone() };
        project(&r, &d.forward(&x).unwrap())
    });
    let pb = compare(&dense.bias, &grads.bias, |bp| {
        let d = Dense { weight: dense.weight.clone(), bias: bp.clone() };
        project(&r, &d.forward(&x).unwrap())
    });
    Ok(merge("dense", &[px, pw, pb]))
}

pub fn check_relu(seed: u64) -> Result<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // probe away from the kink
    let n = 40;
    let data = (0..n)
        .map(|_| {
            let mag = rng.random_range(0.05..1.0);
            if rng.random::<bool>() { mag } else { -mag }
        })
        .collect();
    let x = Tensor::new(vec![4, 10], data)?;
    let r = random_tensor(&mut rng, &[4, 10], -1.0, 1.0);
    let gx = relu_backward(&x, &r)?;
    Ok(merge("relu", &[compare(&x, &gx, |xp| project(&r, &relu(xp)))]))
}

pub fn check_mse_loss(seed: u64) -> Result<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let desired = random_tensor(&mut rng, &[3, 5], 0.0, 1.0);
    let inferred = random_tensor(&mut rng, &[3, 5], 0.0, 1.2);
    let (_, grad) = mse_loss(&desired, &inferred)?;
    Ok(merge(
        "mse_loss",
        &[compare(&inferred, &grad, |ip| mse_loss(&desired, ip).unwrap().0)],
    ))
}

/// Runs every kernel check with seeds derived from `seed`.
pub fn run_all(seed: u64) -> Result<Vec<GradCheck>> {
    Ok(vec![
        check_conv2d(seed)?,
        check_maxpool2d(seed.wrapping_add(1))?,
        check_batchnorm(seed.wrapping_add(2))?,
        check_dense(seed.wrapping_add(3))?,
        check_relu(seed.wrapping_add(4))?,
        check_mse_loss(seed.wrapping_add(5))?,
    ])
}
