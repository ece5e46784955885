use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};

use super::{Real, Tensor};

/// `sqrt(6 / (fan_in + fan_out))`
pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// i.i.d. uniform samples on `[-L, L]`. For convolutions pass
/// `fan_in = kh * kw * cin`, `fan_out = kh * kw * cout`.
pub fn glorot_uniform<T: Real, R: Rng + ?Sized>(
    dims: &[usize],
    fan_in: usize,
    fan_out: usize,
    rng: &mut R,
) -> Tensor<T> {
    assert!(fan_in >= 1 && fan_out >= 1, "fans must be positive");
    let limit = glorot_limit(fan_in, fan_out);
    let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
    let n: usize = dims.iter().product();
    let data = (0..n).map(|_| T::from_f64_lossy(dist.sample(rng))).collect();
    Tensor::new(dims.to_vec(), data).expect("dims match sample count")
}

pub fn glorot_uniform_seeded<T: Real>(dims: &[usize], fan_in: usize, fan_out: usize, seed: u64) -> Tensor<T> {
    glorot_uniform(dims, fan_in, fan_out, &mut ChaCha8Rng::seed_from_u64(seed))
}
