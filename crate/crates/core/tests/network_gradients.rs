//! Finite-difference check of the whole network's backward pass in f64.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use speech2traj::model::{Network, NetworkSpec, TRAINABLE_NAMES};
use speech2traj::nn::gradcheck::relative_error;
use speech2traj::nn::{mse_loss, Tensor};

fn loss(net: &Network<f64>, x: &Tensor<f64>, y: &Tensor<f64>) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (out, _) = net.forward_train(x, &mut rng).unwrap();
    mse_loss(y, &out).unwrap().0
}

#[test]
fn sampled_parameters_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let spec = NetworkSpec { filters2: 32, dropout_rate: 0.0 };
    let mut net = Network::<f32>::build(spec, 9).unwrap().cast::<f64>();
    // lift the output layer so the final ReLU is active for most units
    for b in net.dense2.bias.data_mut() {
        *b = 0.5;
    }
    let n = 3;
    let x = Tensor::new(
        vec![n, 129, 71, 1],
        (0..n * 129 * 71).map(|_| rng.random_range(-3.0..3.0)).collect(),
    )
    .unwrap();
    let y = Tensor::new(vec![n, 5], (0..n * 5).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();

    let mut trng = ChaCha8Rng::seed_from_u64(0);
    let (out, tape) = net.forward_train(&x, &mut trng).unwrap();
    let (_, grad) = mse_loss(&y, &out).unwrap();
    let grads = net.backward(&tape, &grad).unwrap();

    let h = 1e-5;
    let base = loss(&net, &x, &y);
    for (k, name) in TRAINABLE_NAMES.iter().enumerate() {
        let len = grads[k].len();
        let mut checked = 0;
        for _ in 0..16 {
            let i = rng.random_range(0..len);
            let mut up = net.clone();
            up.trainable_mut()[k].data_mut()[i] += h;
            let mut down = net.clone();
            down.trainable_mut()[k].data_mut()[i] -= h;
            let (lu, ld) = (loss(&up, &x, &y), loss(&down, &x, &y));
            // a max-pool or ReLU switch inside the stencil makes the one-sided
            // slopes disagree; such samples say nothing about the gradient
            let forward = (lu - base) / h;
            let backward = (base - ld) / h;
            if (forward - backward).abs() > 1e-4 * forward.abs().max(1.0) {
                continue;
            }
            let numeric = (lu - ld) / (2.0 * h);
            let analytic = grads[k].data()[i];
            assert!(relative_error(analytic, numeric) < 1e-5, "{name}[{i}]: {analytic} vs {numeric}");
            checked += 1;
        }
        assert!(checked >= 8, "{name}: only {checked} smooth samples");
    }
}
