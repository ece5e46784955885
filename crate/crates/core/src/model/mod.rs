//! The ten-layer trajectory network and its checkpoint format.
//!
//! Layer order: conv 8@10x7 + ReLU, max-pool 7x5, batch norm, conv F@7x5 +
//! ReLU, max-pool 5x3, batch norm, flatten, dense 64 + ReLU, dropout, dense 5
//! + ReLU. Only F (the second convolution's filter count) varies.

mod checkpoint;

pub use checkpoint::{load_checkpoint, load_checkpoint_for, save_checkpoint, Checkpoint, CheckpointMetadata, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureMap, FREQ_BINS, TIME_FRAMES};
use crate::nn::{
    dropout, dropout_backward, flatten, glorot_uniform, relu, relu_backward, unflatten, BatchNorm,
    BatchNormCache, BatchStats, Conv2d, Dense, DropoutMask, MaxPool2d, Mode, PoolIndices, Real, Tensor,
};

pub const ALLOWED_FILTERS2: [usize; 4] = [32, 64, 128, 256];
pub const OUTPUT_DIM: usize = 5;

const CONV1_FILTERS: usize = 8;
const CONV1_KERNEL: (usize, usize) = (10, 7);
const POOL1: (usize, usize) = (7, 5);
const CONV2_KERNEL: (usize, usize) = (7, 5);
const POOL2: (usize, usize) = (5, 3);
const HIDDEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub filters2: usize,
    pub dropout_rate: f64,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        Self {
            filters2: 256,
            dropout_rate: 0.5,
        }
    }
}

impl NetworkSpec {
    pub fn with_filters(filters2: usize) -> Self {
        Self {
            filters2,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !ALLOWED_FILTERS2.contains(&self.filters2) {
            return Err(Error::InvalidSpec(format!(
                "second convolution filter count {} not in {ALLOWED_FILTERS2:?}",
                self.filters2
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidSpec(format!(
                "dropout rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    /// Expected output shape after each of the ten layers, input first.
    pub fn shape_chain(&self) -> Vec<Vec<usize>> {
        let f = self.filters2;
        vec![
            vec![129, 71, 1],
            vec![120, 65, 8],
            vec![17, 13, 8],
            vec![17, 13, 8],
            vec![11, 9, f],
            vec![2, 3, f],
            vec![2, 3, f],
            vec![6 * f],
            vec![64],
            vec![64],
            vec![5],
        ]
    }

    pub fn layer_table(&self) -> Vec<LayerRow> {
        let f = self.filters2;
        let shapes = self.shape_chain();
        let conv1 = CONV1_KERNEL.0 * CONV1_KERNEL.1 * CONV1_FILTERS + CONV1_FILTERS;
        let conv2 = CONV2_KERNEL.0 * CONV2_KERNEL.1 * CONV1_FILTERS * f + f;
        let dense1 = 6 * f * HIDDEN + HIDDEN;
        let dense2 = HIDDEN * OUTPUT_DIM + OUTPUT_DIM;
        let row = |index: usize, kind, filters, size, stride, act, params, trainable| LayerRow {
            index,
            kind,
            filters,
            filter_size: size,
            stride,
            activation: act,
            output_shape: shapes[index].clone(),
            params,
            trainable,
        };
        vec![
            row(0, "Input (log spectrogram)", None, None, None, None, 0, 0),
            row(1, "Convolution 2D", Some(CONV1_FILTERS), Some(CONV1_KERNEL), Some((1, 1)), Some("ReLU"), conv1, conv1),
            row(2, "Max Pooling 2D", None, Some(POOL1), Some(POOL1), Some("Max"), 0, 0),
            row(3, "Batch normalization", None, None, None, None, 4 * CONV1_FILTERS, 2 * CONV1_FILTERS),
            row(4, "Convolution 2D", Some(f), Some(CONV2_KERNEL), Some((1, 1)), Some("ReLU"), conv2, conv2),
            row(5, "Max Pooling 2D", None, Some(POOL2), Some(POOL2), Some("Max"), 0, 0),
            row(6, "Batch normalization", None, None, None, None, 4 * f, 2 * f),
            row(7, "Flatten", None, None, None, None, 0, 0),
            row(8, "Dense", None, None, None, Some("ReLU"), dense1, dense1),
            row(9, "Dropout", None, None, None, None, 0, 0),
            row(10, "Dense", None, None, None, Some("ReLU"), dense2, dense2),
        ]
    }

    pub fn trainable_params(&self) -> usize {
        self.layer_table().iter().map(|r| r.trainable).sum()
    }

    pub fn stored_params(&self) -> usize {
        self.layer_table().iter().map(|r| r.params).sum()
    }
}

/// One row of the `describe` table. `params` counts stored values (including
/// batch-norm running statistics); `trainable` excludes them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerRow {
    pub index: usize,
    pub kind: &'static str,
    pub filters: Option<usize>,
    pub filter_size: Option<(usize, usize)>,
    pub stride: Option<(usize, usize)>,
    pub activation: Option<&'static str>,
    pub output_shape: Vec<usize>,
    pub params: usize,
    pub trainable: usize,
}

pub fn format_layer_table(rows: &[LayerRow]) -> String {
    let pair = |p: Option<(usize, usize)>| p.map_or("-".to_string(), |(a, b)| format!("{a} x {b}"));
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<5} {:<24} {:>9} {:>11} {:>7} {:>10} {:>14} {:>12}",
        "Layer", "Type", "# filters", "Filter size", "Stride", "Activation", "Output shape", "# Parameters"
    );
    for r in rows {
        let shape: Vec<String> = r.output_shape.iter().map(ToString::to_string).collect();
        let _ = writeln!(
            out,
            "{:<5} {:<24} {:>9} {:>11} {:>7} {:>10} {:>14} {:>12}",
            r.index,
            r.kind,
            r.filters.map_or("-".into(), |f| f.to_string()),
            pair(r.filter_size),
            r.stride.map_or("-".into(), |(a, b)| if a == b { a.to_string() } else { format!("{a} x {b}") }),
            r.activation.unwrap_or("-"),
            shape.join(" x "),
            r.params,
        );
    }
    let total: usize = rows.iter().map(|r| r.params).sum();
    let trainable: usize = rows.iter().map(|r| r.trainable).sum();
    let _ = writeln!(out, "Total parameters: {total}");
    let _ = writeln!(out, "Trainable parameters: {trainable}");
    let _ = writeln!(out, "Non-trainable parameters: {}", total - trainable);
    out
}

/// Intermediate values of a training forward pass.
pub struct Tape<T> {
    input: Tensor<T>,
    conv1_out: Tensor<T>,
    pool1_idx: PoolIndices,
    bn1_cache: BatchNormCache<T>,
    bn1_stats: BatchStats,
    bn1_out: Tensor<T>,
    conv2_out: Tensor<T>,
    pool2_idx: PoolIndices,
    bn2_cache: BatchNormCache<T>,
    bn2_stats: BatchStats,
    bn2_dims: Vec<usize>,
    flat: Tensor<T>,
    dense1_out: Tensor<T>,
    dropout_mask: Option<DropoutMask<T>>,
    dropped: Tensor<T>,
    dense2_out: Tensor<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<T = f32> {
    spec: NetworkSpec,
    pub conv1: Conv2d<T>,
    pub pool1: MaxPool2d,
    pub bn1: BatchNorm<T>,
    pub conv2: Conv2d<T>,
    pub pool2: MaxPool2d,
    pub bn2: BatchNorm<T>,
    pub dense1: Dense<T>,
    pub dense2: Dense<T>,
}

pub const TRAINABLE_NAMES: [&str; 12] = [
    "conv1.weight",
    "conv1.bias",
    "bn1.gamma",
    "bn1.beta",
    "conv2.weight",
    "conv2.bias",
    "bn2.gamma",
    "bn2.beta",
    "dense1.weight",
    "dense1.bias",
    "dense2.weight",
    "dense2.bias",
];

impl<T: Real> Network<T> {
    /// All-zero weights, unit batch-norm scale, fresh running statistics.
    pub fn zeros(spec: NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let net = Self {
            spec,
            conv1: Conv2d::zeros(1, CONV1_FILTERS, CONV1_KERNEL.0, CONV1_KERNEL.1),
            pool1: MaxPool2d::new(POOL1.0, POOL1.1, POOL1.0, POOL1.1),
            bn1: BatchNorm::new(CONV1_FILTERS),
            conv2: Conv2d::zeros(CONV1_FILTERS, spec.filters2, CONV2_KERNEL.0, CONV2_KERNEL.1),
            pool2: MaxPool2d::new(POOL2.0, POOL2.1, POOL2.0, POOL2.1),
            bn2: BatchNorm::new(spec.filters2),
            dense1: Dense::zeros(6 * spec.filters2, HIDDEN),
            dense2: Dense::zeros(HIDDEN, OUTPUT_DIM),
        };
        net.verify_shape_chain()?;
        Ok(net)
    }

    /// Glorot-uniform weights, zero biases, seeded.
    pub fn build(spec: NetworkSpec, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        net.init_weights(&mut rng);
        Ok(net)
    }

    fn init_weights<R: Rng>(&mut self, rng: &mut R) {
        let conv_fans = |c: &Conv2d<T>| {
            let (kh, kw) = c.kernel();
            (kh * kw * c.in_channels(), kh * kw * c.out_channels())
        };
        let (fi, fo) = conv_fans(&self.conv1);
        self.conv1.weight = glorot_uniform(self.conv1.weight.dims(), fi, fo, rng);
        let (fi, fo) = conv_fans(&self.conv2);
        self.conv2.weight = glorot_uniform(self.conv2.weight.dims(), fi, fo, rng);
        let d1 = (self.dense1.inputs(), self.dense1.outputs());
        self.dense1.weight = glorot_uniform(self.dense1.weight.dims(), d1.0, d1.1, rng);
        let d2 = (self.dense2.inputs(), self.dense2.outputs());
        self.dense2.weight = glorot_uniform(self.dense2.weight.dims(), d2.0, d2.1, rng);
    }

    /// Walks the layer shape functions and compares against the expected chain.
    fn verify_shape_chain(&self) -> Result<()> {
        let mut shapes = vec![vec![FREQ_BINS, TIME_FRAMES, 1]];
        let s = self.conv1.output_shape([FREQ_BINS, TIME_FRAMES, 1])?;
        shapes.push(s.to_vec());
        let s = self.pool1.output_shape(s)?;
        shapes.push(s.to_vec());
        shapes.push(vec![s[0], s[1], self.bn1.channels()]);
        let s = self.conv2.output_shape(s)?;
        shapes.push(s.to_vec());
        let s = self.pool2.output_shape(s)?;
        shapes.push(s.to_vec());
        shapes.push(vec![s[0], s[1], self.bn2.channels()]);
        let flat = s.iter().product::<usize>();
        shapes.push(vec![flat]);
        if flat != self.dense1.inputs() {
            return Err(Error::InvalidSpec(format!("flatten gives {flat}, dense expects {}", self.dense1.inputs())));
        }
        shapes.push(vec![self.dense1.outputs()]);
        shapes.push(vec![self.dense1.outputs()]);
        shapes.push(vec![self.dense2.outputs()]);
        let expected = self.spec.shape_chain();
        if shapes != expected {
            return Err(Error::InvalidSpec(format!("shape chain {shapes:?} != {expected:?}")));
        }
        Ok(())
    }

    pub fn spec(&self) -> NetworkSpec {
        self.spec
    }

    pub fn trainable_param_count(&self) -> usize {
        self.trainable().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn stored_param_count(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn trainable(&self) -> Vec<(&'static str, &Tensor<T>)> {
        let t = [
            &self.conv1.weight,
            &self.conv1.bias,
            &self.bn1.gamma,
            &self.bn1.beta,
            &self.conv2.weight,
            &self.conv2.bias,
            &self.bn2.gamma,
            &self.bn2.beta,
            &self.dense1.weight,
            &self.dense1.bias,
            &self.dense2.weight,
            &self.dense2.bias,
        ];
        TRAINABLE_NAMES.into_iter().zip(t).collect()
    }

    /// Trainable tensors in [`TRAINABLE_NAMES`] order.
    pub fn trainable_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![
            &mut self.conv1.weight,
            &mut self.conv1.bias,
            &mut self.bn1.gamma,
            &mut self.bn1.beta,
            &mut self.conv2.weight,
            &mut self.conv2.bias,
            &mut self.bn2.gamma,
            &mut self.bn2.beta,
            &mut self.dense1.weight,
            &mut self.dense1.bias,
            &mut self.dense2.weight,
            &mut self.dense2.bias,
        ]
    }

    /// Every stored tensor in declaration order (checkpoint order).
    pub fn named_tensors(&self) -> Vec<(&'static str, &Tensor<T>)> {
        vec![
            ("conv1.weight", &self.conv1.weight),
            ("conv1.bias", &self.conv1.bias),
            ("bn1.gamma", &self.bn1.gamma),
            ("bn1.beta", &self.bn1.beta),
            ("bn1.running_mean", &self.bn1.running_mean),
            ("bn1.running_var", &self.bn1.running_var),
            ("conv2.weight", &self.conv2.weight),
            ("conv2.bias", &self.conv2.bias),
            ("bn2.gamma", &self.bn2.gamma),
            ("bn2.beta", &self.bn2.beta),
            ("bn2.running_mean", &self.bn2.running_mean),
            ("bn2.running_var", &self.bn2.running_var),
            ("dense1.weight", &self.dense1.weight),
            ("dense1.bias", &self.dense1.bias),
            ("dense2.weight", &self.dense2.weight),
            ("dense2.bias", &self.dense2.bias),
        ]
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor<T>)> {
        vec![
            ("conv1.weight", &mut self.conv1.weight),
            ("conv1.bias", &mut self.conv1.bias),
            ("bn1.gamma", &mut self.bn1.gamma),
            ("bn1.beta", &mut self.bn1.beta),
            ("bn1.running_mean", &mut self.bn1.running_mean),
            ("bn1.running_var", &mut self.bn1.running_var),
            ("conv2.weight", &mut self.conv2.weight),
            ("conv2.bias", &mut self.conv2.bias),
            ("bn2.gamma", &mut self.bn2.gamma),
            ("bn2.beta", &mut self.bn2.beta),
            ("bn2.running_mean", &mut self.bn2.running_mean),
            ("bn2.running_var", &mut self.bn2.running_var),
            ("dense1.weight", &mut self.dense1.weight),
            ("dense1.bias", &mut self.dense1.bias),
            ("dense2.weight", &mut self.dense2.weight),
            ("dense2.bias", &mut self.dense2.bias),
        ]
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<()> {
        match input.dims() {
            [_, h, w, 1] if *h == FREQ_BINS && *w == TIME_FRAMES => Ok(()),
            other => Err(Error::ShapeMismatch {
                op: "network input",
                expected: vec![FREQ_BINS, TIME_FRAMES, 1],
                got: other.to_vec(),
            }),
        }
    }

    /// Inference over a `[N, 129, 71, 1]` batch; returns raw `[N, 5]` ReLU outputs.
    pub fn forward_infer(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(input)?;
        let x = relu(&self.conv1.forward(input)?);
        let (x, _) = self.pool1.forward(&x)?;
        let x = self.bn1.forward_infer(&x)?;
        let x = relu(&self.conv2.forward(&x)?);
        let (x, _) = self.pool2.forward(&x)?;
        let x = self.bn2.forward_infer(&x)?;
        let x = flatten(x)?;
        let x = relu(&self.dense1.forward(&x)?);
        Ok(relu(&self.dense2.forward(&x)?))
    }

    /// Training-mode forward (batch statistics, dropout active).
    pub fn forward_train<R: Rng + ?Sized>(&self, input: &Tensor<T>, rng: &mut R) -> Result<(Tensor<T>, Tape<T>)> {
        self.check_input(input)?;
        let conv1_out = self.conv1.forward(input)?;
        let (pooled, pool1_idx) = self.pool1.forward(&relu(&conv1_out))?;
        let (bn1_out, bn1_cache, bn1_stats) = self.bn1.forward_train(&pooled)?;
        let conv2_out = self.conv2.forward(&bn1_out)?;
        let (pooled, pool2_idx) = self.pool2.forward(&relu(&conv2_out))?;
        let (bn2_out, bn2_cache, bn2_stats) = self.bn2.forward_train(&pooled)?;
        let bn2_dims = bn2_out.dims().to_vec();
        let flat = flatten(bn2_out)?;
        let dense1_out = self.dense1.forward(&flat)?;
        let (dropped, dropout_mask) = dropout(&relu(&dense1_out), self.spec.dropout_rate, Mode::Train, rng);
        let dense2_out = self.dense2.forward(&dropped)?;
        let output = relu(&dense2_out);
        Ok((
            output,
            Tape {
                input: input.clone(),
                conv1_out,
                pool1_idx,
                bn1_cache,
                bn1_stats,
                bn1_out,
                conv2_out,
                pool2_idx,
                bn2_cache,
                bn2_stats,
                bn2_dims,
                flat,
                dense1_out,
                dropout_mask,
                dropped,
                dense2_out,
            },
        ))
    }

    /// Gradients of the loss for every trainable tensor, in [`TRAINABLE_NAMES`] order.
    pub fn backward(&self, tape: &Tape<T>, grad_output: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        let g = relu_backward(&tape.dense2_out, grad_output)?;
        let d2 = self.dense2.backward(&tape.dropped, &g)?;
        let g = dropout_backward(tape.dropout_mask.as_ref(), &d2.input);
        let g = relu_backward(&tape.dense1_out, &g)?;
        let d1 = self.dense1.backward(&tape.flat, &g)?;
        let g = unflatten(d1.input, &tape.bn2_dims)?;
        let (g, bn2_gamma, bn2_beta) = self.bn2.backward(&tape.bn2_cache, &g)?;
        let g = self.pool2.backward(&tape.pool2_idx, &g)?;
        let g = relu_backward(&tape.conv2_out, &g)?;
        let c2 = self.conv2.backward(&tape.bn1_out, &g, true)?;
        let g = c2.input.expect("input gradient requested");
        let (g, bn1_gamma, bn1_beta) = self.bn1.backward(&tape.bn1_cache, &g)?;
        let g = self.pool1.backward(&tape.pool1_idx, &g)?;
        let g = relu_backward(&tape.conv1_out, &g)?;
        let c1 = self.conv1.backward(&tape.input, &g, false)?;
        Ok(vec![
            c1.weight, c1.bias, bn1_gamma, bn1_beta, c2.weight, c2.bias, bn2_gamma, bn2_beta, d1.weight, d1.bias,
            d2.weight, d2.bias,
        ])
    }

    /// Folds the tape's batch statistics into the running statistics.
    pub fn update_running_stats(&mut self, tape: &Tape<T>) {
        self.bn1.update_running(&tape.bn1_stats);
        self.bn2.update_running(&tape.bn2_stats);
    }

    /// Single-feature inference, raw (unclamped) outputs.
    pub fn forward_feature(&self, feature: &FeatureMap) -> Result<[T; OUTPUT_DIM]> {
        let out = self.forward_infer(&features_to_batch(&[feature]))?;
        let mut r = [T::zero(); OUTPUT_DIM];
        r.copy_from_slice(out.data());
        Ok(r)
    }

    pub fn cast<U: Real>(&self) -> Network<U> {
        let bn = |b: &BatchNorm<T>| BatchNorm {
            gamma: b.gamma.cast(),
            beta: b.beta.cast(),
            running_mean: b.running_mean.cast(),
            running_var: b.running_var.cast(),
            epsilon: b.epsilon,
            momentum: b.momentum,
        };
        Network {
            spec: self.spec,
            conv1: Conv2d { weight: self.conv1.weight.cast(), bias: self.conv1.bias.cast() },
            pool1: self.pool1,
            bn1: bn(&self.bn1),
            conv2: Conv2d { weight: self.conv2.weight.cast(), bias: self.conv2.bias.cast() },
            pool2: self.pool2,
            bn2: bn(&self.bn2),
            dense1: Dense { weight: self.dense1.weight.cast(), bias: self.dense1.bias.cast() },
            dense2: Dense { weight: self.dense2.weight.cast(), bias: self.dense2.bias.cast() },
        }
    }
}

/// Stacks feature maps into a `[N, 129, 71, 1]` batch.
pub fn features_to_batch<T: Real>(features: &[&FeatureMap]) -> Tensor<T> {
    let mut data = Vec::with_capacity(features.len() * FREQ_BINS * TIME_FRAMES);
    for f in features {
        data.extend(f.values().iter().map(|&v| T::from_f64_lossy(f64::from(v))));
    }
    Tensor::new(vec![features.len(), FREQ_BINS, TIME_FRAMES, 1], data).expect("feature maps have fixed shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE_SHAPES: [&[usize]; 11] = [
        &[129, 71, 1],
        &[120, 65, 8],
        &[17, 13, 8],
        &[17, 13, 8],
        &[11, 9, 256],
        &[2, 3, 256],
        &[2, 3, 256],
        &[1536],
        &[64],
        &[64],
        &[5],
    ];
    const TABLE_PARAMS: [usize; 11] = [0, 568, 0, 32, 71_936, 0, 1024, 0, 98_368, 0, 325];

    #[test]
    fn layer_table_matches_reference() {
        let rows = NetworkSpec::default().layer_table();
        for (row, (shape, params)) in rows.iter().zip(TABLE_SHAPES.iter().zip(TABLE_PARAMS)) {
            assert_eq!(&row.output_shape[..], *shape, "layer {}", row.index);
            assert_eq!(row.params, params, "layer {}", row.index);
        }
        assert_eq!(NetworkSpec::default().trainable_params(), 171_725);
        assert_eq!(NetworkSpec::default().stored_params(), 172_253);
    }

    #[test]
    fn built_network_counts() {
        let net = Network::<f32>::build(NetworkSpec::default(), 1).unwrap();
        assert_eq!(net.trainable_param_count(), 171_725);
        assert_eq!(net.stored_param_count(), 172_253);
        let net64 = Network::<f32>::build(NetworkSpec::with_filters(64), 1).unwrap();
        assert_eq!(net64.conv2.param_count(), 17_984);
        for f in ALLOWED_FILTERS2 {
            let net = Network::<f32>::zeros(NetworkSpec::with_filters(f)).unwrap();
            assert_eq!(net.trainable_param_count(), NetworkSpec::with_filters(f).trainable_params());
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(matches!(Network::<f32>::zeros(NetworkSpec::with_filters(100)), Err(Error::InvalidSpec(_))));
        let spec = NetworkSpec { filters2: 256, dropout_rate: 1.0 };
        assert!(matches!(Network::<f32>::zeros(spec), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = Network::<f32>::zeros(NetworkSpec::default()).unwrap();
        let feat = FeatureMap::from_values(vec![1.5; FREQ_BINS * TIME_FRAMES]).unwrap();
        assert_eq!(net.forward_feature(&feat).unwrap(), [0.0; 5]);
    }

    #[test]
    fn describe_table_mentions_totals() {
        let text = format_layer_table(&NetworkSpec::default().layer_table());
        assert!(text.contains("Trainable parameters: 171725"));
        assert!(text.contains("Total parameters: 172253"));
        assert!(text.contains("11 x 9 x 256"));
    }

    #[test]
    fn wrong_input_shape_errors() {
        let net = Network::<f32>::zeros(NetworkSpec::with_filters(32)).unwrap();
        assert!(net.forward_infer(&Tensor::zeros(&[1, 128, 71, 1])).is_err());
    }
}
