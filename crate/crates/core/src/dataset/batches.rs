use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::labels::LabelMap;
use super::manifest::Example;
use super::noise::mix_noise;
use crate::audio::read_wav;
use crate::error::{Error, Result};
use crate::features::{log_spectrogram, FeatureMap};
use crate::model::features_to_batch;
use crate::nn::Tensor;

/// Background-noise augmentation applied to a fraction of training clips.
#[derive(Debug, Clone)]
pub struct NoiseAugment {
    pub noises: Vec<Vec<i16>>,
    pub snr_db: (f64, f64),
    pub probability: f64,
}

/// One batch: `[N, 129, 71, 1]` features, `[N, 5]` targets, and the
/// relative paths of the examples in order.
#[derive(Debug, Clone)]
pub struct Batch {
    pub features: Tensor<f32>,
    pub targets: Tensor<f32>,
    pub sources: Vec<String>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }
}

/// Seeded shuffled pass over `examples`, yielding batches of `batch_size`
/// (the last one may be shorter). Features are computed lazily per batch.
pub struct Batches<'a> {
    examples: &'a [Example],
    labels: &'a LabelMap,
    order: Vec<usize>,
    batch_size: usize,
    next: usize,
    augment: Option<&'a NoiseAugment>,
    seed: u64,
}

pub fn make_batches<'a>(
    examples: &'a [Example],
    labels: &'a LabelMap,
    batch_size: usize,
    seed: u64,
) -> Result<Batches<'a>> {
    if batch_size < 2 {
        return Err(Error::InvalidConfig(format!("batch size {batch_size} is below 2")));
    }
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(Batches {
        examples,
        labels,
        order,
        batch_size,
        next: 0,
        augment: None,
        seed,
    })
}

impl<'a> Batches<'a> {
    pub fn with_augment(mut self, augment: Option<&'a NoiseAugment>) -> Self {
        self.augment = augment;
        self
    }

    /// Example indices in the order they will be emitted.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn batch_sizes(&self) -> Vec<usize> {
        self.order.chunks(self.batch_size).map(<[usize]>::len).collect()
    }
}

fn load_feature(example: &Example, augment: Option<&NoiseAugment>, seed: u64) -> Result<FeatureMap> {
    let mut clip = read_wav(&example.path)?;
    if let Some(aug) = augment.filter(|a| !a.noises.is_empty()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if rng.random::<f64>() < aug.probability {
            let noise = &aug.noises[rng.random_range(0..aug.noises.len())];
            let (lo, hi) = aug.snr_db;
            let snr = if hi > lo { rng.random_range(lo..hi) } else { lo };
            match mix_noise(&clip, noise, snr, rng.random()) {
                Ok(mixed) => clip = mixed,
                // silent utterances stay clean
                Err(Error::ZeroSignalPower) => {}
                Err(e) => return Err(e.at(&example.path)),
            }
        }
    }
    Ok(log_spectrogram(&clip))
}

/// Loads and featurizes `examples` in parallel, preserving order.
pub fn load_features(examples: &[&Example]) -> Result<Vec<FeatureMap>> {
    examples.par_iter().map(|e| load_feature(e, None, 0)).collect()
}

pub fn assemble(examples: &[&Example], features: &[&FeatureMap], labels: &LabelMap) -> Batch {
    let targets = examples
        .iter()
        .flat_map(|e| labels.label_of(&e.word).values())
        .collect();
    Batch {
        features: features_to_batch(features),
        targets: Tensor::new(vec![examples.len(), 5], targets).expect("five targets per example"),
        sources: examples.iter().map(|e| e.relative.clone()).collect(),
    }
}

impl Iterator for Batches<'_> {
    type Item = Result<Batch>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.order.len() {
            return None;
        }
        let end = (self.next + self.batch_size).min(self.order.len());
        let positions: Vec<usize> = (self.next..end).collect();
        self.next = end;
        let picked: Vec<&Example> = positions.iter().map(|&p| &self.examples[self.order[p]]).collect();
        let seed = self.seed;
        let augment = self.augment;
        let features: Result<Vec<FeatureMap>> = picked
            .par_iter()
            .zip(&positions)
            .map(|(e, &p)| load_feature(e, augment, seed ^ (p as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
            .collect();
        Some(features.map(|f| {
            let refs: Vec<&FeatureMap> = f.iter().collect();
            assemble(&picked, &refs, self.labels)
        }))
    }
}
