//! Epochs of Adam over the trajectory MSE with best-validation retention.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio::read_wav_samples;
use crate::dataset::{assemble, load_features, make_batches, DatasetManifest, Example, LabelMap, NoiseAugment, Split};
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::model::{features_to_batch, save_checkpoint, CheckpointMetadata, Network, NetworkSpec};
use crate::nn::{mse_loss, rmse, AdamConfig, AdamState, Tensor};

pub const BEST_CHECKPOINT: &str = "best.ckpt";
pub const LAST_CHECKPOINT: &str = "last.ckpt";
pub const REPORT_FILE: &str = "report.csv";

/// Examples evaluated per forward call.
const EVAL_CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub snr_db_min: f64,
    pub snr_db_max: f64,
    /// Fraction of training clips that receive noise.
    pub probability: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            snr_db_min: 5.0,
            snr_db_max: 20.0,
            probability: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub network: NetworkSpec,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub augment: Option<AugmentConfig>,
    /// One batch holding the whole training set, in a fixed order.
    pub full_batch: bool,
    /// Where `best.ckpt`, `last.ckpt` and `report.csv` are written.
    pub out_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            network: NetworkSpec::default(),
            epochs: 100,
            batch_size: 64,
            adam: AdamConfig::default(),
            seed: 0,
            augment: None,
            full_batch: false,
            out_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_size < 2 && !self.full_batch {
            return Err(Error::InvalidConfig(format!("batch size {} is below 2", self.batch_size)));
        }
        let a = &self.adam;
        if !(a.lr > 0.0 && (0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.eps > 0.0) {
            return Err(Error::InvalidConfig(format!("bad optimizer settings {a:?}")));
        }
        if let Some(aug) = &self.augment {
            if !(aug.snr_db_min <= aug.snr_db_max && (0.0..=1.0).contains(&aug.probability)) {
                return Err(Error::InvalidConfig(format!("bad augmentation settings {aug:?}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub train_rmse: f64,
    pub val_mse: f64,
    pub val_rmse: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Train-mode MSE of every optimizer step, in order.
    pub step_losses: Vec<f64>,
}

pub const REPORT_HEADER: &str = "epoch,train_mse,train_rmse,val_mse,val_rmse,seconds";

impl TrainReport {
    /// 1-based epoch with the lowest validation MSE (first one on ties).
    pub fn best_epoch(&self) -> Option<usize> {
        let mut best: Option<&EpochRecord> = None;
        for r in &self.epochs {
            if best.is_none_or(|b| r.val_mse < b.val_mse) {
                best = Some(r);
            }
        }
        best.map(|r| r.epoch)
    }

    pub fn best_val_rmse(&self) -> Option<f64> {
        self.epochs.iter().map(|r| r.val_rmse).min_by(f64::total_cmp)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(REPORT_HEADER);
        s.push('\n');
        for r in &self.epochs {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{:.3}",
                r.epoch, r.train_mse, r.train_rmse, r.val_mse, r.val_rmse, r.seconds
            );
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(REPORT_HEADER) {
            return Err(Error::InvalidConfig("report header missing".into()));
        }
        let mut epochs = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::InvalidConfig(format!("bad report line {line:?}"));
            if f.len() != 6 {
                return Err(bad());
            }
            let num = |i: usize| f[i].trim().parse::<f64>().map_err(|_| bad());
            epochs.push(EpochRecord {
                epoch: f[0].trim().parse().map_err(|_| bad())?,
                train_mse: num(1)?,
                train_rmse: num(2)?,
                val_mse: num(3)?,
                val_rmse: num(4)?,
                seconds: num(5)?,
            });
        }
        Ok(Self {
            epochs,
            step_losses: Vec::new(),
        })
    }
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub best: Network<f32>,
    pub last: Network<f32>,
    pub report: TrainReport,
}

impl TrainOutcome {
    pub fn best_epoch(&self) -> usize {
        self.report.best_epoch().unwrap_or(0)
    }
}

/// Trains on the manifest's train split and validates on val1.
pub fn train(config: &TrainConfig, manifest: &DatasetManifest, labels: &LabelMap) -> Result<TrainOutcome> {
    let train_set: Vec<Example> = manifest.split(Split::Train).into_iter().cloned().collect();
    let val_set: Vec<Example> = manifest.split(Split::Val1).into_iter().cloned().collect();
    let augment = match &config.augment {
        Some(a) => {
            let noises = manifest
                .background_noise_files()
                .iter()
                .map(|p| read_wav_samples(p))
                .collect::<Result<Vec<_>>>()?;
            if noises.is_empty() {
                log::warn!("augmentation requested but no background noise found");
            }
            Some(NoiseAugment {
                noises,
                snr_db: (a.snr_db_min, a.snr_db_max),
                probability: a.probability,
            })
        }
        None => None,
    };
    train_on(config, &train_set, &val_set, labels, augment.as_ref())
}

/// Trains on explicit example lists.
pub fn train_on(
    config: &TrainConfig,
    train_set: &[Example],
    val_set: &[Example],
    labels: &LabelMap,
    augment: Option<&NoiseAugment>,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::InvalidConfig("training split is empty".into()));
    }
    if val_set.is_empty() {
        return Err(Error::InvalidConfig("validation split is empty".into()));
    }
    if config.full_batch && train_set.len() < 2 {
        return Err(Error::InvalidConfig("full-batch mode needs at least 2 examples".into()));
    }
    if let Some(dir) = &config.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let mut net = Network::<f32>::build(config.network, config.seed)?;
    let mut adam = AdamState::new(config.adam);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0xD50F_0A7D);
    let val_refs: Vec<&Example> = val_set.iter().collect();

    // without augmentation the features never change, so small sets are
    // computed once
    let full_batch = if config.full_batch {
        let refs: Vec<&Example> = train_set.iter().collect();
        let feats = load_features(&refs)?;
        let frefs: Vec<&FeatureMap> = feats.iter().collect();
        Some(assemble(&refs, &frefs, labels))
    } else {
        None
    };

    let mut report = TrainReport::default();
    let mut best: Option<(f64, Network<f32>)> = None;
    for epoch in 1..=config.epochs {
        let started = Instant::now();
        let mut weighted = 0.0;
        let mut seen = 0usize;

        let mut run_batch = |batch_index: usize, features: &Tensor<f32>, targets: &Tensor<f32>, first: &str| -> Result<()> {
            let n = targets.dims()[0];
            let (out, tape) = net.forward_train(features, &mut dropout_rng)?;
            let (loss, grad) = mse_loss(targets, &out)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_index,
                    first_file: first.to_string(),
                });
            }
            let grads = net.backward(&tape, &grad)?;
            adam.step(&mut net.trainable_mut(), &grads)?;
            net.update_running_stats(&tape);
            report.step_losses.push(loss);
            weighted += loss * n as f64;
            seen += n;
            Ok(())
        };

        if let Some(batch) = &full_batch {
            run_batch(0, &batch.features, &batch.targets, &batch.sources[0])?;
        } else {
            let epoch_seed = config.seed.wrapping_mul(1_000_003).wrapping_add(epoch as u64);
            let batches = make_batches(train_set, labels, config.batch_size, epoch_seed)?.with_augment(augment);
            for (i, batch) in batches.enumerate() {
                let batch = batch?;
                if batch.len() < 2 {
                    log::debug!("epoch {epoch}: skipping trailing batch of one ({})", batch.sources[0]);
                    continue;
                }
                run_batch(i, &batch.features, &batch.targets, &batch.sources[0])?;
            }
        }

        let train_mse = weighted / seen.max(1) as f64;
        let val = evaluate_examples(&net, &val_refs, labels)?;
        let record = EpochRecord {
            epoch,
            train_mse,
            train_rmse: rmse(train_mse)?,
            val_mse: val.mse,
            val_rmse: val.rmse,
            seconds: started.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {epoch}/{}: train rmse {:.4}, val rmse {:.4} ({:.1}s)",
            config.epochs,
            record.train_rmse,
            record.val_rmse,
            record.seconds
        );
        report.epochs.push(record);

        if best.as_ref().is_none_or(|(m, _)| val.mse < *m) {
            best = Some((val.mse, net.clone()));
            if let Some(dir) = &config.out_dir {
                let meta = CheckpointMetadata {
                    epoch,
                    best_val_mse: Some(val.mse),
                    rng_seed: config.seed,
                };
                save_checkpoint(&net, meta, &dir.join(BEST_CHECKPOINT))?;
            }
        }
        if let Some(dir) = &config.out_dir {
            write_report(&report, &dir.join(REPORT_FILE))?;
        }
    }

    if let Some(dir) = &config.out_dir {
        let meta = CheckpointMetadata {
            epoch: config.epochs,
            best_val_mse: best.as_ref().map(|b| b.0),
            rng_seed: config.seed,
        };
        save_checkpoint(&net, meta, &dir.join(LAST_CHECKPOINT))?;
    }
    let (_, best) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        best,
        last: net,
        report,
    })
}

pub fn write_report(report: &TrainReport, path: &Path) -> Result<()> {
    std::fs::write(path, report.to_csv()).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordScore {
    pub count: usize,
    pub mse: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub count: usize,
    pub mse: f64,
    pub rmse: f64,
    pub per_word: BTreeMap<String, WordScore>,
}

impl Evaluation {
    pub fn format(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "examples {}  mse {:.6}  rmse {:.6}", self.count, self.mse, self.rmse);
        let _ = writeln!(s, "{:<12} {:>8} {:>10}", "word", "count", "rmse");
        for (w, sc) in &self.per_word {
            let _ = writeln!(s, "{:<12} {:>8} {:>10.6}", w, sc.count, sc.rmse);
        }
        s
    }
}

/// Infer-mode MSE over `examples`, with a per-word breakdown.
pub fn evaluate_examples(net: &Network<f32>, examples: &[&Example], labels: &LabelMap) -> Result<Evaluation> {
    let mut total = 0.0f64;
    let mut words: BTreeMap<String, (usize, f64)> = BTreeMap::new();
    for chunk in examples.chunks(EVAL_CHUNK) {
        let feats = load_features(chunk)?;
        let refs: Vec<&FeatureMap> = feats.iter().collect();
        let out = net.forward_infer(&features_to_batch(&refs))?;
        for (i, e) in chunk.iter().enumerate() {
            let target = labels.label_of(&e.word).values();
            let sq: f64 = target
                .iter()
                .zip(&out.data()[i * 5..i * 5 + 5])
                .map(|(&d, &y)| (f64::from(d) - f64::from(y)).powi(2))
                .sum();
            total += sq;
            let w = words.entry(e.word.clone()).or_default();
            w.0 += 1;
            w.1 += sq;
        }
    }
    let count = examples.len();
    if count == 0 {
        return Err(Error::InvalidConfig("nothing to evaluate".into()));
    }
    let mse = total / (5 * count) as f64;
    let per_word = words
        .into_iter()
        .map(|(w, (n, sq))| {
            let mse = sq / (5 * n) as f64;
            (
                w,
                WordScore {
                    count: n,
                    mse,
                    rmse: mse.sqrt(),
                },
            )
        })
        .collect();
    Ok(Evaluation {
        count,
        mse,
        rmse: rmse(mse)?,
        per_word,
    })
}

pub fn evaluate(net: &Network<f32>, manifest: &DatasetManifest, split: Split, labels: &LabelMap) -> Result<Evaluation> {
    evaluate_examples(net, &manifest.split(split), labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_contract() {
        let mut c = TrainConfig::default();
        assert!(c.validate().is_ok());
        c.epochs = 0;
        assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));
        let c = TrainConfig {
            batch_size: 1,
            ..TrainConfig::default()
        };
        assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn report_round_trip_and_best() {
        let rec = |epoch, val_mse: f64| EpochRecord {
            epoch,
            train_mse: 0.5,
            train_rmse: 0.5f64.sqrt(),
            val_mse,
            val_rmse: val_mse.sqrt(),
            seconds: 1.0,
        };
        let report = TrainReport {
            epochs: vec![rec(1, 0.3), rec(2, 0.1), rec(3, 0.2)],
            step_losses: vec![],
        };
        assert_eq!(report.best_epoch(), Some(2));
        assert_eq!(report.best_val_rmse(), Some(0.1f64.sqrt()));
        let back = TrainReport::from_csv(&report.to_csv()).unwrap();
        assert_eq!(back.epochs, report.epochs);
        assert!(report.to_csv().starts_with("epoch,train_mse,train_rmse,val_mse,val_rmse,seconds\n"));
    }
}
