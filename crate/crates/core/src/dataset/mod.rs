//! Speech Commands ingestion: labels, split manifest, batching, noise mixing.

mod batches;
mod labels;
mod manifest;
mod noise;

pub use batches::{assemble, load_features, make_batches, Batch, Batches, NoiseAugment};
pub use labels::{LabelMap, Trajectory, COMMAND_WORDS, DEFAULT_KEY, FINGER_NAMES};
pub use manifest::{
    scan_dataset, CountsReport, DatasetManifest, Example, Split, SplitCounts, BACKGROUND_NOISE_DIR, TESTING_LIST,
    VALIDATION_LIST,
};
pub use noise::{mean_power, measured_snr_db, mix_noise, noise_crop, noise_gain};
