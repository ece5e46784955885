//! Speech to finger-trajectory regression.
//!
//! A one-second 16 kHz clip becomes a 129x71 log-spectrogram, a small CNN
//! maps it straight to five finger flexion targets in `[0, 1]` (thumb, index,
//! middle, ring, pinky), and a per-finger PI loop smooths the resulting
//! step-wise reference. No text transcription happens anywhere.

pub mod audio;
pub mod control;
pub mod dataset;
pub mod error;
pub mod features;
pub mod model;
pub mod nn;
pub mod runtime;
pub mod synth;
pub mod training;

pub use audio::{decode_wav, read_wav, AudioClip, RingBuffer};
pub use dataset::{LabelMap, Trajectory};
pub use model::{Network, NetworkSpec};
pub use error::{Error, Result};
pub use features::{log_spectrogram, FeatureMap};
pub use nn::{Mode, Tensor};
pub use runtime::{Engine, TrajectoryEvent};
