//! Log-spectrogram front end: 129 frequency bins by 71 time frames per clip.
//!
//! Each 256-sample segment (hop 224) has its mean removed, is tapered by a
//! periodic Tukey window (taper fraction 0.25) and transformed; the one-sided
//! power spectrum doubles every bin except DC and Nyquist so that
//! `sum(power) / 256 == sum(windowed^2)`. No density scaling is applied.

use std::io::Write;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::audio::{AudioClip, CLIP_SAMPLES};
use crate::error::{Error, Result};

pub const SEGMENT_LEN: usize = 256;
pub const HOP_LEN: usize = 224;
pub const FREQ_BINS: usize = SEGMENT_LEN / 2 + 1;
pub const TIME_FRAMES: usize = (CLIP_SAMPLES - SEGMENT_LEN) / HOP_LEN + 1;
pub const TUKEY_ALPHA: f64 = 0.25;
/// Guard added before the logarithm so silent bins stay finite.
pub const LOG_EPSILON: f64 = 1e-10;

/// Short-time power spectrum, row-major `FREQ_BINS x TIME_FRAMES`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    values: Vec<f64>,
}

impl Spectrogram {
    pub fn get(&self, bin: usize, frame: usize) -> f64 {
        self.values[bin * TIME_FRAMES + frame]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn shape(&self) -> (usize, usize) {
        (FREQ_BINS, TIME_FRAMES)
    }

    /// Power spectrum of one time frame, low to high frequency.
    pub fn frame(&self, frame: usize) -> Vec<f64> {
        (0..FREQ_BINS).map(|b| self.get(b, frame)).collect()
    }

    pub fn from_values(values: Vec<f64>) -> Option<Self> {
        (values.len() == FREQ_BINS * TIME_FRAMES && values.iter().all(|v| *v >= 0.0))
            .then_some(Self { values })
    }
}

/// The network input: natural log of the guarded power spectrum, stored as f32.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    values: Vec<f32>,
}

impl FeatureMap {
    pub fn shape(&self) -> (usize, usize) {
        (FREQ_BINS, TIME_FRAMES)
    }

    pub fn get(&self, bin: usize, frame: usize) -> f32 {
        self.values[bin * TIME_FRAMES + frame]
    }

    /// Row-major values (frequency rows, time columns).
    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn from_values(values: Vec<f32>) -> Option<Self> {
        (values.len() == FREQ_BINS * TIME_FRAMES).then_some(Self { values })
    }

    /// Writes one matrix row per line, space separated.
    pub fn write_text(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        for row in self.values.chunks(TIME_FRAMES) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(" ")).map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Periodic Tukey window (a symmetric window of `len + 1` points, last dropped).
pub fn tukey_window(len: usize, alpha: f64) -> Vec<f64> {
    let m = len + 1;
    let denom = (m - 1) as f64;
    let width = (alpha * denom / 2.0).floor() as usize;
    (0..len)
        .map(|n| {
            if n <= width {
                0.5 * (1.0 + (std::f64::consts::PI * (-1.0 + 2.0 * n as f64 / alpha / denom)).cos())
            } else if n >= m - width - 1 {
                0.5 * (1.0
                    + (std::f64::consts::PI * (-2.0 / alpha + 1.0 + 2.0 * n as f64 / alpha / denom))
                        .cos())
            } else {
                1.0
            }
        })
        .collect()
}

struct Plan {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
}

fn plan() -> &'static Plan {
    static PLAN: OnceLock<Plan> = OnceLock::new();
    PLAN.get_or_init(|| Plan {
        fft: FftPlanner::new().plan_fft_forward(SEGMENT_LEN),
        window: tukey_window(SEGMENT_LEN, TUKEY_ALPHA),
    })
}

/// Detrended, windowed copy of one 256-sample segment.
pub fn windowed_segment(segment: &[f64]) -> Vec<f64> {
    assert_eq!(segment.len(), SEGMENT_LEN);
    let mean = segment.iter().sum::<f64>() / SEGMENT_LEN as f64;
    segment
        .iter()
        .zip(&plan().window)
        .map(|(x, w)| (x - mean) * w)
        .collect()
}

/// One-sided power spectrum of a single 256-sample segment.
pub fn segment_power(segment: &[f64]) -> Vec<f64> {
    let plan = plan();
    let mut buf: Vec<Complex<f64>> = windowed_segment(segment)
        .into_iter()
        .map(|re| Complex::new(re, 0.0))
        .collect();
    plan.fft.process(&mut buf);
    buf[..FREQ_BINS]
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let p = c.norm_sqr();
            if k == 0 || k == FREQ_BINS - 1 {
                p
            } else {
                2.0 * p
            }
        })
        .collect()
}

pub fn spectrogram(clip: &AudioClip) -> Spectrogram {
    let samples: Vec<f64> = clip.samples().iter().map(|&s| f64::from(s)).collect();
    let mut values = vec![0.0; FREQ_BINS * TIME_FRAMES];
    for frame in 0..TIME_FRAMES {
        let start = frame * HOP_LEN;
        let power = segment_power(&samples[start..start + SEGMENT_LEN]);
        for (bin, p) in power.into_iter().enumerate() {
            values[bin * TIME_FRAMES + frame] = p;
        }
    }
    Spectrogram { values }
}

pub fn log_feature(spec: &Spectrogram) -> FeatureMap {
    FeatureMap {
        values: spec
            .values
            .iter()
            .map(|&p| (p + LOG_EPSILON).ln() as f32)
            .collect(),
    }
}

/// `log_feature(spectrogram(clip))`.
pub fn log_spectrogram(clip: &AudioClip) -> FeatureMap {
    log_feature(&spectrogram(clip))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scipy_fixture_clip() -> AudioClip {
        let samples = (0..16000)
            .map(|n| {
                let t = n as f64 / 16000.0;
                let v = 8000.0 * (2.0 * std::f64::consts::PI * 440.0 * t).sin()
                    + 3000.0 * (2.0 * std::f64::consts::PI * 3100.0 * t + 0.3).sin()
                    + ((n * 7919) % 2001) as f64
                    - 1000.0;
                v.round() as i16
            })
            .collect();
        AudioClip::from_samples(samples, "scipy")
    }

    #[test]
    fn shape_constants() {
        assert_eq!(FREQ_BINS, 129);
        assert_eq!(TIME_FRAMES, 71);
    }

    #[test]
    fn window_matches_reference_toolkit() {
        // periodic ('tukey', 0.25) window, values from an independent implementation
        let w = tukey_window(256, 0.25);
        let expect = [
            (0, 0.0),
            (1, 0.002407636663901591),
            (16, 0.5),
            (31, 0.9975923633360985),
            (32, 1.0),
            (224, 1.0),
            (255, 0.002407636663901591),
        ];
        for (i, v) in expect {
            assert_relative_eq!(w[i], v, epsilon = 1e-12);
        }
        assert_relative_eq!(w.iter().sum::<f64>(), 224.0, epsilon = 1e-9);
        assert_relative_eq!(w.iter().map(|x| x * x).sum::<f64>(), 216.0, epsilon = 1e-9);
    }

    #[test]
    fn matches_reference_toolkit_values() {
        // reference = density-scaled output * fs * sum(w^2)
        let spec = spectrogram(&scipy_fixture_clip());
        let expect = [
            ((0, 0), 75545402.62228502),
            ((7, 3), 1585749886462.6604),
            ((7, 70), 1588058261824.751),
            ((50, 35), 147315717339.39285),
            ((128, 10), 2371859.915285118),
            ((99, 64), 4999154.0289804125),
        ];
        for ((b, f), v) in expect {
            assert_relative_eq!(spec.get(b, f), v, max_relative = 1e-9);
        }
        let feat = log_feature(&spec);
        assert_relative_eq!(f64::from(feat.get(7, 3)), 28.092078525861904, max_relative = 1e-6);
    }

    #[test]
    fn zero_clip_is_zero_power_and_guarded_log() {
        let spec = spectrogram(&AudioClip::silence("zero"));
        assert!(spec.values().iter().all(|&p| p == 0.0));
        let feat = log_feature(&spec);
        let floor = (1e-10f64).ln() as f32;
        assert!(feat.values().iter().all(|&v| v == floor));
        assert_relative_eq!(f64::from(floor), -23.025850929940457, epsilon = 1e-5);
    }

    #[test]
    fn log_of_one_is_zero() {
        let spec = Spectrogram::from_values(vec![1.0 - 1e-10; FREQ_BINS * TIME_FRAMES]).unwrap();
        assert!(log_feature(&spec).values().iter().all(|&v| v.abs() < 1e-7));
    }

    #[test]
    fn scaling_power_shifts_log() {
        let base: Vec<f64> = (0..FREQ_BINS * TIME_FRAMES).map(|i| 1.0 + (i % 97) as f64).collect();
        let c = 37.5;
        let a = log_feature(&Spectrogram::from_values(base.clone()).unwrap());
        let b = log_feature(&Spectrogram::from_values(base.iter().map(|v| v * c).collect()).unwrap());
        for (x, y) in a.values().iter().zip(b.values()) {
            assert_relative_eq!(f64::from(y - x), c.ln(), epsilon = 1e-5);
        }
    }

    #[test]
    fn deterministic() {
        let clip = scipy_fixture_clip();
        assert_eq!(log_spectrogram(&clip), log_spectrogram(&clip));
    }

    #[test]
    fn text_dump_has_one_row_per_bin() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.txt");
        log_spectrogram(&scipy_fixture_clip()).write_text(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows.len(), FREQ_BINS);
        assert!(rows.iter().all(|r| r.split(' ').count() == TIME_FRAMES));
    }
}
