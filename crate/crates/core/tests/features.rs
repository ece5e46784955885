use std::f64::consts::PI;

use proptest::prelude::*;
use speech2traj::audio::{AudioClip, CLIP_SAMPLES};
use speech2traj::features::{
    log_spectrogram, segment_power, spectrogram, windowed_segment, FREQ_BINS, HOP_LEN, LOG_EPSILON, SEGMENT_LEN,
    TIME_FRAMES,
};

fn tone(freq: f64, amp: f64) -> AudioClip {
    let s = (0..CLIP_SAMPLES)
        .map(|n| (amp * (2.0 * PI * freq * n as f64 / 16_000.0).sin()).round() as i16)
        .collect();
    AudioClip::from_samples(s, "tone")
}

// Textbook periodic Tukey: taper of width alpha*N/2 cosine lobes on an N-point grid.
fn reference_window(n: usize, alpha: f64) -> Vec<f64> {
    let big_n = n as f64;
    (0..n)
        .map(|i| {
            let x = i as f64 / big_n;
            if x < alpha / 2.0 {
                0.5 * (1.0 - (2.0 * PI * x / alpha).cos())
            } else if x <= 1.0 - alpha / 2.0 {
                1.0
            } else {
                0.5 * (1.0 - (2.0 * PI * (1.0 - x) / alpha).cos())
            }
        })
        .collect()
}

fn direct_dft_power(segment: &[f64]) -> Vec<f64> {
    let mean = segment.iter().sum::<f64>() / segment.len() as f64;
    let w = reference_window(SEGMENT_LEN, 0.25);
    let x: Vec<f64> = segment.iter().zip(&w).map(|(s, w)| (s - mean) * w).collect();
    (0..FREQ_BINS)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (n, v) in x.iter().enumerate() {
                let a = -2.0 * PI * (k * n) as f64 / SEGMENT_LEN as f64;
                re += v * a.cos();
                im += v * a.sin();
            }
            let p = re * re + im * im;
            if k == 0 || k == FREQ_BINS - 1 {
                p
            } else {
                2.0 * p
            }
        })
        .collect()
}

#[test]
fn full_scale_1khz_peaks_in_bin_16() {
    let spec = spectrogram(&tone(1000.0, 32767.0));
    assert_eq!(spec.shape(), (FREQ_BINS, TIME_FRAMES));
    for frame in 0..TIME_FRAMES {
        let col = spec.frame(frame);
        let argmax = (0..FREQ_BINS).max_by(|&a, &b| col[a].total_cmp(&col[b])).unwrap();
        assert_eq!(argmax, 16, "frame {frame}");
    }
}

#[test]
fn matches_direct_dft_oracle() {
    let clip = AudioClip::from_samples(
        (0..CLIP_SAMPLES).map(|n| (((n * 2654435761) >> 7) % 20001) as i16 - 10000).collect(),
        "hash",
    );
    let spec = spectrogram(&clip);
    let samples: Vec<f64> = clip.samples().iter().map(|&s| f64::from(s)).collect();
    for frame in [0, 1, 35, TIME_FRAMES - 1] {
        let start = frame * HOP_LEN;
        let oracle = direct_dft_power(&samples[start..start + SEGMENT_LEN]);
        let ours = spec.frame(frame);
        for (k, (a, b)) in ours.iter().zip(&oracle).enumerate() {
            assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0), "frame {frame} bin {k}: {a} vs {b}");
        }
    }
}

#[test]
fn power_obeys_parseval() {
    let seg: Vec<f64> = (0..SEGMENT_LEN).map(|n| ((n * 37) % 101) as f64 - 50.0 + (n as f64 * 0.3).sin() * 900.0).collect();
    let total: f64 = segment_power(&seg).iter().sum();
    let energy: f64 = windowed_segment(&seg).iter().map(|v| v * v).sum();
    assert!((total / SEGMENT_LEN as f64 - energy).abs() < 1e-9 * energy);
}

#[test]
fn silence_sits_at_the_log_floor() {
    let f = log_spectrogram(&AudioClip::silence("zero"));
    let floor = LOG_EPSILON.ln() as f32;
    assert!(f.values().iter().all(|&v| v == floor));
}

#[test]
fn dc_offset_is_removed_per_segment() {
    let a = spectrogram(&tone(700.0, 5000.0));
    let shifted: Vec<i16> = tone(700.0, 5000.0).samples().iter().map(|&s| s + 3000).collect();
    let b = spectrogram(&AudioClip::from_samples(shifted, "shift"));
    for (x, y) in a.values().iter().zip(b.values()) {
        assert!((x - y).abs() <= 1e-6 * x.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn features_are_finite_and_shaped(samples in prop::collection::vec(any::<i16>(), 0..20000)) {
        let f = log_spectrogram(&AudioClip::from_samples(samples, "p"));
        prop_assert_eq!(f.shape(), (FREQ_BINS, TIME_FRAMES));
        prop_assert!(f.values().iter().all(|v| v.is_finite() && *v >= LOG_EPSILON.ln() as f32));
    }
}
