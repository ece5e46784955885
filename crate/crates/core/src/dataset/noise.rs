use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio::{AudioClip, CLIP_SAMPLES};
use crate::error::{Error, Result};

pub fn mean_power(x: impl Iterator<Item = f64>) -> f64 {
    let mut n = 0usize;
    let mut acc = 0.0;
    for v in x {
        acc += v * v;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        acc / n as f64
    }
}

/// Picks the seeded one-second window of `noise` that [`mix_noise`] uses.
pub fn noise_crop(noise: &[i16], seed: u64) -> Result<&[i16]> {
    if noise.len() < CLIP_SAMPLES {
        return Err(Error::NoiseTooShort(noise.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = rng.random_range(0..=noise.len() - CLIP_SAMPLES);
    Ok(&noise[start..start + CLIP_SAMPLES])
}

/// Gain `g` with `P(clip) / P(g * crop) = 10^(snr_db / 10)`; `None` for a silent crop.
pub fn noise_gain(clip: &AudioClip, crop: &[i16], snr_db: f64) -> Result<Option<f64>> {
    let signal_power = mean_power(clip.samples().iter().map(|&s| f64::from(s)));
    if signal_power == 0.0 {
        return Err(Error::ZeroSignalPower);
    }
    let noise_power = mean_power(crop.iter().map(|&s| f64::from(s)));
    if noise_power == 0.0 {
        return Ok(None);
    }
    Ok(Some((signal_power / (noise_power * 10f64.powf(snr_db / 10.0))).sqrt()))
}

/// Adds a random one-second crop of `noise`, scaled so that the clip-to-noise
/// power ratio is `snr_db`, and saturates to the 16-bit range.
///
/// `snr_db = +inf` returns the clip unchanged. A silent noise crop adds nothing.
pub fn mix_noise(clip: &AudioClip, noise: &[i16], snr_db: f64, seed: u64) -> Result<AudioClip> {
    if snr_db == f64::INFINITY {
        return Ok(clip.clone());
    }
    let crop = noise_crop(noise, seed)?;
    let Some(gain) = noise_gain(clip, crop, snr_db)? else {
        return Ok(clip.clone());
    };
    let samples = clip
        .samples()
        .iter()
        .zip(crop)
        .map(|(&s, &n)| {
            (f64::from(s) + gain * f64::from(n))
                .round()
                .clamp(f64::from(i16::MIN), f64::from(i16::MAX)) as i16
        })
        .collect();
    Ok(AudioClip::from_samples(samples, clip.source_id()))
}

/// Power ratio in dB between `clip` and the difference `mixed - clip`.
pub fn measured_snr_db(clip: &AudioClip, mixed: &AudioClip) -> f64 {
    let ps = mean_power(clip.samples().iter().map(|&s| f64::from(s)));
    let pn = mean_power(
        mixed
            .samples()
            .iter()
            .zip(clip.samples())
            .map(|(&m, &s)| f64::from(m) - f64::from(s)),
    );
    10.0 * (ps / pn).log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn sine(amplitude: f64) -> AudioClip {
        let s = (0..CLIP_SAMPLES)
            .map(|n| (amplitude * (2.0 * std::f64::consts::PI * 440.0 * n as f64 / 16_000.0).sin()).round() as i16)
            .collect();
        AudioClip::from_samples(s, "sine")
    }

    fn white(len: usize, seed: u64) -> Vec<i16> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(0.0f64, 3000.0).unwrap();
        (0..len).map(|_| d.sample(&mut rng).round().clamp(-32768.0, 32767.0) as i16).collect()
    }

    #[test]
    fn infinite_snr_is_identity() {
        let c = sine(1000.0);
        assert_eq!(mix_noise(&c, &[], f64::INFINITY, 0).unwrap(), c);
    }

    #[test]
    fn contract_errors() {
        assert!(matches!(
            mix_noise(&AudioClip::silence("s"), &white(20_000, 1), 10.0, 0),
            Err(Error::ZeroSignalPower)
        ));
        assert!(matches!(
            mix_noise(&sine(1000.0), &white(100, 1), 10.0, 0),
            Err(Error::NoiseTooShort(100))
        ));
    }

    #[test]
    fn ten_db_on_a_half_scale_sine() {
        let clip = sine(16_000.0);
        let mixed = mix_noise(&clip, &white(48_000, 2), 10.0, 3).unwrap();
        let snr = measured_snr_db(&clip, &mixed);
        assert!((snr - 10.0).abs() < 0.1, "{snr}");
    }

    #[test]
    fn crop_choice_is_seeded() {
        let clip = sine(8000.0);
        let noise = white(40_000, 4);
        assert_eq!(mix_noise(&clip, &noise, 5.0, 9).unwrap(), mix_noise(&clip, &noise, 5.0, 9).unwrap());
    }
}
