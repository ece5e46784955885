//! Synthetic word-like utterances and a miniature corpus in the Speech
//! Commands layout, for fixtures and demos when real recordings are absent.
//!
//! Every word gets a fixed formant-glide "pronunciation" derived from a hash
//! of its spelling; a per-utterance seed varies speaker pitch, vocal tract
//! scale, onset, loudness and background noise.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::audio::{write_wav, CLIP_SAMPLES, SAMPLE_RATE_HZ};
use crate::dataset::{Example, Split, BACKGROUND_NOISE_DIR, TESTING_LIST, VALIDATION_LIST};
use crate::error::{Error, Result};

const FS: f64 = SAMPLE_RATE_HZ as f64;
const MAX_HARMONIC_HZ: f64 = 5000.0;
const FORMANT_BANDWIDTH_HZ: f64 = 140.0;

#[derive(Debug, Clone)]
struct Syllable {
    duration_s: f64,
    f1: (f64, f64),
    f2: (f64, f64),
    f3: f64,
    /// Unvoiced onset length in seconds, 0 for none.
    frication_s: f64,
    frication_hz: f64,
}

fn word_hash(word: &str) -> u64 {
    // FNV-1a
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in word.trim().to_lowercase().bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn pronunciation(word: &str) -> Vec<Syllable> {
    let mut rng = ChaCha8Rng::seed_from_u64(word_hash(word));
    let count = if rng.random::<f64>() < 0.4 { 2 } else { 1 };
    (0..count)
        .map(|_| Syllable {
            duration_s: rng.random_range(0.16..0.32),
            f1: (rng.random_range(280.0..900.0), rng.random_range(280.0..900.0)),
            f2: (rng.random_range(900.0..2600.0), rng.random_range(900.0..2600.0)),
            f3: rng.random_range(2400.0..3400.0),
            frication_s: if rng.random::<f64>() < 0.5 { rng.random_range(0.03..0.09) } else { 0.0 },
            frication_hz: rng.random_range(2500.0..6500.0),
        })
        .collect()
}

fn resonance(freq: f64, centre: f64) -> f64 {
    let d = (freq - centre) / FORMANT_BANDWIDTH_HZ;
    (-0.5 * d * d).exp()
}

/// One second of a synthetic utterance of `word` at 16 kHz.
pub fn synth_utterance(word: &str, seed: u64) -> Vec<i16> {
    let syllables = pronunciation(word);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ word_hash(word).rotate_left(17));
    let f0_base = rng.random_range(95.0..230.0);
    let tract = rng.random_range(0.9..1.12);
    let loudness = rng.random_range(5000.0..14000.0);
    let total_s: f64 = syllables.iter().map(|s| s.duration_s + s.frication_s + 0.04).sum();
    let onset_s = rng.random_range(0.05..(0.95 - total_s).max(0.06));
    let noise = Normal::new(0.0, rng.random_range(20.0..120.0)).expect("positive deviation");

    let mut out = vec![0.0f64; CLIP_SAMPLES];
    let mut t0 = onset_s;
    for syl in &syllables {
        // unvoiced burst: differenced noise pushed towards a high band
        let burst = (syl.frication_s * FS) as usize;
        let start = (t0 * FS) as usize;
        let mut prev = 0.0;
        let carrier = 2.0 * PI * syl.frication_hz * tract / FS;
        for k in 0..burst {
            let idx = start + k;
            if idx >= CLIP_SAMPLES {
                break;
            }
            let w: f64 = rng.random_range(-1.0..1.0);
            let hp = w - prev;
            prev = w;
            let env = (PI * k as f64 / burst as f64).sin();
            out[idx] += 0.35 * loudness * env * hp * (carrier * k as f64).cos();
        }
        t0 += syl.frication_s;

        let voiced = (syl.duration_s * FS) as usize;
        let start = (t0 * FS) as usize;
        let mut phase = 0.0;
        for k in 0..voiced {
            let idx = start + k;
            if idx >= CLIP_SAMPLES {
                break;
            }
            let a = k as f64 / voiced as f64;
            let f0 = f0_base * (1.0 + 0.12 * (1.0 - 2.0 * a));
            phase += 2.0 * PI * f0 / FS;
            let f1 = tract * (syl.f1.0 + (syl.f1.1 - syl.f1.0) * a);
            let f2 = tract * (syl.f2.0 + (syl.f2.1 - syl.f2.0) * a);
            let f3 = tract * syl.f3;
            let mut v = 0.0;
            let mut h = 1;
            while (h as f64) * f0 < MAX_HARMONIC_HZ {
                let f = h as f64 * f0;
                let gain = resonance(f, f1) + 0.7 * resonance(f, f2) + 0.3 * resonance(f, f3) + 0.01;
                v += gain * (h as f64 * phase).sin();
                h += 1;
            }
            let env = (PI * a).sin().powf(0.6);
            out[idx] += loudness * 0.5 * env * v;
        }
        t0 += syl.duration_s + 0.04;
    }

    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if peak > 30000.0 { 30000.0 / peak } else { 1.0 };
    out.iter()
        .map(|&v| (v * scale + noise.sample(&mut rng)).round().clamp(-32768.0, 32767.0) as i16)
        .collect()
}

/// Gaussian white noise of `seconds` length, for the background-noise folder.
pub fn synth_noise(seconds: f64, std_dev: f64, seed: u64) -> Vec<i16> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = Normal::new(0.0, std_dev).expect("positive deviation");
    let n = (seconds * FS) as usize;
    (0..n).map(|_| d.sample(&mut rng).round().clamp(-32768.0, 32767.0) as i16).collect()
}

#[derive(Debug, Clone)]
pub struct CorpusSpec {
    pub words: Vec<String>,
    pub per_word: usize,
    /// Every `val_every`-th utterance of a word goes to the validation list.
    pub val_every: usize,
    /// Every `test_every`-th (offset by one) goes to the testing list.
    pub test_every: usize,
    pub noise_seconds: f64,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            words: ["zero", "one", "two", "three", "four", "five", "on", "off", "bed", "cat", "yes", "no"]
                .map(String::from)
                .to_vec(),
            per_word: 20,
            val_every: 5,
            test_every: 5,
            noise_seconds: 5.0,
            seed: 0,
        }
    }
}

/// Writes `<root>/<word>/<speaker>_nohash_<k>.wav`, the two split lists and
/// one background-noise recording.
pub fn write_corpus(root: &Path, spec: &CorpusSpec) -> Result<()> {
    if spec.val_every < 2 || spec.test_every < 2 {
        return Err(Error::InvalidConfig("split strides must be at least 2".into()));
    }
    std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let mut val = String::new();
    let mut test = String::new();
    for (w, word) in spec.words.iter().enumerate() {
        let dir = root.join(word);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for k in 0..spec.per_word {
            let seed = spec.seed.wrapping_mul(0x9E37_79B9).wrapping_add((w * 100_003 + k) as u64);
            let name = format!("{:08x}_nohash_{k}.wav", word_hash(&format!("{word}{k}")) as u32);
            write_wav(&dir.join(&name), &synth_utterance(word, seed))?;
            let rel = format!("{word}/{name}");
            if k % spec.val_every == spec.val_every - 1 {
                let _ = writeln!(val, "{rel}");
            } else if k % spec.test_every == spec.test_every - 2 {
                let _ = writeln!(test, "{rel}");
            }
        }
    }
    let write = |name: &str, text: &str| {
        let p = root.join(name);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
    };
    write(VALIDATION_LIST, &val)?;
    write(TESTING_LIST, &test)?;
    if spec.noise_seconds > 0.0 {
        let dir = root.join(BACKGROUND_NOISE_DIR);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_wav(&dir.join("white_noise.wav"), &synth_noise(spec.noise_seconds, 2000.0, spec.seed))?;
    }
    Ok(())
}

/// Writes one utterance per word as `<root>/<word>/synth_nohash_0.wav` and
/// returns them as training examples, in `words` order.
pub fn write_word_set(root: &Path, words: &[&str], seed: u64) -> Result<Vec<Example>> {
    words
        .iter()
        .map(|word| {
            let dir = root.join(word);
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let path = dir.join("synth_nohash_0.wav");
            write_wav(&path, &synth_utterance(word, seed))?;
            Ok(Example {
                path,
                relative: format!("{word}/synth_nohash_0.wav"),
                word: word.to_string(),
                split: Split::Train,
            })
        })
        .collect()
}
