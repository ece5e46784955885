//! WAV decoding and the one-second sample window used by every consumer.

use std::path::Path;

use crate::error::{Error, Result};

/// Samples per clip: one second at 16 kHz.
pub const CLIP_SAMPLES: usize = 16_000;
pub const SAMPLE_RATE_HZ: u32 = 16_000;

const WAVE_FORMAT_PCM: u16 = 1;

/// One second of mono 16 kHz signed 16-bit audio.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AudioClip {
    samples: Vec<i16>,
    source_id: String,
}

impl AudioClip {
    /// Builds a clip, zero-padding or truncating at the end to exactly 16000 samples.
    pub fn from_samples(mut samples: Vec<i16>, source_id: impl Into<String>) -> Self {
        samples.resize(CLIP_SAMPLES, 0);
        Self {
            samples,
            source_id: source_id.into(),
        }
    }

    pub fn silence(source_id: impl Into<String>) -> Self {
        Self::from_samples(Vec::new(), source_id)
    }

    pub fn samples(&self) -> &[i16] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        SAMPLE_RATE_HZ
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }
}

#[derive(Debug, Clone, Copy)]
struct FmtChunk {
    format_code: u16,
    channels: u16,
    sample_rate: u32,
    bits_per_sample: u16,
}

fn le_u16(b: &[u8]) -> u16 {
    u16::from_le_bytes([b[0], b[1]])
}

fn le_u32(b: &[u8]) -> u32 {
    u32::from_le_bytes([b[0], b[1], b[2], b[3]])
}

/// Decodes a RIFF/WAVE PCM byte stream into a clip.
///
/// Only 16-bit mono 16 kHz PCM is accepted; unknown chunks are skipped. A
/// `data` chunk whose declared size runs past the end of the buffer is read up
/// to the last complete sample.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip> {
    decode_wav_named(bytes, "<memory>")
}

pub fn decode_wav_named(bytes: &[u8], source_id: &str) -> Result<AudioClip> {
    let samples = decode_wav_samples(bytes)?;
    Ok(AudioClip::from_samples(samples, source_id))
}

/// Decodes every sample of a PCM WAV without fitting it to one clip length.
/// Used for long recordings such as background noise.
pub fn decode_wav_samples(bytes: &[u8]) -> Result<Vec<i16>> {
    if bytes.len() < 12 {
        return Err(Error::MalformedContainer(format!(
            "{} bytes is too short for a RIFF header",
            bytes.len()
        )));
    }
    if &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::MalformedContainer(
            "missing RIFF/WAVE signature".into(),
        ));
    }

    let mut fmt: Option<FmtChunk> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = le_u32(&bytes[pos + 4..pos + 8]) as usize;
        let body_start = pos + 8;
        let body_end = body_start.saturating_add(size).min(bytes.len());
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(Error::MalformedContainer(format!(
                        "fmt chunk is {} bytes, need 16",
                        body.len()
                    )));
                }
                fmt = Some(FmtChunk {
                    format_code: le_u16(&body[0..2]),
                    channels: le_u16(&body[2..4]),
                    sample_rate: le_u32(&body[4..8]),
                    bits_per_sample: le_u16(&body[14..16]),
                });
            }
            b"data" => {
                data = Some(body);
                if fmt.is_some() {
                    break;
                }
            }
            _ => {}
        }
        // chunks are word aligned
        pos = body_start.saturating_add(size).saturating_add(size & 1);
    }

    let fmt = fmt.ok_or_else(|| Error::MalformedContainer("no fmt chunk".into()))?;
    if fmt.format_code != WAVE_FORMAT_PCM
        || fmt.channels != 1
        || fmt.sample_rate != SAMPLE_RATE_HZ
        || fmt.bits_per_sample != 16
    {
        return Err(Error::UnsupportedFormat {
            format_code: fmt.format_code,
            channels: fmt.channels,
            sample_rate: fmt.sample_rate,
            bits_per_sample: fmt.bits_per_sample,
        });
    }
    let data = data.ok_or_else(|| Error::MalformedContainer("no data chunk".into()))?;

    Ok(data
        .chunks_exact(2)
        .map(|b| i16::from_le_bytes([b[0], b[1]]))
        .collect())
}

pub fn read_wav(path: &Path) -> Result<AudioClip> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_wav_named(&bytes, &path.display().to_string()).map_err(|e| e.at(path))
}

pub fn read_wav_samples(path: &Path) -> Result<Vec<i16>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_wav_samples(&bytes).map_err(|e| e.at(path))
}

/// Encodes samples as a canonical 44-byte-header PCM WAV (mono, 16 kHz, 16-bit).
pub fn encode_wav(samples: &[i16]) -> Vec<u8> {
    let data_len = (samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&WAVE_FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&SAMPLE_RATE_HZ.to_le_bytes());
    out.extend_from_slice(&(SAMPLE_RATE_HZ * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for s in samples {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

pub fn write_wav(path: &Path, samples: &[i16]) -> Result<()> {
    std::fs::write(path, encode_wav(samples)).map_err(|e| Error::io(path, e))
}

/// Fixed one-second circular history of the most recent samples.
///
/// Single writer; readers take a copy with [`RingBuffer::snapshot`].
#[derive(Debug, Clone)]
pub struct RingBuffer {
    data: Vec<i16>,
    write_cursor: usize,
}

impl Default for RingBuffer {
    fn default() -> Self {
        Self::new()
    }
}

impl RingBuffer {
    pub fn new() -> Self {
        Self {
            data: vec![0; CLIP_SAMPLES],
            write_cursor: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.data.len()
    }

    pub fn push(&mut self, chunk: &[i16]) {
        let cap = self.data.len();
        // only the tail of an oversized chunk can survive
        let chunk = &chunk[chunk.len().saturating_sub(cap)..];
        let first = chunk.len().min(cap - self.write_cursor);
        self.data[self.write_cursor..self.write_cursor + first].copy_from_slice(&chunk[..first]);
        let rest = &chunk[first..];
        self.data[..rest.len()].copy_from_slice(rest);
        self.write_cursor = (self.write_cursor + chunk.len()) % cap;
    }

    /// The last 16000 samples in chronological order.
    pub fn snapshot(&self) -> Vec<i16> {
        let mut out = Vec::with_capacity(self.data.len());
        out.extend_from_slice(&self.data[self.write_cursor..]);
        out.extend_from_slice(&self.data[..self.write_cursor]);
        out
    }

    pub fn snapshot_clip(&self, source_id: impl Into<String>) -> AudioClip {
        AudioClip::from_samples(self.snapshot(), source_id)
    }

    pub fn reset(&mut self) {
        self.data.fill(0);
        self.write_cursor = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Hand-rolled writer kept separate from `encode_wav`.
    fn oracle_wav(format: u16, channels: u16, rate: u32, bits: u16, payload: &[u8]) -> Vec<u8> {
        let mut v = Vec::new();
        v.extend(b"RIFF");
        v.extend(((4 + 8 + 16 + 8 + 8 + 4 + payload.len()) as u32).to_le_bytes());
        v.extend(b"WAVE");
        // an unknown chunk first, odd-sized to exercise the pad byte
        v.extend(b"LIST");
        v.extend(3u32.to_le_bytes());
        v.extend([1u8, 2, 3, 0]);
        v.extend(b"fmt ");
        v.extend(16u32.to_le_bytes());
        v.extend(format.to_le_bytes());
        v.extend(channels.to_le_bytes());
        v.extend(rate.to_le_bytes());
        v.extend((rate * u32::from(channels) * u32::from(bits) / 8).to_le_bytes());
        v.extend((channels * bits / 8).to_le_bytes());
        v.extend(bits.to_le_bytes());
        v.extend(b"data");
        v.extend((payload.len() as u32).to_le_bytes());
        v.extend(payload);
        v
    }

    fn pcm_payload(samples: &[i16]) -> Vec<u8> {
        samples.iter().flat_map(|s| s.to_le_bytes()).collect()
    }

    #[test]
    fn full_second_is_identity() {
        let samples: Vec<i16> = (0..16000).map(|i| ((i * 37) % 65536 - 32768) as i16).collect();
        let clip = decode_wav(&oracle_wav(1, 1, 16000, 16, &pcm_payload(&samples))).unwrap();
        assert_eq!(clip.samples(), &samples[..]);
        assert_eq!(clip.sample_rate_hz(), 16000);
    }

    #[test]
    fn half_second_is_zero_padded_at_end() {
        let samples: Vec<i16> = (0..8000).map(|i| (i % 200) as i16 - 100).collect();
        let clip = decode_wav(&oracle_wav(1, 1, 16000, 16, &pcm_payload(&samples))).unwrap();
        assert_eq!(clip.samples().len(), 16000);
        assert_eq!(&clip.samples()[..8000], &samples[..]);
        assert!(clip.samples()[8000..].iter().all(|&s| s == 0));
    }

    #[test]
    fn long_clip_is_truncated() {
        let samples: Vec<i16> = (0..20000).map(|i| (i % 1000) as i16).collect();
        let clip = decode_wav(&oracle_wav(1, 1, 16000, 16, &pcm_payload(&samples))).unwrap();
        assert_eq!(clip.samples(), &samples[..16000]);
    }

    #[test]
    fn eight_bit_is_unsupported() {
        let err = decode_wav(&oracle_wav(1, 1, 16000, 8, &[128; 100])).unwrap_err();
        match err {
            Error::UnsupportedFormat {
                bits_per_sample, ..
            } => assert_eq!(bits_per_sample, 8),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_rate_channels_and_format_are_unsupported() {
        assert!(matches!(
            decode_wav(&oracle_wav(1, 1, 44100, 16, &[0; 8])),
            Err(Error::UnsupportedFormat { sample_rate: 44100, .. })
        ));
        assert!(matches!(
            decode_wav(&oracle_wav(1, 2, 16000, 16, &[0; 8])),
            Err(Error::UnsupportedFormat { channels: 2, .. })
        ));
        assert!(matches!(
            decode_wav(&oracle_wav(3, 1, 16000, 16, &[0; 8])),
            Err(Error::UnsupportedFormat { format_code: 3, .. })
        ));
    }

    #[test]
    fn bad_header_is_malformed() {
        assert!(matches!(decode_wav(b"RIFX"), Err(Error::MalformedContainer(_))));
        let mut bytes = encode_wav(&[1, 2, 3]);
        bytes[8..12].copy_from_slice(b"AVI ");
        assert!(matches!(decode_wav(&bytes), Err(Error::MalformedContainer(_))));
        // RIFF header with no chunks at all
        let mut bare = b"RIFF".to_vec();
        bare.extend(4u32.to_le_bytes());
        bare.extend(b"WAVE");
        assert!(matches!(decode_wav(&bare), Err(Error::MalformedContainer(_))));
    }

    #[test]
    fn encode_then_decode() {
        let samples: Vec<i16> = (0..16000).map(|i| (i as i16).wrapping_mul(7)).collect();
        assert_eq!(decode_wav(&encode_wav(&samples)).unwrap().samples(), &samples[..]);
    }

    fn oracle_window(chunks: &[Vec<i16>]) -> Vec<i16> {
        let mut all = vec![0i16; CLIP_SAMPLES];
        for c in chunks {
            all.extend_from_slice(c);
        }
        all[all.len() - CLIP_SAMPLES..].to_vec()
    }

    #[test]
    fn ring_examples() {
        let mut ring = RingBuffer::new();
        assert!(ring.snapshot().iter().all(|&s| s == 0));

        let chunk: Vec<i16> = (0..16000).map(|i| i as i16).collect();
        ring.push(&chunk);
        assert_eq!(ring.snapshot(), chunk);

        let mut ring = RingBuffer::new();
        let chunk: Vec<i16> = (0..20000).map(|i| (i % 30000) as i16).collect();
        ring.push(&chunk);
        assert_eq!(ring.snapshot(), oracle_window(&[chunk]));

        let mut ring = RingBuffer::new();
        let chunk: Vec<i16> = (1..=4000).map(|i| i as i16).collect();
        ring.push(&chunk);
        let snap = ring.snapshot();
        assert!(snap[..12000].iter().all(|&s| s == 0));
        assert_eq!(&snap[12000..], &chunk[..]);
    }

    proptest! {
        #[test]
        fn ring_matches_concatenate_and_slice(
            chunks in prop::collection::vec(prop::collection::vec(any::<i16>(), 0..9000), 0..8)
        ) {
            let mut ring = RingBuffer::new();
            for c in &chunks {
                ring.push(c);
            }
            prop_assert_eq!(ring.snapshot(), oracle_window(&chunks));
        }

        #[test]
        fn decode_always_yields_one_second(n in 0usize..24000) {
            let samples = vec![5i16; n];
            let clip = decode_wav(&encode_wav(&samples)).unwrap();
            prop_assert_eq!(clip.samples().len(), CLIP_SAMPLES);
        }
    }
}
