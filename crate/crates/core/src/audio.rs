//! PCM WAV decoding/encoding and the [`AudioClip`] sample container.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const FORMAT_PCM: u16 = 1;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Mono audio with amplitudes in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate_hz: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::InvalidClip("sample rate must be positive".into()));
        }
        if let Some((i, s)) = samples
            .iter()
            .enumerate()
            .find(|(_, s)| !(-1.0..=1.0).contains(*s))
        {
            return Err(Error::InvalidClip(format!(
                "sample {i} = {s} lies outside [-1, 1]"
            )));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    /// Multiplies every sample by `gain`, rejecting results outside `[-1, 1]`.
    pub fn scaled(&self, gain: f64) -> Result<Self> {
        Self::new(
            self.samples.iter().map(|s| s * gain).collect(),
            self.sample_rate_hz,
        )
    }
}

/// Divides every sample by the clip's peak magnitude. Silent clips are
/// returned unchanged.
pub fn peak_normalize(clip: &AudioClip) -> AudioClip {
    let peak = clip.samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if peak == 0.0 {
        return clip.clone();
    }
    AudioClip {
        samples: clip.samples.iter().map(|s| s / peak).collect(),
        sample_rate_hz: clip.sample_rate_hz,
    }
}

struct Format {
    channels: u16,
    sample_rate: u32,
    bits: u16,
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

fn parse_fmt(body: &[u8]) -> Result<Format> {
    if body.len() < 16 {
        return Err(Error::Truncated("fmt chunk shorter than 16 bytes".into()));
    }
    let mut code = u16_at(body, 0);
    let channels = u16_at(body, 2);
    let sample_rate = u32_at(body, 4);
    let bits = u16_at(body, 14);
    if code == FORMAT_EXTENSIBLE {
        // cbSize(2) validBits(2) channelMask(4) then the subformat GUID,
        // whose first two bytes carry the plain format code.
        if body.len() < 26 {
            return Err(Error::Truncated("extensible fmt chunk too short".into()));
        }
        code = u16_at(body, 24);
    }
    if code != FORMAT_PCM {
        return Err(Error::UnsupportedEncoding(format!(
            "format code {code} (only PCM is supported)"
        )));
    }
    if bits != 8 && bits != 16 {
        return Err(Error::UnsupportedEncoding(format!(
            "{bits}-bit samples (only 8- and 16-bit are supported)"
        )));
    }
    if channels != 1 && channels != 2 {
        return Err(Error::UnsupportedEncoding(format!(
            "{channels} channels (only mono and stereo are supported)"
        )));
    }
    if sample_rate == 0 {
        return Err(Error::UnsupportedEncoding("sample rate of 0 Hz".into()));
    }
    Ok(Format {
        channels,
        sample_rate,
        bits,
    })
}

/// Decodes an in-memory RIFF/WAVE PCM image.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::NotWav("missing RIFF/WAVE magic".into()));
    }
    let mut pos = 12;
    let mut format: Option<Format> = None;
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let start = pos + 8;
        let end = start.saturating_add(size);
        match id {
            b"fmt " => {
                if end > bytes.len() {
                    return Err(Error::Truncated("fmt chunk runs past end of file".into()));
                }
                format = Some(parse_fmt(&bytes[start..end])?);
            }
            b"data" => {
                if end > bytes.len() {
                    return Err(Error::Truncated(format!(
                        "data chunk declares {size} bytes but only {} remain",
                        bytes.len() - start
                    )));
                }
                data = Some(&bytes[start..end]);
                break;
            }
            _ => {}
        }
        // Chunks are word aligned.
        pos = end.saturating_add(size & 1);
    }
    let format = format.ok_or_else(|| Error::NotWav("no fmt chunk before data".into()))?;
    let data = data.ok_or_else(|| Error::NotWav("no data chunk".into()))?;

    let channels = format.channels as usize;
    let width = (format.bits / 8) as usize;
    let frame_bytes = width * channels;
    let samples = data
        .chunks_exact(frame_bytes)
        .map(|frame| {
            let sum: f64 = frame
                .chunks_exact(width)
                .map(|s| match width {
                    1 => (s[0] as f64 - 128.0) / 128.0,
                    _ => i16::from_le_bytes([s[0], s[1]]) as f64 / 32768.0,
                })
                .sum();
            sum / channels as f64
        })
        .collect();
    AudioClip::new(samples, format.sample_rate)
}

/// Reads a PCM WAV file (8/16-bit, mono or stereo) into a mono clip.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    decode_wav(&fs::read(path)?)
}

/// Quantizes one amplitude to a 16-bit PCM value.
pub fn quantize_sample(s: f64) -> i16 {
    (s * 32767.0).round().clamp(-32768.0, 32767.0) as i16
}

/// Encodes a clip as a mono 16-bit PCM RIFF/WAVE image.
pub fn encode_wav(clip: &AudioClip) -> Vec<u8> {
    let data_len = (clip.samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate_hz * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in &clip.samples {
        out.extend_from_slice(&quantize_sample(s).to_le_bytes());
    }
    out
}

pub fn write_wav(clip: &AudioClip, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_wav(clip))?;
    Ok(())
}
