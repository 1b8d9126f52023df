//! Minimal RIFF/WAVE reader and writer for 16-bit PCM.

use std::fs;
use std::path::Path;

use super::AudioSignal;
use crate::error::{Error, Result};

const FORMAT_PCM: u16 = 1;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

struct FmtChunk {
    format: u16,
    channels: u16,
    sample_rate: u32,
    bits_per_sample: u16,
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Reads a PCM WAV file. Multi-channel content is averaged down to mono and
/// samples are scaled by 1/32768.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioSignal> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    decode(&bytes).map_err(|e| match e {
        Error::Format { reason, .. } => Error::format(path, reason),
        other => other,
    })
}

fn decode(bytes: &[u8]) -> Result<AudioSignal> {
    let bad = |reason: &str| Error::format("<memory>", reason);
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(bad("missing RIFF/WAVE header"));
    }
    let mut fmt: Option<FmtChunk> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(size)
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| bad("chunk runs past end of file"))?;
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(bad("fmt chunk too short"));
                }
                let mut format = u16_at(body, 0);
                if format == FORMAT_EXTENSIBLE && body.len() >= 26 {
                    format = u16_at(body, 24);
                }
                fmt = Some(FmtChunk {
                    format,
                    channels: u16_at(body, 2),
                    sample_rate: u32_at(body, 4),
                    bits_per_sample: u16_at(body, 14),
                });
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // chunks are word aligned
        pos = body_end + (size & 1);
    }
    let fmt = fmt.ok_or_else(|| bad("no fmt chunk"))?;
    let data = data.ok_or_else(|| bad("no data chunk"))?;
    if fmt.format != FORMAT_PCM {
        return Err(Error::Unsupported(format!("WAV encoding tag {}", fmt.format)));
    }
    if fmt.bits_per_sample != 16 {
        return Err(Error::Unsupported(format!(
            "{}-bit PCM (only 16-bit is supported)",
            fmt.bits_per_sample
        )));
    }
    if fmt.channels == 0 || fmt.sample_rate == 0 {
        return Err(bad("zero channels or zero sample rate"));
    }
    let channels = fmt.channels as usize;
    let frame_bytes = 2 * channels;
    let frames = data.len() / frame_bytes;
    let mut samples = Vec::with_capacity(frames);
    for frame in data.chunks_exact(frame_bytes) {
        let sum: f64 = frame
            .chunks_exact(2)
            .map(|s| i16::from_le_bytes([s[0], s[1]]) as f64 / 32768.0)
            .sum();
        samples.push(sum / channels as f64);
    }
    AudioSignal::new(samples, fmt.sample_rate)
}

/// Writes a mono 16-bit PCM WAV. Samples are rounded to the nearest code and
/// clipped to the 16-bit range.
pub fn write_wav(path: impl AsRef<Path>, signal: &AudioSignal) -> Result<()> {
    fs::write(path, encode(signal))?;
    Ok(())
}

fn encode(signal: &AudioSignal) -> Vec<u8> {
    let data_len = signal.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&signal.sample_rate().to_le_bytes());
    out.extend_from_slice(&(signal.sample_rate() * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in signal.samples() {
        let code = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&code.to_le_bytes());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pcm_file(channels: u16, rate: u32, codes: &[i16]) -> Vec<u8> {
        let data_len = codes.len() * 2;
        let mut out = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
        out.extend_from_slice(b"WAVE");
        out.extend_from_slice(b"fmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&channels.to_le_bytes());
        out.extend_from_slice(&rate.to_le_bytes());
        out.extend_from_slice(&(rate * 2 * channels as u32).to_le_bytes());
        out.extend_from_slice(&(2 * channels).to_le_bytes());
        out.extend_from_slice(&16u16.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&(data_len as u32).to_le_bytes());
        for c in codes {
            out.extend_from_slice(&c.to_le_bytes());
        }
        out
    }

    #[test]
    fn constant_zero_file_reads_as_silence() {
        let sig = decode(&pcm_file(1, 16_000, &[0; 64])).unwrap();
        assert_eq!(sig.len(), 64);
        assert!(sig.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn full_scale_code_maps_below_one() {
        let sig = decode(&pcm_file(1, 16_000, &[32767, -32768])).unwrap();
        assert_eq!(sig.samples()[0], 32767.0 / 32768.0);
        assert!((sig.samples()[0] - 0.99997).abs() < 1e-5);
        assert_eq!(sig.samples()[1], -1.0);
    }

    #[test]
    fn stereo_is_averaged() {
        let sig = decode(&pcm_file(2, 8_000, &[1000, 3000, -200, 200])).unwrap();
        assert_eq!(sig.sample_rate(), 8_000);
        assert_eq!(sig.samples(), &[2000.0 / 32768.0, 0.0]);
    }

    #[test]
    fn malformed_header_is_a_format_error() {
        assert!(matches!(decode(b"RIFX0000WAVE"), Err(Error::Format { .. })));
        let mut truncated = pcm_file(1, 16_000, &[1, 2, 3]);
        truncated.truncate(47);
        assert!(matches!(decode(&truncated), Err(Error::Format { .. })));
    }

    #[test]
    fn non_pcm_is_unsupported() {
        let mut float = pcm_file(1, 16_000, &[0; 4]);
        float[20] = 3; // IEEE float tag
        assert!(matches!(decode(&float), Err(Error::Unsupported(_))));
        let mut eight_bit = pcm_file(1, 16_000, &[0; 4]);
        eight_bit[34] = 8;
        assert!(matches!(decode(&eight_bit), Err(Error::Unsupported(_))));
    }

    #[test]
    fn encode_decode_is_bit_exact() {
        let codes: Vec<i16> = (0..2000).map(|i| ((i * 7919) % 65536 - 32768) as i16).collect();
        let sig = decode(&pcm_file(1, 16_000, &codes)).unwrap();
        let again = decode(&encode(&sig)).unwrap();
        assert_eq!(sig, again);
        assert_eq!(encode(&sig), pcm_file(1, 16_000, &codes));
    }
}
