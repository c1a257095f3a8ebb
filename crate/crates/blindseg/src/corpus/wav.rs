//! Minimal RIFF/WAVE codec for the one format the toolkit accepts:
//! PCM 16-bit, mono, 16 kHz. Anything else is rejected explicitly; no
//! silent conversion or resampling ever happens.

use std::fs;
use std::path::Path;

use crate::corpus::Waveform;
use crate::error::{Error, Result};

const EXPECTED_SAMPLE_RATE: u32 = 16000;
/// Integer PCM scale: sample `i` maps to `i / 32768`, so the full i16 range
/// covers [−1.0, 1.0).
const PCM_SCALE: f32 = 32768.0;

fn wav_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Wav {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

fn read_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn read_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Decode a PCM16 mono 16 kHz WAV file. Integer samples are divided by 32768.
pub fn load_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(wav_err(path, "not a RIFF/WAVE file"));
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None; // (format, channels, rate, bits)
    let mut data: Option<&[u8]> = None;
    let mut at = 12usize;
    while at + 8 <= bytes.len() {
        let id = &bytes[at..at + 4];
        let size = read_u32(&bytes, at + 4) as usize;
        let body_start = at + 8;
        if body_start + size > bytes.len() {
            return Err(wav_err(path, "truncated chunk"));
        }
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(wav_err(path, "fmt chunk too small"));
                }
                fmt = Some((
                    read_u16(&bytes, body_start),
                    read_u16(&bytes, body_start + 2),
                    read_u32(&bytes, body_start + 4),
                    read_u16(&bytes, body_start + 14),
                ));
            }
            b"data" => data = Some(&bytes[body_start..body_start + size]),
            _ => {} // skip LIST/INFO and friends
        }
        // chunks are word-aligned
        at = body_start + size + (size & 1);
    }

    let (format, channels, rate, bits) = fmt.ok_or_else(|| wav_err(path, "missing fmt chunk"))?;
    if format != 1 || bits != 16 {
        return Err(wav_err(
            path,
            format!("only PCM 16-bit is supported (format tag {format}, {bits} bits)"),
        ));
    }
    if channels != 1 {
        return Err(wav_err(
            path,
            format!("only mono is supported, file has {channels} channels"),
        ));
    }
    if rate != EXPECTED_SAMPLE_RATE {
        return Err(Error::SampleRate {
            got: rate,
            expected: EXPECTED_SAMPLE_RATE,
        });
    }
    let data = data.ok_or_else(|| wav_err(path, "missing data chunk"))?;
    if data.len() % 2 != 0 {
        return Err(wav_err(path, "odd data chunk length for 16-bit PCM"));
    }
    let samples = data
        .chunks_exact(2)
        .map(|c| f32::from(i16::from_le_bytes([c[0], c[1]])) / PCM_SCALE)
        .collect();
    Ok(Waveform {
        samples,
        sample_rate: rate,
    })
}

/// Write a PCM16 mono WAV file. Samples are quantized with
/// `round(x · 32768)` clamped to the i16 range, the exact inverse of
/// [`load_wav`] scaling on PCM-sourced data.
pub fn save_wav(path: impl AsRef<Path>, w: &Waveform) -> Result<()> {
    let path = path.as_ref();
    let n = w.samples.len();
    let data_len = (n * 2) as u32;
    let mut out = Vec::with_capacity(44 + n * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&w.sample_rate.to_le_bytes());
    out.extend_from_slice(&(w.sample_rate * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes()); // bits per sample
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in &w.samples {
        let q = (f64::from(s) * f64::from(PCM_SCALE)).round();
        let q = q.clamp(f64::from(i16::MIN), f64::from(i16::MAX)) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmpfile(name: &str) -> std::path::PathBuf {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(name);
        std::mem::forget(dir); // keep alive for the test process
        p
    }

    #[test]
    fn all_zero_file_round_trips() {
        let p = tmpfile("zeros.wav");
        let w = Waveform {
            samples: vec![0.0; 16000],
            sample_rate: 16000,
        };
        save_wav(&p, &w).unwrap();
        let r = load_wav(&p).unwrap();
        assert_eq!(r.sample_rate, 16000);
        assert_eq!(r.samples.len(), 16000);
        assert!(r.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn fixed_scaling_rule() {
        let p = tmpfile("scale.wav");
        let w = Waveform {
            samples: vec![-1.0, 0.5, 0.0],
            sample_rate: 16000,
        };
        save_wav(&p, &w).unwrap();
        let r = load_wav(&p).unwrap();
        assert_eq!(r.samples[0], -32768.0 / 32768.0); // −32768 → −1.0
        assert_eq!(r.samples[1], 16384.0 / 32768.0); // 16384 → 0.5
        assert_eq!(r.samples[2], 0.0);
    }

    #[test]
    fn pcm_round_trip_is_exact() {
        let p = tmpfile("rt.wav");
        let samples: Vec<f32> = (-50..50).map(|i| i as f32 * 117.0 / 32768.0).collect();
        let w = Waveform {
            samples,
            sample_rate: 16000,
        };
        save_wav(&p, &w).unwrap();
        let once = load_wav(&p).unwrap();
        save_wav(&p, &once).unwrap();
        let twice = load_wav(&p).unwrap();
        assert_eq!(once.samples, twice.samples);
    }

    proptest::proptest! {
        #[test]
        fn quantization_is_identity_on_pcm_sourced_data(
            ints in proptest::collection::vec(i16::MIN..=i16::MAX, 1..256),
        ) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("prop.wav");
            let w = Waveform {
                samples: ints.iter().map(|&i| f32::from(i) / PCM_SCALE).collect(),
                sample_rate: 16000,
            };
            save_wav(&p, &w).unwrap();
            let r = load_wav(&p).unwrap();
            proptest::prop_assert_eq!(r.samples, w.samples);
        }
    }

    #[test]
    fn wrong_sample_rate_errors_naming_both_rates() {
        let p = tmpfile("441.wav");
        let w = Waveform {
            samples: vec![0.0; 100],
            sample_rate: 44100,
        };
        save_wav(&p, &w).unwrap();
        let err = load_wav(&p).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("44100") && msg.contains("16000"), "{msg}");
    }

    #[test]
    fn stereo_is_rejected() {
        let p = tmpfile("stereo.wav");
        // hand-build a stereo header
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"RIFF");
        bytes.extend_from_slice(&(36u32 + 4).to_le_bytes());
        bytes.extend_from_slice(b"WAVE");
        bytes.extend_from_slice(b"fmt ");
        bytes.extend_from_slice(&16u32.to_le_bytes());
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&2u16.to_le_bytes()); // stereo
        bytes.extend_from_slice(&16000u32.to_le_bytes());
        bytes.extend_from_slice(&64000u32.to_le_bytes());
        bytes.extend_from_slice(&4u16.to_le_bytes());
        bytes.extend_from_slice(&16u16.to_le_bytes());
        bytes.extend_from_slice(b"data");
        bytes.extend_from_slice(&4u32.to_le_bytes());
        bytes.extend_from_slice(&[0, 0, 0, 0]);
        std::fs::write(&p, bytes).unwrap();
        let msg = load_wav(&p).unwrap_err().to_string();
        assert!(msg.contains("mono"), "{msg}");
    }
}
