//! Data ingestion: WAV decoding, phoneme annotations, manifests, training
//! crops, and the synthetic-corpus generator.
//!
//! File formats:
//! * WAV — RIFF, PCM 16-bit, mono, 16 kHz only.
//! * Annotation — whitespace-separated text, `start_sample end_sample label`
//!   per line, contiguous segments.
//! * Manifest — UTF-8 text, one record per line: `audio_path[\tannotation_path]`,
//!   relative paths resolved against the manifest's directory.

mod annotation;
mod synth;
mod wav;

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use annotation::{parse_annotation, Annotation, Segment};
pub use synth::{synth_corpus, SynthSpec};
pub use wav::{load_wav, save_wav};

use crate::encoder::{HOP_SAMPLES, RECEPTIVE_FIELD};
use crate::error::{Error, Result};

/// Mono audio scaled to [−1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }
}

/// Shortest waveform worth training on: one receptive field plus one hop,
/// i.e. at least two encoder frames.
pub const MIN_TRAIN_SAMPLES: usize = RECEPTIVE_FIELD + HOP_SAMPLES;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub audio: PathBuf,
    pub annotation: Option<PathBuf>,
}

impl ManifestEntry {
    /// Utterance key used to pair predictions with gold annotations.
    pub fn key(&self) -> String {
        self.audio
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.audio.to_string_lossy().into_owned())
    }
}

/// Ordered list of (audio, optional annotation) records.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Load a manifest file. Relative paths are resolved against the
    /// manifest's own directory; every referenced file must exist.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let resolve = |p: &str, line: usize| -> Result<PathBuf> {
            let raw = Path::new(p);
            let full = if raw.is_absolute() {
                raw.to_path_buf()
            } else {
                base.join(raw)
            };
            if !full.exists() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    msg: format!("referenced file does not exist: {}", full.display()),
                });
            }
            Ok(full)
        };
        let mut entries = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            let audio = resolve(cols.next().expect("split yields at least one"), idx + 1)?;
            let annotation = match cols.next() {
                Some(a) if !a.trim().is_empty() => Some(resolve(a.trim(), idx + 1)?),
                _ => None,
            };
            entries.push(ManifestEntry { audio, annotation });
        }
        Ok(Manifest { entries })
    }

    /// Write the manifest with paths relative to its destination directory
    /// when possible.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let rel = |p: &Path| -> String {
            p.strip_prefix(base)
                .unwrap_or(p)
                .to_string_lossy()
                .into_owned()
        };
        let mut text = String::new();
        for e in &self.entries {
            match &e.annotation {
                Some(a) => text.push_str(&format!("{}\t{}\n", rel(&e.audio), rel(a))),
                None => text.push_str(&format!("{}\n", rel(&e.audio))),
            }
        }
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Deterministic split by utterance order into train/val/test.
    pub fn split(&self, train_frac: f64, val_frac: f64) -> (Manifest, Manifest, Manifest) {
        let n = self.entries.len();
        let n_train = (n as f64 * train_frac).floor() as usize;
        let n_val = (n as f64 * val_frac).floor() as usize;
        let train = Manifest {
            entries: self.entries[..n_train].to_vec(),
        };
        let val = Manifest {
            entries: self.entries[n_train..n_train + n_val].to_vec(),
        };
        let test = Manifest {
            entries: self.entries[n_train + n_val..].to_vec(),
        };
        (train, val, test)
    }

    /// Every entry must carry an annotation (required for eval/tune).
    pub fn require_annotations(&self) -> Result<()> {
        let missing: Vec<String> = self
            .entries
            .iter()
            .filter(|e| e.annotation.is_none())
            .map(|e| e.audio.display().to_string())
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::Data(format!(
                "manifest entries missing annotations: {}",
                missing.join(", ")
            )))
        }
    }
}

/// Random fixed-length training crops.
///
/// Utterances at least one crop long yield `floor(len / crop)` crops with
/// independent uniform start offsets; shorter utterances are returned whole
/// when they still cover [`MIN_TRAIN_SAMPLES`], and skipped otherwise.
pub fn make_crops(w: &Waveform, crop_seconds: f64, rng: &mut ChaCha8Rng) -> Vec<Waveform> {
    let crop_len = (crop_seconds * f64::from(w.sample_rate)).round() as usize;
    let n = w.len();
    if n < MIN_TRAIN_SAMPLES {
        return Vec::new();
    }
    if n < crop_len {
        return vec![w.clone()];
    }
    let count = n / crop_len;
    (0..count)
        .map(|_| {
            let start = rng.gen_range(0..=n - crop_len);
            Waveform {
                samples: w.samples[start..start + crop_len].to_vec(),
                sample_rate: w.sample_rate,
            }
        })
        .collect()
}
