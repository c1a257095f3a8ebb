//! Inference: cosine-dissimilarity boundary scores between adjacent frames,
//! optional per-utterance min-max normalization, prominence-based peak
//! picking, frame-to-time conversion, and threshold tuning.

use crate::corpus::{load_wav, parse_annotation, Manifest};
use crate::encoder::{EncoderState, FrameEmbeddings};
use crate::error::{Error, Result};
use crate::metrics::EvalReport;

/// Sorted boundary times in seconds (gold or predicted).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundarySet {
    times: Vec<f64>,
}

impl BoundarySet {
    pub fn empty() -> Self {
        BoundarySet { times: Vec::new() }
    }

    /// Validates that times are finite, nonnegative, and strictly increasing.
    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        let mut prev = -1.0f64;
        for &t in &times {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::Contract(format!("invalid boundary time {t}")));
            }
            if t <= prev {
                return Err(Error::Contract(format!(
                    "boundary times must be strictly increasing ({prev} then {t})"
                )));
            }
            prev = t;
        }
        Ok(BoundarySet { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Scores for the L−1 junctions between consecutive frames.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTrack {
    pub scores: Vec<f64>,
    pub normalized: bool,
}

/// Peak-picking parameters.
#[derive(Debug, Clone, Copy)]
pub struct PeakParams {
    /// Prominence threshold; lives in [0, 1] when `normalize` is on.
    pub delta: f64,
    /// Min-max normalize scores per utterance before thresholding.
    pub normalize: bool,
    /// Constant added to every boundary time, in seconds.
    pub time_offset: f64,
}

impl Default for PeakParams {
    fn default() -> Self {
        PeakParams {
            delta: 0.5,
            normalize: true,
            time_offset: 0.0,
        }
    }
}

/// `scores[i] = −cos(z_i, z_{i+1})`, the model's confidence that frames i
/// and i+1 belong to different segments. Cosines accumulate in f64 and are
/// clamped so raw scores stay in [−1, 1].
pub fn boundary_scores(z: &FrameEmbeddings) -> Result<ScoreTrack> {
    let l = z.num_frames();
    if l < 2 {
        return Err(Error::Contract(format!(
            "boundary scores need at least 2 frames, got {l}"
        )));
    }
    let norms: Vec<f64> = (0..l)
        .map(|i| {
            z.frame(i)
                .iter()
                .map(|&v| f64::from(v) * f64::from(v))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    if let Some(i) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::Numeric(format!(
            "frame {i} has zero norm; cosine similarity is undefined"
        )));
    }
    let mut scores = Vec::with_capacity(l - 1);
    for i in 0..l - 1 {
        let dot: f64 = z
            .frame(i)
            .iter()
            .zip(z.frame(i + 1))
            .map(|(&a, &b)| f64::from(a) * f64::from(b))
            .sum();
        let cos = (dot / (norms[i] * norms[i + 1])).clamp(-1.0, 1.0);
        scores.push(-cos);
    }
    Ok(ScoreTrack {
        scores,
        normalized: false,
    })
}

/// Min-max scale to [0, 1] per utterance; a constant track maps to all zeros.
pub fn normalize_scores(track: &ScoreTrack) -> ScoreTrack {
    let min = track.scores.iter().copied().fold(f64::INFINITY, f64::min);
    let max = track
        .scores
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let scores = if track.scores.is_empty() || min == max {
        vec![0.0; track.scores.len()]
    } else {
        let range = max - min;
        track.scores.iter().map(|&s| (s - min) / range).collect()
    };
    ScoreTrack {
        scores,
        normalized: true,
    }
}

/// Prominence-thresholded peak detection.
///
/// An index p is a local maximum when `scores[p] > scores[p−1]` and
/// `scores[p] >= scores[p+1]` (so the leftmost sample of an equal-valued
/// plateau is the candidate; array endpoints are never peaks). Its
/// prominence is `scores[p] − max(left_base, right_base)`, where each base
/// is the minimum value between p and the nearest strictly higher sample on
/// that side (or the array end if none). Candidates with prominence ≥ delta
/// are returned in increasing index order.
pub fn detect_peaks(scores: &[f64], delta: f64) -> Vec<usize> {
    let n = scores.len();
    let mut peaks = Vec::new();
    if n < 3 {
        return peaks;
    }
    for p in 1..n - 1 {
        let peak = scores[p];
        if !(peak > scores[p - 1] && peak >= scores[p + 1]) {
            continue;
        }
        let mut left_base = f64::INFINITY;
        for q in (0..p).rev() {
            if scores[q] > peak {
                break;
            }
            left_base = left_base.min(scores[q]);
        }
        let mut right_base = f64::INFINITY;
        for &v in &scores[p + 1..] {
            if v > peak {
                break;
            }
            right_base = right_base.min(v);
        }
        let prominence = peak - left_base.max(right_base);
        if prominence >= delta {
            peaks.push(p);
        }
    }
    peaks
}

/// Map junction indices to boundary times: the trailing edge of frame i,
/// `(index + 1) · hop / sample_rate + time_offset`.
pub fn frames_to_times(
    indices: &[usize],
    hop_samples: usize,
    sample_rate: u32,
    time_offset: f64,
) -> BoundarySet {
    let sr = f64::from(sample_rate);
    let times = indices
        .iter()
        .map(|&i| (i as f64 + 1.0) * hop_samples as f64 / sr + time_offset)
        .collect();
    BoundarySet::from_times(times).expect("sorted indices give strictly increasing times")
}

/// Full inference for one utterance: encode (eval mode), score, optionally
/// normalize, peak-pick, convert to times. Returns the predicted boundaries
/// and the raw score track. Deterministic.
pub fn segment(
    enc: &EncoderState,
    x: &crate::corpus::Waveform,
    params: &PeakParams,
) -> Result<(BoundarySet, ScoreTrack)> {
    let z = enc.encode(x)?;
    let raw = boundary_scores(&z)?;
    let peaks = if params.normalize {
        detect_peaks(&normalize_scores(&raw).scores, params.delta)
    } else {
        detect_peaks(&raw.scores, params.delta)
    };
    let offset = z.time_offset + params.time_offset;
    let bounds = frames_to_times(&peaks, z.hop_samples, z.sample_rate, offset);
    Ok((bounds, raw))
}

/// Objective for threshold tuning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TuneObjective {
    RValue,
    F1,
}

impl TuneObjective {
    fn of(self, report: &EvalReport) -> f64 {
        match self {
            TuneObjective::RValue => report.r_value,
            TuneObjective::F1 => report.f1,
        }
    }
}

impl std::str::FromStr for TuneObjective {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rval" | "rvalue" | "r-value" => Ok(TuneObjective::RValue),
            "f1" => Ok(TuneObjective::F1),
            other => Err(Error::Config(format!(
                "unknown tuning metric '{other}' (expected rval or f1)"
            ))),
        }
    }
}

/// One utterance prepared for repeated evaluation at different thresholds.
pub(crate) struct PreparedUtterance {
    pub key: String,
    pub raw: ScoreTrack,
    pub norm: ScoreTrack,
    pub gold: BoundarySet,
    pub duration: f64,
    pub hop_samples: usize,
    pub sample_rate: u32,
    pub base_offset: f64,
}

pub(crate) fn prepare_utterances(
    enc: &EncoderState,
    manifest: &Manifest,
    include_edges: bool,
) -> Result<Vec<PreparedUtterance>> {
    if manifest.is_empty() {
        return Err(Error::Data("manifest is empty".into()));
    }
    manifest.require_annotations()?;
    let mut out = Vec::with_capacity(manifest.len());
    for entry in &manifest.entries {
        let wav = load_wav(&entry.audio)?;
        let ann = parse_annotation(entry.annotation.as_ref().expect("checked above"))?;
        let z = enc.encode(&wav)?;
        let raw = boundary_scores(&z)?;
        let norm = normalize_scores(&raw);
        out.push(PreparedUtterance {
            key: entry.key(),
            norm,
            gold: ann.gold_boundaries(wav.sample_rate, include_edges),
            duration: wav.duration_seconds(),
            hop_samples: z.hop_samples,
            sample_rate: z.sample_rate,
            base_offset: z.time_offset,
            raw,
        });
    }
    Ok(out)
}

pub(crate) fn predict_at(
    u: &PreparedUtterance,
    delta: f64,
    normalize: bool,
    time_offset: f64,
    include_edges: bool,
) -> BoundarySet {
    let track = if normalize { &u.norm } else { &u.raw };
    let peaks = detect_peaks(&track.scores, delta);
    let set = frames_to_times(
        &peaks,
        u.hop_samples,
        u.sample_rate,
        u.base_offset + time_offset,
    );
    if !include_edges {
        return set;
    }
    // Edge mode credits both sides with the utterance edges.
    let mut times = vec![0.0];
    times.extend(set.times().iter().copied().filter(|&t| t > 0.0 && t < u.duration));
    times.push(u.duration);
    BoundarySet::from_times(times).expect("edges bracket interior times")
}

fn pooled_report(
    prepared: &[PreparedUtterance],
    delta: f64,
    normalize: bool,
    time_offset: f64,
    include_edges: bool,
    tolerance: f64,
) -> EvalReport {
    let mut hits = 0usize;
    let mut pred_count = 0usize;
    let mut gold_count = 0usize;
    for u in prepared {
        let pred = predict_at(u, delta, normalize, time_offset, include_edges);
        hits += crate::metrics::match_boundaries(&pred, &u.gold, tolerance);
        pred_count += pred.len();
        gold_count += u.gold.len();
    }
    EvalReport::from_counts(hits, pred_count, gold_count)
}

/// Evaluate corpus metrics at every δ in `grid` and return the argmax of the
/// objective (ties broken toward the smallest δ) with the full table.
#[allow(clippy::too_many_arguments)]
pub fn tune_delta(
    enc: &EncoderState,
    manifest: &Manifest,
    grid: &[f64],
    tolerance: f64,
    objective: TuneObjective,
    normalize: bool,
    time_offset: f64,
    include_edges: bool,
) -> Result<(f64, Vec<(f64, EvalReport)>)> {
    if grid.is_empty() {
        return Err(Error::Config("empty delta grid".into()));
    }
    let prepared = prepare_utterances(enc, manifest, include_edges)?;
    let table: Vec<(f64, EvalReport)> = grid
        .iter()
        .map(|&d| {
            (
                d,
                pooled_report(&prepared, d, normalize, time_offset, include_edges, tolerance),
            )
        })
        .collect();
    Ok((argmax_delta(&table, objective), table))
}

/// Argmax of the objective over the table; ties go to the smallest δ.
fn argmax_delta(table: &[(f64, EvalReport)], objective: TuneObjective) -> f64 {
    let mut best = &table[0];
    for row in &table[1..] {
        if objective.of(&row.1) > objective.of(&best.1) {
            best = row;
        }
    }
    best.0
}

/// Pooled (micro-averaged) corpus metrics at one δ, plus per-utterance
/// reports as a secondary output.
pub fn evaluate_manifest(
    enc: &EncoderState,
    manifest: &Manifest,
    params: &PeakParams,
    tolerance: f64,
    include_edges: bool,
) -> Result<(EvalReport, Vec<(String, EvalReport)>)> {
    let prepared = prepare_utterances(enc, manifest, include_edges)?;
    let pooled = pooled_report(
        &prepared,
        params.delta,
        params.normalize,
        params.time_offset,
        include_edges,
        tolerance,
    );
    let per_utt = prepared
        .iter()
        .map(|u| {
            let pred = predict_at(u, params.delta, params.normalize, params.time_offset, include_edges);
            let hits = crate::metrics::match_boundaries(&pred, &u.gold, tolerance);
            (
                u.key.clone(),
                EvalReport::from_counts(hits, pred.len(), u.gold.len()),
            )
        })
        .collect();
    Ok((pooled, per_utt))
}

/// Parse a `start:stop:step` grid with inclusive endpoints.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!(
            "grid must be start:stop:step, got '{spec}'"
        )));
    }
    let parse = |s: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| Error::Config(format!("bad grid number '{s}'")))
    };
    let (start, stop, step) = (parse(parts[0])?, parse(parts[1])?, parse(parts[2])?);
    if step <= 0.0 || stop < start {
        return Err(Error::Config(format!("bad grid range '{spec}'")));
    }
    let n = ((stop - start) / step).round() as usize;
    let mut grid: Vec<f64> = (0..=n)
        .map(|i| start + i as f64 * step)
        .filter(|&d| d <= stop + 1e-12)
        .collect();
    if let Some(last) = grid.last() {
        if (stop - last).abs() > 1e-9 && stop > *last {
            grid.push(stop);
        }
    }
    Ok(grid)
}
