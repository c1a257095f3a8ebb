//! Segment one utterance: encode, score adjacent-frame dissimilarity,
//! peak-pick, and compare against the gold boundaries.
//!
//! Run: `cargo run --release --example segment_utterance`

use blindseg::corpus::{load_wav, parse_annotation, synth_corpus, SynthSpec};
use blindseg::encoder::EncoderConfig;
use blindseg::metrics::{match_boundaries, EvalReport};
use blindseg::segmenter::{segment, PeakParams};
use blindseg::train::{train, TrainConfig};

fn main() {
    let dir = std::env::temp_dir().join("blindseg-example-segment");
    let manifest = synth_corpus(
        &dir,
        &SynthSpec {
            utterances: 40,
            seed: 1,
            ..SynthSpec::default()
        },
    )
    .unwrap();
    let (train_m, val_m, test_m) = manifest.split(0.8, 0.1);

    let enc_cfg = EncoderConfig {
        channels: 64,
        projection_dim: 32,
        ..EncoderConfig::default()
    };
    let cfg = TrainConfig {
        epochs: 20,
        seed: 2,
        ..TrainConfig::default()
    };
    let (enc, _) = train(&train_m, &val_m, enc_cfg, &cfg).unwrap();

    let entry = &test_m.entries[0];
    let wav = load_wav(&entry.audio).unwrap();
    let gold = parse_annotation(entry.annotation.as_ref().unwrap())
        .unwrap()
        .gold_boundaries(wav.sample_rate, false);

    let params = PeakParams {
        delta: 0.3,
        normalize: true,
        time_offset: 0.0,
    };
    let (pred, track) = segment(&enc, &wav, &params).unwrap();

    println!("utterance {} ({:.2} s, {} score points)", entry.key(), wav.duration_seconds(), track.scores.len());
    println!("gold: {:?}", gold.times());
    println!("pred: {:?}", pred.times());
    let hits = match_boundaries(&pred, &gold, 0.02);
    println!("{}", EvalReport::from_counts(hits, pred.len(), gold.len()));
}
