//! The whole pipeline in one pass: synthesize a corpus, train the encoder,
//! tune the prominence threshold on the validation split, evaluate on the
//! held-out test split.
//!
//! Run: `cargo run --release --example end_to_end`

use blindseg::corpus::{synth_corpus, SynthSpec};
use blindseg::encoder::EncoderConfig;
use blindseg::segmenter::{evaluate_manifest, parse_grid, tune_delta, PeakParams, TuneObjective};
use blindseg::train::{train, TrainConfig};

fn main() {
    let dir = std::env::temp_dir().join("blindseg-example-e2e");
    let manifest = synth_corpus(
        &dir,
        &SynthSpec {
            utterances: 60,
            seed: 0,
            ..SynthSpec::default()
        },
    )
    .unwrap();
    let (train_m, val_m, test_m) = manifest.split(0.8, 0.1);
    println!(
        "corpus: {} train / {} val / {} test under {}",
        train_m.len(),
        val_m.len(),
        test_m.len(),
        dir.display()
    );

    let enc_cfg = EncoderConfig {
        channels: 64,
        projection_dim: 32,
        ..EncoderConfig::default()
    };
    let cfg = TrainConfig {
        epochs: 25,
        seed: 0,
        ..TrainConfig::default()
    };
    println!("\nepoch\ttrain_loss\tval_loss\tseconds");
    let (enc, history) = train(&train_m, &val_m, enc_cfg, &cfg).unwrap();
    for e in &history.epochs {
        println!("{}", e.log_line());
    }

    let grid = parse_grid("0:1:0.05").unwrap();
    let (delta, _) = tune_delta(
        &enc,
        &val_m,
        &grid,
        0.02,
        TuneObjective::RValue,
        true,
        0.0,
        false,
    )
    .unwrap();
    println!("\ntuned delta: {delta:.2}");

    let params = PeakParams {
        delta,
        normalize: true,
        time_offset: 0.0,
    };
    let (report, per_utt) = evaluate_manifest(&enc, &test_m, &params, 0.02, false).unwrap();
    println!("\ntest split at ±20 ms:");
    print!("{report}");
    for (key, r) in per_utt {
        print!("  {key}\t{r}");
    }
}
