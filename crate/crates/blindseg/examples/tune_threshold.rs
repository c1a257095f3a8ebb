//! Sweep the peak-prominence threshold on a validation split and pick the
//! value that maximizes the R-value.
//!
//! Run: `cargo run --release --example tune_threshold`

use blindseg::corpus::{synth_corpus, SynthSpec};
use blindseg::encoder::EncoderConfig;
use blindseg::segmenter::{parse_grid, tune_delta, TuneObjective};
use blindseg::train::{train, TrainConfig};

fn main() {
    let dir = std::env::temp_dir().join("blindseg-example-tune");
    let manifest = synth_corpus(
        &dir,
        &SynthSpec {
            utterances: 40,
            seed: 5,
            ..SynthSpec::default()
        },
    )
    .unwrap();
    let (train_m, val_m, _) = manifest.split(0.8, 0.1);

    let enc_cfg = EncoderConfig {
        channels: 64,
        projection_dim: 32,
        ..EncoderConfig::default()
    };
    let cfg = TrainConfig {
        epochs: 20,
        seed: 3,
        ..TrainConfig::default()
    };
    let (enc, _) = train(&train_m, &val_m, enc_cfg, &cfg).unwrap();

    let grid = parse_grid("0:1:0.1").unwrap();
    let (best, table) = tune_delta(
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

    println!("delta\tP\tR\tF1\tR-value");
    for (d, r) in &table {
        println!(
            "{d:.2}\t{:.2}\t{:.2}\t{:.2}\t{:.2}",
            r.precision * 100.0,
            r.recall * 100.0,
            r.f1 * 100.0,
            r.r_value * 100.0
        );
    }
    println!("\nbest delta by R-value: {best:.2}");
}
