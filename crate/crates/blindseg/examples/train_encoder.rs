//! Train an encoder on synthetic data and round-trip it through a
//! checkpoint file.
//!
//! Run: `cargo run --release --example train_encoder`

use blindseg::checkpoint::{load_checkpoint, save_checkpoint};
use blindseg::corpus::{load_wav, synth_corpus, SynthSpec};
use blindseg::encoder::EncoderConfig;
use blindseg::train::{train, TrainConfig};

fn main() {
    let dir = std::env::temp_dir().join("blindseg-example-train");
    let manifest = synth_corpus(
        &dir,
        &SynthSpec {
            utterances: 24,
            seed: 0,
            ..SynthSpec::default()
        },
    )
    .unwrap();
    let (train_m, val_m, _) = manifest.split(0.8, 0.1);

    // a narrow encoder keeps this demo fast; the full architecture uses
    // 256 channels
    let enc_cfg = EncoderConfig {
        channels: 64,
        projection_dim: 32,
        ..EncoderConfig::default()
    };
    let cfg = TrainConfig {
        epochs: 12,
        patience: 3,
        seed: 7,
        ..TrainConfig::default()
    };
    println!("epoch\ttrain_loss\tval_loss\tseconds");
    let (enc, history) = train(&train_m, &val_m, enc_cfg, &cfg).unwrap();
    for e in &history.epochs {
        println!("{}", e.log_line());
    }
    println!("best epoch: {}", history.best_epoch);

    let ckpt = dir.join("model.ckpt");
    save_checkpoint(&enc, &ckpt).unwrap();
    let reloaded = load_checkpoint(&ckpt).unwrap();

    // the round-trip is exact: encodings agree bitwise
    let wav = load_wav(&manifest.entries[0].audio).unwrap();
    let a = enc.encode(&wav).unwrap();
    let b = reloaded.encode(&wav).unwrap();
    assert_eq!(a.data(), b.data());
    println!(
        "checkpoint {} round-trips bitwise ({} parameters)",
        ckpt.display(),
        enc.trainable_param_count()
    );
}
