//! Generate a synthetic corpus with exact gold boundaries.
//!
//! Each utterance concatenates band-limited noise segments; every junction
//! between segments is a known spectral change, written to a TIMIT-style
//! annotation next to the WAV.
//!
//! Run: `cargo run --example synthesize_corpus`

use blindseg::corpus::{parse_annotation, synth_corpus, SynthSpec};

fn main() {
    let dir = std::env::temp_dir().join("blindseg-example-corpus");
    let spec = SynthSpec {
        utterances: 20,
        seed: 42,
        ..SynthSpec::default()
    };
    let manifest = synth_corpus(&dir, &spec).expect("corpus generation");

    let (train, val, test) = manifest.split(0.8, 0.1);
    println!("wrote {} utterances under {}", manifest.len(), dir.display());
    println!("split: {} train / {} val / {} test", train.len(), val.len(), test.len());

    let first = &manifest.entries[0];
    let ann = parse_annotation(first.annotation.as_ref().unwrap()).unwrap();
    println!("\nfirst utterance ({}):", first.key());
    for seg in &ann.segments {
        println!(
            "  [{:>6} .. {:>6})  {:>7.3}s  {}",
            seg.start_sample,
            seg.end_sample,
            seg.start_sample as f64 / 16000.0,
            seg.label
        );
    }
    let gold = ann.gold_boundaries(16000, false);
    println!("gold boundaries: {:?}", gold.times());
}
