//! Prominence-based peak picking on a score track.
//!
//! A peak's prominence is its height above the higher of the two valleys
//! separating it from taller neighbors; thresholding on prominence keeps
//! salient boundaries while ignoring ripples on the slopes.
//!
//! Run: `cargo run --example peak_detection`

use blindseg::segmenter::{detect_peaks, frames_to_times, normalize_scores, ScoreTrack};

fn main() {
    let scores = vec![0.05, 0.68, 0.20, 0.34, 0.25, 0.91, 0.10, 0.45, 0.42, 0.03];
    println!("scores: {scores:?}");
    for delta in [0.0, 0.2, 0.5, 0.8] {
        let peaks = detect_peaks(&scores, delta);
        println!("delta {delta:.1} → peaks at {peaks:?}");
    }

    // raw cosine dissimilarities live in [−1, 1]; min-max normalization
    // makes one threshold transferable across utterances
    let raw = ScoreTrack {
        scores: vec![-0.98, -0.60, -0.97, -0.40, -0.95],
        normalized: false,
    };
    let norm = normalize_scores(&raw);
    println!("\nraw:        {:?}", raw.scores);
    println!("normalized: {:?}", norm.scores);

    let peaks = detect_peaks(&norm.scores, 0.5);
    let bounds = frames_to_times(&peaks, 160, 16000, 0.0);
    println!("peaks {peaks:?} → boundary times {:?} s", bounds.times());
}
