//! The evaluation metrics on their own: tolerance matching, precision,
//! recall, F1, over-segmentation, and the R-value.
//!
//! Run: `cargo run --example evaluate_metrics`

use std::collections::BTreeMap;

use blindseg::metrics::{evaluate_corpus, match_boundaries, r_value, EvalReport};
use blindseg::segmenter::BoundarySet;

fn main() {
    let gold = BoundarySet::from_times(vec![0.100, 0.500, 0.750]).unwrap();
    let pred = BoundarySet::from_times(vec![0.105, 0.490, 0.600, 0.800]).unwrap();

    let hits = match_boundaries(&pred, &gold, 0.02);
    println!("one-to-one hits at ±20 ms: {hits}");
    println!("{}", EvalReport::from_counts(hits, pred.len(), gold.len()));

    // the R-value punishes over-segmentation that F1 tolerates: a naive
    // segmenter with perfect recall but half precision keeps F1 ≈ 0.67
    // while the R-value collapses
    let naive = EvalReport::from_counts(10, 20, 10);
    println!(
        "naive over-segmenter: F1 {:.2}, R-value {:.2}",
        naive.f1 * 100.0,
        naive.r_value * 100.0
    );
    println!(
        "r_value(P=0.8389, R=0.8355) = {:.2} (reported alongside F1 {:.2})",
        r_value(0.8389, 0.8355) * 100.0,
        2.0 * 0.8389 * 0.8355 / (0.8389 + 0.8355) * 100.0
    );

    // corpus-level micro-averaging pools counts across utterances
    let mut preds = BTreeMap::new();
    let mut golds = BTreeMap::new();
    preds.insert("utt_a".to_string(), BoundarySet::from_times(vec![0.1]).unwrap());
    golds.insert("utt_a".to_string(), BoundarySet::from_times(vec![0.1, 0.5]).unwrap());
    preds.insert("utt_b".to_string(), BoundarySet::from_times(vec![0.2]).unwrap());
    golds.insert("utt_b".to_string(), BoundarySet::from_times(vec![0.2, 0.7]).unwrap());
    let pooled = evaluate_corpus(&preds, &golds, 0.02).unwrap();
    print!("pooled over two utterances: {pooled}");
    print!("{}", pooled.machine_lines());
}
