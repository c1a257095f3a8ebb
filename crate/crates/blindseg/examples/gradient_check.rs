//! Finite-difference verification of the backward passes, per layer and
//! through the whole encoder + contrastive composite.
//!
//! Run: `cargo run --release --example gradient_check`

use blindseg::encoder::EncoderConfig;
use blindseg::nn::{conv1d_backward, conv1d_forward, encoder_nce_grad_check, grad_check};
use blindseg::Tensor;

fn main() {
    // the generic checker on a hand-built case: a random conv layer
    let input = Tensor::new(vec![2, 13], (0..26).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
    let weight = Tensor::new(vec![3, 2, 4], (0..24).map(|i| (i as f64 * 0.61).cos() * 0.3).collect()).unwrap();
    let bias = Tensor::new(vec![3], vec![0.1, -0.2, 0.05]).unwrap();
    let cot = Tensor::new(vec![3, 5], (0..15).map(|i| (i as f64 * 0.17).sin()).collect()).unwrap();

    let loss = |theta: &[Tensor<f64>]| -> f64 {
        conv1d_forward(&theta[0], &theta[1], &theta[2], 2)
            .unwrap()
            .data()
            .iter()
            .zip(cot.data())
            .map(|(o, c)| o * c)
            .sum()
    };
    let (gi, gw, gb) = conv1d_backward(&cot, &input, &weight, 2).unwrap();
    let report = grad_check(
        &["input".into(), "weight".into(), "bias".into()],
        &[input, weight, bias],
        &[gi, gw, gb],
        loss,
        1e-3,
        1e-5,
    );
    println!("conv1d layer:\n{report}\n");

    // the full path: waveform → 5 conv/norm/activation blocks → projection
    // → contrastive loss, checked coordinate by coordinate in f64
    let config = EncoderConfig {
        channels: 6,
        projection_dim: 4,
        ..EncoderConfig::default()
    };
    let report = encoder_nce_grad_check(&config, 0, 1600, 2, 1e-3, 1e-3).unwrap();
    println!("encoder + NCE composite:\n{report}");
    assert!(report.passed());
}
