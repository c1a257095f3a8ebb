//! End-to-end gradient checking of the encoder + contrastive composite.

use rand::Rng;

use crate::contrastive::{nce_sum_and_grad, sample_all_negatives, NegativeSample};
use crate::encoder::{Encoder, EncoderConfig};
use crate::error::Result;
use crate::nn::gradcheck::{GradCheckEntry, GradCheckReport};
use crate::rng::derive_rng;
use crate::tensor::Tensor;

/// Finite-difference check of the full training path: waveform → five conv
/// blocks (train-mode batch norm) → projection → NCE loss. Runs entirely in
/// f64.
///
/// Central differences are only valid where the loss is smooth. The leaky
/// ReLU is piecewise linear, so for every probed coordinate the checker
/// compares the sign pattern of all activation inputs across the probe
/// points against the base point; when a unit crosses the kink inside the
/// probe interval the step for that coordinate is refined (÷4, up to 8
/// times) until the interval is kink-free. Each derivative estimate is the
/// Richardson extrapolation of the central secants at the step and half the
/// step, cancelling the quadratic truncation term. Coordinates whose true
/// gradient is exactly cancelled (a conv bias feeding a batch normalizer)
/// compare as matching through an absolute floor of 1e-8.
pub fn encoder_nce_grad_check(
    config: &EncoderConfig,
    seed: u64,
    input_samples: usize,
    k: usize,
    h: f64,
    tol: f64,
) -> Result<GradCheckReport> {
    let enc = Encoder::<f64>::init(config.clone(), seed)?;
    let mut rng = derive_rng(seed, "gradcheck-input", 0);
    let input = Tensor::new(
        vec![1, input_samples],
        (0..input_samples).map(|_| rng.gen_range(-0.5..0.5)).collect(),
    )?;
    let frames = config.out_length(input_samples)?;
    let mut neg_rng = derive_rng(seed, "gradcheck-neg", 0);
    let negatives = sample_all_negatives(frames, k, &mut neg_rng)?;

    let (names, mut theta): (Vec<String>, Vec<Tensor<f64>>) = {
        let mut e = enc.clone();
        e.params_mut()
            .into_iter()
            .map(|(n, p)| (n, p.value.clone()))
            .unzip()
    };

    let eval = |theta: &[Tensor<f64>]| -> (f64, Vec<u8>) {
        let mut e = enc.clone();
        load_theta(&mut e, theta);
        loss_and_kink_signature(&mut e, &input, &negatives)
    };

    // analytic gradient at theta
    let analytic: Vec<Tensor<f64>> = {
        let mut e = enc.clone();
        load_theta(&mut e, &theta);
        let (outs, trace) = e.forward_train_batch(vec![input.clone()])?;
        let fm = outs[0].transposed2();
        let (_, grad, terms) = nce_sum_and_grad(&fm, &negatives)?;
        let mut gout = grad.transposed2();
        let scale = 1.0 / terms as f64;
        for v in gout.data_mut() {
            *v *= scale;
        }
        e.backward_batch(&trace, &[gout])?;
        e.params_mut().into_iter().map(|(_, p)| p.grad.clone()).collect()
    };

    let (_, base_signs) = eval(&theta);

    let mut entries = Vec::with_capacity(theta.len());
    for pi in 0..theta.len() {
        let mut worst = 0.0f64;
        let mut worst_index = 0usize;
        let mut worst_pair = (0.0, 0.0);
        for idx in 0..theta[pi].numel() {
            let orig = theta[pi].data()[idx];
            let mut step = h;
            let mut refinements = 0;
            let numeric = loop {
                let mut probe = |delta: f64| {
                    theta[pi].data_mut()[idx] = orig + delta;
                    let out = eval(&theta);
                    theta[pi].data_mut()[idx] = orig;
                    out
                };
                let (fp, sp) = probe(step);
                let (fm, sm) = probe(-step);
                let (fp2, sp2) = probe(step / 2.0);
                let (fm2, sm2) = probe(-step / 2.0);
                let smooth =
                    sp == base_signs && sm == base_signs && sp2 == base_signs && sm2 == base_signs;
                if smooth || refinements >= 8 {
                    // Richardson extrapolation of the two central secants
                    // cancels the h² truncation term.
                    let n_h = (fp - fm) / (2.0 * step);
                    let n_h2 = (fp2 - fm2) / step;
                    break (4.0 * n_h2 - n_h) / 3.0;
                }
                step /= 4.0;
                refinements += 1;
            };
            let ana = analytic[pi].data()[idx];
            let rel = (ana - numeric).abs() / ana.abs().max(numeric.abs()).max(1e-8);
            if rel > worst {
                worst = rel;
                worst_index = idx;
                worst_pair = (ana, numeric);
            }
        }
        entries.push(GradCheckEntry {
            name: names[pi].clone(),
            max_rel_err: worst,
            worst_index,
            worst_analytic: worst_pair.0,
            worst_numeric: worst_pair.1,
        });
    }
    Ok(GradCheckReport { tol, entries })
}

fn load_theta(enc: &mut Encoder<f64>, theta: &[Tensor<f64>]) {
    for ((_, p), t) in enc.params_mut().into_iter().zip(theta) {
        p.value = t.clone();
    }
}

/// Loss plus the sign pattern of every leaky-ReLU input (the batch-norm
/// outputs); two evaluations with equal patterns lie on the same linear
/// piece of every activation.
fn loss_and_kink_signature(
    enc: &mut Encoder<f64>,
    input: &Tensor<f64>,
    negatives: &[NegativeSample],
) -> (f64, Vec<u8>) {
    let (outs, trace) = enc
        .forward_train_batch(vec![input.clone()])
        .expect("forward on checked shapes");
    let fm = outs[0].transposed2();
    let (sum, _, terms) = nce_sum_and_grad(&fm, negatives).expect("loss on checked shapes");
    let signs = trace
        .bn_out
        .iter()
        .flat_map(|items| items.iter())
        .flat_map(|t| t.data().iter().map(|&v| u8::from(v >= 0.0)))
        .collect();
    (sum / terms as f64, signs)
}
