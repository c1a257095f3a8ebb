//! Contrastive training loop: shuffled fixed-length crops, pooled-batch
//! forward/backward, Adam updates, and early stopping on validation loss.

use std::time::Instant;

use rand::seq::SliceRandom;

use crate::contrastive::{nce_sum_and_grad, sample_all_negatives};
use crate::corpus::{load_wav, make_crops, Manifest, Waveform, MIN_TRAIN_SAMPLES};
use crate::encoder::{Encoder, EncoderConfig, EncoderState};
use crate::error::{Error, Result};
use crate::nn::{adam_step, AdamConfig};
use crate::rng::derive_rng;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub epochs: usize,
    /// K distractors per reference frame.
    pub negatives: usize,
    pub crop_seconds: f64,
    /// Non-improving validation epochs tolerated before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 8,
            lr: 1e-4,
            epochs: 50,
            negatives: 5,
            crop_seconds: 1.0,
            patience: 5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.negatives == 0 {
            return Err(Error::Config("neg-k must be >= 1".into()));
        }
        let crop_samples = (self.crop_seconds * 16000.0).round();
        if !(crop_samples >= MIN_TRAIN_SAMPLES as f64) {
            return Err(Error::Config(format!(
                "crop of {} s is below the {MIN_TRAIN_SAMPLES}-sample minimum (two frames)",
                self.crop_seconds
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    /// 1-based epoch number.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub seconds: f64,
}

impl EpochStats {
    /// The training-log line: `epoch\ttrain_loss\tval_loss\tseconds`.
    pub fn log_line(&self) -> String {
        format!(
            "{}\t{:.6}\t{:.6}\t{:.2}",
            self.epoch, self.train_loss, self.val_loss, self.seconds
        )
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    /// 1-based epoch with the minimum validation loss.
    pub best_epoch: usize,
}

impl TrainHistory {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("epoch\ttrain_loss\tval_loss\tseconds\n");
        for e in &self.epochs {
            out.push_str(&e.log_line());
            out.push('\n');
        }
        out.push_str(&format!("best_epoch\t{}\n", self.best_epoch));
        out
    }
}

/// Stop once the validation loss has failed to improve for more than
/// `patience` consecutive epochs.
#[derive(Debug)]
pub(crate) struct EarlyStopper {
    patience: usize,
    best: f64,
    pub best_epoch: usize,
    since_best: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> Self {
        EarlyStopper {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            since_best: 0,
        }
    }

    /// Returns (improved, stop).
    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> (bool, bool) {
        let improved = val_loss < self.best;
        if improved {
            self.best = val_loss;
            self.best_epoch = epoch;
            self.since_best = 0;
        } else {
            self.since_best += 1;
        }
        (improved, self.since_best > self.patience)
    }
}

fn load_usable(manifest: &Manifest, min_len: usize, what: &str) -> Result<Vec<Waveform>> {
    if manifest.is_empty() {
        return Err(Error::Data(format!("{what} manifest is empty")));
    }
    let mut waves = Vec::with_capacity(manifest.len());
    let mut skipped = 0usize;
    for entry in &manifest.entries {
        let w = load_wav(&entry.audio)?;
        if w.len() < min_len {
            skipped += 1;
            continue;
        }
        waves.push(w);
    }
    if skipped > 0 {
        log::warn!("{what}: skipped {skipped} utterances shorter than {min_len} samples");
    }
    if waves.is_empty() {
        return Err(Error::Data(format!(
            "{what} manifest has no utterance of at least {min_len} samples"
        )));
    }
    Ok(waves)
}

fn item_tensor(w: &Waveform) -> Tensor<f32> {
    Tensor::new(vec![1, w.len()], w.samples.clone()).expect("shape matches data")
}

/// Train an encoder from scratch. Returns the checkpointed state of the
/// best-validation-loss epoch together with the per-epoch history. Fully
/// reproducible: all randomness (init, shuffling, cropping, negative
/// sampling) derives from `cfg.seed`.
pub fn train(
    train_set: &Manifest,
    val_set: &Manifest,
    enc_config: EncoderConfig,
    cfg: &TrainConfig,
) -> Result<(EncoderState, TrainHistory)> {
    cfg.validate()?;
    enc_config.validate()?;

    let train_waves = load_usable(train_set, MIN_TRAIN_SAMPLES, "train")?;
    let val_waves = load_usable(val_set, enc_config.min_input_len(), "validation")?;

    let mut enc = Encoder::<f32>::init(enc_config, cfg.seed)?;
    let adam = AdamConfig::with_lr(cfg.lr);

    let mut history = TrainHistory::default();
    let mut stopper = EarlyStopper::new(cfg.patience);
    let mut best: Option<EncoderState> = None;

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();

        let mut order: Vec<usize> = (0..train_waves.len()).collect();
        order.shuffle(&mut derive_rng(cfg.seed, "shuffle", epoch as u64));

        let mut crop_rng = derive_rng(cfg.seed, "crop", epoch as u64);
        let mut crops: Vec<Waveform> = Vec::new();
        for &u in &order {
            crops.extend(make_crops(&train_waves[u], cfg.crop_seconds, &mut crop_rng));
        }
        if crops.is_empty() {
            return Err(Error::Data("no usable crops in the training set".into()));
        }

        let mut neg_rng = derive_rng(cfg.seed, "neg", epoch as u64);
        let mut epoch_sum = 0.0f64;
        let mut epoch_terms = 0usize;

        for batch in crops.chunks(cfg.batch_size) {
            let items: Vec<Tensor<f32>> = batch.iter().map(item_tensor).collect();
            let (outs, trace) = enc.forward_train_batch(items)?;

            // frame-major views, negatives, and the pooled loss
            let mut frame_mats = Vec::with_capacity(outs.len());
            let mut samples = Vec::with_capacity(outs.len());
            for out in &outs {
                let fm = out.transposed2(); // [L × N]
                samples.push(sample_all_negatives(fm.rows(), cfg.negatives, &mut neg_rng)?);
                frame_mats.push(fm);
            }
            let mut batch_sum = 0.0f64;
            let mut batch_terms = 0usize;
            let mut grads = Vec::with_capacity(outs.len());
            for (fm, negs) in frame_mats.iter().zip(&samples) {
                let (sum, grad, terms) = nce_sum_and_grad(fm, negs)?;
                batch_sum += f64::from(sum);
                batch_terms += terms;
                grads.push(grad);
            }
            if batch_terms == 0 {
                log::warn!("batch with no contrastive terms; skipped");
                continue;
            }
            let batch_loss = batch_sum / batch_terms as f64;
            if !batch_loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite training loss at epoch {epoch}"
                )));
            }
            epoch_sum += batch_sum;
            epoch_terms += batch_terms;

            // d(mean)/dz = grad-of-sum / number of terms, back in [N × L]
            let scale = 1.0 / batch_terms as f32;
            let grad_outs: Vec<Tensor<f32>> = grads
                .iter()
                .map(|g| {
                    let mut t = g.transposed2();
                    for v in t.data_mut() {
                        *v *= scale;
                    }
                    t
                })
                .collect();
            enc.backward_batch(&trace, &grad_outs)?;
            adam_step(&mut enc.params_mut(), &adam)?;
        }

        let train_loss = if epoch_terms > 0 {
            epoch_sum / epoch_terms as f64
        } else {
            return Err(Error::Data(
                "epoch produced no contrastive terms; utterances too short".into(),
            ));
        };

        let val_loss = validation_loss(&enc, &val_waves, cfg)?;
        if !val_loss.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite validation loss at epoch {epoch}"
            )));
        }

        let stats = EpochStats {
            epoch,
            train_loss,
            val_loss,
            seconds: started.elapsed().as_secs_f64(),
        };
        log::info!("{}", stats.log_line());
        history.epochs.push(stats);

        let (improved, stop) = stopper.observe(epoch, val_loss);
        if improved {
            let mut snapshot = enc.clone();
            snapshot.meta.epoch = epoch as u32;
            snapshot.meta.best_val_loss = val_loss as f32;
            snapshot.meta.seed = cfg.seed;
            best = Some(snapshot);
        }
        if stop {
            log::info!(
                "early stop at epoch {epoch}; best epoch {}",
                stopper.best_epoch
            );
            break;
        }
    }

    history.best_epoch = stopper.best_epoch;
    let best = best.expect("at least one epoch ran, so one snapshot exists");
    Ok((best, history))
}

/// Eval-mode mean NCE loss over full-length utterances. The negative draws
/// depend only on the utterance index, not the epoch, so validation losses
/// are comparable across epochs.
fn validation_loss(enc: &EncoderState, waves: &[Waveform], cfg: &TrainConfig) -> Result<f64> {
    let mut sum = 0.0f64;
    let mut terms = 0usize;
    for (idx, w) in waves.iter().enumerate() {
        let out = enc.forward_eval(&item_tensor(w))?;
        let fm = out.transposed2();
        let mut rng = derive_rng(cfg.seed, "val-neg", idx as u64);
        let negs = sample_all_negatives(fm.rows(), cfg.negatives, &mut rng)?;
        if negs.is_empty() {
            continue;
        }
        let (s, _, t) = nce_sum_and_grad(&fm, &negs)?;
        sum += f64::from(s);
        terms += t;
    }
    if terms == 0 {
        return Err(Error::Data(
            "validation set produced no contrastive terms".into(),
        ));
    }
    Ok(sum / terms as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn early_stopper_semantics() {
        // patience 1, validation loss strictly increasing from epoch 2:
        // runs epochs 1..3, stops at 3, best marker stays at 1
        let mut s = EarlyStopper::new(1);
        assert_eq!(s.observe(1, 1.0), (true, false));
        assert_eq!(s.observe(2, 1.1), (false, false));
        assert_eq!(s.observe(3, 1.2), (false, true));
        assert_eq!(s.best_epoch, 1);
    }

    #[test]
    fn early_stopper_resets_on_improvement() {
        let mut s = EarlyStopper::new(2);
        s.observe(1, 1.0);
        s.observe(2, 1.5);
        s.observe(3, 0.9);
        assert_eq!(s.best_epoch, 3);
        assert_eq!(s.observe(4, 1.0), (false, false));
        assert_eq!(s.observe(5, 1.0), (false, false));
        assert_eq!(s.observe(6, 1.0), (false, true));
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            crop_seconds: 0.03,
            ..TrainConfig::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn history_tsv_round_trip_format() {
        let h = TrainHistory {
            epochs: vec![EpochStats {
                epoch: 1,
                train_loss: 1.5,
                val_loss: 1.25,
                seconds: 2.0,
            }],
            best_epoch: 1,
        };
        let tsv = h.to_tsv();
        assert!(tsv.contains("1\t1.500000\t1.250000\t2.00"));
        assert!(tsv.ends_with("best_epoch\t1\n"));
    }
}
