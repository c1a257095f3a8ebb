//! Per-channel batch normalization over the pooled batch·time axis.
//!
//! Training batches are lists of `[C × T_b]` tensors (crop lengths may
//! differ); statistics pool over every `(item, t)` pair of a channel, items
//! ascending then t ascending, so results do not depend on thread count.
//! Normalization uses the biased variance; the running variance is updated
//! with the unbiased estimate. Eval mode applies the running statistics,
//! which makes single-utterance inference well defined.

use crate::error::{Error, Result};
use crate::nn::par::{chunks_mut_indexed, for_each_indexed};
use crate::tensor::{Parameter, Scalar, Tensor};

/// Learned affine batch-norm layer with running statistics.
#[derive(Debug, Clone)]
pub struct BatchNorm<T> {
    pub gamma: Parameter<T>,
    pub beta: Parameter<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    /// Number of training batches folded into the running statistics.
    pub batches_tracked: u64,
    pub momentum: f64,
    pub eps: f64,
}

/// Saved statistics from a training-mode forward pass.
#[derive(Debug)]
pub struct NormCache<T> {
    mean: Vec<T>,
    inv_std: Vec<T>,
    count: usize,
}

impl<T: Scalar> BatchNorm<T> {
    pub fn new(channels: usize, momentum: f64, eps: f64) -> Self {
        BatchNorm {
            gamma: Parameter::new(Tensor::full(&[channels], T::one())),
            beta: Parameter::new(Tensor::zeros(&[channels])),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::full(&[channels], T::one()),
            batches_tracked: 0,
            momentum,
            eps,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.value.numel()
    }

    fn check_inputs(&self, inputs: &[&Tensor<T>]) -> Result<usize> {
        if inputs.is_empty() {
            return Err(Error::Contract("batchnorm: empty batch".into()));
        }
        let c = self.channels();
        let mut count = 0usize;
        for x in inputs {
            if x.shape().len() != 2 || x.shape()[0] != c {
                return Err(Error::Contract(format!(
                    "batchnorm expects [{}×T] inputs, got {:?}",
                    c,
                    x.shape()
                )));
            }
            count += x.shape()[1];
        }
        Ok(count)
    }

    /// Normalize with batch statistics and fold them into the running
    /// estimates. Returns the outputs and the cache needed by [`Self::backward`].
    pub fn forward_train(
        &mut self,
        inputs: &[&Tensor<T>],
    ) -> Result<(Vec<Tensor<T>>, NormCache<T>)> {
        let count = self.check_inputs(inputs)?;
        if count < 2 {
            return Err(Error::Contract(
                "batchnorm train mode needs at least 2 values per channel".into(),
            ));
        }
        let c = self.channels();
        let inv_count = T::from_f64(1.0 / count as f64);

        // stats[2ch] = mean, stats[2ch + 1] = biased variance
        let mut stats = vec![T::zero(); 2 * c];
        chunks_mut_indexed(&mut stats, 2, c * count, |ch, out| {
            let mut s = T::zero();
            for x in inputs {
                for &val in x.row(ch) {
                    s += val;
                }
            }
            let mu = s * inv_count;
            let mut sq = T::zero();
            for x in inputs {
                for &val in x.row(ch) {
                    let d = val - mu;
                    sq += d * d;
                }
            }
            out[0] = mu;
            out[1] = sq * inv_count;
        });
        let mean: Vec<T> = stats.iter().step_by(2).copied().collect();
        let var: Vec<T> = stats.iter().skip(1).step_by(2).copied().collect();

        let eps = T::from_f64(self.eps);
        let inv_std: Vec<T> = var.iter().map(|&v| (v + eps).sqrt().recip()).collect();

        let outputs = apply_affine(inputs, &mean, &inv_std, &self.gamma.value, &self.beta.value);

        // Exponential moving average; running variance uses the unbiased estimate.
        let mom = T::from_f64(self.momentum);
        let keep = T::one() - mom;
        let unbias = T::from_f64(count as f64 / (count as f64 - 1.0));
        for ch in 0..c {
            let rm = &mut self.running_mean.data_mut()[ch];
            *rm = keep * *rm + mom * mean[ch];
        }
        for ch in 0..c {
            let rv = &mut self.running_var.data_mut()[ch];
            *rv = keep * *rv + mom * var[ch] * unbias;
        }
        self.batches_tracked += 1;

        Ok((
            outputs,
            NormCache {
                mean,
                inv_std,
                count,
            },
        ))
    }

    /// Normalize one tensor with the running statistics.
    pub fn forward_eval(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_inputs(&[input])?;
        let c = self.channels();
        let eps = T::from_f64(self.eps);
        let (mean, inv_std): (Vec<T>, Vec<T>) = if self.batches_tracked == 0 {
            log::warn!("batchnorm eval with no tracked batches; normalizing with mean 0, var 1");
            (
                vec![T::zero(); c],
                vec![(T::one() + eps).sqrt().recip(); c],
            )
        } else {
            (
                self.running_mean.data().to_vec(),
                self.running_var
                    .data()
                    .iter()
                    .map(|&v| (v + eps).sqrt().recip())
                    .collect(),
            )
        };
        let mut out = apply_affine(&[input], &mean, &inv_std, &self.gamma.value, &self.beta.value);
        Ok(out.pop().expect("one input, one output"))
    }

    /// Backward through the training-mode normalization. Accumulates the
    /// gamma/beta gradients in place and returns the input gradients.
    ///
    /// Per channel: `dx = γ·inv_std/M · (M·dy − Σdy − x̂·Σ(dy·x̂))`,
    /// sums taken items ascending then t ascending.
    pub fn backward(
        &mut self,
        inputs: &[&Tensor<T>],
        grad_outs: &[&Tensor<T>],
        cache: &NormCache<T>,
    ) -> Result<Vec<Tensor<T>>> {
        let count = self.check_inputs(inputs)?;
        if grad_outs.len() != inputs.len() || count != cache.count {
            return Err(Error::Contract(
                "batchnorm backward: batch does not match forward cache".into(),
            ));
        }
        for (x, g) in inputs.iter().zip(grad_outs) {
            if x.shape() != g.shape() {
                return Err(Error::Contract(
                    "batchnorm backward: grad shape mismatch".into(),
                ));
            }
        }
        let c = self.channels();
        let m = T::from_f64(count as f64);

        let mut grad_gamma = vec![T::zero(); c];
        let mut grad_beta = vec![T::zero(); c];
        let mut grad_inputs: Vec<Tensor<T>> = inputs
            .iter()
            .map(|x| Tensor::zeros(x.shape()))
            .collect();

        // Channels are independent; split the output buffers per channel row.
        let mut gi_rows: Vec<Vec<&mut [T]>> = Vec::with_capacity(c);
        {
            // Collect disjoint per-channel row borrows from each item.
            let mut per_item: Vec<std::slice::ChunksMut<'_, T>> = grad_inputs
                .iter_mut()
                .map(|t| {
                    let cols = t.cols();
                    t.data_mut().chunks_mut(cols)
                })
                .collect();
            for _ in 0..c {
                let rows: Vec<&mut [T]> = per_item
                    .iter_mut()
                    .map(|it| it.next().expect("row per channel"))
                    .collect();
                gi_rows.push(rows);
            }
        }

        let tasks: Vec<((&mut T, &mut T), Vec<&mut [T]>)> = grad_gamma
            .iter_mut()
            .zip(grad_beta.iter_mut())
            .zip(gi_rows)
            .collect();
        for_each_indexed(tasks, c * count, |ch, ((gg, gb), mut gi)| {
                let mu = cache.mean[ch];
                let istd = cache.inv_std[ch];
                let gamma = self.gamma.value.data()[ch];

                let mut sum_dy = T::zero();
                let mut sum_dy_xhat = T::zero();
                for (x, g) in inputs.iter().zip(grad_outs) {
                    for (&xv, &gv) in x.row(ch).iter().zip(g.row(ch)) {
                        sum_dy += gv;
                        sum_dy_xhat += gv * (xv - mu) * istd;
                    }
                }
                *gg = sum_dy_xhat;
                *gb = sum_dy;

                let scale = gamma * istd / m;
                for ((x, g), gi_row) in inputs.iter().zip(grad_outs).zip(gi.iter_mut()) {
                    for ((&xv, &gv), o) in x.row(ch).iter().zip(g.row(ch)).zip(gi_row.iter_mut()) {
                        let xhat = (xv - mu) * istd;
                        *o = scale * (m * gv - sum_dy - xhat * sum_dy_xhat);
                    }
                }
        });

        self.gamma
            .accumulate_grad(&Tensor::new(vec![c], grad_gamma)?);
        self.beta.accumulate_grad(&Tensor::new(vec![c], grad_beta)?);
        Ok(grad_inputs)
    }
}

fn apply_affine<T: Scalar>(
    inputs: &[&Tensor<T>],
    mean: &[T],
    inv_std: &[T],
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
) -> Vec<Tensor<T>> {
    inputs
        .iter()
        .map(|x| {
            let c = x.shape()[0];
            let t = x.shape()[1];
            let mut out = Tensor::zeros(&[c, t]);
            chunks_mut_indexed(out.data_mut(), t, c * t, |ch, orow| {
                let g = gamma.data()[ch];
                let b = beta.data()[ch];
                let mu = mean[ch];
                let istd = inv_std[ch];
                for (o, &xv) in orow.iter_mut().zip(x.row(ch)) {
                    *o = g * (xv - mu) * istd + b;
                }
            });
            out
        })
        .collect()
}
