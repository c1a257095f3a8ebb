//! Raw-waveform frame encoder: five blocks of strided 1-D convolution, each
//! followed by batch normalization and a leaky ReLU, then a linear projection
//! to the embedding dimension. There is no context/aggregation network.
//!
//! With the default kernels (10, 8, 4, 4, 4) and strides (5, 4, 2, 2, 2) at
//! 16 kHz, consecutive frames are one hop of 160 samples (10 ms) apart and
//! each frame sees a 465-sample (~29 ms) receptive field.

use rand::Rng;

use crate::corpus::Waveform;
use crate::error::{Error, Result};
use crate::nn::norm::{BatchNorm, NormCache};
use crate::nn::{conv1d_backward, conv1d_forward, conv1d_out_len, leaky_relu, leaky_relu_backward, linear_backward, linear_forward};
use crate::rng::derive_rng;
use crate::tensor::{Parameter, Scalar, Tensor};

pub const DEFAULT_KERNELS: [usize; 5] = [10, 8, 4, 4, 4];
pub const DEFAULT_STRIDES: [usize; 5] = [5, 4, 2, 2, 2];
/// Samples between consecutive frames (product of the strides).
pub const HOP_SAMPLES: usize = 160;
/// Input samples influencing one frame; also the shortest encodable input.
pub const RECEPTIVE_FIELD: usize = 465;
pub const SAMPLE_RATE: u32 = 16000;

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    pub kernel_sizes: Vec<usize>,
    pub strides: Vec<usize>,
    /// Channels per convolution layer.
    pub channels: usize,
    /// Embedding width N of the final projection.
    pub projection_dim: usize,
    pub leaky_slope: f64,
    pub sample_rate: u32,
    pub bn_momentum: f64,
    pub bn_eps: f64,
    /// Constant added to every emitted boundary time (frame registration).
    pub time_offset: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            kernel_sizes: DEFAULT_KERNELS.to_vec(),
            strides: DEFAULT_STRIDES.to_vec(),
            channels: 256,
            projection_dim: 64,
            leaky_slope: 0.01,
            sample_rate: SAMPLE_RATE,
            bn_momentum: 0.1,
            bn_eps: 1e-5,
            time_offset: 0.0,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        let cfg = |msg: String| Err(Error::Config(msg));
        if self.kernel_sizes.len() != 5 || self.strides.len() != 5 {
            return cfg(format!(
                "encoder has 5 conv blocks; got {} kernels / {} strides",
                self.kernel_sizes.len(),
                self.strides.len()
            ));
        }
        if self.kernel_sizes.iter().any(|&k| k == 0) {
            return cfg("kernel sizes must be >= 1".into());
        }
        if self.strides.iter().any(|&s| s == 0) {
            return cfg("strides must be >= 1".into());
        }
        let hop: usize = self.strides.iter().product();
        if hop != HOP_SAMPLES {
            return cfg(format!(
                "strides must multiply to the {HOP_SAMPLES}-sample hop, got {hop}"
            ));
        }
        if self.sample_rate != SAMPLE_RATE {
            return cfg(format!(
                "toolkit is fixed at {SAMPLE_RATE} Hz, got {}",
                self.sample_rate
            ));
        }
        if self.channels == 0 || self.projection_dim == 0 {
            return cfg("channels and projection_dim must be >= 1".into());
        }
        if self.leaky_slope < 0.0 {
            return cfg("leaky_slope must be >= 0".into());
        }
        if self.bn_eps <= 0.0 {
            return cfg("bn_eps must be > 0".into());
        }
        if !(0.0..=1.0).contains(&self.bn_momentum) {
            return cfg("bn_momentum must lie in [0, 1]".into());
        }
        Ok(())
    }

    pub fn hop_samples(&self) -> usize {
        self.strides.iter().product()
    }

    /// `1 + Σ_l (k_l − 1) · Π_{j<l} s_j`
    pub fn receptive_field(&self) -> usize {
        let mut rf = 1usize;
        let mut jump = 1usize;
        for (k, s) in self.kernel_sizes.iter().zip(&self.strides) {
            rf += (k - 1) * jump;
            jump *= s;
        }
        rf
    }

    pub fn min_input_len(&self) -> usize {
        self.receptive_field()
    }

    /// Frames produced for an input of `t` samples: iterated
    /// `floor((T − k)/s) + 1` over the five layers.
    pub fn out_length(&self, t: usize) -> Result<usize> {
        let min = self.min_input_len();
        if t < min {
            return Err(Error::InputTooShort { got: t, min });
        }
        let mut len = t;
        for (k, s) in self.kernel_sizes.iter().zip(&self.strides) {
            len = conv1d_out_len(len, *k, *s).ok_or(Error::InputTooShort { got: t, min })?;
        }
        Ok(len)
    }
}

/// Frames produced for `t` samples under the default architecture.
pub fn out_length(t: usize) -> Result<usize> {
    EncoderConfig::default().out_length(t)
}

/// The encoder output: `L` frames of `N`-dimensional embeddings (row-major),
/// with the hop/window registration metadata needed to map frames to time.
/// Rows are the raw projection outputs; nothing is L2-normalized here.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameEmbeddings {
    data: Vec<f32>,
    frames: usize,
    dim: usize,
    pub hop_samples: usize,
    pub window_samples: usize,
    pub sample_rate: u32,
    pub time_offset: f64,
}

impl FrameEmbeddings {
    pub fn num_frames(&self) -> usize {
        self.frames
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn frame(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Row-major `L × N` backing storage.
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub(crate) fn from_frame_major(
        data: Vec<f32>,
        frames: usize,
        dim: usize,
        config: &EncoderConfig,
    ) -> Self {
        debug_assert_eq!(data.len(), frames * dim);
        FrameEmbeddings {
            data,
            frames,
            dim,
            hop_samples: config.hop_samples(),
            window_samples: config.receptive_field(),
            sample_rate: config.sample_rate,
            time_offset: config.time_offset,
        }
    }
}

/// Training metadata carried inside a checkpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainMeta {
    pub epoch: u32,
    pub best_val_loss: f32,
    pub seed: u64,
}

impl Default for TrainMeta {
    fn default() -> Self {
        TrainMeta {
            epoch: 0,
            best_val_loss: f32::INFINITY,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct ConvLayer<T> {
    pub weight: Parameter<T>, // [C_out × C_in × k]
    pub bias: Parameter<T>,   // [C_out]
    pub stride: usize,
}

/// Encoder state: configuration plus every learned tensor.
///
/// Eval-mode encoding takes `&self` and is safe to share across threads;
/// train-mode passes mutate batch-norm running statistics and therefore
/// require exclusive access (one training step at a time).
#[derive(Debug, Clone)]
pub struct Encoder<T: Scalar> {
    pub config: EncoderConfig,
    pub(crate) convs: Vec<ConvLayer<T>>,
    pub(crate) norms: Vec<BatchNorm<T>>,
    pub(crate) proj_weight: Parameter<T>, // [N × C]
    pub(crate) proj_bias: Parameter<T>,   // [N]
    pub meta: TrainMeta,
}

pub type EncoderState = Encoder<f32>;

/// Saved activations from a training-mode batch forward pass.
pub(crate) struct Trace<T> {
    pub(crate) conv_in: Vec<Vec<Tensor<T>>>, // input to conv l, per item
    pub(crate) conv_out: Vec<Vec<Tensor<T>>>, // conv output (batch-norm input)
    pub(crate) bn_out: Vec<Vec<Tensor<T>>>, // batch-norm output (leaky input)
    pub(crate) bn_caches: Vec<NormCache<T>>,
    pub(crate) proj_in: Vec<Tensor<T>>,
}

impl<T: Scalar> Encoder<T> {
    /// Deterministically initialize all parameters from `seed`: every tensor
    /// is uniform in ±sqrt(1/fan_in) for its layer, drawn from a named
    /// init stream.
    pub fn init(config: EncoderConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut enc = Self::zeroed(config)?;
        enc.meta.seed = seed;
        let n_layers = enc.convs.len();
        for l in 0..n_layers {
            let mut rng = derive_rng(seed, "init", l as u64);
            let fan_in = enc.convs[l].weight.value.shape()[1] * enc.convs[l].weight.value.shape()[2];
            let bound = (1.0 / fan_in as f64).sqrt();
            for v in enc.convs[l].weight.value.data_mut() {
                *v = T::from_f64(rng.gen_range(-bound..bound));
            }
            for v in enc.convs[l].bias.value.data_mut() {
                *v = T::from_f64(rng.gen_range(-bound..bound));
            }
        }
        let mut rng = derive_rng(seed, "init", n_layers as u64);
        let fan_in = enc.proj_weight.value.shape()[1];
        let bound = (1.0 / fan_in as f64).sqrt();
        for v in enc.proj_weight.value.data_mut() {
            *v = T::from_f64(rng.gen_range(-bound..bound));
        }
        for v in enc.proj_bias.value.data_mut() {
            *v = T::from_f64(rng.gen_range(-bound..bound));
        }
        Ok(enc)
    }

    /// All-zero parameter skeleton with the right shapes (used by init and
    /// by the checkpoint loader).
    pub(crate) fn zeroed(config: EncoderConfig) -> Result<Self> {
        config.validate()?;
        let mut convs = Vec::with_capacity(config.kernel_sizes.len());
        let mut norms = Vec::with_capacity(config.kernel_sizes.len());
        let mut c_in = 1usize;
        for (k, s) in config.kernel_sizes.iter().zip(&config.strides) {
            convs.push(ConvLayer {
                weight: Parameter::new(Tensor::zeros(&[config.channels, c_in, *k])),
                bias: Parameter::new(Tensor::zeros(&[config.channels])),
                stride: *s,
            });
            norms.push(BatchNorm::new(
                config.channels,
                config.bn_momentum,
                config.bn_eps,
            ));
            c_in = config.channels;
        }
        let proj_weight = Parameter::new(Tensor::zeros(&[config.projection_dim, config.channels]));
        let proj_bias = Parameter::new(Tensor::zeros(&[config.projection_dim]));
        Ok(Encoder {
            config,
            convs,
            norms,
            proj_weight,
            proj_bias,
            meta: TrainMeta::default(),
        })
    }

    /// Named trainable parameters in a fixed order.
    pub fn params_mut(&mut self) -> Vec<(String, &mut Parameter<T>)> {
        let mut out: Vec<(String, &mut Parameter<T>)> = Vec::new();
        for (l, conv) in self.convs.iter_mut().enumerate() {
            out.push((format!("conv{l}.weight"), &mut conv.weight));
            out.push((format!("conv{l}.bias"), &mut conv.bias));
        }
        for (l, norm) in self.norms.iter_mut().enumerate() {
            out.push((format!("norm{l}.gamma"), &mut norm.gamma));
            out.push((format!("norm{l}.beta"), &mut norm.beta));
        }
        out.push(("proj.weight".to_string(), &mut self.proj_weight));
        out.push(("proj.bias".to_string(), &mut self.proj_bias));
        out
    }

    pub fn zero_grads(&mut self) {
        for (_, p) in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Number of trainable scalars.
    pub fn trainable_param_count(&self) -> usize {
        let mut n = 0;
        for conv in &self.convs {
            n += conv.weight.value.numel() + conv.bias.value.numel();
        }
        for norm in &self.norms {
            n += norm.gamma.value.numel() + norm.beta.value.numel();
        }
        n + self.proj_weight.value.numel() + self.proj_bias.value.numel()
    }

    /// Trainable scalars plus batch-norm running statistics.
    pub fn state_param_count(&self) -> usize {
        let running: usize = self
            .norms
            .iter()
            .map(|n| n.running_mean.numel() + n.running_var.numel())
            .sum();
        self.trainable_param_count() + running
    }

    /// Copy into another scalar type (values and running statistics carry
    /// over; optimizer moments reset).
    pub fn cast<U: Scalar>(&self) -> Encoder<U> {
        let convs = self
            .convs
            .iter()
            .map(|c| ConvLayer {
                weight: c.weight.cast_value(),
                bias: c.bias.cast_value(),
                stride: c.stride,
            })
            .collect();
        let norms = self
            .norms
            .iter()
            .map(|n| {
                let mut bn = BatchNorm::new(n.channels(), n.momentum, n.eps);
                bn.gamma = n.gamma.cast_value();
                bn.beta = n.beta.cast_value();
                bn.running_mean = n.running_mean.cast();
                bn.running_var = n.running_var.cast();
                bn.batches_tracked = n.batches_tracked;
                bn
            })
            .collect();
        Encoder {
            config: self.config.clone(),
            convs,
            norms,
            proj_weight: self.proj_weight.cast_value(),
            proj_bias: self.proj_bias.cast_value(),
            meta: self.meta,
        }
    }

    fn slope(&self) -> T {
        T::from_f64(self.config.leaky_slope)
    }

    /// Eval-mode forward for one `[1 × T]` item; returns `[N × L]`.
    pub(crate) fn forward_eval(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut cur = x.clone();
        for (conv, norm) in self.convs.iter().zip(&self.norms) {
            let c = conv1d_forward(&cur, &conv.weight.value, &conv.bias.value, conv.stride)?;
            let b = norm.forward_eval(&c)?;
            cur = leaky_relu(&b, self.slope());
        }
        linear_forward(&cur, &self.proj_weight.value, &self.proj_bias.value)
    }

    /// Train-mode forward over a batch of `[1 × T_b]` items. Batch-norm
    /// statistics pool over the whole batch; running stats are updated.
    pub(crate) fn forward_train_batch(
        &mut self,
        items: Vec<Tensor<T>>,
    ) -> Result<(Vec<Tensor<T>>, Trace<T>)> {
        let n_layers = self.convs.len();
        let mut conv_in = Vec::with_capacity(n_layers);
        let mut conv_out = Vec::with_capacity(n_layers);
        let mut bn_out = Vec::with_capacity(n_layers);
        let mut bn_caches = Vec::with_capacity(n_layers);

        let mut current = items;
        for l in 0..n_layers {
            let conv = &self.convs[l];
            let couts = current
                .iter()
                .map(|x| conv1d_forward(x, &conv.weight.value, &conv.bias.value, conv.stride))
                .collect::<Result<Vec<_>>>()?;
            let refs: Vec<&Tensor<T>> = couts.iter().collect();
            let (bouts, cache) = self.norms[l].forward_train(&refs)?;
            let acts: Vec<Tensor<T>> = bouts.iter().map(|b| leaky_relu(b, self.slope())).collect();
            conv_in.push(std::mem::replace(&mut current, acts));
            conv_out.push(couts);
            bn_out.push(bouts);
            bn_caches.push(cache);
        }
        let outs = current
            .iter()
            .map(|x| linear_forward(x, &self.proj_weight.value, &self.proj_bias.value))
            .collect::<Result<Vec<_>>>()?;
        Ok((
            outs,
            Trace {
                conv_in,
                conv_out,
                bn_out,
                bn_caches,
                proj_in: current,
            },
        ))
    }

    /// Backward through a traced batch; accumulates parameter gradients.
    /// Items are reduced in ascending order at every parameter.
    pub(crate) fn backward_batch(
        &mut self,
        trace: &Trace<T>,
        grad_outs: &[Tensor<T>],
    ) -> Result<()> {
        let n_items = grad_outs.len();
        if n_items != trace.proj_in.len() {
            return Err(Error::Contract(
                "backward batch size does not match trace".into(),
            ));
        }
        let mut grads: Vec<Tensor<T>> = Vec::with_capacity(n_items);
        for (i, go) in grad_outs.iter().enumerate() {
            let (gi, gw, gb) = linear_backward(go, &trace.proj_in[i], &self.proj_weight.value)?;
            self.proj_weight.accumulate_grad(&gw);
            self.proj_bias.accumulate_grad(&gb);
            grads.push(gi);
        }
        for l in (0..self.convs.len()).rev() {
            let slope = self.slope();
            for (g, b) in grads.iter_mut().zip(&trace.bn_out[l]) {
                *g = leaky_relu_backward(g, b, slope);
            }
            let xin: Vec<&Tensor<T>> = trace.conv_out[l].iter().collect();
            let gout: Vec<&Tensor<T>> = grads.iter().collect();
            grads = self.norms[l].backward(&xin, &gout, &trace.bn_caches[l])?;
            let mut next = Vec::with_capacity(n_items);
            for (i, g) in grads.iter().enumerate() {
                let (gi, gw, gb) = conv1d_backward(
                    g,
                    &trace.conv_in[l][i],
                    &self.convs[l].weight.value,
                    self.convs[l].stride,
                )?;
                self.convs[l].weight.accumulate_grad(&gw);
                self.convs[l].bias.accumulate_grad(&gb);
                next.push(gi);
            }
            grads = next;
        }
        Ok(())
    }

    fn waveform_tensor(&self, x: &Waveform) -> Result<Tensor<T>> {
        if x.sample_rate != self.config.sample_rate {
            return Err(Error::SampleRate {
                got: x.sample_rate,
                expected: self.config.sample_rate,
            });
        }
        // length check (InputTooShort names the 465-sample minimum)
        self.config.out_length(x.len())?;
        let data = x.samples.iter().map(|&s| T::from_f64(f64::from(s))).collect();
        Tensor::new(vec![1, x.len()], data)
    }
}

impl EncoderState {
    /// Encode a waveform in eval mode. Deterministic: repeated calls return
    /// bitwise-identical embeddings.
    pub fn encode(&self, x: &Waveform) -> Result<FrameEmbeddings> {
        let input = self.waveform_tensor(x)?;
        let out = self.forward_eval(&input)?; // [N × L]
        let t = out.transposed2(); // [L × N]
        Ok(FrameEmbeddings::from_frame_major(
            t.data().to_vec(),
            t.rows(),
            t.cols(),
            &self.config,
        ))
    }

    /// Encode in train mode (updates batch-norm running statistics).
    pub fn encode_train(&mut self, x: &Waveform) -> Result<FrameEmbeddings> {
        let input = self.waveform_tensor(x)?;
        let (outs, _) = self.forward_train_batch(vec![input])?;
        let t = outs[0].transposed2();
        Ok(FrameEmbeddings::from_frame_major(
            t.data().to_vec(),
            t.rows(),
            t.cols(),
            &self.config,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> EncoderConfig {
        EncoderConfig {
            channels: 8,
            projection_dim: 4,
            ..EncoderConfig::default()
        }
    }

    fn noise_wave(n: usize, seed: u64) -> Waveform {
        let mut rng = derive_rng(seed, "wave", 0);
        Waveform {
            samples: (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect(),
            sample_rate: 16000,
        }
    }

    #[test]
    fn out_length_examples() {
        assert_eq!(out_length(16000).unwrap(), 98);
        assert_eq!(out_length(465).unwrap(), 1);
        assert_eq!(out_length(32000).unwrap(), 198);
        assert!(matches!(
            out_length(464),
            Err(Error::InputTooShort { min: 465, .. })
        ));
    }

    #[test]
    fn receptive_field_and_hop_match_architecture() {
        let c = EncoderConfig::default();
        assert_eq!(c.receptive_field(), RECEPTIVE_FIELD);
        assert_eq!(c.hop_samples(), HOP_SAMPLES);
    }

    #[test]
    fn out_length_monotone_and_stepped_by_hop() {
        let c = EncoderConfig::default();
        let mut prev = c.out_length(465).unwrap();
        for t in 466..2000 {
            let l = c.out_length(t).unwrap();
            assert!(l >= prev);
            prev = l;
        }
        for extra in 0..8 {
            let l = c.out_length(465 + extra * 160).unwrap();
            assert_eq!(l, 1 + extra);
        }
    }

    #[test]
    fn same_seed_same_parameters_different_seed_differs() {
        let a = Encoder::<f32>::init(small_config(), 11).unwrap();
        let b = Encoder::<f32>::init(small_config(), 11).unwrap();
        let c = Encoder::<f32>::init(small_config(), 12).unwrap();
        let flat = |e: &Encoder<f32>| -> Vec<f32> {
            let mut v = Vec::new();
            let mut e = e.clone();
            for (_, p) in e.params_mut() {
                v.extend_from_slice(p.value.data());
            }
            v
        };
        assert_eq!(flat(&a), flat(&b));
        assert_ne!(flat(&a), flat(&c));
    }

    #[test]
    fn default_parameter_count_regression() {
        let enc = Encoder::<f32>::zeroed(EncoderConfig::default()).unwrap();
        // conv weights (2560 + 524288 + 3·262144) + conv biases (5·256)
        // + bn gamma/beta (5·512) + projection (16384 + 64)
        assert_eq!(enc.trainable_param_count(), 1_333_568);
        // plus running mean/var (5·512)
        assert_eq!(enc.state_param_count(), 1_336_128);
    }

    #[test]
    fn encode_shapes_and_determinism() {
        let enc = Encoder::<f32>::init(small_config(), 5).unwrap();
        let w = noise_wave(16000, 1);
        let z1 = enc.encode(&w).unwrap();
        assert_eq!(z1.num_frames(), 98);
        assert_eq!(z1.dim(), 4);
        let z2 = enc.encode(&w).unwrap();
        assert_eq!(z1.data(), z2.data());

        let one = enc.encode(&noise_wave(465, 2)).unwrap();
        assert_eq!(one.num_frames(), 1);
    }

    #[test]
    fn encode_rejects_short_input_and_wrong_rate() {
        let enc = Encoder::<f32>::init(small_config(), 5).unwrap();
        let brief = Waveform {
            samples: vec![0.0; 464],
            sample_rate: 16000,
        };
        assert!(matches!(
            enc.encode(&brief),
            Err(Error::InputTooShort { min: 465, .. })
        ));
        let wrong = Waveform {
            samples: vec![0.0; 16000],
            sample_rate: 22050,
        };
        assert!(matches!(enc.encode(&wrong), Err(Error::SampleRate { .. })));
    }

    #[test]
    fn hop_invariance_shift_by_one_hop_shifts_rows() {
        let enc = Encoder::<f32>::init(small_config(), 5).unwrap();
        let w = noise_wave(16000, 3);
        let shifted = Waveform {
            samples: w.samples[HOP_SAMPLES..].to_vec(),
            sample_rate: 16000,
        };
        let z = enc.encode(&w).unwrap();
        let zs = enc.encode(&shifted).unwrap();
        assert_eq!(zs.num_frames(), z.num_frames() - 1);
        for i in 0..zs.num_frames() {
            assert_eq!(zs.frame(i), z.frame(i + 1), "row {i} not bitwise equal");
        }
    }

    #[test]
    fn locality_outside_receptive_field_leaves_frame_unchanged() {
        let enc = Encoder::<f32>::init(small_config(), 5).unwrap();
        let w = noise_wave(16000, 4);
        let mut touched = w.clone();
        // frame 0 sees [0, 465); change everything from 465 on
        for s in touched.samples[RECEPTIVE_FIELD..].iter_mut() {
            *s = -*s + 0.05;
        }
        let z = enc.encode(&w).unwrap();
        let zt = enc.encode(&touched).unwrap();
        assert_eq!(z.frame(0), zt.frame(0));
        assert_ne!(z.frame(1), zt.frame(1));
    }
}
