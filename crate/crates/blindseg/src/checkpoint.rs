//! Versioned binary checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic            8 bytes  "BSEGCKPT"
//! format_version   u32
//! config           n_layers:u32, kernels:[u32], strides:[u32],
//!                  channels:u32, projection_dim:u32, leaky_slope:f64,
//!                  sample_rate:u32, bn_momentum:f64, bn_eps:f64,
//!                  time_offset:f64
//! meta             epoch:u32, best_val_loss:f32, seed:u64
//! norm counters    n_layers × batches_tracked:u64
//! tensor count     u32
//! tensor record    name_len:u32, name:utf8, dtype:u8 (0 = f32),
//!                  ndim:u32, dims:[u32], payload: numel × f32
//! ```
//!
//! Tensors are written row-major. `load(save(state))` reproduces encoder
//! outputs bitwise; an unknown version or any structural damage is an
//! explicit error, never a silent reinterpretation.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::encoder::{Encoder, EncoderConfig, EncoderState, TrainMeta};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"BSEGCKPT";
pub const FORMAT_VERSION: u32 = 1;
const DTYPE_F32: u8 = 0;

fn ckpt_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Checkpoint {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

/// Named tensors of an encoder in a fixed order: per layer the conv weight
/// and bias, then the norm affine and running statistics; finally the
/// projection.
fn named_tensors(enc: &EncoderState) -> Vec<(String, &Tensor<f32>)> {
    let mut out: Vec<(String, &Tensor<f32>)> = Vec::new();
    for (l, conv) in enc.convs.iter().enumerate() {
        out.push((format!("conv{l}.weight"), &conv.weight.value));
        out.push((format!("conv{l}.bias"), &conv.bias.value));
    }
    for (l, norm) in enc.norms.iter().enumerate() {
        out.push((format!("norm{l}.gamma"), &norm.gamma.value));
        out.push((format!("norm{l}.beta"), &norm.beta.value));
        out.push((format!("norm{l}.running_mean"), &norm.running_mean));
        out.push((format!("norm{l}.running_var"), &norm.running_var));
    }
    out.push(("proj.weight".to_string(), &enc.proj_weight.value));
    out.push(("proj.bias".to_string(), &enc.proj_bias.value));
    out
}

pub fn save_checkpoint(enc: &EncoderState, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());

    let c = &enc.config;
    buf.extend_from_slice(&(c.kernel_sizes.len() as u32).to_le_bytes());
    for &k in &c.kernel_sizes {
        buf.extend_from_slice(&(k as u32).to_le_bytes());
    }
    for &s in &c.strides {
        buf.extend_from_slice(&(s as u32).to_le_bytes());
    }
    buf.extend_from_slice(&(c.channels as u32).to_le_bytes());
    buf.extend_from_slice(&(c.projection_dim as u32).to_le_bytes());
    buf.extend_from_slice(&c.leaky_slope.to_le_bytes());
    buf.extend_from_slice(&c.sample_rate.to_le_bytes());
    buf.extend_from_slice(&c.bn_momentum.to_le_bytes());
    buf.extend_from_slice(&c.bn_eps.to_le_bytes());
    buf.extend_from_slice(&c.time_offset.to_le_bytes());

    buf.extend_from_slice(&enc.meta.epoch.to_le_bytes());
    buf.extend_from_slice(&enc.meta.best_val_loss.to_le_bytes());
    buf.extend_from_slice(&enc.meta.seed.to_le_bytes());

    for norm in &enc.norms {
        buf.extend_from_slice(&norm.batches_tracked.to_le_bytes());
    }

    let tensors = named_tensors(enc);
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.push(DTYPE_F32);
        buf.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }

    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(ckpt_err(
                self.path,
                format!(
                    "unexpected end of file at byte {} (wanted {} more)",
                    self.pos, n
                ),
            ));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<EncoderState> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader {
        buf: &bytes,
        pos: 0,
        path,
    };

    if r.take(8)? != MAGIC {
        return Err(ckpt_err(path, "bad magic; not a checkpoint file"));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(ckpt_err(
            path,
            format!("unsupported format version {version} (this build reads {FORMAT_VERSION})"),
        ));
    }

    let n_layers = r.u32()? as usize;
    if n_layers > 64 {
        return Err(ckpt_err(path, format!("implausible layer count {n_layers}")));
    }
    let mut kernel_sizes = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        kernel_sizes.push(r.u32()? as usize);
    }
    let mut strides = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        strides.push(r.u32()? as usize);
    }
    let config = EncoderConfig {
        kernel_sizes,
        strides,
        channels: r.u32()? as usize,
        projection_dim: r.u32()? as usize,
        leaky_slope: r.f64()?,
        sample_rate: r.u32()?,
        bn_momentum: r.f64()?,
        bn_eps: r.f64()?,
        time_offset: r.f64()?,
    };
    let meta = TrainMeta {
        epoch: r.u32()?,
        best_val_loss: r.f32()?,
        seed: r.u64()?,
    };
    let mut counters = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        counters.push(r.u64()?);
    }

    let count = r.u32()? as usize;
    let mut tensors: BTreeMap<String, Tensor<f32>> = BTreeMap::new();
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        if name_len > 4096 {
            return Err(ckpt_err(path, "implausible tensor name length"));
        }
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| ckpt_err(path, "tensor name is not UTF-8"))?
            .to_string();
        let dtype = r.u8()?;
        if dtype != DTYPE_F32 {
            return Err(ckpt_err(path, format!("unknown dtype tag {dtype} for '{name}'")));
        }
        let ndim = r.u32()? as usize;
        if ndim > 8 {
            return Err(ckpt_err(path, format!("implausible rank {ndim} for '{name}'")));
        }
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.u32()? as usize);
        }
        let numel: usize = shape.iter().product();
        let mut data = Vec::with_capacity(numel);
        let raw = r.take(numel * 4)?;
        for c in raw.chunks_exact(4) {
            data.push(f32::from_le_bytes(c.try_into().unwrap()));
        }
        if tensors
            .insert(name.clone(), Tensor::new(shape, data)?)
            .is_some()
        {
            return Err(ckpt_err(path, format!("duplicate tensor '{name}'")));
        }
    }
    if r.pos != bytes.len() {
        return Err(ckpt_err(path, "trailing bytes after the last tensor"));
    }

    let mut enc = Encoder::<f32>::zeroed(config).map_err(|e| match e {
        Error::Config(msg) => ckpt_err(path, format!("invalid stored config: {msg}")),
        other => other,
    })?;
    enc.meta = meta;
    if counters.len() != enc.norms.len() {
        return Err(ckpt_err(path, "norm counter count does not match layers"));
    }
    for (norm, c) in enc.norms.iter_mut().zip(counters) {
        norm.batches_tracked = c;
    }

    let mut fill = |name: &str, dst: &mut Tensor<f32>| -> Result<()> {
        let t = tensors
            .remove(name)
            .ok_or_else(|| ckpt_err(path, format!("missing tensor '{name}'")))?;
        if t.shape() != dst.shape() {
            return Err(ckpt_err(
                path,
                format!(
                    "tensor '{name}' has shape {:?}, config expects {:?}",
                    t.shape(),
                    dst.shape()
                ),
            ));
        }
        *dst = t;
        Ok(())
    };
    for l in 0..enc.convs.len() {
        let mut w = Tensor::zeros(enc.convs[l].weight.value.shape());
        fill(&format!("conv{l}.weight"), &mut w)?;
        enc.convs[l].weight.value = w;
        let mut b = Tensor::zeros(enc.convs[l].bias.value.shape());
        fill(&format!("conv{l}.bias"), &mut b)?;
        enc.convs[l].bias.value = b;
    }
    for l in 0..enc.norms.len() {
        let mut g = Tensor::zeros(enc.norms[l].gamma.value.shape());
        fill(&format!("norm{l}.gamma"), &mut g)?;
        enc.norms[l].gamma.value = g;
        let mut b = Tensor::zeros(enc.norms[l].beta.value.shape());
        fill(&format!("norm{l}.beta"), &mut b)?;
        enc.norms[l].beta.value = b;
        let mut rm = Tensor::zeros(enc.norms[l].running_mean.shape());
        fill(&format!("norm{l}.running_mean"), &mut rm)?;
        enc.norms[l].running_mean = rm;
        let mut rv = Tensor::zeros(enc.norms[l].running_var.shape());
        fill(&format!("norm{l}.running_var"), &mut rv)?;
        enc.norms[l].running_var = rv;
    }
    let mut pw = Tensor::zeros(enc.proj_weight.value.shape());
    fill("proj.weight", &mut pw)?;
    enc.proj_weight.value = pw;
    let mut pb = Tensor::zeros(enc.proj_bias.value.shape());
    fill("proj.bias", &mut pb)?;
    enc.proj_bias.value = pb;

    if let Some(extra) = tensors.keys().next() {
        return Err(ckpt_err(path, format!("unexpected tensor '{extra}'")));
    }
    Ok(enc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Waveform;
    use crate::rng::derive_rng;
    use rand::Rng;

    fn small_encoder(seed: u64) -> EncoderState {
        let config = EncoderConfig {
            channels: 6,
            projection_dim: 3,
            ..EncoderConfig::default()
        };
        let mut enc = Encoder::<f32>::init(config, seed).unwrap();
        // make running stats nontrivial
        let mut rng = derive_rng(seed, "ckpt-wave", 0);
        let w = Waveform {
            samples: (0..2000).map(|_| rng.gen_range(-0.5..0.5)).collect(),
            sample_rate: 16000,
        };
        enc.encode_train(&w).unwrap();
        enc
    }

    #[test]
    fn round_trip_reproduces_encode_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let enc = small_encoder(1);
        save_checkpoint(&enc, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.meta, enc.meta);

        let mut rng = derive_rng(2, "ckpt-wave", 1);
        let w = Waveform {
            samples: (0..3000).map(|_| rng.gen_range(-0.5..0.5)).collect(),
            sample_rate: 16000,
        };
        let a = enc.encode(&w).unwrap();
        let b = loaded.encode(&w).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn truncated_file_is_a_load_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&small_encoder(3), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        for cut in [7usize, 40, bytes.len() / 2, bytes.len() - 3] {
            std::fs::write(&path, &bytes[..cut]).unwrap();
            assert!(
                matches!(load_checkpoint(&path), Err(Error::Checkpoint { .. })),
                "cut at {cut} did not error"
            );
        }
    }

    #[test]
    fn version_mismatch_is_explicit() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&small_encoder(4), &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[8] = 99; // version field
        std::fs::write(&path, &bytes).unwrap();
        let msg = load_checkpoint(&path).unwrap_err().to_string();
        assert!(msg.contains("version"), "{msg}");
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        std::fs::write(&path, b"NOTACKPTxxxxxxxxxxxx").unwrap();
        let msg = load_checkpoint(&path).unwrap_err().to_string();
        assert!(msg.contains("magic"), "{msg}");
    }

    #[test]
    fn narrower_projection_loads_and_mismatched_dims_reject() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let config = EncoderConfig {
            channels: 6,
            projection_dim: 32,
            ..EncoderConfig::default()
        };
        let enc = Encoder::<f32>::init(config, 5).unwrap();
        save_checkpoint(&enc, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.config.projection_dim, 32);

        // corrupt the stored projection width so tensors disagree with it
        let mut bytes = std::fs::read(&path).unwrap();
        // projection_dim is at offset 8 (magic) + 4 (version) + 4 (n_layers)
        // + 5·4 (kernels) + 5·4 (strides) + 4 (channels) = 60
        let off = 60;
        assert_eq!(u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()), 32);
        bytes[off..off + 4].copy_from_slice(&16u32.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        let msg = load_checkpoint(&path).unwrap_err().to_string();
        assert!(msg.contains("shape"), "{msg}");
    }

    #[test]
    fn missing_tensor_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let enc = small_encoder(6);
        save_checkpoint(&enc, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        // drop the tensor count by one and strip the last record (proj.bias)
        let needle = b"proj.bias";
        let at = bytes
            .windows(needle.len())
            .rposition(|w| w == needle)
            .unwrap();
        let rec_start = at - 4; // name_len
        let mut cut = bytes[..rec_start].to_vec();
        // tensor count sits right after the norm counters; recompute offset
        // by scanning from the end of the meta block
        let count_off = 8 + 4 + 4 + 5 * 4 + 5 * 4 + 4 + 4 + 8 + 4 + 8 + 8 + 8 + (4 + 4 + 8) + 5 * 8;
        let old = u32::from_le_bytes(bytes[count_off..count_off + 4].try_into().unwrap());
        cut[count_off..count_off + 4].copy_from_slice(&(old - 1).to_le_bytes());
        std::fs::write(&path, &cut).unwrap();
        let msg = load_checkpoint(&path).unwrap_err().to_string();
        assert!(msg.contains("proj.bias"), "{msg}");
    }
}
