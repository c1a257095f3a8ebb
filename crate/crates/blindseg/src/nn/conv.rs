//! 1-D strided convolution (valid padding) with exact backward pass.
//!
//! Layout: `input [C_in × T]`, `weight [C_out × C_in × k]`, `bias [C_out]`,
//! output `[C_out × T_out]` with `T_out = floor((T − k)/stride) + 1`.
//!
//! The kernel builds an im2row buffer (`patches[t] = the k·C_in input window
//! of output step t`) and reduces each output with a fixed 8-lane chunked
//! dot product. Parallelism is over independent output cells only, so
//! forward results are bitwise identical for any thread count. Backward
//! reduction orders (documented on each gradient): `grad_bias` and
//! `grad_weight` sum over t ascending; `grad_input` sums over output
//! channels ascending, then kernel taps ascending.

use crate::error::{Error, Result};
use crate::nn::par::chunks_mut_indexed;
use crate::tensor::{Scalar, Tensor};

/// `floor((t − k)/stride) + 1`, or `None` when `t < k`.
pub fn conv1d_out_len(t: usize, k: usize, stride: usize) -> Option<usize> {
    if t < k || stride == 0 {
        return None;
    }
    Some((t - k) / stride + 1)
}

const LANES: usize = 8;

/// Dot product with a fixed 8-lane accumulation order.
#[inline]
fn dot_chunked<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); LANES];
    let chunks = a.len() / LANES;
    for i in 0..chunks {
        let pa = &a[i * LANES..(i + 1) * LANES];
        let pb = &b[i * LANES..(i + 1) * LANES];
        for l in 0..LANES {
            acc[l] = acc[l] + pa[l] * pb[l];
        }
    }
    let mut s = T::zero();
    for l in 0..LANES {
        s += acc[l];
    }
    for i in chunks * LANES..a.len() {
        s += a[i] * b[i];
    }
    s
}

#[inline]
fn axpy<T: Scalar>(y: &mut [T], a: T, x: &[T]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * *xi;
    }
}

struct ConvDims {
    c_in: usize,
    c_out: usize,
    k: usize,
    t_in: usize,
    t_out: usize,
}

fn check_dims<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    stride: usize,
) -> Result<ConvDims> {
    if input.shape().len() != 2 {
        return Err(Error::Contract(format!(
            "conv1d input must be [C_in × T], got shape {:?}",
            input.shape()
        )));
    }
    if weight.shape().len() != 3 {
        return Err(Error::Contract(format!(
            "conv1d weight must be [C_out × C_in × k], got shape {:?}",
            weight.shape()
        )));
    }
    if stride == 0 {
        return Err(Error::Contract("conv1d stride must be >= 1".into()));
    }
    let (c_in, t_in) = (input.shape()[0], input.shape()[1]);
    let (c_out, w_cin, k) = (weight.shape()[0], weight.shape()[1], weight.shape()[2]);
    if w_cin != c_in {
        return Err(Error::Contract(format!(
            "conv1d weight expects {} input channels, input has {}",
            w_cin, c_in
        )));
    }
    if let Some(b) = bias {
        if b.shape() != [c_out] {
            return Err(Error::Contract(format!(
                "conv1d bias must be [{}], got shape {:?}",
                c_out,
                b.shape()
            )));
        }
    }
    let t_out = conv1d_out_len(t_in, k, stride)
        .ok_or(Error::InputTooShort { got: t_in, min: k })?;
    Ok(ConvDims {
        c_in,
        c_out,
        k,
        t_in,
        t_out,
    })
}

/// im2row: `patches` has `t_out` rows of length `c_in·k`;
/// `patches[t][c'·k + j] = input[c'][t·stride + j]`.
fn im2row<T: Scalar>(input: &Tensor<T>, k: usize, stride: usize, t_out: usize) -> Vec<T> {
    let c_in = input.shape()[0];
    let row_len = c_in * k;
    let mut patches = vec![T::zero(); t_out * row_len];
    let data = input.data();
    let t_in = input.shape()[1];
    for t in 0..t_out {
        let row = &mut patches[t * row_len..(t + 1) * row_len];
        let base = t * stride;
        for c in 0..c_in {
            row[c * k..(c + 1) * k].copy_from_slice(&data[c * t_in + base..c * t_in + base + k]);
        }
    }
    patches
}

/// Valid (unpadded) 1-D strided convolution.
///
/// `output[c][t] = bias[c] + Σ_{c',j} weight[c][c'][j] · input[c'][t·stride + j]`
pub fn conv1d_forward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
) -> Result<Tensor<T>> {
    let d = check_dims(input, weight, Some(bias), stride)?;
    let row_len = d.c_in * d.k;
    let patches = im2row(input, d.k, stride, d.t_out);

    let mut out = vec![T::zero(); d.c_out * d.t_out];
    let wdata = weight.data();
    let bdata = bias.data();
    let work = d.c_out * d.t_out * row_len;
    // Channel blocks reuse each patch row while it is hot in cache.
    chunks_mut_indexed(&mut out, 8 * d.t_out, work, |blk, out_blk| {
        let c0 = blk * 8;
        for t in 0..d.t_out {
            let prow = &patches[t * row_len..(t + 1) * row_len];
            for (dc, out_row) in out_blk.chunks_mut(d.t_out).enumerate() {
                let c = c0 + dc;
                let wrow = &wdata[c * row_len..(c + 1) * row_len];
                out_row[t] = bdata[c] + dot_chunked(wrow, prow);
            }
        }
    });
    Tensor::new(vec![d.c_out, d.t_out], out)
}

/// Exact gradients of [`conv1d_forward`] with respect to input, weight, bias.
///
/// `grad_bias[c] = Σ_t grad_out[c][t]`.
pub fn conv1d_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    saved_input: &Tensor<T>,
    weight: &Tensor<T>,
    stride: usize,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let d = check_dims(saved_input, weight, None, stride)?;
    if grad_out.shape() != [d.c_out, d.t_out] {
        return Err(Error::Contract(format!(
            "conv1d grad_out shape {:?} does not match expected [{} × {}]",
            grad_out.shape(),
            d.c_out,
            d.t_out
        )));
    }
    let row_len = d.c_in * d.k;
    let patches = im2row(saved_input, d.k, stride, d.t_out);
    let go = grad_out.data();
    let wdata = weight.data();

    // grad_bias[c]: sum over t ascending.
    let mut grad_bias = vec![T::zero(); d.c_out];
    chunks_mut_indexed(&mut grad_bias, 1, d.c_out * d.t_out, |c, gb| {
        let mut s = T::zero();
        for t in 0..d.t_out {
            s += go[c * d.t_out + t];
        }
        gb[0] = s;
    });

    // grad_weight[c] = Σ_t grad_out[c][t] · patches[t]; t ascending.
    let mut grad_weight = vec![T::zero(); d.c_out * row_len];
    let work = d.c_out * d.t_out * row_len;
    chunks_mut_indexed(&mut grad_weight, row_len, work, |c, gw_row| {
        for t in 0..d.t_out {
            let g = go[c * d.t_out + t];
            if g != T::zero() {
                axpy(gw_row, g, &patches[t * row_len..(t + 1) * row_len]);
            }
        }
    });

    // grad wrt patches: gp[t] = Σ_c grad_out[c][t] · weight[c]; c ascending.
    let mut gp = vec![T::zero(); d.t_out * row_len];
    chunks_mut_indexed(&mut gp, row_len, work, |t, row| {
        for c in 0..d.c_out {
            let g = go[c * d.t_out + t];
            if g != T::zero() {
                axpy(row, g, &wdata[c * row_len..(c + 1) * row_len]);
            }
        }
    });

    // col2im scatter back to input positions: for each input channel the
    // accumulation order is t ascending, then kernel tap j ascending.
    let mut grad_input = vec![T::zero(); d.c_in * d.t_in];
    chunks_mut_indexed(&mut grad_input, d.t_in, d.c_in * d.t_out * d.k, |c, gi_row| {
        for t in 0..d.t_out {
            let prow = &gp[t * row_len + c * d.k..t * row_len + (c + 1) * d.k];
            let base = t * stride;
            for j in 0..d.k {
                gi_row[base + j] += prow[j];
            }
        }
    });

    Ok((
        Tensor::new(vec![d.c_in, d.t_in], grad_input)?,
        Tensor::new(vec![d.c_out, d.c_in, d.k], grad_weight)?,
        Tensor::new(vec![d.c_out], grad_bias)?,
    ))
}
