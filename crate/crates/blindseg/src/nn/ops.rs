//! Elementwise activation and the fully connected projection.

use crate::error::{Error, Result};
use crate::nn::par::chunks_mut_indexed;
use crate::tensor::{Scalar, Tensor};

/// `x` if `x >= 0`, else `slope·x`, elementwise.
pub fn leaky_relu<T: Scalar>(input: &Tensor<T>, slope: T) -> Tensor<T> {
    let data = input
        .data()
        .iter()
        .map(|&x| if x >= T::zero() { x } else { slope * x })
        .collect();
    Tensor::new(input.shape().to_vec(), data).expect("shape preserved")
}

/// Backward of [`leaky_relu`]: multiplies by 1 where the saved input was
/// nonnegative, by `slope` elsewhere.
pub fn leaky_relu_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    saved_input: &Tensor<T>,
    slope: T,
) -> Tensor<T> {
    debug_assert_eq!(grad_out.shape(), saved_input.shape());
    let data = grad_out
        .data()
        .iter()
        .zip(saved_input.data())
        .map(|(&g, &x)| if x >= T::zero() { g } else { slope * g })
        .collect();
    Tensor::new(grad_out.shape().to_vec(), data).expect("shape preserved")
}

fn check_linear<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
) -> Result<(usize, usize, usize)> {
    if input.shape().len() != 2 || weight.shape().len() != 2 {
        return Err(Error::Contract(format!(
            "linear expects 2-D input and weight, got {:?} and {:?}",
            input.shape(),
            weight.shape()
        )));
    }
    let (c, t) = (input.shape()[0], input.shape()[1]);
    let (n, wc) = (weight.shape()[0], weight.shape()[1]);
    if wc != c {
        return Err(Error::Contract(format!(
            "linear weight expects {} input dims, input has {}",
            wc, c
        )));
    }
    if let Some(b) = bias {
        if b.shape() != [n] {
            return Err(Error::Contract(format!(
                "linear bias must be [{}], got {:?}",
                n,
                b.shape()
            )));
        }
    }
    Ok((c, t, n))
}

/// Per-frame affine map: `output[:, t] = weight · input[:, t] + bias`.
///
/// `input [C × T]`, `weight [N × C]`, `bias [N]` → `[N × T]`.
pub fn linear_forward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<Tensor<T>> {
    let (c, t, n) = check_linear(input, weight, Some(bias))?;
    let mut out = vec![T::zero(); n * t];
    let idata = input.data();
    let wdata = weight.data();
    // out row i = Σ_j w[i][j] · input row j  (j ascending; rows independent)
    chunks_mut_indexed(&mut out, t, n * t * c, |i, orow| {
        for v in orow.iter_mut() {
            *v = bias.data()[i];
        }
        for j in 0..c {
            let w = wdata[i * c + j];
            let irow = &idata[j * t..(j + 1) * t];
            for (o, x) in orow.iter_mut().zip(irow) {
                *o += w * *x;
            }
        }
    });
    Tensor::new(vec![n, t], out)
}

/// Exact gradients of [`linear_forward`].
///
/// Reduction orders: `grad_weight[i][j]` sums over t ascending;
/// `grad_input[j]` sums over output rows i ascending; `grad_bias` over t.
pub fn linear_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    saved_input: &Tensor<T>,
    weight: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let (c, t, n) = check_linear(saved_input, weight, None)?;
    if grad_out.shape() != [n, t] {
        return Err(Error::Contract(format!(
            "linear grad_out shape {:?} does not match expected [{} × {}]",
            grad_out.shape(),
            n,
            t
        )));
    }
    let go = grad_out.data();
    let idata = saved_input.data();
    let wdata = weight.data();

    let mut grad_bias = vec![T::zero(); n];
    for (i, gb) in grad_bias.iter_mut().enumerate() {
        let mut s = T::zero();
        for v in &go[i * t..(i + 1) * t] {
            s += *v;
        }
        *gb = s;
    }

    let mut grad_weight = vec![T::zero(); n * c];
    chunks_mut_indexed(&mut grad_weight, c, n * t * c, |i, gw_row| {
        let grow = &go[i * t..(i + 1) * t];
        for (j, gw) in gw_row.iter_mut().enumerate() {
            let irow = &idata[j * t..(j + 1) * t];
            let mut s = T::zero();
            for (g, x) in grow.iter().zip(irow) {
                s += *g * *x;
            }
            *gw = s;
        }
    });

    let mut grad_input = vec![T::zero(); c * t];
    chunks_mut_indexed(&mut grad_input, t, n * t * c, |j, gi_row| {
        for i in 0..n {
            let w = wdata[i * c + j];
            let grow = &go[i * t..(i + 1) * t];
            for (gi, g) in gi_row.iter_mut().zip(grow) {
                *gi += w * *g;
            }
        }
    });

    Ok((
        Tensor::new(vec![c, t], grad_input)?,
        Tensor::new(vec![n, c], grad_weight)?,
        Tensor::new(vec![n], grad_bias)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    use crate::rng::derive_rng;

    #[test]
    fn leaky_relu_definitional_values() {
        let x = Tensor::new(vec![3], vec![2.0f64, -1.0, 0.0]).unwrap();
        let y = leaky_relu(&x, 0.01);
        assert_eq!(y.data(), &[2.0, -0.01, 0.0]);
    }

    #[test]
    fn leaky_relu_gradient_matches_finite_differences_away_from_zero() {
        for seed in 0..20u64 {
            let mut rng = derive_rng(seed, "ops-test", 0);
            let n = rng.gen_range(4..64);
            let xs: Vec<f64> = (0..n)
                .map(|_| {
                    let v: f64 = rng.gen_range(0.1..2.0);
                    if rng.gen_bool(0.5) {
                        v
                    } else {
                        -v
                    }
                })
                .collect();
            let x = Tensor::from_vec(xs);
            let slope = 0.01;
            let cot = Tensor::from_vec((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let g = leaky_relu_backward(&cot, &x, slope);
            let h = 1e-5;
            for idx in 0..x.numel() {
                let mut plus = x.clone();
                plus.data_mut()[idx] += h;
                let mut minus = x.clone();
                minus.data_mut()[idx] -= h;
                let f = |t: &Tensor<f64>| -> f64 {
                    leaky_relu(t, slope)
                        .data()
                        .iter()
                        .zip(cot.data())
                        .map(|(a, b)| a * b)
                        .sum()
                };
                let num = (f(&plus) - f(&minus)) / (2.0 * h);
                assert!(
                    (g.data()[idx] - num).abs() < 1e-8,
                    "seed {seed} idx {idx}: {} vs {num}",
                    g.data()[idx]
                );
            }
        }
    }

    #[test]
    fn identity_weight_is_identity() {
        let x = Tensor::new(vec![3, 2], vec![1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let mut w = Tensor::zeros(&[3, 3]);
        for i in 0..3 {
            w.data_mut()[i * 3 + i] = 1.0;
        }
        let b = Tensor::zeros(&[3]);
        let y = linear_forward(&x, &w, &b).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn all_ones_row_sums_the_column() {
        let x = Tensor::new(vec![3, 1], vec![1.0f64, 2.0, 3.0]).unwrap();
        let w = Tensor::full(&[1, 3], 1.0);
        let b = Tensor::zeros(&[1]);
        let y = linear_forward(&x, &w, &b).unwrap();
        assert_eq!(y.data(), &[6.0]);
    }

    #[test]
    fn linear_gradients_match_finite_differences() {
        for seed in 0..20u64 {
            linear_fd_probe(seed);
        }
    }

    fn linear_fd_probe(seed: u64) {
        let mut rng = derive_rng(seed, "ops-test", 1);
        let rand = |shape: &[usize], rng: &mut rand_chacha::ChaCha8Rng| {
            let n: usize = shape.iter().product();
            Tensor::new(
                shape.to_vec(),
                (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            )
            .unwrap()
        };
        let (c, t, n) = (
            rng.gen_range(1..6),
            rng.gen_range(1..8),
            rng.gen_range(1..5),
        );
        let x = rand(&[c, t], &mut rng);
        let w = rand(&[n, c], &mut rng);
        let b = rand(&[n], &mut rng);
        let cot = rand(&[n, t], &mut rng);
        let loss = |x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>| -> f64 {
            linear_forward(x, w, b)
                .unwrap()
                .data()
                .iter()
                .zip(cot.data())
                .map(|(a, c)| a * c)
                .sum()
        };
        let (gi, gw, gb) = linear_backward(&cot, &x, &w).unwrap();
        let h = 1e-4;
        let check = |which: usize, base: &Tensor<f64>, analytic: &Tensor<f64>| {
            for idx in 0..base.numel() {
                let mut p = base.clone();
                p.data_mut()[idx] += h;
                let mut m = base.clone();
                m.data_mut()[idx] -= h;
                let (fp, fm) = match which {
                    0 => (loss(&p, &w, &b), loss(&m, &w, &b)),
                    1 => (loss(&x, &p, &b), loss(&x, &m, &b)),
                    _ => (loss(&x, &w, &p), loss(&x, &w, &m)),
                };
                let num = (fp - fm) / (2.0 * h);
                let ana = analytic.data()[idx];
                let denom = ana.abs().max(num.abs()).max(1e-12);
                assert!(
                    (ana - num).abs() / denom < 1e-6,
                    "set {which} idx {idx}: {ana} vs {num}"
                );
            }
        };
        check(0, &x, &gi);
        check(1, &w, &gw);
        check(2, &b, &gb);
    }

    #[test]
    fn linear_shape_mismatch_is_contract_error() {
        let x = Tensor::<f32>::zeros(&[4, 6]);
        let w = Tensor::zeros(&[3, 5]);
        let b = Tensor::zeros(&[3]);
        assert!(matches!(
            linear_forward(&x, &w, &b),
            Err(Error::Contract(_))
        ));
    }
}
