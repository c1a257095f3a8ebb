//! Noise-contrastive objective over adjacent frames.
//!
//! For reference frame i the positive is frame i+1 and the distractor pool
//! is every frame at temporal distance greater than one within the same
//! utterance. The per-frame loss is the negative log-softmax of the
//! positive's cosine similarity against the pooled candidate set
//! `{i+1} ∪ D_K(i)`; the utterance loss is the mean over reference frames.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::encoder::FrameEmbeddings;
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// K sampled distractor indices for one reference frame. Every index j
/// satisfies |i − j| > 1 and lies in the same utterance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegativeSample {
    pub reference: usize,
    pub negatives: Vec<usize>,
}

/// Distractor pool size for reference `i` in an utterance of `frame_count`
/// frames: all j with |i − j| > 1.
pub fn negative_pool_size(frame_count: usize, i: usize) -> usize {
    let left = i.saturating_sub(1); // j in [0, i−1)
    let right = frame_count.saturating_sub(i + 2); // j in [i+2, L)
    left + right
}

/// Draw K distractors for reference `i`: uniform without replacement while
/// the pool allows it, with replacement once K exceeds the pool, and `None`
/// (the frame contributes no loss term) when the pool is empty.
pub fn sample_negatives(
    frame_count: usize,
    i: usize,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Option<NegativeSample>> {
    if frame_count < 2 {
        return Err(Error::Contract(format!(
            "need at least 2 frames, got {frame_count}"
        )));
    }
    if i > frame_count - 2 {
        return Err(Error::Contract(format!(
            "reference {i} out of range; the last frame has no positive pair (L = {frame_count})"
        )));
    }
    if k == 0 {
        return Err(Error::Contract("need at least one negative".into()));
    }
    let left = i.saturating_sub(1);
    let right_start = i + 2;
    let pool = negative_pool_size(frame_count, i);
    if pool == 0 {
        return Ok(None);
    }
    let to_frame = |idx: usize| {
        if idx < left {
            idx
        } else {
            idx - left + right_start
        }
    };
    let negatives: Vec<usize> = if pool >= k {
        rand::seq::index::sample(rng, pool, k)
            .into_iter()
            .map(to_frame)
            .collect()
    } else {
        (0..k).map(|_| to_frame(rng.gen_range(0..pool))).collect()
    };
    Ok(Some(NegativeSample {
        reference: i,
        negatives,
    }))
}

/// Negatives for every reference frame `0 ..= L−2`, skipping frames with an
/// empty pool.
pub fn sample_all_negatives(
    frame_count: usize,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<NegativeSample>> {
    let mut out = Vec::new();
    if frame_count < 2 {
        return Ok(out);
    }
    for i in 0..=frame_count - 2 {
        if let Some(s) = sample_negatives(frame_count, i, k, rng)? {
            out.push(s);
        }
    }
    Ok(out)
}

/// Sum of per-frame NCE losses over `frames` (`[L × N]`, rows are frames),
/// with the exact gradient of that sum and the number of contributing
/// terms. Terms accumulate in list order; candidates within a term in
/// positive-first order.
pub(crate) fn nce_sum_and_grad<T: Scalar>(
    frames: &Tensor<T>,
    negatives: &[NegativeSample],
) -> Result<(T, Tensor<T>, usize)> {
    let l = frames.rows();
    let n = frames.cols();
    if l < 2 {
        return Err(Error::Contract(format!(
            "NCE loss needs at least 2 frames, got {l}"
        )));
    }
    let norms: Vec<T> = (0..l)
        .map(|i| {
            frames
                .row(i)
                .iter()
                .fold(T::zero(), |acc, &v| acc + v * v)
                .sqrt()
        })
        .collect();
    if let Some(i) = norms.iter().position(|&x| x == T::zero()) {
        return Err(Error::Numeric(format!(
            "frame {i} has zero norm; cosine similarity is undefined"
        )));
    }

    let dot = |a: usize, b: usize| -> T {
        frames
            .row(a)
            .iter()
            .zip(frames.row(b))
            .fold(T::zero(), |acc, (&x, &y)| acc + x * y)
    };

    let mut total = T::zero();
    let mut grad = Tensor::<T>::zeros(&[l, n]);
    let mut terms = 0usize;

    for sample in negatives {
        let i = sample.reference;
        if i + 1 >= l {
            return Err(Error::Contract(format!(
                "reference {i} has no positive pair (L = {l})"
            )));
        }
        for &j in &sample.negatives {
            if j >= l || j + 1 == i || j == i || j == i + 1 {
                return Err(Error::Contract(format!(
                    "negative index {j} violates the non-adjacency rule for reference {i}"
                )));
            }
        }
        let cands: Vec<usize> = std::iter::once(i + 1)
            .chain(sample.negatives.iter().copied())
            .collect();
        let sims: Vec<T> = cands
            .iter()
            .map(|&c| dot(i, c) / (norms[i] * norms[c]))
            .collect();

        let max = sims.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
        let exps: Vec<T> = sims.iter().map(|&s| (s - max).exp()).collect();
        let z: T = exps.iter().fold(T::zero(), |a, &b| a + b);
        total += -(sims[0] - max) + z.ln();
        terms += 1;

        // dL/ds_c = p_c − 1[c is the positive]
        for (ci, (&c, &s)) in cands.iter().zip(&sims).enumerate() {
            let mut w = exps[ci] / z;
            if ci == 0 {
                w -= T::one();
            }
            // ds/du = v/(|u||v|) − s·u/|u|²;  ds/dv symmetric
            let inv_uv = (norms[i] * norms[c]).recip();
            let inv_uu = (norms[i] * norms[i]).recip();
            let inv_vv = (norms[c] * norms[c]).recip();
            for d in 0..n {
                let u = frames.at2(i, d);
                let v = frames.at2(c, d);
                grad.data_mut()[i * n + d] += w * (v * inv_uv - s * u * inv_uu);
                grad.data_mut()[c * n + d] += w * (u * inv_uv - s * v * inv_vv);
            }
        }
    }
    Ok((total, grad, terms))
}

/// Mean NCE loss over the reference frames of one utterance.
pub fn nce_loss(z: &FrameEmbeddings, negatives: &[NegativeSample]) -> Result<f64> {
    let data: Vec<f64> = z.data().iter().map(|&v| f64::from(v)).collect();
    let frames = Tensor::new(vec![z.num_frames(), z.dim()], data)?;
    let (sum, _, terms) = nce_sum_and_grad(&frames, negatives)?;
    if terms == 0 {
        return Err(Error::Contract(
            "no reference frame has a nonempty distractor pool".into(),
        ));
    }
    Ok(sum / terms as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;

    fn frame_tensor(rows: Vec<Vec<f64>>) -> Tensor<f64> {
        let n = rows[0].len();
        let l = rows.len();
        Tensor::new(vec![l, n], rows.into_iter().flatten().collect()).unwrap()
    }

    #[test]
    fn two_legal_candidates_are_both_taken() {
        let mut rng = derive_rng(0, "neg-test", 0);
        let s = sample_negatives(5, 2, 2, &mut rng).unwrap().unwrap();
        let mut got = s.negatives.clone();
        got.sort_unstable();
        assert_eq!(got, vec![0, 4]);
    }

    #[test]
    fn empty_pool_skips_the_frame() {
        let mut rng = derive_rng(0, "neg-test", 1);
        assert_eq!(sample_negatives(3, 1, 4, &mut rng).unwrap(), None);
    }

    #[test]
    fn small_pool_samples_with_replacement() {
        let mut rng = derive_rng(0, "neg-test", 2);
        let s = sample_negatives(4, 1, 2, &mut rng).unwrap().unwrap();
        assert_eq!(s.negatives, vec![3, 3]);
    }

    #[test]
    fn out_of_range_reference_is_a_contract_error() {
        let mut rng = derive_rng(0, "neg-test", 3);
        assert!(sample_negatives(5, 4, 2, &mut rng).is_err());
        assert!(sample_negatives(1, 0, 2, &mut rng).is_err());
    }

    proptest::proptest! {
        #[test]
        fn negatives_never_adjacent_to_reference(
            l in 2usize..60,
            i_frac in 0.0f64..1.0,
            k in 1usize..12,
            seed in 0u64..1000,
        ) {
            let i = ((l - 1) as f64 * i_frac) as usize; // 0 ..= l−2
            let mut rng = derive_rng(seed, "neg-prop", 0);
            if let Some(s) = sample_negatives(l, i, k, &mut rng).unwrap() {
                proptest::prop_assert_eq!(s.negatives.len(), k);
                for &j in &s.negatives {
                    proptest::prop_assert!(j < l);
                    proptest::prop_assert!(
                        j + 1 < i || j > i + 1,
                        "j={} adjacent to i={}", j, i
                    );
                }
                // without replacement whenever the pool allows it
                if negative_pool_size(l, i) >= k {
                    let mut seen = s.negatives.clone();
                    seen.sort_unstable();
                    seen.dedup();
                    proptest::prop_assert_eq!(seen.len(), k, "duplicates despite big pool");
                }
            } else {
                proptest::prop_assert_eq!(negative_pool_size(l, i), 0);
            }
        }
    }

    #[test]
    fn uniform_two_way_softmax_gives_ln2() {
        // positive and the single negative both orthogonal to the reference,
        // so sim(pos) == sim(neg) and the softmax is a uniform 2-way split
        let z = frame_tensor(vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![9.0, 9.0, 9.0],
            vec![0.0, 0.0, 1.0],
        ]);
        let negs = vec![NegativeSample {
            reference: 0,
            negatives: vec![3],
        }];
        let (sum, _, terms) = nce_sum_and_grad(&z, &negs).unwrap();
        assert_eq!(terms, 1);
        assert!((sum - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn six_equal_similarities_give_ln6() {
        // constant rows: every cosine is 1, so the softmax is uniform over K+1 = 6
        let rows = vec![vec![0.3, -0.2, 0.9]; 12];
        let z = frame_tensor(rows);
        let negs = vec![NegativeSample {
            reference: 4,
            negatives: vec![0, 2, 7, 9, 11],
        }];
        let (sum, _, terms) = nce_sum_and_grad(&z, &negs).unwrap();
        assert_eq!(terms, 1);
        assert!((sum - 6.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn opposed_negative_gives_closed_form() {
        // sim(pos) = 1, single negative with sim = −1 → ln(1 + e^{−2})
        let z = frame_tensor(vec![
            vec![1.0, 0.0],
            vec![2.0, 0.0],
            vec![5.0, 5.0],
            vec![-3.0, 0.0],
        ]);
        let negs = vec![NegativeSample {
            reference: 0,
            negatives: vec![3],
        }];
        let (sum, _, _) = nce_sum_and_grad(&z, &negs).unwrap();
        assert!((sum - (1.0 + (-2.0f64).exp()).ln()).abs() < 1e-12);
    }

    #[test]
    fn zero_norm_row_is_an_error_naming_the_frame() {
        let z = frame_tensor(vec![vec![1.0, 0.0], vec![0.0, 0.0], vec![1.0, 1.0]]);
        let negs = vec![NegativeSample {
            reference: 0,
            negatives: vec![2],
        }];
        let msg = nce_sum_and_grad(&z, &negs).unwrap_err().to_string();
        assert!(msg.contains("frame 1"), "{msg}");
    }

    #[test]
    fn loss_is_scale_invariant() {
        let mut rng = derive_rng(9, "nce-test", 0);
        use rand::Rng;
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let z = frame_tensor(rows.clone());
        let scaled = frame_tensor(
            rows.iter()
                .map(|r| r.iter().map(|v| v * 37.5).collect())
                .collect(),
        );
        let negs = sample_all_negatives(10, 3, &mut rng).unwrap();
        let (a, _, _) = nce_sum_and_grad(&z, &negs).unwrap();
        let (b, _, _) = nce_sum_and_grad(&scaled, &negs).unwrap();
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }

    #[test]
    fn loss_is_nonnegative_and_uniform_at_constant_embeddings() {
        let mut rng = derive_rng(10, "nce-test", 0);
        let k = 4;
        let z = frame_tensor(vec![vec![0.5, 0.5, -0.5]; 9]);
        let negs = sample_all_negatives(9, k, &mut rng).unwrap();
        let (sum, _, terms) = nce_sum_and_grad(&z, &negs).unwrap();
        let mean = sum / terms as f64;
        assert!((mean - ((k + 1) as f64).ln()).abs() < 1e-12);
        assert!(mean >= 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = derive_rng(11, "nce-test", 0);
        use rand::Rng;
        let (l, n) = (7, 5);
        let rows: Vec<Vec<f64>> = (0..l)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let z = frame_tensor(rows);
        let negs = sample_all_negatives(l, 3, &mut rng).unwrap();
        let (_, grad, _) = nce_sum_and_grad(&z, &negs).unwrap();
        let h = 1e-5;
        for idx in 0..z.numel() {
            let mut p = z.clone();
            p.data_mut()[idx] += h;
            let mut m = z.clone();
            m.data_mut()[idx] -= h;
            let (fp, _, _) = nce_sum_and_grad(&p, &negs).unwrap();
            let (fm, _, _) = nce_sum_and_grad(&m, &negs).unwrap();
            let num = (fp - fm) / (2.0 * h);
            let ana = grad.data()[idx];
            let rel = (ana - num).abs() / ana.abs().max(num.abs()).max(1e-12);
            assert!(rel < 1e-5, "idx {idx}: analytic {ana} vs numeric {num}");
        }
    }
}
