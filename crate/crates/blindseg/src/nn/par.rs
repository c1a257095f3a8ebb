//! Parallel-or-serial dispatch. Small workloads run serially; large ones
//! split across the rayon pool. Both paths produce bitwise-identical
//! results because every output cell has a single writer with a fixed
//! reduction order.

use rayon::prelude::*;

/// Below this many touched elements the serial path wins.
pub(crate) const PAR_MIN_ELEMS: usize = 1 << 14;

pub(crate) fn chunks_mut_indexed<T, F>(data: &mut [T], chunk: usize, total_elems: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    if total_elems >= PAR_MIN_ELEMS {
        data.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
    } else {
        for (i, c) in data.chunks_mut(chunk).enumerate() {
            f(i, c);
        }
    }
}

pub(crate) fn for_each_indexed<I, F>(items: Vec<I>, total_elems: usize, f: F)
where
    I: Send,
    F: Fn(usize, I) + Sync + Send,
{
    if total_elems >= PAR_MIN_ELEMS {
        items.into_par_iter().enumerate().for_each(|(i, x)| f(i, x));
    } else {
        for (i, x) in items.into_iter().enumerate() {
            f(i, x);
        }
    }
}
