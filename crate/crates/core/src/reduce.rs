//! Block-wise parallel sums.
//!
//! Work is cut into fixed particle blocks. In deterministic mode each block's
//! partial sum is computed independently and the partials are folded in block
//! order, so the result does not depend on the thread count.

use std::ops::Range;

use rayon::prelude::*;

use crate::error::Result;

/// Sums the contributions of `n` items, `block` at a time.
///
/// `f` adds the contribution of an item range into a zeroed accumulator of
/// length `len`.
pub(crate) fn block_sum<F>(n: usize, block: usize, len: usize, deterministic: bool, f: F) -> Result<Vec<f64>>
where
    F: Fn(Range<usize>, &mut [f64]) -> Result<()> + Sync,
{
    let n_blocks = n.div_ceil(block);
    let partial = |b: usize| -> Result<Vec<f64>> {
        let mut acc = vec![0.0; len];
        let lo = b * block;
        f(lo..(lo + block).min(n), &mut acc)?;
        Ok(acc)
    };
    fold(
        (0..n_blocks).into_par_iter().map(partial),
        len,
        deterministic,
    )
}

/// Like [`block_sum`] but hands each block a mutable view of its rows of
/// `data` (`dim` values per item) along with the block index.
pub(crate) fn block_update_sum<F>(
    data: &mut [f64],
    dim: usize,
    block: usize,
    len: usize,
    deterministic: bool,
    f: F,
) -> Result<Vec<f64>>
where
    F: Fn(usize, &mut [f64], &mut [f64]) -> Result<()> + Sync,
{
    let partial = |(b, rows): (usize, &mut [f64])| -> Result<Vec<f64>> {
        let mut acc = vec![0.0; len];
        f(b, rows, &mut acc)?;
        Ok(acc)
    };
    fold(
        data.par_chunks_mut(block * dim).enumerate().map(partial),
        len,
        deterministic,
    )
}

fn fold<I>(parts: I, len: usize, deterministic: bool) -> Result<Vec<f64>>
where
    I: IndexedParallelIterator<Item = Result<Vec<f64>>>,
{
    if deterministic {
        let parts: Vec<Vec<f64>> = parts.collect::<Result<_>>()?;
        let mut total = vec![0.0; len];
        for p in parts {
            add_into(&mut total, &p);
        }
        Ok(total)
    } else {
        parts.try_reduce(
            || vec![0.0; len],
            |mut a, b| {
                add_into(&mut a, &b);
                Ok(a)
            },
        )
    }
}

fn add_into(a: &mut [f64], b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}
