//! Nearest-neighbor negative sampling.

use std::ops::Range;

use rand::seq::SliceRandom;
use rand::Rng;

use super::embedding::{manhattan, EmbeddingTable};
use crate::error::{Error, Result};
use crate::sparse::by_distance_asc;

/// Size of the nearest-neighbor pool negatives are drawn from.
pub fn pool_size(negatives_per_pair: usize) -> usize {
    25.max(5 * negatives_per_pair)
}

/// The `t` rows in `candidates` closest to row `anchor` by Manhattan
/// distance, excluding `anchor` itself. Ties break by ascending row.
pub fn nearest_pool(emb: &EmbeddingTable, candidates: Range<usize>, anchor: usize, t: usize) -> Vec<u32> {
    let a = emb.row(anchor);
    let mut scored: Vec<(u32, f64)> = candidates
        .filter(|&c| c != anchor)
        .map(|c| (c as u32, manhattan(a, emb.row(c))))
        .collect();
    let t = t.min(scored.len());
    if t < scored.len() && t > 0 {
        scored.select_nth_unstable_by(t - 1, by_distance_asc);
        scored.truncate(t);
    }
    scored.sort_by(by_distance_asc);
    scored.into_iter().map(|e| e.0).collect()
}

/// Draws `n` corrupted versions of the positive pair `(s, t)`, where rows
/// `0..n_source` of `emb` are source entities and the rest are targets.
/// Negatives alternate between replacing the source (even positions) and the
/// target (odd positions) with a uniform pick from that side's nearest pool.
pub fn sample_negatives(
    pair: (u32, u32),
    emb: &EmbeddingTable,
    n_source: usize,
    n: usize,
    rng: &mut impl Rng,
) -> Result<Vec<(u32, u32)>> {
    let n_target = emb.rows() - n_source;
    if n_source < 2 || n_target < 2 {
        return Err(Error::BatchTooSmall(format!("{n_source} source / {n_target} target entities")));
    }
    let (s, t) = pair;
    let t_pool = pool_size(n);
    let src_pool = nearest_pool(emb, 0..n_source, s as usize, t_pool);
    let tgt_pool = nearest_pool(emb, n_source..emb.rows(), t as usize, t_pool);
    Ok((0..n)
        .map(|i| {
            if i % 2 == 0 {
                (*src_pool.choose(rng).expect("non-empty pool"), t)
            } else {
                (s, *tgt_pool.choose(rng).expect("non-empty pool"))
            }
        })
        .collect())
}
