use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::NffConfig;
use crate::error::{Error, Result};
use crate::graph::EntityId;
use crate::sparse::{by_distance_asc, TopKSimilarityMatrix};
use crate::structure::{manhattan, EmbeddingTable};

/// Shuffled index ranges, `parts` near-equal slices.
fn random_slices(n: usize, parts: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let parts = parts.clamp(1, n.max(1));
    let step = n.div_ceil(parts).max(1);
    idx.chunks(step).map(<[usize]>::to_vec).collect()
}

/// Exact top-φ Manhattan neighbors of every source row among the target
/// rows, computed one (source slice, target slice) block at a time so only
/// φ candidates per source row are held between blocks.
pub fn semantic_topk(src: &EmbeddingTable, tgt: &EmbeddingTable, cfg: &NffConfig) -> Result<TopKSimilarityMatrix> {
    if src.dim() != tgt.dim() {
        return Err(Error::DimensionMismatch { expected: src.dim(), got: tgt.dim() });
    }
    if cfg.phi == 0 {
        return Err(Error::InvalidConfig("phi must be >= 1".into()));
    }
    let (ns, nt) = (src.rows(), tgt.rows());
    let phi = cfg.phi.min(nt);
    if phi == 0 {
        return Ok(TopKSimilarityMatrix::empty(ns, nt, cfg.phi));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let src_slices = random_slices(ns, cfg.segments, &mut rng);
    let tgt_slices = random_slices(nt, cfg.segments, &mut rng);

    let mut rows: Vec<Vec<(EntityId, f64)>> = vec![Vec::new(); ns];
    for s_slice in &src_slices {
        let merged: Vec<Vec<(EntityId, f64)>> = s_slice
            .par_iter()
            .map(|&s| {
                let a = src.row(s);
                let mut best: Vec<(EntityId, f64)> = Vec::with_capacity(2 * phi);
                let mut block: Vec<(EntityId, f64)> = Vec::new();
                for t_slice in &tgt_slices {
                    block.clear();
                    block.extend(t_slice.iter().map(|&t| (t as EntityId, manhattan(a, tgt.row(t)))));
                    if block.len() > phi {
                        block.select_nth_unstable_by(phi - 1, by_distance_asc);
                        block.truncate(phi);
                    }
                    best.extend_from_slice(&block);
                    best.sort_by(by_distance_asc);
                    best.truncate(phi);
                }
                best
            })
            .collect();
        for (&s, row) in s_slice.iter().zip(merged) {
            rows[s] = row;
        }
    }
    TopKSimilarityMatrix::from_distance_rows(ns, nt, cfg.phi, rows)
}
