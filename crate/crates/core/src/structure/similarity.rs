//! Block-diagonal structural similarity matrix.

use std::collections::HashMap;

use rayon::prelude::*;

use super::embedding::{manhattan, EmbeddingTable};
use crate::error::{Error, Result};
use crate::graph::EntityId;
use crate::partition::MiniBatch;
use crate::sparse::{by_distance_asc, TopKSimilarityMatrix};

/// Top-`k` in-batch Manhattan candidates for each source entity of `batch`,
/// as (global source, [(global target, distance)]).
fn batch_candidates(batch: &MiniBatch, emb: &EmbeddingTable, k: usize) -> Vec<(EntityId, Vec<(EntityId, f64)>)> {
    let ns = batch.source.len();
    (0..ns)
        .into_par_iter()
        .map(|i| {
            let a = emb.row(i);
            let mut row: Vec<(EntityId, f64)> = batch
                .target
                .entities
                .iter()
                .enumerate()
                .map(|(j, &t)| (t, manhattan(a, emb.row(ns + j))))
                .collect();
            let kk = k.min(row.len());
            if kk > 0 && kk < row.len() {
                row.select_nth_unstable_by(kk - 1, by_distance_asc);
                row.truncate(kk);
            }
            (batch.source.entities[i], row)
        })
        .collect()
}

/// Assembles the structural matrix from per-batch embeddings. Each batch's
/// embedding table holds its source rows first, then its target rows.
/// Candidates never cross batches; when a source entity appears in several
/// (overlapping) batches, the candidates are merged by smallest distance.
pub fn structure_similarity(
    batches: &[MiniBatch],
    embs: &[EmbeddingTable],
    k: usize,
    n_source: usize,
    n_target: usize,
) -> Result<TopKSimilarityMatrix> {
    if k < 1 {
        return Err(Error::InvalidConfig("k must be >= 1".into()));
    }
    if batches.len() != embs.len() {
        return Err(Error::DimensionMismatch { expected: batches.len(), got: embs.len() });
    }
    let mut rows: Vec<Vec<(EntityId, f64)>> = vec![Vec::new(); n_source];
    for (b, e) in batches.iter().zip(embs) {
        let expected = b.source.len() + b.target.len();
        if e.rows() != expected {
            return Err(Error::DimensionMismatch { expected, got: e.rows() });
        }
        for (s, cands) in batch_candidates(b, e, k) {
            rows[s as usize].extend(cands);
        }
    }
    TopKSimilarityMatrix::from_distance_rows(n_source, n_target, k, rows)
}

/// Checks that every stored entry pairs entities sharing a batch and that
/// storage stays within `k · n_source`.
pub fn check_block_diagonal(m: &TopKSimilarityMatrix, batches: &[MiniBatch]) -> Result<()> {
    let mut src_batches: HashMap<EntityId, Vec<usize>> = HashMap::new();
    for (i, b) in batches.iter().enumerate() {
        for &s in &b.source.entities {
            src_batches.entry(s).or_default().push(i);
        }
    }
    for (s, t, _) in m.entries() {
        let shared = src_batches.get(&s).is_some_and(|bs| bs.iter().any(|&i| batches[i].target.contains(t)));
        if !shared {
            return Err(Error::Invariant(format!("entry ({s}, {t}) crosses batches")));
        }
    }
    let bound = m.k() * m.n_source();
    if m.nnz() > bound {
        return Err(Error::Invariant(format!("{} entries exceed k·|E_s| = {bound}", m.nnz())));
    }
    Ok(())
}
