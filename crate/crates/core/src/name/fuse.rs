use rayon::prelude::*;

use super::levenshtein::levenshtein_similarity;
use super::NffConfig;
use crate::error::Result;
use crate::graph::EntityId;
use crate::sparse::TopKSimilarityMatrix;

/// Scores each candidate pair by Levenshtein similarity of the two names and
/// keeps the best `k` per source row.
pub fn string_similarity_matrix<S: AsRef<str> + Sync>(
    candidates: &[(EntityId, EntityId)],
    src_names: &[S],
    tgt_names: &[S],
    k: usize,
) -> Result<TopKSimilarityMatrix> {
    let scored: Vec<(EntityId, EntityId, f64)> = candidates
        .par_iter()
        .map(|&(s, t)| {
            let sim = levenshtein_similarity(src_names[s as usize].as_ref(), tgt_names[t as usize].as_ref());
            (s, t, sim)
        })
        .collect();
    let mut rows = vec![Vec::new(); src_names.len()];
    for (s, t, v) in scored {
        rows[s as usize].push((t, v));
    }
    TopKSimilarityMatrix::from_rows(src_names.len(), tgt_names.len(), k, rows)
}

/// `M_se + gamma · M_st`, keeping `phi` entries per row.
pub fn nff_fuse(m_se: &TopKSimilarityMatrix, m_st: &TopKSimilarityMatrix, cfg: &NffConfig) -> Result<TopKSimilarityMatrix> {
    TopKSimilarityMatrix::weighted_sum(m_se, 1.0, m_st, cfg.gamma_fusion, cfg.phi)
}
