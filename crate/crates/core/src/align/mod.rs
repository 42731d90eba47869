//! Name-based seed augmentation, channel fusion, inference and metrics.

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{AlignmentMapping, EntityId, SeedAlignment, SeedKind};
use crate::sparse::TopKSimilarityMatrix;

/// Pairs that are each other's best match in `m_n`. Row winners come from
/// the sorted rows; column winners are the highest stored score per target,
/// ties to the lowest source id. Pairs touching an entity already in
/// `existing` are dropped.
pub fn augment_seeds(m_n: &TopKSimilarityMatrix, existing: &SeedAlignment) -> SeedAlignment {
    let mut col_best: Vec<Option<(EntityId, f64)>> = vec![None; m_n.n_target()];
    for (s, t, v) in m_n.entries() {
        let slot = &mut col_best[t as usize];
        // entries come in ascending source order, so strict > keeps the lowest id on ties
        if slot.map_or(true, |(_, best)| v > best) {
            *slot = Some((s, v));
        }
    }
    let used_s: HashSet<EntityId> = existing.iter().map(|p| p.0).collect();
    let used_t: HashSet<EntityId> = existing.iter().map(|p| p.1).collect();
    let pairs: Vec<(EntityId, EntityId)> = (0..m_n.n_source() as EntityId)
        .filter_map(|s| {
            let (t, _) = m_n.top1(s)?;
            (col_best[t as usize].map(|c| c.0) == Some(s)).then_some((s, t))
        })
        .filter(|(s, t)| !used_s.contains(s) && !used_t.contains(t))
        .collect();
    SeedAlignment::new(pairs, SeedKind::PseudoSeed).expect("mutual best matches are one-to-one")
}

/// Equal-weight union-add of the structural and name matrices.
pub fn fuse_channels(m_s: &TopKSimilarityMatrix, m_n: &TopKSimilarityMatrix) -> Result<TopKSimilarityMatrix> {
    TopKSimilarityMatrix::weighted_sum(m_s, 1.0, m_n, 1.0, m_s.k().max(m_n.k()))
}

/// Row-wise argmax; empty rows are left unmatched.
pub fn infer_alignment(m: &TopKSimilarityMatrix) -> AlignmentMapping {
    let matches = (0..m.n_source() as EntityId).filter_map(|s| m.top1(s).map(|(t, v)| (s, t, v))).collect();
    AlignmentMapping { matches }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub hits_at: BTreeMap<usize, f64>,
    pub mrr: f64,
    pub evaluated_pairs: usize,
    pub co_location_rate: Option<f64>,
    pub edge_cut_rate: Option<f64>,
}

impl EvaluationReport {
    pub fn hits(&self, n: usize) -> Option<f64> {
        self.hits_at.get(&n).copied()
    }
}

/// Rank of `t` in row `s`: one plus the number of stored entries scoring
/// strictly higher. `None` when `t` is not stored.
pub fn truth_rank(m: &TopKSimilarityMatrix, s: EntityId, t: EntityId) -> Option<usize> {
    if s as usize >= m.n_source() {
        return None;
    }
    let row = m.row(s);
    let score = row.iter().find(|e| e.0 == t)?.1;
    Some(1 + row.iter().filter(|e| e.1 > score).count())
}

pub fn evaluate(m: &TopKSimilarityMatrix, truth: &SeedAlignment, ns: &[usize]) -> Result<EvaluationReport> {
    if truth.is_empty() {
        return Err(Error::NoPairs);
    }
    let ranks: Vec<Option<usize>> = truth.pairs().par_iter().map(|&(s, t)| truth_rank(m, s, t)).collect();
    let total = ranks.len() as f64;
    let hits_at = ns
        .iter()
        .map(|&n| (n, ranks.iter().filter(|r| r.is_some_and(|r| r <= n)).count() as f64 / total))
        .collect();
    let mrr = ranks.iter().map(|r| r.map_or(0.0, |r| 1.0 / r as f64)).sum::<f64>() / total;
    Ok(EvaluationReport { hits_at, mrr, evaluated_pairs: ranks.len(), co_location_rate: None, edge_cut_rate: None })
}

/// Share of pseudo pairs that are true alignments.
pub fn augmentation_precision(pseudo: &SeedAlignment, truth: &SeedAlignment) -> Result<f64> {
    if pseudo.is_empty() {
        return Err(Error::NoPseudoSeeds);
    }
    let truth: HashSet<(EntityId, EntityId)> = truth.iter().collect();
    Ok(pseudo.iter().filter(|p| truth.contains(p)).count() as f64 / pseudo.len() as f64)
}
