//! Partition-quality metrics.

use std::collections::HashMap;

use super::batch::MiniBatch;
use super::kway::Partition;
use crate::error::{Error, Result};
use crate::graph::{EntityId, KnowledgeGraph, SeedAlignment};

/// Fraction of original (unweighted) adjacency edges whose endpoints lie in
/// different parts. An edgeless graph has rate 0.
pub fn edge_cut_rate(g: &KnowledgeGraph, p: &Partition) -> Result<f64> {
    if p.assignment.len() != g.entity_count() {
        return Err(Error::IdSpaceMismatch(format!(
            "partition covers {} entities, graph has {}",
            p.assignment.len(),
            g.entity_count()
        )));
    }
    let total = g.edge_count();
    if total == 0 {
        return Ok(0.0);
    }
    let cut = g
        .undirected_edges()
        .filter(|&(u, v, _)| p.assignment[u as usize] != p.assignment[v as usize])
        .count();
    Ok(cut as f64 / total as f64)
}

/// Fraction of `truth` pairs whose two endpoints share at least one batch.
pub fn seed_colocation_rate(batches: &[MiniBatch], truth: &SeedAlignment) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::NoPairs);
    }
    let mut src_of: HashMap<EntityId, Vec<usize>> = HashMap::new();
    for (i, b) in batches.iter().enumerate() {
        for &e in &b.source.entities {
            src_of.entry(e).or_default().push(i);
        }
    }
    let hits = truth
        .iter()
        .filter(|&(s, t)| {
            src_of
                .get(&s)
                .is_some_and(|bs| bs.iter().any(|&i| batches[i].target.contains(t)))
        })
        .count();
    Ok(hits as f64 / truth.len() as f64)
}
