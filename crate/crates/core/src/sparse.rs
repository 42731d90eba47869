//! Row-sparse top-k similarity matrices.

use std::cmp::Ordering;
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::graph::EntityId;

/// Guard added to the min-max denominator when converting distances.
pub const DISTANCE_EPSILON: f64 = 1e-8;

/// Keeps at most `k` scored target candidates per source row.
///
/// Rows are sorted by descending score, ties by ascending target id.
#[derive(Debug, Clone, PartialEq)]
pub struct TopKSimilarityMatrix {
    n_source: usize,
    n_target: usize,
    k: usize,
    rows: Vec<Vec<(EntityId, f64)>>,
}

/// Descending score, then ascending id.
pub(crate) fn by_score_desc(a: &(EntityId, f64), b: &(EntityId, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// Ascending distance, then ascending id.
pub(crate) fn by_distance_asc(a: &(EntityId, f64), b: &(EntityId, f64)) -> Ordering {
    a.1.total_cmp(&b.1).then(a.0.cmp(&b.0))
}

impl TopKSimilarityMatrix {
    pub fn empty(n_source: usize, n_target: usize, k: usize) -> Self {
        Self { n_source, n_target, k, rows: vec![Vec::new(); n_source] }
    }

    /// Builds a matrix from unsorted candidate rows. Duplicate targets in a
    /// row keep their highest score; rows are then truncated to `k`.
    pub fn from_rows(
        n_source: usize,
        n_target: usize,
        k: usize,
        mut rows: Vec<Vec<(EntityId, f64)>>,
    ) -> Result<Self> {
        if rows.len() != n_source {
            return Err(Error::IdSpaceMismatch(format!(
                "{} rows supplied for {} source entities",
                rows.len(),
                n_source
            )));
        }
        for row in &mut rows {
            if let Some(&(t, _)) = row.iter().find(|(t, _)| *t as usize >= n_target) {
                return Err(Error::EntityOutOfRange { id: t as usize, len: n_target });
            }
            normalize_row(row, k);
        }
        Ok(Self { n_source, n_target, k, rows })
    }

    /// Converts per-row candidate distances into similarities with one global
    /// min-max scale over every kept entry: `1 - (d - d_min) / (d_max - d_min + eps)`.
    pub fn from_distance_rows(
        n_source: usize,
        n_target: usize,
        k: usize,
        mut rows: Vec<Vec<(EntityId, f64)>>,
    ) -> Result<Self> {
        for row in &mut rows {
            row.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
            row.dedup_by_key(|e| e.0);
            row.sort_by(by_distance_asc);
            row.truncate(k);
        }
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &(_, d) in rows.iter().flatten() {
            lo = lo.min(d);
            hi = hi.max(d);
        }
        let span = hi - lo + DISTANCE_EPSILON;
        for row in &mut rows {
            for e in row.iter_mut() {
                e.1 = 1.0 - (e.1 - lo) / span;
            }
        }
        Self::from_rows(n_source, n_target, k, rows)
    }

    pub fn n_source(&self) -> usize {
        self.n_source
    }

    pub fn n_target(&self) -> usize {
        self.n_target
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, s: EntityId) -> &[(EntityId, f64)] {
        &self.rows[s as usize]
    }

    pub fn rows(&self) -> &[Vec<(EntityId, f64)>] {
        &self.rows
    }

    pub fn get(&self, s: EntityId, t: EntityId) -> Option<f64> {
        self.rows.get(s as usize)?.iter().find(|e| e.0 == t).map(|e| e.1)
    }

    /// Highest-scored target of row `s` (ties: lowest target id).
    pub fn top1(&self, s: EntityId) -> Option<(EntityId, f64)> {
        self.rows.get(s as usize)?.first().copied()
    }

    /// Total stored entries.
    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn entries(&self) -> impl Iterator<Item = (EntityId, EntityId, f64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(s, row)| row.iter().map(move |&(t, v)| (s as EntityId, t, v)))
    }

    pub fn same_space(&self, other: &Self) -> Result<()> {
        if self.n_source != other.n_source || self.n_target != other.n_target {
            return Err(Error::IdSpaceMismatch(format!(
                "{}x{} vs {}x{}",
                self.n_source, self.n_target, other.n_source, other.n_target
            )));
        }
        Ok(())
    }

    /// Sparse union-add `wa * a + wb * b`; missing entries read as 0. Each
    /// row keeps its top `k` after summation.
    pub fn weighted_sum(a: &Self, wa: f64, b: &Self, wb: f64, k: usize) -> Result<Self> {
        a.same_space(b)?;
        let rows = a
            .rows
            .iter()
            .zip(&b.rows)
            .map(|(ra, rb)| {
                let mut acc: HashMap<EntityId, f64> = HashMap::with_capacity(ra.len() + rb.len());
                for &(t, v) in ra {
                    *acc.entry(t).or_insert(0.0) += wa * v;
                }
                for &(t, v) in rb {
                    *acc.entry(t).or_insert(0.0) += wb * v;
                }
                let mut row: Vec<_> = acc.into_iter().collect();
                normalize_row(&mut row, k);
                row
            })
            .collect();
        Ok(Self { n_source: a.n_source, n_target: a.n_target, k, rows })
    }

    /// Multiplies every stored score by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for e in out.rows.iter_mut().flatten() {
            e.1 *= factor;
        }
        out
    }
}

fn normalize_row(row: &mut Vec<(EntityId, f64)>, k: usize) {
    // keep the best score per target before truncating
    row.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.total_cmp(&a.1)));
    row.dedup_by_key(|e| e.0);
    row.sort_by(by_score_desc);
    row.truncate(k);
}
