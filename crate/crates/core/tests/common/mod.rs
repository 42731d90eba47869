//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

pub mod checks;

use std::collections::{BTreeSet, HashSet};

use kgalign::graph::{EntityId, KnowledgeGraph};
use kgalign::TopKSimilarityMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Full-table edit distance.
pub fn dp_edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let cost = if a[i - 1] == b[j - 1] { 0 } else { 1 };
            d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + cost);
        }
    }
    d[a.len()][b.len()]
}

pub fn dp_similarity(a: &str, b: &str) -> f64 {
    let m = a.chars().count().max(b.chars().count());
    if m == 0 {
        1.0
    } else {
        1.0 - dp_edit_distance(a, b) as f64 / m as f64
    }
}

pub fn token_set(name: &str) -> BTreeSet<String> {
    name.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(String::from)
        .collect()
}

pub fn exact_jaccard(a: &str, b: &str) -> f64 {
    let (x, y) = (token_set(a), token_set(b));
    if x.is_empty() && y.is_empty() {
        return 0.0;
    }
    x.intersection(&y).count() as f64 / x.union(&y).count() as f64
}

pub fn random_word(rng: &mut ChaCha8Rng, len: usize) -> String {
    (0..len).map(|_| (b'a' + rng.gen_range(0..26u8)) as char).collect()
}

pub fn random_string(rng: &mut ChaCha8Rng, max_len: usize, alphabet: &[char]) -> String {
    let n = rng.gen_range(0..=max_len);
    (0..n).map(|_| *alphabet.choose(rng).unwrap()).collect()
}

/// Dense L1 distances, naive left-to-right summation.
pub fn dense_distances(src: &[Vec<f64>], tgt: &[Vec<f64>]) -> Vec<Vec<f64>> {
    src.iter()
        .map(|a| {
            tgt.iter()
                .map(|b| {
                    let mut d = 0.0;
                    for i in 0..a.len() {
                        d += (a[i] - b[i]).abs();
                    }
                    d
                })
                .collect()
        })
        .collect()
}

/// Rows of the `k` smallest distances (ties: lower id), then one global
/// min-max conversion to similarity.
pub fn brute_topk_similarity(dist: &[Vec<f64>], k: usize) -> Vec<Vec<(EntityId, f64)>> {
    let mut rows: Vec<Vec<(EntityId, f64)>> = dist
        .iter()
        .map(|row| {
            let mut r: Vec<(EntityId, f64)> = row.iter().enumerate().map(|(j, &d)| (j as EntityId, d)).collect();
            r.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
            r.truncate(k);
            r
        })
        .collect();
    let all: Vec<f64> = rows.iter().flatten().map(|e| e.1).collect();
    let lo = all.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = all.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for e in rows.iter_mut().flatten() {
        e.1 = 1.0 - (e.1 - lo) / (hi - lo + 1e-8);
    }
    rows
}

/// Same target ids in the same order, scores within `tol`.
pub fn rows_match(got: &TopKSimilarityMatrix, want: &[Vec<(EntityId, f64)>], tol: f64) -> usize {
    let mut mismatches = 0;
    for (s, w) in want.iter().enumerate() {
        let g = got.row(s as EntityId);
        let same = g.len() == w.len() && g.iter().zip(w).all(|(a, b)| a.0 == b.0 && (a.1 - b.1).abs() <= tol);
        if !same {
            mismatches += 1;
        }
    }
    mismatches
}

pub fn to_dense(m: &TopKSimilarityMatrix) -> Vec<Vec<Option<f64>>> {
    let mut d = vec![vec![None; m.n_target()]; m.n_source()];
    for (s, t, v) in m.entries() {
        d[s as usize][t as usize] = Some(v);
    }
    d
}

/// `wa·a + wb·b` on dense matrices, then each row's `k` best present cells.
pub fn dense_sum_topk(
    a: &[Vec<Option<f64>>],
    wa: f64,
    b: &[Vec<Option<f64>>],
    wb: f64,
    k: usize,
) -> Vec<Vec<(EntityId, f64)>> {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| {
            let mut row: Vec<(EntityId, f64)> = ra
                .iter()
                .zip(rb)
                .enumerate()
                .filter(|(_, (x, y))| x.is_some() || y.is_some())
                .map(|(j, (x, y))| (j as EntityId, wa * x.unwrap_or(0.0) + wb * y.unwrap_or(0.0)))
                .collect();
            row.sort_by(|p, q| q.1.partial_cmp(&p.1).unwrap().then(p.0.cmp(&q.0)));
            row.truncate(k);
            row
        })
        .collect()
}

/// Argmax of a dense row over present cells (ties: lowest index).
fn argmax(cells: impl Iterator<Item = (usize, Option<f64>)>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in cells {
        if let Some(v) = v {
            if best.map_or(true, |(_, b)| v > b) {
                best = Some((i, v));
            }
        }
    }
    best.map(|b| b.0)
}

pub fn dense_mutual_argmax(d: &[Vec<Option<f64>>], n_target: usize) -> Vec<(EntityId, EntityId)> {
    let mut out = Vec::new();
    for (s, row) in d.iter().enumerate() {
        let Some(t) = argmax(row.iter().copied().enumerate()) else { continue };
        let back = argmax((0..d.len()).map(|i| (i, d[i][t])));
        if back == Some(s) && t < n_target {
            out.push((s as EntityId, t as EntityId));
        }
    }
    out
}

/// Rank of `t` after sorting the row by descending score; equal scores share
/// the best rank. `None` when absent.
pub fn full_sort_rank(row: &[Option<f64>], t: usize) -> Option<usize> {
    let v = row[t]?;
    let mut scores: Vec<f64> = row.iter().flatten().copied().collect();
    scores.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Some(scores.iter().position(|&x| x == v).unwrap() + 1)
}

/// Random sparse matrix with `per_row` distinct targets per row.
pub fn random_sparse(n_s: usize, n_t: usize, per_row: usize, k: usize, seed: u64) -> TopKSimilarityMatrix {
    let mut r = rng(seed);
    let rows = (0..n_s)
        .map(|_| {
            let ids = rand::seq::index::sample(&mut r, n_t, per_row.min(n_t));
            ids.into_iter().map(|t| (t as EntityId, (r.gen_range(0..1000) as f64) / 1000.0)).collect()
        })
        .collect();
    TopKSimilarityMatrix::from_rows(n_s, n_t, k, rows).unwrap()
}

/// Community-structured random triples over `n` entities.
pub fn community_triples(n: usize, communities: usize, degree: f64, intra: f64, seed: u64) -> Vec<(String, String, String)> {
    let mut r = rng(seed);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let target = (n as f64 * degree / 2.0) as usize;
    let members: Vec<Vec<usize>> = (0..communities).map(|c| (c..n).step_by(communities).collect()).collect();
    for e in 0..n {
        let peers = &members[e % communities];
        let t = peers[r.gen_range(0..peers.len())];
        if t != e && seen.insert((e.min(t), e.max(t))) {
            out.push((format!("e{e}"), "r".to_string(), format!("e{t}")));
        }
    }
    while out.len() < target {
        let h = r.gen_range(0..n);
        let t = if r.gen_bool(intra) {
            let peers = &members[h % communities];
            peers[r.gen_range(0..peers.len())]
        } else {
            r.gen_range(0..n)
        };
        if h != t && seen.insert((h.min(t), h.max(t))) {
            out.push((format!("e{h}"), "r".to_string(), format!("e{t}")));
        }
    }
    out
}

/// Uniformly random assignment with part sizes as equal as possible.
pub fn random_balanced(n: usize, k: usize, seed: u64) -> Vec<u32> {
    let mut a: Vec<u32> = (0..n).map(|i| (i % k) as u32).collect();
    a.shuffle(&mut rng(seed));
    a
}

pub fn unweighted_cut(g: &KnowledgeGraph, assign: &[u32]) -> usize {
    g.undirected_edges().filter(|&(u, v, _)| assign[u as usize] != assign[v as usize]).count()
}

/// Dense forward pass: `H ← act(Â H W)` per layer with
/// `Â = diag(1/(1+deg)) (I + A)`, then row L2 normalization.
pub fn dense_gnn(adj: &[Vec<bool>], h0: &[Vec<f64>], weights: &[Vec<Vec<f64>>], tanh: bool) -> Vec<Vec<f64>> {
    let n = adj.len();
    let mut h = h0.to_vec();
    for w in weights {
        let dim = w.len();
        let mut agg = vec![vec![0.0; dim]; n];
        for i in 0..n {
            let deg = (0..n).filter(|&j| adj[i][j]).count() as f64;
            for j in 0..n {
                if i == j || adj[i][j] {
                    for c in 0..dim {
                        agg[i][c] += h[j][c] / (1.0 + deg);
                    }
                }
            }
        }
        let mut z = vec![vec![0.0; dim]; n];
        for i in 0..n {
            for c in 0..dim {
                let mut acc = 0.0;
                for r in 0..dim {
                    acc += agg[i][r] * w[r][c];
                }
                z[i][c] = if tanh { acc.tanh() } else { acc };
            }
        }
        h = z;
    }
    for row in &mut h {
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
        row.iter_mut().for_each(|x| *x /= norm);
    }
    h
}
