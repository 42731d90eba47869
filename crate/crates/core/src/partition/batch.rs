//! Mini-batch generation: vanilla seed-spreading (VPS), collaborative
//! METIS-style partitioning (CPS), and overlap expansion.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::kway::{part_capacity, partition_kway, Partition, WeightedGraph};
use crate::error::{Error, Result};
use crate::graph::{EntityId, KnowledgeGraph, SeedAlignment};

/// Subgraph induced by a set of entities, with local adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct InducedSubgraph {
    /// Global ids, ascending. Local id `i` is `entities[i]`.
    pub entities: Vec<EntityId>,
    /// Local neighbor lists (ascending local ids), self-loops excluded.
    pub neighbors: Vec<Vec<u32>>,
}

impl InducedSubgraph {
    pub fn induce(g: &KnowledgeGraph, mut entities: Vec<EntityId>) -> Self {
        entities.sort_unstable();
        entities.dedup();
        let local: HashMap<EntityId, u32> =
            entities.iter().enumerate().map(|(i, &e)| (e, i as u32)).collect();
        let neighbors = entities
            .iter()
            .map(|&e| g.edges(e).iter().filter_map(|x| local.get(&x.neighbor).copied()).collect())
            .collect();
        Self { entities, neighbors }
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn contains(&self, e: EntityId) -> bool {
        self.entities.binary_search(&e).is_ok()
    }

    pub fn local_id(&self, e: EntityId) -> Option<usize> {
        self.entities.binary_search(&e).ok()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }
}

/// A paired (source subgraph, target subgraph) training unit.
#[derive(Debug, Clone, PartialEq)]
pub struct MiniBatch {
    pub index: usize,
    pub source: InducedSubgraph,
    pub target: InducedSubgraph,
    /// Seeds with both endpoints inside this batch (global ids).
    pub local_seeds: SeedAlignment,
}

impl MiniBatch {
    pub fn assemble(
        index: usize,
        g_s: &KnowledgeGraph,
        g_t: &KnowledgeGraph,
        source: Vec<EntityId>,
        target: Vec<EntityId>,
        seeds: &SeedAlignment,
    ) -> Self {
        let source = InducedSubgraph::induce(g_s, source);
        let target = InducedSubgraph::induce(g_t, target);
        let local: Vec<_> =
            seeds.iter().filter(|&(s, t)| source.contains(s) && target.contains(t)).collect();
        let local_seeds = SeedAlignment::new(local, seeds.kind()).expect("subset of a 1-to-1 alignment");
        Self { index, source, target, local_seeds }
    }

    /// A single batch holding both graphs entirely.
    pub fn whole(g_s: &KnowledgeGraph, g_t: &KnowledgeGraph, seeds: &SeedAlignment) -> Self {
        Self::assemble(
            0,
            g_s,
            g_t,
            (0..g_s.entity_count() as EntityId).collect(),
            (0..g_t.entity_count() as EntityId).collect(),
            seeds,
        )
    }
}

/// Builds batches from per-entity part ids; batch `i` pairs source part `i`
/// with target part `i`.
pub fn batches_from_assignment(
    g_s: &KnowledgeGraph,
    g_t: &KnowledgeGraph,
    source_parts: &[u32],
    target_parts: &[u32],
    k: usize,
    seeds: &SeedAlignment,
) -> Vec<MiniBatch> {
    let mut src = vec![Vec::new(); k];
    let mut tgt = vec![Vec::new(); k];
    for (e, &p) in source_parts.iter().enumerate() {
        src[p as usize].push(e as EntityId);
    }
    for (e, &p) in target_parts.iter().enumerate() {
        tgt[p as usize].push(e as EntityId);
    }
    src.into_iter()
        .zip(tgt)
        .enumerate()
        .map(|(i, (s, t))| MiniBatch::assemble(i, g_s, g_t, s, t, seeds))
        .collect()
}

/// Vanilla strategy: seed pairs are dealt round-robin (after a seeded
/// shuffle) so batch seed counts differ by at most one; every other entity
/// lands in a uniformly random batch.
pub fn vps(
    g_s: &KnowledgeGraph,
    g_t: &KnowledgeGraph,
    seeds: &SeedAlignment,
    k: usize,
    rng_seed: u64,
) -> Result<Vec<MiniBatch>> {
    let (ns, nt) = (g_s.entity_count(), g_t.entity_count());
    if k == 0 || k > ns.min(nt) {
        return Err(Error::InvalidPartCount { k, n: ns.min(nt) });
    }
    seeds.validate(g_s, g_t)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut pairs = seeds.pairs().to_vec();
    pairs.shuffle(&mut rng);
    let mut src = vec![u32::MAX; ns];
    let mut tgt = vec![u32::MAX; nt];
    for (i, &(s, t)) in pairs.iter().enumerate() {
        let b = (i % k) as u32;
        src[s as usize] = b;
        tgt[t as usize] = b;
    }
    for p in src.iter_mut().chain(tgt.iter_mut()) {
        if *p == u32::MAX {
            *p = rng.gen_range(0..k as u32);
        }
    }
    Ok(batches_from_assignment(g_s, g_t, &src, &tgt, k, seeds))
}

/// Settings for collaborative partitioning.
#[derive(Debug, Clone, PartialEq)]
pub struct CpsConfig {
    pub k: usize,
    /// Weight given to every edge of a seed cluster (must be much larger than 1).
    pub w_prime: f64,
    /// Hubs per seed cluster.
    pub q: usize,
    pub imbalance: f64,
}

impl Default for CpsConfig {
    fn default() -> Self {
        Self { k: 5, w_prime: 1000.0, q: 1, imbalance: 0.1 }
    }
}

impl CpsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be >= 1".into()));
        }
        if !(self.w_prime > 1.0) {
            return Err(Error::InvalidConfig(format!("w_prime must exceed 1, got {}", self.w_prime)));
        }
        if self.q == 0 {
            return Err(Error::InvalidConfig("q must be >= 1".into()));
        }
        if !(self.imbalance >= 0.0) {
            return Err(Error::InvalidConfig(format!("imbalance must be >= 0, got {}", self.imbalance)));
        }
        Ok(())
    }
}

/// Re-weighted partitioning view of the target graph.
///
/// For each source part `i`, the targets of its seeds form a cluster: `q`
/// random hubs get a (virtual if absent) edge to every other member and every
/// edge inside the cluster is set to `w_prime`. Edges between targets whose
/// source counterparts sit in different parts get weight zero.
pub fn reweight_target(
    g_t: &KnowledgeGraph,
    source_partition: &Partition,
    seeds: &SeedAlignment,
    cfg: &CpsConfig,
    rng: &mut ChaCha8Rng,
) -> WeightedGraph {
    let k = source_partition.k;
    let mut group: HashMap<EntityId, u32> = HashMap::with_capacity(seeds.len());
    let mut clusters: Vec<Vec<EntityId>> = vec![Vec::new(); k];
    for (s, t) in seeds.iter() {
        let p = source_partition.assignment[s as usize];
        group.insert(t, p);
        clusters[p as usize].push(t);
    }
    let mut weights: HashMap<(u32, u32), f64> = HashMap::with_capacity(g_t.edge_count());
    for (u, v, w) in g_t.undirected_edges() {
        let w = match (group.get(&u), group.get(&v)) {
            (Some(a), Some(b)) if a == b => cfg.w_prime,
            (Some(_), Some(_)) => 0.0,
            _ => w,
        };
        weights.insert((u, v), w);
    }
    let cap = part_capacity(g_t.entity_count(), k, cfg.imbalance);
    for (i, members) in clusters.iter_mut().enumerate() {
        if members.len() > cap {
            log::warn!(
                "seed cluster {i} has {} targets but parts hold at most {cap}; balance wins",
                members.len()
            );
        }
        members.sort_unstable();
        let hubs: Vec<EntityId> = members.choose_multiple(rng, cfg.q.min(members.len())).copied().collect();
        for &h in &hubs {
            for &m in members.iter().filter(|&&m| m != h) {
                weights.insert((h.min(m), h.max(m)), cfg.w_prime);
            }
        }
    }
    let mut edges: Vec<_> = weights.into_iter().map(|((u, v), w)| (u, v, w)).collect();
    edges.sort_unstable_by_key(|e| (e.0, e.1));
    WeightedGraph::from_edges(g_t.entity_count(), edges)
}

/// Greedy maximum-overlap pairing of source parts with target parts.
/// Returns `target_part_of[source_part]`.
pub fn pair_parts(source_parts: &[u32], target_parts: &[u32], seeds: &SeedAlignment, k: usize) -> Vec<u32> {
    let mut counts = vec![vec![0usize; k]; k];
    for (s, t) in seeds.iter() {
        counts[source_parts[s as usize] as usize][target_parts[t as usize] as usize] += 1;
    }
    let mut cells: Vec<(usize, usize, usize)> =
        (0..k).flat_map(|i| (0..k).map(move |j| (i, j))).map(|(i, j)| (counts[i][j], i, j)).collect();
    cells.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut pairing = vec![u32::MAX; k];
    let mut taken = vec![false; k];
    for (_, i, j) in cells {
        if pairing[i] == u32::MAX && !taken[j] {
            pairing[i] = j as u32;
            taken[j] = true;
        }
    }
    pairing
}

/// Collaborative partitioning: partition the source graph, re-weight the
/// target graph around the resulting seed clusters, partition the target,
/// then pair parts by shared seed count.
pub fn metis_cps(
    g_s: &KnowledgeGraph,
    g_t: &KnowledgeGraph,
    seeds: &SeedAlignment,
    cfg: &CpsConfig,
    rng_seed: u64,
) -> Result<Vec<MiniBatch>> {
    cfg.validate()?;
    seeds.validate(g_s, g_t)?;
    let k = cfg.k;
    let (ns, nt) = (g_s.entity_count(), g_t.entity_count());
    if k > ns.min(nt) {
        return Err(Error::InvalidPartCount { k, n: ns.min(nt) });
    }
    if k == 1 {
        return Ok(vec![MiniBatch::whole(g_s, g_t, seeds)]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let source_seed = rng.gen::<u64>();
    let target_seed = rng.gen::<u64>();
    let ps = partition_kway(&WeightedGraph::from_kg(g_s), k, cfg.imbalance, source_seed)?;
    let pt = if seeds.is_empty() {
        log::warn!("no seeds: partitioning both graphs independently");
        partition_kway(&WeightedGraph::from_kg(g_t), k, cfg.imbalance, target_seed)?
    } else {
        let view = reweight_target(g_t, &ps, seeds, cfg, &mut rng);
        partition_kway(&view, k, cfg.imbalance, target_seed)?
    };
    let pairing = pair_parts(&ps.assignment, &pt.assignment, seeds, k);
    let mut inverse = vec![0u32; k];
    for (i, &j) in pairing.iter().enumerate() {
        inverse[j as usize] = i as u32;
    }
    let target_parts: Vec<u32> = pt.assignment.iter().map(|&j| inverse[j as usize]).collect();
    Ok(batches_from_assignment(g_s, g_t, &ps.assignment, &target_parts, k, seeds))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapConfig {
    /// Number of most similar batches (including itself) merged per batch.
    pub d_ov: usize,
}

impl Default for OverlapConfig {
    fn default() -> Self {
        Self { d_ov: 1 }
    }
}

/// Batch-to-batch similarity: `sim[a][b]` counts seeds whose source lies in
/// batch `a` and whose target lies in batch `b`.
pub fn batch_similarity(batches: &[MiniBatch], seeds: &SeedAlignment) -> Vec<Vec<usize>> {
    let k = batches.len();
    let mut src_of: HashMap<EntityId, Vec<usize>> = HashMap::new();
    let mut tgt_of: HashMap<EntityId, Vec<usize>> = HashMap::new();
    for (i, b) in batches.iter().enumerate() {
        for &e in &b.source.entities {
            src_of.entry(e).or_default().push(i);
        }
        for &e in &b.target.entities {
            tgt_of.entry(e).or_default().push(i);
        }
    }
    let mut sim = vec![vec![0usize; k]; k];
    for (s, t) in seeds.iter() {
        if let (Some(a), Some(b)) = (src_of.get(&s), tgt_of.get(&t)) {
            for &i in a {
                for &j in b {
                    sim[i][j] += 1;
                }
            }
        }
    }
    sim
}

/// Merges every batch with its `d_ov - 1` most similar other batches.
/// A batch always ranks itself first; `d_ov = 1` returns the input unchanged.
pub fn expand_overlap(
    g_s: &KnowledgeGraph,
    g_t: &KnowledgeGraph,
    batches: &[MiniBatch],
    seeds: &SeedAlignment,
    cfg: &OverlapConfig,
) -> Result<Vec<MiniBatch>> {
    let k = batches.len();
    if cfg.d_ov == 0 || cfg.d_ov > k {
        return Err(Error::InvalidOverlap { d_ov: cfg.d_ov, k });
    }
    if cfg.d_ov == 1 {
        return Ok(batches.to_vec());
    }
    let sim = batch_similarity(batches, seeds);
    Ok((0..k)
        .map(|a| {
            let partners = most_similar(&sim, a, cfg.d_ov - 1);
            let mut src: HashSet<EntityId> = batches[a].source.entities.iter().copied().collect();
            let mut tgt: HashSet<EntityId> = batches[a].target.entities.iter().copied().collect();
            for b in partners {
                src.extend(batches[b].source.entities.iter().copied());
                tgt.extend(batches[b].target.entities.iter().copied());
            }
            MiniBatch::assemble(
                batches[a].index,
                g_s,
                g_t,
                src.into_iter().collect(),
                tgt.into_iter().collect(),
                seeds,
            )
        })
        .collect())
}

/// The `m` batches other than `a` with the highest similarity to `a`
/// (ties: lower index first).
pub fn most_similar(sim: &[Vec<usize>], a: usize, m: usize) -> Vec<usize> {
    let mut others: Vec<usize> = (0..sim.len()).filter(|&b| b != a).collect();
    others.sort_by(|&x, &y| sim[a][y].cmp(&sim[a][x]).then(x.cmp(&y)));
    others.truncate(m);
    others
}

/// Source and target partitions described by disjoint batches.
pub fn batch_partitions(batches: &[MiniBatch], ns: usize, nt: usize, imbalance: f64) -> (Partition, Partition) {
    let k = batches.len();
    let mut src = vec![0u32; ns];
    let mut tgt = vec![0u32; nt];
    for (i, b) in batches.iter().enumerate() {
        for &e in &b.source.entities {
            src[e as usize] = i as u32;
        }
        for &e in &b.target.entities {
            tgt[e as usize] = i as u32;
        }
    }
    (
        Partition { assignment: src, k, imbalance },
        Partition { assignment: tgt, k, imbalance },
    )
}
