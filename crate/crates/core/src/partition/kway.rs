//! Multilevel k-way partitioning of an edge-weighted undirected graph.
//!
//! Three stages: heavy-edge matching contracts the graph, greedy region
//! growing assigns the coarsest graph, and boundary refinement moves single
//! vertices by weighted-cut gain while each level is projected back.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::KnowledgeGraph;

const INITIAL_TRIALS: usize = 8;
const REFINE_PASSES: usize = 12;
const UNASSIGNED: u32 = u32::MAX;

/// Undirected weighted graph in CSR form with integer vertex weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    xadj: Vec<usize>,
    adjncy: Vec<u32>,
    adjwgt: Vec<f64>,
    vwgt: Vec<u32>,
}

impl WeightedGraph {
    /// Builds a graph on `n` unit-weight vertices. Repeated edges are summed,
    /// self-loops are ignored.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (u32, u32, f64)>) -> Self {
        let mut rows: Vec<HashMap<u32, f64>> = vec![HashMap::new(); n];
        for (u, v, w) in edges {
            if u == v {
                continue;
            }
            *rows[u as usize].entry(v).or_insert(0.0) += w;
            *rows[v as usize].entry(u).or_insert(0.0) += w;
        }
        Self::from_rows(rows.into_iter().map(|r| r.into_iter().collect()).collect(), vec![1; n])
    }

    fn from_rows(rows: Vec<Vec<(u32, f64)>>, vwgt: Vec<u32>) -> Self {
        let mut xadj = Vec::with_capacity(rows.len() + 1);
        let mut adjncy = Vec::new();
        let mut adjwgt = Vec::new();
        xadj.push(0);
        for mut row in rows {
            row.sort_unstable_by_key(|e| e.0);
            for (v, w) in row {
                adjncy.push(v);
                adjwgt.push(w);
            }
            xadj.push(adjncy.len());
        }
        Self { xadj, adjncy, adjwgt, vwgt }
    }

    /// Partitioning view of a knowledge graph's adjacency.
    pub fn from_kg(g: &KnowledgeGraph) -> Self {
        let rows = (0..g.entity_count() as u32)
            .map(|u| g.edges(u).iter().map(|e| (e.neighbor, e.weight)).collect())
            .collect();
        Self::from_rows(rows, vec![1; g.entity_count()])
    }

    pub fn vertex_count(&self) -> usize {
        self.vwgt.len()
    }

    pub fn total_vertex_weight(&self) -> u64 {
        self.vwgt.iter().map(|&w| w as u64).sum()
    }

    pub fn neighbors(&self, u: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.xadj[u]..self.xadj[u + 1];
        self.adjncy[r.clone()].iter().zip(&self.adjwgt[r]).map(|(&v, &w)| (v as usize, w))
    }

    pub fn edge_weight(&self, u: usize, v: usize) -> Option<f64> {
        let r = self.xadj[u]..self.xadj[u + 1];
        let row = &self.adjncy[r.clone()];
        row.binary_search(&(v as u32)).ok().map(|i| self.adjwgt[r.start + i])
    }

    /// Undirected edges `(u, v, w)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.vertex_count())
            .flat_map(move |u| self.neighbors(u).filter(move |e| e.0 > u).map(move |(v, w)| (u, v, w)))
    }
}

/// A K-way assignment of every vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub assignment: Vec<u32>,
    pub k: usize,
    pub imbalance: f64,
}

/// Largest admissible part size: `floor((1 + imbalance) * ceil(n / k))`.
pub fn part_capacity(n: usize, k: usize, imbalance: f64) -> usize {
    let ideal = n.div_ceil(k);
    (((1.0 + imbalance) * ideal as f64) + 1e-9).floor() as usize
}

impl Partition {
    pub fn part_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &p in &self.assignment {
            sizes[p as usize] += 1;
        }
        sizes
    }

    pub fn capacity(&self) -> usize {
        part_capacity(self.assignment.len(), self.k, self.imbalance)
    }

    pub fn is_balanced(&self) -> bool {
        let cap = self.capacity();
        self.part_sizes().iter().all(|&s| s <= cap)
    }

    /// Sum of weights of edges whose endpoints lie in different parts.
    pub fn cut(&self, g: &WeightedGraph) -> f64 {
        cut_weight(g, &self.assignment)
    }

    /// Members of each part in ascending id order.
    pub fn members(&self) -> Vec<Vec<u32>> {
        let mut parts = vec![Vec::new(); self.k];
        for (v, &p) in self.assignment.iter().enumerate() {
            parts[p as usize].push(v as u32);
        }
        parts
    }
}

pub(crate) fn cut_weight(g: &WeightedGraph, assignment: &[u32]) -> f64 {
    g.edges().filter(|&(u, v, _)| assignment[u] != assignment[v]).map(|e| e.2).sum()
}

/// Partitions `g` into `k` balanced parts minimizing the weighted edge cut.
pub fn partition_kway(g: &WeightedGraph, k: usize, imbalance: f64, rng_seed: u64) -> Result<Partition> {
    let n = g.vertex_count();
    if k == 0 || k > n {
        return Err(Error::InvalidPartCount { k, n });
    }
    if !(imbalance >= 0.0) {
        return Err(Error::InvalidConfig(format!("imbalance must be >= 0, got {imbalance}")));
    }
    if k == 1 {
        return Ok(Partition { assignment: vec![0; n], k, imbalance });
    }
    let cap = part_capacity(n, k, imbalance) as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);

    // coarsening
    let coarsen_to = 200.max(20 * k);
    let max_vwgt = ((1.5 * n as f64 / coarsen_to as f64).ceil() as u32).clamp(1, cap as u32);
    let mut levels: Vec<(WeightedGraph, Vec<u32>)> = Vec::new();
    let mut current = g.clone();
    while current.vertex_count() > coarsen_to {
        let (coarse, cmap) = coarsen_once(&current, max_vwgt, &mut rng);
        let stalled = coarse.vertex_count() as f64 > 0.95 * current.vertex_count() as f64;
        let finer = std::mem::replace(&mut current, coarse);
        levels.push((finer, cmap));
        if stalled {
            break;
        }
    }

    // initial partition on the coarsest graph
    let mut best: Option<(u64, f64, Vec<u32>)> = None;
    for trial in 0..INITIAL_TRIALS {
        let from_hubs = trial % 2 == 1;
        let mut assign = grow_regions(&current, k, cap, from_hubs, &mut rng);
        refine(&current, &mut assign, k, cap, &mut rng);
        enforce_balance(&current, &mut assign, k, cap);
        refine(&current, &mut assign, k, cap, &mut rng);
        let over = overweight(&current, &assign, k, cap);
        let cut = cut_weight(&current, &assign);
        let better = match &best {
            None => true,
            Some((bo, bc, _)) => (over, cut).partial_cmp(&(*bo, *bc)) == Some(Ordering::Less),
        };
        if better {
            best = Some((over, cut, assign));
        }
    }
    let mut assign = best.expect("at least one trial").2;

    // uncoarsening
    while let Some((finer, cmap)) = levels.pop() {
        assign = cmap.iter().map(|&c| assign[c as usize]).collect();
        current = finer;
        refine(&current, &mut assign, k, cap, &mut rng);
        enforce_balance(&current, &mut assign, k, cap);
    }
    debug_assert_eq!(current.vertex_count(), n);
    enforce_balance(&current, &mut assign, k, cap);
    refine(&current, &mut assign, k, cap, &mut rng);

    let p = Partition { assignment: assign, k, imbalance };
    if !p.is_balanced() {
        return Err(Error::Invariant("partition exceeds balance bound".into()));
    }
    Ok(p)
}

/// Convenience wrapper partitioning a knowledge graph's adjacency.
pub fn partition_graph(g: &KnowledgeGraph, k: usize, imbalance: f64, rng_seed: u64) -> Result<Partition> {
    partition_kway(&WeightedGraph::from_kg(g), k, imbalance, rng_seed)
}

/// One round of heavy-edge matching. Returns the coarse graph and the
/// fine-to-coarse vertex map.
fn coarsen_once(g: &WeightedGraph, max_vwgt: u32, rng: &mut ChaCha8Rng) -> (WeightedGraph, Vec<u32>) {
    let n = g.vertex_count();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut cmap = vec![UNASSIGNED; n];
    let mut nc = 0u32;
    for &u in &order {
        if cmap[u] != UNASSIGNED {
            continue;
        }
        let mut mate = None;
        let mut heaviest = 0.0;
        for (v, w) in g.neighbors(u) {
            if cmap[v] == UNASSIGNED && w > heaviest && g.vwgt[u] + g.vwgt[v] <= max_vwgt {
                heaviest = w;
                mate = Some(v);
            }
        }
        if let Some(v) = mate {
            cmap[u] = nc;
            cmap[v] = nc;
            nc += 1;
        }
    }
    // two-hop matching: unmatched vertices sharing their heaviest neighbor
    // are merged pairwise, which lets star-shaped clusters collapse
    let mut by_anchor: HashMap<usize, Vec<usize>> = HashMap::new();
    for &u in &order {
        if cmap[u] != UNASSIGNED {
            continue;
        }
        let anchor = g.neighbors(u).filter(|e| e.1 > 0.0).max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        if let Some((a, _)) = anchor {
            by_anchor.entry(a).or_default().push(u);
        }
    }
    let mut anchors: Vec<usize> = by_anchor.keys().copied().collect();
    anchors.sort_unstable();
    for a in anchors {
        let group = &by_anchor[&a];
        let mut open: Option<usize> = None;
        for &u in group {
            match open {
                Some(v) if g.vwgt[u] + g.vwgt[v] <= max_vwgt => {
                    cmap[u] = nc;
                    cmap[v] = nc;
                    nc += 1;
                    open = None;
                }
                Some(_) => {}
                None => open = Some(u),
            }
        }
    }
    for c in cmap.iter_mut().filter(|c| **c == UNASSIGNED) {
        *c = nc;
        nc += 1;
    }
    let nc = nc as usize;
    let mut vwgt = vec![0u32; nc];
    let mut rows: Vec<HashMap<u32, f64>> = vec![HashMap::new(); nc];
    for u in 0..n {
        let cu = cmap[u];
        vwgt[cu as usize] += g.vwgt[u];
        for (v, w) in g.neighbors(u) {
            let cv = cmap[v];
            if cu != cv {
                *rows[cu as usize].entry(cv).or_insert(0.0) += w;
            }
        }
    }
    let rows = rows.into_iter().map(|r| r.into_iter().collect()).collect();
    (WeightedGraph::from_rows(rows, vwgt), cmap)
}

#[derive(PartialEq)]
struct Candidate {
    gain: f64,
    vertex: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain.total_cmp(&other.gain).then(other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Greedy graph growing: each part starts from the unassigned vertex farthest
/// from everything assigned so far and absorbs the frontier vertex with the
/// best gain (weight into the region minus weight to other unassigned
/// vertices) until it reaches its share of the total weight. With
/// `from_hubs`, parts start from the unassigned vertex with the heaviest
/// connection to other unassigned vertices instead.
fn grow_regions(g: &WeightedGraph, k: usize, cap: u64, from_hubs: bool, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let n = g.vertex_count();
    let total = g.total_vertex_weight();
    let mut assign = vec![UNASSIGNED; n];
    let mut assigned_weight = 0u64;
    let mut remaining = n;
    for p in 0..k as u32 {
        if remaining == 0 {
            break;
        }
        if p as usize == k - 1 {
            for a in assign.iter_mut().filter(|a| **a == UNASSIGNED) {
                *a = p;
            }
            break;
        }
        let target = total * (p as u64 + 1) / k as u64 - assigned_weight;
        let mut gain: Vec<f64> = (0..n)
            .map(|u| -g.neighbors(u).filter(|&(x, _)| assign[x] == UNASSIGNED).map(|e| e.1).sum::<f64>())
            .collect();
        let seed = if from_hubs {
            (0..n)
                .filter(|&u| assign[u] == UNASSIGNED)
                .min_by(|&a, &b| gain[a].total_cmp(&gain[b]).then(a.cmp(&b)))
                .expect("unassigned vertex remains")
        } else if p == 0 {
            rng.gen_range(0..n)
        } else {
            farthest_unassigned(g, &assign, rng)
        };
        let mut weight = 0u64;
        let mut heap = BinaryHeap::new();
        heap.push(Candidate { gain: f64::INFINITY, vertex: seed });
        while weight < target {
            let v = match heap.pop() {
                Some(c) => {
                    if assign[c.vertex] != UNASSIGNED || (c.gain.is_finite() && c.gain != gain[c.vertex]) {
                        continue;
                    }
                    c.vertex
                }
                None => match pick_unassigned(g, &assign, cap - weight, rng) {
                    Some(v) => v,
                    None => break,
                },
            };
            let vw = g.vwgt[v] as u64;
            if weight + vw > cap {
                continue;
            }
            assign[v] = p;
            weight += vw;
            remaining -= 1;
            for (u, w) in g.neighbors(v) {
                if assign[u] == UNASSIGNED {
                    // the edge moves from "outside" to "into the region"
                    gain[u] += 2.0 * w;
                    heap.push(Candidate { gain: gain[u], vertex: u });
                }
            }
        }
        assigned_weight += weight;
    }
    assign
}

/// A random unassigned vertex of weight at most `room`.
fn pick_unassigned(g: &WeightedGraph, assign: &[u32], room: u64, rng: &mut ChaCha8Rng) -> Option<usize> {
    let free: Vec<usize> =
        (0..assign.len()).filter(|&v| assign[v] == UNASSIGNED && g.vwgt[v] as u64 <= room).collect();
    free.choose(rng).copied()
}

/// Multi-source BFS from every assigned vertex; returns the unassigned vertex
/// with the largest hop distance (unreachable vertices count as farthest).
fn farthest_unassigned(g: &WeightedGraph, assign: &[u32], rng: &mut ChaCha8Rng) -> usize {
    let n = g.vertex_count();
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for v in 0..n {
        if assign[v] != UNASSIGNED {
            dist[v] = 0;
            queue.push_back(v);
        }
    }
    while let Some(u) = queue.pop_front() {
        for (v, _) in g.neighbors(u) {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let far = (0..n).filter(|&v| assign[v] == UNASSIGNED).map(|v| dist[v]).max().unwrap_or(0);
    let ties: Vec<usize> = (0..n).filter(|&v| assign[v] == UNASSIGNED && dist[v] == far).collect();
    *ties.choose(rng).expect("an unassigned vertex exists")
}

fn part_weights(g: &WeightedGraph, assign: &[u32], k: usize) -> Vec<u64> {
    let mut w = vec![0u64; k];
    for (v, &p) in assign.iter().enumerate() {
        w[p as usize] += g.vwgt[v] as u64;
    }
    w
}

fn overweight(g: &WeightedGraph, assign: &[u32], k: usize, cap: u64) -> u64 {
    part_weights(g, assign, k).iter().map(|&w| w.saturating_sub(cap)).sum()
}

/// Connection weight of `v` to every part it touches.
fn connectivity(g: &WeightedGraph, assign: &[u32], v: usize, conn: &mut Vec<(u32, f64)>) {
    conn.clear();
    for (u, w) in g.neighbors(v) {
        let p = assign[u];
        match conn.iter_mut().find(|c| c.0 == p) {
            Some(c) => c.1 += w,
            None => conn.push((p, w)),
        }
    }
}

/// Boundary refinement: single-vertex moves with positive cut gain that keep
/// the destination within capacity. Zero-gain moves are taken only when they
/// strictly improve balance.
fn refine(g: &WeightedGraph, assign: &mut [u32], k: usize, cap: u64, rng: &mut ChaCha8Rng) {
    let n = g.vertex_count();
    let mut pw = part_weights(g, assign, k);
    let mut order: Vec<usize> = (0..n).collect();
    let mut conn = Vec::new();
    for _ in 0..REFINE_PASSES {
        order.shuffle(rng);
        let mut moved = 0usize;
        for &v in &order {
            let from = assign[v];
            connectivity(g, assign, v, &mut conn);
            if conn.iter().all(|c| c.0 == from) {
                continue;
            }
            let internal = conn.iter().find(|c| c.0 == from).map_or(0.0, |c| c.1);
            let vw = g.vwgt[v] as u64;
            let mut best: Option<(u32, f64)> = None;
            for &(to, w) in &conn {
                if to == from || pw[to as usize] + vw > cap {
                    continue;
                }
                let gain = w - internal;
                let better = match best {
                    None => true,
                    Some((bt, bg)) => gain > bg || (gain == bg && pw[to as usize] < pw[bt as usize]),
                };
                if better {
                    best = Some((to, gain));
                }
            }
            if let Some((to, gain)) = best {
                let balance_gain = pw[to as usize] + vw < pw[from as usize];
                if gain > 0.0 || (gain == 0.0 && balance_gain) {
                    assign[v] = to;
                    pw[from as usize] -= vw;
                    pw[to as usize] += vw;
                    moved += 1;
                }
            }
        }
        if moved == 0 {
            break;
        }
    }
}

/// Moves vertices out of overweight parts, cheapest cut increase first,
/// until every part fits or no admissible move remains.
fn enforce_balance(g: &WeightedGraph, assign: &mut [u32], k: usize, cap: u64) {
    let mut pw = part_weights(g, assign, k);
    let mut conn = Vec::new();
    loop {
        let Some(over) = (0..k).filter(|&p| pw[p] > cap).max_by_key(|&p| pw[p]) else {
            return;
        };
        let mut moves: Vec<(f64, usize, u32)> = Vec::new();
        for v in 0..g.vertex_count() {
            if assign[v] as usize != over {
                continue;
            }
            connectivity(g, assign, v, &mut conn);
            let internal = conn.iter().find(|c| c.0 as usize == over).map_or(0.0, |c| c.1);
            let vw = g.vwgt[v] as u64;
            let mut best: Option<(f64, u32)> = None;
            for to in 0..k as u32 {
                if to as usize == over || pw[to as usize] + vw > cap {
                    continue;
                }
                let ext = conn.iter().find(|c| c.0 == to).map_or(0.0, |c| c.1);
                let gain = ext - internal;
                if best.map_or(true, |(bg, bt)| gain > bg || (gain == bg && pw[to as usize] < pw[bt as usize])) {
                    best = Some((gain, to));
                }
            }
            if let Some((gain, to)) = best {
                moves.push((gain, v, to));
            }
        }
        if moves.is_empty() {
            return;
        }
        moves.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut progressed = false;
        for (_, v, to) in moves {
            if pw[over] <= cap {
                break;
            }
            let vw = g.vwgt[v] as u64;
            if pw[to as usize] + vw > cap {
                continue;
            }
            assign[v] = to;
            pw[over] -= vw;
            pw[to as usize] += vw;
            progressed = true;
        }
        if !progressed {
            return;
        }
    }
}
