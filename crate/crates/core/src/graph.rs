//! Knowledge-graph representation and the alignment data model.
//!
//! A [`KnowledgeGraph`] interns entity and relation labels into dense ids,
//! keeps the deduplicated directed triples verbatim, and exposes an
//! undirected weighted adjacency view used by the partitioner and the GNN.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type EntityId = u32;
pub type RelationId = u32;

/// Bidirectional label ↔ dense id table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Interner {
    labels: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Interner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, label: &str) -> u32 {
        if let Some(&id) = self.ids.get(label) {
            return id;
        }
        let id = self.labels.len() as u32;
        self.labels.push(label.to_owned());
        self.ids.insert(label.to_owned(), id);
        id
    }

    pub fn get(&self, label: &str) -> Option<u32> {
        self.ids.get(label).copied()
    }

    pub fn label(&self, id: u32) -> Option<&str> {
        self.labels.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

/// One undirected adjacency entry. Parallel triples between the same pair
/// are collapsed; `relation` is the first contributing relation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub neighbor: EntityId,
    pub relation: RelationId,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    entities: Interner,
    relations: Interner,
    triples: Vec<Triple>,
    offsets: Vec<usize>,
    edges: Vec<Edge>,
}

/// Incremental graph construction. Entities may be added without triples,
/// which is the only way to obtain isolated entities.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    entities: Interner,
    relations: Interner,
    triples: Vec<Triple>,
    seen: HashSet<Triple>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_entity(&mut self, label: &str) -> EntityId {
        self.entities.intern(label)
    }

    /// Adds a triple by label; returns `false` when it was a duplicate.
    pub fn add_triple(&mut self, head: &str, relation: &str, tail: &str) -> bool {
        let t = Triple {
            head: self.entities.intern(head),
            relation: self.relations.intern(relation),
            tail: self.entities.intern(tail),
        };
        if self.seen.insert(t) {
            self.triples.push(t);
            true
        } else {
            false
        }
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn build(self) -> Result<KnowledgeGraph> {
        if self.entities.is_empty() {
            return Err(Error::EmptyGraph);
        }
        let n = self.entities.len();
        let mut merged: Vec<HashMap<EntityId, (RelationId, f64)>> = vec![HashMap::new(); n];
        for t in &self.triples {
            if t.head == t.tail {
                continue;
            }
            for (a, b) in [(t.head, t.tail), (t.tail, t.head)] {
                merged[a as usize]
                    .entry(b)
                    .and_modify(|e| e.1 += 1.0)
                    .or_insert((t.relation, 1.0));
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut edges = Vec::new();
        offsets.push(0);
        for m in merged {
            let mut row: Vec<Edge> = m
                .into_iter()
                .map(|(neighbor, (relation, weight))| Edge { neighbor, relation, weight })
                .collect();
            row.sort_unstable_by_key(|e| e.neighbor);
            edges.extend(row);
            offsets.push(edges.len());
        }
        Ok(KnowledgeGraph {
            entities: self.entities,
            relations: self.relations,
            triples: self.triples,
            offsets,
            edges,
        })
    }
}

/// Builds a graph from labelled triples. Ids follow first appearance order.
pub fn build_graph<S: AsRef<str>>(triples: &[(S, S, S)]) -> Result<KnowledgeGraph> {
    if triples.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let mut b = GraphBuilder::new();
    for (i, (h, r, t)) in triples.iter().enumerate() {
        let (h, r, t) = (h.as_ref(), r.as_ref(), t.as_ref());
        if h.is_empty() || r.is_empty() || t.is_empty() {
            return Err(Error::EmptyLabel(i));
        }
        b.add_triple(h, r, t);
    }
    b.build()
}

impl KnowledgeGraph {
    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    pub fn entities(&self) -> &Interner {
        &self.entities
    }

    pub fn relations(&self) -> &Interner {
        &self.relations
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn entity_label(&self, id: EntityId) -> &str {
        self.entities.label(id).expect("entity id in range")
    }

    pub fn entity_id(&self, label: &str) -> Option<EntityId> {
        self.entities.get(label)
    }

    pub(crate) fn check(&self, id: EntityId) -> Result<()> {
        if (id as usize) < self.entity_count() {
            Ok(())
        } else {
            Err(Error::EntityOutOfRange { id: id as usize, len: self.entity_count() })
        }
    }

    /// Adjacency row of `e`, sorted by neighbor id. Panics on invalid ids.
    pub fn edges(&self, e: EntityId) -> &[Edge] {
        let e = e as usize;
        &self.edges[self.offsets[e]..self.offsets[e + 1]]
    }

    pub fn degree(&self, e: EntityId) -> usize {
        self.edges(e).len()
    }

    /// Neighbors of `e` in ascending id order with their collapsed weights.
    pub fn neighbors(&self, e: EntityId) -> Result<Vec<(EntityId, f64)>> {
        self.check(e)?;
        Ok(self.edges(e).iter().map(|x| (x.neighbor, x.weight)).collect())
    }

    /// Number of undirected adjacency edges (each counted once).
    pub fn edge_count(&self) -> usize {
        self.edges.len() / 2
    }

    /// Undirected edges `(u, v, weight)` with `u < v`.
    pub fn undirected_edges(&self) -> impl Iterator<Item = (EntityId, EntityId, f64)> + '_ {
        (0..self.entity_count() as EntityId).flat_map(move |u| {
            self.edges(u)
                .iter()
                .filter(move |e| e.neighbor > u)
                .map(move |e| (u, e.neighbor, e.weight))
        })
    }

    /// Resolves a triple back to its labels.
    pub fn triple_labels(&self, t: &Triple) -> (&str, &str, &str) {
        (
            self.entity_label(t.head),
            self.relations.label(t.relation).expect("relation id in range"),
            self.entity_label(t.tail),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedKind {
    TrainSeed,
    PseudoSeed,
    GroundTruth,
}

/// A 1-to-1 list of (source, target) entity pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedAlignment {
    pairs: Vec<(EntityId, EntityId)>,
    kind: SeedKind,
}

impl SeedAlignment {
    pub fn new(pairs: Vec<(EntityId, EntityId)>, kind: SeedKind) -> Result<Self> {
        let mut src = HashSet::with_capacity(pairs.len());
        let mut tgt = HashSet::with_capacity(pairs.len());
        for &(s, t) in &pairs {
            if !src.insert(s) {
                return Err(Error::NotOneToOne(format!("source {s} appears twice")));
            }
            if !tgt.insert(t) {
                return Err(Error::NotOneToOne(format!("target {t} appears twice")));
            }
        }
        Ok(Self { pairs, kind })
    }

    pub fn empty(kind: SeedKind) -> Self {
        Self { pairs: Vec::new(), kind }
    }

    pub fn pairs(&self) -> &[(EntityId, EntityId)] {
        &self.pairs
    }

    pub fn kind(&self) -> SeedKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (EntityId, EntityId)> + '_ {
        self.pairs.iter().copied()
    }

    /// Checks every id against the two graphs.
    pub fn validate(&self, source: &KnowledgeGraph, target: &KnowledgeGraph) -> Result<()> {
        for &(s, t) in &self.pairs {
            source.check(s)?;
            target.check(t)?;
        }
        Ok(())
    }

    /// Appends pairs from `other` whose endpoints are both unused in `self`.
    /// Pairs already present win on conflict.
    pub fn merged_with(&self, other: &SeedAlignment) -> SeedAlignment {
        let mut src: HashSet<EntityId> = self.pairs.iter().map(|p| p.0).collect();
        let mut tgt: HashSet<EntityId> = self.pairs.iter().map(|p| p.1).collect();
        let mut pairs = self.pairs.clone();
        for &(s, t) in &other.pairs {
            if !src.contains(&s) && !tgt.contains(&t) {
                src.insert(s);
                tgt.insert(t);
                pairs.push((s, t));
            }
        }
        SeedAlignment { pairs, kind: self.kind }
    }

    /// Random split into (first, rest) with `ratio` of the pairs in `first`.
    pub fn split(&self, ratio: f64, rng_seed: u64) -> (SeedAlignment, SeedAlignment) {
        let mut pairs = self.pairs.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        pairs.shuffle(&mut rng);
        let cut = ((pairs.len() as f64) * ratio).round() as usize;
        let rest = pairs.split_off(cut.min(pairs.len()));
        (
            SeedAlignment { pairs, kind: SeedKind::TrainSeed },
            SeedAlignment { pairs: rest, kind: SeedKind::GroundTruth },
        )
    }

    pub fn with_kind(mut self, kind: SeedKind) -> Self {
        self.kind = kind;
        self
    }
}

/// Predicted alignment: each source id appears at most once.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AlignmentMapping {
    pub matches: Vec<(EntityId, EntityId, f64)>,
}

impl AlignmentMapping {
    pub fn len(&self) -> usize {
        self.matches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }
}
