//! Synthetic bilingual benchmark: a community-structured source graph, a
//! noisy target copy with optional unmatched entities, and the planted
//! mapping between them.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{GraphBuilder, KnowledgeGraph, SeedAlignment, SeedKind};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub entities_per_side: usize,
    pub avg_degree: f64,
    pub community_count: usize,
    /// Fraction of shared target names perturbed by 1 to 3 character edits.
    pub name_noise: f64,
    /// Fraction of target triples whose tail is replaced at random.
    pub structure_noise: f64,
    /// Extra target entities with no source counterpart, relative to `entities_per_side`.
    pub unknown_entity_ratio: f64,
    /// Shared entities each unknown entity is linked to.
    pub min_anchors: usize,
    /// Probability that an edge stays inside its community.
    pub intra_community: f64,
    pub relation_count: usize,
    pub rng_seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            entities_per_side: 5000,
            avg_degree: 6.0,
            community_count: 25,
            name_noise: 0.0,
            structure_noise: 0.1,
            unknown_entity_ratio: 0.0,
            min_anchors: 5,
            intra_community: 0.9,
            relation_count: 20,
            rng_seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let n = self.entities_per_side;
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if n < 2 {
            return bad(format!("entities_per_side must be >= 2, got {n}"));
        }
        if !(self.avg_degree >= 1.0 && self.avg_degree < (n - 1) as f64) {
            return bad(format!("avg_degree must be in [1, {}), got {}", n - 1, self.avg_degree));
        }
        if self.community_count == 0 || self.community_count > n / 2 {
            return bad(format!("community_count must be in [1, {}], got {}", n / 2, self.community_count));
        }
        for (name, v) in [
            ("name_noise", self.name_noise),
            ("structure_noise", self.structure_noise),
            ("intra_community", self.intra_community),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must be in [0, 1], got {v}"));
            }
        }
        if !(self.unknown_entity_ratio >= 0.0 && self.unknown_entity_ratio.is_finite()) {
            return bad(format!("unknown_entity_ratio must be >= 0, got {}", self.unknown_entity_ratio));
        }
        if self.relation_count == 0 {
            return bad("relation_count must be >= 1".into());
        }
        Ok(())
    }
}

const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st", "tr"];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];

/// Distinct pronounceable words of two or three syllables.
fn vocabulary(size: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut words = Vec::with_capacity(size);
    while words.len() < size {
        let syllables = rng.gen_range(2..=3);
        let w: String = (0..syllables)
            .map(|_| format!("{}{}", ONSETS.choose(rng).unwrap(), VOWELS.choose(rng).unwrap()))
            .collect();
        if seen.insert(w.clone()) {
            words.push(w);
        }
    }
    words
}

fn unique_names(count: usize, vocab: &[String], taken: &mut HashSet<String>, rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let len = rng.gen_range(2..=3);
        let name = (0..len).map(|_| vocab.choose(rng).unwrap().as_str()).collect::<Vec<_>>().join(" ");
        if taken.insert(name.clone()) {
            out.push(name);
        }
    }
    out
}

/// Applies 1 to 3 random letter edits inside the words of `name`.
fn perturb(name: &str, rng: &mut ChaCha8Rng) -> String {
    let mut chars: Vec<char> = name.chars().collect();
    for _ in 0..rng.gen_range(1..=3) {
        let letters: Vec<usize> = (0..chars.len()).filter(|&i| chars[i] != ' ').collect();
        let i = *letters.choose(rng).unwrap();
        let c = (b'a' + rng.gen_range(0..26u8)) as char;
        let word_len = chars[..i].iter().rev().take_while(|&&c| c != ' ').count()
            + chars[i..].iter().take_while(|&&c| c != ' ').count();
        match rng.gen_range(0..3) {
            0 => chars[i] = c,
            1 if word_len > 2 => {
                chars.remove(i);
            }
            _ => chars.insert(i, c),
        }
    }
    chars.into_iter().collect()
}

/// Builds `(source, target, truth)`. Entity labels are their names.
pub fn generate_synthetic_benchmark(spec: &SyntheticSpec) -> Result<(KnowledgeGraph, KnowledgeGraph, SeedAlignment)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let n = spec.entities_per_side;
    let c = spec.community_count;
    let vocab = vocabulary(400, &mut rng);
    let mut taken = HashSet::new();
    let names = unique_names(n, &vocab, &mut taken, &mut rng);
    let community = |e: usize| e % c;
    let members: Vec<Vec<usize>> = (0..c).map(|k| (k..n).step_by(c).collect()).collect();
    let relation = |rng: &mut ChaCha8Rng| format!("rel_{}", rng.gen_range(0..spec.relation_count));

    // source triples over entity indices; each entity gets one in-community link first
    let mut edges: Vec<(usize, String, usize)> = Vec::new();
    let mut seen: HashSet<(usize, usize)> = HashSet::new();
    let mut push = |h: usize, t: usize, r: String, edges: &mut Vec<(usize, String, usize)>| {
        if h != t && seen.insert((h.min(t), h.max(t))) {
            edges.push((h, r, t));
        }
    };
    for e in 0..n {
        let peers = &members[community(e)];
        let t = peers[rng.gen_range(0..peers.len())];
        let t = if t == e { peers[(peers.iter().position(|&p| p == e).unwrap() + 1) % peers.len()] } else { t };
        let r = relation(&mut rng);
        push(e, t, r, &mut edges);
    }
    let target_edges = ((n as f64) * spec.avg_degree / 2.0).round() as usize;
    let mut attempts = 0usize;
    while edges.len() < target_edges && attempts < 50 * target_edges {
        attempts += 1;
        let h = rng.gen_range(0..n);
        let t = if rng.gen_bool(spec.intra_community) {
            let peers = &members[community(h)];
            peers[rng.gen_range(0..peers.len())]
        } else {
            rng.gen_range(0..n)
        };
        let r = relation(&mut rng);
        push(h, t, r, &mut edges);
    }

    let mut gs = GraphBuilder::new();
    for (h, r, t) in &edges {
        gs.add_triple(&names[*h], r, &names[*t]);
    }
    let g_s = gs.build()?;

    // target names: a fixed-size subset perturbed, kept unique
    let mut tgt_names = names.clone();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let noisy = ((n as f64) * spec.name_noise).round() as usize;
    for &e in &order[..noisy] {
        loop {
            let cand = perturb(&names[e], &mut rng);
            if cand != names[e] && !taken.contains(&cand) && !crate::name::tokenize(&cand).is_empty() {
                taken.insert(cand.clone());
                tgt_names[e] = cand;
                break;
            }
        }
    }

    // target structure: rewire a fixed fraction of tails
    let mut tgt_edges = edges.clone();
    let mut idx: Vec<usize> = (0..tgt_edges.len()).collect();
    idx.shuffle(&mut rng);
    let rewired = ((tgt_edges.len() as f64) * spec.structure_noise).round() as usize;
    for &i in &idx[..rewired] {
        let h = tgt_edges[i].0;
        let mut t = rng.gen_range(0..n);
        while t == h {
            t = rng.gen_range(0..n);
        }
        tgt_edges[i].2 = t;
    }
    let mut covered = vec![false; n];
    for (h, _, t) in &tgt_edges {
        covered[*h] = true;
        covered[*t] = true;
    }
    for e in (0..n).filter(|&e| !covered[e]) {
        let t = if e == 0 { 1 } else { e - 1 };
        tgt_edges.push((e, relation(&mut rng), t));
    }

    let unknown = ((n as f64) * spec.unknown_entity_ratio).round() as usize;
    let unknown_names = unique_names(unknown, &vocab, &mut taken, &mut rng);
    let anchors = spec.min_anchors.clamp(1, n);
    let mut tgt_labels = tgt_names.clone();
    for (j, _) in unknown_names.iter().enumerate() {
        let u = n + j;
        for a in rand::seq::index::sample(&mut rng, n, anchors) {
            tgt_edges.push((u, relation(&mut rng), a));
        }
    }
    tgt_labels.extend(unknown_names);

    // declare target entities in random order so ids carry no hint of the mapping
    let mut gt = GraphBuilder::new();
    let mut decl: Vec<usize> = (0..tgt_labels.len()).collect();
    decl.shuffle(&mut rng);
    for &e in &decl {
        gt.add_entity(&tgt_labels[e]);
    }
    tgt_edges.shuffle(&mut rng);
    for (h, r, t) in &tgt_edges {
        gt.add_triple(&tgt_labels[*h], r, &tgt_labels[*t]);
    }
    let g_t = gt.build()?;

    let pairs = (0..n)
        .map(|e| {
            let s = g_s.entity_id(&names[e]).expect("source entity present");
            let t = g_t.entity_id(&tgt_names[e]).expect("target entity present");
            (s, t)
        })
        .collect();
    let truth = SeedAlignment::new(pairs, SeedKind::GroundTruth)?;
    Ok((g_s, g_t, truth))
}
