//! Criterion checks shared by the per-module tests and the acceptance suite.

use std::collections::HashSet;

use kgalign::graph::{build_graph, EntityId, SeedAlignment, SeedKind};
use kgalign::name::*;
use kgalign::partition::{metis_cps, partition_graph, seed_colocation_rate, vps, CpsConfig, MiniBatch};
use kgalign::pipeline::{run_on_graphs, PipelineConfig, PipelineOutput};
use kgalign::structure::*;
use kgalign::synth::{generate_synthetic_benchmark, SyntheticSpec};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::*;

pub fn random_table(n: usize, dim: usize, r: &mut ChaCha8Rng) -> (EmbeddingTable, Vec<Vec<f64>>) {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
    (EmbeddingTable::from_rows(dim, &rows).unwrap(), rows)
}

/// Mismatching rows between `semantic_topk` (for each segment count) and the
/// dense brute-force oracle.
pub fn semantic_mismatches(n: usize, dim: usize, phi: usize, seed: u64) -> usize {
    let mut r = rng(seed);
    let (src, src_rows) = random_table(n, dim, &mut r);
    let (tgt, tgt_rows) = random_table(n, dim, &mut r);
    let want = brute_topk_similarity(&dense_distances(&src_rows, &tgt_rows), phi);
    [1, 2, 4]
        .iter()
        .map(|&segments| {
            let cfg = NffConfig { phi, segments, rng_seed: seed, ..Default::default() };
            rows_match(&semantic_topk(&src, &tgt, &cfg).unwrap(), &want, 1e-9)
        })
        .sum()
}

/// Source/target corpora with a spread of Jaccard values, built from a
/// shared vocabulary by dropping, adding and swapping tokens.
pub fn lsh_corpus(n: usize, seed: u64) -> (Vec<String>, Vec<String>) {
    let mut r = rng(seed);
    let vocab: Vec<String> = (0..3000).map(|i| format!("{}{i}", random_word(&mut r, 4))).collect();
    let mut src = Vec::with_capacity(n);
    let mut tgt = Vec::with_capacity(n);
    for _ in 0..n {
        let len = r.gen_range(3..8);
        let a: Vec<String> = vocab.choose_multiple(&mut r, len).cloned().collect();
        let mut b = a.clone();
        for _ in 0..r.gen_range(0..4) {
            match r.gen_range(0..3) {
                0 if b.len() > 1 => {
                    let i = r.gen_range(0..b.len());
                    b.remove(i);
                }
                1 => b.push(vocab.choose(&mut r).unwrap().clone()),
                _ => {
                    let i = r.gen_range(0..b.len());
                    b[i] = vocab.choose(&mut r).unwrap().clone();
                }
            }
        }
        src.push(a.join(" "));
        tgt.push(b.join(" "));
    }
    tgt.shuffle(&mut r);
    (src, tgt)
}

/// Recall of `lsh_candidates` over all pairs with exact Jaccard ≥ θ + 0.1,
/// and whether every emitted pair passed verification.
pub fn lsh_recall(n: usize, seed: u64) -> (f64, usize, bool) {
    let (src, tgt) = lsh_corpus(n, seed);
    let cfg = NffConfig { rng_seed: seed, ..Default::default() };
    let got: HashSet<(u32, u32)> = lsh_candidates(&src, &tgt, &cfg).into_iter().collect();
    let mut relevant = 0usize;
    let mut found = 0usize;
    for (i, a) in src.iter().enumerate() {
        for (j, b) in tgt.iter().enumerate() {
            if exact_jaccard(a, b) >= cfg.theta + 0.1 {
                relevant += 1;
                if got.contains(&(i as u32, j as u32)) {
                    found += 1;
                }
            }
        }
    }
    let hasher = MinHasher::new(cfg.minhash_perms, cfg.rng_seed);
    let sound = got.iter().all(|&(s, t)| {
        estimated_jaccard(&hasher.signature(&src[s as usize]), &hasher.signature(&tgt[t as usize])) >= cfg.theta
    });
    (found as f64 / relevant.max(1) as f64, relevant, sound)
}

pub fn levenshtein_mismatches(pairs: usize, seed: u64) -> usize {
    let mut r = rng(seed);
    let alphabet: Vec<char> = "abcé日 ".chars().collect();
    (0..pairs)
        .filter(|_| {
            let a = random_string(&mut r, 12, &alphabet);
            let b = random_string(&mut r, 12, &alphabet);
            edit_distance(&a, &b) != dp_edit_distance(&a, &b) || levenshtein_similarity(&a, &b) != dp_similarity(&a, &b)
        })
        .count()
}

pub fn string_matrix_mismatches(seed: u64) -> usize {
    let mut r = rng(seed);
    let alphabet: Vec<char> = "abcd ".chars().collect();
    let src: Vec<String> = (0..40).map(|_| random_string(&mut r, 8, &alphabet)).collect();
    let tgt: Vec<String> = (0..30).map(|_| random_string(&mut r, 8, &alphabet)).collect();
    let mut cands: Vec<(u32, u32)> = (0..40u32).flat_map(|s| (0..30u32).map(move |t| (s, t))).collect();
    cands.shuffle(&mut r);
    cands.truncate(500);
    let k = 4;
    let m = string_similarity_matrix(&cands, &src, &tgt, k).unwrap();
    let mut dense = vec![vec![None; 30]; 40];
    for &(s, t) in &cands {
        dense[s as usize][t as usize] = Some(dp_similarity(&src[s as usize], &tgt[t as usize]));
    }
    let empty = vec![vec![None; 30]; 40];
    rows_match(&m, &dense_sum_topk(&dense, 1.0, &empty, 0.0, k), 1e-12)
}

pub fn nff_mismatches(seed: u64) -> usize {
    let a = random_sparse(50, 40, 12, 12, seed);
    let b = random_sparse(50, 40, 9, 9, seed + 100);
    let cfg = NffConfig { phi: 10, ..Default::default() };
    let m = nff_fuse(&a, &b, &cfg).unwrap();
    rows_match(&m, &dense_sum_topk(&to_dense(&a), 1.0, &to_dense(&b), cfg.gamma_fusion, 10), 1e-12)
}

/// Largest elementwise `|a − n| / max(|a|, |n|, floor)` of analytic vs
/// central differences. Below the floor a component is judged by absolute
/// error, since a zero gradient still shows ~1e-9 of round-off numerically.
fn relative_error(analytic: &Array2<f64>, numeric: &Array2<f64>) -> f64 {
    const FLOOR: f64 = 1e-4;
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(FLOOR))
        .fold(0.0, f64::max)
}

pub fn gradient_check_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let g = build_graph(&[("a", "r", "b"), ("b", "r", "c"), ("c", "r", "d"), ("d", "r", "e"), ("a", "r", "c")]).unwrap();
    let seeds = SeedAlignment::new((0..5).map(|i| (i, i)).collect(), SeedKind::TrainSeed).unwrap();
    let batch = MiniBatch::whole(&g, &g, &seeds);
    let graph = BatchGraph::from_batch(&batch);
    let cfg = GnnConfig { layers: 2, dim: 6, activation: Activation::Tanh };
    let gnn = Gnn::random(cfg, &mut r);
    let h0 = initial_embeddings(graph.len(), 6, &mut r);
    let triplets: Vec<Triplet> = (0..5u32)
        .flat_map(|i| {
            [
                Triplet { positive: (i, 5 + i), negative: ((i + 1) % 5, 5 + i) },
                Triplet { positive: (i, 5 + i), negative: (i, 5 + (i + 2) % 5) },
            ]
        })
        .collect();
    // a large margin keeps every hinge active so the loss is smooth at the probe
    let margin = 10.0;
    let (_, grads) = loss_and_gradients(&graph, &gnn, &h0, &triplets, margin);
    let h = 1e-5;
    let loss_at = |gnn: &Gnn, h0: &Array2<f64>| loss_and_gradients(&graph, gnn, h0, &triplets, margin).0;
    let mut worst: f64 = 0.0;
    let mut num = Array2::zeros(h0.raw_dim());
    for idx in ndarray::indices(h0.raw_dim()) {
        let (mut p, mut m) = (h0.clone(), h0.clone());
        p[idx] += h;
        m[idx] -= h;
        num[idx] = (loss_at(&gnn, &p) - loss_at(&gnn, &m)) / (2.0 * h);
    }
    worst = worst.max(relative_error(&grads.initial, &num));
    for l in 0..gnn.weights.len() {
        let mut num = Array2::zeros(gnn.weights[l].raw_dim());
        for idx in ndarray::indices(gnn.weights[l].raw_dim()) {
            let (mut p, mut m) = (gnn.clone(), gnn.clone());
            p.weights[l][idx] += h;
            m.weights[l][idx] -= h;
            num[idx] = (loss_at(&p, &h0) - loss_at(&m, &h0)) / (2.0 * h);
        }
        worst = worst.max(relative_error(&grads.weights[l], &num));
    }
    worst
}

pub fn structure_rows_vs_exhaustive(seed: u64) -> usize {
    let spec = SyntheticSpec { entities_per_side: 400, community_count: 8, rng_seed: seed, ..Default::default() };
    let (gs, gt, truth) = generate_synthetic_benchmark(&spec).unwrap();
    let batches = vps(&gs, &gt, &truth.split(0.3, seed).0, 3, seed).unwrap();
    let mut r = rng(seed);
    let embs: Vec<EmbeddingTable> = batches
        .iter()
        .map(|b| {
            let rows: Vec<Vec<f64>> = (0..b.source.len() + b.target.len())
                .map(|_| (0..8).map(|_| r.gen_range(-1.0..1.0)).collect())
                .collect();
            EmbeddingTable::from_rows(8, &rows).unwrap()
        })
        .collect();
    let k = 7;
    let m = structure_similarity(&batches, &embs, k, gs.entity_count(), gt.entity_count()).unwrap();
    // exhaustive: every same-batch pair, then the global min-max
    let mut dist = vec![vec![f64::INFINITY; gt.entity_count()]; gs.entity_count()];
    for (b, e) in batches.iter().zip(&embs) {
        let rows: Vec<Vec<f64>> = (0..e.rows()).map(|i| e.row(i).to_vec()).collect();
        let ns = b.source.len();
        let d = dense_distances(&rows[..ns], &rows[ns..]);
        for (i, &s) in b.source.entities.iter().enumerate() {
            for (j, &t) in b.target.entities.iter().enumerate() {
                dist[s as usize][t as usize] = dist[s as usize][t as usize].min(d[i][j]);
            }
        }
    }
    let rows: Vec<Vec<(EntityId, f64)>> = dist
        .iter()
        .map(|row| {
            let mut r: Vec<(EntityId, f64)> =
                row.iter().enumerate().filter(|e| e.1.is_finite()).map(|(j, &d)| (j as EntityId, d)).collect();
            r.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
            r.truncate(k);
            r
        })
        .collect();
    let all: Vec<f64> = rows.iter().flatten().map(|e| e.1).collect();
    let lo = all.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = all.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let want: Vec<Vec<(EntityId, f64)>> =
        rows.into_iter().map(|r| r.into_iter().map(|(t, d)| (t, 1.0 - (d - lo) / (hi - lo + 1e-8))).collect()).collect();
    check_block_diagonal(&m, &batches).unwrap();
    rows_match(&m, &want, 1e-9)
}

/// Outcome of the partition-quality sweep.
#[derive(Debug, Clone, Copy)]
pub struct PartitionSweep {
    pub instances: usize,
    pub balanced: usize,
    /// Instances whose cut is at most the mean cut of 100 random balanced partitions.
    pub beats_random: usize,
}

/// Partitions `instances` random community graphs of 200..=2000 entities.
pub fn partition_sweep(instances: usize, seed: u64) -> PartitionSweep {
    let mut r = rng(seed);
    let mut sweep = PartitionSweep { instances, balanced: 0, beats_random: 0 };
    for i in 0..instances {
        let n = r.gen_range(200..=2000);
        let communities = r.gen_range(3..=20);
        let degree = r.gen_range(2.0..8.0);
        let k = r.gen_range(2..=8);
        let imbalance = [0.0, 0.03, 0.1][i % 3];
        let g = build_graph(&community_triples(n, communities, degree, 0.85, seed * 1000 + i as u64)).unwrap();
        let p = partition_graph(&g, k, imbalance, i as u64).unwrap();
        let cap = ((1.0 + imbalance) * n.div_ceil(k) as f64 + 1e-9).floor() as usize;
        let mut sizes = vec![0usize; k];
        for &a in &p.assignment {
            sizes[a as usize] += 1;
        }
        if sizes.iter().all(|&s| s <= cap) && p.assignment.len() == g.entity_count() {
            sweep.balanced += 1;
        }
        let cut = unweighted_cut(&g, &p.assignment);
        let mean: f64 = (0..100)
            .map(|j| unweighted_cut(&g, &random_balanced(g.entity_count(), k, j)) as f64)
            .sum::<f64>()
            / 100.0;
        if cut as f64 <= mean {
            sweep.beats_random += 1;
        }
    }
    sweep
}

/// Seed co-location on the standard benchmark, from raw training seeds.
#[derive(Debug, Clone, Copy)]
pub struct Colocation {
    pub cps_test: f64,
    pub cps_train: f64,
    pub vps_test: f64,
    pub vps_train: f64,
}

pub fn standard_spec(seed: u64) -> SyntheticSpec {
    SyntheticSpec { entities_per_side: 5000, structure_noise: 0.1, rng_seed: seed, ..Default::default() }
}

pub fn noisy_spec(seed: u64) -> SyntheticSpec {
    SyntheticSpec { name_noise: 0.3, unknown_entity_ratio: 0.1, ..standard_spec(seed) }
}

pub fn colocation(spec: &SyntheticSpec, k: usize) -> Colocation {
    let (gs, gt, truth) = generate_synthetic_benchmark(spec).unwrap();
    let (train, test) = truth.split(0.2, spec.rng_seed);
    let cps = metis_cps(&gs, &gt, &train, &CpsConfig { k, ..Default::default() }, spec.rng_seed).unwrap();
    let v = vps(&gs, &gt, &train, k, spec.rng_seed).unwrap();
    Colocation {
        cps_test: seed_colocation_rate(&cps, &test).unwrap(),
        cps_train: seed_colocation_rate(&cps, &train).unwrap(),
        vps_test: seed_colocation_rate(&v, &test).unwrap(),
        vps_train: seed_colocation_rate(&v, &train).unwrap(),
    }
}

/// Runs the whole pipeline on a generated benchmark with a 20% train split.
pub fn run_benchmark(
    spec: &SyntheticSpec,
    tweak: impl FnOnce(&mut PipelineConfig),
) -> PipelineOutput {
    let (gs, gt, truth) = generate_synthetic_benchmark(spec).unwrap();
    let mut cfg = PipelineConfig { rng_seed: spec.rng_seed, ..Default::default() };
    tweak(&mut cfg);
    let (train, test) = truth.split(cfg.seed_ratio, spec.rng_seed);
    run_on_graphs(&gs, &gt, &train, &test, &cfg).unwrap()
}

pub fn extra(out: &PipelineOutput, key: &str) -> f64 {
    out.extras.iter().find(|e| e.0 == key).map(|e| e.1.parse().unwrap()).unwrap_or_else(|| panic!("no `{key}`"))
}

/// Seeds whose augmentation differs from the dense mutual-argmax oracle.
pub fn augment_mismatches(seeds: std::ops::Range<u64>) -> usize {
    seeds
        .filter(|&seed| {
            let m = random_sparse(100, 100, 8, 8, seed);
            let got = kgalign::align::augment_seeds(&m, &SeedAlignment::empty(SeedKind::TrainSeed));
            got.pairs() != &dense_mutual_argmax(&to_dense(&m), 100)[..]
        })
        .count()
}

/// Rows where `fuse_channels` differs from dense addition.
pub fn fuse_mismatches(seed: u64) -> usize {
    let a = random_sparse(60, 80, 10, 10, seed);
    let b = random_sparse(60, 80, 6, 6, seed + 100);
    let fused = kgalign::align::fuse_channels(&a, &b).unwrap();
    rows_match(&fused, &dense_sum_topk(&to_dense(&a), 1.0, &to_dense(&b), 1.0, 10), 1e-12)
}

/// Metrics where `evaluate` differs from full-sort ranking.
pub fn evaluate_mismatches(seed: u64) -> usize {
    let m = random_sparse(100, 100, 20, 20, seed);
    let mut targets: Vec<EntityId> = (0..100).collect();
    targets.shuffle(&mut rng(seed));
    let truth = SeedAlignment::new((0..100).zip(targets).collect(), SeedKind::GroundTruth).unwrap();
    let report = kgalign::align::evaluate(&m, &truth, &[1, 5, 10]).unwrap();
    let dense = to_dense(&m);
    let ranks: Vec<Option<usize>> = truth.iter().map(|(s, t)| full_sort_rank(&dense[s as usize], t as usize)).collect();
    let mut bad = 0;
    for n in [1, 5, 10] {
        let want = ranks.iter().filter(|r| r.is_some_and(|r| r <= n)).count() as f64 / 100.0;
        bad += usize::from((report.hits(n).unwrap() - want).abs() > 1e-12);
    }
    let mrr = ranks.iter().map(|r| r.map_or(0.0, |r| 1.0 / r as f64)).sum::<f64>() / 100.0;
    bad + usize::from((report.mrr - mrr).abs() > 1e-12)
}
