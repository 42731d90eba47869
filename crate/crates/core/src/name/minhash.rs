use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::embedder::tokenize;
use super::{fnv1a, NffConfig};
use crate::graph::EntityId;

/// The Mersenne prime 2^61 - 1.
pub const MERSENNE_61: u64 = (1 << 61) - 1;

/// Signature of a name with no tokens. Never verified as similar to anything.
const EMPTY_SLOT: u64 = u64::MAX;

/// A family of `(a·x + b) mod p` hash functions over a 64-bit base hash.
#[derive(Debug, Clone)]
pub struct MinHasher {
    a: Vec<u64>,
    b: Vec<u64>,
}

impl MinHasher {
    pub fn new(perms: usize, rng_seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let a = (0..perms).map(|_| rng.gen_range(1..MERSENNE_61)).collect();
        let b = (0..perms).map(|_| rng.gen_range(0..MERSENNE_61)).collect();
        Self { a, b }
    }

    pub fn perms(&self) -> usize {
        self.a.len()
    }

    pub fn signature(&self, name: &str) -> Vec<u64> {
        let mut tokens = tokenize(name);
        tokens.sort_unstable();
        tokens.dedup();
        self.signature_of_tokens(tokens.iter().map(String::as_str))
    }

    pub fn signature_of_tokens<'a>(&self, tokens: impl IntoIterator<Item = &'a str>) -> Vec<u64> {
        let mut sig = vec![EMPTY_SLOT; self.perms()];
        for tok in tokens {
            let x = (fnv1a(tok.as_bytes()) % MERSENNE_61) as u128;
            for (i, s) in sig.iter_mut().enumerate() {
                let h = ((self.a[i] as u128 * x + self.b[i] as u128) % MERSENNE_61 as u128) as u64;
                *s = (*s).min(h);
            }
        }
        sig
    }
}

pub fn minhash_signature(name: &str, cfg: &NffConfig) -> Vec<u64> {
    MinHasher::new(cfg.minhash_perms, cfg.rng_seed).signature(name)
}

/// Fraction of agreeing slots. Empty-name signatures score 0.
pub fn estimated_jaccard(a: &[u64], b: &[u64]) -> f64 {
    if a.is_empty() || a.len() != b.len() || a[0] == EMPTY_SLOT || b[0] == EMPTY_SLOT {
        return 0.0;
    }
    a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / a.len() as f64
}

/// Picks `(bands, rows)` with `bands·rows ≤ perms` whose S-curve threshold
/// `(1/bands)^(1/rows)` lies within 0.05 of `theta`, maximizing the collision
/// probability at `theta + 0.1`. Falls back to the closest threshold.
pub fn lsh_params(theta: f64, perms: usize) -> (usize, usize) {
    let collide = |b: usize, r: usize, s: f64| 1.0 - (1.0 - s.powi(r as i32)).powi(b as i32);
    let mut best: Option<(f64, usize, usize)> = None;
    let mut closest = (f64::INFINITY, 1, 1);
    for r in 1..=perms {
        for b in 1..=perms / r {
            let t = (1.0 / b as f64).powf(1.0 / r as f64);
            let gap = (t - theta).abs();
            if gap < closest.0 {
                closest = (gap, b, r);
            }
            if gap > 0.05 {
                continue;
            }
            let recall = collide(b, r, (theta + 0.1).min(1.0));
            if best.map_or(true, |(p, bb, rr)| recall > p || (recall == p && b * r < bb * rr)) {
                best = Some((recall, b, r));
            }
        }
    }
    best.map_or((closest.1, closest.2), |(_, b, r)| (b, r))
}

/// Candidate pairs whose names share at least one LSH bucket and whose
/// estimated Jaccard is at least `theta`. Sorted by (source, target).
pub fn lsh_candidates<S: AsRef<str> + Sync>(src: &[S], tgt: &[S], cfg: &NffConfig) -> Vec<(EntityId, EntityId)> {
    let hasher = MinHasher::new(cfg.minhash_perms, cfg.rng_seed);
    let (bands, rows) = lsh_params(cfg.theta, cfg.minhash_perms);
    let sigs = |names: &[S]| -> Vec<Vec<u64>> { names.par_iter().map(|n| hasher.signature(n.as_ref())).collect() };
    let src_sigs = sigs(src);
    let tgt_sigs = sigs(tgt);
    let band_key = |sig: &[u64], band: usize| -> u64 {
        let bytes: Vec<u8> = sig[band * rows..(band + 1) * rows].iter().flat_map(|v| v.to_le_bytes()).collect();
        fnv1a(&bytes) ^ (band as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
    };
    let mut buckets: HashMap<u64, Vec<EntityId>> = HashMap::new();
    for (t, sig) in tgt_sigs.iter().enumerate() {
        if sig[0] == EMPTY_SLOT {
            continue;
        }
        for band in 0..bands {
            buckets.entry(band_key(sig, band)).or_default().push(t as EntityId);
        }
    }
    src_sigs
        .par_iter()
        .enumerate()
        .flat_map_iter(|(s, sig)| {
            let mut hits: Vec<EntityId> = Vec::new();
            if sig[0] != EMPTY_SLOT {
                for band in 0..bands {
                    if let Some(ts) = buckets.get(&band_key(sig, band)) {
                        hits.extend_from_slice(ts);
                    }
                }
            }
            hits.sort_unstable();
            hits.dedup();
            hits.retain(|&t| estimated_jaccard(sig, &tgt_sigs[t as usize]) >= cfg.theta);
            hits.into_iter().map(move |t| (s as EntityId, t))
        })
        .collect()
}
