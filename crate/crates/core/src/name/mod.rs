//! Name channel: semantic similarity over pooled name embeddings, MinHash-LSH
//! blocked Levenshtein similarity, and their weighted fusion.

mod embedder;
mod fuse;
mod levenshtein;
mod minhash;
mod semantic;

pub use embedder::{embed_names, tokenize, NameEmbedder};
pub use fuse::{nff_fuse, string_similarity_matrix};
pub use levenshtein::{edit_distance, levenshtein_similarity};
pub use minhash::{estimated_jaccard, lsh_candidates, lsh_params, minhash_signature, MinHasher, MERSENNE_61};
pub use semantic::semantic_topk;

use crate::error::{Error, Result};

/// Settings of the name channel.
#[derive(Debug, Clone, PartialEq)]
pub struct NffConfig {
    /// Weight of the string matrix in `M_se + gamma · M_st`.
    pub gamma_fusion: f64,
    /// Jaccard lower bound for string candidates.
    pub theta: f64,
    /// Semantic candidates kept per source entity.
    pub phi: usize,
    pub epsilon: f64,
    pub segments: usize,
    pub minhash_perms: usize,
    /// Seed for segment shuffling and MinHash coefficients.
    pub rng_seed: u64,
}

impl Default for NffConfig {
    fn default() -> Self {
        Self {
            gamma_fusion: 0.05,
            theta: 0.5,
            phi: 50,
            epsilon: 1e-8,
            segments: 4,
            minhash_perms: 128,
            rng_seed: 0,
        }
    }
}

impl NffConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_fusion > 0.0 && self.gamma_fusion <= 1.0) {
            return Err(Error::InvalidConfig(format!("gamma_fusion must be in (0, 1], got {}", self.gamma_fusion)));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::InvalidConfig(format!("theta must be in (0, 1), got {}", self.theta)));
        }
        if self.phi == 0 || self.segments == 0 || self.minhash_perms == 0 {
            return Err(Error::InvalidConfig("phi, segments and minhash_perms must be >= 1".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig("epsilon must be > 0".into()));
        }
        Ok(())
    }
}

/// 64-bit FNV-1a.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
