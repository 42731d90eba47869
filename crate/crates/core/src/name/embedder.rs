use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rayon::prelude::*;

use super::fnv1a;
use crate::error::{Error, Result};
use crate::structure::EmbeddingTable;

/// Lowercases and splits on anything that is not alphanumeric.
pub fn tokenize(name: &str) -> Vec<String> {
    name.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Source of per-token vectors.
#[derive(Debug, Clone, PartialEq)]
pub enum NameEmbedder {
    /// Precomputed vectors; unknown tokens are skipped.
    FileBacked { dim: usize, vectors: HashMap<String, Vec<f64>> },
    /// Signed character-trigram counts hashed into `dim` buckets.
    Hashing { dim: usize },
}

impl NameEmbedder {
    pub fn hashing(dim: usize) -> Self {
        NameEmbedder::Hashing { dim }
    }

    pub fn dim(&self) -> usize {
        match self {
            NameEmbedder::FileBacked { dim, .. } | NameEmbedder::Hashing { dim } => *dim,
        }
    }

    /// Reads `token<TAB>f1 f2 … fD` lines.
    pub fn from_token_file(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut vectors = HashMap::new();
        let mut dim = None;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |msg: String| Error::Parse { path: path.into(), line: i + 1, msg };
            let (tok, rest) = line.split_once('\t').ok_or_else(|| parse_err("missing TAB".into()))?;
            let v: Vec<f64> = rest
                .split_whitespace()
                .map(|x| x.parse::<f64>().map_err(|e| parse_err(e.to_string())))
                .collect::<Result<_>>()?;
            match dim {
                None => dim = Some(v.len()),
                Some(d) if d != v.len() => return Err(parse_err(format!("expected {d} values, got {}", v.len()))),
                _ => {}
            }
            vectors.insert(tok.to_lowercase(), v);
        }
        let dim = dim.filter(|&d| d > 0).ok_or_else(|| Error::Parse {
            path: path.into(),
            line: 0,
            msg: "no token vectors".into(),
        })?;
        Ok(NameEmbedder::FileBacked { dim, vectors })
    }

    pub fn token_vector(&self, token: &str) -> Option<Vec<f64>> {
        match self {
            NameEmbedder::FileBacked { vectors, .. } => vectors.get(token).cloned(),
            NameEmbedder::Hashing { dim } => {
                let mut v = vec![0.0; *dim];
                let padded: Vec<char> = format!("<{token}>").chars().collect();
                for tri in padded.windows(3) {
                    let s: String = tri.iter().collect();
                    let h = fnv1a(s.as_bytes());
                    let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
                    v[(h % *dim as u64) as usize] += sign;
                }
                Some(v)
            }
        }
    }

    /// Element-wise max over the token vectors of `name`, then
    /// `h / (‖h‖₂ + eps)`. Names without usable tokens embed to zero.
    pub fn embed(&self, name: &str, eps: f64) -> Vec<f64> {
        let mut pooled: Option<Vec<f64>> = None;
        for tok in tokenize(name) {
            let Some(v) = self.token_vector(&tok) else { continue };
            match &mut pooled {
                None => pooled = Some(v),
                Some(p) => p.iter_mut().zip(&v).for_each(|(a, &b)| *a = a.max(b)),
            }
        }
        let Some(mut h) = pooled else {
            log::warn!("name `{name}` has no embeddable tokens");
            return vec![0.0; self.dim()];
        };
        let norm = h.iter().map(|x| x * x).sum::<f64>().sqrt();
        h.iter_mut().for_each(|x| *x /= norm + eps);
        h
    }
}

/// Embeds every name into one table (row `i` for `names[i]`).
pub fn embed_names<S: AsRef<str> + Sync>(names: &[S], embedder: &NameEmbedder, eps: f64) -> EmbeddingTable {
    let rows: Vec<Vec<f64>> = names.par_iter().map(|n| embedder.embed(n.as_ref(), eps)).collect();
    EmbeddingTable::from_rows(embedder.dim(), &rows).expect("consistent dimension")
}
