//! Dense embedding tables and their binary checkpoint format.
//!
//! Checkpoint layout (little endian): 8-byte magic `KGAEMB01`, `u32` row
//! count, `u32` dimension, then row-major `f32` values. Row labels live in a
//! sidecar text file (`<path>.labels`), one label per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"KGAEMB01";

/// Fixed-dimension vectors, one row per entity.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim, data: vec![0.0; rows * dim] }
    }

    pub fn from_vec(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::DimensionMismatch { expected: dim, got: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invariant("embedding values must be finite".into()));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(dim: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        Self::from_vec(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Rows `range` as a new table.
    pub fn slice_rows(&self, range: std::ops::Range<usize>) -> Self {
        Self { dim: self.dim, data: self.data[range.start * self.dim..range.end * self.dim].to_vec() }
    }

    /// Scales each row by `1 / (‖row‖₂ + eps)`.
    pub fn normalize_rows(&mut self, eps: f64) {
        for r in self.data.chunks_mut(self.dim) {
            let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            let scale = 1.0 / (norm + eps);
            r.iter_mut().for_each(|v| *v *= scale);
        }
    }
}

/// L1 distance. Accumulates in four interleaved lanes.
pub fn manhattan(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += (x[l] - y[l]).abs();
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| (x - y).abs()).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub fn labels_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".labels");
    PathBuf::from(p)
}

/// Writes the binary checkpoint and its label sidecar.
pub fn write_checkpoint(path: &Path, table: &EmbeddingTable, labels: &[String]) -> Result<()> {
    if labels.len() != table.rows() {
        return Err(Error::DimensionMismatch { expected: table.rows(), got: labels.len() });
    }
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    w.write_all(CHECKPOINT_MAGIC).map_err(io)?;
    w.write_all(&(table.rows() as u32).to_le_bytes()).map_err(io)?;
    w.write_all(&(table.dim() as u32).to_le_bytes()).map_err(io)?;
    for &v in table.as_slice() {
        w.write_all(&(v as f32).to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)?;
    let lp = labels_path(path);
    let mut lw = BufWriter::new(File::create(&lp).map_err(|e| Error::io(&lp, e))?);
    for l in labels {
        writeln!(lw, "{l}").map_err(|e| Error::io(&lp, e))?;
    }
    lw.flush().map_err(|e| Error::io(&lp, e))
}

/// Reads a checkpoint written by [`write_checkpoint`].
pub fn read_checkpoint(path: &Path) -> Result<(EmbeddingTable, Vec<String>)> {
    let io = |e| Error::io(path, e);
    let mut r = BufReader::new(File::open(path).map_err(io)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Parse { path: path.into(), line: 0, msg: "bad checkpoint magic".into() });
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word).map_err(io)?;
    let rows = u32::from_le_bytes(word) as usize;
    r.read_exact(&mut word).map_err(io)?;
    let dim = u32::from_le_bytes(word) as usize;
    let mut data = Vec::with_capacity(rows * dim);
    for _ in 0..rows * dim {
        r.read_exact(&mut word).map_err(io)?;
        data.push(f32::from_le_bytes(word) as f64);
    }
    let table = EmbeddingTable::from_vec(dim, data)?;
    let lp = labels_path(path);
    let lr = BufReader::new(File::open(&lp).map_err(|e| Error::io(&lp, e))?);
    let labels = lr.lines().collect::<std::io::Result<Vec<_>>>().map_err(|e| Error::io(&lp, e))?;
    if labels.len() != rows {
        return Err(Error::Parse {
            path: lp,
            line: labels.len(),
            msg: format!("expected {rows} labels"),
        });
    }
    Ok((table, labels))
}
