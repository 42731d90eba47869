//! Mean-aggregation graph network with hand-written backpropagation.
//!
//! Each layer averages an entity with its neighbors, applies a shared linear
//! map and an elementwise activation. Output rows are L2-normalized.

use ndarray::{Array2, Axis};
use rand::Rng;

use super::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::partition::MiniBatch;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, z: &mut Array2<f64>) {
        if self == Activation::Tanh {
            z.mapv_inplace(f64::tanh);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnnConfig {
    pub layers: usize,
    pub dim: usize,
    pub activation: Activation,
}

impl Default for GnnConfig {
    fn default() -> Self {
        Self { layers: 2, dim: 100, activation: Activation::Tanh }
    }
}

/// Combined local graph of one batch: rows `0..n_source` are source
/// entities, rows `n_source..` are target entities.
#[derive(Debug, Clone)]
pub struct BatchGraph {
    pub n_source: usize,
    pub n_target: usize,
    pub neighbors: Vec<Vec<u32>>,
}

impl BatchGraph {
    pub fn from_batch(batch: &MiniBatch) -> Self {
        let n_source = batch.source.len();
        let mut neighbors = batch.source.neighbors.clone();
        neighbors.extend(
            batch
                .target
                .neighbors
                .iter()
                .map(|row| row.iter().map(|&v| v + n_source as u32).collect::<Vec<_>>()),
        );
        Self { n_source, n_target: batch.target.len(), neighbors }
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    /// `out_i = (h_i + Σ_{j ∈ N(i)} h_j) / (1 + |N(i)|)`
    pub fn mean_aggregate(&self, h: &Array2<f64>) -> Array2<f64> {
        let mut out = h.clone();
        for (i, nbrs) in self.neighbors.iter().enumerate() {
            let mut row = out.row_mut(i);
            for &j in nbrs {
                row += &h.row(j as usize);
            }
            row /= 1.0 + nbrs.len() as f64;
        }
        out
    }

    /// Adjoint of [`Self::mean_aggregate`].
    pub fn mean_aggregate_transpose(&self, g: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros(g.raw_dim());
        for (i, nbrs) in self.neighbors.iter().enumerate() {
            let scaled = &g.row(i) / (1.0 + nbrs.len() as f64);
            let mut own = out.row_mut(i);
            own += &scaled;
            for &j in nbrs {
                let mut r = out.row_mut(j as usize);
                r += &scaled;
            }
        }
        out
    }
}

/// Layer weights of the network (`dim × dim` each).
#[derive(Debug, Clone, PartialEq)]
pub struct Gnn {
    pub config: GnnConfig,
    pub weights: Vec<Array2<f64>>,
}

impl Gnn {
    pub fn new(config: GnnConfig, weights: Vec<Array2<f64>>) -> Result<Self> {
        if weights.len() != config.layers {
            return Err(Error::DimensionMismatch { expected: config.layers, got: weights.len() });
        }
        for w in &weights {
            if w.dim() != (config.dim, config.dim) {
                return Err(Error::DimensionMismatch { expected: config.dim, got: w.nrows().max(w.ncols()) });
            }
        }
        Ok(Self { config, weights })
    }

    pub fn identity(config: GnnConfig) -> Self {
        let weights = (0..config.layers).map(|_| Array2::eye(config.dim)).collect();
        Self { config, weights }
    }

    /// Glorot-uniform weights.
    pub fn random(config: GnnConfig, rng: &mut impl Rng) -> Self {
        let bound = (6.0 / (2 * config.dim) as f64).sqrt();
        let weights = (0..config.layers)
            .map(|_| Array2::from_shape_fn((config.dim, config.dim), |_| rng.gen_range(-bound..bound)))
            .collect();
        Self { config, weights }
    }
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    aggregates: Vec<Array2<f64>>,
    activations: Vec<Array2<f64>>,
    norms: Vec<f64>,
    /// Final L2-normalized embeddings.
    pub output: Array2<f64>,
}

pub fn forward(graph: &BatchGraph, gnn: &Gnn, h0: &Array2<f64>) -> ForwardCache {
    let mut aggregates = Vec::with_capacity(gnn.weights.len());
    let mut activations = Vec::with_capacity(gnn.weights.len());
    let mut h = h0.clone();
    for w in &gnn.weights {
        let agg = graph.mean_aggregate(&h);
        let mut z = agg.dot(w);
        gnn.config.activation.apply(&mut z);
        aggregates.push(agg);
        activations.push(z.clone());
        h = z;
    }
    let norms: Vec<f64> = h.rows().into_iter().map(|r| r.dot(&r).sqrt().max(1e-12)).collect();
    for (mut r, &n) in h.axis_iter_mut(Axis(0)).zip(&norms) {
        r /= n;
    }
    ForwardCache { aggregates, activations, norms, output: h }
}

/// Gradients with respect to the initial embeddings and each layer weight.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub initial: Array2<f64>,
    pub weights: Vec<Array2<f64>>,
}

pub fn backward(graph: &BatchGraph, gnn: &Gnn, cache: &ForwardCache, d_output: &Array2<f64>) -> Gradients {
    // through the row normalization: dx = (dy - y (y·dy)) / ‖x‖
    let y = &cache.output;
    let mut d = d_output.clone();
    for (i, mut r) in d.axis_iter_mut(Axis(0)).enumerate() {
        let yi = y.row(i);
        let proj = yi.dot(&r);
        r.scaled_add(-proj, &yi);
        r /= cache.norms[i];
    }
    let mut weight_grads = vec![Array2::zeros((0, 0)); gnn.weights.len()];
    for l in (0..gnn.weights.len()).rev() {
        if gnn.config.activation == Activation::Tanh {
            let a = &cache.activations[l];
            d.zip_mut_with(a, |g, &h| *g *= 1.0 - h * h);
        }
        weight_grads[l] = cache.aggregates[l].t().dot(&d);
        let d_agg = d.dot(&gnn.weights[l].t());
        d = graph.mean_aggregate_transpose(&d_agg);
    }
    Gradients { initial: d, weights: weight_grads }
}

pub(crate) fn to_array(t: &EmbeddingTable) -> Array2<f64> {
    Array2::from_shape_vec((t.rows(), t.dim()), t.as_slice().to_vec()).expect("shape matches")
}

pub(crate) fn to_table(a: &Array2<f64>) -> EmbeddingTable {
    let dim = a.ncols();
    EmbeddingTable::from_vec(dim, a.iter().copied().collect()).expect("finite embeddings")
}

/// Runs the network over one batch. `init` holds one row per batch entity,
/// source entities first.
pub fn gnn_forward(batch: &MiniBatch, gnn: &Gnn, init: &EmbeddingTable) -> Result<EmbeddingTable> {
    let graph = BatchGraph::from_batch(batch);
    if init.dim() != gnn.config.dim {
        return Err(Error::DimensionMismatch { expected: gnn.config.dim, got: init.dim() });
    }
    if init.rows() != graph.len() {
        return Err(Error::DimensionMismatch { expected: graph.len(), got: init.rows() });
    }
    Ok(to_table(&forward(&graph, gnn, &to_array(init)).output))
}
