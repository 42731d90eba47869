//! Per-batch training loop.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::embedding::EmbeddingTable;
use super::gnn::{forward, to_table, BatchGraph, Gnn, GnnConfig};
use super::loss::{loss_and_gradients, Triplet, TripletConfig};
use super::negatives::sample_negatives;
use crate::error::Result;
use crate::partition::MiniBatch;

/// Adaptive-moment gradient descent state for one parameter tensor.
#[derive(Debug, Clone)]
struct AdamSlot {
    m: Array2<f64>,
    v: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    slots: Vec<AdamSlot>,
}

impl Adam {
    pub fn new(lr: f64, shapes: &[(usize, usize)]) -> Self {
        let slots = shapes
            .iter()
            .map(|&s| AdamSlot { m: Array2::zeros(s), v: Array2::zeros(s) })
            .collect();
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, slots }
    }

    /// Applies one update; `params` and `grads` are in slot order.
    pub fn update(&mut self, params: &mut [&mut Array2<f64>], grads: &[&Array2<f64>]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for ((p, g), slot) in params.iter_mut().zip(grads).zip(&mut self.slots) {
            ndarray::Zip::from(&mut **p).and(*g).and(&mut slot.m).and(&mut slot.v).for_each(|p, &g, m, v| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            });
        }
    }
}

/// Embeddings learned for one batch: rows `0..n_source` are the batch's
/// source entities (ascending global id), the rest its target entities.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedBatch {
    pub embeddings: EmbeddingTable,
    pub n_source: usize,
    pub loss_history: Vec<f64>,
}

/// A structural model trained independently per mini-batch.
pub trait StructureModel: Sync {
    fn train(&self, batch: &MiniBatch, rng_seed: u64) -> Result<TrainedBatch>;
}

/// Mean-aggregation network trained with the triplet loss.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MeanAggregationModel {
    pub gnn: GnnConfig,
    pub triplet: TripletConfig,
}

impl StructureModel for MeanAggregationModel {
    fn train(&self, batch: &MiniBatch, rng_seed: u64) -> Result<TrainedBatch> {
        train_batch(batch, &self.gnn, &self.triplet, rng_seed)
    }
}

/// Local (source row, target row) pairs of the batch's seeds.
pub fn local_seed_rows(batch: &MiniBatch) -> Vec<(u32, u32)> {
    let ns = batch.source.len();
    batch
        .local_seeds
        .iter()
        .filter_map(|(s, t)| {
            Some((batch.source.local_id(s)? as u32, (ns + batch.target.local_id(t)?) as u32))
        })
        .collect()
}

/// Uniform initial embeddings in `[-1/√dim, 1/√dim]`.
pub fn initial_embeddings(rows: usize, dim: usize, rng: &mut impl Rng) -> Array2<f64> {
    let bound = 1.0 / (dim as f64).sqrt();
    Array2::from_shape_fn((rows, dim), |_| rng.gen_range(-bound..bound))
}

/// Trains one batch with full-batch gradient steps; negatives are redrawn
/// every `resample_every` epochs from the current embeddings.
pub fn train_batch(
    batch: &MiniBatch,
    gnn_cfg: &GnnConfig,
    trip: &TripletConfig,
    rng_seed: u64,
) -> Result<TrainedBatch> {
    trip.validate()?;
    let graph = BatchGraph::from_batch(batch);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut h0 = initial_embeddings(graph.len(), gnn_cfg.dim, &mut rng);
    let mut gnn = Gnn::random(gnn_cfg.clone(), &mut rng);
    let pairs = local_seed_rows(batch);
    let trainable = !pairs.is_empty() && graph.n_source >= 2 && graph.n_target >= 2;
    if !trainable {
        log::warn!(
            "batch {}: {} seeds, {}+{} entities; skipping training",
            batch.index,
            pairs.len(),
            graph.n_source,
            graph.n_target
        );
    }
    let mut history = Vec::new();
    if trainable && trip.epochs > 0 {
        let mut shapes = vec![h0.dim()];
        shapes.extend(gnn.weights.iter().map(|w| w.dim()));
        let mut adam = Adam::new(trip.learning_rate, &shapes);
        let mut triplets: Vec<Triplet> = Vec::new();
        for epoch in 0..trip.epochs {
            if epoch % trip.resample_every == 0 {
                let current = to_table(&forward(&graph, &gnn, &h0).output);
                triplets.clear();
                for &p in &pairs {
                    for negative in sample_negatives(p, &current, graph.n_source, trip.negatives_per_pair, &mut rng)? {
                        triplets.push(Triplet { positive: p, negative });
                    }
                }
            }
            let (loss, grads) = loss_and_gradients(&graph, &gnn, &h0, &triplets, trip.margin);
            history.push(loss);
            let mut params: Vec<&mut Array2<f64>> = vec![&mut h0];
            params.extend(gnn.weights.iter_mut());
            let mut grad_refs: Vec<&Array2<f64>> = vec![&grads.initial];
            grad_refs.extend(grads.weights.iter());
            adam.update(&mut params, &grad_refs);
        }
    }
    let embeddings = to_table(&forward(&graph, &gnn, &h0).output);
    Ok(TrainedBatch { embeddings, n_source: graph.n_source, loss_history: history })
}

/// Derives an independent stream seed for batch `index`.
pub fn batch_seed(rng_seed: u64, index: usize) -> u64 {
    let mut z = rng_seed ^ (index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Trains every batch independently (in parallel), preserving batch order.
pub fn train_all(model: &dyn StructureModel, batches: &[MiniBatch], rng_seed: u64) -> Result<Vec<TrainedBatch>> {
    batches
        .par_iter()
        .enumerate()
        .map(|(i, b)| model.train(b, batch_seed(rng_seed, i)))
        .collect()
}
