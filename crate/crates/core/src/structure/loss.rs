//! Margin-based triplet loss over Manhattan distances.

use ndarray::Array2;

use super::embedding::{manhattan, EmbeddingTable};
use super::gnn::{backward, forward, to_array, BatchGraph, Gnn, Gradients};

/// A positive pair and one corrupted counterpart, as local row ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triplet {
    pub positive: (u32, u32),
    pub negative: (u32, u32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripletConfig {
    pub margin: f64,
    pub negatives_per_pair: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub resample_every: usize,
}

impl Default for TripletConfig {
    fn default() -> Self {
        Self { margin: 1.0, negatives_per_pair: 5, epochs: 100, learning_rate: 0.005, resample_every: 10 }
    }
}

impl TripletConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.margin > 0.0) {
            return Err(crate::Error::InvalidConfig(format!("margin must be > 0, got {}", self.margin)));
        }
        if self.resample_every == 0 {
            return Err(crate::Error::InvalidConfig("resample_every must be >= 1".into()));
        }
        Ok(())
    }
}

/// `max(0, d_pos + margin - d_neg)`
pub fn hinge(d_pos: f64, d_neg: f64, margin: f64) -> f64 {
    (d_pos + margin - d_neg).max(0.0)
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn add_manhattan_grad(grad: &mut Array2<f64>, emb: &Array2<f64>, (a, b): (u32, u32), scale: f64) {
    let (a, b) = (a as usize, b as usize);
    for j in 0..emb.ncols() {
        let g = scale * sign(emb[[a, j]] - emb[[b, j]]);
        grad[[a, j]] += g;
        grad[[b, j]] -= g;
    }
}

pub(crate) fn loss_on_array(emb: &Array2<f64>, triplets: &[Triplet], margin: f64) -> (f64, Array2<f64>) {
    let mut grad = Array2::zeros(emb.raw_dim());
    let mut loss = 0.0;
    let dist = |(a, b): (u32, u32)| {
        emb.row(a as usize).iter().zip(emb.row(b as usize)).map(|(x, y)| (x - y).abs()).sum::<f64>()
    };
    for t in triplets {
        let term = dist(t.positive) + margin - dist(t.negative);
        if term > 0.0 {
            loss += term;
            add_manhattan_grad(&mut grad, emb, t.positive, 1.0);
            add_manhattan_grad(&mut grad, emb, t.negative, -1.0);
        }
    }
    (loss, grad)
}

/// Summed triplet loss and its gradient with respect to every embedding row.
/// The subgradient of `|x|` at 0 is taken as 0.
pub fn triplet_loss(emb: &EmbeddingTable, triplets: &[Triplet], margin: f64) -> (f64, EmbeddingTable) {
    let (loss, grad) = loss_on_array(&to_array(emb), triplets, margin);
    (loss, super::gnn::to_table(&grad))
}

/// Loss of the network output and gradients for the initial embeddings and
/// every layer weight.
pub fn loss_and_gradients(
    graph: &BatchGraph,
    gnn: &Gnn,
    initial: &Array2<f64>,
    triplets: &[Triplet],
    margin: f64,
) -> (f64, Gradients) {
    let cache = forward(graph, gnn, initial);
    let (loss, d_out) = loss_on_array(&cache.output, triplets, margin);
    (loss, backward(graph, gnn, &cache, &d_out))
}

/// Mean Manhattan distance over pairs.
pub fn mean_pair_distance(emb: &EmbeddingTable, pairs: &[(u32, u32)]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    pairs.iter().map(|&(a, b)| manhattan(emb.row(a as usize), emb.row(b as usize))).sum::<f64>()
        / pairs.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hinge_values() {
        assert_eq!(hinge(0.0, 1.0, 1.0), 0.0);
        assert_eq!(hinge(1.0, 0.5, 1.0), 1.5);
        assert_eq!(hinge(0.0, 5.0, 1.0), 0.0);
    }

    #[test]
    fn gradient_of_single_active_term() {
        let emb = EmbeddingTable::from_rows(1, &[vec![0.0], vec![1.0], vec![0.5]]).unwrap();
        let t = Triplet { positive: (0, 1), negative: (0, 2) };
        let (loss, g) = triplet_loss(&emb, &[t], 1.0);
        assert!((loss - 1.5).abs() < 1e-12);
        // d/dx0 of |x0-x1| - |x0-x2| = -1 - (-1) = 0
        assert_eq!(g.row(0), &[0.0]);
        assert_eq!(g.row(1), &[1.0]);
        assert_eq!(g.row(2), &[-1.0]);
    }
}
