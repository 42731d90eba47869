//! Structural channel: per-batch embedding training and the block-diagonal
//! structural similarity matrix.

mod embedding;
mod gnn;
mod loss;
mod negatives;
mod similarity;
mod train;

pub use embedding::{labels_path, manhattan, read_checkpoint, write_checkpoint, EmbeddingTable, CHECKPOINT_MAGIC};
pub use gnn::{backward, forward, gnn_forward, Activation, BatchGraph, ForwardCache, Gnn, GnnConfig, Gradients};
pub use loss::{hinge, loss_and_gradients, mean_pair_distance, triplet_loss, Triplet, TripletConfig};
pub use negatives::{nearest_pool, pool_size, sample_negatives};
pub use similarity::{check_block_diagonal, structure_similarity};
pub use train::{
    batch_seed, initial_embeddings, local_seed_rows, train_all, train_batch, Adam, MeanAggregationModel,
    StructureModel, TrainedBatch,
};
