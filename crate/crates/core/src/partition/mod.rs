//! Balanced k-way partitioning and seed-aware mini-batch generation.

mod batch;
mod kway;
mod metrics;

pub use batch::{
    batch_partitions, batch_similarity, batches_from_assignment, expand_overlap, metis_cps, most_similar,
    pair_parts, reweight_target, vps, CpsConfig, InducedSubgraph, MiniBatch, OverlapConfig,
};
pub use kway::{part_capacity, partition_graph, partition_kway, Partition, WeightedGraph};
pub use metrics::{edge_cut_rate, seed_colocation_rate};
