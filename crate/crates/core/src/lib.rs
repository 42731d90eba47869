//! Entity alignment between two large knowledge graphs.
//!
//! The toolkit splits both graphs into seed-aware mini-batches, learns
//! structural embeddings independently per batch, scores entity names with a
//! semantic and a string channel, and fuses everything into one sparse
//! similarity matrix that is evaluated with Hits@N and MRR.

pub mod align;
pub mod error;
pub mod graph;
pub mod io;
pub mod name;
pub mod partition;
pub mod pipeline;
pub mod sparse;
pub mod structure;
pub mod synth;

pub use error::{Error, Result};
pub use graph::{
    build_graph, AlignmentMapping, EntityId, GraphBuilder, KnowledgeGraph, RelationId, SeedAlignment, SeedKind,
    Triple,
};
pub use sparse::TopKSimilarityMatrix;
