//! Event-driven gradient summation over the object store and message
//! queues, plus the final image update.

mod plan;

pub use plan::{pairwise_tree_sum, plan_chunks, ChunkPlan};

/// Errors from the reduction protocol.
#[derive(Debug, thiserror::Error)]
pub enum ReduceError {
    #[error("reduction protocol error: {0}")]
    Protocol(String),
    #[error("reduction stalled: {0}")]
    Stalled(String),
}
