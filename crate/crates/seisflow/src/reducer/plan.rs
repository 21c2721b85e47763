//! Chunk planning and the deterministic summation tree.

use serde::{Deserialize, Serialize};

use super::ReduceError;

/// Partition of a gradient vector into contiguous chunks, each assigned
/// round-robin to a queue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkPlan {
    pub total_len: usize,
    pub n_queues: usize,
    /// Half-open element ranges, in order.
    pub bounds: Vec<(usize, usize)>,
}

impl ChunkPlan {
    pub fn n_chunks(&self) -> usize {
        self.bounds.len()
    }

    /// Queue index for a chunk.
    pub fn queue_of(&self, chunk: usize) -> usize {
        chunk % self.n_queues
    }

    pub fn chunk_len(&self, chunk: usize) -> usize {
        let (lo, hi) = self.bounds[chunk];
        hi - lo
    }

    pub fn slice<'a, T>(&self, data: &'a [T], chunk: usize) -> &'a [T] {
        let (lo, hi) = self.bounds[chunk];
        &data[lo..hi]
    }
}

/// Split `total_len` elements into ceil(total/max) contiguous chunks of at
/// most `max_object_elems` each, assigned round-robin to `n_queues` queues.
pub fn plan_chunks(
    total_len: usize,
    max_object_elems: usize,
    n_queues: usize,
) -> Result<ChunkPlan, ReduceError> {
    if total_len == 0 || max_object_elems == 0 || n_queues == 0 {
        return Err(ReduceError::Protocol(format!(
            "plan_chunks arguments must be >= 1, got ({total_len}, {max_object_elems}, {n_queues})"
        )));
    }
    let n_chunks = total_len.div_ceil(max_object_elems);
    let bounds = (0..n_chunks)
        .map(|i| {
            (
                i * max_object_elems,
                ((i + 1) * max_object_elems).min(total_len),
            )
        })
        .collect();
    Ok(ChunkPlan {
        total_len,
        n_queues,
        bounds,
    })
}

/// Sum vectors pairwise over a fixed balanced binary tree: adjacent pairs
/// per level, odd tail carried up unchanged. Both the in-process backend and
/// the reducer's deterministic mode follow this shape, which makes their
/// results bit-identical.
pub fn pairwise_tree_sum(mut parts: Vec<Vec<f32>>) -> Result<Vec<f32>, ReduceError> {
    if parts.is_empty() {
        return Err(ReduceError::Protocol("nothing to sum".into()));
    }
    let len = parts[0].len();
    if parts.iter().any(|p| p.len() != len) {
        return Err(ReduceError::Protocol(
            "summands have mismatched lengths".into(),
        ));
    }
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut left) = it.next() {
            if let Some(right) = it.next() {
                add_assign(&mut left, &right);
            }
            next.push(left);
        }
        parts = next;
    }
    Ok(parts.pop().expect("non-empty"))
}

pub(crate) fn add_assign(acc: &mut [f32], other: &[f32]) {
    for (a, b) in acc.iter_mut().zip(other) {
        *a += *b;
    }
}
