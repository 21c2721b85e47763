//! LS-RTM objective, per-shot gradients, mini-batch sampling and the SGD
//! loop, runnable in-process or through the simulated cloud backends.

mod inversion;
mod ops;
pub mod toy;
mod types;

pub use inversion::{batch_schedule, run_inversion, Backend};
pub use ops::{
    misfit, sample_batch, sgd_step, shot_gradient, shot_gradient_with_misfit, synthesize_shot,
};
pub use types::{InversionConfig, InversionHistory, IterationStats, Survey};

use crate::reducer::ReduceError;
use crate::wavekit::WaveError;

#[derive(Debug, thiserror::Error)]
pub enum ImagingError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Wave(#[from] WaveError),
    #[error(transparent)]
    Reduce(#[from] ReduceError),
    #[error("iteration {iteration} failed: {source}")]
    Iteration {
        iteration: usize,
        source: Box<ImagingError>,
    },
    #[error("backend error: {0}")]
    Backend(String),
}
