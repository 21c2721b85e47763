//! Survey, configuration and history types for the imaging loop.

use serde::{Deserialize, Serialize};

use super::ImagingError;
use crate::scalar::Scalar;
use crate::wavekit::{SaveMode, ShotRecord, VelocityModel};

/// Observed data plus the modeling convention it was synthesized with.
/// Shot index is position in `shots`.
#[derive(Debug, Clone)]
pub struct Survey<T: Scalar> {
    pub model_true: VelocityModel<T>,
    pub shots: Vec<ShotRecord<T>>,
    /// Optional modeling aperture in meters; when set, every shot is modeled
    /// on a column window of this width around its source.
    pub aperture: Option<f64>,
}

impl<T: Scalar> Survey<T> {
    pub fn n_s(&self) -> usize {
        self.shots.len()
    }
}

/// Knobs of one inversion run.
#[derive(Debug, Clone)]
pub struct InversionConfig<T: Scalar> {
    pub n_iterations: usize,
    pub batch_size: usize,
    pub step_size: f64,
    pub seed: u64,
    pub save_mode: SaveMode,
    /// Starting model m1.
    pub initial: VelocityModel<T>,
}

impl<T: Scalar> InversionConfig<T> {
    pub fn validate(&self, n_s: usize) -> Result<(), ImagingError> {
        if self.n_iterations < 1 {
            return Err(ImagingError::Argument(
                "n_iterations must be >= 1".into(),
            ));
        }
        if self.batch_size < 1 || self.batch_size > n_s {
            return Err(ImagingError::Argument(format!(
                "batch_size must be in [1, {n_s}], got {}",
                self.batch_size
            )));
        }
        if !(self.step_size >= 0.0) {
            return Err(ImagingError::Argument(format!(
                "step_size must be >= 0, got {}",
                self.step_size
            )));
        }
        Ok(())
    }
}

/// Per-iteration log of one inversion run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: usize,
    pub indices: Vec<usize>,
    /// Mini-batch misfit: sum of 1/2 ||r_i||^2 over the sampled shots.
    pub misfit: f64,
    pub grad_norm: f64,
    pub wall_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InversionHistory {
    pub rows: Vec<IterationStats>,
}

impl InversionHistory {
    /// CSV with the documented header; one row per iteration.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,misfit,grad_norm,wall_s\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.9e},{:.9e},{:.3}\n",
                r.iteration, r.misfit, r.grad_norm, r.wall_s
            ));
        }
        out
    }
}
