//! Two-layer desk-scale scenario: a synthetic survey small enough to invert
//! in minutes, used by the CLI fixtures and the test suite.

use serde::{Deserialize, Serialize};

use super::ops::synthesize_shot;
use super::types::{InversionConfig, Survey};
use super::ImagingError;
use crate::scalar::Scalar;
use crate::wavekit::{self, AcquisitionGeometry, SaveMode, VelocityModel};

/// Declarative description of a two-layer survey and inversion run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToySpec {
    pub nz: usize,
    pub nx: usize,
    /// Grid spacing in meters (square cells).
    pub h: f64,
    pub v_top: f64,
    pub v_bottom: f64,
    /// Interface depth as a fraction of nz.
    pub interface_frac: f64,
    pub absorbing_width: usize,
    pub n_shots: usize,
    pub n_receivers: usize,
    pub record_time: f64,
    pub f0: f64,
    /// Depth of sources and receivers, meters.
    pub placement_depth: f64,
    pub n_iterations: usize,
    pub batch_size: usize,
    pub step_size: f64,
    pub seed: u64,
    #[serde(default)]
    pub save_mode: SaveMode,
    #[serde(default)]
    pub aperture: Option<f64>,
}

impl Default for ToySpec {
    fn default() -> Self {
        Self {
            nz: 201,
            nx: 401,
            h: 10.0,
            v_top: 1500.0,
            v_bottom: 2500.0,
            interface_frac: 0.3,
            absorbing_width: 20,
            n_shots: 20,
            n_receivers: 96,
            record_time: 1.0,
            f0: 12.0,
            placement_depth: 240.0,
            n_iterations: 10,
            batch_size: 4,
            step_size: 1.0,
            seed: 7,
            save_mode: SaveMode::Full,
            aperture: None,
        }
    }
}

/// True two-layer model of a [`ToySpec`].
pub fn true_model<T: Scalar>(spec: &ToySpec) -> Result<VelocityModel<T>, ImagingError> {
    let iface = ((spec.nz as f64 * spec.interface_frac) as usize).min(spec.nz - 1);
    let v: Vec<f64> = (0..spec.nz * spec.nx)
        .map(|j| {
            if j / spec.nx >= iface {
                spec.v_bottom
            } else {
                spec.v_top
            }
        })
        .collect();
    Ok(VelocityModel::from_velocity(
        (spec.nz, spec.nx),
        (spec.h, spec.h),
        &v,
        spec.absorbing_width,
    )?)
}

/// Starting model: the background without the reflector.
pub fn initial_model<T: Scalar>(spec: &ToySpec) -> Result<VelocityModel<T>, ImagingError> {
    Ok(VelocityModel::constant(
        (spec.nz, spec.nx),
        (spec.h, spec.h),
        spec.v_top,
        spec.absorbing_width,
    )?)
}

/// Shot geometries: sources and a fixed receiver line, both placed inside
/// the sponge-free interior of the grid.
pub fn geometries(spec: &ToySpec) -> Vec<AcquisitionGeometry> {
    let width = (spec.nx - 1) as f64 * spec.h;
    let margin = (spec.absorbing_width + 2) as f64 * spec.h;
    let span = width - 2.0 * margin;
    let receiver_pos: Vec<(f64, f64)> = (0..spec.n_receivers)
        .map(|r| {
            (
                spec.placement_depth,
                margin + span * (r as f64 + 0.5) / spec.n_receivers as f64,
            )
        })
        .collect();
    (0..spec.n_shots)
        .map(|s| {
            let frac = if spec.n_shots == 1 {
                0.5
            } else {
                0.1 + 0.8 * s as f64 / (spec.n_shots - 1) as f64
            };
            AcquisitionGeometry {
                source_pos: (spec.placement_depth, margin + span * frac),
                receiver_pos: receiver_pos.clone(),
                record_time: spec.record_time,
                f0: spec.f0,
            }
        })
        .collect()
}

/// Synthesize the survey and pair it with the matching inversion config.
pub fn build<T: Scalar>(
    spec: &ToySpec,
) -> Result<(Survey<T>, InversionConfig<T>), ImagingError> {
    let m_true = true_model::<T>(spec)?;
    let dt = wavekit::stable_dt(&m_true);
    let shots = geometries(spec)
        .iter()
        .map(|g| synthesize_shot(&m_true, g, dt, spec.aperture))
        .collect::<Result<Vec<_>, _>>()?;
    let survey = Survey {
        model_true: m_true,
        shots,
        aperture: spec.aperture,
    };
    let config = InversionConfig {
        n_iterations: spec.n_iterations,
        batch_size: spec.batch_size,
        step_size: spec.step_size,
        seed: spec.seed,
        save_mode: spec.save_mode,
        initial: initial_model::<T>(spec)?,
    };
    Ok((survey, config))
}
