//! Domain types for the acoustic kernels: velocity models, acquisition
//! geometry, shot records and stored wavefields.

use serde::{Deserialize, Serialize};

use super::WaveError;
use crate::scalar::Scalar;

/// 2D subsurface model parametrized as squared slowness (s²/m²) on a regular
/// (nz, nx) grid. The outer `absorbing_width` cells of the same grid act as a
/// damping sponge.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityModel<T: Scalar> {
    shape: (usize, usize),
    spacing: (f64, f64),
    slowness_sq: Vec<T>,
    absorbing_width: usize,
}

impl<T: Scalar> VelocityModel<T> {
    pub fn new(
        shape: (usize, usize),
        spacing: (f64, f64),
        slowness_sq: Vec<T>,
        absorbing_width: usize,
    ) -> Result<Self, WaveError> {
        let (nz, nx) = shape;
        if nz < 5 || nx < 5 {
            return Err(WaveError::Argument(format!(
                "model grid {nz}x{nx} too small"
            )));
        }
        if !(spacing.0 > 0.0 && spacing.1 > 0.0) {
            return Err(WaveError::Argument(format!(
                "grid spacing must be positive, got {:?}",
                spacing
            )));
        }
        if slowness_sq.len() != nz * nx {
            return Err(WaveError::Argument(format!(
                "slowness array has {} cells, expected {}",
                slowness_sq.len(),
                nz * nx
            )));
        }
        if slowness_sq.iter().any(|m| !(*m > T::zero()) || !m.is_finite()) {
            return Err(WaveError::Argument(
                "squared slowness must be finite and positive everywhere".into(),
            ));
        }
        Ok(Self {
            shape,
            spacing,
            slowness_sq,
            absorbing_width,
        })
    }

    /// Build a model from velocities in m/s (m = 1/v²).
    pub fn from_velocity(
        shape: (usize, usize),
        spacing: (f64, f64),
        velocity: &[f64],
        absorbing_width: usize,
    ) -> Result<Self, WaveError> {
        let m = velocity
            .iter()
            .map(|v| T::of(1.0 / (v * v)))
            .collect();
        Self::new(shape, spacing, m, absorbing_width)
    }

    /// Homogeneous model at a single velocity.
    pub fn constant(
        shape: (usize, usize),
        spacing: (f64, f64),
        velocity: f64,
        absorbing_width: usize,
    ) -> Result<Self, WaveError> {
        let v = vec![velocity; shape.0 * shape.1];
        Self::from_velocity(shape, spacing, &v, absorbing_width)
    }

    pub fn nz(&self) -> usize {
        self.shape.0
    }

    pub fn nx(&self) -> usize {
        self.shape.1
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn spacing(&self) -> (f64, f64) {
        self.spacing
    }

    pub fn absorbing_width(&self) -> usize {
        self.absorbing_width
    }

    pub fn slowness_sq(&self) -> &[T] {
        &self.slowness_sq
    }

    pub fn slowness_sq_mut(&mut self) -> &mut [T] {
        &mut self.slowness_sq
    }

    /// Replace the squared-slowness values, keeping grid metadata.
    pub fn with_slowness_sq(&self, slowness_sq: Vec<T>) -> Result<Self, WaveError> {
        Self::new(self.shape, self.spacing, slowness_sq, self.absorbing_width)
    }

    /// Fastest velocity in the model, in m/s.
    pub fn v_max(&self) -> f64 {
        let m_min = self
            .slowness_sq
            .iter()
            .fold(f64::INFINITY, |a, m| a.min(m.as_f64()));
        1.0 / m_min.sqrt()
    }

    /// Physical extent (depth, width) in meters.
    pub fn extent(&self) -> (f64, f64) {
        (
            (self.shape.0 - 1) as f64 * self.spacing.0,
            (self.shape.1 - 1) as f64 * self.spacing.1,
        )
    }

    /// Convert the field scalar, e.g. to re-run a kernel in f64.
    pub fn cast<U: Scalar>(&self) -> VelocityModel<U> {
        VelocityModel {
            shape: self.shape,
            spacing: self.spacing,
            slowness_sq: self
                .slowness_sq
                .iter()
                .map(|m| U::of(m.as_f64()))
                .collect(),
            absorbing_width: self.absorbing_width,
        }
    }
}

/// Source/receiver layout for one shot, positions in meters as (z, x).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionGeometry {
    pub source_pos: (f64, f64),
    pub receiver_pos: Vec<(f64, f64)>,
    pub record_time: f64,
    pub f0: f64,
}

impl AcquisitionGeometry {
    pub fn validate<T: Scalar>(&self, model: &VelocityModel<T>) -> Result<(), WaveError> {
        if !(self.record_time > 0.0) {
            return Err(WaveError::Argument(format!(
                "record_time must be positive, got {}",
                self.record_time
            )));
        }
        if !(self.f0 > 0.0) {
            return Err(WaveError::Argument(format!(
                "dominant frequency must be positive, got {}",
                self.f0
            )));
        }
        if self.receiver_pos.is_empty() {
            return Err(WaveError::Argument("geometry has no receivers".into()));
        }
        let (ez, ex) = model.extent();
        let inside = |p: &(f64, f64)| p.0 >= 0.0 && p.0 <= ez && p.1 >= 0.0 && p.1 <= ex;
        if !inside(&self.source_pos) {
            return Err(WaveError::Argument(format!(
                "source {:?} outside domain {:?}",
                self.source_pos,
                (ez, ex)
            )));
        }
        if let Some(p) = self.receiver_pos.iter().find(|p| !inside(p)) {
            return Err(WaveError::Argument(format!(
                "receiver {:?} outside domain {:?}",
                p,
                (ez, ex)
            )));
        }
        Ok(())
    }
}

/// Receiver traces for one shot: `data` is nt x nr, time fastest over rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotRecord<T: Scalar> {
    pub geometry: AcquisitionGeometry,
    pub dt: f64,
    pub nt: usize,
    pub nr: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> ShotRecord<T> {
    pub fn new(
        geometry: AcquisitionGeometry,
        dt: f64,
        nt: usize,
        data: Vec<T>,
    ) -> Result<Self, WaveError> {
        let nr = geometry.receiver_pos.len();
        if data.len() != nt * nr {
            return Err(WaveError::Argument(format!(
                "record has {} samples, expected {} ({} x {})",
                data.len(),
                nt * nr,
                nt,
                nr
            )));
        }
        Ok(Self {
            geometry,
            dt,
            nt,
            nr,
            data,
        })
    }

    pub fn zeros(geometry: AcquisitionGeometry, dt: f64, nt: usize) -> Self {
        let nr = geometry.receiver_pos.len();
        Self {
            geometry,
            dt,
            nt,
            nr,
            data: vec![T::zero(); nt * nr],
        }
    }

    pub fn sample(&self, t: usize, r: usize) -> T {
        self.data[t * self.nr + r]
    }

    /// Elementwise difference against another record on the same geometry.
    pub fn residual(&self, observed: &ShotRecord<T>) -> Result<ShotRecord<T>, WaveError> {
        if self.nt != observed.nt || self.nr != observed.nr {
            return Err(WaveError::Argument(format!(
                "record shapes differ: {}x{} vs {}x{}",
                self.nt, self.nr, observed.nt, observed.nr
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&observed.data)
            .map(|(a, b)| *a - *b)
            .collect();
        Ok(ShotRecord {
            geometry: self.geometry.clone(),
            dt: self.dt,
            nt: self.nt,
            nr: self.nr,
            data,
        })
    }

    /// Sum of squared samples, accumulated in f64.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|x| x.as_f64() * x.as_f64()).sum()
    }
}

/// How the forward wavefield is kept for backpropagation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SaveMode {
    /// Keep every time step in memory.
    Full,
    /// Keep every k-th step and recompute the steps in between during the
    /// reverse sweep.
    Interval(usize),
}

impl Default for SaveMode {
    fn default() -> Self {
        SaveMode::Full
    }
}

/// Forward wavefield as stored by [`super::forward`]: either every snapshot
/// or checkpoint pairs plus the source needed to recompute the gaps.
#[derive(Debug, Clone)]
pub struct WavefieldHandle<T: Scalar> {
    pub(crate) mode: SaveMode,
    pub(crate) shape: (usize, usize),
    pub(crate) dt: f64,
    pub(crate) nt: usize,
    /// Full mode: u^0 .. u^{nt-1}.
    pub(crate) snapshots: Vec<Vec<T>>,
    /// Interval mode: (u^{c-1}, u^c) at c = 0, k, 2k, ...
    pub(crate) checkpoints: Vec<(Vec<T>, Vec<T>)>,
    /// Source trace and position, kept for segment recomputation.
    pub(crate) wavelet: Vec<T>,
    pub(crate) source_pos: (f64, f64),
}

impl<T: Scalar> WavefieldHandle<T> {
    pub fn mode(&self) -> SaveMode {
        self.mode
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    /// Number of stored entries: nt for Full, ceil(nt/k) for Interval(k).
    pub fn stored_count(&self) -> usize {
        match self.mode {
            SaveMode::Full => self.snapshots.len(),
            SaveMode::Interval(_) => self.checkpoints.len(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_invariants_enforced() {
        assert!(VelocityModel::<f32>::constant((4, 50), (10.0, 10.0), 1500.0, 0).is_err());
        assert!(VelocityModel::<f32>::constant((50, 50), (0.0, 10.0), 1500.0, 0).is_err());
        let bad = vec![0.0f32; 25];
        assert!(VelocityModel::new((5, 5), (1.0, 1.0), bad, 0).is_err());
        let m = VelocityModel::<f32>::constant((50, 40), (10.0, 5.0), 2000.0, 10).unwrap();
        assert_eq!(m.shape(), (50, 40));
        assert!((m.v_max() - 2000.0).abs() < 1e-3);
        assert_eq!(m.extent(), (490.0, 195.0));
    }

    #[test]
    fn geometry_positions_must_be_inside() {
        let m = VelocityModel::<f32>::constant((50, 50), (10.0, 10.0), 1500.0, 0).unwrap();
        let mut g = AcquisitionGeometry {
            source_pos: (20.0, 250.0),
            receiver_pos: vec![(20.0, 100.0)],
            record_time: 1.0,
            f0: 10.0,
        };
        assert!(g.validate(&m).is_ok());
        g.receiver_pos.push((20.0, 491.0));
        assert!(g.validate(&m).is_err());
        g.receiver_pos.pop();
        g.record_time = 0.0;
        assert!(g.validate(&m).is_err());
    }

    #[test]
    fn record_shape_checked() {
        let g = AcquisitionGeometry {
            source_pos: (0.0, 0.0),
            receiver_pos: vec![(0.0, 0.0), (0.0, 10.0)],
            record_time: 1.0,
            f0: 10.0,
        };
        assert!(ShotRecord::new(g.clone(), 1e-3, 10, vec![0.0f32; 20]).is_ok());
        assert!(ShotRecord::new(g, 1e-3, 10, vec![0.0f32; 19]).is_err());
    }
}
