//! Aperture windowing: restrict modeling to a column band around the source
//! and embed the resulting gradient back into the full grid.

use super::model::VelocityModel;
use super::WaveError;
use crate::scalar::Scalar;

/// Clip the model to columns within +-aperture/2 meters of the source.
/// Returns the sub-model and the (z, x) cell offset of its origin.
pub fn window_model<T: Scalar>(
    model: &VelocityModel<T>,
    source_pos: (f64, f64),
    aperture: f64,
) -> Result<(VelocityModel<T>, (usize, usize)), WaveError> {
    if !(aperture > 0.0) {
        return Err(WaveError::Argument(format!(
            "aperture must be positive, got {aperture}"
        )));
    }
    let (nz, nx) = model.shape();
    let (_, dx) = model.spacing();
    let lo = ((source_pos.1 - aperture / 2.0) / dx).round().max(0.0) as usize;
    let hi = (((source_pos.1 + aperture / 2.0) / dx).round() as usize).min(nx - 1);
    let sub_nx = hi - lo + 1;
    let m = model.slowness_sq();
    let mut sub = Vec::with_capacity(nz * sub_nx);
    for z in 0..nz {
        sub.extend_from_slice(&m[z * nx + lo..z * nx + hi + 1]);
    }
    let sub_model = VelocityModel::new(
        (nz, sub_nx),
        model.spacing(),
        sub,
        model.absorbing_width(),
    )?;
    Ok((sub_model, (0, lo)))
}

/// Zero-padded embedding of a windowed gradient into the full grid.
pub fn extend_gradient<T: Scalar>(
    sub_grad: &[T],
    sub_shape: (usize, usize),
    full_shape: (usize, usize),
    offset: (usize, usize),
) -> Result<Vec<T>, WaveError> {
    let (snz, snx) = sub_shape;
    let (nz, nx) = full_shape;
    if sub_grad.len() != snz * snx {
        return Err(WaveError::Argument(format!(
            "sub gradient has {} cells, shape says {}",
            sub_grad.len(),
            snz * snx
        )));
    }
    if offset.0 + snz > nz || offset.1 + snx > nx {
        return Err(WaveError::Argument(format!(
            "window {:?} at offset {:?} does not fit in {:?}",
            sub_shape, offset, full_shape
        )));
    }
    let mut full = vec![T::zero(); nz * nx];
    for z in 0..snz {
        let dst = (z + offset.0) * nx + offset.1;
        full[dst..dst + snx].copy_from_slice(&sub_grad[z * snx..(z + 1) * snx]);
    }
    Ok(full)
}
