//! Per-shot modeling, misfit and gradient, batch sampling, and the SGD
//! update rule.

use rand::Rng;

use super::ImagingError;
use crate::scalar::Scalar;
use crate::wavekit::{
    self, AcquisitionGeometry, SaveMode, ShotRecord, VelocityModel, WavefieldHandle,
};

/// Per-shot modeling domain: the (possibly windowed) model, the geometry
/// translated into it, and which receivers survived the clipping.
pub(crate) struct ShotDomain<T: Scalar> {
    pub model: VelocityModel<T>,
    pub offset: (usize, usize),
    pub geometry: AcquisitionGeometry,
    pub kept: Vec<usize>,
    pub full_shape: (usize, usize),
}

pub(crate) fn shot_domain<T: Scalar>(
    model: &VelocityModel<T>,
    geometry: &AcquisitionGeometry,
    aperture: Option<f64>,
) -> Result<ShotDomain<T>, ImagingError> {
    let full_shape = model.shape();
    let (sub, offset) = match aperture {
        Some(a) => wavekit::window_model(model, geometry.source_pos, a)?,
        None => (model.clone(), (0, 0)),
    };
    let dx = model.spacing().1;
    let shift = offset.1 as f64 * dx;
    let (_, width) = sub.extent();
    let mut kept = Vec::new();
    let mut receiver_pos = Vec::new();
    for (r, (z, x)) in geometry.receiver_pos.iter().enumerate() {
        let lx = x - shift;
        // Receivers outside the window are omitted from modeling.
        if lx >= 0.0 && lx <= width {
            kept.push(r);
            receiver_pos.push((*z, lx));
        }
    }
    if receiver_pos.is_empty() {
        return Err(ImagingError::Argument(
            "no receivers fall inside the modeling window".into(),
        ));
    }
    let geometry = AcquisitionGeometry {
        source_pos: (geometry.source_pos.0, geometry.source_pos.1 - shift),
        receiver_pos,
        record_time: geometry.record_time,
        f0: geometry.f0,
    };
    Ok(ShotDomain {
        model: sub,
        offset,
        geometry,
        kept,
        full_shape,
    })
}

/// Model one shot at a fixed dt, producing a record over the full receiver
/// line (omitted receivers read zero) and the stored wavefield.
pub(crate) fn model_shot<T: Scalar>(
    domain: &ShotDomain<T>,
    full_geometry: &AcquisitionGeometry,
    dt: f64,
    save: SaveMode,
) -> Result<(ShotRecord<T>, WavefieldHandle<T>), ImagingError> {
    let nt = wavekit::num_timesteps(domain.geometry.record_time, dt);
    let wavelet: Vec<T> = wavekit::ricker(domain.geometry.f0, dt, nt)?;
    let (sub_rec, handle) =
        wavekit::forward_at_dt(&domain.model, &domain.geometry, &wavelet, save, dt)?;
    let n_receivers = full_geometry.receiver_pos.len();
    let mut data = vec![T::zero(); nt * n_receivers];
    for (slot, r_full) in domain.kept.iter().enumerate() {
        for t in 0..nt {
            data[t * n_receivers + r_full] = sub_rec.data[t * sub_rec.nr + slot];
        }
    }
    let record = ShotRecord::new(full_geometry.clone(), dt, nt, data)?;
    Ok((record, handle))
}

/// Synthesize observed data for one shot from a reference model.
pub fn synthesize_shot<T: Scalar>(
    model_true: &VelocityModel<T>,
    geometry: &AcquisitionGeometry,
    dt: f64,
    aperture: Option<f64>,
) -> Result<ShotRecord<T>, ImagingError> {
    let domain = shot_domain(model_true, geometry, aperture)?;
    let nt = wavekit::num_timesteps(geometry.record_time, dt);
    let (rec, _) = model_shot(&domain, geometry, dt, SaveMode::Interval(nt))?;
    Ok(rec)
}

/// 1/2 || F(m, q_i) - d_i ||^2, accumulated in f64.
pub fn misfit<T: Scalar>(
    model: &VelocityModel<T>,
    shot: &ShotRecord<T>,
    aperture: Option<f64>,
) -> Result<f64, ImagingError> {
    let domain = shot_domain(model, &shot.geometry, aperture)?;
    let (modeled, _) = model_shot(&domain, &shot.geometry, shot.dt, SaveMode::Interval(shot.nt))?;
    let r = modeled_residual(&modeled, shot)?;
    Ok(0.5 * r.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>())
}

fn modeled_residual<T: Scalar>(
    modeled: &ShotRecord<T>,
    observed: &ShotRecord<T>,
) -> Result<Vec<T>, ImagingError> {
    if modeled.nt != observed.nt || modeled.nr != observed.nr {
        return Err(ImagingError::Argument(format!(
            "modeled record {}x{} does not match observed {}x{}",
            modeled.nt, modeled.nr, observed.nt, observed.nr
        )));
    }
    Ok(modeled
        .data
        .iter()
        .zip(&observed.data)
        .map(|(a, b)| *a - *b)
        .collect())
}

/// Gradient of [`misfit`] with respect to squared slowness, on the full
/// grid. Also returns the shot misfit, which the inversion loop logs.
pub fn shot_gradient_with_misfit<T: Scalar>(
    model: &VelocityModel<T>,
    shot: &ShotRecord<T>,
    save: SaveMode,
    aperture: Option<f64>,
) -> Result<(Vec<T>, f64), ImagingError> {
    let domain = shot_domain(model, &shot.geometry, aperture)?;
    let (modeled, handle) = model_shot(&domain, &shot.geometry, shot.dt, save)?;
    let full_residual = modeled_residual(&modeled, shot)?;
    let phi = 0.5
        * full_residual
            .iter()
            .map(|v| v.as_f64() * v.as_f64())
            .sum::<f64>();
    // Gather the residual onto the receivers kept by the window.
    let nr_sub = domain.kept.len();
    let mut sub_data = vec![T::zero(); shot.nt * nr_sub];
    for (slot, r_full) in domain.kept.iter().enumerate() {
        for t in 0..shot.nt {
            sub_data[t * nr_sub + slot] = full_residual[t * shot.nr + r_full];
        }
    }
    let sub_residual = ShotRecord::new(domain.geometry.clone(), shot.dt, shot.nt, sub_data)?;
    let sub_grad = wavekit::adjoint_gradient(&domain.model, &handle, &sub_residual)?;
    let grad = wavekit::extend_gradient(
        &sub_grad,
        domain.model.shape(),
        domain.full_shape,
        domain.offset,
    )?;
    Ok((grad, phi))
}

/// Gradient of [`misfit`] with respect to squared slowness.
pub fn shot_gradient<T: Scalar>(
    model: &VelocityModel<T>,
    shot: &ShotRecord<T>,
    save: SaveMode,
    aperture: Option<f64>,
) -> Result<Vec<T>, ImagingError> {
    shot_gradient_with_misfit(model, shot, save, aperture).map(|(g, _)| g)
}

/// `n_b` distinct shot indices, uniform without replacement.
pub fn sample_batch<R: Rng>(n_s: usize, n_b: usize, rng: &mut R) -> Result<Vec<usize>, ImagingError> {
    if n_b == 0 || n_b > n_s {
        return Err(ImagingError::Argument(format!(
            "batch size {n_b} not in [1, {n_s}]"
        )));
    }
    Ok(rand::seq::index::sample(rng, n_s, n_b).into_vec())
}

/// x - alpha * g, elementwise.
pub fn sgd_step<T: Scalar>(x: &[T], g: &[T], alpha: f64) -> Result<Vec<T>, ImagingError> {
    if x.len() != g.len() {
        return Err(ImagingError::Argument(format!(
            "sgd_step shape mismatch: {} vs {}",
            x.len(),
            g.len()
        )));
    }
    let a = T::of(alpha);
    Ok(x.iter().zip(g).map(|(xi, gi)| *xi - a * *gi).collect())
}
