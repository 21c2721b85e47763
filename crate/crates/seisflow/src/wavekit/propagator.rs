//! Forward and adjoint propagation plus the checkpointed gradient sweep.

use super::model::{
    AcquisitionGeometry, SaveMode, ShotRecord, VelocityModel, WavefieldHandle,
};
use super::stepper::{courant_number, Bilinear, Stepper};
use super::WaveError;
use crate::scalar::Scalar;

pub const DEFAULT_SPATIAL_ORDER: usize = 8;

/// Fields are scanned for NaN/Inf every this many steps (and at the end of
/// the run), so an unstable run fails with a step index without putting the
/// scan in the hot loop.
const FINITE_CHECK_INTERVAL: usize = 16;

/// Largest stable time step for the default spatial order.
pub fn stable_dt<T: Scalar>(model: &VelocityModel<T>) -> f64 {
    stable_dt_for_order(model, DEFAULT_SPATIAL_ORDER).expect("default order is supported")
}

/// Largest stable time step: courant(order) * min(dz, dx) / v_max.
pub fn stable_dt_for_order<T: Scalar>(
    model: &VelocityModel<T>,
    order: usize,
) -> Result<f64, WaveError> {
    let (dz, dx) = model.spacing();
    Ok(courant_number(order)? * dz.min(dx) / model.v_max())
}

/// Number of samples covering `[0, record_time]` at step `dt`:
/// floor(T/dt) + 1.
pub fn num_timesteps(record_time: f64, dt: f64) -> usize {
    assert!(
        record_time > 0.0 && dt > 0.0,
        "num_timesteps requires positive arguments, got T={record_time}, dt={dt}"
    );
    (record_time / dt).floor() as usize + 1
}

/// Model seismic data for one shot. The time step is chosen by
/// [`stable_dt_for_order`]; the wavelet must have `num_timesteps` samples.
pub fn forward<T: Scalar>(
    model: &VelocityModel<T>,
    geometry: &AcquisitionGeometry,
    wavelet: &[T],
    save: SaveMode,
) -> Result<(ShotRecord<T>, WavefieldHandle<T>), WaveError> {
    forward_with_order(model, geometry, wavelet, save, DEFAULT_SPATIAL_ORDER)
}

pub fn forward_with_order<T: Scalar>(
    model: &VelocityModel<T>,
    geometry: &AcquisitionGeometry,
    wavelet: &[T],
    save: SaveMode,
    order: usize,
) -> Result<(ShotRecord<T>, WavefieldHandle<T>), WaveError> {
    let dt = stable_dt_for_order(model, order)?;
    propagate(model, geometry, wavelet, save, dt, order)
}

/// Forward propagation at an explicit time step, for callers that must match
/// the sampling of existing data (misfit evaluation, Taylor harnesses)
/// rather than re-derive dt from the model at hand.
pub fn forward_at_dt<T: Scalar>(
    model: &VelocityModel<T>,
    geometry: &AcquisitionGeometry,
    wavelet: &[T],
    save: SaveMode,
    dt: f64,
) -> Result<(ShotRecord<T>, WavefieldHandle<T>), WaveError> {
    propagate(model, geometry, wavelet, save, dt, DEFAULT_SPATIAL_ORDER)
}

pub(crate) fn propagate<T: Scalar>(
    model: &VelocityModel<T>,
    geometry: &AcquisitionGeometry,
    wavelet: &[T],
    save: SaveMode,
    dt: f64,
    order: usize,
) -> Result<(ShotRecord<T>, WavefieldHandle<T>), WaveError> {
    geometry.validate(model)?;
    let nt = num_timesteps(geometry.record_time, dt);
    if wavelet.len() != nt {
        return Err(WaveError::Argument(format!(
            "wavelet has {} samples, expected {} for record_time {} at dt {}",
            wavelet.len(),
            geometry.record_time,
            nt,
            dt
        )));
    }
    if let SaveMode::Interval(k) = save {
        if k == 0 {
            return Err(WaveError::Argument("checkpoint interval must be >= 1".into()));
        }
    }
    let st = Stepper::new(model, dt, order)?;
    let src = Bilinear::<T>::new(model.shape(), model.spacing(), geometry.source_pos)?;
    let receivers: Vec<Bilinear<T>> = geometry
        .receiver_pos
        .iter()
        .map(|p| Bilinear::new(model.shape(), model.spacing(), *p))
        .collect::<Result<_, _>>()?;

    let n = model.nz() * model.nx();
    let nr = receivers.len();
    let mut u_prev = vec![T::zero(); n];
    let mut u = vec![T::zero(); n];
    let mut u_next = vec![T::zero(); n];
    let mut data = vec![T::zero(); nt * nr];

    let mut snapshots = Vec::new();
    let mut checkpoints = Vec::new();
    match save {
        SaveMode::Full => snapshots.reserve(nt),
        SaveMode::Interval(k) => checkpoints.reserve(nt.div_ceil(k)),
    }

    for step in 0..nt {
        for (r, rx) in receivers.iter().enumerate() {
            data[step * nr + r] = rx.sample(&u);
        }
        match save {
            SaveMode::Full => snapshots.push(u.clone()),
            SaveMode::Interval(k) => {
                if step % k == 0 {
                    checkpoints.push((u_prev.clone(), u.clone()));
                }
            }
        }
        if step + 1 == nt {
            break;
        }
        st.step_forward(&u_prev, &u, &mut u_next);
        inject_source(&st, &src, &mut u_next, wavelet[step]);
        if (step + 1) % FINITE_CHECK_INTERVAL == 0 || step + 2 == nt {
            if !Stepper::field_is_finite(&u_next) {
                return Err(WaveError::Unstable { step: step + 1 });
            }
        }
        rotate(&mut u_prev, &mut u, &mut u_next);
    }

    let record = ShotRecord::new(geometry.clone(), dt, nt, data)?;
    let handle = WavefieldHandle {
        mode: save,
        shape: model.shape(),
        dt,
        nt,
        snapshots,
        checkpoints,
        wavelet: wavelet.to_vec(),
        source_pos: geometry.source_pos,
    };
    Ok((record, handle))
}

/// Adjoint of the source-to-data map: inject `residual` at the receivers in
/// reverse time and sample the backpropagated field at the source.
pub fn adjoint_forward<T: Scalar>(
    model: &VelocityModel<T>,
    geometry: &AcquisitionGeometry,
    residual: &ShotRecord<T>,
) -> Result<Vec<T>, WaveError> {
    adjoint_forward_with_order(model, geometry, residual, DEFAULT_SPATIAL_ORDER)
}

pub fn adjoint_forward_with_order<T: Scalar>(
    model: &VelocityModel<T>,
    geometry: &AcquisitionGeometry,
    residual: &ShotRecord<T>,
    order: usize,
) -> Result<Vec<T>, WaveError> {
    geometry.validate(model)?;
    let dt = residual.dt;
    let nt = num_timesteps(geometry.record_time, dt);
    if residual.nt != nt || residual.nr != geometry.receiver_pos.len() {
        return Err(WaveError::Argument(format!(
            "residual is {}x{}, geometry expects {}x{}",
            residual.nt,
            residual.nr,
            nt,
            geometry.receiver_pos.len()
        )));
    }
    let st = Stepper::new(model, dt, order)?;
    let src = Bilinear::<T>::new(model.shape(), model.spacing(), geometry.source_pos)?;
    let receivers: Vec<Bilinear<T>> = geometry
        .receiver_pos
        .iter()
        .map(|p| Bilinear::new(model.shape(), model.spacing(), *p))
        .collect::<Result<_, _>>()?;

    let mut sweep = AdjointSweep::new(&st, nt);
    let mut trace = vec![T::zero(); nt];
    for n in (0..nt).rev() {
        sweep.prepare(&st);
        trace[n] = src.sample(&sweep.w);
        sweep.advance(&st, &receivers, residual, n)?;
    }
    Ok(trace)
}

/// Gradient of 1/2 ||F(m, q) - d||^2 with respect to squared slowness, via
/// zero-lag correlation of the adjoint field with the second time difference
/// of the stored forward field. `Interval` handles recompute each segment
/// from its checkpoint during the reverse sweep.
pub fn adjoint_gradient<T: Scalar>(
    model: &VelocityModel<T>,
    handle: &WavefieldHandle<T>,
    residual: &ShotRecord<T>,
) -> Result<Vec<T>, WaveError> {
    adjoint_gradient_with_order(model, handle, residual, DEFAULT_SPATIAL_ORDER)
}

pub fn adjoint_gradient_with_order<T: Scalar>(
    model: &VelocityModel<T>,
    handle: &WavefieldHandle<T>,
    residual: &ShotRecord<T>,
    order: usize,
) -> Result<Vec<T>, WaveError> {
    if handle.shape != model.shape() {
        return Err(WaveError::Argument(format!(
            "handle shape {:?} does not match model {:?}",
            handle.shape,
            model.shape()
        )));
    }
    if residual.nt != handle.nt || residual.dt != handle.dt {
        return Err(WaveError::Argument(format!(
            "residual ({} steps at dt {}) does not match handle ({} steps at dt {})",
            residual.nt, residual.dt, handle.nt, residual.dt
        )));
    }
    if residual.nr != residual.geometry.receiver_pos.len() {
        return Err(WaveError::Argument("residual geometry inconsistent".into()));
    }
    let nt = handle.nt;
    let st = Stepper::new(model, handle.dt, order)?;
    let src = Bilinear::<T>::new(model.shape(), model.spacing(), handle.source_pos)?;
    let receivers: Vec<Bilinear<T>> = residual
        .geometry
        .receiver_pos
        .iter()
        .map(|p| Bilinear::new(model.shape(), model.spacing(), *p))
        .collect::<Result<_, _>>()?;

    let n_cells = model.nz() * model.nx();
    let mut grad = vec![T::zero(); n_cells];
    let mut fields = ForwardFields::new(handle, &st, &src)?;
    let mut sweep = AdjointSweep::new(&st, nt);

    for n in (0..nt).rev() {
        sweep.prepare(&st);
        if n + 1 < nt {
            let (u_np1, u_n, u_nm1) = fields.triplet(n)?;
            accumulate_image(&st, &mut grad, &sweep.v1, u_np1, u_n, u_nm1);
        }
        sweep.advance(&st, &receivers, residual, n)?;
    }
    Ok(grad)
}

/// Reverse-time recursion state shared by the adjoint operators.
struct AdjointSweep<T: Scalar> {
    v2: Vec<T>,
    v1: Vec<T>,
    v0: Vec<T>,
    w: Vec<T>,
}

impl<T: Scalar> AdjointSweep<T> {
    fn new(st: &Stepper<T>, _nt: usize) -> Self {
        let n = st.nz * st.nx;
        Self {
            v2: vec![T::zero(); n],
            v1: vec![T::zero(); n],
            v0: vec![T::zero(); n],
            w: vec![T::zero(); n],
        }
    }

    /// Refresh w = cg .* v^{n+1}.
    fn prepare(&mut self, st: &Stepper<T>) {
        st.scale_by_cg(&self.v1, &mut self.w);
    }

    /// Compute v^n = R^T y_n + ca2 v^{n+1} + L w - cb v^{n+2} and shift.
    fn advance(
        &mut self,
        st: &Stepper<T>,
        receivers: &[Bilinear<T>],
        residual: &ShotRecord<T>,
        n: usize,
    ) -> Result<(), WaveError> {
        st.step_adjoint(&self.v2, &self.v1, &self.w, &mut self.v0);
        for (r, rx) in receivers.iter().enumerate() {
            rx.inject(&mut self.v0, residual.data[n * residual.nr + r]);
        }
        if n % FINITE_CHECK_INTERVAL == 0 && !Stepper::field_is_finite(&self.v0) {
            return Err(WaveError::Unstable { step: n });
        }
        std::mem::swap(&mut self.v2, &mut self.v1);
        std::mem::swap(&mut self.v1, &mut self.v0);
        Ok(())
    }
}

/// grad[j] -= inv_m[j] * v1[j] * (u^{n+1}[j] - ca2[j] u^n[j] + cb[j] u^{n-1}[j])
fn accumulate_image<T: Scalar>(
    st: &Stepper<T>,
    grad: &mut [T],
    v1: &[T],
    u_np1: &[T],
    u_n: &[T],
    u_nm1: &[T],
) {
    for j in 0..grad.len() {
        let dd = u_np1[j] - st.ca2[j] * u_n[j] + st.cb[j] * u_nm1[j];
        grad[j] -= st.inv_m[j] * v1[j] * dd;
    }
}

fn inject_source<T: Scalar>(st: &Stepper<T>, src: &Bilinear<T>, field: &mut [T], q: T) {
    for (j, w) in src.idx.iter().zip(&src.w) {
        field[*j] += st.cg[*j] * *w * q;
    }
}

/// Access to the stored forward field during the reverse sweep. For
/// `Interval` handles, whole segments are recomputed from their checkpoint
/// the first time a step inside them is requested.
struct ForwardFields<'a, T: Scalar> {
    handle: &'a WavefieldHandle<T>,
    zeros: Vec<T>,
    /// Interval mode scratch: buf[i] = u^{seg_start - 1 + i}.
    seg: Vec<Vec<T>>,
    seg_idx: Option<usize>,
    stepper: &'a Stepper<T>,
    src: &'a Bilinear<T>,
}

impl<'a, T: Scalar> ForwardFields<'a, T> {
    fn new(
        handle: &'a WavefieldHandle<T>,
        stepper: &'a Stepper<T>,
        src: &'a Bilinear<T>,
    ) -> Result<Self, WaveError> {
        let n = handle.shape.0 * handle.shape.1;
        Ok(Self {
            handle,
            zeros: vec![T::zero(); n],
            seg: Vec::new(),
            seg_idx: None,
            stepper,
            src,
        })
    }

    /// (u^{n+1}, u^n, u^{n-1}) for a gradient term at source step n <= nt-2.
    fn triplet(&mut self, n: usize) -> Result<(&[T], &[T], &[T]), WaveError> {
        match self.handle.mode {
            SaveMode::Full => {
                let snaps = &self.handle.snapshots;
                let u_nm1 = if n == 0 { &self.zeros } else { &snaps[n - 1] };
                Ok((&snaps[n + 1], &snaps[n], u_nm1))
            }
            SaveMode::Interval(k) => {
                let seg = n / k;
                if self.seg_idx != Some(seg) {
                    self.load_segment(seg, k)?;
                }
                let lo = seg * k;
                // buf[i] = u^{lo - 1 + i}
                let at = |i: usize| -> &[T] { &self.seg[i] };
                Ok((at(n + 2 - lo), at(n + 1 - lo), at(n - lo)))
            }
        }
    }

    fn load_segment(&mut self, seg: usize, k: usize) -> Result<(), WaveError> {
        let lo = seg * k;
        let nt = self.handle.nt;
        let hi = (lo + k).min(nt - 1); // recompute u^{lo+1} ..= u^{hi}
        let (cp_prev, cp) = &self.handle.checkpoints[seg];
        let n_cells = self.zeros.len();
        self.seg.clear();
        self.seg.push(cp_prev.clone());
        self.seg.push(cp.clone());
        let mut u_prev = cp_prev.clone();
        let mut u = cp.clone();
        let mut u_next = vec![T::zero(); n_cells];
        for step in lo..hi {
            self.stepper.step_forward(&u_prev, &u, &mut u_next);
            inject_source(
                self.stepper,
                self.src,
                &mut u_next,
                self.handle.wavelet[step],
            );
            self.seg.push(u_next.clone());
            rotate(&mut u_prev, &mut u, &mut u_next);
        }
        self.seg_idx = Some(seg);
        Ok(())
    }
}

fn rotate<T>(u_prev: &mut Vec<T>, u: &mut Vec<T>, u_next: &mut Vec<T>) {
    std::mem::swap(u_prev, u);
    std::mem::swap(u, u_next);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavekit::ricker;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line_geometry(model: &VelocityModel<f64>, n_rx: usize, record_time: f64, f0: f64) -> AcquisitionGeometry {
        let (ez, ex) = model.extent();
        let receiver_pos = (0..n_rx)
            .map(|r| (0.1 * ez, ex * (r as f64 + 0.5) / n_rx as f64))
            .collect();
        AcquisitionGeometry {
            source_pos: (0.12 * ez, 0.5 * ex),
            receiver_pos,
            record_time,
            f0,
        }
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn zero_wavelet_gives_zero_record() {
        let model = VelocityModel::<f64>::constant((41, 45), (10.0, 10.0), 1500.0, 10).unwrap();
        let geom = line_geometry(&model, 5, 0.3, 15.0);
        let dt = stable_dt(&model);
        let nt = num_timesteps(geom.record_time, dt);
        let (rec, _) = forward(&model, &geom, &vec![0.0; nt], SaveMode::Full).unwrap();
        assert!(rec.data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn forward_is_linear_in_source() {
        let model = VelocityModel::<f32>::constant((41, 45), (10.0, 10.0), 1500.0, 10).unwrap();
        let geom = AcquisitionGeometry {
            source_pos: (50.0, 220.0),
            receiver_pos: vec![(40.0, 100.0), (40.0, 300.0)],
            record_time: 0.3,
            f0: 15.0,
        };
        let dt = stable_dt(&model);
        let nt = num_timesteps(geom.record_time, dt);
        let w: Vec<f32> = ricker(geom.f0, dt, nt).unwrap();
        let w2: Vec<f32> = w.iter().map(|v| 2.0 * v).collect();
        let (r1, _) = forward(&model, &geom, &w, SaveMode::Full).unwrap();
        let (r2, _) = forward(&model, &geom, &w2, SaveMode::Full).unwrap();
        // Doubling is exact in binary floating point.
        for (a, b) in r1.data.iter().zip(&r2.data) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn first_arrival_matches_ray_time() {
        let v = 2000.0;
        let model = VelocityModel::<f64>::constant((81, 161), (10.0, 10.0), v, 15).unwrap();
        let f0 = 18.0;
        let geom = AcquisitionGeometry {
            source_pos: (400.0, 300.0),
            receiver_pos: vec![(400.0, 1200.0)],
            record_time: 0.8,
            f0,
        };
        let dt = stable_dt(&model);
        let nt = num_timesteps(geom.record_time, dt);
        let w: Vec<f64> = ricker(f0, dt, nt).unwrap();
        let (rec, _) = forward(&model, &geom, &w, SaveMode::Interval(50)).unwrap();
        let peak = rec.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let onset = rec
            .data
            .iter()
            .position(|v| v.abs() > 0.02 * peak)
            .expect("wave should arrive");
        let t_onset = onset as f64 * dt;
        // Source fires with a 1/f0 delay; allow two dominant periods.
        let expected = 900.0 / v + 1.0 / f0;
        assert!(
            (t_onset - expected).abs() < 2.0 / f0,
            "onset {t_onset} vs expected {expected}"
        );
    }

    fn random_record(
        geom: &AcquisitionGeometry,
        dt: f64,
        nt: usize,
        rng: &mut impl Rng,
    ) -> ShotRecord<f64> {
        let nr = geom.receiver_pos.len();
        let data = (0..nt * nr).map(|_| rng.random_range(-1.0..1.0)).collect();
        ShotRecord::new(geom.clone(), dt, nt, data).unwrap()
    }

    /// |<Fq, y> - <q, F'y>| / (|Fq| |y|) for one seed.
    pub(crate) fn dot_test_discrepancy(seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = VelocityModel::<f64>::constant((101, 101), (10.0, 10.0), 1800.0, 20).unwrap();
        let geom = line_geometry(&model, 7, 0.4, 15.0);
        let dt = stable_dt(&model);
        let nt = num_timesteps(geom.record_time, dt);
        let q: Vec<f64> = (0..nt).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = random_record(&geom, dt, nt, &mut rng);
        let (fq, _) = forward(&model, &geom, &q, SaveMode::Interval(nt)).unwrap();
        let z = adjoint_forward(&model, &geom, &y).unwrap();
        let lhs = dot(&fq.data, &y.data);
        let rhs = dot(&q, &z);
        (lhs - rhs).abs() / (fq.energy().sqrt() * y.energy().sqrt())
    }

    #[test]
    fn adjoint_dot_test_in_f64() {
        for seed in 0..3 {
            let d = dot_test_discrepancy(seed);
            assert!(d < 1e-10, "seed {seed}: discrepancy {d}");
        }
    }

    #[test]
    fn zero_residual_gives_zero_outputs() {
        let model = VelocityModel::<f64>::constant((41, 45), (10.0, 10.0), 1500.0, 10).unwrap();
        let geom = line_geometry(&model, 4, 0.25, 15.0);
        let dt = stable_dt(&model);
        let nt = num_timesteps(geom.record_time, dt);
        let w: Vec<f64> = ricker(geom.f0, dt, nt).unwrap();
        let (_, handle) = forward(&model, &geom, &w, SaveMode::Full).unwrap();
        let zero = ShotRecord::zeros(geom.clone(), dt, nt);
        let trace = adjoint_forward(&model, &geom, &zero).unwrap();
        assert!(trace.iter().all(|v| *v == 0.0));
        let grad = adjoint_gradient(&model, &handle, &zero).unwrap();
        assert!(grad.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn checkpoint_gradients_match_full_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let model = VelocityModel::<f32>::constant((61, 65), (10.0, 10.0), 1700.0, 12).unwrap();
        let geom = line_geometry(&model.cast::<f64>(), 6, 0.3, 15.0);
        let dt = stable_dt(&model);
        let nt = num_timesteps(geom.record_time, dt);
        let w: Vec<f32> = ricker(geom.f0, dt, nt).unwrap();
        let data: Vec<f32> = (0..nt * 6).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        let residual = ShotRecord::new(geom.clone(), dt, nt, data).unwrap();

        let (_, full) = forward(&model, &geom, &w, SaveMode::Full).unwrap();
        let g_full = adjoint_gradient(&model, &full, &residual).unwrap();
        let norm: f64 = g_full.iter().map(|v| (*v as f64).powi(2)).sum::<f64>();
        assert!(norm > 0.0);
        for k in [2usize, 5, 10] {
            let (_, ck) = forward(&model, &geom, &w, SaveMode::Interval(k)).unwrap();
            assert_eq!(ck.stored_count(), nt.div_ceil(k));
            let g_k = adjoint_gradient(&model, &ck, &residual).unwrap();
            let diff: f64 = g_k
                .iter()
                .zip(&g_full)
                .map(|(a, b)| ((*a - *b) as f64).powi(2))
                .sum::<f64>();
            assert!(
                diff.sqrt() <= 1e-6 * norm.sqrt(),
                "interval {k} deviates: {} vs {}",
                diff.sqrt(),
                norm.sqrt()
            );
        }
    }

    #[test]
    fn stable_dt_scales_inversely_with_vmax() {
        let m1 = VelocityModel::<f64>::constant((21, 21), (10.0, 10.0), 1500.0, 0).unwrap();
        let m2 = VelocityModel::<f64>::constant((21, 21), (10.0, 10.0), 3000.0, 0).unwrap();
        let r = stable_dt(&m1) / stable_dt(&m2);
        assert!((r - 2.0).abs() < 1e-9);
    }

    #[test]
    fn num_timesteps_examples() {
        assert_eq!(num_timesteps(12.0, 0.55e-3), 21819);
        assert_eq!(num_timesteps(1.0, 1.0), 2);
        assert_eq!(num_timesteps(0.5, 0.001), 501);
    }

    #[test]
    #[should_panic]
    fn num_timesteps_rejects_nonpositive() {
        num_timesteps(0.0, 0.1);
    }

    #[test]
    fn reference_step_count_is_in_range() {
        // h = 6.25 m and dt = 0.55 ms over 12 s puts a large 2D survey near
        // 21.9k steps; our CFL choice lands within 1% of that count and the
        // implied v_max is a plausible sediment-to-salt velocity.
        let steps = num_timesteps(12.0, 0.55e-3);
        assert!(((steps as f64) - 21889.0).abs() / 21889.0 < 0.01);
        let implied_vmax = courant_number(8).unwrap() * 6.25 / 0.55e-3;
        assert!((3000.0..8000.0).contains(&implied_vmax));
    }

    #[test]
    fn stays_bounded_at_stable_dt_and_diverges_beyond() {
        let model = VelocityModel::<f32>::constant((101, 101), (10.0, 10.0), 2500.0, 0).unwrap();
        let dt = stable_dt(&model);
        let record_time = 999.0 * dt + 1e-9;
        let geom = AcquisitionGeometry {
            source_pos: (500.0, 500.0),
            receiver_pos: vec![(300.0, 300.0)],
            record_time,
            f0: 12.0,
        };
        let nt = num_timesteps(record_time, dt);
        assert_eq!(nt, 1000);
        let w: Vec<f32> = ricker(geom.f0, dt, nt).unwrap();
        let (rec, _) = propagate(&model, &geom, &w, SaveMode::Interval(nt), dt, 8).unwrap();
        let peak = rec.data.iter().fold(0.0f32, |m, v| m.max(v.abs()));
        assert!(peak.is_finite() && peak < 1e3);

        let bad_dt = 1.2 * dt;
        let nt_bad = num_timesteps(record_time, bad_dt);
        let w_bad: Vec<f32> = ricker(geom.f0, bad_dt, nt_bad).unwrap();
        match propagate(&model, &geom, &w_bad, SaveMode::Interval(nt_bad), bad_dt, 8) {
            Err(WaveError::Unstable { step }) => assert!(step > 0),
            other => panic!("expected instability, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn random_models_stay_stable_at_stable_dt() {
        let mut rng = ChaCha8Rng::seed_from_u64(5150);
        for trial in 0..50 {
            let nz = rng.random_range(24..40);
            let nx = rng.random_range(24..40);
            let h = rng.random_range(5.0..15.0);
            let layered = trial % 2 == 1;
            let v_top = rng.random_range(1400.0..2500.0);
            let v_bot = rng.random_range(1400.0..4500.0);
            let v: Vec<f64> = (0..nz * nx)
                .map(|j| {
                    if layered && j / nx > nz / 2 {
                        v_bot
                    } else {
                        v_top
                    }
                })
                .collect();
            let model = VelocityModel::<f32>::from_velocity((nz, nx), (h, h), &v, 6).unwrap();
            let dt = stable_dt(&model);
            let record_time = 399.0 * dt + 1e-9;
            let geom = AcquisitionGeometry {
                source_pos: (h * (nz as f64 / 3.0), h * (nx as f64 / 2.0)),
                receiver_pos: vec![(h, h)],
                record_time,
                f0: 14.0,
            };
            let nt = num_timesteps(record_time, dt);
            let w: Vec<f32> = ricker(geom.f0, dt, nt).unwrap();
            let res = forward(&model, &geom, &w, SaveMode::Interval(nt));
            assert!(res.is_ok(), "trial {trial} went unstable");
        }
    }

    /// Taylor remainder ratios for a two-layer model; shared with the
    /// acceptance suite through `taylor_ratios`.
    #[test]
    fn gradient_passes_taylor_test() {
        let ratios = taylor_ratios(101, 101, 4, 20250);
        assert_eq!(ratios.len(), 3);
        for r in &ratios {
            assert!((3.5..=4.5).contains(r), "ratios {ratios:?}");
        }
    }

    pub(crate) fn taylor_ratios(nz: usize, nx: usize, n_h: usize, seed: u64) -> Vec<f64> {
        let h = 10.0;
        let mut v = vec![1500.0; nz * nx];
        for z in nz / 2..nz {
            for x in 0..nx {
                v[z * nx + x] = 2100.0;
            }
        }
        let m_true = VelocityModel::<f64>::from_velocity((nz, nx), (h, h), &v, 15).unwrap();
        // Start from the background without the reflector.
        let m0 = VelocityModel::<f64>::constant((nz, nx), (h, h), 1500.0, 15).unwrap();

        let geom = line_geometry(&m_true, 9, 0.45, 14.0);
        let dt = 0.95 * stable_dt(&m_true).min(stable_dt(&m0));
        let nt = num_timesteps(geom.record_time, dt);
        let w: Vec<f64> = ricker(geom.f0, dt, nt).unwrap();
        let (observed, _) = forward_at_dt(&m_true, &geom, &w, SaveMode::Interval(nt), dt).unwrap();

        let misfit = |m: &VelocityModel<f64>| -> f64 {
            let (rec, _) = forward_at_dt(m, &geom, &w, SaveMode::Interval(nt), dt).unwrap();
            0.5 * rec.residual(&observed).unwrap().energy()
        };

        let (rec0, handle) = forward_at_dt(&m0, &geom, &w, SaveMode::Full, dt).unwrap();
        let residual = rec0.residual(&observed).unwrap();
        let grad = adjoint_gradient(&m0, &handle, &residual).unwrap();

        // Smooth positive perturbation so v_max (hence nothing) changes sign.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dm = vec![0.0f64; nz * nx];
        for _ in 0..6 {
            let cz = rng.random_range(0.25..0.75) * nz as f64;
            let cx = rng.random_range(0.25..0.75) * nx as f64;
            let s = rng.random_range(3.0..8.0);
            let amp = rng.random_range(0.5..1.0);
            for z in 0..nz {
                for x in 0..nx {
                    let d2 = ((z as f64 - cz).powi(2) + (x as f64 - cx).powi(2)) / (s * s);
                    dm[z * nx + x] += amp * (-d2).exp();
                }
            }
        }
        let m_scale = 1.0 / (1500.0f64 * 1500.0);
        for d in &mut dm {
            *d *= 0.05 * m_scale;
        }

        let phi0 = misfit(&m0);
        let gdm = dot(&grad, &dm);
        let mut errs = Vec::new();
        let mut step = 1.0f64;
        for _ in 0..=n_h {
            let m_h: Vec<f64> = m0
                .slowness_sq()
                .iter()
                .zip(&dm)
                .map(|(m, d)| m + step * d)
                .collect();
            let m_pert = m0.with_slowness_sq(m_h).unwrap();
            let phi = misfit(&m_pert);
            errs.push((phi - phi0 - step * gdm).abs());
            step *= 0.5;
        }
        errs.windows(2).map(|w| w[0] / w[1]).take(3).collect()
    }
}
