//! 2D acoustic isotropic finite-difference propagator with adjoint
//! propagation and checkpointed backpropagation, producing per-shot
//! gradients.

mod model;
mod propagator;
mod stepper;
mod wavelet;
mod window;

pub use model::{AcquisitionGeometry, SaveMode, ShotRecord, VelocityModel, WavefieldHandle};
pub use propagator::{
    adjoint_forward, adjoint_forward_with_order, adjoint_gradient, adjoint_gradient_with_order,
    forward, forward_at_dt, forward_with_order, num_timesteps, stable_dt, stable_dt_for_order,
    DEFAULT_SPATIAL_ORDER,
};
pub use stepper::SUPPORTED_ORDERS;
pub use wavelet::ricker;
pub use window::{extend_gradient, window_model};

#[cfg(test)]
pub(crate) use propagator::propagate;

/// Errors from the wave kernels.
#[derive(Debug, thiserror::Error)]
pub enum WaveError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("propagation unstable: non-finite field at step {step}")]
    Unstable { step: usize },
}

/// Test-only probe of the raw kernel rate (million cell updates per second).
pub fn bench_probe(model: &VelocityModel<f32>, steps: usize) -> f64 {
    let st = stepper::Stepper::new(model, 1e-3, 8).unwrap();
    let n = model.nz() * model.nx();
    let mut a = vec![0.0f32; n];
    let b = vec![1e-3f32; n];
    let mut c = vec![0.0f32; n];
    a[n / 2] = 1.0;
    let t0 = std::time::Instant::now();
    for _ in 0..steps {
        st.step_forward(&b, &a, &mut c);
        std::mem::swap(&mut a, &mut c);
    }
    (n * steps) as f64 / t0.elapsed().as_secs_f64() / 1e6
}
