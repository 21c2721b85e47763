//! Source time functions.

use super::WaveError;
use crate::scalar::Scalar;

/// Ricker wavelet with dominant frequency `f0`, sampled at `dt` over `nt`
/// steps. The peak is delayed by 1/f0 and the trace is normalized so the
/// largest sample has magnitude one.
pub fn ricker<T: Scalar>(f0: f64, dt: f64, nt: usize) -> Result<Vec<T>, WaveError> {
    if !(f0 > 0.0) {
        return Err(WaveError::Argument(format!(
            "ricker requires f0 > 0, got {f0}"
        )));
    }
    if !(dt > 0.0) {
        return Err(WaveError::Argument(format!(
            "ricker requires dt > 0, got {dt}"
        )));
    }
    let t0 = 1.0 / f0;
    let a = (std::f64::consts::PI * f0).powi(2);
    let mut trace = Vec::with_capacity(nt);
    let mut peak = 0.0f64;
    for i in 0..nt {
        let tau = i as f64 * dt - t0;
        let arg = a * tau * tau;
        let v = (1.0 - 2.0 * arg) * (-arg).exp();
        peak = peak.max(v.abs());
        trace.push(v);
    }
    if peak > 0.0 {
        for v in &mut trace {
            *v /= peak;
        }
    }
    Ok(trace.into_iter().map(T::of).collect())
}
