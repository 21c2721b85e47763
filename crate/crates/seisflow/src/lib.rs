//! Desk-scale event-driven seismic imaging.
//!
//! The crate pairs a 2D acoustic wave kernel and a stochastic-gradient
//! imaging loop with a deterministic discrete-event simulator of the cloud
//! substrate it is designed to run on: batch-launched instances that write
//! gradients to an object store, an at-least-once message queue, capped
//! serverless functions that sum gradients event-driven, and a declarative
//! workflow that drives the optimization loop. A metrics layer reproduces
//! the idle-time, cost, spot-market and resilience analyses.
//!
//! Field math is generic over the scalar type ([`scalar::Scalar`]): the
//! production pipeline runs in f32, the verification harnesses re-run the
//! same kernels in f64.

pub mod imaging;
pub mod reducer;
pub mod scalar;
pub mod wavekit;

/// f32 model/record aliases used by the production pipeline.
pub type Model = wavekit::VelocityModel<f32>;
pub type Record = wavekit::ShotRecord<f32>;

/// f64 aliases for the verification harnesses.
pub type Model64 = wavekit::VelocityModel<f64>;
pub type Record64 = wavekit::ShotRecord<f64>;
