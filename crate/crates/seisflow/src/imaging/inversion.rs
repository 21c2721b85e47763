//! The stochastic gradient loop: sample a batch, map per-shot gradients,
//! sum them over the fixed pairwise tree, update the image.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ops::{sample_batch, sgd_step, shot_gradient_with_misfit};
use super::types::{InversionConfig, InversionHistory, IterationStats, Survey};
use super::ImagingError;
use crate::reducer;
use crate::wavekit::VelocityModel;

/// Where the map/reduce of each iteration runs.
#[derive(Debug, Clone)]
pub enum Backend {
    /// Everything in this process; the reference implementation.
    InProcess,
}

/// Shot indices per iteration, drawn once from a seeded generator. Both
/// backends run the exact same schedule for a given (seed, config).
pub fn batch_schedule(
    n_s: usize,
    n_b: usize,
    n_iterations: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>, ImagingError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_iterations)
        .map(|_| sample_batch(n_s, n_b, &mut rng))
        .collect()
}

pub fn run_inversion(
    survey: &Survey<f32>,
    config: &InversionConfig<f32>,
    backend: &Backend,
) -> Result<(VelocityModel<f32>, InversionHistory), ImagingError> {
    config.validate(survey.n_s())?;
    match backend {
        Backend::InProcess => run_in_process(survey, config),
    }
}

fn run_in_process(
    survey: &Survey<f32>,
    config: &InversionConfig<f32>,
) -> Result<(VelocityModel<f32>, InversionHistory), ImagingError> {
    let schedule = batch_schedule(
        survey.n_s(),
        config.batch_size,
        config.n_iterations,
        config.seed,
    )?;
    let mut model = config.initial.clone();
    let mut history = InversionHistory::default();

    for (it, indices) in schedule.iter().enumerate() {
        let t0 = Instant::now();
        let mut parts = Vec::with_capacity(indices.len());
        let mut batch_misfit = 0.0;
        for &i in indices {
            let (g, phi) = shot_gradient_with_misfit(
                &model,
                &survey.shots[i],
                config.save_mode,
                survey.aperture,
            )
            .map_err(|e| ImagingError::Iteration {
                iteration: it,
                source: Box::new(e),
            })?;
            batch_misfit += phi;
            parts.push(g);
        }
        let grad = reducer::pairwise_tree_sum(parts)?;
        let grad_norm = grad.iter().map(|v| (*v as f64).powi(2)).sum::<f64>().sqrt();
        let x = sgd_step(model.slowness_sq(), &grad, config.step_size)?;
        model = model.with_slowness_sq(x)?;
        history.rows.push(IterationStats {
            iteration: it,
            indices: indices.clone(),
            misfit: batch_misfit,
            grad_norm,
            wall_s: t0.elapsed().as_secs_f64(),
        });
    }
    Ok((model, history))
}
