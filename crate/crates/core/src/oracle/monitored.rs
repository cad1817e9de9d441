//! Position-monitored free motion.
//!
//! Every `Δt = T/n_steps` the particle is localised to width `Δx`, which gives
//! it a momentum spread `ħ/Δx`. A step is the drift `vΔt` plus, per component,
//! a Gaussian of variance `σ² + Δx²` with `σ = ħΔt/(μΔx)`: free spreading of the
//! kick composed with the localisation jitter. `kick_scale` multiplies the
//! random part; `0` gives the ballistic path.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::OracleError;
use crate::propagator::{PropagatorParams, FIG1_LENGTH};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorSpec {
    pub delta_x: f64,
    pub n_steps: usize,
    pub samples: usize,
    pub seed: u64,
    pub kick_scale: f64,
    /// Source-to-detector displacement covered by the drift in time `T`.
    pub displacement: [f64; 2],
}

impl MonitorSpec {
    pub fn new(delta_x: f64, n_steps: usize, samples: usize, seed: u64) -> Self {
        Self { delta_x, n_steps, samples, seed, kick_scale: 1.0, displacement: [FIG1_LENGTH, 0.0] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitoredLength {
    pub mean_length: f64,
    pub std_error: f64,
}

pub fn monitored_length(
    delta_x: f64,
    params: &PropagatorParams,
    n_steps: usize,
    samples: usize,
    seed: u64,
) -> Result<MonitoredLength, OracleError> {
    monitored_length_with(&MonitorSpec::new(delta_x, n_steps, samples, seed), params)
}

pub fn monitored_length_with(spec: &MonitorSpec, params: &PropagatorParams) -> Result<MonitoredLength, OracleError> {
    params.validate()?;
    if !(spec.delta_x > 0.0 && spec.delta_x.is_finite()) {
        return Err(OracleError::Domain(format!("delta_x must be > 0, got {}", spec.delta_x)));
    }
    if spec.n_steps == 0 {
        return Err(OracleError::Domain("n_steps must be > 0".into()));
    }
    if spec.samples < 100 {
        return Err(OracleError::Domain(format!("at least 100 samples required, got {}", spec.samples)));
    }
    if !(spec.kick_scale >= 0.0 && spec.kick_scale.is_finite()) {
        return Err(OracleError::Domain("kick_scale must be finite and >= 0".into()));
    }
    let dt = params.total_time / spec.n_steps as f64;
    let drift = [spec.displacement[0] / spec.n_steps as f64, spec.displacement[1] / spec.n_steps as f64];
    let sigma = params.hbar * dt / (params.mass * spec.delta_x);
    let width = spec.kick_scale * (sigma * sigma + spec.delta_x * spec.delta_x).sqrt();
    let lengths: Vec<f64> = (0..spec.samples as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(k);
            let mut total = 0.0;
            for _ in 0..spec.n_steps {
                let (gx, gy): (f64, f64) = if width > 0.0 {
                    (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
                } else {
                    (0.0, 0.0)
                };
                total += (drift[0] + width * gx).hypot(drift[1] + width * gy);
            }
            total
        })
        .collect();
    let n = lengths.len() as f64;
    let mean = lengths.iter().sum::<f64>() / n;
    let var = lengths.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(MonitoredLength { mean_length: mean, std_error: (var / n).sqrt() })
}
