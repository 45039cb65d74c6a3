use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn one() -> f64 {
    1.0
}

/// An input signal family. Time is `t_k = k dt` for column `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InputSpec {
    /// `u_i(t) = amplitude (sin(f_i t) + offset)`, one frequency per channel.
    SinusoidBank {
        frequencies: Vec<f64>,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `u_i(t) = exp(growth t) sin(f_i t)`.
    ExpSinusoid {
        frequencies: Vec<f64>,
        #[serde(default = "one")]
        growth: f64,
    },
    /// Independent uniform draws on `[low, high)` per channel and step.
    UniformRandom { low: f64, high: f64, seed: u64 },
    /// `u_k = amplitude theta_k (cos(omega k dt gamma_k) + 1)` with
    /// `theta_k, gamma_k` uniform on `[0, 1)`.
    CosineRandomTrain { amplitude: f64, omega: f64, seed: u64 },
    /// One fixed value per channel.
    Constant { values: Vec<f64> },
}

impl InputSpec {
    pub fn is_random(&self) -> bool {
        matches!(self, InputSpec::UniformRandom { .. } | InputSpec::CosineRandomTrain { .. })
    }

    /// Number of channels the spec defines, if it fixes one.
    pub fn channels(&self) -> Option<usize> {
        match self {
            InputSpec::SinusoidBank { frequencies, .. } | InputSpec::ExpSinusoid { frequencies, .. } => Some(frequencies.len()),
            InputSpec::Constant { values } => Some(values.len()),
            _ => None,
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            InputSpec::UniformRandom { seed, .. } | InputSpec::CosineRandomTrain { seed, .. } => Some(*seed),
            _ => None,
        }
    }

    /// The same family with its seed replaced, for random kinds.
    pub fn with_seed(&self, new_seed: u64) -> Self {
        let mut out = self.clone();
        match &mut out {
            InputSpec::UniformRandom { seed, .. } | InputSpec::CosineRandomTrain { seed, .. } => *seed = new_seed,
            _ => {}
        }
        out
    }
}

fn fill(spec: &InputSpec, p: usize, steps: usize, dt: f64, first_step: usize, stream: u64) -> Result<DMatrix<f64>> {
    if let Some(ch) = spec.channels() {
        if ch != p {
            return Err(Error::InvalidArgument(format!("input spec defines {ch} channels, model has {p}")));
        }
    }
    let t = |k: usize| (first_step + k) as f64 * dt;
    let mut u = DMatrix::zeros(p, steps);
    match spec {
        InputSpec::SinusoidBank {
            frequencies,
            amplitude,
            offset,
        } => {
            for k in 0..steps {
                for (i, f) in frequencies.iter().enumerate() {
                    u[(i, k)] = amplitude * ((f * t(k)).sin() + offset);
                }
            }
        }
        InputSpec::ExpSinusoid { frequencies, growth } => {
            for k in 0..steps {
                for (i, f) in frequencies.iter().enumerate() {
                    u[(i, k)] = (growth * t(k)).exp() * (f * t(k)).sin();
                }
            }
        }
        InputSpec::UniformRandom { low, high, seed } => {
            if !(low < high && (high - low).is_finite()) {
                return Err(Error::InvalidArgument(format!("uniform range [{low}, {high}) is empty or unbounded")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            rng.set_stream(stream);
            for k in 0..steps {
                for i in 0..p {
                    u[(i, k)] = rng.random_range(*low..*high);
                }
            }
        }
        InputSpec::CosineRandomTrain { amplitude, omega, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            rng.set_stream(stream);
            for k in 0..steps {
                for i in 0..p {
                    let theta: f64 = rng.random();
                    let gamma: f64 = rng.random();
                    u[(i, k)] = amplitude * theta * ((omega * t(k) * gamma).cos() + 1.0);
                }
            }
        }
        InputSpec::Constant { values } => {
            for k in 0..steps {
                for (i, v) in values.iter().enumerate() {
                    u[(i, k)] = *v;
                }
            }
        }
    }
    Ok(u)
}

/// `p x K` input trajectory for `t_k = k dt`, `k = 0..K`.
pub fn generate_inputs(spec: &InputSpec, p: usize, steps: usize, dt: f64) -> Result<DMatrix<f64>> {
    fill(spec, p, steps, dt, 0, 0)
}

/// Inputs for each of `bursts` re-projection bursts of `burst_len` steps.
///
/// Random kinds draw burst `i` from generator stream `i + 1` of the seed, so
/// bursts are independent of each other and of [`generate_inputs`].
/// Deterministic kinds continue in time across bursts.
pub fn generate_burst_inputs(spec: &InputSpec, p: usize, bursts: usize, burst_len: usize, dt: f64) -> Result<Vec<DMatrix<f64>>> {
    (0..bursts)
        .map(|i| fill(spec, p, burst_len, dt, i * burst_len, i as u64 + 1))
        .collect()
}
