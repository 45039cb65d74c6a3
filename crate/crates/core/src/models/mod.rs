//! Benchmark full models, the small counterexample systems, and input
//! signal generators.

mod appendix;
mod chafee;
mod convection_diffusion;
mod diffusion_reaction;
mod inputs;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::polysys::{ObservationSelector, PolynomialSystem};

pub use appendix::{appendix_system, AppendixCase, AppendixExample};
pub use chafee::build_chafee_infante;
pub use convection_diffusion::build_convection_diffusion;
pub use diffusion_reaction::{build_diffusion_reaction, reaction_coefficients, ReactionForm};
pub use inputs::{generate_burst_inputs, generate_inputs, InputSpec};

/// A full model together with the time step it was discretized with.
#[derive(Debug, Clone)]
pub struct ModelBuild {
    pub system: PolynomialSystem,
    pub dt: f64,
    /// Set when the time step exceeds the explicit stability heuristic.
    pub stability_warning: Option<String>,
}

impl ModelBuild {
    pub(crate) fn new(system: PolynomialSystem, dt: f64, limit: f64) -> Self {
        let stability_warning = (dt > limit).then(|| {
            let msg = format!("time step {dt:e} exceeds the explicit stability estimate {limit:e}");
            log::warn!("{msg}");
            msg
        });
        Self {
            system,
            dt,
            stability_warning,
        }
    }

    /// Equidistant observation of `round(fraction * N)` components.
    pub fn selector(&self, fraction: f64) -> Result<ObservationSelector> {
        ObservationSelector::equidistant(self.system.state_dim(), fraction)
    }
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Linear system with Gaussian `A` rescaled to spectral norm `radius`, and
/// Gaussian `B` (`N x p`) and `C` (`s x N`), all from one seed.
pub fn random_stable_linear(n: usize, p: usize, s: usize, radius: f64, seed: u64) -> Result<PolynomialSystem> {
    if n == 0 {
        return Err(Error::InvalidArgument("state dimension must be positive".into()));
    }
    if !(radius > 0.0 && radius < 1.0) {
        return Err(Error::InvalidArgument(format!("spectral norm bound must lie in (0, 1), got {radius}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = gaussian(n, n, &mut rng);
    let norm = a.clone().svd(false, false).singular_values.max();
    let a = a * (radius / norm);
    let b = gaussian(n, p, &mut rng);
    let c = gaussian(s, n, &mut rng);
    PolynomialSystem::linear(a, b, c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_linear_is_contractive_and_deterministic() {
        let sys = random_stable_linear(8, 2, 1, 0.9, 1).unwrap();
        let norm = sys.linear_part().svd(false, false).singular_values.max();
        assert!((norm - 0.9).abs() < 1e-12);
        assert_eq!(sys, random_stable_linear(8, 2, 1, 0.9, 1).unwrap());
        assert_ne!(sys, random_stable_linear(8, 2, 1, 0.9, 2).unwrap());
        assert!(random_stable_linear(8, 2, 1, 1.0, 1).is_err());
    }
}
