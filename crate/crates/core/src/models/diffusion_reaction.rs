use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ModelBuild;
use crate::error::{Error, Result};
use crate::polysys::{PolyOperator, PolynomialSystem};

/// How the reaction `g(x; mu)` enters the right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReactionForm {
    /// `+ g(x)`: quadratic in `x` plus a constant, carried by an always-one
    /// second input.
    #[default]
    Plain,
    /// `+ x g(x)`: cubic in `x`, no constant. The second input column is zero.
    Cubic,
}

/// `(k, 1.8 mu, 1.62 mu^2)` with `g(x) = -k (1 + 1.8 mu x + 1.62 mu^2 x^2)`.
pub fn reaction_coefficients(mu: f64) -> (f64, f64, f64) {
    let k = (0.1 * mu.sin() + 2.0) * (-2.7 * mu * mu).exp();
    (k, 1.8 * mu, 1.62 * mu * mu)
}

/// Explicit Euler discretization of a 2-D diffusion-reaction problem on the
/// unit square with zero-flux boundary, cell-centered grid of
/// `nx * nx` nodes numbered row-major (`xi_1` fastest).
///
/// Inputs: `u_0` drives the source `sin(2 pi xi_1) sin(2 pi xi_2) / 10`; `u_1`
/// must be held at one and carries the constant part of the reaction.
pub fn build_diffusion_reaction(nx: usize, dt: f64, mu: f64, form: ReactionForm) -> Result<ModelBuild> {
    if nx < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 nodes per axis, got {nx}")));
    }
    if !(1.0..=1.5).contains(&mu) {
        return Err(Error::InvalidArgument(format!("parameter {mu} outside [1, 1.5]")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    let n = nx * nx;
    let h = 1.0 / nx as f64;
    let r = dt / (h * h);
    let idx = |i: usize, j: usize| j * nx + i;
    let (k, c1, c2) = reaction_coefficients(mu);
    let (lin, quad, cubic, constant) = match form {
        ReactionForm::Plain => (-k * c1, -k * c2, 0.0, -k),
        ReactionForm::Cubic => (-k, -k * c1, -k * c2, 0.0),
    };

    let mut a1 = DMatrix::identity(n, n) * (1.0 + dt * lin);
    for j in 0..nx {
        for i in 0..nx {
            let me = idx(i, j);
            // a missing neighbor across the boundary mirrors the node itself
            let neighbors = [
                (i > 0).then(|| idx(i - 1, j)),
                (i + 1 < nx).then(|| idx(i + 1, j)),
                (j > 0).then(|| idx(i, j - 1)),
                (j + 1 < nx).then(|| idx(i, j + 1)),
            ];
            for nb in neighbors.into_iter().flatten() {
                a1[(me, nb)] += r;
                a1[(me, me)] -= r;
            }
        }
    }
    let mut b = DMatrix::zeros(n, 2);
    for j in 0..nx {
        for i in 0..nx {
            let (x1, x2) = ((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
            b[(idx(i, j), 0)] = dt * (2.0 * PI * x1).sin() * (2.0 * PI * x2).sin() / 10.0;
            b[(idx(i, j), 1)] = dt * constant;
        }
    }
    let ops = vec![
        PolyOperator::Dense(a1),
        PolyOperator::Nodewise(DVector::from_element(n, dt * quad)),
        PolyOperator::Nodewise(DVector::from_element(n, dt * cubic)),
    ];
    let limit = h * h / 4.0;
    Ok(ModelBuild::new(PolynomialSystem::new(ops, b, DMatrix::zeros(0, n))?, dt, limit))
}
