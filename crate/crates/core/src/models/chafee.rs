use nalgebra::{DMatrix, DVector};

use super::ModelBuild;
use crate::error::{Error, Result};
use crate::polysys::{PolyOperator, PolynomialSystem};

/// Explicit Euler discretization of `x_t = x_xx - x^3 + x` on `(0, 1]` with
/// `x(0) = u` and `x_x(1) = 0`.
///
/// Nodes sit at `xi_i = i / nx` for `i = 1..=nx`; the Neumann end uses the
/// mirror node `x_{nx+1} = x_{nx-1}`. The output is the last node.
pub fn build_chafee_infante(nx: usize, dt: f64) -> Result<ModelBuild> {
    if nx < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 nodes, got {nx}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    let h = 1.0 / nx as f64;
    let r = dt / (h * h);
    let mut a1 = DMatrix::identity(nx, nx) * (1.0 + dt);
    for i in 0..nx {
        a1[(i, i)] -= 2.0 * r;
        if i > 0 {
            a1[(i, i - 1)] += r;
        }
        if i + 1 < nx {
            a1[(i, i + 1)] += r;
        } else {
            a1[(i, i - 1)] += r;
        }
    }
    let mut b = DMatrix::zeros(nx, 1);
    b[(0, 0)] = r;
    let mut c = DMatrix::zeros(1, nx);
    c[(0, nx - 1)] = 1.0;
    let ops = vec![
        PolyOperator::Dense(a1),
        PolyOperator::Nodewise(DVector::zeros(nx)),
        PolyOperator::Nodewise(DVector::from_element(nx, -dt)),
    ];
    Ok(ModelBuild::new(PolynomialSystem::new(ops, b, c)?, dt, h * h / 4.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polysys::step_full;

    #[test]
    fn zero_is_a_fixed_point() {
        let m = build_chafee_infante(16, 1e-4).unwrap();
        let x = step_full(&m.system, &DVector::zeros(16), &DVector::zeros(1)).unwrap();
        assert!(x.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn default_dimensions() {
        let m = build_chafee_infante(128, 1e-5).unwrap();
        assert_eq!(m.system.state_dim(), 128);
        assert_eq!(m.system.input_dim(), 1);
        assert_eq!(m.system.output_dim(), 1);
        assert_eq!(m.system.degree(), 3);
        assert!(m.stability_warning.is_none());
        assert!(build_chafee_infante(128, 1e-4).unwrap().stability_warning.is_some());
    }

    #[test]
    fn euler_step_matches_stencil() {
        let nx = 6;
        let dt = 1e-3;
        let m = build_chafee_infante(nx, dt).unwrap();
        let x = DVector::from_vec(vec![0.3, -0.2, 0.5, 0.1, -0.4, 0.25]);
        let u = 5.0;
        let h = 1.0 / nx as f64;
        let got = step_full(&m.system, &x, &DVector::from_element(1, u)).unwrap();
        for i in 0..nx {
            let left = if i == 0 { u } else { x[i - 1] };
            let right = if i == nx - 1 { x[nx - 2] } else { x[i + 1] };
            let lap = (left - 2.0 * x[i] + right) / (h * h);
            let want = x[i] + dt * (lap - x[i].powi(3) + x[i]);
            assert!((got[i] - want).abs() < 1e-12, "node {i}");
        }
        let from_zero = step_full(&m.system, &DVector::zeros(nx), &DVector::from_element(1, 5.0)).unwrap();
        assert!((from_zero[0] - dt * 5.0 / (h * h)).abs() < 1e-12);
        assert!(from_zero.rows(1, nx - 1).iter().all(|v| *v == 0.0));
    }
}
