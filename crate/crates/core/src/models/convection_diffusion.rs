use nalgebra::DMatrix;

use super::ModelBuild;
use crate::error::{Error, Result};
use crate::polysys::PolynomialSystem;

const WIDTH: f64 = 1.0;
const HEIGHT: f64 = 0.25;

#[derive(Clone, Copy)]
enum Side {
    Bottom,
    Top,
    Left,
    Right,
}

/// Input channel whose Neumann segment contains the boundary point, if any.
fn segment(side: Side, s: f64) -> Option<usize> {
    let inside = |lo: f64, hi: f64| s > lo && s < hi;
    match side {
        Side::Right => Some(0),
        Side::Left => None,
        Side::Bottom if inside(0.8, 1.0) => Some(0),
        Side::Bottom if inside(0.0, 0.2) => Some(3),
        Side::Bottom if inside(0.4, 0.6) => Some(4),
        Side::Top if inside(0.6, 0.8) => Some(1),
        Side::Top if inside(0.2, 0.4) => Some(2),
        _ => None,
    }
}

/// Explicit Euler finite-difference discretization of
/// `x_t = lap x - (1, 1) . grad x` on `(0, 1) x (0, 0.25)`.
///
/// Unknowns live on the `nx x ny` interior nodes of a uniform vertex grid,
/// numbered with `xi_1` fastest. Boundary values are zero except on five
/// edge segments, where the outward normal derivative equals the matching
/// input; there the ghost value is `x_inner + h u`. Convection is upwinded.
/// The single output is the trapezoidal integral along the fifth segment,
/// using the first interior row as boundary trace.
pub fn build_convection_diffusion(nx: usize, ny: usize, dt: f64) -> Result<ModelBuild> {
    build_with_velocity(nx, ny, dt, 1.0)
}

/// Same discretization with convection velocity `(v, v)`, `v >= 0`.
fn build_with_velocity(nx: usize, ny: usize, dt: f64, velocity: f64) -> Result<ModelBuild> {
    if nx < 4 || ny < 4 {
        return Err(Error::InvalidArgument(format!("grid must be at least 4x4, got {nx}x{ny}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    let n = nx * ny;
    let h1 = WIDTH / (nx + 1) as f64;
    let h2 = HEIGHT / (ny + 1) as f64;
    let idx = |i: usize, j: usize| j * nx + i;
    let mut op = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, 5);

    for j in 0..ny {
        for i in 0..nx {
            let me = idx(i, j);
            let (x1, x2) = ((i + 1) as f64 * h1, (j + 1) as f64 * h2);
            // (interior neighbor, boundary side, position along side, spacing, upwind)
            let dirs = [
                (i.checked_sub(1).map(|a| idx(a, j)), Side::Left, x2, h1, true),
                ((i + 1 < nx).then(|| idx(i + 1, j)), Side::Right, x2, h1, false),
                (j.checked_sub(1).map(|a| idx(i, a)), Side::Bottom, x1, h2, true),
                ((j + 1 < ny).then(|| idx(i, j + 1)), Side::Top, x1, h2, false),
            ];
            for (nb, side, s, h, upwind) in dirs {
                op[(me, me)] -= 1.0 / (h * h);
                let conv = if upwind { velocity / h } else { 0.0 };
                op[(me, me)] -= conv;
                let weight = 1.0 / (h * h) + conv;
                match nb {
                    Some(k) => op[(me, k)] += weight,
                    None => {
                        if let Some(ch) = segment(side, s) {
                            op[(me, me)] += weight;
                            b[(me, ch)] += weight * h;
                        }
                    }
                }
            }
        }
    }

    let mut a1 = op * dt;
    for i in 0..n {
        a1[(i, i)] += 1.0;
    }
    let b = b * dt;

    let mut c = DMatrix::zeros(1, n);
    let on_e5: Vec<usize> = (0..nx).filter(|&i| segment(Side::Bottom, (i + 1) as f64 * h1) == Some(4)).collect();
    for (pos, &i) in on_e5.iter().enumerate() {
        let w = if pos == 0 || pos + 1 == on_e5.len() { 0.5 * h1 } else { h1 };
        c[(0, idx(i, 0))] += w;
    }

    let limit = 1.0 / (2.0 / (h1 * h1) + 2.0 / (h2 * h2) + velocity / h1 + velocity / h2);
    Ok(ModelBuild::new(PolynomialSystem::linear(a1, b, c)?, dt, limit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polysys::simulate_full;
    use nalgebra::{DVector, LU};

    #[test]
    fn zero_input_zero_state_stays_zero() {
        let m = build_convection_diffusion(12, 6, 1e-5).unwrap();
        let (x, y) = simulate_full(&m.system, &DVector::zeros(72), &DMatrix::zeros(5, 20), 20).unwrap();
        assert!(x.iter().all(|v| *v == 0.0) && y.iter().all(|v| *v == 0.0));
        assert_eq!(m.system.input_dim(), 5);
        assert_eq!(m.system.output_dim(), 1);
        assert!(m.stability_warning.is_none());
    }

    #[test]
    fn every_input_reaches_the_state() {
        let m = build_convection_diffusion(30, 8, 1e-5).unwrap();
        for ch in 0..5 {
            assert!(m.system.b().column(ch).norm() > 0.0, "input {ch}");
        }
        assert!(m.system.c().iter().filter(|v| **v > 0.0).count() >= 2);
    }

    #[test]
    fn heated_edge_steady_state_obeys_maximum_principle() {
        // Steady state of the pure-diffusion operator with flux on one edge:
        // solve (I - A) x = B u directly and check positivity and a bound.
        let m = build_with_velocity(8, 4, 1e-4, 0.0).unwrap();
        let a = m.system.linear_part();
        let n = a.nrows();
        let mut u = DVector::zeros(5);
        u[4] = 1.0;
        let rhs = m.system.b() * &u;
        let x = LU::new(DMatrix::identity(n, n) - a).solve(&rhs).unwrap();
        assert!(x.iter().all(|v| *v >= -1e-12));
        // flux 1 across a segment of length 0.2 into a domain of height 0.25
        // cannot raise any value above the segment flux times the domain height
        assert!(x.amax() <= 0.25 + 1e-12);
        assert!(x.amax() > 0.0);
    }
}
