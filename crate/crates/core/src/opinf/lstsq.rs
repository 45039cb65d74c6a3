use nalgebra::{DMatrix, QR, SVD};

use crate::error::{Error, Result};

/// Diagnostics of one least-squares solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsqReport {
    /// `||D^T Theta - R||_F` at the returned solution (ridge term excluded).
    pub residual_norm: f64,
    pub rank: usize,
    /// Ratio of extreme singular values of the (possibly ridge-augmented)
    /// design matrix; infinite when rank deficient.
    pub condition_estimate: f64,
    pub min_norm_used: bool,
}

impl LsqReport {
    /// Report for a problem with no unknowns: the residual is the data itself.
    pub fn trivial(rhs: &DMatrix<f64>) -> Self {
        Self {
            residual_norm: rhs.norm(),
            rank: 0,
            condition_estimate: 1.0,
            min_norm_used: false,
        }
    }
}

/// Reduces a tall `[A | b]` to `[R | Q^T b]` with `R` square, one row
/// block at a time so each factorization stays cache resident.
fn compress(a: &DMatrix<f64>, b: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (m, q) = a.shape();
    let k = b.ncols();
    let block = (2 * q).max(256);
    let mut r = DMatrix::<f64>::zeros(0, q);
    let mut c = DMatrix::<f64>::zeros(0, k);
    let mut start = 0;
    while start < m {
        let take = block.min(m - start);
        let rows = r.nrows() + take;
        let mut stacked = DMatrix::zeros(rows, q);
        stacked.rows_mut(0, r.nrows()).copy_from(&r);
        stacked.rows_mut(r.nrows(), take).copy_from(&a.rows(start, take));
        let mut rhs = DMatrix::zeros(rows, k);
        rhs.rows_mut(0, c.nrows()).copy_from(&c);
        rhs.rows_mut(c.nrows(), take).copy_from(&b.rows(start, take));
        let keep = rows.min(q);
        let qr = QR::new(stacked);
        qr.q_tr_mul(&mut rhs);
        r = qr.r().rows(0, keep).into_owned();
        c = rhs.rows(0, keep).into_owned();
        start += take;
    }
    if r.nrows() < q {
        r = r.resize_vertically(q, 0.0);
        c = c.resize_vertically(q, 0.0);
    }
    (r, c)
}

/// Minimizes `||design * Theta - rhs||_F^2 + ridge * ||Theta||_F^2`.
///
/// Tall problems are first compressed by a blocked Householder QR; the triangular
/// factor is then solved through its SVD, which reveals the rank. Singular
/// values below `sigma_max * max(M, q) * eps` are dropped, giving the
/// minimum-norm solution in the rank-deficient case.
pub fn solve_least_squares(design: &DMatrix<f64>, rhs: &DMatrix<f64>, ridge: f64) -> Result<(DMatrix<f64>, LsqReport)> {
    let (m, q) = design.shape();
    if m == 0 || q == 0 {
        return Err(Error::InvalidArgument(format!("least squares needs a nonempty design matrix, got {m}x{q}")));
    }
    if rhs.nrows() != m {
        return Err(Error::dim("least-squares right-hand side rows", m, rhs.nrows()));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::InvalidArgument(format!("ridge parameter must be finite and nonnegative, got {ridge}")));
    }

    let (a, b) = if ridge > 0.0 {
        let mut a = DMatrix::zeros(m + q, q);
        a.rows_mut(0, m).copy_from(design);
        a.rows_mut(m, q).fill_diagonal(ridge.sqrt());
        let mut b = DMatrix::zeros(m + q, rhs.ncols());
        b.rows_mut(0, m).copy_from(rhs);
        (a, b)
    } else {
        (design.clone(), rhs.clone())
    };

    let (core, core_rhs) = if a.nrows() > q { compress(&a, &b) } else { (a, b) };

    let svd = SVD::new(core, true, true);
    let u = svd.u.as_ref().expect("requested");
    let v_t = svd.v_t.as_ref().expect("requested");
    let sv = &svd.singular_values;
    let sigma_max = sv.iter().copied().fold(0.0, f64::max);
    let tol = sigma_max * (m.max(q) as f64) * f64::EPSILON;
    let rank = sv.iter().filter(|s| **s > tol).count();

    // Theta = V diag(1/sigma) U^T c over the retained directions.
    let mut coeffs = u.tr_mul(&core_rhs);
    for (i, s) in sv.iter().enumerate() {
        let scale = if *s > tol { 1.0 / s } else { 0.0 };
        coeffs.row_mut(i).scale_mut(scale);
    }
    let solution = v_t.tr_mul(&coeffs);

    let condition_estimate = if rank < q {
        f64::INFINITY
    } else {
        sigma_max / sv.iter().copied().fold(f64::INFINITY, f64::min)
    };
    let residual_norm = (design * &solution - rhs).norm();
    Ok((
        solution,
        LsqReport {
            residual_norm,
            rank,
            condition_estimate,
            min_norm_used: rank < q,
        },
    ))
}
