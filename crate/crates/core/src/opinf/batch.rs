use nalgebra::DMatrix;

use super::lstsq::{solve_least_squares, LsqReport};
use super::stagewise::{check_compatible, stagewise_residual};
use super::{MarkovOps, NonMarkovOps};
use crate::error::{Error, Result};
use crate::sampling::ReprojectedDataset;

/// Transposed batch data matrix with `(K_r - 2) N_r` rows.
///
/// The row for step `k` of burst `i` holds `[zbar_{k-1}^T u_{k-1}^T ...
/// zbar_{k-L}^T u_{k-L}^T]`; blocks with negative index are zero. Rows are
/// grouped by `k`, then by burst.
pub fn batch_design(ds: &ReprojectedDataset, lag: usize) -> Result<DMatrix<f64>> {
    let kr = ds.burst_len();
    if kr < 3 {
        return Err(Error::Precondition(format!("batch inference needs bursts of at least 3 steps, got {kr}")));
    }
    let (n, p, nr) = (ds.reduced_dim(), ds.input_dim(), ds.num_bursts());
    let w = n + p;
    let mut d = DMatrix::zeros((kr - 2) * nr, w * lag);
    for k in 1..=kr - 2 {
        for (i, b) in ds.bursts().iter().enumerate() {
            let row = (k - 1) * nr + i;
            for j in 1..=lag.min(k) {
                let col = (j - 1) * w;
                d.view_mut((row, col), (1, n)).tr_copy_from(&b.zbar.column(k - j));
                d.view_mut((row, col + n), (1, p)).tr_copy_from(&b.u.column(k - j));
            }
        }
    }
    Ok(d)
}

fn part_report(joint: &LsqReport, design: &DMatrix<f64>, theta: &DMatrix<f64>, rhs: &DMatrix<f64>) -> LsqReport {
    LsqReport {
        residual_norm: (design * theta - rhs).norm(),
        ..*joint
    }
}

/// Learns all memory operators at once from the Markovian residuals at
/// steps `1..=K_r-2`. Returns the state and output solve reports.
pub fn infer_batch(
    ds: &ReprojectedDataset,
    mk: &MarkovOps,
    lag: usize,
    ridge: f64,
) -> Result<(NonMarkovOps, LsqReport, LsqReport)> {
    check_compatible(ds, mk)?;
    let kr = ds.burst_len();
    if kr < 3 {
        return Err(Error::Precondition(format!("batch inference needs bursts of at least 3 steps, got {kr}")));
    }
    let (n, p, s, nr) = (ds.reduced_dim(), ds.input_dim(), ds.output_dim(), ds.num_bursts());
    let rows = (kr - 2) * nr;
    let mut rz = DMatrix::zeros(rows, n);
    let mut ry = DMatrix::zeros(rows, s);
    let empty = NonMarkovOps::empty();
    for k in 1..=kr - 2 {
        let (dz, dy) = stagewise_residual(ds, mk, &empty, k, false)?;
        rz.rows_mut((k - 1) * nr, nr).copy_from(&dz.transpose());
        ry.rows_mut((k - 1) * nr, nr).copy_from(&dy.transpose());
    }
    if lag == 0 {
        return Ok((NonMarkovOps::empty(), LsqReport::trivial(&rz), LsqReport::trivial(&ry)));
    }
    let design = batch_design(ds, lag)?;
    // one factorization serves both right-hand sides
    let mut rhs = DMatrix::zeros(rows, n + s);
    rhs.columns_mut(0, n).copy_from(&rz);
    rhs.columns_mut(n, s).copy_from(&ry);
    let (theta, joint) = solve_least_squares(&design, &rhs, ridge)?;
    let zrep = part_report(&joint, &design, &theta.columns(0, n).into_owned(), &rz);
    let yrep = part_report(&joint, &design, &theta.columns(n, s).into_owned(), &ry);
    let oz = theta.columns(0, n).transpose();
    let oy = theta.columns(n, s).transpose();
    let w = n + p;
    let mut ops = NonMarkovOps::empty();
    for l in 0..lag {
        ops.e.push(oz.columns(l * w, n).into_owned());
        ops.f.push(oz.columns(l * w + n, p).into_owned());
        ops.g.push(oy.columns(l * w, n).into_owned());
        ops.h.push(oy.columns(l * w + n, p).into_owned());
    }
    Ok((ops, zrep, yrep))
}
