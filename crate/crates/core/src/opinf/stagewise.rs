use nalgebra::{DMatrix, DVector};

use super::lstsq::{solve_least_squares, LsqReport};
use super::{MarkovOps, NonMarkovOps};
use crate::error::{Error, Result};
use crate::sampling::ReprojectedDataset;

/// Reports of the state and output solves of one stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageReport {
    pub state: LsqReport,
    pub output: LsqReport,
}

pub(crate) fn check_compatible(ds: &ReprojectedDataset, mk: &MarkovOps) -> Result<()> {
    if mk.dim() != ds.reduced_dim() {
        return Err(Error::dim("Markovian operator dimension", ds.reduced_dim(), mk.dim()));
    }
    if mk.input_dim() != ds.input_dim() {
        return Err(Error::dim("Markovian input dimension", ds.input_dim(), mk.input_dim()));
    }
    if mk.output_dim() != ds.output_dim() {
        return Err(Error::dim("Markovian output dimension", ds.output_dim(), mk.output_dim()));
    }
    Ok(())
}

/// Residuals of `zbar_{l+1}` and `y_l` against the Markovian model plus, if
/// `include_memory`, the memory terms of `partial` at lags `1..l-1` applied to
/// steps `1..l-1` of each burst. Column `i` belongs to burst `i`.
pub fn stagewise_residual(
    ds: &ReprojectedDataset,
    mk: &MarkovOps,
    partial: &NonMarkovOps,
    l: usize,
    include_memory: bool,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_compatible(ds, mk)?;
    if ds.burst_len() < l + 2 {
        return Err(Error::Precondition(format!(
            "stage {l} needs bursts of at least {} steps, got {}",
            l + 2,
            ds.burst_len()
        )));
    }
    if include_memory && partial.lag() + 1 < l {
        return Err(Error::InvalidArgument(format!(
            "stage {l} needs {} memory operators, got {}",
            l - 1,
            partial.lag()
        )));
    }
    let (n, s) = (ds.reduced_dim(), ds.output_dim());
    let mut dz = DMatrix::zeros(n, ds.num_bursts());
    let mut dy = DMatrix::zeros(s, ds.num_bursts());
    let mut scratch = DVector::zeros(0);
    let mut pred = DVector::zeros(n);
    for (i, b) in ds.bursts().iter().enumerate() {
        let zl = b.zbar.column(l).into_owned();
        mk.step_into(&zl, &b.u.column(l).into_owned(), &mut scratch, &mut pred);
        let mut ypred = &mk.c * &zl;
        if include_memory {
            for j in 1..l {
                let lag = l - j - 1;
                pred.gemv(1.0, &partial.e[lag], &b.zbar.column(j), 1.0);
                pred.gemv(1.0, &partial.f[lag], &b.u.column(j), 1.0);
                ypred.gemv(1.0, &partial.g[lag], &b.zbar.column(j), 1.0);
                ypred.gemv(1.0, &partial.h[lag], &b.u.column(j), 1.0);
            }
        }
        dz.set_column(i, &(b.zbar.column(l + 1) - pred.clone()));
        dy.set_column(i, &(b.y.column(l) - ypred));
    }
    Ok((dz, dy))
}

/// Transposed stage data matrix: row `i` is `[zbar_0^T u_0^T]` of burst `i`.
pub(crate) fn stage_design(ds: &ReprojectedDataset) -> DMatrix<f64> {
    let (n, p) = (ds.reduced_dim(), ds.input_dim());
    let mut d = DMatrix::zeros(ds.num_bursts(), n + p);
    for (i, b) in ds.bursts().iter().enumerate() {
        d.view_mut((i, 0), (1, n)).tr_copy_from(&b.zbar.column(0));
        d.view_mut((i, n), (1, p)).tr_copy_from(&b.u.column(0));
    }
    d
}

/// Learns memory operators one lag at a time against a fixed data matrix
/// built from the burst-initial states and inputs.
pub fn infer_stagewise(
    ds: &ReprojectedDataset,
    mk: &MarkovOps,
    lag: usize,
    ridge: f64,
) -> Result<(NonMarkovOps, Vec<StageReport>)> {
    check_compatible(ds, mk)?;
    if lag == 0 {
        return Ok((NonMarkovOps::empty(), Vec::new()));
    }
    if ds.burst_len() < lag + 2 {
        return Err(Error::Precondition(format!(
            "lag {lag} needs bursts of at least {} steps, got {}",
            lag + 2,
            ds.burst_len()
        )));
    }
    let (n, p, s) = (ds.reduced_dim(), ds.input_dim(), ds.output_dim());
    let design = stage_design(ds);
    let mut ops = NonMarkovOps::empty();
    let mut reports = Vec::with_capacity(lag);
    for l in 1..=lag {
        let (dz, dy) = stagewise_residual(ds, mk, &ops, l, true)?;
        let (oz, state) = solve_least_squares(&design, &dz.transpose(), ridge)?;
        let oz = oz.transpose();
        ops.e.push(oz.columns(0, n).into_owned());
        ops.f.push(oz.columns(n, p).into_owned());
        let output = if s > 0 {
            let (oy, rep) = solve_least_squares(&design, &dy.transpose(), ridge)?;
            let oy = oy.transpose();
            ops.g.push(oy.columns(0, n).into_owned());
            ops.h.push(oy.columns(n, p).into_owned());
            rep
        } else {
            ops.g.push(DMatrix::zeros(0, n));
            ops.h.push(DMatrix::zeros(0, p));
            LsqReport::trivial(&dy)
        };
        log::debug!("stage {l}: state residual {:.3e}, rank {}", state.residual_norm, state.rank);
        reports.push(StageReport { state, output });
    }
    Ok((ops, reports))
}
