//! Training-data generation by re-projection.
//!
//! Single-step re-projection alternates one full-model step with a
//! projection onto the reduced space. The extended scheme runs `K_r` full
//! steps on the lifted observation before re-projecting, so that each burst
//! carries `K_r - 1` steps of memory dynamics.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::polysys::{run_full, ObservationSelector, PolynomialSystem};
use crate::projection::PodBasis;

/// One re-projection burst: reduced states, inputs and outputs at burst-local
/// steps `0..K_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct Burst {
    /// `n x K_r`
    pub zbar: DMatrix<f64>,
    /// `p x K_r`
    pub u: DMatrix<f64>,
    /// `s x K_r`
    pub y: DMatrix<f64>,
}

impl Burst {
    pub fn len(&self) -> usize {
        self.zbar.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.zbar.ncols() == 0
    }
}

/// Bursts of equal length produced by extended re-projection, possibly
/// merged from several independent chains.
#[derive(Debug, Clone, PartialEq)]
pub struct ReprojectedDataset {
    bursts: Vec<Burst>,
}

impl ReprojectedDataset {
    pub fn new(bursts: Vec<Burst>) -> Result<Self> {
        let first = bursts
            .first()
            .ok_or_else(|| Error::InvalidArgument("a dataset needs at least one burst".into()))?;
        let shape = (first.zbar.nrows(), first.u.nrows(), first.y.nrows(), first.len());
        for b in &bursts {
            if b.u.ncols() != b.len() || b.y.ncols() != b.len() {
                return Err(Error::InvalidArgument("burst columns of z, u, y differ".into()));
            }
            if (b.zbar.nrows(), b.u.nrows(), b.y.nrows(), b.len()) != shape {
                return Err(Error::InvalidArgument("bursts differ in shape or length".into()));
            }
        }
        Ok(Self { bursts })
    }

    /// Concatenates datasets in the given order.
    pub fn merge(parts: impl IntoIterator<Item = ReprojectedDataset>) -> Result<Self> {
        Self::new(parts.into_iter().flat_map(|d| d.bursts).collect())
    }

    pub fn bursts(&self) -> &[Burst] {
        &self.bursts
    }

    pub fn num_bursts(&self) -> usize {
        self.bursts.len()
    }

    pub fn burst_len(&self) -> usize {
        self.bursts[0].len()
    }

    pub fn reduced_dim(&self) -> usize {
        self.bursts[0].zbar.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.bursts[0].u.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.bursts[0].y.nrows()
    }

    /// Keeps the first `len` steps of every burst (nested sub-dataset).
    pub fn truncated(&self, len: usize) -> Result<Self> {
        if len == 0 || len > self.burst_len() {
            return Err(Error::InvalidArgument(format!(
                "cannot truncate bursts of length {} to {len}",
                self.burst_len()
            )));
        }
        Ok(Self {
            bursts: self
                .bursts
                .iter()
                .map(|b| Burst {
                    zbar: b.zbar.columns(0, len).into_owned(),
                    u: b.u.columns(0, len).into_owned(),
                    y: b.y.columns(0, len).into_owned(),
                })
                .collect(),
        })
    }

    /// Same bursts in a different order.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            bursts: order.iter().map(|&i| self.bursts[i].clone()).collect(),
        }
    }
}

/// Re-projection on a full-state basis (`N x n`, orthonormal columns).
///
/// Returns `[xbar_0, ..., xbar_K]` with `xbar_{k+1} = V^T f(V xbar_k, u_k)`.
pub fn reproject_single_step(
    sys: &PolynomialSystem,
    basis: &DMatrix<f64>,
    x0: &DVector<f64>,
    inputs: &DMatrix<f64>,
    steps: usize,
) -> Result<DMatrix<f64>> {
    if basis.nrows() != sys.state_dim() {
        return Err(Error::dim("basis rows", sys.state_dim(), basis.nrows()));
    }
    let xbar0 = basis.tr_mul(x0);
    let off_span = (x0 - basis * &xbar0).norm();
    if off_span > 1e-8 * x0.norm().max(1.0) {
        return Err(Error::Precondition(format!(
            "initial state is {off_span:.3e} away from the span of the basis"
        )));
    }
    let mut out = DMatrix::zeros(basis.ncols(), steps + 1);
    out.set_column(0, &xbar0);
    let mut xbar = xbar0;
    for k in 0..steps {
        let lifted = basis * &xbar;
        let next = run_full(sys, &lifted, &inputs.columns(k, 1).into_owned(), 1, |_, _| {})
            .map_err(|e| match e {
                Error::Divergence { .. } => Error::Divergence { step: k + 1, burst: None },
                other => other,
            })?;
        xbar = basis.tr_mul(&next);
        out.set_column(k + 1, &xbar);
    }
    Ok(out)
}

/// Extended re-projection on observations.
///
/// Burst `i` starts from the lifted state `P_o^T V zbar_0^(i)`, runs the
/// full model for `K_r` steps under `inputs[i]` (`p x K_r`), and records
/// `zbar_k = V^T P_o x_k` and `y_k = C x_k` for `k < K_r`. The projection of
/// the final observation seeds the next burst.
pub fn extended_reprojection(
    sys: &PolynomialSystem,
    sel: &ObservationSelector,
    basis: &PodBasis,
    z0: &DVector<f64>,
    inputs: &[DMatrix<f64>],
    burst_len: usize,
) -> Result<ReprojectedDataset> {
    if burst_len < 2 {
        return Err(Error::Precondition(format!("burst length must be at least 2, got {burst_len}")));
    }
    if inputs.is_empty() {
        return Err(Error::Precondition("at least one burst of inputs is required".into()));
    }
    if sel.state_dim() != sys.state_dim() {
        return Err(Error::dim("selector state dimension", sys.state_dim(), sel.state_dim()));
    }
    let v = &basis.v;
    if v.nrows() != sel.num_observed() {
        return Err(Error::dim("basis rows", sel.num_observed(), v.nrows()));
    }
    if z0.len() != sel.num_observed() {
        return Err(Error::dim("initial observation", sel.num_observed(), z0.len()));
    }
    let n = v.ncols();
    let observed = sel.observed();
    let project = |x: &DVector<f64>| -> DVector<f64> {
        let mut z = DVector::zeros(n);
        for (row, &i) in observed.iter().enumerate() {
            z.axpy(x[i], &v.row(row).transpose(), 1.0);
        }
        z
    };

    let mut zbar0 = v.tr_mul(z0);
    let mut bursts = Vec::with_capacity(inputs.len());
    for (i, u) in inputs.iter().enumerate() {
        if u.nrows() != sys.input_dim() || u.ncols() < burst_len {
            return Err(Error::InvalidArgument(format!(
                "inputs of burst {i} are {}x{}, expected {}x{burst_len}",
                u.nrows(),
                u.ncols(),
                sys.input_dim()
            )));
        }
        let mut x0 = DVector::zeros(sys.state_dim());
        let lifted = v * &zbar0;
        for (row, &idx) in observed.iter().enumerate() {
            x0[idx] = lifted[row];
        }
        let mut zbar = DMatrix::zeros(n, burst_len);
        let mut y = DMatrix::zeros(sys.output_dim(), burst_len);
        let last = run_full(sys, &x0, u, burst_len, |k, x| {
            if k < burst_len {
                if k == 0 {
                    zbar.set_column(0, &zbar0);
                } else {
                    zbar.set_column(k, &project(x));
                }
                y.set_column(k, &(sys.c() * x));
            }
        })
        .map_err(|e| match e {
            Error::Divergence { step, .. } => Error::Divergence { step, burst: Some(i) },
            other => other,
        })?;
        zbar0 = project(&last);
        bursts.push(Burst {
            zbar,
            u: u.columns(0, burst_len).into_owned(),
            y,
        });
    }
    ReprojectedDataset::new(bursts)
}
