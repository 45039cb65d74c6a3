//! Relative error measures for observation and output trajectories.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intrusive::{intrusive_markovian, intrusive_nonmarkov};
use crate::polysys::{simulate_full, ObservationSelector, PolynomialSystem};
use crate::projection::{build_projection_pair_with_complement, orthogonal_complement};
use crate::romsim::{simulate_reduced, ReducedModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MetricKind {
    #[serde(rename = "projection_error")]
    Projection,
    #[serde(rename = "observation_error")]
    Observation,
    #[serde(rename = "output_error")]
    Output,
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricKind::Projection => "projection_error",
            MetricKind::Observation => "observation_error",
            MetricKind::Output => "output_error",
        })
    }
}

/// A metric value, or a marker that the reduced trajectory blew up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub kind: MetricKind,
    /// NaN when `divergent`.
    pub value: f64,
    pub divergent: bool,
}

impl ErrorReport {
    pub fn ok(kind: MetricKind, value: f64) -> Self {
        Self {
            kind,
            value,
            divergent: false,
        }
    }

    pub fn diverged(kind: MetricKind) -> Self {
        Self {
            kind,
            value: f64::NAN,
            divergent: true,
        }
    }

    pub fn status(&self) -> &'static str {
        if self.divergent {
            "divergent"
        } else {
            "ok"
        }
    }
}

fn reference_norm(z: &DMatrix<f64>, what: &str) -> Result<f64> {
    let norm = z.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::InvalidArgument(format!("{what} trajectory has norm {norm}")));
    }
    Ok(norm)
}

/// `||Z - V V^T Z||_F / ||Z||_F`.
pub fn projection_error(z: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<f64> {
    if v.nrows() != z.nrows() {
        return Err(Error::dim("basis rows", z.nrows(), v.nrows()));
    }
    let norm = reference_norm(z, "observation")?;
    Ok((z - v * v.tr_mul(z)).norm() / norm)
}

/// `||Z - V Ztilde||_F / ||Z||_F`.
pub fn observation_error(z: &DMatrix<f64>, ztilde: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<f64> {
    if v.nrows() != z.nrows() {
        return Err(Error::dim("basis rows", z.nrows(), v.nrows()));
    }
    if ztilde.shape() != (v.ncols(), z.ncols()) {
        return Err(Error::InvalidArgument(format!(
            "reduced trajectory is {:?}, expected {:?}",
            ztilde.shape(),
            (v.ncols(), z.ncols())
        )));
    }
    let norm = reference_norm(z, "observation")?;
    Ok((z - v * ztilde).norm() / norm)
}

/// `||Y - Ytilde||_F / ||Y||_F`.
pub fn output_error(y: &DMatrix<f64>, ytilde: &DMatrix<f64>) -> Result<f64> {
    if y.shape() != ytilde.shape() {
        return Err(Error::InvalidArgument(format!(
            "output trajectories differ in shape: {:?} vs {:?}",
            y.shape(),
            ytilde.shape()
        )));
    }
    let norm = reference_norm(y, "output")?;
    Ok((y - ytilde).norm() / norm)
}

/// Mean of per-parameter errors; `None` entries mark divergent parameters
/// and make the whole report divergent.
pub fn parametric_error(kind: MetricKind, per_parameter: &[Option<f64>]) -> Result<ErrorReport> {
    if per_parameter.is_empty() {
        return Err(Error::InvalidArgument("no parameters to average over".into()));
    }
    let mut sum = 0.0;
    for e in per_parameter {
        match e {
            Some(v) if v.is_finite() => sum += v,
            _ => return Ok(ErrorReport::diverged(kind)),
        }
    }
    Ok(ErrorReport::ok(kind, sum / per_parameter.len() as f64))
}

/// Relative error of the Markovian reduced model minus that of the lag-`L`
/// reduced model, `(||z_k - V zt_k^(0)|| - ||z_k - V zt_k^(L)||) / ||z_k||`,
/// for `k = 0..K-1`. Both reduced models use projected operators and start
/// from `z0`; the full model starts from `Q z0` with zero input.
///
/// `v_perp` fixes the completion of `V`; the memory operators do not depend
/// on it, but passing the printed one keeps verbatim cases verbatim.
pub fn error_difference_series(
    sys: &PolynomialSystem,
    sel: &ObservationSelector,
    v: &DMatrix<f64>,
    v_perp: Option<&DMatrix<f64>>,
    z0: &DVector<f64>,
    steps: usize,
    lag: usize,
) -> Result<Vec<f64>> {
    if steps == 0 {
        return Ok(Vec::new());
    }
    let perp = match v_perp {
        Some(p) => p.clone(),
        None => orthogonal_complement(v),
    };
    let pair = build_projection_pair_with_complement(sel, v, &perp)?;
    if z0.len() != v.ncols() {
        return Err(Error::dim("reduced initial state", v.ncols(), z0.len()));
    }
    let horizon = steps - 1;
    let inputs = DMatrix::zeros(sys.input_dim(), horizon);
    let (full, _) = simulate_full(sys, &(&pair.q * z0), &inputs, horizon)?;
    let markov = intrusive_markovian(sys, &pair.q)?;
    let memory = intrusive_nonmarkov(sys, &pair, lag)?;
    let z_markov = simulate_reduced(&ReducedModel::markovian(markov.clone()), z0, &inputs, horizon)?;
    let z_memory = simulate_reduced(&ReducedModel::new(markov, memory)?, z0, &inputs, horizon)?;
    let mut out = Vec::with_capacity(steps);
    for k in 0..steps {
        let zk = DVector::from_iterator(sel.num_observed(), sel.observed().iter().map(|&i| full[(i, k)]));
        let norm = zk.norm();
        let e0 = (&zk - v * z_markov.column(k)).norm();
        let el = (&zk - v * z_memory.column(k)).norm();
        out.push((e0 - el) / norm);
    }
    Ok(out)
}
