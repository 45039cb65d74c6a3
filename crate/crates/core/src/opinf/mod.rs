//! Operator inference: least-squares fits of Markovian reduced operators and
//! of the linear memory (non-Markovian) operators, stagewise or in batch.

mod batch;
mod lstsq;
mod markovian;
pub(crate) mod stagewise;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::polysys::{monomial_count, unique_kron_power_into};

pub use batch::{batch_design, infer_batch};
pub use lstsq::{solve_least_squares, LsqReport};
pub use markovian::{infer_markovian, infer_markovian_from_bursts, infer_output_markovian, markovian_design, MarkovianData};
pub use stagewise::{infer_stagewise, stagewise_residual, StageReport};

/// Markovian reduced operators `(A_1..A_l, B, C)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovOps {
    /// `a[j-1]` is `n x n_j`.
    pub a: Vec<DMatrix<f64>>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

impl MarkovOps {
    pub fn new(a: Vec<DMatrix<f64>>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let n = a.first().map(|m| m.nrows()).ok_or_else(|| Error::InvalidArgument("missing linear operator".into()))?;
        for (idx, m) in a.iter().enumerate() {
            if m.nrows() != n {
                return Err(Error::dim("reduced A_j rows", n, m.nrows()));
            }
            let cols = monomial_count(n, idx + 1);
            if m.ncols() != cols {
                return Err(Error::dim("reduced A_j columns", cols, m.ncols()));
            }
        }
        if b.nrows() != n {
            return Err(Error::dim("reduced B rows", n, b.nrows()));
        }
        if c.ncols() != n {
            return Err(Error::dim("reduced C columns", n, c.ncols()));
        }
        Ok(Self { a, b, c })
    }

    pub fn dim(&self) -> usize {
        self.a[0].nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }

    pub fn degree(&self) -> usize {
        self.a.len()
    }

    /// `sum_j A_j z^j + B u`.
    pub fn step(&self, z: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        let mut scratch = DVector::zeros(0);
        self.step_into(z, u, &mut scratch, &mut out);
        out
    }

    pub(crate) fn step_into(&self, z: &DVector<f64>, u: &DVector<f64>, scratch: &mut DVector<f64>, out: &mut DVector<f64>) {
        out.gemv(1.0, &self.a[0], z, 0.0);
        for (idx, a) in self.a.iter().enumerate().skip(1) {
            if scratch.len() != a.ncols() {
                *scratch = DVector::zeros(a.ncols());
            }
            unique_kron_power_into(z.as_slice(), idx + 1, scratch.as_mut_slice());
            out.gemv(1.0, a, scratch, 1.0);
        }
        if !u.is_empty() {
            out.gemv(1.0, &self.b, u, 1.0);
        }
    }
}

/// Memory operators `E_l (n x n)`, `F_l (n x p)`, `G_l (s x n)`, `H_l (s x p)`
/// for lags `l = 1..=L`; index `l - 1` holds lag `l`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NonMarkovOps {
    pub e: Vec<DMatrix<f64>>,
    pub f: Vec<DMatrix<f64>>,
    pub g: Vec<DMatrix<f64>>,
    pub h: Vec<DMatrix<f64>>,
}

impl NonMarkovOps {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn zeros(lag: usize, n: usize, p: usize, s: usize) -> Self {
        Self {
            e: vec![DMatrix::zeros(n, n); lag],
            f: vec![DMatrix::zeros(n, p); lag],
            g: vec![DMatrix::zeros(s, n); lag],
            h: vec![DMatrix::zeros(s, p); lag],
        }
    }

    pub fn lag(&self) -> usize {
        self.e.len()
    }

    /// Checks list lengths and shapes against `(n, p, s)`.
    pub fn validate(&self, n: usize, p: usize, s: usize) -> Result<()> {
        let lag = self.lag();
        if self.f.len() != lag || self.g.len() != lag || self.h.len() != lag {
            return Err(Error::InvalidArgument("memory operator lists differ in length".into()));
        }
        for l in 0..lag {
            let shapes = [
                (self.e[l].shape(), (n, n)),
                (self.f[l].shape(), (n, p)),
                (self.g[l].shape(), (s, n)),
                (self.h[l].shape(), (s, p)),
            ];
            for (got, want) in shapes {
                if got != want {
                    return Err(Error::InvalidArgument(format!(
                        "memory operator at lag {} has shape {got:?}, expected {want:?}",
                        l + 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// The first `lag` operators.
    pub fn truncated(&self, lag: usize) -> Self {
        let lag = lag.min(self.lag());
        Self {
            e: self.e[..lag].to_vec(),
            f: self.f[..lag].to_vec(),
            g: self.g[..lag].to_vec(),
            h: self.h[..lag].to_vec(),
        }
    }
}

/// Largest relative Frobenius deviation between two operator lists,
/// `max_l ||a_l - b_l||_F / max(||b_l||_F, floor)`.
pub fn max_relative_deviation(a: &[DMatrix<f64>], b: &[DMatrix<f64>], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm() / y.norm().max(floor))
        .fold(0.0, f64::max)
}
