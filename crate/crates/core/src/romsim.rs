//! Time stepping of reduced models with a finite memory of past states.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::opinf::{MarkovOps, NonMarkovOps};

/// Markovian operators plus memory operators up to lag `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedModel {
    pub markov: MarkovOps,
    pub memory: NonMarkovOps,
}

impl ReducedModel {
    pub fn new(markov: MarkovOps, memory: NonMarkovOps) -> Result<Self> {
        memory.validate(markov.dim(), markov.input_dim(), markov.output_dim())?;
        Ok(Self { markov, memory })
    }

    pub fn markovian(markov: MarkovOps) -> Self {
        Self {
            markov,
            memory: NonMarkovOps::empty(),
        }
    }

    pub fn dim(&self) -> usize {
        self.markov.dim()
    }

    pub fn input_dim(&self) -> usize {
        self.markov.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.markov.output_dim()
    }

    pub fn lag(&self) -> usize {
        self.memory.lag()
    }

    /// Same operators with the memory cut to `lag`.
    pub fn with_lag(&self, lag: usize) -> Self {
        Self {
            markov: self.markov.clone(),
            memory: self.memory.truncated(lag),
        }
    }
}

fn check_inputs(model: &ReducedModel, inputs: &DMatrix<f64>, steps: usize) -> Result<()> {
    if inputs.nrows() != model.input_dim() {
        return Err(Error::dim("input rows", model.input_dim(), inputs.nrows()));
    }
    if inputs.ncols() < steps {
        return Err(Error::Precondition(format!(
            "{steps} steps requested but only {} input columns supplied",
            inputs.ncols()
        )));
    }
    Ok(())
}

/// Runs the reduced model for `steps` steps from `z0`, returning `n x (K+1)`.
///
/// State `z_m` is kept in slot `m % L` of a ring buffer, so memory use is
/// independent of the horizon. Lag contributions are added in increasing lag
/// order.
pub fn simulate_reduced(model: &ReducedModel, z0: &DVector<f64>, inputs: &DMatrix<f64>, steps: usize) -> Result<DMatrix<f64>> {
    let n = model.dim();
    if z0.len() != n {
        return Err(Error::dim("reduced initial state", n, z0.len()));
    }
    check_inputs(model, inputs, steps)?;
    let lag = model.lag();
    let mut traj = DMatrix::zeros(n, steps + 1);
    traj.set_column(0, z0);
    let mut ring_z = vec![DVector::zeros(n); lag];
    let mut ring_u = vec![DVector::zeros(model.input_dim()); lag];
    let mut z = z0.clone();
    let mut u = DVector::zeros(model.input_dim());
    let mut next = DVector::zeros(n);
    let mut scratch = DVector::zeros(0);
    for k in 0..steps {
        u.copy_from(&inputs.column(k));
        model.markov.step_into(&z, &u, &mut scratch, &mut next);
        for l in 1..=lag.min(k) {
            let slot = (k - l) % lag;
            next.gemv(1.0, &model.memory.e[l - 1], &ring_z[slot], 1.0);
            next.gemv(1.0, &model.memory.f[l - 1], &ring_u[slot], 1.0);
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step: k + 1, burst: None });
        }
        if lag > 0 {
            ring_z[k % lag].copy_from(&z);
            ring_u[k % lag].copy_from(&u);
        }
        std::mem::swap(&mut z, &mut next);
        traj.set_column(k + 1, &z);
    }
    Ok(traj)
}

/// Outputs `y_k = C z_k + sum_l (G_l z_{k-l} + H_l u_{k-l})` for every
/// column of `traj`.
pub fn reduced_output(model: &ReducedModel, traj: &DMatrix<f64>, inputs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if traj.nrows() != model.dim() {
        return Err(Error::dim("reduced trajectory rows", model.dim(), traj.nrows()));
    }
    let steps = traj.ncols().saturating_sub(1);
    check_inputs(model, inputs, steps)?;
    let mut y = &model.markov.c * traj;
    for k in 0..traj.ncols() {
        let mut col = y.column_mut(k);
        for l in 1..=model.lag().min(k) {
            col.gemv(1.0, &model.memory.g[l - 1], &traj.column(k - l), 1.0);
            col.gemv(1.0, &model.memory.h[l - 1], &inputs.column(k - l), 1.0);
        }
    }
    Ok(y)
}

fn lerp_all(a: &[DMatrix<f64>], b: &[DMatrix<f64>], t: f64) -> Vec<DMatrix<f64>> {
    a.iter().zip(b).map(|(x, y)| lerp(x, y, t)).collect()
}

fn lerp(a: &DMatrix<f64>, b: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    if t == 0.0 {
        a.clone()
    } else if t == 1.0 {
        b.clone()
    } else {
        a * (1.0 - t) + b * t
    }
}

fn same_shape(a: &ReducedModel, b: &ReducedModel) -> bool {
    let shapes = |m: &ReducedModel| {
        (
            m.markov.a.iter().map(|x| x.shape()).collect::<Vec<_>>(),
            m.markov.b.shape(),
            m.markov.c.shape(),
            m.lag(),
        )
    };
    shapes(a) == shapes(b)
}

/// Entrywise piecewise-linear interpolation of all operators over a sorted
/// parameter grid. Queries outside `[grid[0], grid[m-1]]` are rejected.
pub fn interpolate_operators(grid: &[f64], models: &[ReducedModel], mu: f64) -> Result<ReducedModel> {
    if grid.len() < 2 || grid.len() != models.len() {
        return Err(Error::InvalidArgument(format!(
            "interpolation needs at least two grid points with one model each, got {} points and {} models",
            grid.len(),
            models.len()
        )));
    }
    if grid.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
        return Err(Error::InvalidArgument("parameter grid must be strictly increasing".into()));
    }
    if models.iter().any(|m| !same_shape(m, &models[0])) {
        return Err(Error::InvalidArgument("models on the grid differ in dimensions or lag".into()));
    }
    let (lo, hi) = (grid[0], grid[grid.len() - 1]);
    if !(mu >= lo && mu <= hi) {
        return Err(Error::InvalidArgument(format!("parameter {mu} outside the training range [{lo}, {hi}]")));
    }
    if let Some(i) = grid.iter().position(|g| *g == mu) {
        return Ok(models[i].clone());
    }
    let i = grid.windows(2).position(|w| mu < w[1]).expect("mu inside the hull");
    let t = (mu - grid[i]) / (grid[i + 1] - grid[i]);
    let (a, b) = (&models[i], &models[i + 1]);
    Ok(ReducedModel {
        markov: MarkovOps {
            a: lerp_all(&a.markov.a, &b.markov.a, t),
            b: lerp(&a.markov.b, &b.markov.b, t),
            c: lerp(&a.markov.c, &b.markov.c, t),
        },
        memory: NonMarkovOps {
            e: lerp_all(&a.memory.e, &b.memory.e, t),
            f: lerp_all(&a.memory.f, &b.memory.f, t),
            g: lerp_all(&a.memory.g, &b.memory.g, t),
            h: lerp_all(&a.memory.h, &b.memory.h, t),
        },
    })
}
