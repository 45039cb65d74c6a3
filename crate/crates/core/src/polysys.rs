//! Discrete-time polynomial full models and their partial observation.
//!
//! A full model advances its state with
//! `x_{k+1} = sum_j A_j x_k^j + B u_k` and emits `y_k = C x_k`, where `x^j`
//! is the vector of distinct degree-`j` monomials of `x` (see
//! [`unique_kron_power`]).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Largest supported polynomial degree. `N_j` grows like `N^j / j!`.
pub const MAX_DEGREE: usize = 4;

/// Binomial coefficient, exact in `usize` for the sizes used here.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Number of distinct degree-`j` monomials in `n` variables, `binom(n+j-1, j)`.
pub fn monomial_count(n: usize, j: usize) -> usize {
    if n == 0 {
        return usize::from(j == 0);
    }
    binomial(n + j - 1, j)
}

/// All multisets of size `j` over `0..n`, as nondecreasing tuples in
/// lexicographic order. This is the column layout of every `A_j`.
pub fn monomial_index_map(n: usize, j: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(monomial_count(n, j));
    let mut tuple = vec![0usize; j];
    fn rec(n: usize, pos: usize, start: usize, tuple: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if pos == tuple.len() {
            out.push(tuple.clone());
            return;
        }
        for i in start..n {
            tuple[pos] = i;
            rec(n, pos + 1, i, tuple, out);
        }
    }
    rec(n, 0, 0, &mut tuple, &mut out);
    out
}

/// Position of a nondecreasing tuple in [`monomial_index_map`]`(n, tuple.len())`.
pub fn monomial_rank(tuple: &[usize], n: usize) -> usize {
    let j = tuple.len();
    let mut rank = 0;
    let mut lo = 0;
    for (pos, &v) in tuple.iter().enumerate() {
        let remaining = j - pos - 1;
        for smaller in lo..v {
            rank += monomial_count(n - smaller, remaining);
        }
        lo = v;
    }
    rank
}

/// Writes the distinct degree-`j` monomials of `x` into `out` (length `N_j`).
pub fn unique_kron_power_into(x: &[f64], j: usize, out: &mut [f64]) {
    fn rec(x: &[f64], depth: usize, start: usize, prefix: f64, out: &mut [f64], cursor: &mut usize) {
        if depth == 0 {
            out[*cursor] = prefix;
            *cursor += 1;
            return;
        }
        for i in start..x.len() {
            rec(x, depth - 1, i, prefix * x[i], out, cursor);
        }
    }
    debug_assert_eq!(out.len(), monomial_count(x.len(), j));
    if j == 1 {
        out.copy_from_slice(x);
        return;
    }
    let mut cursor = 0;
    rec(x, j, 0, 1.0, out, &mut cursor);
}

/// The vector of distinct degree-`j` monomials of `x`, each entry being the
/// plain product (multiplicities are carried by the operator, not the vector).
pub fn unique_kron_power(x: &DVector<f64>, j: usize) -> DVector<f64> {
    let mut out = DVector::zeros(monomial_count(x.len(), j));
    unique_kron_power_into(x.as_slice(), j, out.as_mut_slice());
    out
}

/// One polynomial operator `A_j`.
///
/// `Nodewise` holds the coefficients of a term acting on each state
/// component separately, `c_i * x_i^j`; it is exactly the dense operator
/// with one nonzero per row, in column `(i, i, ..., i)`. PDE reaction terms
/// have this shape, and the dense form of a cubic on 128 nodes would not fit
/// in memory.
#[derive(Debug, Clone, PartialEq)]
pub enum PolyOperator {
    Dense(DMatrix<f64>),
    Nodewise(DVector<f64>),
}

impl PolyOperator {
    pub fn rows(&self) -> usize {
        match self {
            PolyOperator::Dense(m) => m.nrows(),
            PolyOperator::Nodewise(c) => c.len(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            PolyOperator::Dense(m) => m.iter().all(|v| *v == 0.0),
            PolyOperator::Nodewise(c) => c.iter().all(|v| *v == 0.0),
        }
    }

    /// `out += A_j x^j`. `scratch` is reused for the monomial vector.
    fn apply_add(&self, x: &DVector<f64>, j: usize, scratch: &mut DVector<f64>, out: &mut DVector<f64>) {
        match self {
            PolyOperator::Nodewise(c) => {
                for i in 0..x.len() {
                    out[i] += c[i] * x[i].powi(j as i32);
                }
            }
            PolyOperator::Dense(m) if j == 1 => out.gemv(1.0, m, x, 1.0),
            PolyOperator::Dense(m) => {
                let len = m.ncols();
                if scratch.len() != len {
                    *scratch = DVector::zeros(len);
                }
                unique_kron_power_into(x.as_slice(), j, scratch.as_mut_slice());
                out.gemv(1.0, m, scratch, 1.0);
            }
        }
    }

    /// Dense `N x N_j` form. Only sensible for small `N`.
    pub fn to_dense(&self, j: usize) -> DMatrix<f64> {
        match self {
            PolyOperator::Dense(m) => m.clone(),
            PolyOperator::Nodewise(c) => {
                let n = c.len();
                let mut m = DMatrix::zeros(n, monomial_count(n, j));
                for i in 0..n {
                    m[(i, monomial_rank(&vec![i; j], n))] = c[i];
                }
                m
            }
        }
    }
}

/// The full model `x_{k+1} = sum_j A_j x_k^j + B u_k`, `y_k = C x_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialSystem {
    state_dim: usize,
    ops: Vec<PolyOperator>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
}

impl PolynomialSystem {
    pub fn new(ops: Vec<PolyOperator>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::InvalidArgument("at least the linear operator A_1 is required".into()));
        }
        if ops.len() > MAX_DEGREE {
            return Err(Error::InvalidArgument(format!(
                "polynomial degree {} exceeds the supported maximum {MAX_DEGREE}",
                ops.len()
            )));
        }
        let n = ops[0].rows();
        if n == 0 {
            return Err(Error::InvalidArgument("state dimension must be positive".into()));
        }
        for (idx, op) in ops.iter().enumerate() {
            let j = idx + 1;
            if op.rows() != n {
                return Err(Error::dim("A_j rows", n, op.rows()));
            }
            if let PolyOperator::Dense(m) = op {
                let cols = monomial_count(n, j);
                if m.ncols() != cols {
                    return Err(Error::dim("A_j columns", cols, m.ncols()));
                }
            }
        }
        if b.nrows() != n {
            return Err(Error::dim("B rows", n, b.nrows()));
        }
        if c.ncols() != n {
            return Err(Error::dim("C columns", n, c.ncols()));
        }
        Ok(Self { state_dim: n, ops, b, c })
    }

    /// Linear system `x_{k+1} = A x_k + B u_k`.
    pub fn linear(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::dim("A_1 columns", a.nrows(), a.ncols()));
        }
        Self::new(vec![PolyOperator::Dense(a)], b, c)
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }

    pub fn degree(&self) -> usize {
        self.ops.len()
    }

    /// Highest `j` whose operator is not identically zero (at least 1).
    pub fn active_degree(&self) -> usize {
        self.ops.iter().rposition(|op| !op.is_zero()).map_or(1, |j| j + 1)
    }

    pub fn operators(&self) -> &[PolyOperator] {
        &self.ops
    }

    pub fn operator(&self, j: usize) -> &PolyOperator {
        &self.ops[j - 1]
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// True when every operator of degree two or higher vanishes.
    pub fn is_linear(&self) -> bool {
        self.ops.iter().skip(1).all(PolyOperator::is_zero)
    }

    /// Dense `A_1`.
    pub fn linear_part(&self) -> DMatrix<f64> {
        self.ops[0].to_dense(1)
    }

    fn check_step_dims(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<()> {
        if x.len() != self.state_dim {
            return Err(Error::dim("state vector", self.state_dim, x.len()));
        }
        if u.len() != self.input_dim() {
            return Err(Error::dim("input vector", self.input_dim(), u.len()));
        }
        Ok(())
    }

    fn step_into(&self, x: &DVector<f64>, u: &DVector<f64>, scratch: &mut DVector<f64>, out: &mut DVector<f64>) {
        out.fill(0.0);
        for (idx, op) in self.ops.iter().enumerate() {
            op.apply_add(x, idx + 1, scratch, out);
        }
        if !u.is_empty() {
            out.gemv(1.0, &self.b, u, 1.0);
        }
    }

    pub fn output(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.c * x
    }
}

/// Row selection `P_o` with its complement, stored as index lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationSelector {
    observed: Vec<usize>,
    complement: Vec<usize>,
    state_dim: usize,
}

impl ObservationSelector {
    pub fn new(observed: Vec<usize>, state_dim: usize) -> Result<Self> {
        if observed.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("observed indices must be strictly increasing".into()));
        }
        if let Some(&last) = observed.last() {
            if last >= state_dim {
                return Err(Error::InvalidArgument(format!(
                    "observed index {last} out of range for state dimension {state_dim}"
                )));
            }
        }
        let mut mask = vec![false; state_dim];
        for &i in &observed {
            mask[i] = true;
        }
        let complement = (0..state_dim).filter(|&i| !mask[i]).collect();
        Ok(Self {
            observed,
            complement,
            state_dim,
        })
    }

    pub fn all(state_dim: usize) -> Self {
        Self {
            observed: (0..state_dim).collect(),
            complement: Vec::new(),
            state_dim,
        }
    }

    /// `round(fraction * N)` indices spread with a constant stride over
    /// `0..N`, i.e. equidistant with respect to the state indexing.
    pub fn equidistant(state_dim: usize, fraction: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::InvalidArgument(format!("observed fraction {fraction} outside [0, 1]")));
        }
        let r = (fraction * state_dim as f64).round() as usize;
        let observed = (0..r).map(|i| i * state_dim / r.max(1)).collect();
        Self::new(observed, state_dim)
    }

    pub fn observed(&self) -> &[usize] {
        &self.observed
    }

    pub fn complement(&self) -> &[usize] {
        &self.complement
    }

    pub fn num_observed(&self) -> usize {
        self.observed.len()
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    /// `P_o` as a dense `r x N` matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        selection_matrix(&self.observed, self.state_dim)
    }

    /// `P_o^perp` as a dense `(N - r) x N` matrix.
    pub fn complement_matrix(&self) -> DMatrix<f64> {
        selection_matrix(&self.complement, self.state_dim)
    }
}

fn selection_matrix(rows: &[usize], n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows.len(), n);
    for (r, &i) in rows.iter().enumerate() {
        m[(r, i)] = 1.0;
    }
    m
}

/// A time-major sequence of equally sized vectors, stored column-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub data: DMatrix<f64>,
    pub dt: f64,
    pub t0: f64,
}

impl Trajectory {
    pub fn new(data: DMatrix<f64>, dt: f64, t0: f64) -> Result<Self> {
        if data.ncols() == 0 {
            return Err(Error::InvalidArgument("trajectory must hold at least one column".into()));
        }
        Ok(Self { data, dt, t0 })
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }

    pub fn column(&self, k: usize) -> DVector<f64> {
        self.data.column(k).into_owned()
    }
}

/// One application of the full model.
pub fn step_full(sys: &PolynomialSystem, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
    sys.check_step_dims(x, u)?;
    let mut out = DVector::zeros(sys.state_dim);
    let mut scratch = DVector::zeros(0);
    sys.step_into(x, u, &mut scratch, &mut out);
    Ok(out)
}

fn check_inputs(sys: &PolynomialSystem, inputs: &DMatrix<f64>, steps: usize) -> Result<()> {
    if inputs.nrows() != sys.input_dim() {
        return Err(Error::dim("input rows", sys.input_dim(), inputs.nrows()));
    }
    if inputs.ncols() < steps {
        return Err(Error::Precondition(format!(
            "{steps} steps requested but only {} input columns supplied",
            inputs.ncols()
        )));
    }
    Ok(())
}

/// Steps the full model `steps` times from `x0`, calling `visit(k, x_k)` for
/// `k = 0..=steps`. Aborts with [`Error::Divergence`] on the first non-finite
/// state.
pub fn run_full<F>(sys: &PolynomialSystem, x0: &DVector<f64>, inputs: &DMatrix<f64>, steps: usize, mut visit: F) -> Result<DVector<f64>>
where
    F: FnMut(usize, &DVector<f64>),
{
    if x0.len() != sys.state_dim {
        return Err(Error::dim("initial state", sys.state_dim, x0.len()));
    }
    check_inputs(sys, inputs, steps)?;
    let mut x = x0.clone();
    let mut next = DVector::zeros(sys.state_dim);
    let mut scratch = DVector::zeros(0);
    let mut u = DVector::zeros(sys.input_dim());
    visit(0, &x);
    for k in 0..steps {
        u.copy_from(&inputs.column(k));
        sys.step_into(&x, &u, &mut scratch, &mut next);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step: k + 1, burst: None });
        }
        std::mem::swap(&mut x, &mut next);
        visit(k + 1, &x);
    }
    Ok(x)
}

/// States `x_0..x_K` and outputs `C x_0..C x_K`, both with `K + 1` columns.
pub fn simulate_full(
    sys: &PolynomialSystem,
    x0: &DVector<f64>,
    inputs: &DMatrix<f64>,
    steps: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let mut states = DMatrix::zeros(sys.state_dim, steps + 1);
    let mut outputs = DMatrix::zeros(sys.output_dim(), steps + 1);
    run_full(sys, x0, inputs, steps, |k, x| {
        states.set_column(k, x);
        outputs.set_column(k, &(&sys.c * x));
    })?;
    Ok((states, outputs))
}

/// Like [`simulate_full`] but keeps only the observed components, which is
/// all a partially observed experiment ever sees.
pub fn simulate_observed(
    sys: &PolynomialSystem,
    sel: &ObservationSelector,
    x0: &DVector<f64>,
    inputs: &DMatrix<f64>,
    steps: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if sel.state_dim() != sys.state_dim {
        return Err(Error::dim("selector state dimension", sys.state_dim, sel.state_dim()));
    }
    let mut obs = DMatrix::zeros(sel.num_observed(), steps + 1);
    let mut outputs = DMatrix::zeros(sys.output_dim(), steps + 1);
    run_full(sys, x0, inputs, steps, |k, x| {
        for (r, &i) in sel.observed.iter().enumerate() {
            obs[(r, k)] = x[i];
        }
        outputs.set_column(k, &(&sys.c * x));
    })?;
    Ok((obs, outputs))
}

/// `z = P_o x`.
pub fn observe(sel: &ObservationSelector, x: &DVector<f64>) -> DVector<f64> {
    debug_assert_eq!(x.len(), sel.state_dim);
    DVector::from_iterator(sel.observed.len(), sel.observed.iter().map(|&i| x[i]))
}

/// `P_o^T z`: observed entries from `z`, everything else zero.
pub fn lift_observation(sel: &ObservationSelector, z: &DVector<f64>) -> DVector<f64> {
    debug_assert_eq!(z.len(), sel.observed.len());
    let mut x = DVector::zeros(sel.state_dim);
    for (r, &i) in sel.observed.iter().enumerate() {
        x[i] = z[r];
    }
    x
}
