//! Reduced operators built by projecting the full operators. These are the
//! reference values that the data-driven operators are checked against.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::opinf::{MarkovOps, NonMarkovOps};
use crate::polysys::{monomial_count, monomial_index_map, monomial_rank, PolyOperator, PolynomialSystem};
use crate::projection::ProjectionPair;

/// Coefficients of `prod_t (rows[t] . z)` in the distinct degree-`j`
/// monomials of `z`, accumulated into `out` with weight `scale`.
fn expand_product(rows: &[Vec<f64>], n: usize, scale: f64, out: &mut [f64]) {
    fn rec(rows: &[Vec<f64>], n: usize, depth: usize, acc: f64, picked: &mut Vec<usize>, out: &mut [f64]) {
        if depth == rows.len() {
            let mut sorted = picked.clone();
            sorted.sort_unstable();
            out[monomial_rank(&sorted, n)] += acc;
            return;
        }
        for a in 0..n {
            let w = rows[depth][a];
            if w == 0.0 {
                continue;
            }
            picked.push(a);
            rec(rows, n, depth + 1, acc * w, picked, out);
            picked.pop();
        }
    }
    let mut picked = Vec::with_capacity(rows.len());
    rec(rows, n, 0, scale, &mut picked, out);
}

/// `N x n_j` matrix `M` with `A_j (V z)^j = M z^j` for every `z`.
fn lifted_operator(op: &PolyOperator, v: &DMatrix<f64>, j: usize) -> DMatrix<f64> {
    let (big, n) = v.shape();
    let nj = monomial_count(n, j);
    let row_of = |i: usize| -> Vec<f64> { v.row(i).iter().copied().collect() };
    let mut m = DMatrix::zeros(big, nj);
    match op {
        PolyOperator::Nodewise(c) => {
            let mut coeffs = vec![0.0; nj];
            for i in 0..big {
                if c[i] == 0.0 {
                    continue;
                }
                coeffs.iter_mut().for_each(|x| *x = 0.0);
                let r = row_of(i);
                expand_product(&vec![r; j], n, c[i], &mut coeffs);
                for (col, val) in coeffs.iter().enumerate() {
                    m[(i, col)] = *val;
                }
            }
        }
        PolyOperator::Dense(a) => {
            let mut coeffs = vec![0.0; nj];
            for (col, tuple) in monomial_index_map(big, j).iter().enumerate() {
                let a_col = a.column(col);
                if a_col.iter().all(|x| *x == 0.0) {
                    continue;
                }
                coeffs.iter_mut().for_each(|x| *x = 0.0);
                let rows: Vec<Vec<f64>> = tuple.iter().map(|&i| row_of(i)).collect();
                expand_product(&rows, n, 1.0, &mut coeffs);
                for (rc, val) in coeffs.iter().enumerate() {
                    if *val != 0.0 {
                        m.column_mut(rc).axpy(*val, &a_col, 1.0);
                    }
                }
            }
        }
    }
    m
}

/// Galerkin operators `V^T A_j (V .)^j`, `V^T B`, `C V` for an orthonormal
/// `N x n` basis.
pub fn intrusive_markovian(sys: &PolynomialSystem, basis: &DMatrix<f64>) -> Result<MarkovOps> {
    if basis.nrows() != sys.state_dim() {
        return Err(Error::dim("basis rows", sys.state_dim(), basis.nrows()));
    }
    let mut a = Vec::with_capacity(sys.degree());
    a.push(basis.tr_mul(&(sys.linear_part() * basis)));
    for j in 2..=sys.degree() {
        a.push(basis.tr_mul(&lifted_operator(sys.operator(j), basis, j)));
    }
    MarkovOps::new(a, basis.tr_mul(sys.b()), sys.c() * basis)
}

struct Coupling {
    /// `Q^T A Q_perp`
    top: DMatrix<f64>,
    /// `C Q_perp`
    out: DMatrix<f64>,
    /// `Q_perp^T A Q_perp`
    inner: DMatrix<f64>,
    /// `Q_perp^T A Q`
    from_state: DMatrix<f64>,
    /// `Q_perp^T B`
    from_input: DMatrix<f64>,
}

fn coupling(sys: &PolynomialSystem, pair: &ProjectionPair) -> Result<Coupling> {
    if !sys.is_linear() {
        return Err(Error::NotLinear);
    }
    if pair.state_dim() != sys.state_dim() {
        return Err(Error::dim("projection pair rows", sys.state_dim(), pair.state_dim()));
    }
    let a = sys.linear_part();
    let a_qp = &a * &pair.q_perp;
    Ok(Coupling {
        top: pair.q.tr_mul(&a_qp),
        out: sys.c() * &pair.q_perp,
        inner: pair.q_perp.tr_mul(&a_qp),
        from_state: pair.q_perp.tr_mul(&(&a * &pair.q)),
        from_input: pair.q_perp.tr_mul(sys.b()),
    })
}

/// Exact memory operators of a linear full model for lags `1..=lag`.
pub fn intrusive_nonmarkov(sys: &PolynomialSystem, pair: &ProjectionPair, lag: usize) -> Result<NonMarkovOps> {
    let cp = coupling(sys, pair)?;
    let mut ops = NonMarkovOps::empty();
    let mut left_e = cp.top;
    let mut left_g = cp.out;
    for l in 1..=lag {
        ops.e.push(&left_e * &cp.from_state);
        ops.f.push(&left_e * &cp.from_input);
        ops.g.push(&left_g * &cp.from_state);
        ops.h.push(&left_g * &cp.from_input);
        if l < lag {
            left_e = &left_e * &cp.inner;
            left_g = &left_g * &cp.inner;
        }
    }
    Ok(ops)
}

/// `Psi_k = Q^T A Q_perp (Q_perp^T A Q_perp)^k`, the weight of the initial
/// unresolved state `w_0` in the resolved dynamics at step `k + 1`.
pub fn memory_initial_term(sys: &PolynomialSystem, pair: &ProjectionPair, k: usize) -> Result<DMatrix<f64>> {
    let cp = coupling(sys, pair)?;
    let mut psi = cp.top;
    for _ in 0..k {
        psi = &psi * &cp.inner;
    }
    Ok(psi)
}

/// Resolved states and outputs of a linear full model started at `Q z0`,
/// evaluated with the untruncated memory sums. Returns `n x (K+1)` and
/// `s x (K+1)` matrices.
pub fn exact_memory_trajectory(
    sys: &PolynomialSystem,
    pair: &ProjectionPair,
    z0: &DVector<f64>,
    inputs: &DMatrix<f64>,
    steps: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = pair.reduced_dim();
    if z0.len() != n {
        return Err(Error::dim("reduced initial state", n, z0.len()));
    }
    if inputs.nrows() != sys.input_dim() {
        return Err(Error::dim("input rows", sys.input_dim(), inputs.nrows()));
    }
    if inputs.ncols() < steps {
        return Err(Error::Precondition(format!(
            "{steps} steps requested but only {} input columns supplied",
            inputs.ncols()
        )));
    }
    let mk = intrusive_markovian(sys, &pair.q)?;
    let nm = intrusive_nonmarkov(sys, pair, steps)?;
    let mut z = DMatrix::zeros(n, steps + 1);
    let mut y = DMatrix::zeros(sys.output_dim(), steps + 1);
    z.set_column(0, z0);
    for k in 0..=steps {
        let mut yk = &mk.c * z.column(k);
        for l in 0..k {
            yk += &nm.g[k - l - 1] * z.column(l) + &nm.h[k - l - 1] * inputs.column(l);
        }
        y.set_column(k, &yk);
        if k == steps {
            break;
        }
        let mut next = &mk.a[0] * z.column(k) + &mk.b * inputs.column(k);
        for l in 0..k {
            next += &nm.e[k - l - 1] * z.column(l) + &nm.f[k - l - 1] * inputs.column(l);
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step: k + 1, burst: None });
        }
        z.set_column(k + 1, &next);
    }
    Ok((z, y))
}
