use nalgebra::DMatrix;

use super::lstsq::{solve_least_squares, LsqReport};
use super::MarkovOps;
use crate::error::{Error, Result};
use crate::polysys::{monomial_count, unique_kron_power_into, MAX_DEGREE};
use crate::sampling::ReprojectedDataset;

/// Snapshot pairs `(current_k, next_k)` driven by `inputs_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovianData {
    /// `n x K`
    pub current: DMatrix<f64>,
    /// `n x K`
    pub next: DMatrix<f64>,
    /// `p x K`
    pub inputs: DMatrix<f64>,
}

impl MarkovianData {
    pub fn new(current: DMatrix<f64>, next: DMatrix<f64>, inputs: DMatrix<f64>) -> Result<Self> {
        if current.shape() != next.shape() {
            return Err(Error::InvalidArgument(format!(
                "current {:?} and next {:?} snapshots differ in shape",
                current.shape(),
                next.shape()
            )));
        }
        if inputs.ncols() != current.ncols() {
            return Err(Error::dim("input columns", current.ncols(), inputs.ncols()));
        }
        Ok(Self { current, next, inputs })
    }

    /// Consecutive pairs of a trajectory `n x (K+1)` with inputs `p x K` (or more).
    pub fn from_trajectory(traj: &DMatrix<f64>, inputs: &DMatrix<f64>) -> Result<Self> {
        if traj.ncols() < 2 {
            return Err(Error::InvalidArgument("a trajectory needs at least two columns".into()));
        }
        let k = traj.ncols() - 1;
        if inputs.ncols() < k {
            return Err(Error::dim("input columns", k, inputs.ncols()));
        }
        Self::new(
            traj.columns(0, k).into_owned(),
            traj.columns(1, k).into_owned(),
            inputs.columns(0, k).into_owned(),
        )
    }

    /// Burst-initial pairs `(zbar_0, zbar_1, u_0)` of every burst.
    pub fn from_bursts(ds: &ReprojectedDataset) -> Self {
        let nr = ds.num_bursts();
        let mut current = DMatrix::zeros(ds.reduced_dim(), nr);
        let mut next = DMatrix::zeros(ds.reduced_dim(), nr);
        let mut inputs = DMatrix::zeros(ds.input_dim(), nr);
        for (i, b) in ds.bursts().iter().enumerate() {
            current.set_column(i, &b.zbar.column(0));
            next.set_column(i, &b.zbar.column(1));
            inputs.set_column(i, &b.u.column(0));
        }
        Self { current, next, inputs }
    }

    pub fn concat(parts: &[MarkovianData]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::InvalidArgument("nothing to concatenate".into()))?;
        let total: usize = parts.iter().map(|p| p.current.ncols()).sum();
        let (n, p) = (first.current.nrows(), first.inputs.nrows());
        let mut out = Self {
            current: DMatrix::zeros(n, total),
            next: DMatrix::zeros(n, total),
            inputs: DMatrix::zeros(p, total),
        };
        let mut at = 0;
        for part in parts {
            if part.current.nrows() != n || part.inputs.nrows() != p {
                return Err(Error::InvalidArgument("snapshot sets differ in dimensions".into()));
            }
            let k = part.current.ncols();
            out.current.columns_mut(at, k).copy_from(&part.current);
            out.next.columns_mut(at, k).copy_from(&part.next);
            out.inputs.columns_mut(at, k).copy_from(&part.inputs);
            at += k;
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.current.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.current.ncols() == 0
    }
}

/// Transposed data matrix: row `k` is `[(z_k^1)^T ... (z_k^l)^T u_k^T]`.
pub fn markovian_design(current: &DMatrix<f64>, inputs: &DMatrix<f64>, degree: usize) -> Result<DMatrix<f64>> {
    if degree == 0 || degree > MAX_DEGREE {
        return Err(Error::InvalidArgument(format!("polynomial degree must be in 1..={MAX_DEGREE}, got {degree}")));
    }
    if inputs.ncols() != current.ncols() {
        return Err(Error::dim("input columns", current.ncols(), inputs.ncols()));
    }
    let n = current.nrows();
    let widths: Vec<usize> = (1..=degree).map(|j| monomial_count(n, j)).collect();
    let total = widths.iter().sum::<usize>() + inputs.nrows();
    let mut design = DMatrix::zeros(current.ncols(), total);
    let mut buf = Vec::new();
    for k in 0..current.ncols() {
        let z: Vec<f64> = current.column(k).iter().copied().collect();
        let mut at = 0;
        for (idx, &w) in widths.iter().enumerate() {
            buf.resize(w, 0.0);
            unique_kron_power_into(&z, idx + 1, &mut buf);
            for (c, v) in buf.iter().enumerate() {
                design[(k, at + c)] = *v;
            }
            at += w;
        }
        for c in 0..inputs.nrows() {
            design[(k, at + c)] = inputs[(c, k)];
        }
    }
    Ok(design)
}

/// Fits `next = sum_j A_j current^j + B u` in the least-squares sense.
/// The returned operators carry an empty (`0 x n`) output matrix.
pub fn infer_markovian(data: &MarkovianData, degree: usize, ridge: f64) -> Result<(MarkovOps, LsqReport)> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("no snapshot pairs to fit".into()));
    }
    let n = data.current.nrows();
    let design = markovian_design(&data.current, &data.inputs, degree)?;
    let (theta, report) = solve_least_squares(&design, &data.next.transpose(), ridge)?;
    let op = theta.transpose();
    let mut a = Vec::with_capacity(degree);
    let mut at = 0;
    for j in 1..=degree {
        let w = monomial_count(n, j);
        a.push(op.columns(at, w).into_owned());
        at += w;
    }
    let b = op.columns(at, data.inputs.nrows()).into_owned();
    Ok((MarkovOps::new(a, b, DMatrix::zeros(0, n))?, report))
}

/// Fits `y = C z` from state columns `n x K` and outputs `s x K`.
pub fn infer_output_markovian(states: &DMatrix<f64>, outputs: &DMatrix<f64>, ridge: f64) -> Result<(DMatrix<f64>, LsqReport)> {
    if outputs.ncols() != states.ncols() {
        return Err(Error::dim("output columns", states.ncols(), outputs.ncols()));
    }
    if outputs.nrows() == 0 {
        let report = LsqReport::trivial(&DMatrix::zeros(states.ncols(), 0));
        return Ok((DMatrix::zeros(0, states.nrows()), report));
    }
    let (theta, report) = solve_least_squares(&states.transpose(), &outputs.transpose(), ridge)?;
    Ok((theta.transpose(), report))
}

/// Markovian state and output operators from burst-initial pairs
/// `{(zbar_0, zbar_1, u_0)}` and `{(zbar_0, y_0)}`.
pub fn infer_markovian_from_bursts(ds: &ReprojectedDataset, degree: usize, ridge: f64) -> Result<(MarkovOps, LsqReport, LsqReport)> {
    let data = MarkovianData::from_bursts(ds);
    let (mut ops, state_report) = infer_markovian(&data, degree, ridge)?;
    let mut y0 = DMatrix::zeros(ds.output_dim(), ds.num_bursts());
    for (i, b) in ds.bursts().iter().enumerate() {
        y0.set_column(i, &b.y.column(0));
    }
    let (c, out_report) = infer_output_markovian(&data.current, &y0, ridge)?;
    ops.c = c;
    Ok((ops, state_report, out_report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intrusive::intrusive_markovian;
    use crate::models::random_stable_linear;
    use crate::projection::pod_basis;
    use crate::projection::tests::random_matrix;
    use crate::sampling::reproject_single_step;
    use nalgebra::DVector;

    fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).norm() / b.norm().max(1e-14)
    }

    #[test]
    fn recovers_known_quadratic_reduced_model() {
        let n = 3;
        let truth = MarkovOps::new(
            vec![random_matrix(n, n, 1) * 0.3, random_matrix(n, monomial_count(n, 2), 2) * 0.1],
            random_matrix(n, 2, 3),
            DMatrix::zeros(0, n),
        )
        .unwrap();
        let current = random_matrix(n, 40, 4);
        let inputs = random_matrix(2, 40, 5);
        let mut next = DMatrix::zeros(n, 40);
        for k in 0..40 {
            next.set_column(k, &truth.step(&current.column(k).into_owned(), &inputs.column(k).into_owned()));
        }
        let data = MarkovianData::new(current, next, inputs).unwrap();
        let (ops, rep) = infer_markovian(&data, 2, 0.0).unwrap();
        assert!(!rep.min_norm_used);
        assert!(rel(&ops.a[0], &truth.a[0]) < 1e-8);
        assert!(rel(&ops.a[1], &truth.a[1]) < 1e-8);
        assert!(rel(&ops.b, &truth.b) < 1e-8);
    }

    #[test]
    fn linear_reprojection_recovers_intrusive_operators() {
        let sys = random_stable_linear(10, 2, 1, 0.9, 7).unwrap();
        let v = pod_basis(&random_matrix(10, 30, 8), 4).unwrap().v;
        let intr = intrusive_markovian(&sys, &v).unwrap();
        let x0 = &v * DVector::from_vec(vec![1.0, -0.5, 0.3, 0.8]);
        let u = random_matrix(2, 20, 9);
        let traj = reproject_single_step(&sys, &v, &x0, &u, 20).unwrap();
        let data = MarkovianData::from_trajectory(&traj, &u).unwrap();
        let (ops, _) = infer_markovian(&data, 1, 0.0).unwrap();
        assert!(rel(&ops.a[0], &intr.a[0]) < 1e-8);
        assert!(rel(&ops.b, &intr.b) < 1e-8);
    }

    #[test]
    fn zero_data_gives_zero_operators() {
        let data = MarkovianData::new(DMatrix::zeros(2, 5), DMatrix::zeros(2, 5), DMatrix::zeros(1, 5)).unwrap();
        let (ops, rep) = infer_markovian(&data, 2, 0.0).unwrap();
        assert!(rep.min_norm_used);
        assert!(ops.a.iter().all(|m| m.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn output_fit() {
        let states = random_matrix(3, 10, 1);
        let c = random_matrix(2, 3, 2);
        let (fit, rep) = infer_output_markovian(&states, &(&c * &states), 0.0).unwrap();
        assert!(rel(&fit, &c) < 1e-10);
        assert!(rep.residual_norm < 1e-10);
        let (zero, _) = infer_output_markovian(&states, &DMatrix::zeros(2, 10), 0.0).unwrap();
        assert!(zero.iter().all(|v| *v == 0.0));
        let square = random_matrix(2, 2, 3);
        let (_, rep) = infer_output_markovian(&square, &random_matrix(2, 2, 4), 0.0).unwrap();
        assert!(rep.residual_norm < 1e-10);
    }

    #[test]
    fn design_layout() {
        let current = DMatrix::from_column_slice(2, 1, &[2.0, 3.0]);
        let inputs = DMatrix::from_column_slice(1, 1, &[7.0]);
        let d = markovian_design(&current, &inputs, 2).unwrap();
        assert_eq!(d.row(0).iter().copied().collect::<Vec<_>>(), vec![2.0, 3.0, 4.0, 6.0, 9.0, 7.0]);
        assert!(markovian_design(&current, &inputs, 0).is_err());
    }
}
