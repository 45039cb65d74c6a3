//! POD bases of observation snapshots and the lifted direct-sum split of the
//! full state space into resolved and unresolved parts.

use nalgebra::{DMatrix, DVector, QR, SVD};

use crate::error::{Error, Result};
use crate::polysys::ObservationSelector;

/// Orthonormal basis `V` (`r x n`) of the leading left singular vectors of a
/// snapshot matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PodBasis {
    pub v: DMatrix<f64>,
    /// All `min(r, M)` singular values of the snapshot matrix, nonincreasing.
    pub singular_values: Vec<f64>,
    /// Set when `n` exceeds the numerical rank of the snapshots.
    pub rank_warning: Option<String>,
}

impl PodBasis {
    /// Wraps a basis that did not come from [`pod_basis`].
    pub fn from_matrix(v: DMatrix<f64>) -> Self {
        Self {
            v,
            singular_values: Vec::new(),
            rank_warning: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.v.ncols()
    }

    pub fn num_observed(&self) -> usize {
        self.v.nrows()
    }

    /// Leading `n` columns, keeping the singular values.
    pub fn truncate(&self, n: usize) -> Result<Self> {
        if n > self.dim() {
            return Err(Error::InvalidArgument(format!("cannot truncate a {}-column basis to {n}", self.dim())));
        }
        Ok(Self {
            v: self.v.columns(0, n).into_owned(),
            singular_values: self.singular_values.clone(),
            rank_warning: self.rank_warning.clone(),
        })
    }
}

/// Flips each column so its largest-magnitude entry is positive (ties go to
/// the lowest row index).
fn fix_signs(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        let mut best = 0;
        for i in 1..col.len() {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        if !col.is_empty() && col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

/// Left singular vectors and singular values of `snapshots` (`r x M`).
fn left_singular(snapshots: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let (r, m) = snapshots.shape();
    if r == 0 || m == 0 {
        return (DMatrix::zeros(r, 0), Vec::new());
    }
    if m > r {
        // S^T = Q R  =>  S = R^T Q^T, and R^T (r x r) has the same left
        // singular vectors and singular values as S.
        let qr = QR::new(snapshots.transpose());
        let svd = SVD::new(qr.r().transpose(), true, false);
        (svd.u.expect("requested"), svd.singular_values.as_slice().to_vec())
    } else {
        let svd = SVD::new(snapshots.clone(), true, false);
        (svd.u.expect("requested"), svd.singular_values.as_slice().to_vec())
    }
}

/// POD basis of dimension `n` from the columns of `snapshots`; the raw
/// snapshots are used without centering.
pub fn pod_basis(snapshots: &DMatrix<f64>, n: usize) -> Result<PodBasis> {
    let (r, m) = snapshots.shape();
    if n == 0 || n > r.min(m) {
        return Err(Error::InvalidArgument(format!(
            "basis dimension {n} outside 1..={} for a {r}x{m} snapshot matrix",
            r.min(m)
        )));
    }
    let (u, sv) = left_singular(snapshots);
    let mut v = u.columns(0, n).into_owned();
    fix_signs(&mut v);
    let tol = sv[0] * (r.max(m) as f64) * f64::EPSILON;
    let rank = sv.iter().filter(|s| **s > tol).count();
    let rank_warning = (n > rank).then(|| {
        let msg = format!("basis dimension {n} exceeds numerical rank {rank} of the snapshots");
        log::warn!("{msg}");
        msg
    });
    Ok(PodBasis {
        v,
        singular_values: sv,
        rank_warning,
    })
}

/// Orthonormal basis of the orthogonal complement of the span of the
/// orthonormal columns of `v`, taken from a full Householder QR of `v`.
pub fn orthogonal_complement(v: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, n) = v.shape();
    if n >= r {
        return DMatrix::zeros(r, 0);
    }
    if n == 0 {
        return DMatrix::identity(r, r);
    }
    let qr = QR::new(v.clone());
    let mut qt = DMatrix::identity(r, r);
    qr.q_tr_mul(&mut qt);
    let mut perp = qt.transpose().columns(n, r - n).into_owned();
    fix_signs(&mut perp);
    perp
}

/// The lifted pair `Q = P_o^T V`, `Q_perp = [P_o^T V_perp, (P_o^perp)^T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionPair {
    pub q: DMatrix<f64>,
    pub q_perp: DMatrix<f64>,
}

impl ProjectionPair {
    pub fn state_dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn reduced_dim(&self) -> usize {
        self.q.ncols()
    }

    /// `[Q, Q_perp]`, an `N x N` orthogonal matrix.
    pub fn full(&self) -> DMatrix<f64> {
        let n = self.state_dim();
        let mut m = DMatrix::zeros(n, n);
        m.columns_mut(0, self.q.ncols()).copy_from(&self.q);
        m.columns_mut(self.q.ncols(), self.q_perp.ncols()).copy_from(&self.q_perp);
        m
    }
}

fn lift_rows(sel: &ObservationSelector, m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(sel.state_dim(), m.ncols());
    for (row, &i) in sel.observed().iter().enumerate() {
        out.row_mut(i).copy_from(&m.row(row));
    }
    out
}

/// Builds `(Q, Q_perp)` with a caller-supplied complement `V_perp` of `V`.
pub fn build_projection_pair_with_complement(
    sel: &ObservationSelector,
    v: &DMatrix<f64>,
    v_perp: &DMatrix<f64>,
) -> Result<ProjectionPair> {
    let r = sel.num_observed();
    if v.nrows() != r {
        return Err(Error::dim("basis rows", r, v.nrows()));
    }
    if v_perp.nrows() != r || v_perp.ncols() + v.ncols() != r {
        return Err(Error::dim("complement columns", r - v.ncols().min(r), v_perp.ncols()));
    }
    let q = lift_rows(sel, v);
    let n_perp = sel.state_dim() - v.ncols();
    let mut q_perp = DMatrix::zeros(sel.state_dim(), n_perp);
    q_perp.columns_mut(0, v_perp.ncols()).copy_from(&lift_rows(sel, v_perp));
    for (offset, &i) in sel.complement().iter().enumerate() {
        q_perp[(i, v_perp.ncols() + offset)] = 1.0;
    }
    Ok(ProjectionPair { q, q_perp })
}

/// Builds `(Q, Q_perp)`; the `r - n` lifted complement columns come first,
/// followed by the `N - r` unobserved canonical vectors.
pub fn build_projection_pair(sel: &ObservationSelector, basis: &PodBasis) -> Result<ProjectionPair> {
    build_projection_pair_with_complement(sel, &basis.v, &orthogonal_complement(&basis.v))
}

/// `(Q^T x, Q_perp^T x)`.
pub fn decompose_state(x: &DVector<f64>, pair: &ProjectionPair) -> Result<(DVector<f64>, DVector<f64>)> {
    if x.len() != pair.state_dim() {
        return Err(Error::dim("state vector", pair.state_dim(), x.len()));
    }
    Ok((pair.q.tr_mul(x), pair.q_perp.tr_mul(x)))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::polysys::lift_observation;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn orthonormal_defect(m: &DMatrix<f64>) -> f64 {
        (m.tr_mul(m) - DMatrix::identity(m.ncols(), m.ncols())).norm()
    }

    #[test]
    fn diagonal_snapshots_give_canonical_basis() {
        let s = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0, 1.0]));
        let b = pod_basis(&s, 2).unwrap();
        let expected = DMatrix::identity(3, 3).columns(0, 2).into_owned();
        assert!((b.v - expected).norm() < 1e-14);
        assert_eq!(b.singular_values, vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn pod_is_orthonormal_and_optimal() {
        for (r, m) in [(6, 20), (12, 5), (7, 7)] {
            let s = random_matrix(r, m, 11 + r as u64);
            let full = SVD::new(s.clone(), false, false).singular_values;
            for n in 1..=r.min(m) {
                let b = pod_basis(&s, n).unwrap();
                assert!(orthonormal_defect(&b.v) < 1e-10);
                let resid = (&s - &b.v * b.v.tr_mul(&s)).norm_squared();
                let tail: f64 = full.iter().skip(n).map(|x| x * x).sum();
                assert!((resid - tail).abs() < 1e-10 * s.norm_squared());
            }
        }
    }

    #[test]
    fn pod_sign_rule_and_determinism() {
        let s = random_matrix(8, 30, 5);
        let a = pod_basis(&s, 4).unwrap();
        let b = pod_basis(&s, 4).unwrap();
        assert_eq!(a.v, b.v);
        for col in a.v.column_iter() {
            let idx = col.iamax();
            assert!(col[idx] > 0.0);
        }
    }

    #[test]
    fn pod_rank_handling() {
        let s = DMatrix::from_fn(4, 6, |i, _| if i == 0 { 1.0 } else { 0.0 });
        let b = pod_basis(&s, 2).unwrap();
        assert!(b.rank_warning.is_some());
        assert!(pod_basis(&s, 5).is_err());
        assert!(pod_basis(&s, 0).is_err());
    }

    #[test]
    fn complement_examples() {
        let v = DMatrix::identity(3, 3).columns(0, 2).into_owned();
        let perp = orthogonal_complement(&v);
        assert_eq!(perp.ncols(), 1);
        assert!((perp[(2, 0)].abs() - 1.0).abs() < 1e-14);
        assert_eq!(orthogonal_complement(&DMatrix::identity(3, 3)).ncols(), 0);
        for seed in 0..5 {
            let v = pod_basis(&random_matrix(9, 15, seed), 4).unwrap().v;
            let perp = orthogonal_complement(&v);
            let mut joined = DMatrix::zeros(9, 9);
            joined.columns_mut(0, 4).copy_from(&v);
            joined.columns_mut(4, 5).copy_from(&perp);
            assert!(orthonormal_defect(&joined) < 1e-12);
        }
    }

    #[test]
    fn projection_pair_is_orthogonal() {
        for seed in 0..5 {
            let sel = ObservationSelector::equidistant(15, 0.6).unwrap();
            let basis = pod_basis(&random_matrix(sel.num_observed(), 20, seed), 3).unwrap();
            let pair = build_projection_pair(&sel, &basis).unwrap();
            assert_eq!(pair.q_perp.ncols(), 12);
            assert!(pair.q.tr_mul(&pair.q_perp).norm() < 1e-12);
            assert!(orthonormal_defect(&pair.full()) < 1e-9);
        }
    }

    #[test]
    fn projection_pair_degenerate_cases() {
        let sel = ObservationSelector::all(4);
        let basis = pod_basis(&random_matrix(4, 10, 1), 2).unwrap();
        let pair = build_projection_pair(&sel, &basis).unwrap();
        assert_eq!(pair.q, basis.v);
        assert_eq!(pair.q_perp, orthogonal_complement(&basis.v));
        let full = pod_basis(&random_matrix(4, 10, 2), 4).unwrap();
        assert_eq!(build_projection_pair(&sel, &full).unwrap().q_perp.ncols(), 0);
    }

    #[test]
    fn decompose_examples() {
        let sel = ObservationSelector::new(vec![0, 2, 3, 5], 7).unwrap();
        let basis = pod_basis(&random_matrix(4, 10, 3), 2).unwrap();
        let pair = build_projection_pair(&sel, &basis).unwrap();
        let c = DVector::from_vec(vec![0.7, -1.3]);
        let x = lift_observation(&sel, &(&basis.v * &c));
        let (zt, w) = decompose_state(&x, &pair).unwrap();
        assert!((zt - c).norm() < 1e-12);
        assert!(w.norm() < 1e-12);
        let x = DVector::from_fn(7, |i, _| (i as f64).cos());
        let (zt, w) = decompose_state(&x, &pair).unwrap();
        assert!((&pair.q * zt + &pair.q_perp * w - x).norm() < 1e-10);
    }

    #[test]
    fn projection_error_nonincreasing_in_dimension() {
        let s = random_matrix(10, 25, 8);
        let mut prev = f64::INFINITY;
        for n in 1..=10 {
            let v = pod_basis(&s, n).unwrap().v;
            let e = (&s - &v * v.tr_mul(&s)).norm() / s.norm();
            assert!(e <= prev + 1e-14);
            prev = e;
        }
    }
}
