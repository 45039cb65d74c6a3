use nalgebra::{DMatrix, DVector, SymmetricEigen, QR};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::polysys::{ObservationSelector, PolynomialSystem};
use crate::projection::{build_projection_pair_with_complement, orthogonal_complement};

#[rustfmt::skip]
const EXAMPLE1_A: [f64; 100] = [
    0.3603, 0.0184, -0.2192, 0.0435, -0.1624, -0.0602, 0.0758, -0.0872, 0.0634, -0.0252,
    0.0184, 0.2907, -0.1049, 0.1334, 0.0087, 0.0951, -0.0594, -0.0602, -0.0717, 0.1366,
    -0.2192, -0.1049, 0.2978, -0.1695, 0.0887, 0.0648, -0.0924, 0.0624, -0.0213, 0.0079,
    0.0435, 0.1334, -0.1695, 0.3700, 0.0529, -0.0074, 0.1284, 0.0196, -0.0115, 0.0273,
    -0.1624, 0.0087, 0.0887, 0.0529, 0.4582, 0.0913, 0.1194, -0.0375, 0.0449, 0.1615,
    -0.0602, 0.0951, 0.0648, -0.0074, 0.0913, 0.4311, -0.0781, -0.0263, 0.2070, 0.1714,
    0.0758, -0.0594, -0.0924, 0.1284, 0.1194, -0.0781, 0.3804, 0.0296, 0.1548, -0.1197,
    -0.0872, -0.0602, 0.0624, 0.0196, -0.0375, -0.0263, 0.0296, 0.3470, 0.1123, -0.1761,
    0.0634, -0.0717, -0.0213, -0.0115, 0.0449, 0.2070, 0.1548, 0.1123, 0.5707, -0.1059,
    -0.0252, 0.1366, 0.0079, 0.0273, 0.1615, 0.1714, -0.1197, -0.1761, -0.1059, 0.3255,
];

#[rustfmt::skip]
const EXAMPLE1_V: [f64; 6] = [
    -0.9889, 0.0294,
    0.0767, -0.7374,
    -0.1269, -0.6748,
];

const EXAMPLE1_V_PERP: [f64; 3] = [-0.1453, -0.6710, 0.7270];
const EXAMPLE1_X0: [f64; 10] = [-0.5960, 0.0, 0.0, 0.0, 0.0, 1.0333, 0.0, 0.0, 0.0, 0.8346];
const EXAMPLE1_OBSERVED: [usize; 3] = [0, 5, 9];

/// Which symmetric positive definite counterexample to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AppendixExample {
    /// The printed `N = 10`, `n = 2` instance with three observed components.
    Example1,
    /// `N = 50`, `n = 40`, 95% observed, drawn with a fixed seed.
    Example2,
    /// The random recipe with `N = 10`, `n = 2`, 30% observed.
    Random(u64),
}

/// An autonomous linear system with observation, basis and initial state.
#[derive(Debug, Clone)]
pub struct AppendixCase {
    pub system: PolynomialSystem,
    pub selector: ObservationSelector,
    /// `r x n`
    pub v: DMatrix<f64>,
    /// `r x (r - n)`
    pub v_perp: DMatrix<f64>,
    /// Reduced initial state `z0`.
    pub z0: DVector<f64>,
    /// Full initial state `Q z0`.
    pub x0: DVector<f64>,
}

const EXAMPLE2_SEED: u64 = 2;

pub fn appendix_system(which: AppendixExample) -> Result<AppendixCase> {
    match which {
        AppendixExample::Example1 => example1(),
        AppendixExample::Example2 => random_case(50, 40, 0.95, EXAMPLE2_SEED),
        AppendixExample::Random(seed) => random_case(10, 2, 0.3, seed),
    }
}

fn example1() -> Result<AppendixCase> {
    let a = DMatrix::from_row_slice(10, 10, &EXAMPLE1_A);
    let system = PolynomialSystem::linear(a, DMatrix::zeros(10, 0), DMatrix::zeros(0, 10))?;
    let selector = ObservationSelector::new(EXAMPLE1_OBSERVED.to_vec(), 10)?;
    let v = DMatrix::from_row_slice(3, 2, &EXAMPLE1_V);
    let v_perp = DMatrix::from_column_slice(3, 1, &EXAMPLE1_V_PERP);
    let printed = DVector::from_column_slice(&EXAMPLE1_X0);
    let observed = DVector::from_iterator(3, EXAMPLE1_OBSERVED.iter().map(|&i| printed[i]));
    let z0 = v.tr_mul(&observed);
    let pair = build_projection_pair_with_complement(&selector, &v, &v_perp)?;
    let x0 = &pair.q * &z0;
    Ok(AppendixCase {
        system,
        selector,
        v,
        v_perp,
        z0,
        x0,
    })
}

fn random_case(big: usize, n: usize, fraction: f64, seed: u64) -> Result<AppendixCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = DMatrix::from_fn(big, big, |_, _| rng.random_range(0.0..10.0));
    let eig = SymmetricEigen::new((&r + r.transpose()) * 0.5);
    let lambda = DVector::from_fn(big, |_, _| loop {
        let x: f64 = rng.random();
        if x > 0.0 {
            break x;
        }
    });
    let vecs = eig.eigenvectors;
    let a = &vecs * DMatrix::from_diagonal(&lambda) * vecs.transpose();
    let a = (&a + a.transpose()) * 0.5;
    let system = PolynomialSystem::linear(a, DMatrix::zeros(big, 0), DMatrix::zeros(0, big))?;
    let selector = ObservationSelector::equidistant(big, fraction)?;
    let rows = selector.num_observed();
    let g = DMatrix::from_fn(rows, n, |_, _| StandardNormal.sample(&mut rng));
    let v = QR::new(g).q();
    let v_perp = orthogonal_complement(&v);
    let z0 = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    let pair = build_projection_pair_with_complement(&selector, &v, &v_perp)?;
    let x0 = &pair.q * &z0;
    Ok(AppendixCase {
        system,
        selector,
        v,
        v_perp,
        z0,
        x0,
    })
}
