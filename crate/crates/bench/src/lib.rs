//! Fixtures shared by the benchmarks.

use nalgebra::DMatrix;
use nonmarkov_opinf::models::{build_chafee_infante, generate_burst_inputs, random_stable_linear, InputSpec};
use nonmarkov_opinf::opinf::infer_markovian_from_bursts;
use nonmarkov_opinf::projection::pod_basis;
use nonmarkov_opinf::sampling::extended_reprojection;
use nonmarkov_opinf::{MarkovOps, ObservationSelector, PodBasis, PolynomialSystem, ReprojectedDataset, Result};

/// Linear system with bursts and a Markovian fit, ready for memory inference.
pub struct LinearFixture {
    pub system: PolynomialSystem,
    pub selector: ObservationSelector,
    pub basis: PodBasis,
    pub data: ReprojectedDataset,
    pub markov: MarkovOps,
}

pub fn linear_fixture(state_dim: usize, n: usize, bursts: usize, burst_len: usize) -> Result<LinearFixture> {
    let system = random_stable_linear(state_dim, 2, 1, 0.9, 5)?;
    let selector = ObservationSelector::equidistant(state_dim, 0.6)?;
    let r = selector.num_observed();
    let snapshots = DMatrix::from_fn(r, 4 * r, |i, j| ((i * 7 + j * 3) as f64).sin());
    let basis = pod_basis(&snapshots, n)?;
    let spec = InputSpec::UniformRandom {
        low: -1.0,
        high: 1.0,
        seed: 1,
    };
    let inputs = generate_burst_inputs(&spec, 2, bursts, burst_len, 1.0)?;
    let z0 = nalgebra::DVector::zeros(r);
    let data = extended_reprojection(&system, &selector, &basis, &z0, &inputs, burst_len)?;
    let (markov, _, _) = infer_markovian_from_bursts(&data, 1, 0.0)?;
    Ok(LinearFixture {
        system,
        selector,
        basis,
        data,
        markov,
    })
}

pub fn chafee(nx: usize) -> Result<PolynomialSystem> {
    Ok(build_chafee_infante(nx, 1e-5)?.system)
}
