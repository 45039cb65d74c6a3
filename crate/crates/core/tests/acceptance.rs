//! End-to-end acceptance checks. Each check prints one PASS or FAIL line;
//! the process exits nonzero if any check fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use nonmarkov_opinf::harness::{sweep, ExperimentConfig, InferenceMode, RunOptions, Status};
use nonmarkov_opinf::intrusive::{exact_memory_trajectory, intrusive_markovian, intrusive_nonmarkov};
use nonmarkov_opinf::metrics::{error_difference_series, observation_error, output_error, projection_error};
use nonmarkov_opinf::models::{
    appendix_system, build_chafee_infante, build_convection_diffusion, build_diffusion_reaction, generate_burst_inputs,
    generate_inputs, random_stable_linear, AppendixExample, InputSpec, ReactionForm,
};
use nonmarkov_opinf::opinf::{infer_batch, infer_markovian_from_bursts, infer_stagewise, max_relative_deviation};
use nonmarkov_opinf::polysys::{monomial_count, simulate_full, simulate_observed, unique_kron_power};
use nonmarkov_opinf::projection::{build_projection_pair, pod_basis};
use nonmarkov_opinf::romsim::{reduced_output, simulate_reduced};
use nonmarkov_opinf::sampling::extended_reprojection;
use nonmarkov_opinf::{NonMarkovOps, ObservationSelector, PodBasis, PolynomialSystem, ReducedModel, ReprojectedDataset, Result};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { pass, detail })
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn uniform(low: f64, high: f64, seed: u64) -> InputSpec {
    InputSpec::UniformRandom { low, high, seed }
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

/// One chain of bursts from a zero observation.
fn bursts(
    sys: &PolynomialSystem,
    sel: &ObservationSelector,
    basis: &PodBasis,
    spec: &InputSpec,
    count: usize,
    len: usize,
    dt: f64,
) -> Result<ReprojectedDataset> {
    let inputs = generate_burst_inputs(spec, sys.input_dim(), count, len, dt)?;
    extended_reprojection(sys, sel, basis, &DVector::zeros(sel.num_observed()), &inputs, len)
}

fn observation_basis(sys: &PolynomialSystem, sel: &ObservationSelector, inputs: &DMatrix<f64>, n: usize) -> Result<PodBasis> {
    let steps = inputs.ncols();
    let (z, _) = simulate_observed(sys, sel, &DVector::zeros(sys.state_dim()), inputs, steps)?;
    pod_basis(&z, n)
}

/// N = 30, 60% observed, n = 4, p = 2, L = 10, N_r = 10.
struct LinearCase {
    sys: PolynomialSystem,
    sel: ObservationSelector,
    basis: PodBasis,
    truth: NonMarkovOps,
}

const LAG: usize = 10;

fn linear_case() -> Result<LinearCase> {
    let sys = random_stable_linear(30, 2, 2, 0.9, 21)?;
    let sel = ObservationSelector::equidistant(30, 0.6)?;
    let u = generate_inputs(&uniform(-1.0, 1.0, 3), 2, 300, 1.0)?;
    let basis = observation_basis(&sys, &sel, &u, 4)?;
    let pair = build_projection_pair(&sel, &basis)?;
    let truth = intrusive_nonmarkov(&sys, &pair, LAG)?;
    Ok(LinearCase { sys, sel, basis, truth })
}

fn deviation(learned: &NonMarkovOps, truth: &NonMarkovOps) -> f64 {
    [
        max_relative_deviation(&learned.e, &truth.e, 1e-12),
        max_relative_deviation(&learned.f, &truth.f, 1e-12),
        max_relative_deviation(&learned.g, &truth.g, 1e-12),
        max_relative_deviation(&learned.h, &truth.h, 1e-12),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

fn stagewise_recovery() -> Result<Verdict> {
    let case = linear_case()?;
    let ds = bursts(&case.sys, &case.sel, &case.basis, &uniform(-1.0, 1.0, 4), 10, LAG + 2, 1.0)?;
    let (mk, _, _) = infer_markovian_from_bursts(&ds, 1, 0.0)?;
    let (learned, reports) = infer_stagewise(&ds, &mk, LAG, 0.0)?;
    let dev = deviation(&learned, &case.truth);
    let worst_residual = reports
        .iter()
        .map(|r| r.state.residual_norm.max(r.output.residual_norm))
        .fold(0.0, f64::max);
    let full_rank = reports.iter().all(|r| r.state.rank == 6 && !r.state.min_norm_used);
    verdict(
        dev <= 1e-6 && worst_residual <= 1e-8 && full_rank,
        format!("max relative operator error {dev:.2e} (<= 1e-6), max stage residual {worst_residual:.2e} (<= 1e-8), full rank {full_rank}"),
    )
}

fn batch_recovery() -> Result<Verdict> {
    let case = linear_case()?;
    let ds = bursts(&case.sys, &case.sel, &case.basis, &uniform(-1.0, 1.0, 5), 10, LAG + 2, 1.0)?;
    let (mk, _, _) = infer_markovian_from_bursts(&ds, 1, 0.0)?;
    let (learned, state, _) = infer_batch(&ds, &mk, LAG, 0.0)?;
    let dev = deviation(&learned, &case.truth);
    let full_rank = state.rank == 6 * LAG && !state.min_norm_used;
    verdict(
        dev <= 1e-6 && full_rank,
        format!("max relative operator error {dev:.2e} (<= 1e-6), design rank {} of {}", state.rank, 6 * LAG),
    )
}

fn markovian_recovery() -> Result<Verdict> {
    let build = build_diffusion_reaction(4, 1e-3, 1.25, ReactionForm::Cubic)?;
    let sys = &build.system;
    let sel = ObservationSelector::equidistant(16, 0.6)?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let basis = pod_basis(&gaussian(sel.num_observed(), 40, &mut rng), 3)?;
    // many short chains from random observations give well spread monomials
    let mut parts = Vec::new();
    for _ in 0..60 {
        let z0 = gaussian(sel.num_observed(), 1, &mut rng).column(0).into_owned();
        let u = DMatrix::from_fn(2, 2, |row, _| if row == 0 { rng.random_range(-3.0..3.0) } else { 1.0 });
        parts.push(extended_reprojection(sys, &sel, &basis, &z0, &[u], 2)?);
    }
    let ds = ReprojectedDataset::merge(parts)?;
    let (learned, state, _) = infer_markovian_from_bursts(&ds, 3, 0.0)?;
    let pair = build_projection_pair(&sel, &basis)?;
    let truth = intrusive_markovian(sys, &pair.q)?;
    let dev_a = max_relative_deviation(&learned.a, &truth.a, 1e-12);
    let dev_b = max_relative_deviation(std::slice::from_ref(&learned.b), std::slice::from_ref(&truth.b), 1e-12);
    let cols = (1..=3).map(|j| monomial_count(3, j)).sum::<usize>() + 2;
    verdict(
        dev_a <= 1e-7 && dev_b <= 1e-7 && state.rank == cols,
        format!("A_j error {dev_a:.2e}, B error {dev_b:.2e} (<= 1e-7), design rank {} of {cols}", state.rank),
    )
}

fn lag_equality() -> Result<Verdict> {
    let dt = 1e-5;
    let build = build_convection_diffusion(30, 8, dt)?;
    let sys = &build.system;
    let basis_steps = 50_000;
    let basis_input = InputSpec::SinusoidBank {
        frequencies: vec![2.0, 4.0, 6.0, 8.0, 10.0],
        amplitude: 1.0,
        offset: 0.0,
    };
    let ub = generate_inputs(&basis_input, 5, basis_steps, dt)?;
    let test = InputSpec::ExpSinusoid {
        frequencies: vec![1.75, 3.5, 5.25, 7.0, 8.75],
        growth: 1.0,
    };
    let lag = 100;
    let steps = lag + 1;
    let ut = generate_inputs(&test, 5, steps, dt)?;
    let mut worst = 0.0f64;
    let mut cells = Vec::new();
    for fraction in [0.2, 0.8] {
        let sel = build.selector(fraction)?;
        let (snap, _) = simulate_observed(sys, &sel, &DVector::zeros(240), &ub, basis_steps)?;
        let (zt, _) = simulate_observed(sys, &sel, &DVector::zeros(240), &ut, steps)?;
        for n in [4, 8] {
            let basis = pod_basis(&snap, n)?;
            let ds = bursts(sys, &sel, &basis, &uniform(0.0, 2.0, 6), 25, lag + 2, dt)?;
            let (mk, _, _) = infer_markovian_from_bursts(&ds, 1, 0.0)?;
            let (memory, _) = infer_stagewise(&ds, &mk, lag, 0.0)?;
            let model = ReducedModel::new(mk, memory)?;
            let z = simulate_reduced(&model, &basis.v.tr_mul(&zt.column(0)), &ut, steps)?;
            let stage = observation_error(&zt, &z, &basis.v)?;
            let proj = projection_error(&zt, &basis.v)?;
            let gap = (stage - proj).abs();
            worst = worst.max(gap);
            cells.push(format!("{:.0}%/n={n}: {gap:.1e}", fraction * 100.0));
        }
    }
    verdict(worst <= 1e-8, format!("|stagewise - projection| {} (<= 1e-8)", cells.join(", ")))
}

fn memory_decay() -> Result<Verdict> {
    let dt = 1e-5;
    let build = build_convection_diffusion(30, 8, dt)?;
    let steps = 50_000;
    let basis_input = InputSpec::SinusoidBank {
        frequencies: vec![2.0, 4.0, 6.0, 8.0, 10.0],
        amplitude: 1.0,
        offset: 0.0,
    };
    let u = generate_inputs(&basis_input, 5, steps, dt)?;
    let mut ratios = Vec::new();
    for fraction in [0.2, 0.4, 0.6, 0.8] {
        let sel = build.selector(fraction)?;
        let basis = observation_basis(&build.system, &sel, &u, 10)?;
        let pair = build_projection_pair(&sel, &basis)?;
        let nm = intrusive_nonmarkov(&build.system, &pair, 100)?;
        ratios.push((fraction, spectral_norm(&nm.e[99]) / spectral_norm(&nm.e[0])));
    }
    let pass = ratios.iter().all(|(_, r)| *r <= 0.1);
    let detail = ratios
        .iter()
        .map(|(f, r)| format!("{:.0}%: {r:.3}", f * 100.0))
        .collect::<Vec<_>>()
        .join(", ");
    verdict(pass, format!("||E_100|| / ||E_1|| {detail} (<= 0.1 each)"))
}

fn chafee_improvement() -> Result<Verdict> {
    let dt = 1e-5;
    let build = build_chafee_infante(128, dt)?;
    let sys = &build.system;
    let sel = build.selector(0.6)?;
    let steps = 50_000;
    let ub = generate_inputs(&uniform(0.0, 10.0, 1), 1, steps, dt)?;
    let basis = observation_basis(sys, &sel, &ub, 10)?;
    let mut parts = Vec::new();
    for i in 0..30u64 {
        let spec = if i < 15 {
            InputSpec::CosineRandomTrain {
                amplitude: 10.0,
                omega: 50.0 * PI,
                seed: 100 + i,
            }
        } else {
            uniform(0.0, 10.0, 100 + i)
        };
        parts.push(bursts(sys, &sel, &basis, &spec, 20, 100, dt)?);
    }
    let ds = ReprojectedDataset::merge(parts)?;
    let (mk, _, _) = infer_markovian_from_bursts(&ds, 3, 0.0)?;
    let (stage, _) = infer_stagewise(&ds.truncated(62)?, &mk, 60, 0.0)?;
    let (batch, _, _) = infer_batch(&ds, &mk, 60, 0.0)?;
    let test = InputSpec::SinusoidBank {
        frequencies: vec![PI],
        amplitude: 5.0,
        offset: 1.0,
    };
    let ut = generate_inputs(&test, 1, steps, dt)?;
    let (_, y) = simulate_full(sys, &DVector::zeros(128), &ut, steps)?;
    let error = |memory: NonMarkovOps| -> Result<Option<f64>> {
        let model = ReducedModel::new(mk.clone(), memory)?;
        match simulate_reduced(&model, &DVector::zeros(10), &ut, steps) {
            Ok(z) => {
                let yt = reduced_output(&model, &z, &ut)?;
                Ok(yt.iter().all(|v| v.is_finite()).then(|| output_error(&y, &yt)).transpose()?)
            }
            Err(e) if e.is_divergence() => Ok(None),
            Err(e) => Err(e),
        }
    };
    let markov = error(NonMarkovOps::empty())?;
    let stage = error(stage)?;
    let batch = error(batch)?;
    let show = |e: Option<f64>| e.map_or("diverged".to_string(), |v| format!("{v:.3e}"));
    let best = [stage, batch].into_iter().flatten().fold(f64::INFINITY, f64::min);
    let pass = markov.is_some_and(|m| best <= m / 5.0);
    verdict(
        pass,
        format!(
            "output error Markovian {}, stagewise {}, batch {} (needs <= Markovian / 5)",
            show(markov),
            show(stage),
            show(batch)
        ),
    )
}

fn counterexample() -> Result<Verdict> {
    let case = appendix_system(AppendixExample::Example1)?;
    let series = error_difference_series(&case.system, &case.selector, &case.v, Some(&case.v_perp), &case.z0, 50, 1)?;
    let (k, min) = series
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (k, v)| if v < acc.1 { (k, v) } else { acc });
    verdict(min < 0.0, format!("minimum error difference {min:.3e} at k = {k} (needs < 0)"))
}

fn brute_force_kron(x: &[f64], j: usize) -> Vec<(Vec<usize>, f64)> {
    let n = x.len();
    let mut out = Vec::new();
    for flat in 0..n.pow(j as u32) {
        let mut idx = Vec::with_capacity(j);
        let mut rest = flat;
        for _ in 0..j {
            idx.push(rest % n);
            rest /= n;
        }
        idx.reverse();
        let value = idx.iter().map(|&i| x[i]).product();
        out.push((idx, value));
    }
    out
}

fn property_suites() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut failures = Vec::new();

    // distinct monomials agree with the full Kronecker power
    let mut kron_ok = true;
    for n in 1..=5 {
        for j in 1..=4 {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let unique = unique_kron_power(&DVector::from_vec(x.clone()), j);
            kron_ok &= unique.len() == monomial_count(n, j);
            let mut sorted: Vec<(Vec<usize>, f64)> = brute_force_kron(&x, j)
                .into_iter()
                .filter(|(idx, _)| idx.windows(2).all(|w| w[0] <= w[1]))
                .collect();
            sorted.sort_by(|a, b| a.0.cmp(&b.0));
            kron_ok &= sorted.len() == unique.len();
            for ((_, v), u) in sorted.iter().zip(unique.iter()) {
                kron_ok &= (v - u).abs() <= 1e-12 * v.abs().max(1.0);
            }
        }
    }
    if !kron_ok {
        failures.push("kronecker");
    }

    // [Q, Q_perp] orthogonal; exact memory equals projected full dynamics
    let mut orth = 0.0f64;
    let mut memory_gap = 0.0f64;
    for seed in 0..5 {
        let sys = random_stable_linear(14, 2, 1, 0.9, seed)?;
        let sel = ObservationSelector::equidistant(14, 0.5)?;
        let basis = pod_basis(&gaussian(sel.num_observed(), 30, &mut rng), 3)?;
        let pair = build_projection_pair(&sel, &basis)?;
        let full = pair.full();
        orth = orth.max((full.tr_mul(&full) - DMatrix::identity(14, 14)).amax());
        let z0 = gaussian(3, 1, &mut rng).column(0).into_owned();
        let u = gaussian(2, 25, &mut rng);
        let (z, y) = exact_memory_trajectory(&sys, &pair, &z0, &u, 25)?;
        let (x, yf) = simulate_full(&sys, &(&pair.q * &z0), &u, 25)?;
        let projected = pair.q.tr_mul(&x);
        memory_gap = memory_gap.max((projected - z).amax()).max((yf - y).amax());
    }
    if orth > 1e-12 {
        failures.push("orthogonality");
    }
    if memory_gap > 1e-9 {
        failures.push("exact memory");
    }

    // ring buffer against a full-history loop, bit for bit
    let case = linear_case()?;
    let pair = build_projection_pair(&case.sel, &case.basis)?;
    let model = ReducedModel::new(intrusive_markovian(&case.sys, &pair.q)?, case.truth.clone())?;
    let z0 = gaussian(4, 1, &mut rng).column(0).into_owned();
    let u = gaussian(2, 60, &mut rng);
    let ring = simulate_reduced(&model, &z0, &u, 60)?;
    let mut history = vec![z0.clone()];
    for k in 0..60 {
        let mut next = model.markov.step(&history[k], &u.column(k).into_owned());
        for l in 1..=LAG.min(k) {
            next.gemv(1.0, &model.memory.e[l - 1], &history[k - l], 1.0);
            next.gemv(1.0, &model.memory.f[l - 1], &u.column(k - l), 1.0);
        }
        history.push(next);
    }
    let bit_exact = history.iter().enumerate().all(|(k, h)| ring.column(k) == *h);
    if !bit_exact {
        failures.push("ring buffer");
    }

    // metrics are invariant under a common rescaling
    let z = gaussian(6, 20, &mut rng);
    let zt = gaussian(3, 20, &mut rng);
    let v = pod_basis(&gaussian(6, 10, &mut rng), 3)?.v;
    let mut scale_gap = 0.0f64;
    for c in [1e-3, 7.5, 1e4] {
        let a = observation_error(&z, &zt, &v)?;
        let b = observation_error(&(&z * c), &(&zt * c), &v)?;
        let p = projection_error(&z, &v)?;
        let q = projection_error(&(&z * c), &v)?;
        let o = output_error(&z, &(&z + &z * 0.1))?;
        let r = output_error(&(&z * c), &((&z + &z * 0.1) * c))?;
        scale_gap = scale_gap.max(((a - b) / a).abs()).max(((p - q) / p).abs()).max(((o - r) / o).abs());
    }
    if scale_gap > 1e-12 {
        failures.push("scale invariance");
    }

    // a rerun of the same experiment reproduces the results table
    let cfg = ExperimentConfig::from_toml(DETERMINISM)?;
    let dir = std::env::temp_dir().join(format!("nonmarkov-acceptance-{}", std::process::id()));
    let run = |sub: &str, threads: usize| {
        sweep(
            cfg.clone(),
            &RunOptions {
                out_dir: Some(dir.join(sub)),
                threads,
            },
        )
    };
    run("a", 1)?;
    run("b", 2)?;
    let same = std::fs::read(dir.join("a/results.csv"))? == std::fs::read(dir.join("b/results.csv"))?;
    let _ = std::fs::remove_dir_all(&dir);
    if !same {
        failures.push("determinism");
    }

    verdict(
        failures.is_empty(),
        format!(
            "kronecker {kron_ok}, orthogonality {orth:.1e}, exact memory {memory_gap:.1e}, ring buffer bit-exact {bit_exact}, \
             scale {scale_gap:.1e}, rerun identical {same}{}",
            if failures.is_empty() { String::new() } else { format!("; failed: {}", failures.join(", ")) }
        ),
    )
}

const DETERMINISM: &str = r#"
name = "determinism"
seed = 5
metrics = ["projection_error", "observation_error", "output_error"]
artifacts = false

[model]
kind = "random-linear"
state_dim = 16
inputs = 2
outputs = 1
radius = 0.9
seed = 9

[observation]
fractions = [0.5, 0.75]

[reduction]
dims = [3, 4]
lags = [0, 3]
modes = ["markovian", "stagewise", "batch"]

[basis]
steps = 80
input = { kind = "uniform-random", low = -1.0, high = 1.0, seed = 1 }

[sampling]
burst_lens = [5, 10]
bursts_per_chain = 4
chains = [{ input = { kind = "uniform-random", low = 0.0, high = 2.0, seed = 2 }, count = 3 }]

[test]
steps = 30
input = { kind = "exp-sinusoid", frequencies = [0.1, 0.2], growth = 0.01 }
"#;

const DIFFUSION_REACTION: &str = r#"
name = "diffusion-reaction-scaled"
seed = 2024
artifacts = false
metrics = ["projection_error", "observation_error"]

[model]
kind = "diffusion-reaction"
nx = 16
dt = 5e-4
train_mu = [1.0, 1.1666666666666667, 1.3333333333333333, 1.5]
test_mu = [1.1, 1.25, 1.4]

[observation]
fractions = [0.4, 0.8]

[reduction]
dims = [4, 8]
lags = [10]
modes = ["stagewise", "batch"]

[basis]
steps = 2000
input = { kind = "uniform-random", low = -3.0, high = 996.0, seed = 1 }

[sampling]
burst_lens = [12, 60]
bursts_per_chain = 5
chains = [{ input = { kind = "uniform-random", low = -3.0, high = 996.0, seed = 2 }, count = 20 }]

[test]
steps = 1000
input = { kind = "uniform-random", low = -3.0, high = 996.0, seed = 3 }
"#;

fn batch_beats_stagewise() -> Result<Verdict> {
    let cfg = ExperimentConfig::from_toml(DIFFUSION_REACTION)?;
    let out = sweep(cfg, &RunOptions { out_dir: None, threads: 1 })?;
    let value = |r: &nonmarkov_opinf::harness::ResultRow| (r.status == Status::Ok).then_some(r.value);
    let mut cells = Vec::new();
    let mut any = false;
    for fraction in [0.4, 0.8] {
        for n in [4, 8] {
            let find = |mode: InferenceMode, k_r: usize| {
                out.rows
                    .iter()
                    .find(|r| r.fraction == fraction && r.n == n && r.mode == mode && r.k_r == k_r && r.metric == "observation_error")
                    .and_then(value)
            };
            let stage = find(InferenceMode::Stagewise, 12);
            let batch = find(InferenceMode::Batch, 60);
            if let (Some(s), Some(b)) = (stage, batch) {
                any |= b <= s;
            }
            let show = |e: Option<f64>| e.map_or("diverged".to_string(), |v| format!("{v:.3e}"));
            cells.push(format!("{:.0}%/n={n}: stage {} batch {}", fraction * 100.0, show(stage), show(batch)));
        }
    }
    verdict(any, format!("observation error, batch K_r=60 vs stagewise K_r=12: {}", cells.join("; ")))
}

type Check = fn() -> Result<Verdict>;

fn main() -> ExitCode {
    let checks: [(&str, Check, Duration); 9] = [
        ("stagewise-recovery", stagewise_recovery, Duration::from_secs(5)),
        ("batch-recovery", batch_recovery, Duration::from_secs(5)),
        ("markovian-recovery", markovian_recovery, Duration::from_secs(120)),
        ("maximal-lag-equality", lag_equality, Duration::from_secs(120)),
        ("memory-decay", memory_decay, Duration::from_secs(120)),
        ("chafee-infante-improvement", chafee_improvement, Duration::from_secs(120)),
        ("markovian-can-be-better", counterexample, Duration::from_secs(1)),
        ("property-suites", property_suites, Duration::from_secs(120)),
        ("diffusion-reaction-batch-vs-stagewise", batch_beats_stagewise, Duration::from_secs(120)),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check, budget) in checks {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(v) => (v.pass && elapsed <= budget, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} {name}: {detail}; {:.2} s (budget {} s)",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {failed} failed");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
