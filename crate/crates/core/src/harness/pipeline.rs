use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use super::config::{derive_seed, ExperimentConfig, InferenceMode, ModelSpec};
use crate::error::{Error, Result};
use crate::intrusive::{intrusive_markovian, intrusive_nonmarkov};
use crate::io;
use crate::metrics::{observation_error, output_error, parametric_error, projection_error, ErrorReport, MetricKind};
use crate::models::{
    build_chafee_infante, build_convection_diffusion, build_diffusion_reaction, generate_burst_inputs, generate_inputs,
    random_stable_linear, InputSpec, ModelBuild,
};
use crate::opinf::{infer_batch, infer_markovian_from_bursts, infer_stagewise, max_relative_deviation, MarkovOps, NonMarkovOps};
use crate::polysys::{simulate_observed, ObservationSelector};
use crate::projection::{build_projection_pair, pod_basis, PodBasis};
use crate::romsim::{interpolate_operators, reduced_output, simulate_reduced, ReducedModel};
use crate::sampling::{extended_reprojection, ReprojectedDataset};

const TAG_BASIS: u64 = 1;
const TAG_TRAIN: u64 = 2;
const TAG_TEST: u64 = 3;

/// Rows of one cell and the error that stopped it, if any.
type CellResult = (Vec<ResultRow>, Option<Error>);

/// Largest deviation from the intrusive operators still reported as recovered.
pub const RECOVERY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Divergent,
    Error,
    Pass,
    Fail,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Ok => "ok",
            Status::Divergent => "divergent",
            Status::Error => "error",
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
        })
    }
}

/// One line of the long-format results table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub model: String,
    pub fraction: f64,
    pub n: usize,
    pub lag: usize,
    pub mode: InferenceMode,
    pub n_r: usize,
    pub k_r: usize,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
    pub status: Status,
}

pub const RESULTS_HEADER: &str = "model,fraction,n,L,mode,N_r,K_r,seed,metric,value,status";

impl ResultRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{:.16e},{}",
            self.model, self.fraction, self.n, self.lag, self.mode, self.n_r, self.k_r, self.seed, self.metric, self.value, self.status
        )
    }
}

pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides the config's output directory.
    pub out_dir: Option<PathBuf>,
    /// Worker threads for sweep cells; 0 means one.
    pub threads: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub rows: Vec<ResultRow>,
    pub out_dir: Option<PathBuf>,
    pub config_hash: String,
}

impl RunOutcome {
    pub fn find(&self, mode: InferenceMode, lag: usize, metric: &str) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.mode == mode && r.lag == lag && r.metric == metric)
    }
}

/// One full model of the experiment, at a parameter value if parametric.
#[derive(Debug, Clone)]
pub struct Instance {
    pub mu: Option<f64>,
    pub build: ModelBuild,
}

/// Full-model test data seen through one selector.
#[derive(Debug, Clone)]
pub struct TestData {
    pub observed: DMatrix<f64>,
    pub outputs: DMatrix<f64>,
    pub inputs: DMatrix<f64>,
}

/// Training and test full models of a model spec. Only the parametric
/// family has distinct test models.
pub fn build_instances(spec: &ModelSpec) -> Result<(Vec<Instance>, Vec<Instance>)> {
    let single = |build: ModelBuild| vec![Instance { mu: None, build }];
    Ok(match spec {
        ModelSpec::ChafeeInfante { nx, dt } => {
            let b = build_chafee_infante(*nx, *dt)?;
            (single(b.clone()), single(b))
        }
        ModelSpec::ConvectionDiffusion { nx, ny, dt } => {
            let b = build_convection_diffusion(*nx, *ny, *dt)?;
            (single(b.clone()), single(b))
        }
        ModelSpec::RandomLinear {
            state_dim,
            inputs,
            outputs,
            radius,
            seed,
            dt,
        } => {
            let system = random_stable_linear(*state_dim, *inputs, *outputs, *radius, *seed)?;
            let b = ModelBuild {
                system,
                dt: *dt,
                stability_warning: None,
            };
            (single(b.clone()), single(b))
        }
        ModelSpec::DiffusionReaction {
            nx,
            dt,
            form,
            train_mu,
            test_mu,
        } => {
            let make = |mus: &[f64]| -> Result<Vec<Instance>> {
                mus.iter()
                    .map(|&mu| {
                        Ok(Instance {
                            mu: Some(mu),
                            build: build_diffusion_reaction(*nx, *dt, mu, *form)?,
                        })
                    })
                    .collect()
            };
            (make(train_mu)?, make(test_mu)?)
        }
    })
}

/// A validated config with its full models built.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub cfg: ExperimentConfig,
    pub train: Vec<Instance>,
    pub test: Vec<Instance>,
    config_hash: String,
}

impl Experiment {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let config_hash = cfg.hash()?;
        let (train, test) = build_instances(&cfg.model)?;
        let sys = &train[0].build.system;
        if cfg.reduction.modes.contains(&InferenceMode::IntrusiveOracle) && !sys.is_linear() {
            return Err(Error::Config("intrusive-oracle mode requires a linear model".into()));
        }
        if cfg.metrics.contains(&MetricKind::Output) && sys.output_dim() == 0 {
            return Err(Error::Config("output_error requested but the model has no outputs".into()));
        }
        let user = sys.input_dim() - usize::from(matches!(cfg.model, ModelSpec::DiffusionReaction { .. }));
        for spec in [&cfg.basis.input, &cfg.test.input].into_iter().chain(cfg.sampling.chains.iter().map(|c| &c.input)) {
            if let Some(ch) = spec.channels() {
                if ch != user {
                    return Err(Error::Config(format!("input spec has {ch} channels, the model takes {user}")));
                }
            }
        }
        Ok(Self {
            cfg,
            train,
            test,
            config_hash,
        })
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn dt(&self) -> f64 {
        self.train[0].build.dt
    }

    pub fn state_dim(&self) -> usize {
        self.train[0].build.system.state_dim()
    }

    pub fn is_parametric(&self) -> bool {
        self.train[0].mu.is_some()
    }

    /// Channels described by input specs; the diffusion-reaction constant
    /// channel is not among them.
    fn user_channels(&self) -> usize {
        self.train[0].build.system.input_dim() - usize::from(self.is_parametric())
    }

    fn to_system_inputs(&self, user: DMatrix<f64>) -> DMatrix<f64> {
        if self.is_parametric() {
            let rows = user.nrows();
            user.insert_row(rows, 1.0)
        } else {
            user
        }
    }

    fn stream(&self, spec: &InputSpec, tag: u64, index: u64) -> InputSpec {
        match spec.seed() {
            Some(s) => spec.with_seed(derive_seed(derive_seed(self.cfg.seed, tag, s), tag, index)),
            None => spec.clone(),
        }
    }

    /// Bursts per training model.
    pub fn num_bursts(&self) -> usize {
        self.cfg.sampling.bursts_per_chain * self.cfg.sampling.chains.iter().map(|c| c.count).sum::<usize>()
    }

    pub fn selector(&self, fraction: f64) -> Result<ObservationSelector> {
        ObservationSelector::equidistant(self.state_dim(), fraction)
    }

    /// POD basis of the largest requested dimension from observation
    /// snapshots of every training model under the basis input.
    pub fn basis(&self, sel: &ObservationSelector) -> Result<PodBasis> {
        let steps = self.cfg.basis.steps;
        let mut snaps = DMatrix::zeros(sel.num_observed(), self.train.len() * (steps + 1));
        for (m, inst) in self.train.iter().enumerate() {
            let spec = self.stream(&self.cfg.basis.input, TAG_BASIS, m as u64);
            let u = self.to_system_inputs(generate_inputs(&spec, self.user_channels(), steps, self.dt())?);
            let x0 = DVector::zeros(self.state_dim());
            let (z, _) = simulate_observed(&inst.build.system, sel, &x0, &u, steps)?;
            snaps.columns_mut(m * (steps + 1), steps + 1).copy_from(&z);
        }
        let n = self.cfg.max_dim();
        if n > snaps.nrows().min(snaps.ncols()) {
            return Err(Error::Config(format!(
                "reduced dimension {n} exceeds the {} observed components or the snapshot count",
                snaps.nrows()
            )));
        }
        let basis = pod_basis(&snaps, n)?;
        if let Some(w) = &basis.rank_warning {
            log::warn!("{w}");
        }
        Ok(basis)
    }

    /// Extended re-projection data for training model `m`, one chain per
    /// input realization, merged in realization order.
    pub fn sample(&self, m: usize, sel: &ObservationSelector, basis: &PodBasis) -> Result<ReprojectedDataset> {
        let s = &self.cfg.sampling;
        let kr = self.cfg.max_burst_len();
        let total: usize = s.chains.iter().map(|c| c.count).sum();
        let mut parts = Vec::with_capacity(total);
        let mut ordinal = 0u64;
        for chain in &s.chains {
            for _ in 0..chain.count {
                let index = m as u64 * total as u64 + ordinal;
                ordinal += 1;
                let spec = self.stream(&chain.input, TAG_TRAIN, index);
                let inputs = generate_burst_inputs(&spec, self.user_channels(), s.bursts_per_chain, kr, self.dt())?
                    .into_iter()
                    .map(|u| self.to_system_inputs(u))
                    .collect::<Vec<_>>();
                let z0 = DVector::zeros(sel.num_observed());
                parts.push(extended_reprojection(&self.train[m].build.system, sel, basis, &z0, &inputs, kr)?);
            }
        }
        ReprojectedDataset::merge(parts)
    }

    pub fn markov(&self, ds: &ReprojectedDataset) -> Result<MarkovOps> {
        let degree = self.train[0].build.system.active_degree();
        let (ops, report, _) = infer_markovian_from_bursts(ds, degree, self.cfg.reduction.ridge)?;
        if report.min_norm_used {
            log::warn!(
                "Markovian data matrix has rank {} of {}; using the minimum-norm solution",
                report.rank,
                ops.a.iter().map(|a| a.ncols()).sum::<usize>() + ops.input_dim()
            );
        }
        Ok(ops)
    }

    /// Reduced model for one cell and training model `m`.
    #[allow(clippy::too_many_arguments)]
    pub fn infer(
        &self,
        mode: InferenceMode,
        m: usize,
        ds: &ReprojectedDataset,
        mk: &MarkovOps,
        sel: &ObservationSelector,
        basis: &PodBasis,
        lag: usize,
        burst_len: usize,
    ) -> Result<ReducedModel> {
        let ridge = self.cfg.reduction.ridge;
        match mode {
            InferenceMode::Markovian => Ok(ReducedModel::markovian(mk.clone())),
            InferenceMode::Stagewise => {
                let (memory, _) = infer_stagewise(&ds.truncated(lag + 2)?, mk, lag, ridge)?;
                ReducedModel::new(mk.clone(), memory)
            }
            InferenceMode::Batch => {
                let (memory, _, _) = infer_batch(&ds.truncated(burst_len)?, mk, lag, ridge)?;
                ReducedModel::new(mk.clone(), memory)
            }
            InferenceMode::IntrusiveOracle => {
                let sys = &self.train[m].build.system;
                let pair = build_projection_pair(sel, basis)?;
                let markov = intrusive_markovian(sys, &pair.q)?;
                ReducedModel::new(markov, intrusive_nonmarkov(sys, &pair, lag)?)
            }
        }
    }

    /// Largest relative deviation of stagewise operators from the intrusive
    /// ones, over all four operator families.
    pub fn recovery_deviation(
        &self,
        m: usize,
        ds: &ReprojectedDataset,
        mk: &MarkovOps,
        sel: &ObservationSelector,
        basis: &PodBasis,
        lag: usize,
    ) -> Result<f64> {
        let (learned, _) = infer_stagewise(&ds.truncated(lag + 2)?, mk, lag, self.cfg.reduction.ridge)?;
        let pair = build_projection_pair(sel, basis)?;
        let truth = intrusive_nonmarkov(&self.train[m].build.system, &pair, lag)?;
        Ok(memory_deviation(&learned, &truth))
    }

    pub fn test_data(&self, sel: &ObservationSelector) -> Result<Vec<TestData>> {
        let steps = self.cfg.test.steps;
        self.test
            .iter()
            .enumerate()
            .map(|(i, inst)| {
                let spec = self.stream(&self.cfg.test.input, TAG_TEST, i as u64);
                let inputs = self.to_system_inputs(generate_inputs(&spec, self.user_channels(), steps, self.dt())?);
                let x0 = DVector::zeros(self.state_dim());
                let (observed, outputs) = simulate_observed(&inst.build.system, sel, &x0, &inputs, steps)?;
                Ok(TestData {
                    observed,
                    outputs,
                    inputs,
                })
            })
            .collect()
    }

    /// The model to use at each test instance: the trained one, or an
    /// interpolation over the training parameters.
    pub fn test_models(&self, trained: &[ReducedModel]) -> Result<Vec<ReducedModel>> {
        if trained.len() == 1 {
            return Ok(vec![trained[0].clone(); self.test.len()]);
        }
        let grid: Vec<f64> = self.train.iter().map(|t| t.mu.unwrap_or_default()).collect();
        self.test
            .iter()
            .map(|t| interpolate_operators(&grid, trained, t.mu.unwrap_or_default()))
            .collect()
    }

    /// Requested metrics averaged over the test instances.
    pub fn evaluate(&self, models: &[ReducedModel], basis: &PodBasis, tests: &[TestData]) -> Result<Vec<ErrorReport>> {
        let v = &basis.v;
        let mut per_kind: Vec<Vec<Option<f64>>> = vec![Vec::new(); self.cfg.metrics.len()];
        for (model, t) in models.iter().zip(tests) {
            let z0 = v.tr_mul(&t.observed.column(0));
            let reduced = match simulate_reduced(model, &z0, &t.inputs, self.cfg.test.steps) {
                Ok(zt) => Some(zt),
                Err(e) if e.is_divergence() => None,
                Err(e) => return Err(e),
            };
            for (slot, kind) in per_kind.iter_mut().zip(&self.cfg.metrics) {
                let value = match (kind, &reduced) {
                    (MetricKind::Projection, _) => Some(projection_error(&t.observed, v)?),
                    (_, None) => None,
                    (MetricKind::Observation, Some(zt)) => Some(observation_error(&t.observed, zt, v)?),
                    (MetricKind::Output, Some(zt)) => {
                        let yt = reduced_output(model, zt, &t.inputs)?;
                        if yt.iter().all(|x| x.is_finite()) {
                            Some(output_error(&t.outputs, &yt)?)
                        } else {
                            None
                        }
                    }
                };
                slot.push(value);
            }
        }
        self.cfg
            .metrics
            .iter()
            .zip(per_kind)
            .map(|(kind, vals)| parametric_error(*kind, &vals))
            .collect()
    }
}

pub fn memory_deviation(learned: &NonMarkovOps, truth: &NonMarkovOps) -> f64 {
    [
        max_relative_deviation(&learned.e, &truth.e, 1e-12),
        max_relative_deviation(&learned.f, &truth.f, 1e-12),
        max_relative_deviation(&learned.g, &truth.g, 1e-12),
        max_relative_deviation(&learned.h, &truth.h, 1e-12),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cell {
    mode: InferenceMode,
    lag: usize,
    burst_len: usize,
}

impl Cell {
    fn dir_name(&self) -> String {
        format!("{}_L{}_K{}", self.mode, self.lag, self.burst_len)
    }
}

fn cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let kmax = cfg.max_burst_len();
    let mut batch_lens: Vec<usize> = cfg.sampling.burst_lens.iter().copied().filter(|k| *k >= 3).collect();
    batch_lens.sort_unstable();
    batch_lens.dedup();
    let mut out = Vec::new();
    for &mode in &cfg.reduction.modes {
        match mode {
            InferenceMode::Markovian => out.push(Cell {
                mode,
                lag: 0,
                burst_len: kmax,
            }),
            InferenceMode::Stagewise => out.extend(cfg.reduction.lags.iter().map(|&lag| Cell {
                mode,
                lag,
                burst_len: lag + 2,
            })),
            InferenceMode::Batch => {
                for &lag in &cfg.reduction.lags {
                    out.extend(batch_lens.iter().map(|&burst_len| Cell { mode, lag, burst_len }));
                }
            }
            InferenceMode::IntrusiveOracle => out.extend(cfg.reduction.lags.iter().map(|&lag| Cell {
                mode,
                lag,
                burst_len: kmax,
            })),
        }
    }
    out
}

/// Shared per-fraction inputs of all cells.
struct FractionData {
    sel: ObservationSelector,
    basis: PodBasis,
    tests: Vec<TestData>,
}

struct Group {
    fraction: f64,
    n: usize,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    name: &'a str,
    model: &'a str,
    config_hash: &'a str,
    seed: u64,
    version: &'a str,
    rows: usize,
    failed_rows: usize,
    metric_columns: &'a str,
    interpolation: Option<&'a str>,
    stability_warning: Option<&'a str>,
}

impl Experiment {
    fn row(&self, g: &Group, cell: &Cell, metric: String, value: f64, status: Status) -> ResultRow {
        ResultRow {
            model: self.cfg.model.name().to_string(),
            fraction: g.fraction,
            n: g.n,
            lag: cell.lag,
            mode: cell.mode,
            n_r: self.num_bursts(),
            k_r: cell.burst_len,
            seed: self.cfg.seed,
            metric,
            value,
            status,
        }
    }

    fn metric_names(&self, cell: &Cell) -> Vec<String> {
        let mut names: Vec<String> = self.cfg.metrics.iter().map(|k| k.to_string()).collect();
        if cell.mode == InferenceMode::IntrusiveOracle && cell.lag > 0 {
            names.push("recovery_deviation".into());
        }
        names
    }

    fn failure_rows(&self, g: &Group, cell: &Cell, err: &Error) -> Vec<ResultRow> {
        let status = if err.is_divergence() { Status::Divergent } else { Status::Error };
        self.metric_names(cell)
            .into_iter()
            .map(|m| self.row(g, cell, m, f64::NAN, status))
            .collect()
    }

    fn prepare_fraction(&self, fraction: f64, out: Option<&Path>) -> Result<FractionData> {
        let sel = self.selector(fraction).map_err(|e| e.in_stage("basis"))?;
        let basis = self.basis(&sel).map_err(|e| e.in_stage("basis"))?;
        if let Some(dir) = out {
            io::write_basis(&dir.join("basis"), &basis).map_err(|e| e.in_stage("basis"))?;
        }
        let tests = self.test_data(&sel).map_err(|e| e.in_stage("simulate"))?;
        Ok(FractionData { sel, basis, tests })
    }

    /// Runs every cell of one `(fraction, n)` group; each entry is the rows
    /// of one cell or the error that stopped it.
    fn run_group(&self, g: &Group, fd: &FractionData, out: Option<&Path>) -> Vec<Result<Vec<ResultRow>>> {
        let cells = cells(&self.cfg);
        let shared = (|| -> Result<(PodBasis, Vec<ReprojectedDataset>, Vec<MarkovOps>)> {
            let basis = fd.basis.truncate(g.n).map_err(|e| e.in_stage("basis"))?;
            let mut data = Vec::with_capacity(self.train.len());
            let mut markov = Vec::with_capacity(self.train.len());
            for m in 0..self.train.len() {
                let ds = self.sample(m, &fd.sel, &basis).map_err(|e| e.in_stage("sample"))?;
                if let Some(dir) = out {
                    io::write_dataset(&dir.join(format!("data{m}")), &ds, self.cfg.seed).map_err(|e| e.in_stage("sample"))?;
                }
                markov.push(self.markov(&ds).map_err(|e| e.in_stage("infer"))?);
                data.push(ds);
            }
            Ok((basis, data, markov))
        })();
        let (basis, data, markov) = match shared {
            Ok(s) => s,
            Err(e) => {
                log::warn!("fraction {} n {}: {e}", g.fraction, g.n);
                let e = std::sync::Arc::new(e);
                return cells.iter().map(|_| Err(clone_error(&e))).collect();
            }
        };
        cells
            .iter()
            .map(|cell| {
                self.run_cell(g, cell, fd, &basis, &data, &markov, out)
                    .inspect_err(|e| log::warn!("fraction {} n {} {}: {e}", g.fraction, g.n, cell.dir_name()))
            })
            .collect()
    }

    #[allow(clippy::too_many_arguments)]
    fn run_cell(
        &self,
        g: &Group,
        cell: &Cell,
        fd: &FractionData,
        basis: &PodBasis,
        data: &[ReprojectedDataset],
        markov: &[MarkovOps],
        out: Option<&Path>,
    ) -> Result<Vec<ResultRow>> {
        let mut trained = Vec::with_capacity(self.train.len());
        for m in 0..self.train.len() {
            let model = self
                .infer(cell.mode, m, &data[m], &markov[m], &fd.sel, basis, cell.lag, cell.burst_len)
                .map_err(|e| e.in_stage("infer"))?;
            if let Some(dir) = out {
                let dir = dir.join(cell.dir_name());
                let dir = if self.train.len() > 1 { dir.join(format!("mu{m}")) } else { dir };
                let meta = io::ModelManifest {
                    reduced_dim: model.dim(),
                    input_dim: model.input_dim(),
                    output_dim: model.output_dim(),
                    degree: model.markov.degree(),
                    lag: model.lag(),
                    ridge: self.cfg.reduction.ridge,
                    mode: cell.mode.to_string(),
                    dataset_fingerprint: (cell.mode != InferenceMode::IntrusiveOracle).then(|| io::dataset_fingerprint(&data[m])),
                    config_hash: Some(self.config_hash.clone()),
                };
                io::write_model(&dir, &model, &meta).map_err(|e| e.in_stage("infer"))?;
            }
            trained.push(model);
        }
        let models = self.test_models(&trained).map_err(|e| e.in_stage("simulate"))?;
        let reports = self.evaluate(&models, basis, &fd.tests).map_err(|e| e.in_stage("evaluate"))?;
        let mut rows: Vec<ResultRow> = reports
            .iter()
            .map(|r| {
                let status = if r.divergent { Status::Divergent } else { Status::Ok };
                self.row(g, cell, r.kind.to_string(), r.value, status)
            })
            .collect();
        if cell.mode == InferenceMode::IntrusiveOracle && cell.lag > 0 {
            let mut worst = 0.0f64;
            for m in 0..self.train.len() {
                let d = self
                    .recovery_deviation(m, &data[m], &markov[m], &fd.sel, basis, cell.lag)
                    .map_err(|e| e.in_stage("evaluate"))?;
                worst = worst.max(d);
            }
            let status = if worst <= RECOVERY_TOLERANCE { Status::Pass } else { Status::Fail };
            rows.push(self.row(g, cell, "recovery_deviation".into(), worst, status));
        }
        Ok(rows)
    }

    /// Runs all cells; failures are kept per cell. Rows come back in
    /// `(fraction, n, cell)` order whatever the thread count.
    fn execute(&self, opts: &RunOptions) -> Result<(Vec<CellResult>, Option<PathBuf>)> {
        let out_dir = opts.out_dir.clone().or_else(|| self.cfg.out.clone());
        let artifacts = out_dir.as_ref().filter(|_| self.cfg.artifacts).cloned();
        if let Some(dir) = &out_dir {
            fs::create_dir_all(dir)?;
            fs::write(dir.join("config.toml"), self.cfg.to_toml()?)?;
        }
        let frac_dir = |f: f64| artifacts.as_ref().map(|d| d.join(format!("fraction_{f:.4}")));
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.threads.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        let cell_list = cells(&self.cfg);
        let results = pool.install(|| {
            let fractions: Vec<Result<FractionData>> = self
                .cfg
                .observation
                .fractions
                .par_iter()
                .map(|&f| self.prepare_fraction(f, frac_dir(f).as_deref()))
                .collect();
            let groups: Vec<(usize, Group)> = self
                .cfg
                .observation
                .fractions
                .iter()
                .enumerate()
                .flat_map(|(i, &fraction)| self.cfg.reduction.dims.iter().map(move |&n| (i, Group { fraction, n })))
                .collect();
            groups
                .par_iter()
                .map(|(i, g)| {
                    let per_cell = match &fractions[*i] {
                        Ok(fd) => {
                            let dir = frac_dir(g.fraction).map(|d| d.join(format!("n{}", g.n)));
                            self.run_group(g, fd, dir.as_deref())
                        }
                        Err(e) => cell_list.iter().map(|_| Err(clone_error(e))).collect(),
                    };
                    cell_list
                        .iter()
                        .zip(per_cell)
                        .map(|(cell, res)| match res {
                            Ok(rows) => (rows, None),
                            Err(e) => (self.failure_rows(g, cell, &e), Some(e)),
                        })
                        .collect::<Vec<_>>()
                })
                .collect::<Vec<_>>()
        });
        Ok((results.into_iter().flatten().collect(), out_dir))
    }

    fn finish(&self, rows: &[ResultRow], out_dir: Option<&Path>) -> Result<()> {
        let Some(dir) = out_dir else { return Ok(()) };
        fs::write(dir.join("results.csv"), results_csv(rows))?;
        let failed = rows.iter().filter(|r| !matches!(r.status, Status::Ok | Status::Pass)).count();
        io::write_manifest(
            dir,
            &RunManifest {
                name: &self.cfg.name,
                model: self.cfg.model.name(),
                config_hash: &self.config_hash,
                seed: self.cfg.seed,
                version: env!("CARGO_PKG_VERSION"),
                rows: rows.len(),
                failed_rows: failed,
                metric_columns: "all K+1 trajectory columns",
                interpolation: self.is_parametric().then_some("piecewise-linear"),
                stability_warning: self.train[0].build.stability_warning.as_deref(),
            },
        )
    }
}

/// Errors are not `Clone` because of `io::Error`; failures shared by many
/// cells are re-created from their rendering, keeping the divergence flag.
fn clone_error(e: &Error) -> Error {
    match e {
        Error::Divergence { step, burst } => Error::Divergence { step: *step, burst: *burst },
        Error::Stage { stage, source } => Error::Stage {
            stage,
            source: Box::new(clone_error(source)),
        },
        Error::Config(m) => Error::Config(m.clone()),
        other => Error::Precondition(other.to_string()),
    }
}

/// Runs the experiment and stops with the first failing stage, after
/// writing whatever results were produced. A divergent reduced model counts
/// as a failure.
pub fn run_pipeline(cfg: ExperimentConfig, opts: &RunOptions) -> Result<RunOutcome> {
    let exp = Experiment::new(cfg)?;
    let (cells, out_dir) = exp.execute(opts)?;
    let mut first_error = None;
    let mut rows = Vec::new();
    for (cell_rows, err) in cells {
        if first_error.is_none() {
            first_error = err.or_else(|| {
                cell_rows
                    .iter()
                    .find(|r| r.status == Status::Divergent)
                    .map(|_| Error::Divergence { step: 0, burst: None }.in_stage("simulate"))
            });
        }
        rows.extend(cell_rows);
    }
    exp.finish(&rows, out_dir.as_deref())?;
    match first_error {
        Some(e) => Err(e),
        None => Ok(RunOutcome {
            rows,
            out_dir,
            config_hash: exp.config_hash.clone(),
        }),
    }
}

/// Runs the cartesian product of the config lists. Failures of single
/// cells are recorded in their rows and never abort the rest.
pub fn sweep(cfg: ExperimentConfig, opts: &RunOptions) -> Result<RunOutcome> {
    let exp = Experiment::new(cfg)?;
    let (cells, out_dir) = exp.execute(opts)?;
    let rows: Vec<ResultRow> = cells.into_iter().flat_map(|(r, _)| r).collect();
    exp.finish(&rows, out_dir.as_deref())?;
    Ok(RunOutcome {
        rows,
        out_dir,
        config_hash: exp.config_hash.clone(),
    })
}

/// Worker count: the environment variable wins over the flag.
pub fn thread_count(flag: Option<usize>) -> Result<usize> {
    match std::env::var("NONMARKOV_OPINF_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("NONMARKOV_OPINF_THREADS={v:?} is not a thread count"))),
        Err(_) => Ok(flag.unwrap_or(1)),
    }
}
