//! Single pipeline stages with their artifacts in a flat output directory:
//! `basis/`, `data{m}/`, one directory per inferred model and `simulate/`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use nonmarkov_opinf::harness::{build_instances, Experiment, ResultRow, Status};
use nonmarkov_opinf::io::{self, ModelManifest};
use nonmarkov_opinf::romsim::{reduced_output, simulate_reduced};
use nonmarkov_opinf::{Error, InferenceMode, ModelSpec, ObservationSelector, PodBasis, PolyOperator, ReducedModel};

#[derive(Serialize)]
struct ModelSummary<'a> {
    kind: &'a str,
    state_dim: usize,
    input_dim: usize,
    output_dim: usize,
    degree: usize,
    dt: f64,
    stability_warning: Option<&'a str>,
}

/// Writes `A{j}.csv` for dense terms, `A{j}_nodewise.csv` (one coefficient
/// per component) for nodewise ones, and `B.csv`, `C.csv`.
pub fn model(spec: &ModelSpec, out: &Path) -> anyhow::Result<()> {
    let (train, _) = build_instances(spec)?;
    let build = &train[0].build;
    let sys = &build.system;
    fs::create_dir_all(out)?;
    for (i, op) in sys.operators().iter().enumerate() {
        match op {
            PolyOperator::Dense(m) => io::write_matrix(&out.join(format!("A{}.csv", i + 1)), m)?,
            PolyOperator::Nodewise(c) => io::write_matrix(&out.join(format!("A{}_nodewise.csv", i + 1)), &DMatrix::from_column_slice(c.len(), 1, c.as_slice()))?,
        }
    }
    io::write_matrix(&out.join("B.csv"), sys.b())?;
    io::write_matrix(&out.join("C.csv"), sys.c())?;
    io::write_manifest(
        out,
        &ModelSummary {
            kind: spec.name(),
            state_dim: sys.state_dim(),
            input_dim: sys.input_dim(),
            output_dim: sys.output_dim(),
            degree: sys.degree(),
            dt: build.dt,
            stability_warning: build.stability_warning.as_deref(),
        },
    )?;
    println!("{} with N={} written to {}", spec.name(), sys.state_dim(), out.display());
    Ok(())
}

fn pick<T: Copy + PartialEq + std::fmt::Display>(what: &str, given: Option<T>, choices: &[T]) -> anyhow::Result<T> {
    match given {
        None => Ok(choices[0]),
        Some(v) if choices.contains(&v) => Ok(v),
        Some(v) => bail!(Error::Config(format!("{what} {v} is not listed in the config"))),
    }
}

fn data_dir(out: &Path, m: usize) -> PathBuf {
    out.join(format!("data{m}"))
}

pub fn sample(exp: &Experiment, fraction: Option<f64>, n: Option<usize>, out: &Path) -> anyhow::Result<()> {
    let fraction = pick("fraction", fraction, &exp.cfg.observation.fractions)?;
    let n = pick("reduced dimension", n, &exp.cfg.reduction.dims)?;
    let sel = exp.selector(fraction)?;
    let basis = exp.basis(&sel).map_err(|e| e.in_stage("basis"))?.truncate(n)?;
    io::write_basis(&out.join("basis"), &basis)?;
    fs::write(out.join("config.toml"), exp.cfg.to_toml()?)?;
    for m in 0..exp.train.len() {
        let ds = exp.sample(m, &sel, &basis).map_err(|e| e.in_stage("sample"))?;
        io::write_dataset(&data_dir(out, m), &ds, exp.cfg.seed)?;
        println!("{} bursts of {} steps in {}", ds.num_bursts(), ds.burst_len(), data_dir(out, m).display());
    }
    Ok(())
}

fn stored(exp: &Experiment, fraction: Option<f64>, out: &Path) -> anyhow::Result<(f64, ObservationSelector, PodBasis)> {
    let fraction = pick("fraction", fraction, &exp.cfg.observation.fractions)?;
    let sel = exp.selector(fraction)?;
    let basis = io::read_basis(&out.join("basis")).context("run `sample` first")?;
    if basis.num_observed() != sel.num_observed() {
        bail!(Error::Config(format!(
            "stored basis has {} rows but fraction {fraction} observes {} components",
            basis.num_observed(),
            sel.num_observed()
        )));
    }
    Ok((fraction, sel, basis))
}

fn model_dir(dir: &Path, exp: &Experiment, m: usize) -> PathBuf {
    if exp.train.len() > 1 {
        dir.join(format!("mu{m}"))
    } else {
        dir.to_path_buf()
    }
}

pub fn infer(
    exp: &Experiment,
    fraction: Option<f64>,
    mode: InferenceMode,
    lag: usize,
    burst_len: Option<usize>,
    out: &Path,
) -> anyhow::Result<()> {
    let (_, sel, basis) = stored(exp, fraction, out)?;
    let mut dir = None;
    for m in 0..exp.train.len() {
        let (ds, data_meta) = io::read_dataset(&data_dir(out, m))?;
        let k_r = burst_len.unwrap_or(ds.burst_len());
        let target = out.join(format!("{mode}_L{lag}_K{k_r}"));
        let markov = exp.markov(&ds).map_err(|e| e.in_stage("infer"))?;
        let model = exp
            .infer(mode, m, &ds, &markov, &sel, &basis, lag, k_r)
            .map_err(|e| e.in_stage("infer"))?;
        let meta = ModelManifest {
            reduced_dim: model.dim(),
            input_dim: model.input_dim(),
            output_dim: model.output_dim(),
            degree: model.markov.degree(),
            lag: model.lag(),
            ridge: exp.cfg.reduction.ridge,
            mode: mode.to_string(),
            dataset_fingerprint: Some(data_meta.fingerprint),
            config_hash: Some(exp.config_hash().to_string()),
        };
        io::write_model(&model_dir(&target, exp, m), &model, &meta)?;
        dir = Some(target);
    }
    if let Some(d) = dir {
        println!("model written to {}", d.display());
    }
    Ok(())
}

fn load_models(exp: &Experiment, dir: &Path) -> anyhow::Result<Vec<ReducedModel>> {
    let trained = (0..exp.train.len())
        .map(|m| io::read_model(&model_dir(dir, exp, m)).map(|(model, _)| model))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(exp.test_models(&trained)?)
}

pub fn simulate(exp: &Experiment, fraction: Option<f64>, model: &Path, out: &Path) -> anyhow::Result<()> {
    let (_, sel, basis) = stored(exp, fraction, out)?;
    let models = load_models(exp, model)?;
    let tests = exp.test_data(&sel).map_err(|e| e.in_stage("simulate"))?;
    let target = out.join("simulate");
    for (i, (model, t)) in models.iter().zip(&tests).enumerate() {
        let z0: DVector<f64> = basis.v.tr_mul(&t.observed.column(0));
        let zt = simulate_reduced(model, &z0, &t.inputs, exp.cfg.test.steps).map_err(|e| e.in_stage("simulate"))?;
        io::write_trajectory(&target, &format!("reduced{i}"), &zt, exp.dt(), 0.0, None)?;
        if model.output_dim() > 0 {
            let yt = reduced_output(model, &zt, &t.inputs)?;
            io::write_trajectory(&target, &format!("output{i}"), &yt, exp.dt(), 0.0, None)?;
        }
    }
    println!("{} reduced trajectories in {}", models.len(), target.display());
    Ok(())
}

/// Burst length from a directory named by `infer`.
fn burst_len_of(dir: &Path) -> usize {
    dir.file_name()
        .and_then(|n| n.to_str())
        .and_then(|n| n.rsplit_once("_K"))
        .and_then(|(_, k)| k.parse().ok())
        .unwrap_or(0)
}

pub fn evaluate(exp: &Experiment, fraction: Option<f64>, model: &Path, out: &Path) -> anyhow::Result<()> {
    let (fraction, sel, basis) = stored(exp, fraction, out)?;
    let (_, meta) = io::read_model(&model_dir(model, exp, 0))?;
    let mode: InferenceMode = meta.mode.parse()?;
    let models = load_models(exp, model)?;
    let tests = exp.test_data(&sel).map_err(|e| e.in_stage("simulate"))?;
    let reports = exp.evaluate(&models, &basis, &tests).map_err(|e| e.in_stage("evaluate"))?;
    let rows: Vec<ResultRow> = reports
        .iter()
        .map(|r| ResultRow {
            model: exp.cfg.model.name().to_string(),
            fraction,
            n: basis.dim(),
            lag: meta.lag,
            mode,
            n_r: exp.num_bursts(),
            k_r: burst_len_of(model),
            seed: exp.cfg.seed,
            metric: r.kind.to_string(),
            value: r.value,
            status: if r.divergent { Status::Divergent } else { Status::Ok },
        })
        .collect();
    let path = out.join("evaluation.csv");
    fs::write(&path, nonmarkov_opinf::harness::results_csv(&rows))?;
    for r in &rows {
        println!("{} = {:.6e} [{}]", r.metric, r.value, r.status);
    }
    if rows.iter().any(|r| r.status == Status::Divergent) {
        bail!(Error::Divergence { step: 0, burst: None }.in_stage("simulate"));
    }
    Ok(())
}
