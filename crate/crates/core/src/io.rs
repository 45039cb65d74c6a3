//! On-disk formats.
//!
//! Matrices are CSV files whose first line is `rows,cols`, followed by the
//! entries row by row with 17 significant digits. Every directory of
//! matrices carries a `manifest.toml` describing what it holds.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::opinf::{MarkovOps, NonMarkovOps};
use crate::projection::PodBasis;
use crate::romsim::ReducedModel;
use crate::sampling::{Burst, ReprojectedDataset};

pub const MANIFEST: &str = "manifest.toml";

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = format!("{},{}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{:.16e}", m[(i, j)]);
        }
        out.push('\n');
    }
    out
}

pub fn matrix_from_csv(text: &str, path: &Path) -> Result<DMatrix<f64>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| format_err(path, "empty file"))?;
    let dims: Vec<usize> = header
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| format_err(path, format!("bad header {header:?}: {e}")))?;
    let [rows, cols] = dims[..] else {
        return Err(format_err(path, format!("header must be rows,cols, got {header:?}")));
    };
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        let line = lines
            .next()
            .ok_or_else(|| format_err(path, format!("expected {rows} rows, found {i}")))?;
        if cols == 0 {
            continue;
        }
        let mut count = 0;
        for (j, field) in line.split(',').enumerate() {
            if j >= cols {
                return Err(format_err(path, format!("row {i} has more than {cols} entries")));
            }
            m[(i, j)] = field
                .trim()
                .parse::<f64>()
                .map_err(|e| format_err(path, format!("row {i}, column {j}: {e}")))?;
            count += 1;
        }
        if count != cols {
            return Err(format_err(path, format!("row {i} has {count} entries, expected {cols}")));
        }
    }
    if lines.any(|l| !l.trim().is_empty()) {
        return Err(format_err(path, format!("trailing data after {rows} rows")));
    }
    Ok(m)
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    fs::write(path, matrix_to_csv(m))?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    matrix_from_csv(&fs::read_to_string(path)?, path)
}

pub fn write_manifest<T: Serialize>(dir: &Path, manifest: &T) -> Result<()> {
    let text = toml::to_string(manifest).map_err(|e| format_err(&dir.join(MANIFEST), e.to_string()))?;
    fs::write(dir.join(MANIFEST), text)?;
    Ok(())
}

pub fn read_manifest<T: DeserializeOwned>(dir: &Path) -> Result<T> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path)?;
    toml::from_str(&text).map_err(|e| format_err(&path, e.to_string()))
}

/// Hex SHA-256 over dimensions and raw little-endian values.
pub fn fingerprint<'a>(mats: impl IntoIterator<Item = &'a DMatrix<f64>>) -> String {
    let mut h = Sha256::new();
    for m in mats {
        h.update((m.nrows() as u64).to_le_bytes());
        h.update((m.ncols() as u64).to_le_bytes());
        for v in m.iter() {
            h.update(v.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

pub fn dataset_fingerprint(ds: &ReprojectedDataset) -> String {
    fingerprint(ds.bursts().iter().flat_map(|b| [&b.zbar, &b.u, &b.y]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryManifest {
    pub rows: usize,
    pub cols: usize,
    pub dt: f64,
    pub t0: f64,
    pub seed: Option<u64>,
}

/// Writes `name.csv` and `name.toml` side by side.
pub fn write_trajectory(dir: &Path, name: &str, data: &DMatrix<f64>, dt: f64, t0: f64, seed: Option<u64>) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(format!("{name}.csv"));
    write_matrix(&path, data)?;
    let meta = TrajectoryManifest {
        rows: data.nrows(),
        cols: data.ncols(),
        dt,
        t0,
        seed,
    };
    let sidecar = dir.join(format!("{name}.toml"));
    fs::write(&sidecar, toml::to_string(&meta).map_err(|e| format_err(&sidecar, e.to_string()))?)?;
    Ok(path)
}

pub fn write_basis(dir: &Path, basis: &PodBasis) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_matrix(&dir.join("V.csv"), &basis.v)?;
    let sv = DMatrix::from_column_slice(basis.singular_values.len(), 1, &basis.singular_values);
    write_matrix(&dir.join("singular_values.csv"), &sv)
}

pub fn read_basis(dir: &Path) -> Result<PodBasis> {
    let v = read_matrix(&dir.join("V.csv"))?;
    let sv = read_matrix(&dir.join("singular_values.csv"))?;
    let mut basis = PodBasis::from_matrix(v);
    basis.singular_values = sv.column(0).iter().copied().collect();
    Ok(basis)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub num_bursts: usize,
    pub burst_len: usize,
    pub reduced_dim: usize,
    pub input_dim: usize,
    pub output_dim: usize,
    pub seed: u64,
    pub fingerprint: String,
}

/// One CSV per burst stacking `zbar`, `u`, `y` row-wise, plus a manifest.
pub fn write_dataset(dir: &Path, ds: &ReprojectedDataset, seed: u64) -> Result<()> {
    fs::create_dir_all(dir)?;
    let (n, p, s) = (ds.reduced_dim(), ds.input_dim(), ds.output_dim());
    for (i, b) in ds.bursts().iter().enumerate() {
        let mut stacked = DMatrix::zeros(n + p + s, b.len());
        stacked.rows_mut(0, n).copy_from(&b.zbar);
        stacked.rows_mut(n, p).copy_from(&b.u);
        stacked.rows_mut(n + p, s).copy_from(&b.y);
        write_matrix(&dir.join(format!("burst_{i:05}.csv")), &stacked)?;
    }
    write_manifest(
        dir,
        &DatasetManifest {
            num_bursts: ds.num_bursts(),
            burst_len: ds.burst_len(),
            reduced_dim: n,
            input_dim: p,
            output_dim: s,
            seed,
            fingerprint: dataset_fingerprint(ds),
        },
    )
}

pub fn read_dataset(dir: &Path) -> Result<(ReprojectedDataset, DatasetManifest)> {
    let meta: DatasetManifest = read_manifest(dir)?;
    let (n, p, s) = (meta.reduced_dim, meta.input_dim, meta.output_dim);
    let mut bursts = Vec::with_capacity(meta.num_bursts);
    for i in 0..meta.num_bursts {
        let path = dir.join(format!("burst_{i:05}.csv"));
        let m = read_matrix(&path)?;
        if m.shape() != (n + p + s, meta.burst_len) {
            return Err(format_err(&path, format!("shape {:?} disagrees with the manifest", m.shape())));
        }
        bursts.push(Burst {
            zbar: m.rows(0, n).into_owned(),
            u: m.rows(n, p).into_owned(),
            y: m.rows(n + p, s).into_owned(),
        });
    }
    let ds = ReprojectedDataset::new(bursts)?;
    if dataset_fingerprint(&ds) != meta.fingerprint {
        return Err(format_err(&dir.join(MANIFEST), "dataset fingerprint mismatch"));
    }
    Ok((ds, meta))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub reduced_dim: usize,
    pub input_dim: usize,
    pub output_dim: usize,
    pub degree: usize,
    pub lag: usize,
    pub ridge: f64,
    pub mode: String,
    pub dataset_fingerprint: Option<String>,
    pub config_hash: Option<String>,
}

/// Writes `A{j}.csv`, `B.csv`, `C.csv` and `E{l}`, `F{l}`, `G{l}`, `H{l}`.
pub fn write_model(dir: &Path, model: &ReducedModel, meta: &ModelManifest) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (j, a) in model.markov.a.iter().enumerate() {
        write_matrix(&dir.join(format!("A{}.csv", j + 1)), a)?;
    }
    write_matrix(&dir.join("B.csv"), &model.markov.b)?;
    write_matrix(&dir.join("C.csv"), &model.markov.c)?;
    let mem = &model.memory;
    for l in 0..mem.lag() {
        for (name, ops) in [("E", &mem.e), ("F", &mem.f), ("G", &mem.g), ("H", &mem.h)] {
            write_matrix(&dir.join(format!("{name}{}.csv", l + 1)), &ops[l])?;
        }
    }
    write_manifest(dir, meta)
}

pub fn read_model(dir: &Path) -> Result<(ReducedModel, ModelManifest)> {
    let meta: ModelManifest = read_manifest(dir)?;
    let a = (1..=meta.degree)
        .map(|j| read_matrix(&dir.join(format!("A{j}.csv"))))
        .collect::<Result<Vec<_>>>()?;
    let markov = MarkovOps::new(a, read_matrix(&dir.join("B.csv"))?, read_matrix(&dir.join("C.csv"))?)?;
    let mut memory = NonMarkovOps::empty();
    for l in 1..=meta.lag {
        memory.e.push(read_matrix(&dir.join(format!("E{l}.csv")))?);
        memory.f.push(read_matrix(&dir.join(format!("F{l}.csv")))?);
        memory.g.push(read_matrix(&dir.join(format!("G{l}.csv")))?);
        memory.h.push(read_matrix(&dir.join(format!("H{l}.csv")))?);
    }
    let model = ReducedModel::new(markov, memory)?;
    if (model.dim(), model.input_dim(), model.output_dim()) != (meta.reduced_dim, meta.input_dim, meta.output_dim) {
        return Err(format_err(&dir.join(MANIFEST), "operator shapes disagree with the manifest"));
    }
    Ok((model, meta))
}
