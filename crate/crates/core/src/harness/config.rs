use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::metrics::MetricKind;
use crate::models::{InputSpec, ReactionForm};

/// How memory operators are obtained for a sweep cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InferenceMode {
    /// No memory term.
    Markovian,
    Stagewise,
    Batch,
    /// Operators projected from the known full model; linear models only.
    IntrusiveOracle,
}

impl fmt::Display for InferenceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InferenceMode::Markovian => "markovian",
            InferenceMode::Stagewise => "stagewise",
            InferenceMode::Batch => "batch",
            InferenceMode::IntrusiveOracle => "intrusive-oracle",
        })
    }
}

impl std::str::FromStr for InferenceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "markovian" => Ok(Self::Markovian),
            "stagewise" => Ok(Self::Stagewise),
            "batch" => Ok(Self::Batch),
            "intrusive-oracle" => Ok(Self::IntrusiveOracle),
            other => Err(Error::Config(format!("unknown inference mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    ChafeeInfante {
        nx: usize,
        dt: f64,
    },
    ConvectionDiffusion {
        nx: usize,
        ny: usize,
        dt: f64,
    },
    /// Parametric: one full model per training and per test value of `mu`.
    /// Inputs in the config describe the source channel only; the constant
    /// reaction channel is appended by the harness.
    DiffusionReaction {
        nx: usize,
        dt: f64,
        #[serde(default)]
        form: ReactionForm,
        train_mu: Vec<f64>,
        test_mu: Vec<f64>,
    },
    RandomLinear {
        state_dim: usize,
        inputs: usize,
        outputs: usize,
        radius: f64,
        seed: u64,
        #[serde(default = "unit_dt")]
        dt: f64,
    },
}

fn unit_dt() -> f64 {
    1.0
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::ChafeeInfante { .. } => "chafee-infante",
            ModelSpec::ConvectionDiffusion { .. } => "convection-diffusion",
            ModelSpec::DiffusionReaction { .. } => "diffusion-reaction",
            ModelSpec::RandomLinear { .. } => "random-linear",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationSpec {
    pub fractions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionSpec {
    pub dims: Vec<usize>,
    pub lags: Vec<usize>,
    pub modes: Vec<InferenceMode>,
    #[serde(default)]
    pub ridge: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSpec {
    pub input: InputSpec,
    pub steps: usize,
}

/// `count` input realizations of one family, each driving its own chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    pub input: InputSpec,
    #[serde(default = "one")]
    pub count: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSpec {
    /// Burst lengths `K_r` for batch cells. Data is sampled once at the
    /// largest value and shorter lengths use nested prefixes; stagewise cells
    /// always use the prefix of length `L + 2`.
    pub burst_lens: Vec<usize>,
    pub bursts_per_chain: usize,
    pub chains: Vec<ChainSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestSpec {
    pub input: InputSpec,
    pub steps: usize,
}

fn default_metrics() -> Vec<MetricKind> {
    vec![MetricKind::Projection, MetricKind::Observation]
}

fn yes() -> bool {
    true
}

/// One experiment, read from TOML. Lists span a sweep over their cartesian
/// product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// Master seed; every random input stream is derived from it.
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Write bases, datasets and operators next to the results table.
    #[serde(default = "yes")]
    pub artifacts: bool,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<MetricKind>,
    pub model: ModelSpec,
    pub observation: ObservationSpec,
    pub reduction: ReductionSpec,
    pub basis: BasisSpec,
    pub sampling: SamplingSpec,
    pub test: TestSpec,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err(e.to_string()))
    }

    /// SHA-256 of the canonical TOML rendering.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_toml()?.as_bytes())))
    }

    pub fn max_burst_len(&self) -> usize {
        self.sampling.burst_lens.iter().copied().max().unwrap_or(0)
    }

    pub fn max_dim(&self) -> usize {
        self.reduction.dims.iter().copied().max().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.reduction;
        if self.observation.fractions.is_empty() || r.dims.is_empty() || r.lags.is_empty() || r.modes.is_empty() {
            return Err(config_err("fractions, dims, lags and modes must all be nonempty"));
        }
        if let Some(f) = self.observation.fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
            return Err(config_err(format!("observed fraction {f} outside (0, 1]")));
        }
        if r.dims.contains(&0) {
            return Err(config_err("reduced dimensions must be positive"));
        }
        if !(r.ridge >= 0.0 && r.ridge.is_finite()) {
            return Err(config_err(format!("ridge {} must be finite and nonnegative", r.ridge)));
        }
        if self.metrics.is_empty() {
            return Err(config_err("no metrics requested"));
        }
        let s = &self.sampling;
        if s.burst_lens.is_empty() || s.burst_lens.iter().any(|k| *k < 2) {
            return Err(config_err("burst lengths must be given and at least 2"));
        }
        if s.bursts_per_chain == 0 || s.chains.is_empty() || s.chains.iter().any(|c| c.count == 0) {
            return Err(config_err("sampling needs at least one chain with at least one burst"));
        }
        let kmax = self.max_burst_len();
        let lmax = r.lags.iter().copied().max().unwrap_or(0);
        let needs_prefix = r.modes.iter().any(|m| matches!(m, InferenceMode::Stagewise | InferenceMode::IntrusiveOracle));
        if needs_prefix && kmax < lmax + 2 {
            return Err(config_err(format!(
                "stagewise inference with lag {lmax} needs bursts of at least {} steps, largest is {kmax}",
                lmax + 2
            )));
        }
        if r.modes.contains(&InferenceMode::Batch) && s.burst_lens.iter().all(|k| *k < 3) {
            return Err(config_err("batch inference needs a burst length of at least 3"));
        }
        if self.basis.steps == 0 || self.test.steps == 0 {
            return Err(config_err("basis and test horizons must be positive"));
        }
        match &self.model {
            ModelSpec::ChafeeInfante { dt, .. }
            | ModelSpec::ConvectionDiffusion { dt, .. }
            | ModelSpec::RandomLinear { dt, .. }
            | ModelSpec::DiffusionReaction { dt, .. }
                if !(*dt > 0.0 && dt.is_finite()) =>
            {
                return Err(config_err(format!("time step {dt} must be positive")));
            }
            ModelSpec::DiffusionReaction { train_mu, test_mu, .. } => {
                if train_mu.is_empty() || test_mu.is_empty() {
                    return Err(config_err("parametric model needs training and test parameters"));
                }
                if train_mu.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
                    return Err(config_err("training parameters must be strictly increasing"));
                }
                let (lo, hi) = (train_mu[0], train_mu[train_mu.len() - 1]);
                if let Some(mu) = test_mu.iter().find(|mu| !(**mu >= lo && **mu <= hi)) {
                    return Err(config_err(format!("test parameter {mu} outside the training range [{lo}, {hi}]")));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Mixes the master seed, a role tag and an index into a stream seed
/// (splitmix64 finalizer).
pub fn derive_seed(master: u64, tag: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(tag.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    // TOML integers are signed 64-bit
    (z ^ (z >> 31)) >> 1
}
