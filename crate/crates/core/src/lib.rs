//! Non-Markovian reduced models learned from partially observed state
//! trajectories of polynomial dynamical systems.
//!
//! The pipeline: simulate a full model, build a POD basis of the observed
//! components, sample bursts by extended re-projection, fit Markovian and
//! memory operators by least squares, and simulate the resulting reduced
//! model.

pub mod error;
pub mod harness;
pub mod intrusive;
pub mod io;
pub mod metrics;
pub mod models;
pub mod opinf;
pub mod polysys;
pub mod projection;
pub mod romsim;
pub mod sampling;

pub use error::{Error, Result};
pub use metrics::{ErrorReport, MetricKind};
pub use opinf::{LsqReport, MarkovOps, NonMarkovOps, StageReport};
pub use polysys::{ObservationSelector, PolyOperator, PolynomialSystem, Trajectory};
pub use projection::{PodBasis, ProjectionPair};
pub use romsim::ReducedModel;
pub use sampling::{Burst, ReprojectedDataset};
pub use harness::{ExperimentConfig, InferenceMode, ModelSpec};
