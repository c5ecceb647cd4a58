//! Preference-based global optimization of black-box problems whose feasibility
//! and satisfaction constraints are only revealed through a decision-maker's labels.
//!
//! A run alternates between asking the decision-maker to compare a candidate with
//! the current best sample (and label it feasible/satisfactory) and fitting
//! surrogates of the latent preference, feasibility and satisfaction. The next
//! candidate minimizes an acquisition that balances those surrogates with an
//! exploration term.

pub mod acquisition;
pub mod bench;
pub mod dataset;
pub mod domain;
pub mod error;
pub mod idw;
pub mod optimizer;
pub mod oracles;
pub mod pso;
pub mod qp;
pub mod sampling;
pub mod surrogate;

pub use acquisition::{AcquisitionConfig, ExplorationMode};
pub use bench::{run_monte_carlo, BenchReport, SolverMode};
pub use dataset::{Dataset, Preference, PreferenceRecord, QueryResponse};
pub use domain::Domain;
pub use error::{Error, Result};
pub use optimizer::{run_headless, DecisionMaker, Optimizer, Phase, Query, RunConfig, RunResult};
pub use oracles::BenchmarkProblem;
pub use sampling::RngSeed;
pub use surrogate::{FitConfig, PreferenceSurrogate, RbfKind};
