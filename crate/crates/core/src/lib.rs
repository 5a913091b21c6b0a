//! Poisson random hypergraphs, hypergraph collapse, and the analytic
//! machinery describing their phase transitions.
//!
//! * [`hypergraph`] and [`collapse`]: exact multiset hypergraphs, collapse,
//!   domains, duals and 2-cores.
//! * [`sampler`]: Poisson(β) random hypergraphs and Poisson(ρ) hypergraph
//!   processes.
//! * [`structure`]: structure function, envelopes, discontinuity set and
//!   limit predictors.
//! * [`limits`]: Borel law, first-passage walks, coupled walk families and
//!   the patch/debris chain.
//! * [`stats`]: total variation, Kolmogorov–Smirnov and binomial z-scores.
//! * [`experiment`]: seeded Monte Carlo runs compared against the analytic
//!   targets.

pub mod collapse;
pub mod error;
pub mod experiment;
pub mod hypergraph;
pub mod limits;
pub mod mixing;
pub mod numeric;
pub mod rng;
pub mod sampler;
pub mod stats;
pub mod structure;

pub use collapse::{
    collapse, domain_of, two_core, CollapseResult, CollapseTrace, Domain, IncrementalCollapse,
};
pub use error::{Error, Result};
pub use experiment::{ExperimentConfig, ExperimentKind, Report};
pub use hypergraph::{Hypergraph, VertexId};
pub use limits::{BorelLaw, ChainState, FirstPassage, WalkFamily};
pub use mixing::MixingDistribution;
pub use sampler::{sample_process, sample_static, Event, EventStream, PathPoint};
pub use structure::{Classification, FluidPrediction, Jump, StructureProfile};
