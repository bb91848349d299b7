//! Divergence-regularized multi-marginal optimal transport on discrete
//! measures: conjugate pairs, a generalized Sinkhorn solver, an exact
//! transportation solver, and the stability and sample-complexity experiments
//! built on them.
//!
//! Everything is generic over [`Real`] (`f32` or `f64`); the aliases below fix
//! the scalar to `f64`, with `*32` variants for single precision.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod complexity;
pub mod divergence;
pub mod error;
pub mod exact_ot;
pub mod measure;
pub mod scalar;
pub mod solver;
pub mod stability;
pub mod stats;

pub use divergence::DivergenceKind;
pub use error::{Error, ErrorClass, Result};
pub use scalar::Real;
pub use solver::{CostKind, SolverOptions, Sweep};

pub type Divergence = divergence::Divergence<f64>;
pub type DiscreteMeasure = measure::DiscreteMeasure<f64>;
pub type MarginalTuple = measure::MarginalTuple<f64>;
pub type SamplerSpec = measure::SamplerSpec<f64>;
pub type CostSpec = solver::CostSpec<f64>;
pub type ProblemSpec = solver::ProblemSpec<f64>;
pub type DualPotentials = solver::DualPotentials<f64>;
pub type Coupling = solver::Coupling<f64>;
pub type Solution = solver::Solution<f64>;
pub type TransportPlan = exact_ot::TransportPlan<f64>;

pub type Divergence32 = divergence::Divergence<f32>;
pub type DiscreteMeasure32 = measure::DiscreteMeasure<f32>;
pub type MarginalTuple32 = measure::MarginalTuple<f32>;
pub type CostSpec32 = solver::CostSpec<f32>;
pub type ProblemSpec32 = solver::ProblemSpec<f32>;
pub type Coupling32 = solver::Coupling<f32>;
pub type Solution32 = solver::Solution<f32>;
