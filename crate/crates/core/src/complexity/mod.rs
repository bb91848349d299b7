//! Intrinsic-dimension partitions and the sample-complexity harness.

mod partition;
mod rate;

pub use partition::{
    dyadic_partition, refinement_chain, Cell, PartitionScheme, DEFAULT_CELL_CAPACITY,
};
pub use rate::{
    build_reference, intrinsic_dimension_demo, rate_experiment, sample_complexity_run, RateReport,
    RateSpec, Reference, ReferenceMethod, ReferenceSpec,
};
