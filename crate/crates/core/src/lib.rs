//! Constructive approximation of Dirichlet forms by finite weighted-graph
//! energies.
//!
//! The pipeline runs semigroup approximation, Galerkin projection onto an
//! orthonormal system, truncation to a level of an exhaustion, and
//! conditioning on a level-set partition. The last stage is a finite
//! weighted graph (conductances `c`, killing `κ`). Convergence of each stage
//! is checked in the strong resolvent sense.
//!
//! This crate is `no_std` with `alloc`. File formats, the CLI and timing live
//! in the `mosco-graphs` crate.
#![no_std]
// `!(x <= tol)` rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod audit;
pub mod contraction;
pub mod convergence;
pub mod error;
pub mod graph;
pub mod measure;
pub mod models;
pub mod pipeline;
pub mod semigroup;
pub mod tolerances;

pub use error::{Error, Result};
pub use measure::{
    condition_on_partition, expand_step, weighted_inner, weighted_norm, AmbientSpace, CellPartition, IndexSet,
    MeasureVector, OrthonormalBasis, StepFunction,
};
pub use pipeline::{
    galerkin_projection, level_cells_per_function, level_label, level_partition, semigroup_form, sigma_truncate,
    stage_form, stage_generator, Stage, StageForm, StageIndex,
};
pub use semigroup::{HeatOperator, MarkovKernelModel, MarkovOperator, SpectralModel};
pub use graph::{extract_graph, final_stage_graph, graph_energy, verify_identification, StageGraph, WeightedGraph};
pub use convergence::{
    iterated_limit_sweep, mosco_limsup_check, monotonicity_audit, reference_resolvent, resolvent_error,
    stage_resolvent, test_battery, BatterySpec, ConvergenceRecord, ResolventProbe, Schedule, TestVector,
};
