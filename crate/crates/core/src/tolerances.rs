//! Numerical tolerances shared by the stages, audits and tests.

/// Maximum deviation of a loaded basis from orthonormality before it is
/// re-orthonormalized.
pub const TOL_ORTHO: f64 = 1e-8;

/// Nonnegativity, sub-stochasticity and μ-symmetry of a Markov kernel.
pub const KERNEL_TOL: f64 = 1e-12;

/// Largest tolerated asymmetry |c_ij - c_ji| of an extracted conductance matrix.
pub const SYMMETRY_TOL: f64 = 1e-8;

/// Conductances at or below this value are not edges.
pub const EDGE_EPS: f64 = 1e-14;

/// Conductances in `[-CLAMP_TOL, 0)` are rounded up to zero.
pub const CLAMP_TOL: f64 = 1e-12;

/// Smallest admissible killing weight.
pub const KILLING_TOL: f64 = 1e-10;

/// Column sums of a conservative graph must reproduce the vertex weights.
pub const CONSERVATIVE_TOL: f64 = 1e-10;

/// ⟨f - Pf, f⟩ against the graph energy.
pub const IDENTIFICATION_TOL: f64 = 1e-10;

/// Symmetry of stage generator matrices.
pub const GENERATOR_SYMMETRY_TOL: f64 = 1e-10;

/// Largest eigenvalue allowed for a negative-semidefinite generator.
pub const GENERATOR_NSD_TOL: f64 = 1e-9;

/// Relative residual of the stage resolvent solve.
pub const RESOLVENT_RESIDUAL_TOL: f64 = 1e-9;

/// Pointwise slack of the Markov property audit.
pub const MARKOV_SLACK: f64 = 1e-9;

/// Slack of the dyadic monotonicity audit, relative to max(1, |value|).
pub const MONOTONE_SLACK: f64 = 1e-12;

/// A truncated spectral semigroup counts as exact at time t when the
/// largest retained mode is damped below this factor.
pub const TRUNCATION_INVISIBLE: f64 = 1e-10;

/// Relative out-of-span norm above which a vector is treated as having
/// infinite energy.
pub const SPAN_TOL: f64 = 1e-8;
