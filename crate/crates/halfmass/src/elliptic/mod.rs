//! Discrete solver for the conformal boundary-value operator on a truncated
//! half-annulus, the method-of-images harmonic oracle, the conformal
//! flattening pipeline, and weighted-norm diagnostics.
//!
//! One sign convention module-wide: the solver and the oracle both treat the
//! problem -Δu = f in the interior with ∂u/∂η + h̄u = f̄ on Σ (η the outward
//! unit normal, so ∂u/∂η = -∂u/∂x_n on the flat boundary). The oracle
//! converts the Green representation to this convention internally.

pub mod flatten;
pub mod grid;
pub mod kernel;
pub mod oracle;
pub mod sparse;
pub mod solver;
pub mod weighted;

pub use flatten::{conformal_flatten, FlattenError, FlattenOptions, FlatteningResult};
pub use grid::{DiscreteHalfAnnulus, GridError, NodeClass};
pub use kernel::{image_kernel, image_kernel_grad_x, invert_point, kelvin_transform, KernelError};
pub use oracle::{harmonic_oracle, mollified_point_source, OracleField, OracleProblem, VolumeSupport};
pub use weighted::{asymptotic_coefficient, lq_norm, weighted_norm, CoefficientEstimate, ShellSpec, WeightedNormReport};
pub use solver::{assemble_system, solve_bvp, AssembledSystem, BvpData, DiscreteSolution, SolverError};
