//! Adaptive tensor-train cross interpolation for high-dimensional quadrature.
//!
//! The crate builds a tensor-train (TT) interpolation of an implicitly defined
//! tensor from a small number of adaptively chosen entries, then contracts the
//! interpolation against tensor-product quadrature weights to estimate
//! integrals over `[0,1]^d`. Matrix-level building blocks (skeleton
//! decomposition, maxvol row selection, greedy rook-pivoted cross expansion)
//! live in [`matcross`]; the sweep strategies and the sequential driver in
//! [`ttcross`]; the dimension-parallel driver in [`parcross`]. Gauss-Legendre
//! grids and the integration pipeline are in [`quadrature`], Monte Carlo and
//! shifted-lattice baselines in [`baselines`], and the Ising susceptibility
//! integrand family in [`ising`].

pub mod baselines;
pub mod convergence;
pub mod error;
pub mod index;
pub mod ising;
pub mod lu;
pub mod matcross;
pub mod model;
pub mod oracle;
pub mod parcross;
pub mod quadrature;
pub mod sets;
pub mod svd;
pub mod ttcross;

/// Scalar type used throughout. Fixed to IEEE double; kept as a single
/// abstraction point so an extended-precision build only touches this alias.
pub type Scalar = f64;

pub use baselines::{
    fit_loglog, mc_batch, mc_integrate, pairwise_sum, qmc_integrate, qmc_points, std_estimate,
    EstimateBatch, LatticeRule,
};
pub use convergence::{ConvergenceLog, SweepRecord};
pub use error::{CrossError, Result};
pub use index::{split_index, MultiIndex};
pub use ising::{delta_estimate, Family, IsingProblem, ScaledValue, EULER_GAMMA};
pub use model::TTCrossModel;
pub use oracle::FunctionOracle;
pub use parcross::{
    parallel_cross_interpolate, partition_interfaces, ParallelCrossResult, ParallelReport,
};
pub use quadrature::{
    gauss_legendre, integrate, tt_integrate, weighted_oracle, Integrand, IntegrateConfig,
    IntegralResult, PointFn, QuadratureGrid,
};
pub use sets::NestedIndexSets;
pub use ttcross::{cross_interpolate, CrossConfig, CrossResult, SweepReport, SweepStrategy};
