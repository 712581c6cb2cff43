//! Graph approximations of the Laplace-Beltrami operator on closed
//! Riemannian manifolds, built from point clouds.

// `!(x > 0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod eigen;
pub mod error;
pub mod graph;
pub mod harness;
pub mod manifold;
pub mod net;
pub mod rng;
pub mod scalar;
mod spatial;
pub mod transfer;

pub use eigen::{
    cluster_eigenvalues, smallest_k, smallest_k_with, spectral_projection, EigenvectorDump,
    LanczosOptions, SolverMethod, SolverOptions, SpectrumResult,
};
pub use error::{Error, Result};
pub use graph::{build_graph, GraphDump, GraphFunction, WeightedGraph};
pub use harness::{
    run_lemma_suite, run_sweep, ConvergenceReport, Lemma, LemmaSuiteReport, RhoRule, SweepConfig,
};
pub use manifold::{ExactSpectrum, ManifoldKind, ManifoldModel, ManifoldPoint, ModeLabel, Trig};
pub use net::{build_net, verify_net, EpsNet, NetDump, NetReport, QuadratureSet};
pub use rng::SeededRng;
pub use scalar::Real;
pub use transfer::{
    average_dispersion, average_dispersion_sum, discretize_p, lift_pstar, outer_subsample, psi,
    DispersionEstimate, KernelSmoother, SampledFunction, TransferContext,
};

pub type Manifold = ManifoldModel<f64>;
pub type Point = ManifoldPoint<f64>;
pub type Net = EpsNet<f64>;
pub type Graph = WeightedGraph<f64>;
pub type Function = GraphFunction<f64>;
pub type Spectrum = SpectrumResult<f64>;
