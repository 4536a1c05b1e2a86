//! Ordered-conditional (Vecchia) approximations to Gaussian process
//! likelihoods.
//!
//! The joint density of a Gaussian vector factors into ordered conditionals;
//! replacing each complete conditioning set with a small set of previously
//! ordered nearest neighbors yields a row-sparse approximation to the inverse
//! Cholesky factor of the covariance matrix. This crate provides the pieces
//! of that pipeline and the tooling to measure how good the result is:
//!
//! * [`covariance`] — Matérn and space-time Matérn kernels, modified Bessel
//!   functions, dense covariance assembly;
//! * [`ordering`] — coordinate, middle-out, random, maximum-minimum-distance
//!   (MMD) orderings and a grid-accelerated approximate MMD;
//! * [`neighbor`] — ordered nearest-neighbor search (brute-force oracle and a
//!   kd-tree search with doubling candidate counts);
//! * [`grouping`] — greedy block partitioning that enlarges conditioning sets
//!   while never increasing the memory footprint;
//! * [`likelihood`] — the sparse inverse Cholesky factor, log-likelihood
//!   evaluation, and profiling of linear mean parameters;
//! * [`inference`] — maximum approximate-likelihood fitting with a neighbor
//!   escalation schedule;
//! * [`quality`] — exact dense oracle, Kullback-Leibler divergence,
//!   misspecified-information relative efficiencies, and block-independent /
//!   tapered-covariance baselines;
//! * [`simulate`] — unconditional draws, kriging, and conditional simulation
//!   through the sparse triangular factor.

pub mod covariance;
pub mod error;
pub mod grouping;
pub mod inference;
pub mod likelihood;
pub mod neighbor;
pub mod optimize;
pub mod ordering;
pub mod quality;
pub mod simulate;

pub use covariance::{
    bessel_k, build_cov_matrix, kernel, CovarianceModel, KernelFamily, LocationSet, Metric,
};
pub use error::{Error, Result};
pub use grouping::{group_blocks, BlockPartition};
pub use likelihood::{
    build_gamma_tilde, loglik, profile_beta, Conditioning, MeanSpec, SparseInverseCholesky,
};
pub use neighbor::{nn_ordered_brute, nn_ordered_fast, NeighborSets};
pub use ordering::{
    order_ammd, order_middle_out, order_mmd_exact, order_random, order_sorted_coordinate, Axis,
    Permutation,
};
