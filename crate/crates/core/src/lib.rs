//! Spectral statistics of the emission-rate matrix of Gaussian atomic clouds.
//!
//! The matrix `S_ij = sinc(sqrt(N/b) |x_i - x_j|)` governs the dissipative
//! part of collective decay in a cloud of `N` two-level atoms, and its
//! spectrum develops a macroscopic fraction of vanishing eigenvalues once the
//! cooperativeness `b` exceeds a critical value. This crate samples clouds,
//! assembles and diagonalizes `S`, aggregates ensembles, runs the finite-size
//! extrapolations and the critical-point scan, and evaluates the
//! locator-expansion estimate.
//!
//! ```
//! use erm_core::{cloud, matrix, spectrum};
//!
//! let config = cloud::CloudConfig::new(200, 3.0, 1, 0)?;
//! let s = matrix::build_matrix(&cloud::sample_cloud(&config)?)?;
//! let spec = spectrum::eigenvalues(&s)?;
//! assert!(spec.min_eigenvalue() > spectrum::ZERO_THRESHOLD);
//! # Ok::<(), erm_core::Error>(())
//! ```

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cloud;
pub mod critical;
pub mod ensemble;
pub mod error;
pub mod harness;
pub mod locator;
pub mod matrix;
pub mod spectrum;

pub use error::{Error, Result};
