//! Emulators for stochastic simulators whose output at each input point is a
//! probability density.
//!
//! The crate is `no_std` (it needs `alloc`) and purely numerical:
//!
//! - [`density`]: densities on a regular grid, Gaussian KDE, distances and the
//!   nine quantities of interest used for error reporting.
//! - [`kernel_regression`]: Nadaraya-Watson prediction of a density at a new
//!   input, in L2 and Hellinger geometry, with leave-one-out bandwidth selection.
//! - [`qp`]: the Goldfarb-Idnani dual active-set solver and the
//!   simplex-constrained least-squares projection built on it.
//! - [`decomposition`]: convex density bases (MMP, AQM, random) and CPCA.
//! - [`toy_models`]: the analytical stochastic simulators, designs of
//!   experiments and training-set assembly.
//!
//! File formats, campaigns and the command-line tool live in the `densemu`
//! crate.

#![no_std]
// NaN must fail every validity check, hence the negated comparisons
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod decomposition;
pub mod density;
mod error;
pub mod kernel_regression;
pub mod normal;
pub mod optim;
pub mod qp;
pub mod toy_models;

pub use error::{Error, Result};
