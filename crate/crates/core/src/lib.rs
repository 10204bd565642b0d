//! Tensor-train least-squares regression from random point samples.
//!
//! The crate is organized bottom-up:
//!
//! * [`tensor`] holds the tensor-train format, orthogonalization, TT-SVD and the
//!   fixed-interface contractions used by every ALS microstep.
//! * [`bases`] provides univariate orthonormal polynomial bases, their Gramians and
//!   Gramian-orthonormalization.
//! * [`variation`] evaluates variation functions on grids and estimates the local
//!   variation constant of rank-1 matrices.
//! * [`lasso`] is the weighted LASSO solver with K-fold cross-validation.
//! * [`recovery`] contains the ALS family of recovery algorithms, each microstep
//!   variant registered by name behind the [`recovery::Microstep`] trait.
//! * [`uq`] generates benchmark data from a parametric diffusion problem and runs
//!   the phase-diagram and spectrum experiments.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bases;
pub mod error;
pub mod lasso;
pub mod linalg;
pub mod quadrature;
pub mod recovery;
pub mod tensor;
pub mod uq;
pub mod variation;

pub use error::{Error, Result};
