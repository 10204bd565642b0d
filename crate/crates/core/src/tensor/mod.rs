//! Tensor-train format.
//!
//! A tensor `V` of order `M` is stored as components `V_k` of shape `(r_{k-1}, n_k, r_k)`
//! with `r_0 = r_M = 1`, so that
//! `V(i_1, ..., i_M) = V_1[:, i_1, :] V_2[:, i_2, :] ... V_M[:, i_M, :]`.
//! All multi-indices are linearized row-major (last index fastest).

mod dense;
mod interface;
mod io;
mod train;

pub use dense::{DenseTensor, DimTuple, DEFAULT_DENSE_CAP};
pub use interface::{design_matrix, fixed_interface, BasisValues, InterfaceStacks, ModeValues};
pub use io::TtFile;
pub use train::{tt_svd, Component, Gauge, TensorTrain, EXACT_RANK_RTOL};
