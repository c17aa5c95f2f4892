//! Tile low rank (TLR) factorizations of kernel matrices with adaptive
//! ranks.
//!
//! The crate builds a TLR approximation of a symmetric kernel matrix over a
//! KD-ordered point cloud, compresses tiles with the adaptive randomized
//! approximation (ARA), and factors the result with a left-looking Cholesky,
//! pivoted Cholesky or LDLᵀ in which every off-diagonal tile of the factor is
//! sampled through its Schur update expression instead of being formed.
//!
//! Module map:
//!
//! * [`geometry`]: point generation, KD ordering, kernels, point files.
//! * [`dense`]: dense tiles, GEMM, Cholesky, Bunch-Kaufman LDLᵀ, modified
//!   Cholesky, triangular solves, block orthogonalization, truncated SVD.
//! * [`tlr`]: the TLR matrix, construction, matvec, memory accounting, I/O.
//! * [`ara`]: the adaptive randomized approximation and its batched drivers.
//! * [`factor`]: the TLR factorization drivers.
//! * [`solve`]: triangular solves, PCG and residual estimation.
//! * [`cli`]: the `tlr` command line front end.
//!
//! Runnable walkthroughs live in `examples/`.

pub mod ara;
pub mod cli;
pub mod dense;
pub mod error;
pub mod factor;
pub mod geometry;
pub mod rng;
pub mod solve;
pub mod tlr;

pub use error::{Result, TlrError};
