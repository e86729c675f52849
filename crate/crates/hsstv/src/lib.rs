//! Hyperspectral image restoration via constrained convex optimization.
//!
//! The toolkit restores a hyperspectral cube from Gaussian-plus-sparse mixed
//! noise or from incomplete random-sampling measurements by minimizing a
//! total-variation-type regularizer subject to hard data-fidelity
//! constraints (an l2 ball around the observation, an l1 ball on the sparse
//! noise, and the dynamic-range box), solved with ADMM.
//!
//! Modules:
//! - [`cube`]: the cube value type and its vectorization convention
//! - [`linop`]: difference operators, stacked analysis operators, sampling,
//!   FFT symbols, and linear solvers
//! - [`prox`]: proximity operators and metric projections
//! - [`reg`]: regularizer functionals and their ADMM splitting recipes
//! - [`admm`]: the ADMM engine for the denoising and CS problems
//! - [`problem`]: problem builders and radius heuristics
//! - [`degrade`]: deterministic noise and sampling synthesis
//! - [`metrics`]: PSNR, SSIM, and response-curve extraction
//! - [`io`]: binary cube/mask file formats and the run configuration

pub mod admm;
pub mod cube;
pub mod degrade;
mod error;
pub mod fft;
pub mod io;
pub mod linop;
pub mod metrics;
pub mod problem;
pub mod prox;
pub mod reg;

pub use error::{Error, Result};
