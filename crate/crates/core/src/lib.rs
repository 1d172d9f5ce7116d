//! Analytical singular structure of imaginary-time analytic-continuation
//! kernels.
//!
//! The Laplace factor `e^{-cxy}` shared by the fermionic and bosonic kernels
//! commutes with a Sturm–Liouville operator. Its eigenfunctions (prolate
//! functions continued to imaginary bandwidth) and eigenvalues come from a
//! small tridiagonal problem in the Legendre basis. Statistics only change
//! the frequency-space metric, which gives the generalized SVD of both
//! kernels in closed form. The zeros of `ψ_N` with `N = ⌈2c/π⌉`, found as
//! eigenvalues of a Legendre colleague matrix, are the sampling grid.

mod dd;
pub mod error;
pub mod legendre;
pub mod oracle;
pub mod prolate;
pub mod reconstruct;
pub mod sampling;
pub mod spectrum;
pub mod validation;

pub use error::{Error, Result};
pub use legendre::{LegendreSeries, QuadratureRule};
pub use prolate::{build_basis, ProlateBasis, ProlateMode, Variant};
pub use reconstruct::{
    admm_invert, default_spectrum, forward, sample_and_reconstruct, AdmmOptions, Experiment, GreenSamples, GridKind,
    ReconstructionReport, SpectralModel,
};
pub use sampling::{truncation_order, SamplingGrid};
pub use spectrum::{channel_eigenvalues, gsvd, ChannelSpectrum, Gsvd, KernelSpec, Statistics};
pub use validation::{run_checks, CheckReport, CheckResult};
