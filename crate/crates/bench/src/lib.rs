//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use slepian_core::{build_basis, channel_eigenvalues, gsvd, ChannelSpectrum, Gsvd, KernelSpec, Statistics, Variant};

pub const BANDWIDTHS: [f64; 3] = [5.0, 20.0, 40.0];

pub fn fermion(c: f64) -> KernelSpec {
    KernelSpec::from_c(Statistics::Fermion, c, 1.0).expect("positive bandwidth")
}

/// `⌈N_c⌉ + 20` modes, the `spectrum` command default.
pub fn mode_count(c: f64) -> usize {
    fermion(c).shannon.ceil() as usize + 20
}

pub fn spectrum(c: f64) -> Arc<ChannelSpectrum> {
    let basis = build_basis(c, mode_count(c), Variant::Laplace).expect("basis");
    Arc::new(channel_eigenvalues(&basis).expect("eigenvalues"))
}

pub fn decomposition(c: f64) -> Gsvd {
    gsvd(&fermion(c), &spectrum(c)).expect("decomposition")
}
