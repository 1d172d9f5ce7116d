//! Invariant suite comparing the analytic pipeline with brute-force
//! references at one bandwidth.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::legendre::reference_rule;
use crate::oracle::{bisection_roots, min_nystrom_order, nystrom_eigs};
use crate::prolate::{build_basis, commutation_residual, Variant};
use crate::sampling::SamplingGrid;
use crate::spectrum::{
    channel_eigenvalues, effective_potential_residual, gsvd, kernel_unchecked, log_metric_weight, ChannelSpectrum,
    KernelSpec,
};

/// Modes below this fraction of `|μ_0|` are not compared with the oracle.
pub const ORACLE_FLOOR: f64 = 1e-12;
/// Floor of the eigenvalue cliff check.
pub const CLIFF_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    pub fn new(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            tolerance,
            passed: measured.is_finite() && measured <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub spec: KernelSpec,
    pub checks: Vec<CheckResult>,
}

impl CheckReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Analytic eigenpairs against the double-double Nyström oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleAgreement {
    /// Modes above [`ORACLE_FLOOR`] that were compared.
    pub modes: usize,
    /// `max |λ - μ_n| / |μ_n|`.
    pub eigenvalue_error: f64,
    /// `max |ψ_n(x_q) ± f_n(x_q)|` over the oracle nodes, after sign alignment.
    pub eigenfunction_error: f64,
}

/// Compares every analytic mode above [`ORACLE_FLOOR`] with the Nyström
/// eigenpair closest in value.
pub fn oracle_agreement(c: f64, q: usize) -> Result<OracleAgreement> {
    let q = q.max(min_nystrom_order(c));
    let eig = nystrom_eigs(c, q)?;
    let top = eig.eigenvalues[0].abs();
    let count = eig
        .eigenvalues
        .iter()
        .take_while(|l| l.abs() > ORACLE_FLOOR * top)
        .count();
    let basis = build_basis(c, count + 2, Variant::Laplace)?;
    let cs = channel_eigenvalues(&basis)?;
    let mut agreement = OracleAgreement {
        modes: 0,
        eigenvalue_error: 0.0,
        eigenfunction_error: 0.0,
    };
    for (n, &mu) in cs.mu.iter().enumerate() {
        if mu.abs() <= ORACLE_FLOOR * top {
            continue;
        }
        let (j, lambda) = eig
            .eigenvalues
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| (a.1 - mu).abs().total_cmp(&(b.1 - mu).abs()))
            .expect("oracle returned eigenvalues");
        agreement.modes += 1;
        agreement.eigenvalue_error = agreement.eigenvalue_error.max((lambda - mu).abs() / mu.abs());
        let mode = &basis.modes()[n];
        let column = eig.eigenfunctions.column(j);
        let dot: f64 = eig
            .nodes
            .iter()
            .zip(column.iter())
            .map(|(&x, f)| mode.eval(x) * f)
            .sum();
        let sign = if dot < 0.0 { -1.0 } else { 1.0 };
        for (&x, &f) in eig.nodes.iter().zip(column.iter()) {
            agreement.eigenfunction_error = agreement.eigenfunction_error.max((mode.eval(x) - sign * f).abs());
        }
    }
    Ok(agreement)
}

/// Largest ratio `r_{k+1} / r_k` of consecutive magnitude-ordered relative
/// eigenvalues from `k = ⌈N_c + 2⌉` while `r_k` stays above [`CLIFF_FLOOR`].
/// Below `1` means the tail is strictly decreasing.
pub fn cliff_ratio(cs: &ChannelSpectrum) -> f64 {
    let r = cs.relative_magnitudes();
    let start = (2.0 * cs.c() / std::f64::consts::PI + 2.0).ceil() as usize;
    let mut worst: f64 = 0.0;
    for k in start..r.len().saturating_sub(1) {
        if r[k] <= CLIFF_FLOOR {
            break;
        }
        worst = worst.max(r[k + 1] / r[k]);
    }
    worst
}

/// Spectrum with enough modes to fall below [`CLIFF_FLOOR`].
pub fn spectrum_to_floor(c: f64) -> Result<ChannelSpectrum> {
    let mut n = (2.0 * c / std::f64::consts::PI).ceil() as usize + 20;
    loop {
        let cs = channel_eigenvalues(&build_basis(c, n, Variant::Laplace)?)?;
        let r = cs.relative_magnitudes();
        if r.last().is_some_and(|&v| v < CLIFF_FLOOR) || n > 400 {
            return Ok(cs);
        }
        n += 20;
    }
}

/// `points` equispaced points on `[-1, 1]`, endpoints included.
fn uniform(points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| -1.0 + 2.0 * i as f64 / (points - 1) as f64)
        .collect()
}

/// Generalized-SVD residuals: `max |⟨V_m, V_n⟩_ν - δ_mn|` for
/// `m, n < n_inner` with the metric applied explicitly, and
/// `max |K - Σ S_n U_n V_n| / max |K|` on a `points × points` grid with
/// `n_terms` modes.
pub fn gsvd_residuals(spec: &KernelSpec, n_inner: usize, n_terms: usize, points: usize) -> Result<(f64, f64)> {
    let basis = build_basis(spec.c, n_inner.max(n_terms), Variant::Laplace)?;
    let cs = Arc::new(channel_eigenvalues(&basis)?);
    let g = gsvd(spec, &cs)?;
    let rule = reference_rule();
    let log_rho: Vec<f64> = rule
        .nodes
        .iter()
        .map(|&y| log_metric_weight(spec, y))
        .collect::<Result<_>>()?;
    let table: Vec<Vec<f64>> = (0..n_inner)
        .map(|n| rule.nodes.iter().map(|&y| g.v(n, y)).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    let mut orth: f64 = 0.0;
    for m in 0..n_inner {
        for n in 0..=m {
            let mut sum = 0.0;
            for q in 0..rule.order() {
                let fg = table[m][q] * table[n][q];
                if fg != 0.0 {
                    sum += rule.weights[q] * fg.signum() * (fg.abs().ln() + log_rho[q]).exp();
                }
            }
            let target = if m == n { 1.0 } else { 0.0 };
            orth = orth.max((sum - target).abs());
        }
    }
    let xs = uniform(points);
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for &x in &xs {
        for &y in &xs {
            let k = kernel_unchecked(spec, x, y);
            worst = worst.max((g.reconstruct(x, y, n_terms)? - k).abs());
            scale = scale.max(k.abs());
        }
    }
    Ok((orth, worst / scale))
}

/// Worst residual and fitted shift over modes `n ≤ n_max` on `|y| ≤ 0.9`.
pub fn potential_residuals(spec: &KernelSpec, n_max: usize) -> Result<(f64, f64)> {
    let basis = build_basis(spec.c, n_max + 2, Variant::Laplace)?;
    let grid: Vec<f64> = (0..=90).map(|k| -0.9 + 0.02 * k as f64).collect();
    let mut residual: f64 = 0.0;
    let mut kappa: f64 = 0.0;
    for n in 0..=n_max {
        let r = effective_potential_residual(spec, &basis, n, &grid)?;
        residual = residual.max(r.residual);
        kappa = kappa.max(r.kappa.abs());
    }
    Ok((residual, kappa))
}

/// Properties of the sampling grid of order `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeCheck {
    pub expected: usize,
    pub found: usize,
    pub max_residual: f64,
    /// `max |x_i + x_{N-1-i}|`.
    pub symmetry: f64,
    /// Roots found by scanning and bisection.
    pub bisection_found: usize,
    /// `max |x_i - x_i^bisect|`; infinite when the counts differ.
    pub bisection: f64,
    /// `max_{k<N} |Σ w_i ψ_k(x_i) - ∫ ψ_k|`.
    pub moments: f64,
}

pub fn node_check(spec: &KernelSpec, order: Option<usize>) -> Result<NodeCheck> {
    let grid = SamplingGrid::for_spec(spec, order)?;
    let n = grid.n;
    let basis = build_basis(spec.c, n + 5, Variant::Laplace)?;
    let nodes = &grid.nodes;
    let symmetry = (0..nodes.len())
        .map(|i| (nodes[i] + nodes[nodes.len() - 1 - i]).abs())
        .fold(0.0, f64::max);
    let mode = &basis.modes()[n];
    let reference = bisection_roots(|x| mode.eval(x), 20_000);
    let bisection = if reference.len() == nodes.len() {
        nodes
            .iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    let rule = reference_rule();
    let moments = basis.modes()[..n]
        .iter()
        .map(|m| (grid.integrate(|x| m.eval(x)) - rule.integrate(|x| m.eval(x))).abs())
        .fold(0.0, f64::max);
    Ok(NodeCheck {
        expected: n,
        found: nodes.len(),
        max_residual: grid.residuals.iter().copied().fold(0.0, f64::max),
        symmetry,
        bisection_found: reference.len(),
        bisection,
        moments,
    })
}

/// The full suite at `spec.c` for `spec.statistics`.
pub fn run_checks(spec: &KernelSpec) -> Result<CheckReport> {
    let c = spec.c;
    let mut checks = Vec::new();

    let shannon = (spec.shannon * std::f64::consts::PI / (spec.beta * spec.omega_max) - 1.0).abs();
    checks.push(CheckResult::new("shannon number 2c/pi", shannon, 1e-15));

    let cs = spectrum_to_floor(c)?;
    checks.push(CheckResult::new(
        "eigenvalue tail ratio past N_c + 2",
        cliff_ratio(&cs),
        1.0 - 1e-12,
    ));

    let oracle = oracle_agreement(c, 400)?;
    checks.push(CheckResult::new(
        "eigenvalues vs Nystrom (relative)",
        oracle.eigenvalue_error,
        1e-8,
    ));
    checks.push(CheckResult::new(
        "eigenfunctions vs Nystrom",
        oracle.eigenfunction_error,
        1e-8,
    ));

    let points = uniform(50);
    checks.push(CheckResult::new(
        "commutation residual (Laplace)",
        commutation_residual(c, &points, Variant::Laplace),
        1e-9,
    ));
    checks.push(CheckResult::new(
        "commutation residual (Fourier)",
        commutation_residual(c, &points, Variant::Fourier),
        1e-12,
    ));

    let n_terms = 40.max(spec.shannon.ceil() as usize + 28);
    let (orth, recon) = gsvd_residuals(spec, 21, n_terms, 30)?;
    checks.push(CheckResult::new("right singular functions orthonormal", orth, 1e-10));
    checks.push(CheckResult::new("kernel from singular triples", recon, 1e-10));

    let (residual, kappa) = potential_residuals(spec, 10)?;
    checks.push(CheckResult::new("effective potential residual", residual, 1e-6));
    checks.push(CheckResult::new("effective potential shift", kappa, 1e-6));

    let nodes = node_check(spec, None)?;
    checks.push(CheckResult::new(
        "node count deficit",
        nodes.expected.abs_diff(nodes.found) as f64,
        0.0,
    ));
    checks.push(CheckResult::new(
        "node residual |psi_N(x_i)|",
        nodes.max_residual,
        1e-10,
    ));
    checks.push(CheckResult::new("node symmetry", nodes.symmetry, 1e-12));
    checks.push(CheckResult::new("nodes vs bisection", nodes.bisection, 1e-11));
    checks.push(CheckResult::new("weight moments", nodes.moments, 1e-9));

    Ok(CheckReport { spec: *spec, checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::Statistics;

    #[test]
    fn suite_passes_at_small_c() {
        let spec = KernelSpec::from_c(Statistics::Fermion, 2.0, 1.0).unwrap();
        let report = run_checks(&spec).unwrap();
        for c in &report.checks {
            assert!(c.passed, "{c:?}");
        }
    }

    #[test]
    fn failing_measurements_fail() {
        assert!(!CheckResult::new("x", f64::NAN, 1.0).passed);
        assert!(!CheckResult::new("x", 2.0, 1.0).passed);
        assert!(CheckResult::new("x", 1.0, 1.0).passed);
    }
}
