//! Forward and inverse experiments: a synthetic spectrum pushed through the
//! kernel, sampled on the colleague grid, reconstructed on a dense grid, and
//! inverted by L1-regularized least squares in the singular basis.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::legendre::reference_rule;
use crate::prolate::{build_basis, ProlateBasis, Variant};
use crate::sampling::prolate_nodes;
use crate::spectrum::{kernel_unchecked, Gsvd, KernelSpec};

/// Least-squares systems with a larger 2-norm condition number are rejected.
pub const LSQ_CONDITION_LIMIT: f64 = 1e12;

/// One Gaussian `a exp(-(y - y_k)² / (2σ²))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
}

/// Sum of Gaussian peaks on `y ∈ [-1, 1]`, optionally scaled to unit mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralModel {
    pub peaks: Vec<Peak>,
    pub normalized: bool,
    scale: f64,
}

impl SpectralModel {
    pub fn new(peaks: Vec<Peak>, normalized: bool) -> Result<Self> {
        for p in &peaks {
            if !(p.center > -1.0 && p.center < 1.0) {
                return Err(Error::Domain {
                    name: "center",
                    value: p.center,
                    domain: "(-1, 1)",
                });
            }
            if !(p.width > 0.0 && p.width.is_finite()) {
                return Err(Error::Domain {
                    name: "width",
                    value: p.width,
                    domain: "(0, inf)",
                });
            }
            if !(p.amplitude > 0.0 && p.amplitude.is_finite()) {
                return Err(Error::Domain {
                    name: "amplitude",
                    value: p.amplitude,
                    domain: "(0, inf)",
                });
            }
        }
        let mut model = Self {
            peaks,
            normalized,
            scale: 1.0,
        };
        if normalized {
            let mass = model.mass();
            if mass <= 0.0 {
                return Err(Error::InvalidParameter("cannot normalize an empty spectrum".into()));
            }
            model.scale = 1.0 / mass;
        }
        Ok(model)
    }

    /// The identically zero spectrum.
    pub fn zero() -> Self {
        Self {
            peaks: Vec::new(),
            normalized: false,
            scale: 1.0,
        }
    }

    pub fn eval(&self, y: f64) -> f64 {
        let raw: f64 = self
            .peaks
            .iter()
            .map(|p| {
                let z = (y - p.center) / p.width;
                p.amplitude * (-0.5 * z * z).exp()
            })
            .sum();
        self.scale * raw
    }

    /// `∫ A dy` on the reference rule.
    pub fn mass(&self) -> f64 {
        reference_rule().integrate(|y| self.eval(y))
    }
}

/// Four separated peaks inside the band, normalized.
///
/// The parameters are a modelling choice and are not taken from any
/// published figure.
pub fn default_spectrum() -> SpectralModel {
    let centers = [-0.6, -0.23, 0.26, 0.55];
    let widths = [0.08, 0.045, 0.04, 0.10];
    let amplitudes = [0.6, 0.95, 0.9, 0.5];
    let peaks = (0..4)
        .map(|k| Peak {
            center: centers[k],
            width: widths[k],
            amplitude: amplitudes[k],
        })
        .collect();
    SpectralModel::new(peaks, true).expect("default peaks are valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    Uniform,
    ProlateNodes,
}

/// `G` sampled at `xs` (mapped imaginary time).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenSamples {
    pub grid_kind: GridKind,
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
    pub spec: KernelSpec,
}

impl GreenSamples {
    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }
}

/// `n` equispaced points from `-1` to `1`.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n)
            .map(|i| {
                if i + 1 == n {
                    1.0
                } else {
                    -1.0 + 2.0 * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

fn check_grid(xs: &[f64]) -> Result<()> {
    for (i, &x) in xs.iter().enumerate() {
        if !(-1.0..=1.0).contains(&x) {
            return Err(Error::Domain {
                name: "x",
                value: x,
                domain: "[-1, 1]",
            });
        }
        if i > 0 && x <= xs[i - 1] {
            return Err(Error::InvalidParameter(format!(
                "sample points must be strictly increasing (x[{}] = {x})",
                i
            )));
        }
    }
    Ok(())
}

/// `G(x) = ω_max ∫ K^ν(x, y) A(y) dy` by the reference rule.
pub fn forward(spec: &KernelSpec, model: &SpectralModel, xs: &[f64]) -> Result<GreenSamples> {
    check_grid(xs)?;
    let rule = reference_rule();
    let weighted: Vec<(f64, f64)> = rule
        .iter()
        .map(|(y, w)| (y, spec.omega_max * w * model.eval(y)))
        .collect();
    let values = xs
        .iter()
        .map(|&x| {
            weighted
                .iter()
                .filter(|(_, wa)| *wa != 0.0)
                .map(|&(y, wa)| wa * kernel_unchecked(spec, x, y))
                .sum()
        })
        .collect();
    Ok(GreenSamples {
        grid_kind: GridKind::Uniform,
        xs: xs.to_vec(),
        values,
        spec: *spec,
    })
}

/// Least-squares coefficients `g` of `Σ_{n < n_fit} g_n ψ_n` through the
/// samples, and the condition number of the collocation matrix.
pub fn project_onto_modes(basis: &ProlateBasis, samples: &GreenSamples, n_fit: usize) -> Result<(Vec<f64>, f64)> {
    if n_fit == 0 || n_fit > samples.len() {
        return Err(Error::InvalidParameter(format!(
            "cannot fit {n_fit} modes to {} samples",
            samples.len()
        )));
    }
    let modes = basis.modes();
    if n_fit > modes.len() {
        return Err(Error::Index {
            index: n_fit,
            len: modes.len(),
        });
    }
    let a = DMatrix::from_fn(samples.len(), n_fit, |i, n| modes[n].eval(samples.xs[i]));
    let b = DVector::from_column_slice(&samples.values);
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= LSQ_CONDITION_LIMIT) {
        return Err(Error::Singular {
            condition,
            context: format!("collocation matrix of {n_fit} modes at {} points", samples.len()),
        });
    }
    let g = svd.solve(&b, 0.0).map_err(|e| Error::Singular {
        condition,
        context: e.to_string(),
    })?;
    Ok((g.iter().copied().collect(), condition))
}

/// Errors of one sampling/reconstruction run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    /// Number of observation nodes.
    pub m: usize,
    /// Number of fitted modes.
    pub n_fit: usize,
    pub n_dense: usize,
    pub rel_error_l2: f64,
    pub rel_error_linf: f64,
    /// `n_dense / m`.
    pub compression: f64,
    pub condition: f64,
}

/// Dense reference data shared by runs with different `M`.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub spec: KernelSpec,
    pub model: SpectralModel,
    pub basis: ProlateBasis,
    pub n_modes: usize,
    pub dense: GreenSamples,
}

impl Experiment {
    /// Reference `G` on `n_dense` uniform points; fits use at most `n_modes`
    /// modes.
    pub fn new(spec: &KernelSpec, model: &SpectralModel, n_dense: usize, n_modes: usize) -> Result<Self> {
        if n_dense < 2 {
            return Err(Error::InvalidParameter(format!(
                "n_dense = {n_dense} must be at least 2"
            )));
        }
        if n_modes == 0 {
            return Err(Error::InvalidParameter("n_modes must be positive".into()));
        }
        let basis = build_basis(spec.c, n_modes.max(20) + 6, Variant::Laplace)?;
        let dense = forward(spec, model, &uniform_grid(n_dense))?;
        Ok(Self {
            spec: *spec,
            model: model.clone(),
            basis,
            n_modes,
            dense,
        })
    }

    fn basis_for(&self, m: usize) -> Result<std::borrow::Cow<'_, ProlateBasis>> {
        if self.basis.len() > m {
            Ok(std::borrow::Cow::Borrowed(&self.basis))
        } else {
            Ok(std::borrow::Cow::Owned(build_basis(
                self.spec.c,
                m + 6,
                Variant::Laplace,
            )?))
        }
    }

    /// `G` at the `m` zeros of `ψ_m`.
    pub fn observations(&self, m: usize) -> Result<GreenSamples> {
        if m == 0 {
            return Err(Error::InvalidParameter("need at least one observation".into()));
        }
        let basis = self.basis_for(m)?;
        let nodes = prolate_nodes(&basis, m)?;
        let mut samples = forward(&self.spec, &self.model, &nodes)?;
        samples.grid_kind = GridKind::ProlateNodes;
        Ok(samples)
    }

    /// Fits `m` node observations and returns the dense reconstruction with
    /// its report.
    pub fn reconstruct(&self, m: usize) -> Result<(Vec<f64>, ReconstructionReport)> {
        self.reconstruct_from(&self.observations(m)?)
    }

    /// Same as [`Experiment::reconstruct`] from given observations, which
    /// may carry noise.
    pub fn reconstruct_from(&self, obs: &GreenSamples) -> Result<(Vec<f64>, ReconstructionReport)> {
        check_grid(&obs.xs)?;
        let m = obs.len();
        if m == 0 {
            return Err(Error::InvalidParameter("need at least one observation".into()));
        }
        let basis = self.basis_for(m)?;
        let n_fit = m.min(self.n_modes);
        let (g, condition) = project_onto_modes(&basis, obs, n_fit)?;
        let modes = basis.modes();
        let fitted: Vec<f64> = self
            .dense
            .xs
            .iter()
            .map(|&x| g.iter().enumerate().map(|(n, gn)| gn * modes[n].eval(x)).sum())
            .collect();
        let reference = &self.dense.values;
        let diff: Vec<f64> = fitted.iter().zip(reference).map(|(a, b)| a - b).collect();
        let l2 = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let linf = |v: &[f64]| v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let n_dense = reference.len();
        let report = ReconstructionReport {
            m,
            n_fit,
            n_dense,
            rel_error_l2: l2(&diff) / l2(reference),
            rel_error_linf: linf(&diff) / linf(reference),
            compression: n_dense as f64 / m as f64,
            condition,
        };
        Ok((fitted, report))
    }

    pub fn sweep(&self, ms: impl IntoIterator<Item = usize>) -> Result<Vec<ReconstructionReport>> {
        ms.into_iter().map(|m| Ok(self.reconstruct(m)?.1)).collect()
    }
}

/// Samples `G` at the `m` colleague nodes, reconstructs it on `n_dense`
/// uniform points, and reports the relative errors.
pub fn sample_and_reconstruct(
    spec: &KernelSpec,
    model: &SpectralModel,
    m: usize,
    n_dense: usize,
) -> Result<ReconstructionReport> {
    let n_modes = m.max(1);
    Ok(Experiment::new(spec, model, n_dense, n_modes)?.reconstruct(m)?.1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmOptions {
    /// Penalty parameter of the augmented Lagrangian.
    pub penalty: f64,
    pub max_iter: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Modes kept in the inversion; defaults to all the data supports.
    pub n_modes: Option<usize>,
}

impl Default for AdmmOptions {
    fn default() -> Self {
        Self {
            penalty: 1.0,
            max_iter: 5000,
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            n_modes: None,
        }
    }
}

/// Non-convergence is flagged when a residual ends above this.
pub const ADMM_RESIDUAL_LIMIT: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmResult {
    pub rho: Vec<f64>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
    /// [`lasso_optimality`] of `rho`.
    pub kkt_residual: f64,
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Largest violation of the subgradient condition
/// `0 ∈ S(Sρ - g) + λ ∂‖ρ‖₁`, relative to `max(λ, max_n |S_n g_n|)`.
pub fn lasso_optimality(s: &[f64], g: &[f64], lambda: f64, rho: &[f64]) -> f64 {
    let scale = s.iter().zip(g).fold(lambda, |m, (sn, gn)| m.max((sn * gn).abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst: f64 = 0.0;
    for ((&sn, &gn), &r) in s.iter().zip(g).zip(rho) {
        let grad = sn * (sn * r - gn);
        let v = if r != 0.0 {
            (grad + lambda * r.signum()).abs()
        } else {
            (grad.abs() - lambda).max(0.0)
        };
        worst = worst.max(v);
    }
    worst / scale
}

/// `min_ρ ½‖Sρ - g‖² + λ‖ρ‖₁` for diagonal `S > 0` by ADMM.
///
/// The iteration runs on `θ = Sρ`, where the problem reads
/// `½‖θ - g‖² + Σ (λ / S_n) |θ_n|` with the split `θ = z`. In `ρ` the
/// per-coordinate rate would be `S_n² / (S_n² + penalty)` and coordinates
/// with `S_n ~ 10⁶` would not move in any practical number of steps.
/// Residuals and tolerances refer to `θ`. Returns `ρ = z / S`.
pub fn admm_lasso(s: &[f64], g: &[f64], lambda: f64, options: &AdmmOptions) -> Result<AdmmResult> {
    if s.len() != g.len() {
        return Err(Error::InvalidParameter(format!(
            "{} singular values for {} data coefficients",
            s.len(),
            g.len()
        )));
    }
    if let Some(&bad) = s.iter().find(|&&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::Domain {
            name: "singular value",
            value: bad,
            domain: "(0, inf)",
        });
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Domain {
            name: "lambda",
            value: lambda,
            domain: "[0, inf)",
        });
    }
    if !(options.penalty > 0.0) {
        return Err(Error::Domain {
            name: "penalty",
            value: options.penalty,
            domain: "(0, inf)",
        });
    }
    let n = s.len();
    let p = options.penalty;
    let threshold: Vec<f64> = s.iter().map(|sn| lambda / (p * sn)).collect();
    let mut x = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut u = vec![0.0; n];
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let sqrt_n = (n as f64).sqrt();
    let (mut r_pri, mut r_dual) = (f64::INFINITY, f64::INFINITY);
    let (mut eps_pri, mut eps_dual) = (0.0, 0.0);
    let mut iterations = 0;
    for k in 0..options.max_iter {
        iterations = k + 1;
        for i in 0..n {
            x[i] = (g[i] + p * (z[i] - u[i])) / (1.0 + p);
        }
        let z_old = z.clone();
        for i in 0..n {
            z[i] = soft_threshold(x[i] + u[i], threshold[i]);
            u[i] += x[i] - z[i];
        }
        r_pri = x.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        r_dual = p * z.iter().zip(&z_old).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        eps_pri = sqrt_n * options.abs_tol + options.rel_tol * norm(&x).max(norm(&z));
        eps_dual = sqrt_n * options.abs_tol + options.rel_tol * p * norm(&u);
        if r_pri <= eps_pri && r_dual <= eps_dual {
            break;
        }
    }
    let converged = r_pri <= eps_pri.max(ADMM_RESIDUAL_LIMIT) && r_dual <= eps_dual.max(ADMM_RESIDUAL_LIMIT);
    let rho: Vec<f64> = z.iter().zip(s).map(|(t, sn)| t / sn).collect();
    let kkt_residual = lasso_optimality(s, g, lambda, &rho);
    Ok(AdmmResult {
        rho,
        iterations,
        primal_residual: r_pri,
        dual_residual: r_dual,
        converged,
        kkt_residual,
    })
}

/// L1-regularized inversion in the singular basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inversion {
    /// Data projections `g_n` onto `U_n`.
    pub g: Vec<f64>,
    /// `S_n` of the modes used.
    pub s: Vec<f64>,
    pub admm: AdmmResult,
}

impl Inversion {
    pub fn rho(&self) -> &[f64] {
        &self.admm.rho
    }

    /// `Â(y) = Σ ρ_n V_n(y)`.
    pub fn estimate(&self, gsvd: &Gsvd, y: f64) -> Result<f64> {
        let mut sum = 0.0;
        for (n, &r) in self.admm.rho.iter().enumerate() {
            if r != 0.0 {
                sum += r * gsvd.v(n, y)?;
            }
        }
        Ok(sum)
    }
}

/// Projects `samples` onto `U_n` and solves the LASSO problem with the
/// singular values kept in the forward matrix, so modes with small `S_n`
/// are damped by the penalty instead of amplified by `g_n / S_n`.
pub fn admm_invert(gsvd: &Gsvd, samples: &GreenSamples, lambda: f64, options: &AdmmOptions) -> Result<Inversion> {
    if (samples.spec.c - gsvd.spec.c).abs() > 1e-12 * gsvd.spec.c.max(1.0)
        || samples.spec.statistics != gsvd.spec.statistics
    {
        return Err(Error::InvalidParameter(
            "samples and decomposition describe different kernels".into(),
        ));
    }
    check_grid(&samples.xs)?;
    let n = options
        .n_modes
        .unwrap_or(samples.len())
        .min(samples.len())
        .min(gsvd.len());
    let (g, _) = project_onto_modes(gsvd.basis(), samples, n)?;
    let s: Vec<f64> = gsvd.triples[..n].iter().map(|t| t.s).collect();
    let admm = admm_lasso(&s, &g, lambda, options)?;
    Ok(Inversion { g, s, admm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::Statistics;

    #[test]
    fn default_model_is_normalized_and_decays() {
        let a = default_spectrum();
        assert_eq!(a.peaks.len(), 4);
        assert!((a.mass() - 1.0).abs() < 1e-10);
        let peak = (0..=2000).map(|i| a.eval(-1.0 + i as f64 / 1000.0)).fold(0.0, f64::max);
        assert!(a.eval(1.0) < 1e-3 * peak && a.eval(-1.0) < 1e-3 * peak);
    }

    #[test]
    fn invalid_peaks() {
        let p = Peak {
            center: 0.0,
            width: 0.0,
            amplitude: 1.0,
        };
        assert!(SpectralModel::new(vec![p], true).is_err());
        assert!(SpectralModel::new(
            vec![Peak {
                center: 1.5,
                width: 0.1,
                ..p
            }],
            false
        )
        .is_err());
        assert!(SpectralModel::new(vec![], true).is_err());
    }

    #[test]
    fn zero_spectrum_gives_zero() {
        let spec = KernelSpec::from_c(Statistics::Fermion, 20.0, 1.0).unwrap();
        let g = forward(&spec, &SpectralModel::zero(), &uniform_grid(11)).unwrap();
        assert!(g.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn grid_validation() {
        let spec = KernelSpec::from_c(Statistics::Fermion, 5.0, 1.0).unwrap();
        let a = default_spectrum();
        assert!(forward(&spec, &a, &[0.0, 0.0]).is_err());
        assert!(forward(&spec, &a, &[-1.5]).is_err());
        let u = uniform_grid(201);
        assert_eq!(u.len(), 201);
        assert_eq!((u[0], u[100], u[200]), (-1.0, 0.0, 1.0));
    }

    #[test]
    fn narrow_peak_is_a_kernel_slice() {
        let spec = KernelSpec::from_c(Statistics::Fermion, 5.0, 2.0).unwrap();
        let (y0, w) = (0.3, 0.01);
        let a = SpectralModel::new(
            vec![Peak {
                center: y0,
                width: w,
                amplitude: 1.0,
            }],
            true,
        )
        .unwrap();
        let xs = uniform_grid(9);
        let g = forward(&spec, &a, &xs).unwrap();
        for (&x, &v) in xs.iter().zip(&g.values) {
            let k = spec.omega_max * kernel_unchecked(&spec, x, y0);
            assert!((v - k).abs() / k < 2.0 * (w * spec.c).powi(2), "x={x}");
        }
    }

    #[test]
    fn soft_threshold_values() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
    }

    #[test]
    fn unregularized_lasso_is_least_squares() {
        let s = [4.0, 2.0, 1.0, 0.5];
        let g = [1.0, -2.0, 0.25, 3.0];
        let r = admm_lasso(&s, &g, 0.0, &AdmmOptions::default()).unwrap();
        assert!(r.converged);
        for i in 0..4 {
            assert!((r.rho[i] - g[i] / s[i]).abs() < 1e-8);
        }
        assert!(r.kkt_residual < 1e-8);
    }

    #[test]
    fn lasso_on_diagonal_has_closed_form() {
        let s = [3.0, 1.0, 0.2];
        let g = [2.0, 0.1, 5.0];
        let lambda = 0.5;
        let r = admm_lasso(&s, &g, lambda, &AdmmOptions::default()).unwrap();
        for i in 0..3 {
            let exact = soft_threshold(s[i] * g[i], lambda) / (s[i] * s[i]);
            assert!(
                (r.rho[i] - exact).abs() < 1e-7 * exact.abs().max(1.0),
                "{i}: {} vs {exact}",
                r.rho[i]
            );
        }
        assert!(lasso_optimality(&s, &g, lambda, &r.rho) < 1e-6);
        assert!(lasso_optimality(&s, &g, lambda, &[0.0, 0.0, 0.0]) > 0.1);
    }

    #[test]
    fn admm_rejects_bad_input() {
        let o = AdmmOptions::default();
        assert!(admm_lasso(&[1.0], &[1.0, 2.0], 0.0, &o).is_err());
        assert!(admm_lasso(&[1.0], &[1.0], -1.0, &o).is_err());
    }

    #[test]
    fn reconstruction_report_fields() {
        let spec = KernelSpec::from_c(Statistics::Fermion, 20.0, 1.0).unwrap();
        let r = sample_and_reconstruct(&spec, &default_spectrum(), 13, 201).unwrap();
        assert_eq!(r.m, 13);
        assert_eq!(r.n_fit, 13);
        assert_eq!(r.compression, 201.0 / 13.0);
        assert!(r.rel_error_l2 < 1.7e-2 && r.rel_error_linf.is_finite());
        assert!(sample_and_reconstruct(&spec, &default_spectrum(), 13, 1).is_err());
        assert!(sample_and_reconstruct(&spec, &default_spectrum(), 0, 201).is_err());
    }
}
