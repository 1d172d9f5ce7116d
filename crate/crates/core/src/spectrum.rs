//! Kernel eigenvalues, statistical metrics and the generalized SVD.
//!
//! In the mapped variables `x = 2τ/β - 1`, `y = ω/ω_max` both physical
//! kernels factor as
//!
//! ```text
//! K^F(x, y) = (1/2)     e^{-cxy} / cosh(cy)
//! K^B(x, y) = (ω_max/2) e^{-cxy} · y / sinh(cy)
//! ```
//!
//! so with the gauge factors `g^F = cosh(cy)`, `g^B = sinh(cy)/y` and the
//! eigen-expansion `e^{-cxy} = Σ μ_n ψ_n(x) ψ_n(y)` the generalized SVD with
//! respect to `ρ = g²` is explicit:
//! `U_n = ψ_n`, `V_n = sgn(μ_n) ψ_n / g`, `S^F_n = |μ_n|/2`,
//! `S^B_n = ω_max |μ_n|/2`.

use std::f64::consts::{LN_2, PI};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dd;
use crate::error::{Error, Result};
use crate::legendre::{check_domain, reference_rule, QuadratureRule};
use crate::prolate::{ProlateBasis, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistics {
    Fermion,
    Boson,
}

impl std::fmt::Display for Statistics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Statistics::Fermion => "fermion",
            Statistics::Boson => "boson",
        })
    }
}

impl std::str::FromStr for Statistics {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fermion" | "f" => Ok(Statistics::Fermion),
            "boson" | "b" => Ok(Statistics::Boson),
            other => Err(Error::InvalidParameter(format!("unknown statistics '{other}'"))),
        }
    }
}

/// Physical kernel parameters and the derived bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub statistics: Statistics,
    pub beta: f64,
    pub omega_max: f64,
    /// `β ω_max / 2`.
    pub c: f64,
    /// Shannon number `N_c = 2c/π = β ω_max / π`.
    pub shannon: f64,
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value,
            domain: "(0, inf)",
        })
    }
}

impl KernelSpec {
    pub fn new(statistics: Statistics, beta: f64, omega_max: f64) -> Result<Self> {
        positive("beta", beta)?;
        positive("omega_max", omega_max)?;
        let c = beta * omega_max / 2.0;
        Ok(Self {
            statistics,
            beta,
            omega_max,
            c,
            shannon: 2.0 * c / PI,
        })
    }

    /// Spec with bandwidth `c`; `β` follows as `2c / ω_max`.
    pub fn from_c(statistics: Statistics, c: f64, omega_max: f64) -> Result<Self> {
        positive("c", c)?;
        positive("omega_max", omega_max)?;
        Ok(Self {
            statistics,
            beta: 2.0 * c / omega_max,
            omega_max,
            c,
            shannon: 2.0 * c / PI,
        })
    }

    pub fn with_statistics(self, statistics: Statistics) -> Self {
        Self { statistics, ..self }
    }

    pub fn tau_to_x(&self, tau: f64) -> f64 {
        2.0 * tau / self.beta - 1.0
    }

    pub fn x_to_tau(&self, x: f64) -> f64 {
        self.beta * (x + 1.0) / 2.0
    }

    pub fn omega_to_y(&self, omega: f64) -> f64 {
        omega / self.omega_max
    }

    pub fn y_to_omega(&self, y: f64) -> f64 {
        y * self.omega_max
    }

    /// Prefactor of `S_n` in units of `|μ_n|`.
    pub fn singular_scale(&self) -> f64 {
        match self.statistics {
            Statistics::Fermion => 0.5,
            Statistics::Boson => 0.5 * self.omega_max,
        }
    }
}

/// `log cosh t` without overflow.
pub fn log_cosh(t: f64) -> f64 {
    let a = t.abs();
    a + (-2.0 * a).exp().ln_1p() - LN_2
}

/// `log(sinh t / t)`, `0` at `t = 0`.
pub fn log_sinhc(t: f64) -> f64 {
    let a = t.abs();
    if a < 1e-4 {
        a * a / 6.0
    } else if a < 20.0 {
        (a.sinh() / a).ln()
    } else {
        a + (-(-2.0 * a).exp()).ln_1p() - LN_2 - a.ln()
    }
}

/// `log g(y)` with `g^F = cosh(cy)`, `g^B = sinh(cy)/y` (`= c` at `y = 0`).
pub fn log_gauge(statistics: Statistics, c: f64, y: f64) -> f64 {
    match statistics {
        Statistics::Fermion => log_cosh(c * y),
        Statistics::Boson => c.ln() + log_sinhc(c * y),
    }
}

/// `K^ν(x, y)` in the mapped variables, evaluated in log space.
pub fn kernel_value(spec: &KernelSpec, x: f64, y: f64) -> Result<f64> {
    check_domain("x", x)?;
    check_domain("y", y)?;
    Ok(kernel_unchecked(spec, x, y))
}

pub(crate) fn kernel_unchecked(spec: &KernelSpec, x: f64, y: f64) -> f64 {
    let c = spec.c;
    spec.singular_scale() * (-c * x * y - log_gauge(spec.statistics, c, y)).exp()
}

/// Raw metric `ρ(y) = g(y)²`; overflows are reported, not returned as `inf`.
pub fn metric_weight(spec: &KernelSpec, y: f64) -> Result<f64> {
    let log = log_metric_weight(spec, y)?;
    let value = log.exp();
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Overflow("metric weight"))
    }
}

/// `log ρ(y)`, safe for any `c`.
pub fn log_metric_weight(spec: &KernelSpec, y: f64) -> Result<f64> {
    check_domain("y", y)?;
    Ok(2.0 * log_gauge(spec.statistics, spec.c, y))
}

/// How an eigenvalue was extracted from its eigenfunction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EigenvalueRoute {
    /// Integral equation at `x = 0` (differentiated once for odd modes).
    Origin,
    /// `∫ e^{-c x* y} ψ_n(y) dy / ψ_n(x*)` by reference quadrature.
    Point { x: f64 },
}

/// Sample points tried when the origin formula is ill-conditioned.
pub const FALLBACK_POINTS: [f64; 8] = [0.1, 0.2, 0.37, 0.5, 0.65, 0.8, 0.9, 1.0];

/// Cancellation factor above which the origin formula is abandoned.
pub const ORIGIN_CONDITION_LIMIT: f64 = 1e3;

/// Eigenvalues `μ_n` of `e^{-cxy}` on `[-1, 1]`, indexed like the basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpectrum {
    pub basis: ProlateBasis,
    /// Signed `μ_n`.
    pub mu: Vec<f64>,
    /// Indices sorted by descending `|μ_n|`.
    pub magnitude_order: Vec<usize>,
    pub routes: Vec<EigenvalueRoute>,
    /// Cancellation factor of the route used for each mode.
    pub conditions: Vec<f64>,
}

impl ChannelSpectrum {
    pub fn c(&self) -> f64 {
        self.basis.c
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    /// `|μ_n| / max|μ|` in magnitude order.
    pub fn relative_magnitudes(&self) -> Vec<f64> {
        let top = self.mu[self.magnitude_order[0]].abs();
        self.magnitude_order.iter().map(|&n| self.mu[n].abs() / top).collect()
    }

    /// Number of modes with `|μ_n| / max|μ| > threshold`.
    pub fn count_above(&self, threshold: f64) -> usize {
        self.relative_magnitudes().iter().filter(|&&r| r > threshold).count()
    }
}

/// Computes every `μ_n` of a Laplace-variant basis from its Legendre
/// coefficients.
///
/// The integral equation `∫ e^{-cxy} ψ_n(y) dy = μ_n ψ_n(x)` at `x = 0` gives
/// `μ_n = 2 d_0 / ψ_n(0)` for even modes and, after one `x`-derivative,
/// `μ_n = -(2c/3) d_1 / ψ'_n(0)` for odd ones. When `ψ_n(0)` (or `ψ'_n(0)`) is
/// itself a cancellation remainder the equation is evaluated at the points in
/// [`FALLBACK_POINTS`] instead, keeping the best-conditioned result.
pub fn channel_eigenvalues(basis: &ProlateBasis) -> Result<ChannelSpectrum> {
    if basis.variant != Variant::Laplace {
        return Err(Error::InvalidParameter(
            "kernel eigenvalues need a Laplace-variant basis".into(),
        ));
    }
    let c = basis.c;
    let rule = reference_rule();
    let mut mu = Vec::with_capacity(basis.len());
    let mut routes = Vec::with_capacity(basis.len());
    let mut conditions = Vec::with_capacity(basis.len());

    for mode in basis.modes() {
        let d = &mode.coeffs.coeffs;
        let (origin, origin_cond) = if mode.index % 2 == 0 {
            let den = mode.eval(0.0);
            (2.0 * d[0] / den, mode.coeffs.abs_sum(0.0) / den.abs())
        } else {
            let den = mode.eval_derivative(0.0);
            let d1 = d.get(1).copied().unwrap_or(0.0);
            (
                -(2.0 * c / 3.0) * d1 / den,
                mode.derivative_series().abs_sum(0.0) / den.abs(),
            )
        };
        let mut best = (origin, EigenvalueRoute::Origin, origin_cond);
        if !(origin_cond.is_finite() && origin_cond <= ORIGIN_CONDITION_LIMIT) {
            best.2 = if origin_cond.is_finite() {
                origin_cond
            } else {
                f64::INFINITY
            };
            for &x in &FALLBACK_POINTS {
                let mut integral = 0.0;
                let mut magnitude = 0.0;
                for (t, w) in rule.iter() {
                    let term = w * (-c * x * t).exp() * mode.eval(t);
                    integral += term;
                    magnitude += term.abs();
                }
                let den = mode.eval(x);
                let cond = magnitude / integral.abs() + mode.coeffs.abs_sum(x) / den.abs();
                if cond.is_finite() && cond < best.2 {
                    best = (integral / den, EigenvalueRoute::Point { x }, cond);
                }
            }
        }
        if !(best.0.is_finite() && best.2.is_finite()) {
            return Err(Error::Singular {
                condition: best.2,
                context: format!("no usable eigenvalue route for mode {}", mode.index),
            });
        }
        mu.push(best.0);
        routes.push(best.1);
        conditions.push(best.2);
    }

    let mut magnitude_order: Vec<usize> = (0..mu.len()).collect();
    magnitude_order.sort_by(|&a, &b| mu[b].abs().total_cmp(&mu[a].abs()));
    Ok(ChannelSpectrum {
        basis: basis.clone(),
        mu,
        magnitude_order,
        routes,
        conditions,
    })
}

/// `max |e^{-cxy} - Σ_{n<n_terms} μ_n ψ_n(x) ψ_n(y)| / e^c` over the nodes of
/// `rule` (both arguments).
pub fn bilinear_residual(cs: &ChannelSpectrum, n_terms: usize, rule: &QuadratureRule) -> Result<f64> {
    if n_terms > cs.len() {
        return Err(Error::Index {
            index: n_terms,
            len: cs.len(),
        });
    }
    let c = cs.c();
    let modes = &cs.basis.modes()[..n_terms];
    let table: Vec<Vec<f64>> = rule
        .nodes
        .iter()
        .map(|&x| modes.iter().map(|m| m.eval(x)).collect())
        .collect();
    let mut worst: f64 = 0.0;
    for (i, &x) in rule.nodes.iter().enumerate() {
        for (j, &y) in rule.nodes.iter().enumerate() {
            let sum: f64 = (0..n_terms).map(|n| cs.mu[n] * table[i][n] * table[j][n]).sum();
            worst = worst.max(((-c * x * y).exp() - sum).abs());
        }
    }
    Ok(worst / c.exp())
}

/// One generalized singular triple. `U_n = ψ_n` lives in the shared basis;
/// `V_n` is evaluated through [`Gsvd::v`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GsvdTriple {
    pub n: usize,
    /// `S_n > 0`.
    pub s: f64,
    /// `sgn(μ_n)`.
    pub sign: f64,
}

/// Per-mode data for the quadrature form `(K ψ_n)(y) = ∫ e^{-cyt} ψ_n(t) dt`.
#[derive(Debug, Clone)]
struct ImageData {
    /// `w_q ψ_n(t_q)`.
    weighted: Vec<f64>,
    /// `w_q (|ψ_n(t_q)| + Σ_m |d_m P_m(t_q)|)`, the rounding scale.
    scale: Vec<f64>,
}

/// Generalized SVD of `K^ν` with respect to `⟨f, g⟩_ν = ∫ f g ρ^ν dy`.
#[derive(Debug, Clone)]
pub struct Gsvd {
    pub spec: KernelSpec,
    pub spectrum: Arc<ChannelSpectrum>,
    pub triples: Vec<GsvdTriple>,
    images: Vec<ImageData>,
}

/// Builds the triples for every mode of `spectrum`.
///
/// The spectrum is shared, not copied: fermionic and bosonic decompositions
/// built from the same `Arc` have the very same left functions.
pub fn gsvd(spec: &KernelSpec, spectrum: &Arc<ChannelSpectrum>) -> Result<Gsvd> {
    let c = spectrum.c();
    if (c - spec.c).abs() > 1e-12 * c.max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "kernel spec has c = {} but the basis was built for c = {c}",
            spec.c
        )));
    }
    let scale = spec.singular_scale();
    let triples = spectrum
        .mu
        .iter()
        .enumerate()
        .map(|(n, &mu)| GsvdTriple {
            n,
            s: scale * mu.abs(),
            sign: if mu < 0.0 { -1.0 } else { 1.0 },
        })
        .collect();
    let rule = reference_rule();
    let images = spectrum
        .basis
        .modes()
        .iter()
        .map(|mode| {
            let mut weighted = Vec::with_capacity(rule.order());
            let mut scale = Vec::with_capacity(rule.order());
            for (t, w) in rule.iter() {
                let v = mode.eval(t);
                weighted.push(w * v);
                scale.push(w * (v.abs() + mode.coeffs.abs_sum(t)));
            }
            ImageData { weighted, scale }
        })
        .collect();
    Ok(Gsvd {
        spec: *spec,
        spectrum: Arc::clone(spectrum),
        triples,
        images,
    })
}

impl Gsvd {
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn basis(&self) -> &ProlateBasis {
        &self.spectrum.basis
    }

    /// `U_n(x) = ψ_n(x)`.
    pub fn u(&self, n: usize, x: f64) -> Result<f64> {
        self.basis().eval_mode(n, x)
    }

    /// `μ_n ψ_n(y) / g(y)`, by whichever of the direct and quadrature forms
    /// has the smaller rounding estimate.
    fn mu_psi_over_g(&self, n: usize, y: f64) -> f64 {
        let c = self.spec.c;
        let log_g = log_gauge(self.spec.statistics, c, y);
        let mode = &self.basis().modes()[n];
        let mu = self.spectrum.mu[n];
        let inv_g = (-log_g).exp();

        let direct = mu * mode.eval(y) * inv_g;
        let direct_err = mu.abs() * mode.coeffs.abs_sum(y) * inv_g * f64::EPSILON
            + direct.abs() * f64::EPSILON * self.spectrum.conditions[n];

        let img = &self.images[n];
        let rule = reference_rule();
        let mut image = 0.0;
        let mut image_err = 0.0;
        for (q, &t) in rule.nodes.iter().enumerate() {
            let e = (-c * y * t - log_g).exp();
            image += e * img.weighted[q];
            image_err += e * img.scale[q];
        }
        image_err *= f64::EPSILON;
        if image_err < direct_err {
            image
        } else {
            direct
        }
    }

    /// `V_n(y) = sgn(μ_n) ψ_n(y) / g(y)`.
    pub fn v(&self, n: usize, y: f64) -> Result<f64> {
        self.check(n, y)?;
        Ok(self.mu_psi_over_g(n, y) / self.spectrum.mu[n].abs())
    }

    /// `S_n V_n(y)`.
    pub fn sv(&self, n: usize, y: f64) -> Result<f64> {
        self.check(n, y)?;
        Ok(self.spec.singular_scale() * self.mu_psi_over_g(n, y))
    }

    /// `Σ_{n < n_terms} S_n U_n(x) V_n(y)`.
    pub fn reconstruct(&self, x: f64, y: f64, n_terms: usize) -> Result<f64> {
        if n_terms > self.len() {
            return Err(Error::Index {
                index: n_terms,
                len: self.len(),
            });
        }
        check_domain("x", x)?;
        check_domain("y", y)?;
        let modes = self.basis().modes();
        let mut sum = 0.0;
        for n in 0..n_terms {
            sum += modes[n].eval(x) * self.mu_psi_over_g(n, y);
        }
        Ok(self.spec.singular_scale() * sum)
    }

    /// `⟨V_m, V_n⟩_ν` with the gauge factors cancelled against the metric,
    /// i.e. `sgn(μ_m) sgn(μ_n) ∫ ψ_m ψ_n dy`.
    pub fn v_inner(&self, m: usize, n: usize, rule: &QuadratureRule) -> Result<f64> {
        let modes = self.basis().modes();
        let (a, b) = (
            modes.get(m).ok_or(Error::Index {
                index: m,
                len: modes.len(),
            })?,
            modes.get(n).ok_or(Error::Index {
                index: n,
                len: modes.len(),
            })?,
        );
        let sign = self.triples[m].sign * self.triples[n].sign;
        Ok(sign * rule.integrate(|y| a.eval(y) * b.eval(y)))
    }

    fn check(&self, n: usize, y: f64) -> Result<()> {
        if n >= self.len() {
            return Err(Error::Index {
                index: n,
                len: self.len(),
            });
        }
        check_domain("y", y)
    }
}

/// `∫ f g ρ^ν dy` by `rule` for arbitrary `f`, `g`.
///
/// The metric is applied as `exp(log ρ)` at each node; use
/// [`Gsvd::v_inner`] for right singular functions, where the gauge factors
/// cancel exactly.
pub fn weighted_inner<F, G>(spec: &KernelSpec, f: F, g: G, rule: &QuadratureRule) -> Result<f64>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let mut sum = 0.0;
    for (y, w) in rule.iter() {
        let fg = f(y) * g(y);
        if fg != 0.0 {
            let log_rho = log_metric_weight(spec, y)?;
            sum += w * fg.signum() * (fg.abs().ln() + log_rho).exp();
        }
    }
    if sum.is_finite() {
        Ok(sum)
    } else {
        Err(Error::Overflow("weighted inner product"))
    }
}

/// Effective potential of the gauge-transformed Sturm–Liouville equation
/// `(1/ρ) d/dy[(1-y²) ρ V'] + 𝒱 V = χ V`.
///
/// `𝒱^F = c² - 2cy tanh(cy)`. The bosonic form
/// `𝒱^B = c² + 2/y² - 2c coth(cy)/y` follows from
/// `𝒱 = c²y² + ((1-y²) g')' / g` with `g = sinh(cy)/y`; near `y = 0` its
/// series `c²/3 + 2c⁴y²/45 - 4c⁶y⁴/945` is used.
pub fn effective_potential(statistics: Statistics, c: f64, y: f64) -> f64 {
    match statistics {
        Statistics::Fermion => c * c - 2.0 * c * y * (c * y).tanh(),
        Statistics::Boson => {
            let t = c * y;
            if t.abs() < 0.05 {
                let c2 = c * c;
                let y2 = y * y;
                c2 / 3.0 + 2.0 * c2 * c2 * y2 / 45.0 - 4.0 * c2 * c2 * c2 * y2 * y2 / 945.0
            } else {
                c * c + 2.0 / (y * y) - 2.0 * c / (t.tanh() * y)
            }
        }
    }
}

/// `(g'/g, g''/g)` in closed form.
fn gauge_log_derivatives(statistics: Statistics, c: f64, y: f64) -> (f64, f64) {
    match statistics {
        Statistics::Fermion => (c * (c * y).tanh(), c * c),
        Statistics::Boson => {
            let t = c * y;
            // coth(t) - 1/t and (coth(t) - 1/t)/t
            let (h, h_over_t) = if t.abs() < 0.05 {
                let t2 = t * t;
                let q = 1.0 / 3.0 - t2 / 45.0 + 2.0 * t2 * t2 / 945.0;
                (t * q, q)
            } else {
                let h = 1.0 / t.tanh() - 1.0 / t;
                (h, h / t)
            };
            let r1 = c * h;
            (r1, c * c - 2.0 * c * c * h_over_t)
        }
    }
}

/// Outcome of [`effective_potential_residual`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialCheck {
    /// Fitted constant shift between `χ_n` and the equation's eigenvalue.
    pub kappa: f64,
    /// `max |LHS - (χ_n + κ) V_n| / max |V_n|` over the grid.
    pub residual: f64,
}

/// Checks that `V_n = ψ_n / g` satisfies the gauge-transformed equation with
/// [`effective_potential`] on `grid` (points inside `[-0.9, 0.9]`).
///
/// Derivatives of `V_n` are taken through `V = ψ/g` with closed-form `g'/g`
/// and `g''/g`. `ψ_n` and its derivatives are evaluated from coefficients
/// refined in double-double: near `y = 0` the lowest modes at large `c` are
/// eight orders of magnitude below their peak, and `f64` coefficients would
/// leave a residual at the level of their rounding rather than of the
/// equation.
pub fn effective_potential_residual(
    spec: &KernelSpec,
    basis: &ProlateBasis,
    n: usize,
    grid: &[f64],
) -> Result<PotentialCheck> {
    let (st, c) = (spec.statistics, spec.c);
    residual_with_potential(spec, basis, n, grid, |y| effective_potential(st, c, y))
}

fn residual_with_potential<P: Fn(f64) -> f64>(
    spec: &KernelSpec,
    basis: &ProlateBasis,
    n: usize,
    grid: &[f64],
    potential: P,
) -> Result<PotentialCheck> {
    let mode = basis.mode(n)?;
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty grid".into()));
    }
    for &y in grid {
        if !(y.abs() <= 0.9) {
            return Err(Error::Domain {
                name: "y",
                value: y,
                domain: "[-0.9, 0.9]",
            });
        }
    }
    let c = spec.c;
    let coeffs = dd::refine_mode(c, basis.variant, mode, 2 * basis.legendre_cutoff);
    let first = dd::derivative(&coeffs);
    let second = dd::derivative(&first);
    let chi = mode.chi;

    let mut a = Vec::with_capacity(grid.len());
    let mut b = Vec::with_capacity(grid.len());
    for &y in grid {
        let psi = dd::clenshaw(&coeffs, y).hi();
        let p1 = dd::clenshaw(&first, y).hi();
        let p2 = dd::clenshaw(&second, y).hi();
        let (r1, r2) = gauge_log_derivatives(spec.statistics, c, y);
        let pot = potential(y);
        let s = 1.0 - y * y;
        // g · LHS, written with ψ and the logarithmic derivatives of g.
        let lhs_g = s * (p2 - 2.0 * r1 * p1 - r2 * psi + 2.0 * r1 * r1 * psi)
            + (-2.0 * y + 2.0 * s * r1) * (p1 - r1 * psi)
            + pot * psi;
        let inv_g = (-log_gauge(spec.statistics, c, y)).exp();
        a.push((lhs_g - chi * psi) * inv_g);
        b.push(psi * inv_g);
    }
    let bb: f64 = b.iter().map(|x| x * x).sum();
    let kappa = if bb > 0.0 {
        a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / bb
    } else {
        0.0
    };
    let scale = b.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let worst = a.iter().zip(&b).fold(0.0_f64, |m, (x, y)| m.max((x - kappa * y).abs()));
    Ok(PotentialCheck {
        kappa,
        residual: if scale > 0.0 { worst / scale } else { worst },
    })
}
