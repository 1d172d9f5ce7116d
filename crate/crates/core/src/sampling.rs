//! Imaginary-time sampling grid: the zeros of `ψ_N` with `N = ⌈N_c⌉`.
//!
//! Writing `ψ_N = Σ_{m≤M} d_m P_m` and eliminating `P_M` from the last row of
//! the Legendre recurrence turns the Jacobi matrix into a colleague matrix
//! whose eigenvalues are the roots of the series. The real ones inside
//! `[-1, 1]` are the nodes.

use nalgebra::{DMatrix, DVector, Schur};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::legendre::{jacobi_matrix, recurrence_coeffs, LegendreSeries};
use crate::prolate::{build_basis, ProlateBasis};
use crate::spectrum::KernelSpec;

/// Relative size below which trailing coefficients are dropped before the
/// colleague eigensolve.
pub const TRAILING_CUTOFF: f64 = 1e-14;
/// Largest imaginary part accepted for a real root.
pub const IMAG_TOLERANCE: f64 = 1e-8;
/// Slack on `|x| <= 1` for accepted roots.
pub const EDGE_TOLERANCE: f64 = 1e-10;
/// Roots closer than this are merged.
pub const DEDUP_TOLERANCE: f64 = 1e-12;
/// Condition estimate above which the weight system is rejected.
pub const WEIGHT_CONDITION_LIMIT: f64 = 1e13;

/// Number of nodes `N = ⌈2c/π⌉` for a kernel.
pub fn truncation_order(spec: &KernelSpec) -> usize {
    truncation_order_for_c(spec.c)
}

/// `⌈2c/π⌉`, with `2c/π` within `1e-12` of an integer counted as that
/// integer (so `c = π/2` gives 1 despite rounding in `π`).
pub fn truncation_order_for_c(c: f64) -> usize {
    let n = 2.0 * c / std::f64::consts::PI;
    let r = n.round();
    let n = if (n - r).abs() <= 1e-12 * r.max(1.0) {
        r
    } else {
        n.ceil()
    };
    n.max(0.0) as usize
}

/// Colleague matrix of a series of degree `M >= 1`: the order-`M` Jacobi
/// matrix with `(α_{M-1}/d_M)(d_0, …, d_{M-1})` subtracted from its last row.
pub fn colleague_matrix(series: &LegendreSeries) -> Result<DMatrix<f64>> {
    let big_m = series.degree();
    if big_m == 0 {
        return Err(Error::InvalidParameter("colleague matrix needs degree >= 1".into()));
    }
    let d = &series.coeffs;
    let lead = d[big_m];
    if !(lead.abs() >= 1e-300) {
        return Err(Error::Singular {
            condition: f64::INFINITY,
            context: format!("leading coefficient d_{big_m} = {lead:e}"),
        });
    }
    let mut c = jacobi_matrix(big_m);
    let (alpha, _) = recurrence_coeffs(big_m - 1);
    let f = alpha / lead;
    for j in 0..big_m {
        c[(big_m - 1, j)] -= f * d[j];
    }
    Ok(c)
}

/// Parlett–Reinsch balancing: diagonal similarity by powers of two until
/// every row and column have comparable norms.
///
/// The last row of a colleague matrix scales like `1/d_M` and is many orders
/// of magnitude above the Jacobi entries when the series has decayed by its
/// cutoff degree.
pub fn balance(c: &mut DMatrix<f64>) {
    let n = c.nrows();
    let radix = 2.0_f64;
    loop {
        let mut converged = true;
        for i in 0..n {
            let mut col = 0.0;
            let mut row = 0.0;
            for j in 0..n {
                if j != i {
                    col += c[(j, i)].abs();
                    row += c[(i, j)].abs();
                }
            }
            if col == 0.0 || row == 0.0 {
                continue;
            }
            let total = col + row;
            let mut f = 1.0;
            while col < row / radix {
                f *= radix;
                col *= radix * radix;
            }
            while col > row * radix {
                f /= radix;
                col /= radix * radix;
            }
            if (col + row) / f < 0.95 * total {
                converged = false;
                for j in 0..n {
                    c[(i, j)] /= f;
                    c[(j, i)] *= f;
                }
            }
        }
        if converged {
            break;
        }
    }
}

/// Diagonal shifts tried in turn. A series of definite parity has a spectrum
/// symmetric about 0, on which unshifted Francis QR stalls.
const SCHUR_SHIFTS: [f64; 3] = [0.1, -0.2371, 0.4142];

fn colleague_eigenvalues(mut c: DMatrix<f64>) -> Option<Vec<(f64, f64)>> {
    balance(&mut c);
    let n = c.nrows();
    for &shift in &SCHUR_SHIFTS {
        let mut shifted = c.clone();
        for i in 0..n {
            shifted[(i, i)] += shift;
        }
        if let Some(schur) = Schur::try_new(shifted, f64::EPSILON, 100 * n.max(10)) {
            return Some(
                schur
                    .complex_eigenvalues()
                    .iter()
                    .map(|z| (z.re - shift, z.im))
                    .collect(),
            );
        }
    }
    None
}

/// Everything found for one series, kept for diagnostics.
#[derive(Debug, Clone)]
pub struct RootSearch {
    /// Accepted roots, sorted and Newton-polished.
    pub roots: Vec<f64>,
    /// All eigenvalues of the colleague matrix as `(re, im)`.
    pub eigenvalues: Vec<(f64, f64)>,
    /// Degree of the series after dropping negligible trailing terms.
    pub degree: usize,
}

impl RootSearch {
    fn diagnostic(&self) -> String {
        let near: Vec<String> = self
            .eigenvalues
            .iter()
            .filter(|(re, im)| re.abs() <= 1.5 && im.abs() <= 0.5)
            .map(|(re, im)| format!("{re:.6e}{im:+.3e}i"))
            .collect();
        format!(
            "degree {}, accepted {:?}, eigenvalues near [-1,1]: [{}]",
            self.degree,
            self.roots,
            near.join(", ")
        )
    }
}

/// Real roots in `[-1, 1]` of a Legendre series via its colleague matrix.
///
/// Trailing coefficients below `1e-14·max|d|` are dropped, real eigenvalues
/// inside the interval are clamped, merged and then polished by at most three
/// Newton steps on the full series.
pub fn series_roots(series: &LegendreSeries) -> Result<RootSearch> {
    let degree = series.effective_degree(TRAILING_CUTOFF);
    if degree == 0 {
        return Ok(RootSearch {
            roots: Vec::new(),
            eigenvalues: Vec::new(),
            degree,
        });
    }
    let trimmed = series.truncated(degree);
    let c = colleague_matrix(&trimmed)?;
    let eigenvalues = colleague_eigenvalues(c)
        .ok_or_else(|| Error::Eigensolver(format!("Schur iteration on degree-{degree} colleague matrix")))?;

    let mut roots: Vec<f64> = eigenvalues
        .iter()
        .filter(|(re, im)| im.abs() < IMAG_TOLERANCE && re.abs() <= 1.0 + EDGE_TOLERANCE)
        .map(|(re, _)| re.clamp(-1.0, 1.0))
        .collect();
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() <= DEDUP_TOLERANCE);

    let derivative = series.derivative();
    for x in roots.iter_mut() {
        *x = newton_polish(series, &derivative, *x);
    }
    roots.sort_by(f64::total_cmp);
    Ok(RootSearch {
        roots,
        eigenvalues,
        degree,
    })
}

fn newton_polish(f: &LegendreSeries, df: &LegendreSeries, x0: f64) -> f64 {
    let mut x = x0;
    let mut fx = f.eval_unchecked(x);
    for _ in 0..3 {
        let d = df.eval_unchecked(x);
        if fx == 0.0 || d == 0.0 || !d.is_finite() {
            break;
        }
        let next = (x - fx / d).clamp(-1.0, 1.0);
        let fn_ = f.eval_unchecked(next);
        if fn_.abs() >= fx.abs() {
            break;
        }
        x = next;
        fx = fn_;
    }
    x
}

/// `basis` if it has at least `needed` modes, otherwise a rebuilt copy with
/// `needed + 5`.
fn ensure_modes(basis: &ProlateBasis, needed: usize) -> Result<std::borrow::Cow<'_, ProlateBasis>> {
    if basis.len() >= needed {
        Ok(std::borrow::Cow::Borrowed(basis))
    } else {
        Ok(std::borrow::Cow::Owned(build_basis(
            basis.c,
            needed + 5,
            basis.variant,
        )?))
    }
}

/// The `n` zeros of `ψ_n` in `(-1, 1)`, ascending.
pub fn prolate_nodes(basis: &ProlateBasis, n: usize) -> Result<Vec<f64>> {
    let basis = ensure_modes(basis, n + 1)?;
    let mode = basis.mode(n)?;
    let search = series_roots(&mode.coeffs)?;
    if search.roots.len() != n {
        return Err(Error::RootCount {
            expected: n,
            found: search.roots.len(),
            diagnostic: search.diagnostic(),
        });
    }
    Ok(search.roots)
}

/// Weights making `Σ_i w_i ψ_k(x_i) = ∫ ψ_k = 2 d_0^{(k)}` exact for
/// `k < nodes.len()`.
pub fn prolate_weights(basis: &ProlateBasis, nodes: &[f64]) -> Result<Vec<f64>> {
    let n = nodes.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let basis = ensure_modes(basis, n)?;
    let modes = &basis.modes()[..n];
    let a = DMatrix::from_fn(n, n, |k, i| modes[k].eval(nodes[i]));
    let moments = DVector::from_iterator(n, modes.iter().map(|m| 2.0 * m.coeffs.coeffs[0]));

    let sv = a.singular_values();
    let condition = sv.max() / sv.min();
    if !(condition <= WEIGHT_CONDITION_LIMIT) {
        return Err(Error::Singular {
            condition,
            context: format!("{n}-point moment system for the quadrature weights"),
        });
    }
    let w = a.clone().lu().solve(&moments).ok_or_else(|| Error::Singular {
        condition,
        context: "LU factorization of the moment system".into(),
    })?;
    let residual = (&a * &w - &moments).amax();
    let scale = moments.amax().max(1.0);
    if residual > 1e-10 * scale {
        return Err(Error::Singular {
            condition,
            context: format!("moment residual {residual:e} after solve"),
        });
    }
    Ok(w.iter().copied().collect())
}

/// Nodes and weights for one kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingGrid {
    pub c: f64,
    /// Number of nodes; the nodes are the zeros of `ψ_n`.
    pub n: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `τ_i = β (x_i + 1) / 2`.
    pub tau: Vec<f64>,
    /// Legendre degree of `ψ_n` used for the colleague matrix.
    pub degree: usize,
    /// `|ψ_n(x_i)| / max_{[-1,1]} |ψ_n|`.
    pub residuals: Vec<f64>,
}

impl SamplingGrid {
    /// Grid with `N = ⌈N_c⌉` nodes (or `order` when given).
    pub fn for_spec(spec: &KernelSpec, order: Option<usize>) -> Result<Self> {
        let n = order.unwrap_or_else(|| truncation_order(spec));
        let basis = build_basis(spec.c, n + 5, crate::prolate::Variant::Laplace)?;
        Self::build(spec, &basis, n)
    }

    /// Grid from the zeros of `ψ_n` in `basis` (rebuilt when too small).
    pub fn build(spec: &KernelSpec, basis: &ProlateBasis, n: usize) -> Result<Self> {
        if (basis.c - spec.c).abs() > 1e-12 * spec.c.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "basis built for c = {} but kernel has c = {}",
                basis.c, spec.c
            )));
        }
        let basis = ensure_modes(basis, n + 1)?;
        let nodes = prolate_nodes(&basis, n)?;
        let weights = prolate_weights(&basis, &nodes)?;
        let mode = basis.mode(n)?;
        let peak = sup_norm(&mode.coeffs);
        let residuals = nodes.iter().map(|&x| mode.eval(x).abs() / peak).collect();
        let tau = nodes.iter().map(|&x| spec.x_to_tau(x)).collect();
        Ok(Self {
            c: spec.c,
            n,
            nodes,
            weights,
            tau,
            degree: mode.coeffs.effective_degree(TRAILING_CUTOFF),
            residuals,
        })
    }

    /// `Σ_i w_i f(x_i)`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Physical sampling times `τ_i = β (x_i + 1) / 2`.
pub fn to_physical(spec: &KernelSpec, grid: &SamplingGrid) -> Vec<f64> {
    grid.nodes.iter().map(|&x| spec.x_to_tau(x)).collect()
}

/// `max |f|` on `[-1, 1]`, sampled densely and refined at the best sample.
fn sup_norm(s: &LegendreSeries) -> f64 {
    let k = 4 * s.degree().max(50);
    let mut best = (0.0_f64, 0.0_f64);
    for i in 0..=k {
        let x = -1.0 + 2.0 * i as f64 / k as f64;
        let v = s.eval_unchecked(x).abs();
        if v > best.0 {
            best = (v, x);
        }
    }
    // A few golden-section steps around the best sample.
    let h = 2.0 / k as f64;
    let (mut a, mut b) = ((best.1 - h).max(-1.0), (best.1 + h).min(1.0));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let x1 = b - g * (b - a);
        let x2 = a + g * (b - a);
        if s.eval_unchecked(x1).abs() > s.eval_unchecked(x2).abs() {
            b = x2;
        } else {
            a = x1;
        }
    }
    best.0.max(s.eval_unchecked(0.5 * (a + b)).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::legendre::reference_rule;
    use crate::oracle::bisection_roots;
    use crate::prolate::Variant;
    use crate::spectrum::Statistics;

    fn spec(c: f64) -> KernelSpec {
        KernelSpec::from_c(Statistics::Fermion, c, 1.0).unwrap()
    }

    #[test]
    fn truncation_orders() {
        assert_eq!(truncation_order(&spec(20.0)), 13);
        assert_eq!(truncation_order(&spec(std::f64::consts::FRAC_PI_2)), 1);
        assert_eq!(truncation_order(&spec(5.0)), 4);
        let s = KernelSpec::new(Statistics::Fermion, 40.0, 1.0).unwrap();
        assert_eq!(truncation_order(&s), 13);
    }

    #[test]
    fn colleague_of_plain_legendre() {
        let c = colleague_matrix(&LegendreSeries::new(vec![0.0, 0.0, 1.0])).unwrap();
        assert_eq!(c, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0 / 3.0, 0.0]));
        let r = series_roots(&LegendreSeries::new(vec![0.0, 0.0, 1.0])).unwrap().roots;
        let s = 1.0 / 3f64.sqrt();
        assert!((r[0] + s).abs() < 1e-15 && (r[1] - s).abs() < 1e-15);

        let c = colleague_matrix(&LegendreSeries::new(vec![0.0, 1.0])).unwrap();
        assert_eq!(c, DMatrix::from_row_slice(1, 1, &[0.0]));
        assert!(colleague_matrix(&LegendreSeries::new(vec![1.0, 0.0])).is_err());
        assert!(colleague_matrix(&LegendreSeries::new(vec![1.0])).is_err());
    }

    #[test]
    fn colleague_matches_bisection() {
        let s = LegendreSeries::new(vec![0.0, 0.1, 0.0, 1.0]);
        let roots = series_roots(&s).unwrap().roots;
        let reference = bisection_roots(|x| s.eval_unchecked(x), 10_000);
        assert_eq!(roots.len(), reference.len());
        for (a, b) in roots.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn balancing_is_a_similarity() {
        let s = LegendreSeries::new((0..12).map(|m| 1.0 / (m as f64 + 1.0)).collect());
        let c = colleague_matrix(&s).unwrap();
        let mut b = c.clone();
        balance(&mut b);
        assert!((c.trace() - b.trace()).abs() < 1e-14);
        // A diagonal similarity leaves every product c_ij c_ji unchanged.
        for i in 0..c.nrows() {
            for j in 0..c.ncols() {
                let (x, y) = (c[(i, j)] * c[(j, i)], b[(i, j)] * b[(j, i)]);
                assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-300));
            }
        }
    }

    #[test]
    fn small_c_gauss_limit() {
        let basis = build_basis(1e-8, 4, Variant::Laplace).unwrap();
        let nodes = prolate_nodes(&basis, 2).unwrap();
        let s = 1.0 / 3f64.sqrt();
        assert!((nodes[0] + s).abs() < 1e-6 && (nodes[1] - s).abs() < 1e-6);
        let w = prolate_weights(&basis, &nodes).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-6 && (w[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn shannon_grid_at_c20() {
        let grid = SamplingGrid::for_spec(&spec(20.0), None).unwrap();
        assert_eq!(grid.n, 13);
        assert_eq!(grid.nodes.len(), 13);
        assert!(grid.residuals.iter().all(|&r| r < 1e-10));
        for i in 0..13 {
            assert!((grid.nodes[i] + grid.nodes[12 - i]).abs() < 1e-12);
        }
        assert!(grid.nodes.windows(2).all(|w| w[0] < w[1]));
        // Constants are not in span{ψ_0..ψ_12}, so Σw is only near 2.
        let total: f64 = grid.weights.iter().sum();
        assert!((total - 2.0).abs() < 0.1, "{total}");

        let basis = build_basis(20.0, 20, Variant::Laplace).unwrap();
        let reference = bisection_roots(|x| basis.modes()[13].eval(x), 10_000);
        for (a, b) in grid.nodes.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-11);
        }
        let rule = reference_rule();
        for k in 0..13 {
            let m = &basis.modes()[k];
            let exact = rule.integrate(|x| m.eval(x));
            assert!((grid.integrate(|x| m.eval(x)) - exact).abs() < 1e-9);
        }
    }

    #[test]
    fn kernel_integral_by_the_grid() {
        use crate::spectrum::kernel_value;
        let s = spec(20.0);
        let grid = SamplingGrid::for_spec(&s, None).unwrap();
        let basis = build_basis(20.0, 16, Variant::Laplace).unwrap();
        let a = |y: f64| basis.modes()[0].eval(y) + 0.5 * basis.modes()[3].eval(y);
        let xs: Vec<f64> = (0..=40).map(|k| -1.0 + k as f64 / 20.0).collect();
        let exact: Vec<f64> = xs
            .iter()
            .map(|&x| reference_rule().integrate(|y| kernel_value(&s, x, y).unwrap() * a(y)))
            .collect();
        let peak = exact.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for (&x, &e) in xs.iter().zip(&exact) {
            let g = grid.integrate(|y| kernel_value(&s, x, y).unwrap() * a(y));
            assert!((g - e).abs() < 1e-5 * peak, "x={x}");
        }
    }

    #[test]
    fn physical_times() {
        let s = KernelSpec::new(Statistics::Fermion, 2.0, 20.0).unwrap();
        let grid = SamplingGrid::for_spec(&s, None).unwrap();
        let tau = to_physical(&s, &grid);
        assert_eq!(tau, grid.tau);
        assert!(tau.iter().all(|&t| t > 0.0 && t < 2.0));
        // denser toward the ends than uniform spacing
        let gaps: Vec<f64> = tau.windows(2).map(|w| w[1] - w[0]).collect();
        let uniform = 2.0 / 14.0;
        assert!(gaps[0] < uniform && gaps[gaps.len() - 1] < uniform);
        assert!(gaps[0] < gaps[gaps.len() / 2]);
    }

    #[test]
    fn missing_modes_are_built() {
        let basis = build_basis(5.0, 3, Variant::Laplace).unwrap();
        let nodes = prolate_nodes(&basis, 6).unwrap();
        assert_eq!(nodes.len(), 6);
    }

    #[test]
    fn mismatched_c_rejected() {
        let basis = build_basis(5.0, 8, Variant::Laplace).unwrap();
        assert!(SamplingGrid::build(&spec(6.0), &basis, 4).is_err());
    }
}
