//! Prolate basis for the Laplace channel `e^{-cxy}` (and, for reference, the
//! Fourier channel `e^{icxy}`).
//!
//! Both kernels commute with a second-order operator
//! `D = d/dz[(1 - z²) d/dz] ± c² z²` (`+` for Laplace, `-` for Fourier), so
//! their eigenfunctions are obtained from a tridiagonal eigenproblem in the
//! Legendre basis instead of from the kernel itself. Only even or only odd
//! Legendre degrees couple, which splits the problem by parity.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::legendre::{check_domain, recurrence_coeffs, LegendreSeries};

/// Trailing-coefficient ratio above which the Legendre cutoff is too small.
pub const CUTOFF_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// `d/dz[(1-z²) d/dz] + c² z²`, commuting with `e^{-cxy}`.
    Laplace,
    /// `d/dz[(1-z²) d/dz] - c² z²`, commuting with `e^{icxy}`.
    Fourier,
}

impl Variant {
    /// Sign in front of `c² z²`.
    pub fn sign(self) -> f64 {
        match self {
            Variant::Laplace => 1.0,
            Variant::Fourier => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(n: usize) -> Self {
        if n % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    fn first_degree(self) -> usize {
        match self {
            Parity::Even => 0,
            Parity::Odd => 1,
        }
    }
}

/// One eigenfunction `ψ_n` of the commuting operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProlateMode {
    pub index: usize,
    /// Operator eigenvalue `χ_n`.
    pub chi: f64,
    /// Coefficients over un-normalized `P_m`, unit `L²[-1,1]` norm, `ψ_n(1) > 0`.
    pub coeffs: LegendreSeries,
    pub parity: Parity,
    derivative: LegendreSeries,
}

impl ProlateMode {
    fn new(index: usize, chi: f64, coeffs: LegendreSeries, parity: Parity) -> Self {
        let derivative = coeffs.derivative();
        Self {
            index,
            chi,
            coeffs,
            parity,
            derivative,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.eval_unchecked(x)
    }

    pub fn eval_derivative(&self, x: f64) -> f64 {
        self.derivative.eval_unchecked(x)
    }

    pub fn derivative_series(&self) -> &LegendreSeries {
        &self.derivative
    }
}

/// The first `n_modes` eigenfunctions for one bandwidth `c`, indexed by
/// operator eigenvalue (`χ_0 > χ_1 > …`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProlateBasis {
    pub c: f64,
    pub variant: Variant,
    /// Highest Legendre degree kept in the tridiagonal problem.
    pub legendre_cutoff: usize,
    modes: Vec<ProlateMode>,
}

impl ProlateBasis {
    pub fn modes(&self) -> &[ProlateMode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn mode(&self, n: usize) -> Result<&ProlateMode> {
        self.modes.get(n).ok_or(Error::Index {
            index: n,
            len: self.modes.len(),
        })
    }

    pub fn eval_mode(&self, n: usize, x: f64) -> Result<f64> {
        check_domain("x", x)?;
        Ok(self.mode(n)?.eval(x))
    }

    pub fn eval_mode_derivative(&self, n: usize, x: f64) -> Result<f64> {
        check_domain("x", x)?;
        Ok(self.mode(n)?.eval_derivative(x))
    }
}

/// Default Legendre cutoff `⌈2c/π⌉ + 30 + n_modes`.
pub fn default_cutoff(c: f64, n_modes: usize) -> usize {
    (2.0 * c / std::f64::consts::PI).ceil() as usize + 30 + n_modes
}

/// `(A_m, B_m, C_m)` in `z² P_m = A_m P_{m+2} + B_m P_m + C_m P_{m-2}`.
pub fn z_squared_coeffs(m: usize) -> (f64, f64, f64) {
    let (a_m, g_m) = recurrence_coeffs(m);
    let (a_next, g_next) = recurrence_coeffs(m + 1);
    if m == 0 {
        return (a_m * a_next, a_m * g_next, 0.0);
    }
    let (a_prev, g_prev) = recurrence_coeffs(m - 1);
    (a_m * a_next, a_m * g_next + g_m * a_prev, g_m * g_prev)
}

/// Tridiagonal matrix of the commuting operator on the orthonormal Legendre
/// functions of one parity with degree `<= cutoff`.
pub fn sturm_liouville_matrix(c: f64, cutoff: usize, parity: Parity, variant: Variant) -> DMatrix<f64> {
    let s = variant.sign() * c * c;
    let degrees: Vec<usize> = (parity.first_degree()..=cutoff).step_by(2).collect();
    let n = degrees.len();
    let mut t = DMatrix::zeros(n, n);
    for (i, &m) in degrees.iter().enumerate() {
        let mf = m as f64;
        let (_, b_m, _) = z_squared_coeffs(m);
        t[(i, i)] = -mf * (mf + 1.0) + s * b_m;
        if i + 1 < n {
            // s·A_m·sqrt((2m+1)/(2m+5)), the symmetrized coupling m <-> m+2
            let off = s * (mf + 1.0) * (mf + 2.0) / ((2.0 * mf + 3.0) * ((2.0 * mf + 1.0) * (2.0 * mf + 5.0)).sqrt());
            t[(i, i + 1)] = off;
            t[(i + 1, i)] = off;
        }
    }
    t
}

struct ParityBlock {
    chi: Vec<f64>,
    coeffs: Vec<Vec<f64>>,
}

fn solve_parity(c: f64, cutoff: usize, parity: Parity, variant: Variant, count: usize) -> Result<ParityBlock> {
    let t = sturm_liouville_matrix(c, cutoff, parity, variant);
    let n = t.nrows();
    if count > n {
        return Err(Error::InvalidParameter(format!(
            "cutoff {cutoff} holds only {n} {parity:?} modes, {count} requested"
        )));
    }
    let eig = SymmetricEigen::try_new(t, f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigensolver("symmetric tridiagonal QR did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let first = parity.first_degree();
    let mut chi = Vec::with_capacity(count);
    let mut coeffs = Vec::with_capacity(count);
    for &k in order.iter().take(count) {
        let v = eig.eigenvectors.column(k);
        let mut d = vec![0.0; cutoff + 1];
        for (i, &f) in v.iter().enumerate() {
            let m = first + 2 * i;
            d[m] = f * ((2.0 * m as f64 + 1.0) / 2.0).sqrt();
        }
        let norm: f64 = d
            .iter()
            .enumerate()
            .map(|(m, x)| x * x * 2.0 / (2.0 * m as f64 + 1.0))
            .sum::<f64>()
            .sqrt();
        // ψ(1) = Σ d_m
        let at_one: f64 = d.iter().sum();
        let sign = if at_one < 0.0 { -1.0 } else { 1.0 };
        d.iter_mut().for_each(|x| *x *= sign / norm);
        chi.push(eig.eigenvalues[k]);
        coeffs.push(d);
    }
    Ok(ParityBlock { chi, coeffs })
}

fn trailing_ratio(d: &[f64], parity: Parity) -> f64 {
    let last = d
        .iter()
        .enumerate()
        .rev()
        .find(|(m, _)| Parity::of(*m) == parity)
        .map(|(_, x)| x.abs())
        .unwrap_or(0.0);
    let max = d.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    if max == 0.0 {
        0.0
    } else {
        last / max
    }
}

fn assemble(
    c: f64,
    n_modes: usize,
    variant: Variant,
    cutoff: usize,
) -> Result<(Vec<ProlateMode>, Option<(usize, f64)>)> {
    let n_even = n_modes.div_ceil(2);
    let n_odd = n_modes / 2;
    let even = solve_parity(c, cutoff, Parity::Even, variant, n_even)?;
    let odd = solve_parity(c, cutoff, Parity::Odd, variant, n_odd)?;

    let mut modes = Vec::with_capacity(n_modes);
    let mut worst: Option<(usize, f64)> = None;
    for n in 0..n_modes {
        let parity = Parity::of(n);
        let block = match parity {
            Parity::Even => &even,
            Parity::Odd => &odd,
        };
        let d = block.coeffs[n / 2].clone();
        let ratio = trailing_ratio(&d, parity);
        if ratio >= CUTOFF_TOLERANCE && worst.is_none_or(|(_, r)| ratio > r) {
            worst = Some((n, ratio));
        }
        modes.push(ProlateMode::new(n, block.chi[n / 2], LegendreSeries::new(d), parity));
    }
    Ok((modes, worst))
}

/// Builds the first `n_modes` prolate functions for bandwidth `c`.
///
/// The cutoff starts at [`default_cutoff`] and is doubled once if any mode's
/// trailing Legendre coefficient is not below `1e-13` of its largest.
pub fn build_basis(c: f64, n_modes: usize, variant: Variant) -> Result<ProlateBasis> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::Domain {
            name: "c",
            value: c,
            domain: "(0, inf)",
        });
    }
    if n_modes == 0 {
        return Err(Error::InvalidParameter("n_modes must be at least 1".into()));
    }
    let mut cutoff = default_cutoff(c, n_modes);
    let (mut modes, mut worst) = assemble(c, n_modes, variant, cutoff)?;
    if worst.is_some() {
        cutoff *= 2;
        (modes, worst) = assemble(c, n_modes, variant, cutoff)?;
    }
    if let Some((mode, ratio)) = worst {
        return Err(Error::Cutoff { mode, cutoff, ratio });
    }
    Ok(ProlateBasis {
        c,
        variant,
        legendre_cutoff: cutoff,
        modes,
    })
}

/// `D_z` applied to a function given by its value and first two derivatives.
pub fn apply_operator(variant: Variant, c: f64, z: f64, f: f64, df: f64, d2f: f64) -> f64 {
    (1.0 - z * z) * d2f - 2.0 * z * df + variant.sign() * c * c * z * z * f
}

/// `max |D_x K - D_y K| / max |K|` over `points × points`, where `K` is the
/// kernel the variant's operator commutes with and the derivatives of `K` are
/// taken in closed form. The Fourier case checks both `cos(cxy)` and
/// `sin(cxy)`.
pub fn commutation_residual(c: f64, points: &[f64], variant: Variant) -> f64 {
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for &x in points {
        for &y in points {
            let parts: Vec<[f64; 5]> = match variant {
                // [K, ∂x K, ∂x² K, ∂y K, ∂y² K]
                Variant::Laplace => {
                    let k = (-c * x * y).exp();
                    vec![[k, -c * y * k, c * c * y * y * k, -c * x * k, c * c * x * x * k]]
                }
                Variant::Fourier => {
                    let (s, co) = (c * x * y).sin_cos();
                    vec![
                        [co, -c * y * s, -c * c * y * y * co, -c * x * s, -c * c * x * x * co],
                        [s, c * y * co, -c * c * y * y * s, c * x * co, -c * c * x * x * s],
                    ]
                }
            };
            for [k, kx, kxx, ky, kyy] in parts {
                let dx = apply_operator(variant, c, x, k, kx, kxx);
                let dy = apply_operator(variant, c, y, k, ky, kyy);
                worst = worst.max((dx - dy).abs());
                scale = scale.max(k.abs());
            }
        }
    }
    if scale == 0.0 {
        worst
    } else {
        worst / scale
    }
}
