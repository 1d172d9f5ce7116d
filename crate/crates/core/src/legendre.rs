//! Legendre polynomial algebra.
//!
//! Coefficients are always stored over the un-normalized polynomials `P_m`
//! (`P_m(1) = 1`), with orthogonality
//! `∫_{-1}^{1} P_m(x) P_n(x) dx = 2/(2n+1) δ_{mn}`.
//! The orthonormal family `sqrt((2m+1)/2) P_m` only shows up internally where a
//! symmetric matrix is needed.

use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed on `|x| <= 1` before an argument is rejected.
pub const DOMAIN_SLACK: f64 = 1e-12;

/// Order of the reference Gauss–Legendre rule used for continuous inner products.
pub const REFERENCE_ORDER: usize = 400;

pub(crate) fn check_domain(name: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x.abs() <= 1.0 + DOMAIN_SLACK {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value: x,
            domain: "[-1, 1]",
        })
    }
}

/// `P_m(x)` by the upward three-term recurrence.
pub fn eval_legendre(m: usize, x: f64) -> Result<f64> {
    check_domain("x", x)?;
    Ok(legendre_unchecked(m, x))
}

pub(crate) fn legendre_unchecked(m: usize, x: f64) -> f64 {
    match m {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut p_prev, mut p) = (1.0, x);
            for k in 1..m {
                let kf = k as f64;
                let next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
                p_prev = p;
                p = next;
            }
            p
        }
    }
}

/// `P_0(x), …, P_{m_max}(x)`.
pub fn legendre_table(m_max: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(m_max + 1);
    out.push(1.0);
    if m_max == 0 {
        return out;
    }
    out.push(x);
    for k in 1..m_max {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * out[k] - kf * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
    out
}

/// Coefficients of `x P_m(x) = α_m P_{m+1}(x) + γ_m P_{m-1}(x)`.
pub fn recurrence_coeffs(m: usize) -> (f64, f64) {
    let mf = m as f64;
    let den = 2.0 * mf + 1.0;
    ((mf + 1.0) / den, mf / den)
}

/// Matrix of multiplication by `x` acting on `(P_0, …, P_{order-1})`.
///
/// Row `m` carries `γ_m` in column `m-1` and `α_m` in column `m+1`; the
/// diagonal is zero. The coupling to `P_order` is dropped, so the eigenvalues
/// are the roots of `P_order`.
pub fn jacobi_matrix(order: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(order, order);
    for m in 0..order {
        let (alpha, gamma) = recurrence_coeffs(m);
        if m > 0 {
            j[(m, m - 1)] = gamma;
        }
        if m + 1 < order {
            j[(m, m + 1)] = alpha;
        }
    }
    j
}

/// Symmetric form of [`jacobi_matrix`] (orthonormal Legendre basis).
pub(crate) fn symmetric_jacobi(order: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(order, order);
    for k in 1..order {
        let kf = k as f64;
        let b = kf / (4.0 * kf * kf - 1.0).sqrt();
        j[(k, k - 1)] = b;
        j[(k - 1, k)] = b;
    }
    j
}

/// Nodes and weights of a quadrature rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }
}

/// `q`-point Gauss–Legendre rule by the Golub–Welsch construction.
///
/// Nodes are the eigenvalues of the symmetric Jacobi matrix, weights are
/// `2 v_0²` from the normalized eigenvectors. Each node then gets two Newton
/// steps on `P_q`, and the rule is symmetrized about the origin.
pub fn gauss_legendre(q: usize) -> QuadratureRule {
    assert!(q >= 1, "quadrature order must be positive");
    if q == 1 {
        return QuadratureRule {
            nodes: vec![0.0],
            weights: vec![2.0],
        };
    }
    let eig = SymmetricEigen::new(symmetric_jacobi(q));
    let mut pairs: Vec<(f64, f64)> = (0..q)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], 2.0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    for (x, _) in pairs.iter_mut() {
        for _ in 0..2 {
            let (p, dp) = legendre_with_derivative(q, *x);
            if dp != 0.0 {
                *x -= p / dp;
            }
        }
    }

    let mut nodes: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut weights: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    for i in 0..q / 2 {
        let j = q - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        let w = 0.5 * (weights[i] + weights[j]);
        nodes[i] = -x;
        nodes[j] = x;
        weights[i] = w;
        weights[j] = w;
    }
    if q % 2 == 1 {
        nodes[q / 2] = 0.0;
    }
    QuadratureRule { nodes, weights }
}

/// The shared `REFERENCE_ORDER`-point rule, built once per process.
pub fn reference_rule() -> &'static QuadratureRule {
    static RULE: OnceLock<QuadratureRule> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(REFERENCE_ORDER))
}

fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    if m == 0 {
        return (1.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, x);
    let (mut dp_prev, mut dp) = (0.0, 1.0);
    for k in 1..m {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        let dnext = dp_prev + (2.0 * kf + 1.0) * p;
        p_prev = p;
        p = next;
        dp_prev = dp;
        dp = dnext;
    }
    (p, dp)
}

/// A finite expansion `Σ_m d_m P_m(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegendreSeries {
    pub coeffs: Vec<f64>,
}

impl LegendreSeries {
    pub fn new(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "a Legendre series needs at least one coefficient");
        Self { coeffs }
    }

    /// Polynomial degree `M` of the storage (`coeffs.len() - 1`).
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        check_domain("x", x)?;
        Ok(self.eval_unchecked(x))
    }

    /// Clenshaw summation of the series.
    pub fn eval_unchecked(&self, x: f64) -> f64 {
        let d = &self.coeffs;
        let n = d.len() - 1;
        if n == 0 {
            return d[0];
        }
        // P_{k+1} = a_k(x) P_k + b_k P_{k-1}, a_k = (2k+1)x/(k+1), b_k = -k/(k+1)
        let (mut b1, mut b2) = (0.0, 0.0);
        for k in (1..=n).rev() {
            let kf = k as f64;
            let a_k = (2.0 * kf + 1.0) * x / (kf + 1.0);
            let b_next = -(kf + 1.0) / (kf + 2.0);
            let b0 = d[k] + a_k * b1 + b_next * b2;
            b2 = b1;
            b1 = b0;
        }
        d[0] + x * b1 - 0.5 * b2
    }

    /// `Σ_m |d_m P_m(x)|`, the scale against which rounding in
    /// [`eval_unchecked`](Self::eval_unchecked) should be judged.
    pub fn abs_sum(&self, x: f64) -> f64 {
        legendre_table(self.degree(), x)
            .iter()
            .zip(&self.coeffs)
            .map(|(p, d)| (p * d).abs())
            .sum()
    }

    /// Exact derivative, using `P'_{m+1} - P'_{m-1} = (2m+1) P_m`.
    pub fn derivative(&self) -> LegendreSeries {
        let d = &self.coeffs;
        let big_m = d.len() - 1;
        if big_m == 0 {
            return LegendreSeries::new(vec![0.0]);
        }
        let mut e = vec![0.0; big_m];
        for m in (0..big_m).rev() {
            let mf = m as f64;
            let tail = if m + 2 < big_m {
                e[m + 2] / (2.0 * mf + 5.0)
            } else {
                0.0
            };
            e[m] = (2.0 * mf + 1.0) * (d[m + 1] + tail);
        }
        LegendreSeries::new(e)
    }

    /// Highest index whose coefficient exceeds `rel_tol · max|d_m|`.
    pub fn effective_degree(&self, rel_tol: f64) -> usize {
        let scale = self.max_abs();
        self.coeffs.iter().rposition(|c| c.abs() > rel_tol * scale).unwrap_or(0)
    }

    pub fn truncated(&self, degree: usize) -> LegendreSeries {
        LegendreSeries::new(self.coeffs[..=degree.min(self.degree())].to_vec())
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0_f64, |a, c| a.max(c.abs()))
    }

    /// `∫_{-1}^{1} f² dx` from the coefficients.
    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(m, d)| d * d * 2.0 / (2.0 * m as f64 + 1.0))
            .sum()
    }
}

/// `Σ_m d_m P_m(x)` for a series `s`.
pub fn eval_series(s: &LegendreSeries, x: f64) -> Result<f64> {
    s.eval(x)
}
