//! Brute-force reference computations.
//!
//! Nothing here is used by the analytic pipeline; these routines exist so the
//! analytic results can be checked against something independent, in tests and
//! from the `check` command.
//!
//! The Nyström eigendecomposition of `e^{-cxy}` runs in double-double
//! arithmetic. In plain `f64` the absolute eigenvalue error is about
//! `ε·|λ_0|`, which at `c = 20` already costs six digits on eigenvalues twelve
//! orders of magnitude below the top one.

use nalgebra::DMatrix;

use crate::dd::{self, Dd};
use crate::error::{Error, Result};
use crate::legendre::{gauss_legendre, QuadratureRule};

/// Smallest Nyström order resolving `e^{-cxy}` (`⌈4c/π⌉ + 40`).
pub fn min_nystrom_order(c: f64) -> usize {
    (4.0 * c / std::f64::consts::PI).ceil() as usize + 40
}

/// Symmetrized Nyström matrix `e^{-c x_i x_j} sqrt(w_i w_j)` on a
/// Gauss–Legendre rule.
#[derive(Debug, Clone)]
pub struct NystromKernel {
    pub c: f64,
    pub rule: QuadratureRule,
    pub matrix: DMatrix<f64>,
}

impl NystromKernel {
    pub fn new(c: f64, q: usize) -> Self {
        let rule = gauss_legendre(q);
        let matrix = DMatrix::from_fn(q, q, |i, j| {
            (-c * rule.nodes[i] * rule.nodes[j]).exp() * (rule.weights[i] * rule.weights[j]).sqrt()
        });
        Self { c, rule, matrix }
    }

    /// `max |A_ij - A_ji| / max |A_ij|`.
    pub fn asymmetry(&self) -> f64 {
        let a = &self.matrix;
        let scale = a.amax();
        let mut worst: f64 = 0.0;
        for i in 0..a.nrows() {
            for j in 0..i {
                worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
            }
        }
        worst / scale
    }
}

/// Eigenpairs of the discretized operator, sorted by descending `|λ|`.
#[derive(Debug, Clone)]
pub struct NystromEigs {
    pub eigenvalues: Vec<f64>,
    /// Quadrature nodes the eigenfunctions are sampled on (ascending).
    pub nodes: Vec<f64>,
    /// Column `k` holds eigenfunction `k` at `nodes`, unit `L²[-1,1]` norm.
    /// Empty when only eigenvalues were requested.
    pub eigenfunctions: DMatrix<f64>,
}

/// Dense Nyström eigendecomposition of `∫ e^{-cxy} f(y) dy` with a `q`-point
/// Gauss–Legendre rule.
pub fn nystrom_eigs(c: f64, q: usize) -> Result<NystromEigs> {
    nystrom(c, q, true)
}

/// Same as [`nystrom_eigs`] without eigenvectors.
pub fn nystrom_eigenvalues(c: f64, q: usize) -> Result<Vec<f64>> {
    Ok(nystrom(c, q, false)?.eigenvalues)
}

fn nystrom(c: f64, q: usize, vectors: bool) -> Result<NystromEigs> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::Domain {
            name: "c",
            value: c,
            domain: "(0, inf)",
        });
    }
    let need = min_nystrom_order(c);
    if q < need {
        return Err(Error::InvalidParameter(format!(
            "Nyström order {q} below resolution bound {need} for c = {c}"
        )));
    }
    let (nodes, weights) = gauss_legendre_dd(q);
    let half = q / 2;
    let has_zero = q % 2 == 1;
    // Positive nodes x_{half+has_zero..}; mirror images carry the same weight.
    let pos: Vec<(Dd, Dd)> = (half + usize::from(has_zero)..q)
        .map(|i| (nodes[i], weights[i]))
        .collect();
    let cdd = Dd::from(c);
    let two = Dd::from(2.0);

    let mut pairs: Vec<(f64, Option<Vec<f64>>)> = Vec::with_capacity(q);
    for even in [true, false] {
        let extra = usize::from(even && has_zero);
        let n = pos.len() + extra;
        if n == 0 {
            continue;
        }
        let mut a = vec![Dd::from(0.0); n * n];
        for (i, &(xi, wi)) in pos.iter().enumerate() {
            for (j, &(xj, wj)) in pos.iter().enumerate().take(i + 1) {
                let t = cdd * xi * xj;
                let k = if even { two * dd::cosh(t) } else { -(two * dd::sinh(t)) };
                let v = k * (wi * wj).sqrt();
                a[i * n + j] = v;
                a[j * n + i] = v;
            }
        }
        if extra == 1 {
            let w0 = weights[half];
            let z = pos.len();
            for (i, &(_, wi)) in pos.iter().enumerate() {
                let v = two.sqrt() * (wi * w0).sqrt();
                a[i * n + z] = v;
                a[z * n + i] = v;
            }
            a[z * n + z] = w0;
        }
        let (vals, vecs) = symmetric_eigen_dd(a, n, vectors)?;
        for k in 0..n {
            let f = vecs.as_ref().map(|v| {
                // Back to the full node set, then divide out sqrt(w).
                let mut full = vec![0.0; q];
                let r = Dd::from(0.5).sqrt();
                for (i, node) in (half + usize::from(has_zero)..q).enumerate() {
                    let u = v[i * n + k] * r;
                    let mirror = q - 1 - node;
                    full[node] = dd::div(u, weights[node].sqrt()).hi();
                    let m = if even { u } else { -u };
                    full[mirror] = dd::div(m, weights[mirror].sqrt()).hi();
                }
                if extra == 1 {
                    let z = pos.len();
                    full[half] = dd::div(v[z * n + k], weights[half].sqrt()).hi();
                }
                full
            });
            pairs.push((vals[k].hi(), f));
        }
    }
    pairs.sort_by(|a, b| b.0.abs().total_cmp(&a.0.abs()));

    let eigenvalues = pairs.iter().map(|p| p.0).collect();
    let eigenfunctions = if vectors {
        DMatrix::from_fn(q, q, |i, k| pairs[k].1.as_ref().map_or(0.0, |f| f[i]))
    } else {
        DMatrix::zeros(0, 0)
    };
    Ok(NystromEigs {
        eigenvalues,
        nodes: nodes.iter().map(|x| x.hi()).collect(),
        eigenfunctions,
    })
}

/// Gauss–Legendre nodes and weights refined to double-double precision.
fn gauss_legendre_dd(q: usize) -> (Vec<Dd>, Vec<Dd>) {
    let start = gauss_legendre(q);
    let one = Dd::from(1.0);
    let mut nodes = Vec::with_capacity(q);
    let mut weights = Vec::with_capacity(q);
    for &x0 in &start.nodes {
        let mut x = Dd::from(x0);
        for _ in 0..3 {
            let (p, dp) = legendre_dd(q, x);
            if dp != Dd::from(0.0) {
                x -= dd::div(p, dp);
            }
        }
        let (_, dp) = legendre_dd(q, x);
        nodes.push(x);
        weights.push(dd::div(Dd::from(2.0), (one - x * x) * dp * dp));
    }
    (nodes, weights)
}

fn legendre_dd(m: usize, x: Dd) -> (Dd, Dd) {
    let (mut p_prev, mut p) = (Dd::from(1.0), x);
    let (mut dp_prev, mut dp) = (Dd::from(0.0), Dd::from(1.0));
    for k in 1..m {
        let kf = k as f64;
        let next = (Dd::from(2.0 * kf + 1.0) * x * p - Dd::from(kf) * p_prev) / (kf + 1.0);
        let dnext = dp_prev + Dd::from(2.0 * kf + 1.0) * p;
        p_prev = p;
        p = next;
        dp_prev = dp;
        dp = dnext;
    }
    (p, dp)
}

/// Householder tridiagonalization followed by implicit QL (the EISPACK
/// `tred2`/`tql2` pair), on a row-major `n × n` symmetric matrix.
fn symmetric_eigen_dd(mut v: Vec<Dd>, n: usize, vectors: bool) -> Result<(Vec<Dd>, Option<Vec<Dd>>)> {
    let zero = Dd::from(0.0);
    let one = Dd::from(1.0);
    let at = |i: usize, j: usize| i * n + j;
    let mut d = vec![zero; n];
    let mut e = vec![zero; n];

    // tred2
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = zero;
        let mut h = zero;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == zero {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = zero;
                v[at(j, i)] = zero;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk = dd::div(*dk, scale);
                h += *dk * *dk;
            }
            let f = d[i - 1];
            let mut g = h.sqrt();
            if f > zero {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = zero;
            }
            for j in 0..i {
                let f = d[j];
                v[at(j, i)] = f;
                let mut g = e[j] + v[at(j, j)] * f;
                for k in j + 1..i {
                    g += v[at(k, j)] * d[k];
                    e[k] += v[at(k, j)] * f;
                }
                e[j] = g;
            }
            let mut f = zero;
            for j in 0..i {
                e[j] = dd::div(e[j], h);
                f += e[j] * d[j];
            }
            let hh = dd::div(f, h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let f = d[j];
                let g = e[j];
                for k in j..i {
                    let upd = f * e[k] + g * d[k];
                    v[at(k, j)] -= upd;
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = zero;
            }
        }
        d[i] = h;
    }
    for i in 0..n.saturating_sub(1) {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = one;
        let h = d[i + 1];
        if h != zero && vectors {
            for k in 0..=i {
                d[k] = dd::div(v[at(k, i + 1)], h);
            }
            for j in 0..=i {
                let mut g = zero;
                for k in 0..=i {
                    g += v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    let upd = g * d[k];
                    v[at(k, j)] -= upd;
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = zero;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = zero;
    }
    v[at(n - 1, n - 1)] = one;
    e[0] = zero;

    // tql2
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = zero;
    let mut f = zero;
    let mut tst1 = zero;
    let eps = Dd::from(1e-31);
    for l in 0..n {
        let size = d[l].abs() + e[l].abs();
        if size > tst1 {
            tst1 = size;
        }
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 200 {
                    return Err(Error::Eigensolver("double-double QL iteration did not converge".into()));
                }
                let g = d[l];
                let mut p = dd::div(d[l + 1] - g, Dd::from(2.0) * e[l]);
                let mut r = p.hypot(one);
                if p < zero {
                    r = -r;
                }
                d[l] = dd::div(e[l], p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = one;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = zero;
                let mut s2 = zero;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = dd::div(e[i], r);
                    c = dd::div(p, r);
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if vectors {
                        for k in 0..n {
                            let h = v[at(k, i + 1)];
                            v[at(k, i + 1)] = s * v[at(k, i)] + c * h;
                            v[at(k, i)] = c * v[at(k, i)] - s * h;
                        }
                    }
                }
                p = dd::div(-s * s2 * c3 * el1 * e[l], dl1);
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = zero;
    }
    Ok((d, vectors.then_some(v)))
}

/// All sign-change roots of `f` on `[-1, 1]`, found by scanning `subintervals`
/// equal pieces and bisecting each bracket to machine resolution.
///
/// Roots of even multiplicity (no sign change) are missed.
pub fn bisection_roots<F: Fn(f64) -> f64>(f: F, subintervals: usize) -> Vec<f64> {
    let n = subintervals.max(1);
    let grid: Vec<f64> = (0..=n).map(|i| -1.0 + 2.0 * i as f64 / n as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    let mut roots = Vec::new();
    for i in 0..n {
        let (mut a, mut b) = (grid[i], grid[i + 1]);
        let (mut fa, fb) = (values[i], values[i + 1]);
        if fa == 0.0 {
            roots.push(a);
            continue;
        }
        if i == n - 1 && fb == 0.0 {
            roots.push(b);
            continue;
        }
        if fb == 0.0 || fa.signum() == fb.signum() {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            let fm = f(mid);
            if fm == 0.0 {
                a = mid;
                b = mid;
                break;
            }
            if fm.signum() == fa.signum() {
                a = mid;
                fa = fm;
            } else {
                b = mid;
            }
        }
        roots.push(0.5 * (a + b));
    }
    roots
}
