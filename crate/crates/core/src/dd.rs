//! Double-double helpers for residual checks that need more than `f64`.

use twofloat::TwoFloat;

use crate::prolate::{Parity, ProlateMode, Variant};

pub(crate) type Dd = TwoFloat;

pub(crate) fn dd(x: f64) -> Dd {
    Dd::from(x)
}

/// `a / b` to double-double accuracy.
///
/// `twofloat`'s `TwoFloat / TwoFloat` forms `1 - b·(1/b)` without a fused
/// multiply-add and returns little more than an `f64` quotient; division by a
/// plain `f64` is fine.
pub(crate) fn div(a: Dd, b: Dd) -> Dd {
    let q1 = a.hi() / b.hi();
    let r = a - b * q1;
    let q2 = r.hi() / b.hi();
    let r = r - b * q2;
    let q3 = r.hi() / b.hi();
    Dd::new_add(q1, q2) + q3
}

/// Coefficients of `ψ_n` over un-normalized `P_m`, refined in double-double
/// by inverse iteration on the operator matrix with degree `<= cutoff`.
///
/// `cutoff` should exceed the one the mode was built with so that truncation
/// stays below double-double resolution.
pub(crate) fn refine_mode(c: f64, variant: Variant, mode: &ProlateMode, cutoff: usize) -> Vec<Dd> {
    let first = match mode.parity {
        Parity::Even => 0,
        Parity::Odd => 1,
    };
    let degrees: Vec<usize> = (first..=cutoff).step_by(2).collect();
    let n = degrees.len();
    let s = dd(variant.sign()) * dd(c) * dd(c);
    let mut diag = Vec::with_capacity(n);
    let mut off = Vec::with_capacity(n.saturating_sub(1));
    for (i, &m) in degrees.iter().enumerate() {
        let mf = m as f64;
        let b = b_exact(m);
        diag.push(dd(-mf * (mf + 1.0)) + s * b);
        if i + 1 < n {
            let num = dd((mf + 1.0) * (mf + 2.0));
            let den = dd(2.0 * mf + 3.0) * (dd(2.0 * mf + 1.0) * dd(2.0 * mf + 5.0)).sqrt();
            off.push(div(s * num, den));
        }
    }

    let norm_factor = |m: usize| (dd(2.0 * m as f64 + 1.0) / 2.0).sqrt();
    let mut v: Vec<Dd> = degrees
        .iter()
        .map(|&m| {
            let d = mode.coeffs.coeffs.get(m).copied().unwrap_or(0.0);
            div(dd(d), norm_factor(m))
        })
        .collect();
    normalize(&mut v);
    let reference = v.clone();

    let sigma = dd(mode.chi);
    for _ in 0..3 {
        let mut w = solve_shifted(&diag, &off, sigma, &v);
        normalize(&mut w);
        v = w;
    }
    let dot = v.iter().zip(&reference).fold(dd(0.0), |a, (x, y)| a + *x * *y);
    if dot < dd(0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }

    let mut coeffs = vec![dd(0.0); cutoff + 1];
    for (i, &m) in degrees.iter().enumerate() {
        coeffs[m] = v[i] * norm_factor(m);
    }
    coeffs
}

/// `B_m = α_m γ_{m+1} + γ_m α_{m-1} = (2m² + 2m - 1) / ((2m-1)(2m+3))`.
fn b_exact(m: usize) -> Dd {
    let mf = m as f64;
    div(
        dd(2.0 * mf * mf + 2.0 * mf - 1.0),
        dd(2.0 * mf - 1.0) * dd(2.0 * mf + 3.0),
    )
}

fn normalize(v: &mut [Dd]) {
    let norm = v.iter().fold(dd(0.0), |a, x| a + *x * *x).sqrt();
    if norm > dd(0.0) {
        v.iter_mut().for_each(|x| *x = div(*x, norm));
    }
}

/// Solves `(T - σI) w = b` for symmetric tridiagonal `T` by Gaussian
/// elimination with partial pivoting (LAPACK `gttrf` layout).
fn solve_shifted(diag: &[Dd], off: &[Dd], sigma: Dd, b: &[Dd]) -> Vec<Dd> {
    let n = diag.len();
    let zero = dd(0.0);
    let mut d: Vec<Dd> = diag.iter().map(|&x| x - sigma).collect();
    let mut du: Vec<Dd> = off.to_vec();
    let dl: Vec<Dd> = off.to_vec();
    let mut du2 = vec![zero; n];
    let mut rhs = b.to_vec();
    for i in 0..n.saturating_sub(1) {
        if d[i].abs() >= dl[i].abs() {
            if d[i] != zero {
                let fact = div(dl[i], d[i]);
                d[i + 1] -= fact * du[i];
                let r = rhs[i];
                rhs[i + 1] -= fact * r;
            }
        } else {
            let fact = div(d[i], dl[i]);
            d[i] = dl[i];
            let temp = du[i];
            du[i] = d[i + 1];
            d[i + 1] = temp - fact * d[i + 1];
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] = -(fact * du[i + 1]);
            }
            let (ri, rn) = (rhs[i], rhs[i + 1]);
            rhs[i] = rn;
            rhs[i + 1] = ri - fact * rn;
        }
    }
    let tiny = dd(1e-280);
    let mut w = vec![zero; n];
    for i in (0..n).rev() {
        let mut s = rhs[i];
        if i + 1 < n {
            s -= du[i] * w[i + 1];
        }
        if i + 2 < n {
            s -= du2[i] * w[i + 2];
        }
        let p = if d[i] == zero { tiny } else { d[i] };
        w[i] = div(s, p);
    }
    w
}

/// `Σ d_m P_m(x)` by Clenshaw recurrence in double-double.
pub(crate) fn clenshaw(coeffs: &[Dd], x: f64) -> Dd {
    let x = dd(x);
    let mut b1 = dd(0.0);
    let mut b2 = dd(0.0);
    for m in (0..coeffs.len()).rev() {
        let mf = m as f64;
        let alpha = div(dd(2.0 * mf + 1.0), dd(mf + 1.0));
        let beta = div(dd(mf + 1.0), dd(mf + 2.0));
        let b0 = coeffs[m] + alpha * x * b1 - beta * b2;
        b2 = b1;
        b1 = b0;
    }
    b1
}

/// Coefficients of the derivative series.
pub(crate) fn derivative(coeffs: &[Dd]) -> Vec<Dd> {
    let n = coeffs.len();
    if n <= 1 {
        return vec![dd(0.0)];
    }
    let mut e = vec![dd(0.0); n + 1];
    for m in (0..n - 1).rev() {
        let tail = e[m + 2] / (2.0 * m as f64 + 5.0);
        e[m] = dd(2.0 * m as f64 + 1.0) * (coeffs[m + 1] + tail);
    }
    e.truncate(n - 1);
    e
}

const LN2_HI: f64 = std::f64::consts::LN_2;
const LN2_LO: f64 = 2.319_046_813_846_299_6e-17;

/// `e^x` to double-double accuracy.
///
/// `twofloat`'s own `exp`/`cosh`/`sinh` lose digits (its `cosh(1)` is off in
/// the twelfth place), so they are not used.
pub(crate) fn exp(x: Dd) -> Dd {
    let k = (x.hi() / LN2_HI).round();
    let r = x - dd(k) * dd(LN2_HI) - dd(k) * dd(LN2_LO);
    // e^r = (e^{r/32})^32
    let s = r / 32.0;
    let mut term = dd(1.0);
    let mut sum = dd(1.0);
    for j in 1..=20 {
        term = term * s / j as f64;
        sum += term;
    }
    for _ in 0..5 {
        sum = sum * sum;
    }
    sum * dd(2f64.powi(k as i32))
}

/// `sinh x`, by series for small `|x|` to avoid cancellation.
pub(crate) fn sinh(x: Dd) -> Dd {
    if x.hi().abs() < 0.5 {
        let x2 = x * x;
        let mut term = x;
        let mut sum = x;
        for j in 1..=16 {
            term = term * x2 / ((2 * j) * (2 * j + 1)) as f64;
            sum += term;
        }
        sum
    } else {
        let e = exp(x);
        (e - div(dd(1.0), e)) / 2.0
    }
}

pub(crate) fn cosh(x: Dd) -> Dd {
    let e = exp(x);
    (e + div(dd(1.0), e)) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err(a: Dd, hi: f64, lo: f64) -> f64 {
        ((a - dd(hi)) - dd(lo)).hi().abs() / hi.abs()
    }

    #[test]
    fn transcendental_accuracy() {
        // 40-digit references split into hi + lo
        assert!(err(cosh(dd(1.0)), 1.5430806348152437, 6.606796775006833e-17) < 1e-29);
        assert!(err(sinh(dd(1.0)), 1.1752011936438014, 7.849672142285669e-17) < 1e-29);
        assert!(err(cosh(dd(3.0)), 10.067661995777765, 5.150335194797485e-16) < 1e-29);
        assert!(err(sinh(dd(0.1)), 0.10016675001984403, 3.3613961287681504e-18) < 1e-29);
        assert!(err(exp(dd(10.0)), 22026.465794806718, -1.3780134700517372e-12) < 1e-29);
        assert!(err(sinh(dd(0.001)), 0.001000000166666675, -3.571742859983052e-20) < 1e-29);
    }

    #[test]
    fn division() {
        let third = div(dd(1.0), dd(3.0));
        assert!((third * 3.0 - dd(1.0)).hi().abs() < 1e-31);
        let a = Dd::new_add(1.0, 1e-17);
        let q = div(a, dd(7.0));
        assert!((q * 7.0 - a).hi().abs() < 1e-31);
    }

    #[test]
    fn refined_series_is_consistent() {
        let c = [dd(0.5), dd(-0.25), dd(0.125)];
        let x = 0.7;
        let p2 = (3.0 * x * x - 1.0) / 2.0;
        assert!((clenshaw(&c, x).hi() - (0.5 - 0.25 * x + 0.125 * p2)).abs() < 1e-16);
        let d = derivative(&c);
        assert!((clenshaw(&d, x).hi() - (-0.25 + 0.125 * 3.0 * x)).abs() < 1e-16);
    }
}
