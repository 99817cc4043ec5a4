//! Classical orthogonal polynomials by three-term recurrence.
//!
//! Each evaluator returns `(p, p', p'')` using the standard derivative
//! identities, so the closed-form eigenfunctions in the catalog carry exact
//! slopes.

/// Physicists' Hermite polynomial `H_n`.
pub fn hermite(n: usize, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, 2.0 * x);
    if n == 0 {
        return p0;
    }
    for k in 1..n {
        let p2 = 2.0 * x * p1 - 2.0 * k as f64 * p0;
        p0 = p1;
        p1 = p2;
    }
    p1
}

pub fn hermite_triple(n: usize, x: f64) -> (f64, f64, f64) {
    let p = hermite(n, x);
    let dp = if n >= 1 { 2.0 * n as f64 * hermite(n - 1, x) } else { 0.0 };
    let d2p = if n >= 2 {
        4.0 * (n * (n - 1)) as f64 * hermite(n - 2, x)
    } else {
        0.0
    };
    (p, dp, d2p)
}

/// Generalized Laguerre polynomial `L_n^{(a)}`.
pub fn laguerre(n: usize, a: f64, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, 1.0 + a - x);
    if n == 0 {
        return p0;
    }
    for k in 1..n {
        let k = k as f64;
        let p2 = ((2.0 * k + 1.0 + a - x) * p1 - (k + a) * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
    }
    p1
}

pub fn laguerre_triple(n: usize, a: f64, x: f64) -> (f64, f64, f64) {
    let p = laguerre(n, a, x);
    let dp = if n >= 1 { -laguerre(n - 1, a + 1.0, x) } else { 0.0 };
    let d2p = if n >= 2 { laguerre(n - 2, a + 2.0, x) } else { 0.0 };
    (p, dp, d2p)
}

/// Jacobi polynomial `P_n^{(a,b)}`.
pub fn jacobi(n: usize, a: f64, b: f64, x: f64) -> f64 {
    let p0 = 1.0;
    if n == 0 {
        return p0;
    }
    let p1 = 0.5 * (a - b) + 0.5 * (a + b + 2.0) * x;
    let (mut p0, mut p1) = (p0, p1);
    for k in 2..=n {
        let k = k as f64;
        let s = 2.0 * k + a + b;
        let c1 = 2.0 * k * (k + a + b) * (s - 2.0);
        let c2 = (s - 1.0) * (a * a - b * b);
        let c3 = (s - 2.0) * (s - 1.0) * s;
        let c4 = 2.0 * (k + a - 1.0) * (k + b - 1.0) * s;
        let p2 = ((c2 + c3 * x) * p1 - c4 * p0) / c1;
        p0 = p1;
        p1 = p2;
    }
    p1
}

pub fn jacobi_triple(n: usize, a: f64, b: f64, x: f64) -> (f64, f64, f64) {
    let p = jacobi(n, a, b, x);
    let nf = n as f64;
    let dp = if n >= 1 {
        0.5 * (nf + a + b + 1.0) * jacobi(n - 1, a + 1.0, b + 1.0, x)
    } else {
        0.0
    };
    let d2p = if n >= 2 {
        0.25 * (nf + a + b + 1.0) * (nf + a + b + 2.0) * jacobi(n - 2, a + 2.0, b + 2.0, x)
    } else {
        0.0
    };
    (p, dp, d2p)
}
