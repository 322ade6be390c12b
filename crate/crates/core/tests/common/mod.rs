//! Independent eigendecomposition and scalar oracles shared by integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use qrelent::conic::{AffineExpr, Program};

pub mod planted;

pub type M = DMatrix<Complex64>;

pub fn spectral(m: &M, f: impl Fn(f64) -> f64) -> M {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(h);
    let d = M::from_diagonal(&eig.eigenvalues.map(|v| Complex64::new(f(v), 0.0)));
    &eig.eigenvectors * d * eig.eigenvectors.adjoint()
}

pub fn eigenvalues(m: &M) -> Vec<f64> {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let mut v: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// `−Σ λ log λ` in nats.
pub fn entropy(m: &M) -> f64 {
    eigenvalues(m)
        .into_iter()
        .filter(|&l| l > 1e-15)
        .map(|l| -l * l.ln())
        .sum()
}

/// `Tr ρ log ρ − Tr ρ log σ` for full-rank `σ`.
pub fn rel_entropy(rho: &M, sigma: &M) -> f64 {
    -entropy(rho) - (rho * spectral(sigma, f64::ln)).trace().re
}

/// `Tr[σ log ρ]`.
pub fn trace_logm(sigma: &M, rho: &M) -> f64 {
    (sigma * spectral(rho, f64::ln)).trace().re
}

/// `X^{1/2} log(X^{1/2} Y^{-1} X^{1/2}) X^{1/2}`.
pub fn op_rel_entr(x: &M, y: &M) -> M {
    let xh = spectral(x, f64::sqrt);
    let yinv = spectral(y, |v| 1.0 / v);
    let inner = &xh * yinv * &xh;
    &xh * spectral(&inner, f64::ln) * &xh
}

pub fn kron(a: &M, b: &M) -> M {
    a.kronecker(b)
}

/// Partial trace over subsystem `sys` (1 or 2) of a bipartite operator.
pub fn ptrace2(m: &M, dims: [usize; 2], sys: usize) -> M {
    let [a, b] = dims;
    if sys == 1 {
        M::from_fn(b, b, |i, j| (0..a).map(|k| m[(k * b + i, k * b + j)]).sum())
    } else {
        M::from_fn(a, a, |i, j| (0..b).map(|k| m[(i * b + k, j * b + k)]).sum())
    }
}

pub fn h2(p: f64) -> f64 {
    let t = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    t(p) + t(1.0 - p)
}

/// Golden-section maximization of a unimodal function on `[lo, hi]`.
pub fn golden_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    for _ in 0..200 {
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    f((a + b) / 2.0).max(f(lo)).max(f(hi))
}

/// A Hermitian variable pinned to `value` by equality constraints.
pub fn pinned(prog: &mut Program, value: &M) -> AffineExpr {
    let v = prog.hermitian_var(value.nrows()).unwrap();
    prog.add_eq_matrix(&v, value).unwrap();
    v
}
