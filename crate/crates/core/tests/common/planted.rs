//! SDPs with a planted optimum: `min cᵀy` subject to `Σ y_i F_i − F_0 ⪰ 0`.
//!
//! Choose an orthogonal `Q` and put `S* = Q diag(s, 0) Qᵀ` and
//! `Z* = Q diag(0, z) Qᵀ`, so `S* Z* = 0`. With random `F_i` and `y*`, setting
//! `F_0 = Σ y*_i F_i − S*` and `c_i = ⟨F_i, Z*⟩` makes `(y*, Z*)` a strictly
//! complementary primal-dual pair. `y*` is unique when `m ≤ r(r+1)/2` for the
//! rank `r` of `Z*`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use qrelent::conic::{AffineExpr, Program, ScalarExpr, Var};
use qrelent::qmat::random_hermitian;

pub type R = DMatrix<f64>;

pub struct Planted {
    /// `F_0, F_1, ..., F_m`.
    pub f: Vec<R>,
    pub c: Vec<f64>,
    pub y: Vec<f64>,
    pub objective: f64,
}

fn symmetric(n: usize, seed: u64) -> R {
    random_hermitian(n, seed).map(|z| z.re)
}

pub fn planted(n: usize, r: usize, m: usize, seed: u64) -> Planted {
    assert!(r < n && m <= r * (r + 1) / 2);
    let q = SymmetricEigen::new(symmetric(n, seed)).eigenvectors;
    let s = R::from_fn(n, n, |i, j| {
        if i == j && i < n - r {
            1.0 + 0.3 * i as f64
        } else {
            0.0
        }
    });
    let z = R::from_fn(n, n, |i, j| {
        if i == j && i >= n - r {
            0.5 + 0.2 * i as f64
        } else {
            0.0
        }
    });
    let s_star = &q * s * q.transpose();
    let z_star = &q * z * q.transpose();
    let fs: Vec<R> = (1..=m)
        .map(|i| symmetric(n, seed * 1000 + i as u64))
        .collect();
    let y: Vec<f64> = symmetric(m, seed + 77).column(0).iter().copied().collect();
    let mut f0 = -s_star;
    for (fi, yi) in fs.iter().zip(&y) {
        f0 += fi * *yi;
    }
    let c: Vec<f64> = fs.iter().map(|fi| fi.dot(&z_star)).collect();
    let objective = c.iter().zip(&y).map(|(a, b)| a * b).sum();
    let mut f = vec![f0];
    f.extend(fs);
    Planted { f, c, y, objective }
}

fn complex(m: &R) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

pub fn program(p: &Planted) -> (Program, Vec<Var>) {
    let mut prog = Program::new();
    let vars: Vec<Var> = p.c.iter().map(|_| prog.new_var()).collect();
    let lmi = AffineExpr::from_parts(
        complex(&-&p.f[0]),
        vars.iter().zip(&p.f[1..]).map(|(&v, fi)| (v, complex(fi))),
    )
    .unwrap();
    prog.add_psd(lmi).unwrap();
    let mut obj = ScalarExpr::constant(0.0);
    for (&v, &ci) in vars.iter().zip(&p.c) {
        obj.add_term(v, ci);
    }
    prog.minimize(obj);
    (prog, vars)
}

/// Ten instances of sizes 4 to 8.
pub fn suite() -> Vec<Planted> {
    (0..10u64)
        .map(|i| {
            let n = 4 + (i as usize % 5);
            let r = n / 2;
            let m = (r * (r + 1) / 2).min(n);
            planted(n, r, m, 500 + i)
        })
        .collect()
}
