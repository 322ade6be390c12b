mod common;

use common::*;
use num_complex::Complex64;
use qrelent::conic::{AffineExpr, InteriorPoint, Program, DEFAULT_TOL};
use qrelent::entrcones::*;
use qrelent::qmat::{random_density, random_pure};
use qrelent::quadrature::QuadratureScheme;

fn default_scheme() -> QuadratureScheme {
    QuadratureScheme::default()
}

fn solve(p: &Program) -> f64 {
    let sol = p.solve(&InteriorPoint::default(), DEFAULT_TOL).unwrap();
    assert!(sol.is_optimal(), "{:?} gap {:e}", sol.status, sol.gap);
    sol.objective
}

fn op_value(x: &M, y: &M, s: &QuadratureScheme) -> f64 {
    let mut p = Program::new();
    let t = op_rel_entr_epi(
        &mut p,
        &AffineExpr::constant(x.clone()),
        &AffineExpr::constant(y.clone()),
        s,
    )
    .unwrap();
    p.minimize(t.t.trace());
    solve(&p)
}

fn entropy_value(rho: &M, s: &QuadratureScheme) -> f64 {
    let mut p = Program::new();
    let h = quantum_entr_hypo(&mut p, &AffineExpr::constant(rho.clone()), s).unwrap();
    p.maximize(h.value);
    solve(&p)
}

fn trace_logm_value(sigma: &M, rho: &M, s: &QuadratureScheme) -> f64 {
    let mut p = Program::new();
    let u = trace_logm_hypo(&mut p, sigma, &AffineExpr::constant(rho.clone()), s).unwrap();
    p.maximize(u.value);
    solve(&p)
}

fn lifted_value(rho: &M, sigma: &M, s: &QuadratureScheme) -> f64 {
    let mut p = Program::new();
    let r = pinned(&mut p, rho);
    let q = pinned(&mut p, sigma);
    let d = quantum_rel_entr_epi(&mut p, &r, &q, s).unwrap();
    assert_eq!(d.handle.block_sizes.len(), s.m() + s.k());
    p.minimize(d.value);
    solve(&p)
}

fn cond_value(rho: &M, dims: [usize; 2], sys: usize, s: &QuadratureScheme) -> f64 {
    let mut p = Program::new();
    let r = pinned(&mut p, rho);
    let c = quantum_cond_entr_hypo(&mut p, &r, dims, sys, s).unwrap();
    p.maximize(c.value);
    solve(&p)
}

fn dm(n: usize, seed: u64) -> M {
    random_density(n, n, seed).unwrap().matrix().clone()
}

#[test]
fn op_rel_entr_examples() {
    let s = default_scheme();
    let rho = dm(3, 1);
    assert!(op_value(&rho, &rho, &s).abs() < 1e-7);

    let diag = M::from_diagonal(&nalgebra::DVector::from_vec(vec![
        Complex64::new(0.5, 0.0),
        Complex64::new(0.3, 0.0),
        Complex64::new(0.2, 0.0),
    ]));
    let expected: f64 = [0.5f64, 0.3, 0.2].iter().map(|l| l * l.ln()).sum();
    assert!((op_value(&diag, &M::identity(3, 3), &s) - expected).abs() < 1e-6);

    // Commuting pair in a random eigenbasis.
    let u = spectral(&dm(3, 2), |v| v).symmetric_eigen().eigenvectors;
    let lam = [0.6f64, 0.3, 0.1];
    let mu = [0.2f64, 0.5, 0.3];
    let mk = |d: &[f64]| {
        &u * M::from_diagonal(&nalgebra::DVector::from_iterator(
            3,
            d.iter().map(|&v| Complex64::new(v, 0.0)),
        )) * u.adjoint()
    };
    let expected: f64 = lam.iter().zip(&mu).map(|(l, m)| l * (l / m).ln()).sum();
    assert!((op_value(&mk(&lam), &mk(&mu), &s) - expected).abs() < 1e-6);

    // Noncommuting pair against the matrix-function oracle.
    let (x, y) = (dm(3, 3), dm(3, 4));
    assert!((op_value(&x, &y, &s) - op_rel_entr(&x, &y).trace().re).abs() < 1e-5);
}

#[test]
fn entropy_examples() {
    let s = default_scheme();
    let pure = random_pure(&[3], 9).matrix().clone();
    assert!(entropy_value(&pure, &s).abs() < 1e-7);
    for seed in 0..3 {
        let rho = dm(3, 20 + seed);
        assert!((entropy_value(&rho, &s) - entropy(&rho)).abs() < 1e-6);
    }
}

#[test]
fn trace_logm_examples() {
    let s = default_scheme();
    // Mixed with the identity so the smallest eigenvalue stays well inside
    // the quadrature's accurate range.
    let rho = dm(3, 30) * Complex64::new(0.7, 0.0) + M::identity(3, 3) * Complex64::new(0.1, 0.0);
    let det: f64 = eigenvalues(&rho).iter().map(|l| l.ln()).sum();
    assert!((trace_logm_value(&M::identity(3, 3), &rho, &s) - det).abs() < 1e-6);
    let sigma = dm(3, 31);
    assert!(trace_logm_value(&sigma, &M::identity(3, 3), &s).abs() < 1e-9);
    let expected = trace_logm(&sigma, &rho);
    assert!((trace_logm_value(&sigma, &rho, &s) - expected).abs() < 1e-6);
}

#[test]
fn rel_entr_examples() {
    let s = default_scheme();
    let rho = dm(3, 40);
    assert!(lifted_value(&rho, &rho, &s).abs() < 1e-7);
    let sigma = dm(3, 41);
    assert!((lifted_value(&rho, &sigma, &s) - rel_entropy(&rho, &sigma)).abs() < 1e-5);

    // Fixed ρ, free density σ: σ* = ρ and d* = 0.
    let mut p = Program::new();
    let q = p.hermitian_var(3).unwrap();
    p.add_psd(q.clone()).unwrap();
    p.add_eq(q.trace() - 1.0);
    let d = quantum_rel_entr_epi(&mut p, &AffineExpr::constant(rho.clone()), &q, &s).unwrap();
    p.minimize(d.value);
    let sol = p.solve(&InteriorPoint::default(), DEFAULT_TOL).unwrap();
    assert!(sol.is_optimal());
    assert!(sol.objective.abs() < 1e-6, "{}", sol.objective);
    assert!((sol.value(&q) - &rho).camax() < 1e-4);
}

#[test]
fn cond_entr_examples() {
    let s = default_scheme();
    let h = Complex64::new(0.5, 0.0);
    let mut bell = M::zeros(4, 4);
    for (i, j) in [(0, 0), (0, 3), (3, 0), (3, 3)] {
        bell[(i, j)] = h;
    }
    // Full-rank mixture keeps the pinned instance strictly feasible.
    let eps = 1e-9;
    let near_bell =
        &bell * Complex64::new(1.0 - eps, 0.0) + M::identity(4, 4) * Complex64::new(eps / 4.0, 0.0);
    assert!((cond_value(&near_bell, [2, 2], 2, &s) + 2f64.ln()).abs() < 1e-6);

    let (ra, rb) = (dm(2, 50), dm(2, 51));
    let prod = kron(&ra, &rb);
    // Tracing out the second factor leaves H(AB) − H(A) = H(B).
    assert!((cond_value(&prod, [2, 2], 2, &s) - entropy(&rb)).abs() < 1e-6);
    assert!((cond_value(&prod, [2, 2], 1, &s) - entropy(&ra)).abs() < 1e-6);

    let joint = dm(4, 52);
    for sys in [1, 2] {
        let expected = entropy(&joint) - entropy(&ptrace2(&joint, [2, 2], sys));
        assert!((cond_value(&joint, [2, 2], sys, &s) - expected).abs() < 1e-5);
    }
}

#[test]
fn oracle_error_shrinks_with_scheme() {
    let (x, y) = (dm(3, 60), dm(3, 61));
    let target = op_rel_entr(&x, &y).trace().re;
    let errs: Vec<f64> = [(1, 1), (2, 2), (3, 3)]
        .iter()
        .map(|&(m, k)| (op_value(&x, &y, &QuadratureScheme::new(m, k).unwrap()) - target).abs())
        .collect();
    assert!(errs[0] >= errs[1] && errs[1] >= errs[2], "{errs:?}");
    assert!(errs[2] < 1e-5);
}

#[test]
fn convexity_along_segments() {
    let s = default_scheme();
    let (r0, r1) = (dm(2, 70), dm(2, 71));
    let (s0, s1) = (dm(2, 72), dm(2, 73));
    let mix = |a: &M, b: &M, l: f64| a * Complex64::new(1.0 - l, 0.0) + b * Complex64::new(l, 0.0);
    let h0 = entropy_value(&r0, &s);
    let h1 = entropy_value(&r1, &s);
    let d0 = lifted_value(&r0, &s0, &s);
    let d1 = lifted_value(&r1, &s1, &s);
    for l in [0.25, 0.5, 0.75] {
        let hl = entropy_value(&mix(&r0, &r1, l), &s);
        assert!(hl >= (1.0 - l) * h0 + l * h1 - 1e-6);
        let dl = lifted_value(&mix(&r0, &r1, l), &mix(&s0, &s1, l), &s);
        assert!(dl <= (1.0 - l) * d0 + l * d1 + 1e-6);
    }
}
