//! Gauss–Legendre quadrature on `[0, 1]` and the rational approximation of
//! the logarithm built from it.
//!
//! The approximation starts from `log x = ∫₀¹ (x - 1) / (t (x - 1) + 1) dt`,
//! discretizes the integral with an `m`-point rule, and improves accuracy
//! away from `x = 1` by first taking `k` square roots:
//!
//! ```text
//! r_{m,k}(x) = 2^k Σ_j w_j (y - 1) / (t_j (y - 1) + 1),   y = x^(1/2^k)
//! ```
//!
//! Each summand is operator monotone and operator concave in `y`, which is
//! what lets the entropy cones express it with linear matrix inequalities.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub const DEFAULT_M: usize = 3;
pub const DEFAULT_K: usize = 3;

const NEWTON_TOL: f64 = 1e-14;

/// Nodes and weights of an `m`-point rule on `[0, 1]` together with the
/// number `k` of square roots taken before quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureScheme {
    m: usize,
    k: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureScheme {
    pub fn new(m: usize, k: usize) -> Result<Self> {
        let (nodes, weights) = gauss_legendre_01(m)?;
        Ok(QuadratureScheme {
            m,
            k,
            nodes,
            weights,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `2^k`, the factor in front of the quadrature sum.
    pub fn scale(&self) -> f64 {
        (1u64 << self.k) as f64
    }

    pub fn rational_log(&self, x: f64) -> Result<f64> {
        rational_log(x, self)
    }
}

impl Default for QuadratureScheme {
    fn default() -> Self {
        QuadratureScheme::new(DEFAULT_M, DEFAULT_K).expect("default rule is valid")
    }
}

/// Legendre polynomial `P_m(x)` and its derivative by the three-term
/// recurrence.
fn legendre(m: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if m == 0 {
        return (1.0, 0.0);
    }
    for n in 2..=m {
        let nf = n as f64;
        let p2 = ((2.0 * nf - 1.0) * x * p1 - (nf - 1.0) * p0) / nf;
        p0 = p1;
        p1 = p2;
    }
    let dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn newton_legendre(m: usize) -> Option<(Vec<f64>, Vec<f64>)> {
    let mut nodes = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    for i in 0..m {
        // Roots in decreasing order on [-1, 1].
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut converged = false;
        for _ in 0..100 {
            let (p, dp) = legendre(m, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < NEWTON_TOL {
                converged = true;
                break;
            }
        }
        if !converged {
            return None;
        }
        let (_, dp) = legendre(m, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes.push((1.0 - x) / 2.0);
        weights.push(w / 2.0);
    }
    Some((nodes, weights))
}

/// Golub–Welsch: eigenvalues of the Jacobi matrix of the shifted Legendre
/// polynomials give the nodes, squared first eigenvector components the
/// weights.
pub fn golub_welsch_01(m: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if m < 1 {
        return Err(Error::InvalidArgument(
            "quadrature needs at least one node".into(),
        ));
    }
    let mut jac = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        jac[(i, i)] = 0.5;
        if i + 1 < m {
            let n = (i + 1) as f64;
            let b = 0.5 * n / (4.0 * n * n - 1.0).sqrt();
            jac[(i, i + 1)] = b;
            jac[(i + 1, i)] = b;
        }
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pairs.into_iter().unzip())
}

/// The `m`-point Gauss–Legendre rule mapped to `[0, 1]`, nodes ascending.
///
/// Nodes come from Newton iteration on `P_m`; if Newton fails or disagrees
/// with the Golub–Welsch rule, the latter is returned.
pub fn gauss_legendre_01(m: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let fallback = golub_welsch_01(m)?;
    let Some((nodes, weights)) = newton_legendre(m) else {
        return Ok(fallback);
    };
    let agree = nodes
        .iter()
        .zip(&fallback.0)
        .chain(weights.iter().zip(&fallback.1))
        .all(|(a, b)| (a - b).abs() < 1e-10);
    Ok(if agree { (nodes, weights) } else { fallback })
}

/// `r_{m,k}(x)`.
pub fn rational_log(x: f64, scheme: &QuadratureScheme) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "rational_log needs a finite positive argument, got {x}"
        )));
    }
    let y = x.powf(1.0 / scheme.scale());
    let u = y - 1.0;
    let sum: f64 = scheme
        .nodes
        .iter()
        .zip(&scheme.weights)
        .map(|(&t, &w)| w * u / (t * u + 1.0))
        .sum();
    Ok(scheme.scale() * sum)
}
