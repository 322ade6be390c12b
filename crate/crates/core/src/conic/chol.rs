//! Dense Cholesky factorization that survives semidefinite Schur matrices.
//!
//! A pivot below `PIVOT_TOL` times its original diagonal is replaced by
//! `HUGE_PIVOT`, which pins the corresponding direction of the solution to
//! zero instead of perturbing every row.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

const PIVOT_TOL: f64 = 1e-15;
const HUGE_PIVOT: f64 = 1e128;
/// Columns below this size are eliminated serially.
const PAR_MIN: usize = 96;

/// Lower factor stored row-major, so elimination works on contiguous prefixes.
#[derive(Debug, Clone)]
pub(crate) struct PivotCholesky {
    n: usize,
    l: Vec<f64>,
}

impl PivotCholesky {
    /// Plain Cholesky when it succeeds, pivot pinning otherwise. `None` only
    /// for non-finite input.
    pub(crate) fn factor(a: &DMatrix<f64>) -> Option<PivotCholesky> {
        let n = a.nrows();
        if let Some(ch) = a.clone().cholesky() {
            let lm = ch.unpack();
            let mut l = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..=i {
                    l[i * n + j] = lm[(i, j)];
                }
            }
            return Some(PivotCholesky { n, l });
        }
        Self::factor_pinned(a)
    }

    fn factor_pinned(a: &DMatrix<f64>) -> Option<PivotCholesky> {
        let n = a.nrows();
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                l[i * n + j] = a[(i, j)];
            }
        }
        if l.iter().any(|v| !v.is_finite()) {
            return None;
        }
        for j in 0..n {
            let (head, tail) = l.split_at_mut((j + 1) * n);
            let row_j = &mut head[j * n..];
            let d = row_j[j] - dot(&row_j[..j], &row_j[..j]);
            let pivot = if d > PIVOT_TOL * a[(j, j)].abs() && d > 0.0 {
                d.sqrt()
            } else {
                HUGE_PIVOT.sqrt()
            };
            row_j[j] = pivot;
            let row_j = &head[j * n..j * n + j + 1];
            let update = |row_i: &mut [f64]| {
                row_i[j] = (row_i[j] - dot(&row_i[..j], &row_j[..j])) / pivot;
            };
            if (n - j) * j >= PAR_MIN * PAR_MIN {
                tail.par_chunks_mut(n).for_each(update);
            } else {
                tail.chunks_mut(n).for_each(update);
            }
        }
        Some(PivotCholesky { n, l })
    }

    /// `L^{-1} b`.
    pub(crate) fn forward(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let mut x = b.clone();
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let s = dot(row, &x.as_slice()[..i]);
            x[i] = (x[i] - s) / self.l[i * n + i];
        }
        x
    }

    pub(crate) fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let mut x = self.forward(b);
        for i in (0..n).rev() {
            x[i] /= self.l[i * n + i];
            let xi = x[i];
            let row = &self.l[i * n..i * n + i];
            for (k, &v) in row.iter().enumerate() {
                x[k] -= v * xi;
            }
        }
        x
    }

    pub(crate) fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.map_columns(b, |c| self.solve(c))
    }

    fn map_columns(
        &self,
        b: &DMatrix<f64>,
        f: impl Fn(&DVector<f64>) -> DVector<f64> + Sync,
    ) -> DMatrix<f64> {
        let cols: Vec<DVector<f64>> = (0..b.ncols())
            .into_par_iter()
            .map(|c| f(&b.column(c).into_owned()))
            .collect();
        let mut out = DMatrix::zeros(b.nrows(), b.ncols());
        for (c, col) in cols.iter().enumerate() {
            out.set_column(c, col);
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
