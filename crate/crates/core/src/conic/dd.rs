//! Double-double dense kernels for the end phase of the interior-point method,
//! where the Schur matrix is too ill conditioned for `f64` solves.

use nalgebra::DMatrix;
use twofloat::TwoFloat;

pub(crate) type Dd = TwoFloat;

pub(crate) const ZERO: Dd = TwoFloat::from_f64(0.0);

/// Product of two doubles, exact.
#[inline]
pub(crate) fn mul2(a: f64, b: f64) -> Dd {
    TwoFloat::new_mul(a, b)
}

/// `a / b` by two correction steps of long division. The crate's own
/// double-double quotient rounds `1 − b·(1/b)` in plain `f64` and so keeps
/// only `f64` accuracy.
#[inline]
pub(crate) fn div(a: Dd, b: Dd) -> Dd {
    let q1 = a.hi() / b.hi();
    let r = a - b * q1;
    let q2 = r.hi() / b.hi();
    let r = r - b * q2;
    let q3 = r.hi() / b.hi();
    Dd::new_add(q1, q2) + q3
}

/// Row-major double-double matrix.
#[derive(Debug, Clone)]
pub(crate) struct DdMat {
    pub(crate) rows: usize,
    pub(crate) cols: usize,
    pub(crate) a: Vec<Dd>,
}

impl DdMat {
    pub(crate) fn zeros(rows: usize, cols: usize) -> DdMat {
        DdMat {
            rows,
            cols,
            a: vec![ZERO; rows * cols],
        }
    }

    pub(crate) fn from_f64(m: &DMatrix<f64>) -> DdMat {
        let mut out = DdMat::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out.a[i * m.ncols() + j] = Dd::from(m[(i, j)]);
            }
        }
        out
    }

    pub(crate) fn to_f64(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.a[i * self.cols + j].hi())
    }

    #[inline]
    pub(crate) fn at(&self, i: usize, j: usize) -> Dd {
        self.a[i * self.cols + j]
    }

    #[inline]
    pub(crate) fn at_mut(&mut self, i: usize, j: usize) -> &mut Dd {
        &mut self.a[i * self.cols + j]
    }

    pub(crate) fn add(&self, o: &DdMat) -> DdMat {
        let a = self.a.iter().zip(&o.a).map(|(x, y)| *x + *y).collect();
        DdMat { a, ..*self }
    }

    pub(crate) fn sub(&self, o: &DdMat) -> DdMat {
        let a = self.a.iter().zip(&o.a).map(|(x, y)| *x - *y).collect();
        DdMat { a, ..*self }
    }

    pub(crate) fn scale(&self, s: f64) -> DdMat {
        let a = self.a.iter().map(|x| *x * s).collect();
        DdMat { a, ..*self }
    }

    pub(crate) fn symmetrized(&self) -> DdMat {
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.a[i * self.cols + j] = (self.at(i, j) + self.at(j, i)) * 0.5;
            }
        }
        out
    }

    /// `self · b` with `b` in `f64`.
    pub(crate) fn mul_f64(&self, b: &DMatrix<f64>) -> DdMat {
        let mut out = DdMat::zeros(self.rows, b.ncols());
        for i in 0..self.rows {
            let row = &mut out.a[i * b.ncols()..(i + 1) * b.ncols()];
            for k in 0..self.cols {
                let v = self.a[i * self.cols + k];
                if v.hi() == 0.0 {
                    continue;
                }
                for (j, o) in row.iter_mut().enumerate() {
                    *o += v * b[(k, j)];
                }
            }
        }
        out
    }

    /// `a · self` with `a` in `f64`.
    pub(crate) fn f64_mul(a: &DMatrix<f64>, b: &DdMat) -> DdMat {
        let mut out = DdMat::zeros(a.nrows(), b.cols);
        for i in 0..a.nrows() {
            let row = &mut out.a[i * b.cols..(i + 1) * b.cols];
            for k in 0..a.ncols() {
                let v = a[(i, k)];
                if v == 0.0 {
                    continue;
                }
                for (o, &bv) in row.iter_mut().zip(&b.a[k * b.cols..(k + 1) * b.cols]) {
                    *o += bv * v;
                }
            }
        }
        out
    }

    pub(crate) fn mul(&self, b: &DdMat) -> DdMat {
        let mut out = DdMat::zeros(self.rows, b.cols);
        for i in 0..self.rows {
            let row = &mut out.a[i * b.cols..(i + 1) * b.cols];
            for k in 0..self.cols {
                let v = self.a[i * self.cols + k];
                if v.hi() == 0.0 {
                    continue;
                }
                for (o, &bv) in row.iter_mut().zip(&b.a[k * b.cols..(k + 1) * b.cols]) {
                    *o += v * bv;
                }
            }
        }
        out
    }
}

/// Double-double Cholesky with pinned pivots, see [`super::chol`].
#[derive(Debug, Clone)]
pub(crate) struct DdCholesky {
    n: usize,
    l: Vec<Dd>,
}

const PIVOT_TOL: f64 = 1e-30;
const HUGE_PIVOT: f64 = 1e128;

impl DdCholesky {
    pub(crate) fn factor(a: &DdMat) -> Option<DdCholesky> {
        let n = a.rows;
        if a.a.iter().any(|v| !v.hi().is_finite()) {
            return None;
        }
        let mut l = vec![ZERO; n * n];
        for i in 0..n {
            for j in 0..=i {
                l[i * n + j] = a.at(i, j);
            }
        }
        for j in 0..n {
            let (head, tail) = l.split_at_mut((j + 1) * n);
            let row_j = &mut head[j * n..];
            let d = row_j[j] - dot(&row_j[..j], &row_j[..j]);
            let pivot = if d.hi() > PIVOT_TOL * a.at(j, j).hi().abs() {
                d.sqrt()
            } else {
                Dd::from(HUGE_PIVOT.sqrt())
            };
            row_j[j] = pivot;
            let row_j = &head[j * n..j * n + j];
            for row_i in tail.chunks_mut(n) {
                row_i[j] = div(row_i[j] - dot(&row_i[..j], row_j), pivot);
            }
        }
        Some(DdCholesky { n, l })
    }

    pub(crate) fn forward(&self, b: &[Dd]) -> Vec<Dd> {
        let n = self.n;
        let mut x = b.to_vec();
        for i in 0..n {
            let s = dot(&self.l[i * n..i * n + i], &x[..i]);
            x[i] = div(x[i] - s, self.l[i * n + i]);
        }
        x
    }

    pub(crate) fn solve(&self, b: &[Dd]) -> Vec<Dd> {
        let n = self.n;
        let mut x = self.forward(b);
        for i in (0..n).rev() {
            x[i] = div(x[i], self.l[i * n + i]);
            let xi = x[i];
            for (k, &v) in self.l[i * n..i * n + i].iter().enumerate() {
                x[k] -= v * xi;
            }
        }
        x
    }
}

#[inline(always)]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline(always)]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

// The kernels below carry the leading sum exactly and the low-order terms in
// one `f64`, which keeps double-double accuracy relative to `Σ |a_i b_i|` at
// a fraction of the cost of full double-double additions.

#[inline(always)]
fn dot_kernel(a: &[Dd], b: &[Dd]) -> Dd {
    let (mut s, mut c) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (p, e) = two_prod(x.hi(), y.hi());
        let (t, f) = two_sum(s, p);
        s = t;
        c += e + f + x.hi() * y.lo() + x.lo() * y.hi();
    }
    Dd::new_add(s, c)
}

#[inline(always)]
fn axpy_kernel(y: &mut [Dd], a: Dd, x: &[f64]) {
    for (o, &xv) in y.iter_mut().zip(x) {
        let (p, e) = two_prod(a.hi(), xv);
        let (t, f) = two_sum(o.hi(), p);
        *o = Dd::new_add(t, o.lo() + e + f + a.lo() * xv);
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "fma")]
unsafe fn dot_fma(a: &[Dd], b: &[Dd]) -> Dd {
    dot_kernel(a, b)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "fma")]
unsafe fn axpy_fma(y: &mut [Dd], a: Dd, x: &[f64]) {
    axpy_kernel(y, a, x)
}

/// `Σ a_i b_i`.
pub(crate) fn dot(a: &[Dd], b: &[Dd]) -> Dd {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("fma") {
        // SAFETY: the required feature was detected at run time.
        return unsafe { dot_fma(a, b) };
    }
    dot_kernel(a, b)
}

/// `y += a x`.
pub(crate) fn axpy(y: &mut [Dd], a: Dd, x: &[f64]) {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("fma") {
        // SAFETY: the required feature was detected at run time.
        return unsafe { axpy_fma(y, a, x) };
    }
    axpy_kernel(y, a, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_a_hilbert_system_beyond_double_precision() {
        // Hilbert(12) has condition ~1.7e16, beyond what an f64 solve resolves.
        let n = 12;
        let mut h = DdMat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                *h.at_mut(i, j) = div(Dd::from(1.0), Dd::from((i + j + 1) as f64));
            }
        }
        let b: Vec<Dd> = (0..n)
            .map(|i| (0..n).fold(ZERO, |acc, j| acc + h.at(i, j)))
            .collect();
        let x = DdCholesky::factor(&h).unwrap().solve(&b);
        for v in x {
            assert!((v.hi() - 1.0).abs() < 1e-12, "{v:?}");
        }
    }

    #[test]
    fn quotient_is_accurate_beyond_f64() {
        let third = div(Dd::from(1.0), Dd::from(3.0));
        let back = third * 3.0 - 1.0;
        assert!(back.hi().abs() < 1e-30, "{back:?}");
        let a = Dd::new_add(1.0, 1e-20);
        let b = Dd::new_add(7.0, 3e-19);
        let e = div(a, b) * b - a;
        assert!(e.hi().abs() < 1e-30, "{e:?}");
    }

    #[test]
    fn kernels_agree_with_plain_double_double() {
        let a: Vec<Dd> = (0..50)
            .map(|i| div(Dd::from(1.0), Dd::from(i as f64 + 0.5)))
            .collect();
        let b: Vec<Dd> = (0..50).map(|i| Dd::from((i as f64).sin()) * 1e3).collect();
        let plain = a.iter().zip(&b).fold(ZERO, |acc, (x, y)| acc + *x * *y);
        assert!((dot(&a, &b) - plain).hi().abs() < 1e-26);
        let x: Vec<f64> = (0..50).map(|i| (i as f64).cos()).collect();
        let mut y = b.clone();
        axpy(&mut y, a[3], &x);
        for i in 0..50 {
            assert!((y[i] - (b[i] + a[3] * x[i])).hi().abs() < 1e-26);
        }
    }

    #[test]
    fn products_match_f64_on_exact_inputs() {
        let a = DMatrix::from_fn(3, 4, |i, j| (i + 2 * j) as f64);
        let b = DMatrix::from_fn(4, 2, |i, j| (3 * i + j) as f64 - 2.0);
        let exact = &a * &b;
        let da = DdMat::from_f64(&a);
        assert_eq!(da.mul_f64(&b).to_f64(), exact);
        assert_eq!(DdMat::f64_mul(&a, &DdMat::from_f64(&b)).to_f64(), exact);
        assert_eq!(da.mul(&DdMat::from_f64(&b)).to_f64(), exact);
    }
}
