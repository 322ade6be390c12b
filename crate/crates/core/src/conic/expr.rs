//! Affine expressions in real scalar decision variables.
//!
//! An [`AffineExpr`] is a complex matrix `C + Σ_v x_v A_v` where the `x_v`
//! are real scalars. Every linear superoperator is applied to the constant
//! and to each coefficient separately, so `evaluate(L(e), x) = L(evaluate(e, x))`
//! holds by construction.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::qmat::{self, CMat, C64};

/// Index of a real scalar decision variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Real affine functional `c + Σ a_v x_v`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScalarExpr {
    constant: f64,
    terms: BTreeMap<Var, f64>,
}

impl ScalarExpr {
    pub fn constant(c: f64) -> Self {
        ScalarExpr {
            constant: c,
            terms: BTreeMap::new(),
        }
    }

    pub fn var(v: Var) -> Self {
        ScalarExpr {
            constant: 0.0,
            terms: BTreeMap::from([(v, 1.0)]),
        }
    }

    pub fn constant_part(&self) -> f64 {
        self.constant
    }

    pub fn terms(&self) -> impl Iterator<Item = (Var, f64)> + '_ {
        self.terms.iter().map(|(&v, &a)| (v, a))
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = ScalarExpr::constant(self.constant * s);
        for (&v, &a) in &self.terms {
            if a * s != 0.0 {
                out.terms.insert(v, a * s);
            }
        }
        out
    }

    pub fn add_term(&mut self, v: Var, a: f64) {
        let e = self.terms.entry(v).or_insert(0.0);
        *e += a;
        if *e == 0.0 {
            self.terms.remove(&v);
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|(v, a)| a * x[v.0]).sum::<f64>()
    }

    pub fn max_var(&self) -> Option<Var> {
        self.terms.keys().next_back().copied()
    }
}

impl Add<&ScalarExpr> for &ScalarExpr {
    type Output = ScalarExpr;
    fn add(self, rhs: &ScalarExpr) -> ScalarExpr {
        let mut out = self.clone();
        out.constant += rhs.constant;
        for (&v, &a) in &rhs.terms {
            out.add_term(v, a);
        }
        out
    }
}

impl Add<ScalarExpr> for ScalarExpr {
    type Output = ScalarExpr;
    fn add(self, rhs: ScalarExpr) -> ScalarExpr {
        &self + &rhs
    }
}

impl Add<f64> for ScalarExpr {
    type Output = ScalarExpr;
    fn add(mut self, rhs: f64) -> ScalarExpr {
        self.constant += rhs;
        self
    }
}

impl Sub<&ScalarExpr> for &ScalarExpr {
    type Output = ScalarExpr;
    fn sub(self, rhs: &ScalarExpr) -> ScalarExpr {
        self + &rhs.scale(-1.0)
    }
}

impl Sub<ScalarExpr> for ScalarExpr {
    type Output = ScalarExpr;
    fn sub(self, rhs: ScalarExpr) -> ScalarExpr {
        &self - &rhs
    }
}

impl Sub<f64> for ScalarExpr {
    type Output = ScalarExpr;
    fn sub(self, rhs: f64) -> ScalarExpr {
        self + (-rhs)
    }
}

impl Neg for ScalarExpr {
    type Output = ScalarExpr;
    fn neg(self) -> ScalarExpr {
        self.scale(-1.0)
    }
}

impl Mul<f64> for ScalarExpr {
    type Output = ScalarExpr;
    fn mul(self, rhs: f64) -> ScalarExpr {
        self.scale(rhs)
    }
}

impl std::iter::Sum for ScalarExpr {
    fn sum<I: Iterator<Item = ScalarExpr>>(iter: I) -> ScalarExpr {
        iter.fold(ScalarExpr::default(), |acc, e| acc + e)
    }
}

/// Matrix-valued affine expression `C + Σ_v x_v A_v` over real scalars `x_v`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineExpr {
    constant: CMat,
    coeffs: BTreeMap<Var, CMat>,
}

fn is_zero(m: &CMat) -> bool {
    m.iter().all(|z| z.re == 0.0 && z.im == 0.0)
}

impl AffineExpr {
    pub fn constant(m: CMat) -> Self {
        AffineExpr {
            constant: m,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::constant(CMat::zeros(rows, cols))
    }

    /// Builds `constant + Σ x_v * coeff_v`; all parts must share a shape.
    pub fn from_parts(
        constant: CMat,
        terms: impl IntoIterator<Item = (Var, CMat)>,
    ) -> Result<Self> {
        let mut out = Self::constant(constant);
        for (v, m) in terms {
            if m.shape() != out.shape() {
                return Err(Error::DimensionMismatch(format!(
                    "coefficient {:?} vs expression {:?}",
                    m.shape(),
                    out.shape()
                )));
            }
            out.add_coeff(v, &m);
        }
        Ok(out)
    }

    /// A 1x1 expression from a scalar one.
    pub fn from_scalar(s: &ScalarExpr) -> Self {
        let one = |a: f64| CMat::from_element(1, 1, C64::new(a, 0.0));
        let mut out = Self::constant(one(s.constant));
        for (v, a) in s.terms() {
            out.coeffs.insert(v, one(a));
        }
        out
    }

    fn add_coeff(&mut self, v: Var, m: &CMat) {
        match self.coeffs.get_mut(&v) {
            Some(existing) => {
                *existing += m;
                if is_zero(existing) {
                    self.coeffs.remove(&v);
                }
            }
            None => {
                if !is_zero(m) {
                    self.coeffs.insert(v, m.clone());
                }
            }
        }
    }

    pub fn rows(&self) -> usize {
        self.constant.nrows()
    }

    pub fn cols(&self) -> usize {
        self.constant.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.constant.shape()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn constant_part(&self) -> &CMat {
        &self.constant
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (Var, &CMat)> {
        self.coeffs.iter().map(|(&v, m)| (v, m))
    }

    pub fn num_terms(&self) -> usize {
        self.coeffs.len()
    }

    /// Structural constancy: no variable appears.
    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// True when the constant and every coefficient have zero imaginary part.
    pub fn is_real(&self) -> bool {
        qmat::is_real(&self.constant) && self.coeffs.values().all(qmat::is_real)
    }

    pub fn max_var(&self) -> Option<Var> {
        self.coeffs.keys().next_back().copied()
    }

    /// Largest Hermiticity defect over the constant and coefficients.
    pub fn hermitian_defect(&self) -> f64 {
        std::iter::once(&self.constant)
            .chain(self.coeffs.values())
            .map(qmat::hermitian_defect)
            .fold(0.0, f64::max)
    }

    /// Applies a linear map to every part.
    pub fn map(&self, f: impl Fn(&CMat) -> CMat) -> AffineExpr {
        let constant = f(&self.constant);
        let coeffs = self
            .coeffs
            .iter()
            .map(|(&v, m)| (v, f(m)))
            .filter(|(_, m)| !is_zero(m))
            .collect();
        AffineExpr { constant, coeffs }
    }

    pub fn try_map(&self, f: impl Fn(&CMat) -> Result<CMat>) -> Result<AffineExpr> {
        let constant = f(&self.constant)?;
        let mut coeffs = BTreeMap::new();
        for (&v, m) in &self.coeffs {
            let out = f(m)?;
            if !is_zero(&out) {
                coeffs.insert(v, out);
            }
        }
        Ok(AffineExpr { constant, coeffs })
    }

    pub fn evaluate(&self, x: &[f64]) -> CMat {
        let mut out = self.constant.clone();
        for (v, m) in &self.coeffs {
            out += m * C64::new(x[v.0], 0.0);
        }
        out
    }

    pub fn scale(&self, s: f64) -> AffineExpr {
        self.map(|m| m * C64::new(s, 0.0))
    }

    pub fn add_constant(&self, m: &CMat) -> AffineExpr {
        let mut out = self.clone();
        out.constant += m;
        out
    }

    /// `A X`.
    pub fn left_mul(&self, a: &CMat) -> AffineExpr {
        self.map(|m| a * m)
    }

    /// `X B`.
    pub fn right_mul(&self, b: &CMat) -> AffineExpr {
        self.map(|m| m * b)
    }

    /// `A X A*`.
    pub fn conjugate_by(&self, a: &CMat) -> AffineExpr {
        let adj = a.adjoint();
        self.map(|m| a * m * &adj)
    }

    /// `A ⊗ X`.
    pub fn kron_left(&self, a: &CMat) -> AffineExpr {
        self.map(|m| qmat::kron(a, m))
    }

    /// `X ⊗ B`.
    pub fn kron_right(&self, b: &CMat) -> AffineExpr {
        self.map(|m| qmat::kron(m, b))
    }

    pub fn partial_trace(&self, sys: usize, dims: &[usize]) -> Result<AffineExpr> {
        self.try_map(|m| qmat::partial_trace(m, sys, dims))
    }

    pub fn partial_transpose(&self, sys: usize, dims: &[usize]) -> Result<AffineExpr> {
        self.try_map(|m| qmat::partial_transpose(m, sys, dims))
    }

    pub fn system_exchange(
        &self,
        sys_a: usize,
        sys_b: usize,
        dims: &[usize],
    ) -> Result<AffineExpr> {
        self.try_map(|m| qmat::system_exchange(m, sys_a, sys_b, dims))
    }

    pub fn transpose(&self) -> AffineExpr {
        self.map(|m| m.transpose())
    }

    /// Entrywise complex conjugate (the scalar variables are real).
    pub fn conj(&self) -> AffineExpr {
        self.map(|m| m.map(|z| z.conj()))
    }

    pub fn adjoint(&self) -> AffineExpr {
        self.map(|m| m.adjoint())
    }

    /// Real part of the trace.
    pub fn trace(&self) -> ScalarExpr {
        let mut out = ScalarExpr::constant(self.constant.trace().re);
        for (&v, m) in &self.coeffs {
            let t = m.trace().re;
            if t != 0.0 {
                out.add_term(v, t);
            }
        }
        out
    }

    /// Real part of entry `(i, j)`.
    pub fn entry_re(&self, i: usize, j: usize) -> ScalarExpr {
        let mut out = ScalarExpr::constant(self.constant[(i, j)].re);
        for (&v, m) in &self.coeffs {
            out.add_term(v, m[(i, j)].re);
        }
        out
    }

    /// Imaginary part of entry `(i, j)`.
    pub fn entry_im(&self, i: usize, j: usize) -> ScalarExpr {
        let mut out = ScalarExpr::constant(self.constant[(i, j)].im);
        for (&v, m) in &self.coeffs {
            out.add_term(v, m[(i, j)].im);
        }
        out
    }

    /// Assembles a block matrix. Blocks in a row share a row count, blocks in
    /// a column share a column count.
    pub fn block(rows: &[&[&AffineExpr]]) -> Result<AffineExpr> {
        let heights: Vec<usize> = rows
            .iter()
            .map(|r| r.first().map(|e| e.rows()).unwrap_or(0))
            .collect();
        let first = rows
            .first()
            .ok_or_else(|| Error::DimensionMismatch("empty block matrix".into()))?;
        let widths: Vec<usize> = first.iter().map(|e| e.cols()).collect();
        for (r, row) in rows.iter().enumerate() {
            if row.len() != widths.len() {
                return Err(Error::DimensionMismatch("ragged block matrix".into()));
            }
            for (col, e) in row.iter().enumerate() {
                if e.shape() != (heights[r], widths[col]) {
                    return Err(Error::DimensionMismatch(format!(
                        "block ({r},{col}) is {:?}, expected {:?}",
                        e.shape(),
                        (heights[r], widths[col])
                    )));
                }
            }
        }
        let (nr, nc) = (heights.iter().sum(), widths.iter().sum());
        let mut out = AffineExpr::zeros(nr, nc);
        let mut r0 = 0;
        for (r, row) in rows.iter().enumerate() {
            let mut c0 = 0;
            for (col, e) in row.iter().enumerate() {
                let place = |m: &CMat| {
                    let mut big = CMat::zeros(nr, nc);
                    big.view_mut((r0, c0), m.shape()).copy_from(m);
                    big
                };
                out.constant
                    .view_mut((r0, c0), e.constant.shape())
                    .copy_from(&e.constant);
                for (&v, m) in &e.coeffs {
                    out.add_coeff(v, &place(m));
                }
                c0 += widths[col];
            }
            r0 += heights[r];
        }
        Ok(out)
    }
}

impl Add<&AffineExpr> for &AffineExpr {
    type Output = AffineExpr;
    fn add(self, rhs: &AffineExpr) -> AffineExpr {
        assert_eq!(
            self.shape(),
            rhs.shape(),
            "adding expressions of different shapes"
        );
        let mut out = self.clone();
        out.constant += &rhs.constant;
        for (&v, m) in &rhs.coeffs {
            out.add_coeff(v, m);
        }
        out
    }
}

impl Add<AffineExpr> for AffineExpr {
    type Output = AffineExpr;
    fn add(self, rhs: AffineExpr) -> AffineExpr {
        &self + &rhs
    }
}

impl Sub<&AffineExpr> for &AffineExpr {
    type Output = AffineExpr;
    fn sub(self, rhs: &AffineExpr) -> AffineExpr {
        self + &rhs.scale(-1.0)
    }
}

impl Sub<AffineExpr> for AffineExpr {
    type Output = AffineExpr;
    fn sub(self, rhs: AffineExpr) -> AffineExpr {
        &self - &rhs
    }
}

impl Neg for AffineExpr {
    type Output = AffineExpr;
    fn neg(self) -> AffineExpr {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &AffineExpr {
    type Output = AffineExpr;
    fn mul(self, rhs: f64) -> AffineExpr {
        self.scale(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmat::{c, random_hermitian};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_expr(n: usize, nvars: usize, seed: u64) -> AffineExpr {
        AffineExpr::from_parts(
            random_hermitian(n, seed),
            (0..nvars).map(|v| (Var(v), random_hermitian(n, seed + 1 + v as u64))),
        )
        .unwrap()
    }

    fn random_point(nvars: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..nvars).map(|_| rng.random_range(-2.0..2.0)).collect()
    }

    fn close(a: &CMat, b: &CMat) -> bool {
        (a - b).camax() < 1e-12 * (1.0 + a.camax())
    }

    #[test]
    fn scalar_algebra() {
        let x = ScalarExpr::var(Var(0));
        let y = ScalarExpr::var(Var(1));
        let e = (x.clone() * 2.0 + y.clone() - x.clone() * 2.0) + 3.0;
        assert_eq!(e.terms().collect::<Vec<_>>(), vec![(Var(1), 1.0)]);
        assert_eq!(e.evaluate(&[5.0, 7.0]), 10.0);
        assert!((x.clone() - x).is_constant());
    }

    #[test]
    fn block_assembly() {
        let a = random_expr(2, 2, 1);
        let b = random_expr(2, 1, 9).map(|m| m.columns(0, 1).into_owned());
        let d = AffineExpr::constant(CMat::from_element(1, 1, c(4.0, 0.0)));
        let blk = AffineExpr::block(&[&[&a, &b], &[&b.adjoint(), &d]]).unwrap();
        assert_eq!(blk.shape(), (3, 3));
        let x = random_point(3, 2);
        let v = blk.evaluate(&x);
        assert!(close(&v.view((0, 0), (2, 2)).into_owned(), &a.evaluate(&x)));
        assert!(close(&v.view((0, 2), (2, 1)).into_owned(), &b.evaluate(&x)));
        assert!(AffineExpr::block(&[&[&a, &d]]).is_err());
    }

    proptest! {
        #[test]
        fn superoperators_commute_with_evaluation(seed in 0u64..10_000) {
            let dims = [2usize, 3];
            let e = random_expr(6, 3, seed);
            let x = random_point(3, seed);
            let val = e.evaluate(&x);
            let a = random_hermitian(6, seed + 77);
            let checks: Vec<(AffineExpr, CMat)> = vec![
                (e.partial_trace(1, &dims).unwrap(), qmat::partial_trace(&val, 1, &dims).unwrap()),
                (e.partial_trace(2, &dims).unwrap(), qmat::partial_trace(&val, 2, &dims).unwrap()),
                (e.partial_transpose(2, &dims).unwrap(), qmat::partial_transpose(&val, 2, &dims).unwrap()),
                (e.system_exchange(1, 2, &dims).unwrap(), qmat::system_exchange(&val, 1, 2, &dims).unwrap()),
                (e.conjugate_by(&a), &a * &val * a.adjoint()),
                (e.kron_left(&a.view((0, 0), (2, 2)).into_owned()), qmat::kron(&a.view((0, 0), (2, 2)).into_owned(), &val)),
                (e.kron_right(&a), qmat::kron(&val, &a)),
                (e.conj(), val.map(|z| z.conj())),
                (e.transpose(), val.transpose()),
                (e.scale(-1.5), &val * c(-1.5, 0.0)),
            ];
            for (expr, expected) in checks {
                prop_assert!(close(&expr.evaluate(&x), &expected));
            }
            prop_assert!((e.trace().evaluate(&x) - val.trace().re).abs() < 1e-12);
            prop_assert!(e.hermitian_defect() < 1e-15);
        }
    }
}
