//! Program construction and finalization into a real standard form.
//!
//! The standard form is the linear-matrix-inequality problem
//!
//! ```text
//! minimize  c^T y + offset
//! s.t.      G0_b + Σ_i y_i G_ib ⪰ 0   for each block b (real symmetric)
//!           g0_l + Σ_i y_i g_il ≥ 0   for each LP row l
//!           E y = f
//! ```
//!
//! Hermitian blocks with any non-real part are embedded as
//! `[[Re, −Im], [Im, Re]]`; real blocks keep their size.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::expr::{AffineExpr, ScalarExpr, Var};
use super::{ConicBackend, Solution, SolveStatus};
use crate::error::{Error, Result};
use crate::qmat::{self, c, CMat, RMat};

/// Upper-triangle entries `(i, j, value)` with `i ≤ j`, 0-based.
pub type SparseEntries = Vec<(usize, usize, f64)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmiBlock {
    pub size: usize,
    pub constant: SparseEntries,
    /// Sorted by variable index; no empty entry lists.
    pub coeffs: Vec<(usize, SparseEntries)>,
}

impl LmiBlock {
    /// Dense `G0 + Σ y_i G_i`.
    pub fn evaluate(&self, y: &[f64]) -> RMat {
        let mut out = RMat::zeros(self.size, self.size);
        let mut put = |ents: &SparseEntries, s: f64| {
            for &(i, j, v) in ents {
                out[(i, j)] += s * v;
                if i != j {
                    out[(j, i)] += s * v;
                }
            }
        };
        put(&self.constant, 1.0);
        for (var, ents) in &self.coeffs {
            put(ents, y[*var]);
        }
        out
    }
}

/// `constant + Σ coeffs ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub constant: f64,
    pub coeffs: Vec<(usize, f64)>,
}

/// `Σ coeffs = rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct EqRow {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StandardForm {
    pub n_vars: usize,
    /// Minimization objective; negated for maximization programs.
    pub c: Vec<f64>,
    pub offset: f64,
    pub sense: Sense,
    pub blocks: Vec<LmiBlock>,
    pub lp: Vec<LpRow>,
    pub eqs: Vec<EqRow>,
}

impl StandardForm {
    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.size).collect()
    }

    /// Objective in the program's own sense from a minimization value.
    pub fn reported_objective(&self, min_value: f64) -> f64 {
        match self.sense {
            Sense::Minimize => min_value,
            Sense::Maximize => -min_value,
        }
    }

    /// Sorted and merged entries, so that equal programs compare equal.
    pub fn canonical(&self) -> StandardForm {
        fn canon(ents: &SparseEntries) -> SparseEntries {
            let mut e: SparseEntries = ents
                .iter()
                .map(|&(i, j, v)| (i.min(j), i.max(j), v))
                .collect();
            e.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
            let mut out: SparseEntries = Vec::with_capacity(e.len());
            for (i, j, v) in e {
                match out.last_mut() {
                    Some(last) if last.0 == i && last.1 == j => last.2 += v,
                    _ => out.push((i, j, v)),
                }
            }
            out.retain(|x| x.2 != 0.0);
            out
        }
        fn canon_row(row: &[(usize, f64)]) -> Vec<(usize, f64)> {
            let mut r: Vec<(usize, f64)> = row.iter().copied().filter(|x| x.1 != 0.0).collect();
            r.sort_by_key(|x| x.0);
            r
        }
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                let mut coeffs: Vec<(usize, SparseEntries)> = b
                    .coeffs
                    .iter()
                    .map(|(v, e)| (*v, canon(e)))
                    .filter(|(_, e)| !e.is_empty())
                    .collect();
                coeffs.sort_by_key(|x| x.0);
                LmiBlock {
                    size: b.size,
                    constant: canon(&b.constant),
                    coeffs,
                }
            })
            .collect();
        StandardForm {
            n_vars: self.n_vars,
            c: self.c.clone(),
            offset: self.offset,
            sense: self.sense,
            blocks,
            lp: self
                .lp
                .iter()
                .map(|r| LpRow {
                    constant: r.constant,
                    coeffs: canon_row(&r.coeffs),
                })
                .collect(),
            eqs: self
                .eqs
                .iter()
                .map(|r| EqRow {
                    coeffs: canon_row(&r.coeffs),
                    rhs: r.rhs,
                })
                .collect(),
        }
    }

    /// Largest relative PSD violation `max(0, −λ_min) / (1 + ‖block‖_F)`.
    pub fn max_psd_violation(&self, y: &[f64]) -> f64 {
        let mut worst = 0.0_f64;
        for b in &self.blocks {
            let m = b.evaluate(y);
            let lmin = qmat::real_symmetric_eigenvalues(&m)
                .first()
                .copied()
                .unwrap_or(0.0);
            worst = worst.max((-lmin).max(0.0) / (1.0 + m.norm()));
        }
        for r in &self.lp {
            let v = r.constant + r.coeffs.iter().map(|(i, a)| a * y[*i]).sum::<f64>();
            worst = worst.max((-v).max(0.0) / (1.0 + v.abs()));
        }
        worst
    }
}

/// A conic program under construction.
#[derive(Debug, Clone)]
pub struct Program {
    n_vars: usize,
    objective: ScalarExpr,
    sense: Sense,
    psd: Vec<AffineExpr>,
    nonneg: Vec<ScalarExpr>,
    eqs: Vec<ScalarExpr>,
}

impl Default for Program {
    fn default() -> Self {
        Self::new()
    }
}

/// Hermiticity tolerance for PSD constraint expressions, relative to scale.
const HERMITIAN_TOL: f64 = 1e-9;

impl Program {
    pub fn new() -> Self {
        Program {
            n_vars: 0,
            objective: ScalarExpr::default(),
            sense: Sense::Minimize,
            psd: Vec::new(),
            nonneg: Vec::new(),
            eqs: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.n_vars
    }

    pub fn new_var(&mut self) -> Var {
        self.n_vars += 1;
        Var(self.n_vars - 1)
    }

    pub fn scalar_var(&mut self) -> ScalarExpr {
        ScalarExpr::var(self.new_var())
    }

    /// `n²` real scalars: diagonal entries, then `(re, im)` per upper off-diagonal
    /// pair with coefficients `E_ij + E_ji` and `i(E_ij − E_ji)`.
    pub fn hermitian_var(&mut self, n: usize) -> Result<AffineExpr> {
        self.matrix_var(n, true)
    }

    /// `n(n+1)/2` real scalars.
    pub fn symmetric_var(&mut self, n: usize) -> Result<AffineExpr> {
        self.matrix_var(n, false)
    }

    /// Hermitian variable when `complex`, real symmetric otherwise.
    pub fn matrix_var(&mut self, n: usize, complex: bool) -> Result<AffineExpr> {
        if n == 0 {
            return Err(Error::InvalidArgument("matrix variable of size 0".into()));
        }
        let mut terms = Vec::with_capacity(n * n);
        for i in 0..n {
            let mut e = CMat::zeros(n, n);
            e[(i, i)] = c(1.0, 0.0);
            terms.push((self.new_var(), e));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let mut re = CMat::zeros(n, n);
                re[(i, j)] = c(1.0, 0.0);
                re[(j, i)] = c(1.0, 0.0);
                terms.push((self.new_var(), re));
                if complex {
                    let mut im = CMat::zeros(n, n);
                    im[(i, j)] = c(0.0, 1.0);
                    im[(j, i)] = c(0.0, -1.0);
                    terms.push((self.new_var(), im));
                }
            }
        }
        AffineExpr::from_parts(CMat::zeros(n, n), terms)
    }

    /// Requires `e ⪰ 0`; `e` must be square and Hermitian for every assignment.
    pub fn add_psd(&mut self, e: AffineExpr) -> Result<()> {
        if !e.is_square() {
            return Err(Error::MalformedProgram(format!(
                "PSD block of shape {:?} is not square",
                e.shape()
            )));
        }
        let scale = 1.0
            + e.constant_part().camax()
            + e.coeffs().map(|(_, m)| m.camax()).fold(0.0, f64::max);
        let defect = e.hermitian_defect();
        if defect > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian(defect));
        }
        self.psd.push(e.map(qmat::hermitian_part));
        Ok(())
    }

    pub fn add_nonneg(&mut self, e: ScalarExpr) {
        self.nonneg.push(e);
    }

    /// Requires `e = 0`.
    pub fn add_eq(&mut self, e: ScalarExpr) {
        self.eqs.push(e);
    }

    /// Requires `e = target` entrywise. Hermitian pairs contribute only their
    /// upper triangle.
    pub fn add_eq_matrix(&mut self, e: &AffineExpr, target: &CMat) -> Result<()> {
        if e.shape() != target.shape() {
            return Err(Error::DimensionMismatch(format!(
                "equality between {:?} and {:?}",
                e.shape(),
                target.shape()
            )));
        }
        let diff = e.add_constant(&(-target));
        let hermitian = diff.is_square() && diff.hermitian_defect() == 0.0;
        for i in 0..diff.rows() {
            let j0 = if hermitian { i } else { 0 };
            for j in j0..diff.cols() {
                for part in [diff.entry_re(i, j), diff.entry_im(i, j)] {
                    if !(part.is_constant() && part.constant_part() == 0.0) {
                        self.eqs.push(part);
                    }
                }
            }
        }
        Ok(())
    }

    pub fn minimize(&mut self, objective: ScalarExpr) {
        self.objective = objective;
        self.sense = Sense::Minimize;
    }

    pub fn maximize(&mut self, objective: ScalarExpr) {
        self.objective = objective;
        self.sense = Sense::Maximize;
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn objective(&self) -> &ScalarExpr {
        &self.objective
    }

    pub fn psd_constraints(&self) -> &[AffineExpr] {
        &self.psd
    }

    pub fn num_equalities(&self) -> usize {
        self.eqs.len()
    }

    /// Block sizes after real embedding.
    pub fn embedded_block_sizes(&self) -> Vec<usize> {
        self.psd
            .iter()
            .map(|e| if e.is_real() { e.rows() } else { 2 * e.rows() })
            .collect()
    }

    fn check_vars(&self) -> Result<()> {
        let limit = self.n_vars;
        let bad = |v: Option<Var>| v.is_some_and(|v| v.index() >= limit);
        if bad(self.objective.max_var())
            || self.psd.iter().any(|e| bad(e.max_var()))
            || self
                .nonneg
                .iter()
                .chain(&self.eqs)
                .any(|e| bad(e.max_var()))
        {
            return Err(Error::MalformedProgram(
                "constraint references an undeclared variable".into(),
            ));
        }
        Ok(())
    }

    /// Real-embeds every block and flattens the program.
    pub fn standard_form(&self) -> Result<StandardForm> {
        self.check_vars()?;
        let sign = match self.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut cvec = vec![0.0; self.n_vars];
        for (v, a) in self.objective.terms() {
            cvec[v.index()] = sign * a;
        }
        let blocks = self.psd.iter().map(embed_block).collect();
        let lp = self
            .nonneg
            .iter()
            .map(|e| LpRow {
                constant: e.constant_part(),
                coeffs: e.terms().map(|(v, a)| (v.index(), a)).collect(),
            })
            .collect();
        let eqs = self
            .eqs
            .iter()
            .map(|e| EqRow {
                coeffs: e.terms().map(|(v, a)| (v.index(), a)).collect(),
                rhs: -e.constant_part(),
            })
            .collect();
        Ok(StandardForm {
            n_vars: self.n_vars,
            c: cvec,
            offset: sign * self.objective.constant_part(),
            sense: self.sense,
            blocks,
            lp,
            eqs,
        })
    }

    /// Finalizes and solves. Non-optimal outcomes are reported in the status,
    /// not as errors.
    pub fn solve(&self, backend: &dyn ConicBackend, tol: f64) -> Result<Solution> {
        let sf = self.standard_form()?;
        let raw = backend.solve(&sf, tol)?;
        let violation = sf.max_psd_violation(&raw.y);
        let mut status = raw.status;
        if status == SolveStatus::Optimal && (violation > 1e-7 || raw.gap > tol) {
            status = SolveStatus::NumericalLimit;
        }
        Ok(Solution {
            status,
            objective: sf.reported_objective(raw.primal_objective),
            dual_objective: sf.reported_objective(raw.dual_objective),
            x: raw.y,
            gap: raw.gap,
            primal_infeasibility: raw.primal_infeasibility,
            dual_infeasibility: raw.dual_infeasibility,
            max_psd_violation: violation,
            iterations: raw.iterations,
            backend: backend.id(),
        })
    }
}

fn upper_entries(m: &DMatrix<f64>) -> SparseEntries {
    let mut out = Vec::new();
    for j in 0..m.ncols() {
        for i in 0..=j {
            let v = m[(i, j)];
            if v != 0.0 {
                out.push((i, j, v));
            }
        }
    }
    out
}

fn embed_block(e: &AffineExpr) -> LmiBlock {
    let real = e.is_real();
    let embed = |m: &CMat| -> DMatrix<f64> {
        if real {
            m.map(|z| z.re)
        } else {
            qmat::embed_complex(m)
        }
    };
    let coeffs = e
        .coeffs()
        .map(|(v, m)| (v.index(), upper_entries(&embed(m))))
        .filter(|(_, ents)| !ents.is_empty())
        .collect();
    LmiBlock {
        size: if real { e.rows() } else { 2 * e.rows() },
        constant: upper_entries(&embed(e.constant_part())),
        coeffs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmat::{hermitian_eigen, random_hermitian};
    use proptest::prelude::*;

    #[test]
    fn hermitian_var_layout() {
        let mut p = Program::new();
        let x = p.hermitian_var(1).unwrap();
        assert_eq!(p.num_vars(), 1);
        assert_eq!(x.evaluate(&[0.0]), CMat::zeros(1, 1));
        let mut p = Program::new();
        let x = p.hermitian_var(3).unwrap();
        assert_eq!(p.num_vars(), 9);
        assert_eq!(x.evaluate(&[0.0; 9]), CMat::zeros(3, 3));
        let val = x.evaluate(&[1.0, 2.0, 3.0, 0.5, -0.25, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(val[(0, 1)], c(0.5, -0.25));
        assert_eq!(val[(1, 0)], c(0.5, 0.25));
        let mut p = Program::new();
        let s = p.symmetric_var(3).unwrap();
        assert_eq!(p.num_vars(), 6);
        assert!(s.is_real());
    }

    #[test]
    fn malformed_programs_rejected() {
        let mut p = Program::new();
        assert!(p.add_psd(AffineExpr::zeros(2, 3)).is_err());
        let mut skew = CMat::zeros(2, 2);
        skew[(0, 1)] = c(1.0, 0.0);
        assert!(matches!(
            p.add_psd(AffineExpr::constant(skew)),
            Err(Error::NotHermitian(_))
        ));
        let mut other = Program::new();
        let v = other.hermitian_var(2).unwrap();
        p.add_psd(v).unwrap();
        assert!(matches!(p.standard_form(), Err(Error::MalformedProgram(_))));
    }

    #[test]
    fn embedding_sizes() {
        let mut p = Program::new();
        let h = p.hermitian_var(3).unwrap();
        let s = p.symmetric_var(3).unwrap();
        p.add_psd(h).unwrap();
        p.add_psd(s).unwrap();
        assert_eq!(p.embedded_block_sizes(), vec![6, 3]);
        assert_eq!(p.standard_form().unwrap().block_sizes(), vec![6, 3]);
    }

    proptest! {
        // A Hermitian constraint holds iff its embedded real constraint does.
        #[test]
        fn embedding_soundness(seed in 0u64..5000, shift in -3.0f64..3.0) {
            let n = 3;
            let mut p = Program::new();
            let x = p.hermitian_var(n).unwrap();
            let a = random_hermitian(n, seed);
            let expr = &x.conjugate_by(&a) + &AffineExpr::constant(CMat::identity(n, n) * c(shift, 0.0));
            p.add_psd(expr.clone()).unwrap();
            let sf = p.standard_form().unwrap();
            let pt: Vec<f64> = random_hermitian(n, seed + 1).iter().take(9).map(|z| z.re).collect();
            let lmin_herm = hermitian_eigen(&expr.evaluate(&pt)).0[0];
            let lmin_real = qmat::real_symmetric_eigenvalues(&sf.blocks[0].evaluate(&pt))[0];
            prop_assert!((lmin_herm - lmin_real).abs() < 1e-9 * (1.0 + lmin_herm.abs()));
        }
    }
}
