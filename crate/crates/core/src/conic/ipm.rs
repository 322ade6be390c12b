//! Infeasible primal-dual interior-point method for the standard form.
//!
//! Works on the pair
//!
//! ```text
//! (P) min c^T y        s.t. S = F0 + F(y) ⪰ 0, E y = f
//! (D) max −<F0, X> + f^T λ  s.t. F*(X) + E^T λ = c, X ⪰ 0
//! ```
//!
//! with the HKM search direction and Mehrotra predictor-corrector steps.
//! The LP rows form one diagonal block handled elementwise.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::chol::PivotCholesky;
use super::dd::{axpy, mul2, Dd, DdCholesky, DdMat, ZERO};
use super::program::{SparseEntries, StandardForm};
use super::{ConicBackend, RawSolution, SolveStatus};
use crate::error::Result;

const SNAP_TOL: f64 = 1e-12;
const REFINE_STEPS: usize = 2;
/// Direction residual, relative to `tol (1 + ‖c‖)`, above which the
/// double-double Newton system takes over.
const ACCURATE_SWITCH: f64 = 0.01;

/// Embedded primal-dual interior-point backend.
#[derive(Debug, Clone)]
pub struct InteriorPoint {
    pub max_iter: usize,
    /// Prints one line per iteration to stderr.
    pub verbose: bool,
}

impl Default for InteriorPoint {
    fn default() -> Self {
        InteriorPoint {
            max_iter: 200,
            verbose: false,
        }
    }
}

impl ConicBackend for InteriorPoint {
    fn id(&self) -> String {
        "qrelent-ipm".to_string()
    }

    fn solve(&self, sf: &StandardForm, tol: f64) -> Result<RawSolution> {
        let problem = match Problem::presolve(sf) {
            Ok(p) => p,
            Err(status) => {
                return Ok(RawSolution {
                    status,
                    y: vec![0.0; sf.n_vars],
                    primal_objective: f64::NAN,
                    dual_objective: f64::NAN,
                    gap: f64::INFINITY,
                    primal_infeasibility: f64::INFINITY,
                    dual_infeasibility: f64::INFINITY,
                    iterations: 0,
                })
            }
        };
        if self.verbose {
            let sizes: Vec<usize> = problem.blocks.iter().map(|b| b.size).collect();
            eprintln!(
                "vars {} equalities {} blocks {sizes:?}",
                problem.p(),
                problem.e.nrows()
            );
        }
        let mut raw = problem.run(self.max_iter, tol, self.verbose);
        let mut y = vec![0.0; sf.n_vars];
        for (k, &orig) in problem.active.iter().enumerate() {
            y[orig] = raw.y[k];
        }
        raw.y = y;
        raw.primal_objective += sf.offset;
        raw.dual_objective += sf.offset;
        Ok(raw)
    }
}

struct Block {
    size: usize,
    f0: DMatrix<f64>,
    /// Active variable indices with nonzero coefficient here.
    vars: Vec<usize>,
    /// Full (both triangles) entries per entry of `vars`.
    mats: Vec<SparseEntries>,
}

impl Block {
    fn dense(&self, t: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.size, self.size);
        for &(a, b, v) in &self.mats[t] {
            m[(a, b)] += v;
        }
        m
    }

    /// `Σ y_i F_i` without the constant.
    fn lin(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.size, self.size);
        for (t, &v) in self.vars.iter().enumerate() {
            let yv = y[v];
            if yv != 0.0 {
                for &(a, b, w) in &self.mats[t] {
                    out[(a, b)] += yv * w;
                }
            }
        }
        out
    }

    /// `tr(F_t G)` for each local variable.
    fn pair(&self, g: &DMatrix<f64>, out: &mut DVector<f64>) {
        for (t, &v) in self.vars.iter().enumerate() {
            out[v] += self.mats[t]
                .iter()
                .map(|&(a, b, w)| w * g[(b, a)])
                .sum::<f64>();
        }
    }
}

struct Problem {
    /// Original index of each active variable.
    active: Vec<usize>,
    c: DVector<f64>,
    blocks: Vec<Block>,
    lp_f0: DVector<f64>,
    /// Per LP row: (active var, coefficient).
    lp_rows: Vec<Vec<(usize, f64)>>,
    /// Orthonormal equality rows.
    e: DMatrix<f64>,
    f: DVector<f64>,
}

fn full_entries(upper: &SparseEntries) -> SparseEntries {
    let mut out = Vec::with_capacity(2 * upper.len());
    for &(i, j, v) in upper {
        out.push((i, j, v));
        if i != j {
            out.push((j, i, v));
        }
    }
    out
}

impl Problem {
    fn presolve(sf: &StandardForm) -> std::result::Result<Problem, SolveStatus> {
        let n = sf.n_vars;
        let mut used = vec![false; n];
        for b in &sf.blocks {
            for (v, e) in &b.coeffs {
                if !e.is_empty() {
                    used[*v] = true;
                }
            }
        }
        for r in &sf.lp {
            for &(v, a) in &r.coeffs {
                used[v] |= a != 0.0;
            }
        }
        for r in &sf.eqs {
            for &(v, a) in &r.coeffs {
                used[v] |= a != 0.0;
            }
        }
        for v in 0..n {
            if !used[v] && sf.c[v] != 0.0 {
                return Err(SolveStatus::Unbounded);
            }
        }
        let active: Vec<usize> = (0..n).filter(|&v| used[v]).collect();
        let mut local = vec![usize::MAX; n];
        for (k, &v) in active.iter().enumerate() {
            local[v] = k;
        }
        let p = active.len();
        let c = DVector::from_iterator(p, active.iter().map(|&v| sf.c[v]));

        let blocks = sf
            .blocks
            .iter()
            .map(|b| {
                let mut f0 = DMatrix::zeros(b.size, b.size);
                for (a, bb, v) in full_entries(&b.constant) {
                    f0[(a, bb)] += v;
                }
                let mut pairs: Vec<(usize, SparseEntries)> = b
                    .coeffs
                    .iter()
                    .filter(|(_, e)| !e.is_empty())
                    .map(|(v, e)| (local[*v], full_entries(e)))
                    .collect();
                pairs.sort_by_key(|x| x.0);
                let (vars, mats) = pairs.into_iter().unzip();
                Block {
                    size: b.size,
                    f0,
                    vars,
                    mats,
                }
            })
            .collect();

        let lp_f0 = DVector::from_iterator(sf.lp.len(), sf.lp.iter().map(|r| r.constant));
        let lp_rows = sf
            .lp
            .iter()
            .map(|r| {
                r.coeffs
                    .iter()
                    .filter(|x| x.1 != 0.0)
                    .map(|&(v, a)| (local[v], a))
                    .collect()
            })
            .collect();

        // Modified Gram-Schmidt on equality rows, carrying the right-hand side.
        let mut rows: Vec<DVector<f64>> = Vec::new();
        let mut rhs: Vec<f64> = Vec::new();
        for r in &sf.eqs {
            let mut row = DVector::zeros(p);
            for &(v, a) in &r.coeffs {
                if a != 0.0 {
                    row[local[v]] += a;
                }
            }
            let scale = row.norm();
            let mut b = r.rhs;
            if scale == 0.0 {
                if b.abs() > 1e-12 {
                    return Err(SolveStatus::Infeasible);
                }
                continue;
            }
            row /= scale;
            b /= scale;
            for _ in 0..2 {
                for (q, &bq) in rows.iter().zip(&rhs) {
                    let proj = q.dot(&row);
                    row.axpy(-proj, q, 1.0);
                    b -= proj * bq;
                }
            }
            let resid = row.norm();
            if resid < 1e-10 {
                if b.abs() > 1e-8 * (1.0 + r.rhs.abs() / scale) {
                    return Err(SolveStatus::Infeasible);
                }
                continue;
            }
            rows.push(row / resid);
            rhs.push(b / resid);
        }
        let q = rows.len();
        let mut e = DMatrix::zeros(q, p);
        for (i, r) in rows.iter().enumerate() {
            e.set_row(i, &r.transpose());
        }
        Ok(Problem {
            active,
            c,
            blocks,
            lp_f0,
            lp_rows,
            e,
            f: DVector::from_vec(rhs),
        })
    }

    fn p(&self) -> usize {
        self.c.len()
    }

    fn lp_lin(&self, y: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.lp_rows.len(),
            self.lp_rows
                .iter()
                .map(|r| r.iter().map(|&(v, a)| a * y[v]).sum::<f64>()),
        )
    }

    /// `F*(X)` including the LP block.
    fn adjoint(&self, xs: &[DMatrix<f64>], xl: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.p());
        for (b, x) in self.blocks.iter().zip(xs) {
            b.pair(x, &mut out);
        }
        for (l, row) in self.lp_rows.iter().enumerate() {
            for &(v, a) in row {
                out[v] += a * xl[l];
            }
        }
        out
    }

    /// `M_ij = tr(F_i X F_j S^{-1})` summed over blocks, plus the LP part.
    fn schur(
        &self,
        xs: &[DMatrix<f64>],
        sinvs: &[DMatrix<f64>],
        xl: &DVector<f64>,
        sl: &DVector<f64>,
    ) -> DMatrix<f64> {
        let p = self.p();
        let mut m = DMatrix::zeros(p, p);
        for ((b, x), sinv) in self.blocks.iter().zip(xs).zip(sinvs) {
            let nv = b.vars.len();
            let s2 = b.size * b.size;
            let cumulative: Vec<usize> = b
                .mats
                .iter()
                .scan(0usize, |acc, e| {
                    *acc += e.len();
                    Some(*acc)
                })
                .collect();
            let cols: Vec<Vec<f64>> = (0..nv)
                .into_par_iter()
                .map(|t| {
                    let ft = &b.mats[t];
                    let mut col = vec![0.0; t + 1];
                    if cumulative[t] < s2 {
                        // Direct sum over entry pairs.
                        for (u, fu) in b.mats[..=t].iter().enumerate() {
                            let mut acc = 0.0;
                            for &(a, bb, v) in fu {
                                for &(cc, d, w) in ft {
                                    acc += v * w * x[(bb, cc)] * sinv[(d, a)];
                                }
                            }
                            col[u] = acc;
                        }
                    } else {
                        let h = if ft.len() > 2 * b.size {
                            x * b.dense(t) * sinv
                        } else {
                            let mut h = DMatrix::zeros(b.size, b.size);
                            for &(a, bb, v) in ft {
                                h.ger(v, &x.column(a), &sinv.column(bb), 1.0);
                            }
                            h
                        };
                        for (u, fu) in b.mats[..=t].iter().enumerate() {
                            col[u] = fu.iter().map(|&(a, bb, v)| v * h[(bb, a)]).sum();
                        }
                    }
                    col
                })
                .collect();
            for (t, col) in cols.iter().enumerate() {
                let vt = b.vars[t];
                for (u, &val) in col.iter().enumerate() {
                    let vu = b.vars[u];
                    m[(vu, vt)] += val;
                    if vu != vt {
                        m[(vt, vu)] += val;
                    }
                }
            }
        }
        for (l, row) in self.lp_rows.iter().enumerate() {
            let d = xl[l] / sl[l];
            for &(vi, ai) in row {
                for &(vj, aj) in row {
                    m[(vi, vj)] += d * ai * aj;
                }
            }
        }
        m
    }

    fn run(&self, max_iter: usize, tol: f64, verbose: bool) -> RawSolution {
        let p = self.p();
        let q = self.e.nrows();
        let nl = self.lp_rows.len();
        let nu = (self.blocks.iter().map(|b| b.size).sum::<usize>() + nl).max(1) as f64;

        let norm_f0 = (self.blocks.iter().map(|b| b.f0.norm_squared()).sum::<f64>()
            + self.lp_f0.norm_squared())
        .sqrt();
        let norm_f = self.f.norm();
        let norm_c = self.c.norm();

        // Initial point scaled to the data.
        let mut xs = Vec::with_capacity(self.blocks.len());
        let mut ss = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let n = b.size as f64;
            let mut xi = 10f64.max(n.sqrt());
            let mut eta = xi.max(b.f0.norm());
            for (t, &v) in b.vars.iter().enumerate() {
                let fnorm = b.mats[t].iter().map(|e| e.2 * e.2).sum::<f64>().sqrt();
                xi = xi.max(n * (1.0 + self.c[v].abs()) / (1.0 + fnorm));
                eta = eta.max(fnorm);
            }
            xs.push(DMatrix::identity(b.size, b.size) * xi);
            ss.push(DMatrix::identity(b.size, b.size) * eta);
        }
        let mut xl = DVector::zeros(nl);
        let mut sl = DVector::zeros(nl);
        for (l, row) in self.lp_rows.iter().enumerate() {
            let mut xi = 10.0_f64;
            let mut eta = 10f64.max(self.lp_f0[l].abs());
            for &(v, a) in row {
                xi = xi.max((1.0 + self.c[v].abs()) / (1.0 + a.abs()));
                eta = eta.max(a.abs());
            }
            xl[l] = xi;
            sl[l] = eta;
        }
        let mut y = DVector::zeros(p);
        let mut lam = DVector::zeros(q);

        let mut best: Option<(f64, RawSolution)> = None;
        let mut status = SolveStatus::NumericalLimit;
        let mut iterations = 0;
        let mut stalls = 0;
        // Set once the normal-equation factor stops resolving the dual equation.
        let mut accurate = false;

        for it in 0..=max_iter {
            iterations = it;
            // Residuals. Once S matches F0 + F(y) to rounding, S is reset to it
            // so that residual noise is not amplified by S^{-1}.
            let fy: Vec<DMatrix<f64>> = self.blocks.iter().map(|b| &b.f0 + b.lin(&y)).collect();
            let fl = &self.lp_f0 + self.lp_lin(&y);
            let snap = fy
                .iter()
                .zip(&ss)
                .all(|(f, s)| (f - s).norm() <= SNAP_TOL * (1.0 + s.norm()))
                && (&fl - &sl).norm() <= SNAP_TOL * (1.0 + sl.norm())
                && fl.iter().all(|&v| v > 0.0)
                && fy.iter().all(|f| f.clone().cholesky().is_some());
            if snap {
                ss = fy.clone();
                sl = fl.clone();
            }
            let rs: Vec<DMatrix<f64>> = fy.iter().zip(&ss).map(|(f, s)| f - s).collect();
            let rl = &fl - &sl;
            let atx = self.adjoint(&xs, &xl) + self.e.transpose() * &lam;
            let rd = &self.c - &atx;
            let re = &self.f - &self.e * &y;

            let pobj = self.c.dot(&y);
            let f0x: f64 = self
                .blocks
                .iter()
                .zip(&xs)
                .map(|(b, x)| b.f0.dot(x))
                .sum::<f64>()
                + self.lp_f0.dot(&xl);
            let dobj = -f0x + self.f.dot(&lam);
            let xsdot: f64 = xs.iter().zip(&ss).map(|(x, s)| x.dot(s)).sum::<f64>() + xl.dot(&sl);
            let mu = xsdot / nu;

            let r_norm =
                (rs.iter().map(|r| r.norm_squared()).sum::<f64>() + rl.norm_squared()).sqrt();
            let pinf = (r_norm * r_norm + re.norm_squared()).sqrt() / (1.0 + norm_f0 + norm_f);
            let dinf = rd.norm() / (1.0 + norm_c);
            let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());

            if verbose {
                eprintln!(
                    "it {it:3} pobj {pobj:+.10e} dobj {dobj:+.10e} gap {gap:.2e} pinf {pinf:.2e} dinf {dinf:.2e} mu {mu:.2e}"
                );
            }

            let snapshot = |st: SolveStatus| RawSolution {
                status: st,
                y: y.iter().copied().collect(),
                primal_objective: pobj,
                dual_objective: dobj,
                gap,
                primal_infeasibility: pinf,
                dual_infeasibility: dinf,
                iterations: it,
            };
            let merit = pinf.max(dinf).max(gap);
            if best.as_ref().is_none_or(|(m, _)| merit < *m) {
                best = Some((merit, snapshot(SolveStatus::NumericalLimit)));
            }
            if pinf < tol && dinf < tol && gap < tol {
                status = SolveStatus::Optimal;
                best = Some((merit, snapshot(SolveStatus::Optimal)));
                break;
            }

            // Ray certificates.
            let xnorm = (xs.iter().map(|x| x.norm_squared()).sum::<f64>()
                + xl.norm_squared()
                + lam.norm_squared())
            .sqrt();
            let ynorm = y.norm();
            if dobj > 0.0 && xnorm > 1e8 && atx.norm() / dobj < tol {
                status = SolveStatus::Infeasible;
                best = Some((merit, snapshot(SolveStatus::Infeasible)));
                break;
            }
            if pobj < 0.0 && ynorm > 1e8 {
                let lin_norm = (rs
                    .iter()
                    .zip(&self.blocks)
                    .map(|(r, b)| (r - &b.f0).norm_squared())
                    .sum::<f64>()
                    + (&rl - &self.lp_f0).norm_squared()
                    + (&self.f - &re).norm_squared())
                .sqrt();
                if lin_norm / -pobj < tol {
                    status = SolveStatus::Unbounded;
                    best = Some((merit, snapshot(SolveStatus::Unbounded)));
                    break;
                }
            }
            if it == max_iter {
                break;
            }

            // S = L L^T and S^{-1} = L^{-T} L^{-1} per block.
            let Some(factors) = ss
                .iter()
                .map(|s| {
                    let n = s.nrows();
                    let l = s.clone().cholesky()?.l();
                    let li = l.solve_lower_triangular(&DMatrix::identity(n, n))?;
                    Some((l, li))
                })
                .collect::<Option<Vec<_>>>()
            else {
                break;
            };
            let (ls, linvs): (Vec<_>, Vec<_>) = factors.into_iter().unzip();
            let sinvs: Vec<DMatrix<f64>> = linvs.iter().map(|li| li.tr_mul(li)).collect();
            let iterate = Iterate {
                xs: &xs,
                ss: &ss,
                rs: &rs,
                ls: &ls,
                linvs: &linvs,
                sinvs: &sinvs,
                xl: &xl,
                sl: &sl,
                rl: &rl,
                rd: &rd,
                re: &re,
                mu,
                nu,
            };

            let switch = ACCURATE_SWITCH * tol * (1.0 + norm_c);
            let mut steps = None;
            if !accurate {
                match self.double_step(&iterate, switch) {
                    Outcome::Step(step) => steps = Some(step),
                    Outcome::Inaccurate => accurate = true,
                    Outcome::Failed => break,
                }
            }
            if accurate {
                steps = self.dd_step(&iterate);
            }
            let Some((dir, ap_aff, ad_aff)) = steps else {
                break;
            };
            let (Some(ap), Some(ad)) = (
                max_step_all(&xs, &dir.dxs, &xl, &dir.dxl),
                max_step_all(&ss, &dir.dss, &sl, &dir.dsl),
            ) else {
                break;
            };
            if verbose {
                eprintln!("        extended {accurate} alpha {ap:.3e} beta {ad:.3e}");
            }
            let gamma = 0.9 + 0.09 * ap_aff.min(ad_aff);
            let alpha = (gamma * ap).min(1.0);
            let beta = (gamma * ad).min(1.0);

            for k in 0..xs.len() {
                xs[k] += &dir.dxs[k] * alpha;
                ss[k] += &dir.dss[k] * beta;
            }
            xl += &dir.dxl * alpha;
            sl += &dir.dsl * beta;
            lam += &dir.dlam * alpha;
            y += &dir.dy * beta;

            if alpha.max(beta) < 1e-10 {
                stalls += 1;
                if stalls > 5 {
                    break;
                }
            } else {
                stalls = 0;
            }
        }

        let mut out = best.map(|(_, s)| s).unwrap_or(RawSolution {
            status,
            y: vec![0.0; p],
            primal_objective: f64::NAN,
            dual_objective: f64::NAN,
            gap: f64::INFINITY,
            primal_infeasibility: f64::INFINITY,
            dual_infeasibility: f64::INFINITY,
            iterations,
        });
        out.status = status;
        out.iterations = iterations;
        out
    }
}

struct Direction {
    dy: DVector<f64>,
    dlam: DVector<f64>,
    dxs: Vec<DMatrix<f64>>,
    dxl: DVector<f64>,
    dss: Vec<DMatrix<f64>>,
    dsl: DVector<f64>,
}

/// Current iterate and residuals as seen by the Newton system.
struct Iterate<'a> {
    xs: &'a [DMatrix<f64>],
    ss: &'a [DMatrix<f64>],
    rs: &'a [DMatrix<f64>],
    /// Cholesky factors `S = L L^T` and their inverses.
    ls: &'a [DMatrix<f64>],
    linvs: &'a [DMatrix<f64>],
    sinvs: &'a [DMatrix<f64>],
    xl: &'a DVector<f64>,
    sl: &'a DVector<f64>,
    rl: &'a DVector<f64>,
    rd: &'a DVector<f64>,
    re: &'a DVector<f64>,
    mu: f64,
    nu: f64,
}

enum Outcome {
    /// Corrector direction with the affine step lengths.
    Step((Direction, f64, f64)),
    /// The f64 direction misses the dual equation by more than the switch level.
    Inaccurate,
    Failed,
}

impl Iterate<'_> {
    /// Mehrotra centering from the affine direction: `(σ, α_aff, β_aff)`.
    fn centering(&self, aff: &Direction) -> Option<(f64, f64, f64)> {
        let ap = max_step_all(self.xs, &aff.dxs, self.xl, &aff.dxl)?.min(1.0);
        let ad = max_step_all(self.ss, &aff.dss, self.sl, &aff.dsl)?.min(1.0);
        let mu_aff = (self
            .xs
            .iter()
            .zip(&aff.dxs)
            .zip(self.ss.iter().zip(&aff.dss))
            .map(|((x, dx), (s, ds))| (x + dx * ap).dot(&(s + ds * ad)))
            .sum::<f64>()
            + (self.xl + &aff.dxl * ap).dot(&(self.sl + &aff.dsl * ad)))
            / self.nu;
        let ratio = (mu_aff / self.mu).clamp(0.0, 1.0);
        let expon = if ap.min(ad) > 0.2 { 3 } else { 1 };
        Some((ratio.powi(expon), ap, ad))
    }
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Corrector terms: `dX dS S^{-1}` per block and `dx ds` on LP rows.
struct Correction<B, S> {
    blocks: Vec<B>,
    lp: Vec<S>,
}

impl Problem {
    /// HKM direction in `f64`, formed in the basis scaled by `L^{-1}` where
    /// `X̃ = L^T X L` keeps the dX computation well conditioned.
    fn double_step(&self, it: &Iterate, switch: f64) -> Outcome {
        let Some(newton) = NewtonSystem::factor(self.schur(it.xs, it.sinvs, it.xl, it.sl), &self.e)
        else {
            return Outcome::Failed;
        };
        let nb = self.blocks.len();
        let scaled = |k: usize, m: &DMatrix<f64>| &it.linvs[k] * m * it.linvs[k].transpose();
        let unscaled = |k: usize, m: &DMatrix<f64>| it.linvs[k].transpose() * m * &it.linvs[k];
        let xts: Vec<DMatrix<f64>> = (0..nb)
            .map(|k| sym(&(it.ls[k].transpose() * &it.xs[k] * &it.ls[k])))
            .collect();
        let rts: Vec<DMatrix<f64>> = (0..nb).map(|k| scaled(k, &it.rs[k])).collect();

        // Returns the direction, its scaled (dX̃, dS̃) and the dual residual.
        let direction = |sigma_mu: f64, corr: Option<&Correction<DMatrix<f64>, f64>>| {
            let bases: Vec<DMatrix<f64>> = (0..nb)
                .map(|k| {
                    let n = xts[k].nrows();
                    let mut b = DMatrix::identity(n, n) * sigma_mu - &xts[k];
                    if let Some(c) = corr {
                        b -= &c.blocks[k];
                    }
                    b
                })
                .collect();
            let gl = DVector::from_fn(it.xl.len(), |l, _| {
                let c = corr.map_or(0.0, |c| c.lp[l]);
                (sigma_mu - it.xl[l] * it.sl[l] - c) / it.sl[l]
            });
            let mut h = DVector::zeros(self.p());
            for (k, b) in self.blocks.iter().enumerate() {
                b.pair(&unscaled(k, &(&bases[k] - &xts[k] * &rts[k])), &mut h);
            }
            for (l, row) in self.lp_rows.iter().enumerate() {
                let v = gl[l] - it.xl[l] * it.rl[l] / it.sl[l];
                for &(vi, a) in row {
                    h[vi] += a * v;
                }
            }
            let build = |dy: DVector<f64>, dlam: DVector<f64>| {
                let dss: Vec<DMatrix<f64>> = self
                    .blocks
                    .iter()
                    .zip(it.rs)
                    .map(|(b, r)| r + b.lin(&dy))
                    .collect();
                let dsts: Vec<DMatrix<f64>> = (0..nb).map(|k| scaled(k, &dss[k])).collect();
                let wts: Vec<DMatrix<f64>> = (0..nb)
                    .map(|k| sym(&(&bases[k] - &xts[k] * &dsts[k])))
                    .collect();
                let dxs = (0..nb).map(|k| sym(&unscaled(k, &wts[k]))).collect();
                let dsl = it.rl + self.lp_lin(&dy);
                let dxl = &gl - it.xl.component_mul(&dsl).component_div(it.sl);
                let d = Direction {
                    dy,
                    dlam,
                    dxs,
                    dxl,
                    dss,
                    dsl,
                };
                let r1 = it.rd - self.adjoint(&d.dxs, &d.dxl) - self.e.transpose() * &d.dlam;
                let r2 = it.re - &self.e * &d.dy;
                let res = (r1.norm_squared() + r2.norm_squared()).sqrt();
                (d, wts, dsts, r1, r2, res)
            };
            let (dy, dlam) = newton.solve(&(&h - it.rd), it.re)?;
            let mut best = build(dy, dlam);
            // Refinement is kept only while it clearly helps; near the end the
            // Schur matrix can be too ill conditioned for it to converge.
            for _ in 0..REFINE_STEPS {
                let (cy, cl) = newton.solve(&-&best.3, &best.4)?;
                let cand = build(&best.0.dy + cy, &best.0.dlam + cl);
                if cand.5 < 0.5 * best.5 {
                    best = cand;
                } else {
                    break;
                }
            }
            let (d, wts, dsts, _, _, res) = best;
            Some((d, wts, dsts, res))
        };

        let Some((aff, wts, dsts, res)) = direction(0.0, None) else {
            return Outcome::Failed;
        };
        if res > switch {
            return Outcome::Inaccurate;
        }
        let Some((sigma, ap, ad)) = it.centering(&aff) else {
            return Outcome::Failed;
        };
        let corr = Correction {
            blocks: wts.iter().zip(&dsts).map(|(w, d)| w * d).collect(),
            lp: aff.dxl.component_mul(&aff.dsl).iter().copied().collect(),
        };
        match direction(sigma * it.mu, Some(&corr)) {
            Some((d, _, _, res)) if res <= switch => Outcome::Step((d, ap, ad)),
            Some(_) => Outcome::Inaccurate,
            None => Outcome::Failed,
        }
    }

    /// `M_ij = tr(F_i X F_j S^{-1})` with every product accumulated in
    /// double-double, so that the Schur matrix is consistent with the `f64`
    /// iterate far below `f64` rounding.
    fn schur_dd(&self, it: &Iterate) -> DdMat {
        let p = self.p();
        let mut m = DdMat::zeros(p, p);
        for ((b, x), sinv) in self.blocks.iter().zip(it.xs).zip(it.sinvs) {
            let s = b.size;
            for (t, ft) in b.mats.iter().enumerate() {
                // H = X F_t S^{-1}; S^{-1} is symmetric so its rows are columns.
                let mut h = DdMat::zeros(s, s);
                for &(a, bb, v) in ft {
                    let srow = sinv.column(bb);
                    for i in 0..s {
                        let xv = mul2(x[(i, a)], v);
                        if xv.hi() == 0.0 {
                            continue;
                        }
                        axpy(&mut h.a[i * s..(i + 1) * s], xv, srow.as_slice());
                    }
                }
                let vt = b.vars[t];
                for (u, fu) in b.mats[..=t].iter().enumerate() {
                    let val = fu
                        .iter()
                        .fold(ZERO, |acc, &(a, bb, v)| acc + h.at(bb, a) * v);
                    let vu = b.vars[u];
                    *m.at_mut(vu, vt) += val;
                    if vu != vt {
                        *m.at_mut(vt, vu) += val;
                    }
                }
            }
        }
        for (l, row) in self.lp_rows.iter().enumerate() {
            let d = Dd::from(it.xl[l]) / it.sl[l];
            for &(vi, ai) in row {
                for &(vj, aj) in row {
                    *m.at_mut(vi, vj) += d * ai * aj;
                }
            }
        }
        m
    }

    fn lin_dd(b: &Block, dy: &[Dd]) -> DdMat {
        let mut out = DdMat::zeros(b.size, b.size);
        for (t, &v) in b.vars.iter().enumerate() {
            if dy[v].hi() != 0.0 {
                for &(a, bb, w) in &b.mats[t] {
                    *out.at_mut(a, bb) += dy[v] * w;
                }
            }
        }
        out
    }

    /// HKM direction with the Newton system in double-double. Used once the
    /// `f64` Schur matrix is too ill conditioned to resolve the dual equation.
    fn dd_step(&self, it: &Iterate) -> Option<(Direction, f64, f64)> {
        let newton = DdNewton::factor(self.schur_dd(it), &self.e)?;
        let nb = self.blocks.len();
        let nl = it.xl.len();
        let xrs: Vec<DdMat> = (0..nb)
            .map(|k| DdMat::f64_mul(&it.xs[k], &DdMat::from_f64(&it.rs[k])).mul_f64(&it.sinvs[k]))
            .collect();
        let to_f64 = |v: &[Dd]| DVector::from_iterator(v.len(), v.iter().map(|x| x.hi()));

        let direction = |sigma_mu: f64, corr: Option<&Correction<DdMat, Dd>>| {
            // G = σμ S^{-1} − X − X R S^{-1} − C, so that dX = sym(G − X F(dy) S^{-1}).
            let gs: Vec<DdMat> = (0..nb)
                .map(|k| {
                    let g = DdMat::from_f64(&it.sinvs[k])
                        .scale(sigma_mu)
                        .sub(&DdMat::from_f64(&it.xs[k]))
                        .sub(&xrs[k]);
                    match corr {
                        Some(c) => g.sub(&c.blocks[k]),
                        None => g,
                    }
                })
                .collect();
            let gl: Vec<Dd> = (0..nl)
                .map(|l| {
                    let mut v = Dd::from(sigma_mu) - mul2(it.xl[l], it.sl[l]);
                    if let Some(c) = corr {
                        v -= c.lp[l];
                    }
                    (v - mul2(it.xl[l], it.rl[l])) / it.sl[l]
                })
                .collect();
            let mut rhs: Vec<Dd> = it.rd.iter().map(|&v| -Dd::from(v)).collect();
            for (b, g) in self.blocks.iter().zip(&gs) {
                for (t, &v) in b.vars.iter().enumerate() {
                    rhs[v] += b.mats[t]
                        .iter()
                        .fold(ZERO, |acc, &(a, bb, w)| acc + g.at(bb, a) * w);
                }
            }
            for (l, row) in self.lp_rows.iter().enumerate() {
                for &(vi, a) in row {
                    rhs[vi] += gl[l] * a;
                }
            }
            let r2: Vec<Dd> = it.re.iter().map(|&v| Dd::from(v)).collect();
            let (dy, dlam) = newton.solve(&rhs, &r2);
            let mut dxs = Vec::with_capacity(nb);
            let mut dss = Vec::with_capacity(nb);
            for (k, b) in self.blocks.iter().enumerate() {
                let lin = Self::lin_dd(b, &dy);
                let xls = DdMat::f64_mul(&it.xs[k], &lin).mul_f64(&it.sinvs[k]);
                dxs.push(gs[k].sub(&xls).symmetrized());
                dss.push(lin.add(&DdMat::from_f64(&it.rs[k])));
            }
            let ady: Vec<Dd> = self
                .lp_rows
                .iter()
                .map(|row| row.iter().fold(ZERO, |acc, &(v, a)| acc + dy[v] * a))
                .collect();
            let dsl: Vec<Dd> = (0..nl).map(|l| ady[l] + it.rl[l]).collect();
            let dxl: Vec<Dd> = (0..nl)
                .map(|l| gl[l] - ady[l] * it.xl[l] / it.sl[l])
                .collect();
            let d = Direction {
                dy: to_f64(&dy),
                dlam: to_f64(&dlam),
                dxs: dxs.iter().map(DdMat::to_f64).collect(),
                dxl: to_f64(&dxl),
                dss: dss.iter().map(DdMat::to_f64).collect(),
                dsl: to_f64(&dsl),
            };
            let finite = d.dy.iter().chain(d.dlam.iter()).all(|v| v.is_finite());
            finite.then_some((d, dxs, dss, dxl, dsl))
        };

        let (aff, dxs, dss, dxl, dsl) = direction(0.0, None)?;
        let (sigma, ap, ad) = it.centering(&aff)?;
        let corr = Correction {
            blocks: (0..nb)
                .map(|k| dxs[k].mul(&dss[k]).mul_f64(&it.sinvs[k]))
                .collect(),
            lp: (0..nl).map(|l| dxl[l] * dsl[l]).collect(),
        };
        let (d, ..) = direction(sigma * it.mu, Some(&corr))?;
        Some((d, ap, ad))
    }
}

/// Double-double counterpart of [`NewtonSystem`], without refinement.
struct DdNewton {
    mt: DdCholesky,
    e: DMatrix<f64>,
    /// Columns of `(M + E^T E)^{-1} E^T`.
    z: Vec<Vec<Dd>>,
    k: Option<DdCholesky>,
}

impl DdNewton {
    fn factor(mut m: DdMat, e: &DMatrix<f64>) -> Option<DdNewton> {
        let (q, p) = e.shape();
        for r in 0..q {
            for i in 0..p {
                if e[(r, i)] == 0.0 {
                    continue;
                }
                for j in 0..p {
                    *m.at_mut(i, j) += mul2(e[(r, i)], e[(r, j)]);
                }
            }
        }
        let mt = DdCholesky::factor(&m)?;
        let z: Vec<Vec<Dd>> = (0..q)
            .map(|r| mt.solve(&(0..p).map(|i| Dd::from(e[(r, i)])).collect::<Vec<_>>()))
            .collect();
        let k = if q > 0 {
            let mut kk = DdMat::zeros(q, q);
            for r in 0..q {
                for (c, zc) in z.iter().enumerate() {
                    *kk.at_mut(r, c) = (0..p).fold(ZERO, |acc, i| acc + zc[i] * e[(r, i)]);
                }
            }
            Some(DdCholesky::factor(&kk.symmetrized())?)
        } else {
            None
        };
        Some(DdNewton {
            mt,
            e: e.clone(),
            z,
            k,
        })
    }

    fn solve(&self, r1: &[Dd], r2: &[Dd]) -> (Vec<Dd>, Vec<Dd>) {
        let Some(k) = &self.k else {
            return (self.mt.solve(r1), Vec::new());
        };
        let (q, p) = self.e.shape();
        let mut rhs = r1.to_vec();
        for r in 0..q {
            for (i, o) in rhs.iter_mut().enumerate() {
                *o += r2[r] * self.e[(r, i)];
            }
        }
        let u = self.mt.solve(&rhs);
        let t: Vec<Dd> = (0..q)
            .map(|r| (0..p).fold(r2[r], |acc, i| acc - u[i] * self.e[(r, i)]))
            .collect();
        let dlam = k.solve(&t);
        let mut dy = u;
        for (zr, &l) in self.z.iter().zip(&dlam) {
            for (o, &zv) in dy.iter_mut().zip(zr) {
                *o += zv * l;
            }
        }
        (dy, dlam)
    }
}

/// Factors for `M dy − E^T dλ = r1`, `E dy = r2` via `M + E^T E`.
struct NewtonSystem {
    m: DMatrix<f64>,
    mt: PivotCholesky,
    e: DMatrix<f64>,
    /// `(M + E^T E)^{-1} E^T`.
    z: DMatrix<f64>,
    k: Option<PivotCholesky>,
}

impl NewtonSystem {
    fn factor(m: DMatrix<f64>, e: &DMatrix<f64>) -> Option<NewtonSystem> {
        let q = e.nrows();
        let mt = if q > 0 {
            PivotCholesky::factor(&(&m + e.transpose() * e))?
        } else {
            PivotCholesky::factor(&m)?
        };
        let (z, k) = if q > 0 {
            let z = mt.solve_matrix(&e.transpose());
            let k = PivotCholesky::factor(&(e * &z))?;
            (z, Some(k))
        } else {
            (DMatrix::zeros(e.ncols(), 0), None)
        };
        Some(NewtonSystem {
            m,
            mt,
            e: e.clone(),
            z,
            k,
        })
    }

    fn solve(&self, r1: &DVector<f64>, r2: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
        let (mut dy, mut dlam) = self.solve_once(r1, r2)?;
        for _ in 0..2 {
            let res1 = r1 - &self.m * &dy + self.e.transpose() * &dlam;
            let res2 = r2 - &self.e * &dy;
            let (cy, cl) = self.solve_once(&res1, &res2)?;
            dy += cy;
            dlam += cl;
        }
        Some((dy, dlam))
    }

    fn solve_once(
        &self,
        r1: &DVector<f64>,
        r2: &DVector<f64>,
    ) -> Option<(DVector<f64>, DVector<f64>)> {
        let out = match &self.k {
            None => (self.mt.solve(r1), DVector::zeros(0)),
            Some(k) => {
                let u = self.mt.solve(&(r1 + self.e.transpose() * r2));
                let dlam = k.solve(&(r2 - &self.e * &u));
                (u + &self.z * &dlam, dlam)
            }
        };
        (out.0.iter().all(|v| v.is_finite()) && out.1.iter().all(|v| v.is_finite())).then_some(out)
    }
}

/// Largest `a` with `X + a dX ⪰ 0` (infinite when unbounded); `None` when `X` is not PD.
fn max_step(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> Option<f64> {
    let ch = x.clone().cholesky()?;
    let l = ch.l();
    let a = l.solve_lower_triangular(dx)?;
    let w = l.solve_lower_triangular(&a.transpose())?;
    let w = (&w + w.transpose()) * 0.5;
    let lmin = w.symmetric_eigenvalues().min();
    Some(if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    })
}

fn max_step_all(
    xs: &[DMatrix<f64>],
    dxs: &[DMatrix<f64>],
    xl: &DVector<f64>,
    dxl: &DVector<f64>,
) -> Option<f64> {
    let mut step = f64::INFINITY;
    for (x, dx) in xs.iter().zip(dxs) {
        step = step.min(max_step(x, dx)?);
    }
    for (x, dx) in xl.iter().zip(dxl.iter()) {
        if *dx < 0.0 {
            step = step.min(-x / dx);
        }
    }
    Some(step)
}
