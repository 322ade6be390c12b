//! Semidefinite representations of entropic functions.
//!
//! Every builder approximates `log` by `r_{m,k}` and emits `k` geometric-mean
//! ladder blocks followed by `m` quadrature-node blocks. With `P_f` the
//! noncommutative perspective, a node block `[[X − t T, X], [X, t Z + (1−t) X]] ⪰ 0`
//! is equivalent to `T ⪯ P_{f_t}(X, Z)` for `f_t(y) = (y−1)/(t(y−1)+1)`, and a
//! ladder block `[[X, Z_i], [Z_i, Z_{i−1}]] ⪰ 0` forces `Z_i ⪯ X # Z_{i−1}`.
//!
//! Internal variables are real symmetric when every input is real.

use nalgebra::SymmetricEigen;
use serde::Serialize;

use crate::conic::{AffineExpr, Program, ScalarExpr};
use crate::error::{Error, Result};
use crate::qmat::{self, c, CMat, EIG_CLAMP, SUPPORT_TOL};
use crate::quadrature::QuadratureScheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyFunction {
    OpRelEntr,
    QuantumEntr,
    TraceLogm,
    QuantumRelEntr,
    QuantumCondEntr,
}

/// Bookkeeping for one compiled entropic function.
#[derive(Debug, Clone, Serialize)]
pub struct EpigraphHandle {
    pub function: EntropyFunction,
    pub m: usize,
    pub k: usize,
    /// Dimension of the (joint) input.
    pub n: usize,
    /// Indices into [`Program::psd_constraints`].
    pub blocks: Vec<usize>,
    /// Block sizes before real embedding.
    pub block_sizes: Vec<usize>,
}

impl EpigraphHandle {
    fn new(function: EntropyFunction, scheme: &QuadratureScheme, n: usize) -> Self {
        EpigraphHandle {
            function,
            m: scheme.m(),
            k: scheme.k(),
            n,
            blocks: Vec::new(),
            block_sizes: Vec::new(),
        }
    }

    fn add(&mut self, prog: &mut Program, block: AffineExpr) -> Result<()> {
        self.blocks.push(prog.psd_constraints().len());
        self.block_sizes.push(block.rows());
        prog.add_psd(block)
    }
}

/// Matrix epigraph `T ⪰ D_op(X‖Y)`.
#[derive(Debug, Clone)]
pub struct MatrixEpigraph {
    pub t: AffineExpr,
    pub handle: EpigraphHandle,
}

/// Scalar epigraph or hypograph variable with its constraints.
#[derive(Debug, Clone)]
pub struct ScalarEpigraph {
    pub value: ScalarExpr,
    pub handle: EpigraphHandle,
}

fn square_dim(e: &AffineExpr, what: &str) -> Result<usize> {
    if !e.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "{what} must be square, got {:?}",
            e.shape()
        )));
    }
    Ok(e.rows())
}

fn same_dim(a: &AffineExpr, b: &AffineExpr) -> Result<usize> {
    let n = square_dim(a, "first argument")?;
    if square_dim(b, "second argument")? != n {
        return Err(Error::DimensionMismatch(format!(
            "arguments have sizes {n} and {}",
            b.rows()
        )));
    }
    Ok(n)
}

fn identity_expr(n: usize) -> AffineExpr {
    AffineExpr::constant(qmat::identity(n))
}

fn scaled(e: &AffineExpr, s: f64) -> AffineExpr {
    e.scale(s)
}

/// `Z_0 = y0`, `[[x, Z_i], [Z_i, Z_{i−1}]] ⪰ 0` for `i = 1..k`; returns `Z_k`.
fn ladder(
    prog: &mut Program,
    handle: &mut EpigraphHandle,
    x: &AffineExpr,
    y0: &AffineExpr,
    k: usize,
    complex: bool,
) -> Result<AffineExpr> {
    let n = x.rows();
    let mut prev = y0.clone();
    for _ in 0..k {
        let z = prog.matrix_var(n, complex)?;
        handle.add(prog, AffineExpr::block(&[&[x, &z], &[&z, &prev]])?)?;
        prev = z;
    }
    Ok(prev)
}

/// `T ⪰ D_op(X‖Y) = X^{1/2} log(X^{1/2} Y^{-1} X^{1/2}) X^{1/2}` up to the
/// quadrature error; `k + m` blocks of size `2n`.
pub fn op_rel_entr_epi(
    prog: &mut Program,
    x: &AffineExpr,
    y: &AffineExpr,
    scheme: &QuadratureScheme,
) -> Result<MatrixEpigraph> {
    let n = same_dim(x, y)?;
    let complex = !(x.is_real() && y.is_real());
    let mut handle = EpigraphHandle::new(EntropyFunction::OpRelEntr, scheme, n);
    let zk = ladder(prog, &mut handle, x, y, scheme.k(), complex)?;
    let mut t = AffineExpr::zeros(n, n);
    for (&tj, &wj) in scheme.nodes().iter().zip(scheme.weights()) {
        let tv = prog.matrix_var(n, complex)?;
        let top = x - &scaled(&tv, tj);
        let bottom = &scaled(&zk, tj) + &scaled(x, 1.0 - tj);
        handle.add(prog, AffineExpr::block(&[&[&top, x], &[x, &bottom]])?)?;
        t = &t - &scaled(&tv, scheme.scale() * wj);
    }
    Ok(MatrixEpigraph { t, handle })
}

/// `h ≤ H(ρ) = −Tr ρ log ρ` via `h = −Tr T`, `T ⪰ D_op(ρ‖I)`.
pub fn quantum_entr_hypo(
    prog: &mut Program,
    rho: &AffineExpr,
    scheme: &QuadratureScheme,
) -> Result<ScalarEpigraph> {
    let n = square_dim(rho, "density argument")?;
    let op = op_rel_entr_epi(prog, rho, &identity_expr(n), scheme)?;
    let mut handle = op.handle;
    handle.function = EntropyFunction::QuantumEntr;
    Ok(ScalarEpigraph {
        value: op.t.trace().scale(-1.0),
        handle,
    })
}

/// `σ = V V*` with `V` of full column rank `r`; real when `σ` is real.
fn psd_factor(sigma: &CMat) -> Result<CMat> {
    let defect = qmat::hermitian_defect(sigma);
    if defect > 1e-10 * (1.0 + sigma.camax()) {
        return Err(Error::NotHermitian(defect));
    }
    let (vals, vecs): (Vec<f64>, CMat) = if qmat::is_real(sigma) {
        let re = sigma.map(|z| z.re);
        let eig = SymmetricEigen::new((&re + re.transpose()) * 0.5);
        (
            eig.eigenvalues.iter().copied().collect(),
            qmat::from_real(&eig.eigenvectors),
        )
    } else {
        qmat::hermitian_eigen(sigma)
    };
    let lmin = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if lmin < EIG_CLAMP {
        return Err(Error::NotPsd(lmin));
    }
    let lmax = vals.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..vals.len())
        .filter(|&i| vals[i] > SUPPORT_TOL * lmax.max(1.0))
        .collect();
    Ok(CMat::from_fn(sigma.nrows(), keep.len(), |i, j| {
        vecs[(i, keep[j])] * vals[keep[j]].sqrt()
    }))
}

/// `u ≤ Tr[σ log ρ]` for constant PSD `σ`.
///
/// Node blocks are compressed against a factor `σ = V V*` of rank `r`:
/// `[[V*V − t W, V*], [V, t Z_k + (1−t) I]] ⪰ 0` with `W` of size `r`,
/// so blocks have size `r + n` (`2n` at full rank).
pub fn trace_logm_hypo(
    prog: &mut Program,
    sigma: &CMat,
    rho: &AffineExpr,
    scheme: &QuadratureScheme,
) -> Result<ScalarEpigraph> {
    let n = square_dim(rho, "matrix argument")?;
    if sigma.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "weight is {:?}, argument is {n}x{n}",
            sigma.shape()
        )));
    }
    let v = psd_factor(sigma)?;
    let r = v.ncols();
    let complex = !(rho.is_real() && qmat::is_real(sigma));
    let mut handle = EpigraphHandle::new(EntropyFunction::TraceLogm, scheme, n);
    let mut u = ScalarExpr::constant(0.0);
    if r == 0 {
        return Ok(ScalarEpigraph { value: u, handle });
    }
    let id = identity_expr(n);
    let zk = ladder(prog, &mut handle, &id, rho, scheme.k(), complex)?;
    let vtv = AffineExpr::constant(v.adjoint() * &v);
    let vexpr = AffineExpr::constant(v.clone());
    let vadj = AffineExpr::constant(v.adjoint());
    for (&tj, &wj) in scheme.nodes().iter().zip(scheme.weights()) {
        let w = prog.matrix_var(r, complex)?;
        let top = &vtv - &scaled(&w, tj);
        let bottom = &scaled(&zk, tj) + &scaled(&id, 1.0 - tj);
        handle.add(
            prog,
            AffineExpr::block(&[&[&top, &vadj], &[&vexpr, &bottom]])?,
        )?;
        u = u + w.trace().scale(scheme.scale() * wj);
    }
    Ok(ScalarEpigraph { value: u, handle })
}

/// `d ≥ D(ρ‖σ) = Tr ρ (log ρ − log σ)`.
///
/// Dispatch is structural: both constant gives the exact value with no
/// blocks; constant `ρ` uses [`trace_logm_hypo`]; constant `σ` (which must
/// be positive definite) uses [`quantum_entr_hypo`]; otherwise the lifted
/// form of [`quantum_rel_entr_epi_lifted`].
pub fn quantum_rel_entr_epi(
    prog: &mut Program,
    rho: &AffineExpr,
    sigma: &AffineExpr,
    scheme: &QuadratureScheme,
) -> Result<ScalarEpigraph> {
    let n = same_dim(rho, sigma)?;
    let mut handle = EpigraphHandle::new(EntropyFunction::QuantumRelEntr, scheme, n);
    match (rho.is_constant(), sigma.is_constant()) {
        (true, true) => {
            let d = qmat::relative_entropy(rho.constant_part(), sigma.constant_part())?;
            Ok(ScalarEpigraph {
                value: ScalarExpr::constant(d),
                handle,
            })
        }
        (true, false) => {
            let r = rho.constant_part();
            let neg_h = -qmat::von_neumann_entropy(r)?;
            let inner = trace_logm_hypo(prog, r, sigma, scheme)?;
            handle.blocks = inner.handle.blocks;
            handle.block_sizes = inner.handle.block_sizes;
            Ok(ScalarEpigraph {
                value: ScalarExpr::constant(neg_h) - inner.value,
                handle,
            })
        }
        (false, true) => {
            let s = sigma.constant_part();
            let (vals, _) = qmat::hermitian_eigen(s);
            let smin = vals.first().copied().unwrap_or(0.0);
            if smin <= SUPPORT_TOL {
                return Err(Error::InvalidArgument(format!(
                    "constant second argument must be positive definite (min eigenvalue {smin:.3e})"
                )));
            }
            let log_s = qmat::matrix_function(s, f64::ln);
            let cross = rho.left_mul(&log_s).trace();
            let inner = quantum_entr_hypo(prog, rho, scheme)?;
            handle.blocks = inner.handle.blocks;
            handle.block_sizes = inner.handle.block_sizes;
            Ok(ScalarEpigraph {
                value: (inner.value + cross).scale(-1.0),
                handle,
            })
        }
        (false, false) => quantum_rel_entr_epi_lifted(prog, rho, sigma, scheme),
    }
}

/// `d ≥ D(ρ‖σ)` through `D(ρ‖σ) = ⟨e, D_op(ρ⊗I ‖ I⊗σ̄) e⟩`, `e = Σ_i e_i⊗e_i`.
///
/// `k` ladder blocks of size `2n²` and `m` node blocks compressed against
/// `e`, of size `n² + 1`. Works for constant arguments too.
pub fn quantum_rel_entr_epi_lifted(
    prog: &mut Program,
    rho: &AffineExpr,
    sigma: &AffineExpr,
    scheme: &QuadratureScheme,
) -> Result<ScalarEpigraph> {
    let n = same_dim(rho, sigma)?;
    let n2 = n * n;
    let complex = !(rho.is_real() && sigma.is_real());
    let mut handle = EpigraphHandle::new(EntropyFunction::QuantumRelEntr, scheme, n);
    let x = rho.kron_right(&qmat::identity(n));
    let y = sigma.conj().kron_left(&qmat::identity(n));
    let mut e = CMat::zeros(n2, 1);
    for i in 0..n {
        e[(i * n + i, 0)] = c(1.0, 0.0);
    }
    let zk = ladder(prog, &mut handle, &x, &y, scheme.k(), complex)?;
    let exe = x.left_mul(&e.adjoint()).right_mul(&e);
    let xe = x.right_mul(&e);
    let xe_adj = xe.adjoint();
    let mut d = ScalarExpr::constant(0.0);
    for (&tj, &wj) in scheme.nodes().iter().zip(scheme.weights()) {
        let s = prog.scalar_var();
        let top = &exe - &AffineExpr::from_scalar(&s).scale(tj);
        let bottom = &scaled(&zk, tj) + &scaled(&x, 1.0 - tj);
        handle.add(
            prog,
            AffineExpr::block(&[&[&top, &xe_adj], &[&xe, &bottom]])?,
        )?;
        d = d - s.scale(scheme.scale() * wj);
    }
    Ok(ScalarEpigraph { value: d, handle })
}

/// `c ≤ H(ρ) − H(Tr_{traced_sys} ρ)` for a bipartite `ρ` on `dims = [n1, n2]`,
/// as `c = −d` with `d ≥ D(ρ ‖ reference)` and the reference `I ⊗ Tr_1 ρ`
/// (`traced_sys = 1`) or `Tr_2 ρ ⊗ I` (`traced_sys = 2`).
pub fn quantum_cond_entr_hypo(
    prog: &mut Program,
    rho: &AffineExpr,
    dims: [usize; 2],
    traced_sys: usize,
    scheme: &QuadratureScheme,
) -> Result<ScalarEpigraph> {
    let n = square_dim(rho, "joint state")?;
    if dims[0] * dims[1] != n {
        return Err(Error::DimensionMismatch(format!(
            "dims {dims:?} do not multiply to {n}"
        )));
    }
    let reference = match traced_sys {
        1 => rho
            .partial_trace(1, &dims)?
            .kron_left(&qmat::identity(dims[0])),
        2 => rho
            .partial_trace(2, &dims)?
            .kron_right(&qmat::identity(dims[1])),
        _ => {
            return Err(Error::InvalidArgument(format!(
                "traced system must be 1 or 2, got {traced_sys}"
            )))
        }
    };
    let inner = quantum_rel_entr_epi(prog, rho, &reference, scheme)?;
    let mut handle = inner.handle;
    handle.function = EntropyFunction::QuantumCondEntr;
    Ok(ScalarEpigraph {
        value: inner.value.scale(-1.0),
        handle,
    })
}
