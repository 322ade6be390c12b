//! Dense complex linear algebra for finite-dimensional quantum systems.
//!
//! Multipartite operations take a list of subsystem dimensions and a
//! 1-based subsystem index. Basis ordering is row-major: the leftmost factor
//! varies slowest, so for dims `[na, nb]` the basis vector `|a⟩|b⟩` sits at
//! index `a * nb + b`.
//!
//! Entropies are in nats throughout; convert with [`nats_to_bits`] at the
//! reporting boundary.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type RMat = DMatrix<f64>;

/// Eigenvalues above this (negative) threshold are clamped to zero by the
/// entropy oracles; anything more negative is an error.
pub const EIG_CLAMP: f64 = -1e-9;

/// Support threshold used by [`rel_entr_exact`].
pub const SUPPORT_TOL: f64 = 1e-10;

const HERMITIAN_TOL: f64 = 1e-12;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn nats_to_bits(x: f64) -> f64 {
    x / std::f64::consts::LN_2
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn from_real(m: &RMat) -> CMat {
    m.map(|v| c(v, 0.0))
}

/// Largest entrywise deviation of `m` from its adjoint.
pub fn hermitian_defect(m: &CMat) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `(m + m*) / 2`.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

pub fn is_real(m: &CMat) -> bool {
    m.iter().all(|z| z.im == 0.0)
}

/// A complex Hermitian matrix. Construction enforces exact Hermiticity after
/// checking the input is Hermitian up to round-off.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(CMat);

impl HermitianMatrix {
    pub fn new(m: CMat) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix is not square",
                m.nrows(),
                m.ncols()
            )));
        }
        let scale = 1.0 + m.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let defect = hermitian_defect(&m);
        if defect > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian(defect));
        }
        Ok(HermitianMatrix(hermitian_part(&m)))
    }

    pub fn from_real(m: &RMat) -> Result<Self> {
        Self::new(from_real(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_inner(self) -> CMat {
        self.0
    }

    /// Eigenvalues in ascending order with matching eigenvector columns.
    pub fn eigen(&self) -> (Vec<f64>, CMat) {
        hermitian_eigen(&self.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigen().0.first().copied().unwrap_or(0.0)
    }
}

/// Ascending eigen-decomposition of a Hermitian matrix.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(n, n, |r, col| eig.eigenvectors[(r, order[col])]);
    (values, vectors)
}

pub fn real_symmetric_eigenvalues(m: &RMat) -> Vec<f64> {
    let eig = SymmetricEigen::new((m + m.transpose()) * 0.5);
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Applies a scalar function to a Hermitian matrix through its spectrum.
pub fn matrix_function(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (vals, vecs) = hermitian_eigen(m);
    let d = DVector::from_iterator(vals.len(), vals.iter().map(|&v| c(f(v), 0.0)));
    let scaled = CMat::from_fn(vecs.nrows(), vecs.ncols(), |i, j| vecs[(i, j)] * d[j]);
    scaled * vecs.adjoint()
}

/// A density operator together with its subsystem dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: HermitianMatrix,
    dims: Vec<usize>,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace (1e-9) and positivity (min eigenvalue
    /// at least -1e-9).
    pub fn new(mat: CMat, dims: Vec<usize>) -> Result<Self> {
        let mat = HermitianMatrix::new(mat)?;
        check_dims(mat.dim(), &dims)?;
        let tr = mat.as_matrix().trace().re;
        if (tr - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidTrace(tr));
        }
        let lmin = mat.min_eigenvalue();
        if lmin < EIG_CLAMP {
            return Err(Error::NotPsd(lmin));
        }
        Ok(DensityMatrix { mat, dims })
    }

    /// Rescales a PSD matrix to unit trace before validating it.
    pub fn normalized(mat: CMat, dims: Vec<usize>) -> Result<Self> {
        let tr = mat.trace().re;
        if tr <= 0.0 {
            return Err(Error::InvalidTrace(tr));
        }
        Self::new(mat.unscale(tr), dims)
    }

    /// The projector onto a (normalized copy of) `psi`.
    pub fn pure(psi: &DVector<C64>, dims: Vec<usize>) -> Result<Self> {
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(Error::InvalidArgument("zero state vector".into()));
        }
        let v = psi.unscale(norm);
        Self::new(&v * v.adjoint(), dims)
    }

    pub fn maximally_mixed(dims: Vec<usize>) -> Self {
        let n: usize = dims.iter().product();
        DensityMatrix {
            mat: HermitianMatrix(identity(n).unscale(n as f64)),
            dims,
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn matrix(&self) -> &CMat {
        self.mat.as_matrix()
    }

    pub fn hermitian(&self) -> &HermitianMatrix {
        &self.mat
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.mat.eigen().0
    }

    pub fn is_real(&self) -> bool {
        is_real(self.matrix())
    }

    /// Marginal after tracing out subsystem `sys` (1-based).
    pub fn partial_trace(&self, sys: usize) -> Result<DensityMatrix> {
        let out = partial_trace(self.matrix(), sys, &self.dims)?;
        let mut dims = self.dims.clone();
        dims.remove(sys - 1);
        if dims.is_empty() {
            dims.push(1);
        }
        DensityMatrix::new(out, dims)
    }

    /// Keeps only the listed subsystems (1-based, ascending).
    pub fn marginal(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let mut state = self.clone();
        for sys in (1..=self.dims.len()).rev() {
            if !keep.contains(&sys) {
                state = state.partial_trace(sys)?;
            }
        }
        Ok(state)
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        DensityMatrix {
            mat: HermitianMatrix(kron(self.matrix(), other.matrix())),
            dims,
        }
    }

    pub fn with_dims(mut self, dims: Vec<usize>) -> Result<Self> {
        check_dims(self.dim(), &dims)?;
        self.dims = dims;
        Ok(self)
    }
}

fn check_dims(n: usize, dims: &[usize]) -> Result<()> {
    let prod: usize = dims.iter().product();
    if dims.is_empty() || prod != n {
        return Err(Error::DimensionMismatch(format!(
            "subsystem dimensions {dims:?} do not multiply to {n}"
        )));
    }
    Ok(())
}

fn check_square_dims(x: &CMat, dims: &[usize]) -> Result<()> {
    if !x.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} matrix is not square",
            x.nrows(),
            x.ncols()
        )));
    }
    check_dims(x.nrows(), dims)
}

fn check_sys(sys: usize, dims: &[usize]) -> Result<()> {
    if sys == 0 || sys > dims.len() {
        return Err(Error::DimensionMismatch(format!(
            "subsystem {sys} out of range for {} systems",
            dims.len()
        )));
    }
    Ok(())
}

/// Splits `dims` around subsystem `sys` into (left, d, right) sizes.
fn split(sys: usize, dims: &[usize]) -> (usize, usize, usize) {
    let left: usize = dims[..sys - 1].iter().product();
    let right: usize = dims[sys..].iter().product();
    (left, dims[sys - 1], right)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Traces out subsystem `sys` (1-based).
pub fn partial_trace(x: &CMat, sys: usize, dims: &[usize]) -> Result<CMat> {
    check_square_dims(x, dims)?;
    check_sys(sys, dims)?;
    let (left, d, right) = split(sys, dims);
    let n = left * right;
    let mut out = CMat::zeros(n, n);
    for l1 in 0..left {
        for r1 in 0..right {
            for l2 in 0..left {
                for r2 in 0..right {
                    let mut acc = C64::new(0.0, 0.0);
                    for a in 0..d {
                        acc += x[((l1 * d + a) * right + r1, (l2 * d + a) * right + r2)];
                    }
                    out[(l1 * right + r1, l2 * right + r2)] = acc;
                }
            }
        }
    }
    Ok(out)
}

/// Transposes the tensor factor `sys` (1-based).
pub fn partial_transpose(x: &CMat, sys: usize, dims: &[usize]) -> Result<CMat> {
    check_square_dims(x, dims)?;
    check_sys(sys, dims)?;
    let (_, d, right) = split(sys, dims);
    let n = x.nrows();
    // Swap the `sys` digit of the row index with that of the column index.
    let digit = |i: usize| (i / right) % d;
    let replace = |i: usize, new: usize| i - digit(i) * right + new * right;
    Ok(CMat::from_fn(n, n, |i, j| {
        x[(replace(i, digit(j)), replace(j, digit(i)))]
    }))
}

/// Reorders tensor factors: factor `s` of the output is factor `perm[s]`
/// (0-based) of the input.
pub fn permute_systems(x: &CMat, perm: &[usize], dims: &[usize]) -> Result<CMat> {
    check_square_dims(x, dims)?;
    let map = permutation_map(perm, dims)?;
    let n = x.nrows();
    Ok(CMat::from_fn(n, n, |i, j| x[(map[i], map[j])]))
}

/// `map[out_index] = in_index` for the factor permutation `perm`.
pub(crate) fn permutation_map(perm: &[usize], dims: &[usize]) -> Result<Vec<usize>> {
    let k = dims.len();
    let mut seen = vec![false; k];
    if perm.len() != k
        || perm
            .iter()
            .any(|&p| p >= k || std::mem::replace(&mut seen[p], true))
    {
        return Err(Error::InvalidArgument(format!(
            "{perm:?} is not a permutation of {k} systems"
        )));
    }
    let out_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let mut in_strides = vec![1usize; k];
    for s in (0..k.saturating_sub(1)).rev() {
        in_strides[s] = in_strides[s + 1] * dims[s + 1];
    }
    let n: usize = dims.iter().product();
    let mut map = Vec::with_capacity(n);
    let mut digits = vec![0usize; k];
    for _ in 0..n {
        let idx = digits
            .iter()
            .enumerate()
            .map(|(s, &dg)| dg * in_strides[perm[s]])
            .sum();
        map.push(idx);
        for s in (0..k).rev() {
            digits[s] += 1;
            if digits[s] < out_dims[s] {
                break;
            }
            digits[s] = 0;
        }
    }
    Ok(map)
}

/// Swaps tensor factors `sys_a` and `sys_b` (1-based).
pub fn system_exchange(x: &CMat, sys_a: usize, sys_b: usize, dims: &[usize]) -> Result<CMat> {
    check_sys(sys_a, dims)?;
    check_sys(sys_b, dims)?;
    let mut perm: Vec<usize> = (0..dims.len()).collect();
    perm.swap(sys_a - 1, sys_b - 1);
    permute_systems(x, &perm, dims)
}

/// Dimensions after [`system_exchange`].
pub fn exchanged_dims(sys_a: usize, sys_b: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = dims.to_vec();
    out.swap(sys_a - 1, sys_b - 1);
    out
}

/// A quantum channel in one of three representations.
#[derive(Debug, Clone, PartialEq)]
pub enum QuantumChannel {
    /// Isometry `U: A -> B ⊗ E`, stored as a `(dim_out * dim_env) x dim_in`
    /// matrix with the output factor first.
    Stinespring {
        iso: CMat,
        dim_in: usize,
        dim_out: usize,
        dim_env: usize,
    },
    Kraus {
        ops: Vec<CMat>,
        dim_in: usize,
        dim_out: usize,
    },
    /// Unnormalized Choi matrix `J = Σ |i⟩⟨j| ⊗ Λ(|i⟩⟨j|)`, input factor first.
    Choi {
        choi: CMat,
        dim_in: usize,
        dim_out: usize,
    },
}

const CHANNEL_TOL: f64 = 1e-10;

impl QuantumChannel {
    pub fn stinespring(iso: CMat, dim_out: usize, dim_env: usize) -> Result<Self> {
        let dim_in = iso.ncols();
        if iso.nrows() != dim_out * dim_env {
            return Err(Error::DimensionMismatch(format!(
                "isometry has {} rows, expected {dim_out}*{dim_env}",
                iso.nrows()
            )));
        }
        let defect = (iso.adjoint() * &iso - identity(dim_in)).camax();
        if defect > CHANNEL_TOL {
            return Err(Error::InvalidChannel(format!(
                "U*U deviates from identity by {defect:.3e}"
            )));
        }
        Ok(QuantumChannel::Stinespring {
            iso,
            dim_in,
            dim_out,
            dim_env,
        })
    }

    pub fn kraus(ops: Vec<CMat>) -> Result<Self> {
        let first = ops
            .first()
            .ok_or_else(|| Error::InvalidChannel("empty Kraus list".into()))?;
        let (dim_out, dim_in) = first.shape();
        let mut sum = CMat::zeros(dim_in, dim_in);
        for a in &ops {
            if a.shape() != (dim_out, dim_in) {
                return Err(Error::DimensionMismatch(
                    "Kraus operators differ in shape".into(),
                ));
            }
            sum += a.adjoint() * a;
        }
        let defect = (sum - identity(dim_in)).camax();
        if defect > CHANNEL_TOL {
            return Err(Error::InvalidChannel(format!(
                "Σ A*A deviates from identity by {defect:.3e}"
            )));
        }
        Ok(QuantumChannel::Kraus {
            ops,
            dim_in,
            dim_out,
        })
    }

    pub fn choi(choi: CMat, dim_in: usize, dim_out: usize) -> Result<Self> {
        check_square_dims(&choi, &[dim_in, dim_out])?;
        let tp = partial_trace(&choi, 2, &[dim_in, dim_out])?;
        let defect = (tp - identity(dim_in)).camax();
        if defect > CHANNEL_TOL {
            return Err(Error::InvalidChannel(format!(
                "Choi matrix is not trace preserving (defect {defect:.3e})"
            )));
        }
        let lmin = HermitianMatrix::new(choi.clone())?.min_eigenvalue();
        if lmin < EIG_CLAMP {
            return Err(Error::InvalidChannel(format!(
                "Choi matrix is not positive (min eigenvalue {lmin:.3e})"
            )));
        }
        Ok(QuantumChannel::Choi {
            choi,
            dim_in,
            dim_out,
        })
    }

    pub fn dim_in(&self) -> usize {
        match self {
            QuantumChannel::Stinespring { dim_in, .. }
            | QuantumChannel::Kraus { dim_in, .. }
            | QuantumChannel::Choi { dim_in, .. } => *dim_in,
        }
    }

    pub fn dim_out(&self) -> usize {
        match self {
            QuantumChannel::Stinespring { dim_out, .. }
            | QuantumChannel::Kraus { dim_out, .. }
            | QuantumChannel::Choi { dim_out, .. } => *dim_out,
        }
    }

    /// Kraus operators `A_e = (I_B ⊗ ⟨e|) U` for a Stinespring channel.
    pub fn kraus_operators(&self) -> Vec<CMat> {
        match self {
            QuantumChannel::Kraus { ops, .. } => ops.clone(),
            QuantumChannel::Stinespring {
                iso,
                dim_in,
                dim_out,
                dim_env,
            } => (0..*dim_env)
                .map(|e| CMat::from_fn(*dim_out, *dim_in, |b, a| iso[(b * dim_env + e, a)]))
                .collect(),
            QuantumChannel::Choi {
                choi,
                dim_in,
                dim_out,
            } => {
                let (vals, vecs) = hermitian_eigen(choi);
                vals.iter()
                    .enumerate()
                    .filter(|(_, &v)| v > SUPPORT_TOL)
                    .map(|(col, &v)| {
                        let s = v.sqrt();
                        CMat::from_fn(*dim_out, *dim_in, |b, a| vecs[(a * dim_out + b, col)] * s)
                    })
                    .collect()
            }
        }
    }

    pub fn choi_matrix(&self) -> CMat {
        match self {
            QuantumChannel::Choi { choi, .. } => choi.clone(),
            _ => {
                let (din, dout) = (self.dim_in(), self.dim_out());
                let mut j = CMat::zeros(din * dout, din * dout);
                for a in 0..din {
                    for b in 0..din {
                        let mut e = CMat::zeros(din, din);
                        e[(a, b)] = c(1.0, 0.0);
                        let out = self.apply(&e);
                        for r in 0..dout {
                            for s in 0..dout {
                                j[(a * dout + r, b * dout + s)] = out[(r, s)];
                            }
                        }
                    }
                }
                j
            }
        }
    }

    /// Applies the channel to an operator on the input space.
    pub fn apply(&self, x: &CMat) -> CMat {
        match self {
            QuantumChannel::Stinespring {
                iso,
                dim_out,
                dim_env,
                ..
            } => partial_trace(&(iso * x * iso.adjoint()), 2, &[*dim_out, *dim_env])
                .expect("dimensions validated at construction"),
            QuantumChannel::Kraus { ops, dim_out, .. } => {
                ops.iter().fold(CMat::zeros(*dim_out, *dim_out), |acc, a| {
                    acc + a * x * a.adjoint()
                })
            }
            QuantumChannel::Choi {
                choi,
                dim_in,
                dim_out,
            } => apply_choi(choi, x, *dim_in, *dim_out)
                .expect("dimensions validated at construction"),
        }
    }
}

/// `U ρ U*` as a state on `[dim_out, dim_env]`.
pub fn apply_isometry(u: &QuantumChannel, rho: &DensityMatrix) -> Result<DensityMatrix> {
    let QuantumChannel::Stinespring {
        iso,
        dim_in,
        dim_out,
        dim_env,
    } = u
    else {
        return Err(Error::InvalidChannel(
            "expected a Stinespring isometry".into(),
        ));
    };
    if rho.dim() != *dim_in {
        return Err(Error::DimensionMismatch(format!(
            "state has dimension {}, isometry expects {dim_in}",
            rho.dim()
        )));
    }
    DensityMatrix::new(iso * rho.matrix() * iso.adjoint(), vec![*dim_out, *dim_env])
}

/// `Λ(ρ) = Tr_in[J (ρᵀ ⊗ I_out)]` for the Choi matrix `J` of `Λ`.
pub fn apply_choi(j: &CMat, rho: &CMat, dim_in: usize, dim_out: usize) -> Result<CMat> {
    if j.shape() != (dim_in * dim_out, dim_in * dim_out) || rho.shape() != (dim_in, dim_in) {
        return Err(Error::DimensionMismatch(format!(
            "Choi {}x{} and input {}x{} incompatible with ({dim_in}, {dim_out})",
            j.nrows(),
            j.ncols(),
            rho.nrows(),
            rho.ncols()
        )));
    }
    let prod = j * kron(&rho.transpose(), &identity(dim_out));
    partial_trace(&prod, 1, &[dim_in, dim_out])
}

fn clamped_spectrum(m: &CMat) -> Result<Vec<f64>> {
    let (vals, _) = hermitian_eigen(m);
    vals.into_iter()
        .map(|v| {
            if v < EIG_CLAMP {
                Err(Error::NotPsd(v))
            } else {
                Ok(v.max(0.0))
            }
        })
        .collect()
}

fn entropy_of_spectrum(vals: &[f64]) -> f64 {
    -vals
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.ln())
        .sum::<f64>()
}

/// Von Neumann entropy of a PSD matrix (not necessarily unit trace).
pub fn von_neumann_entropy(m: &CMat) -> Result<f64> {
    Ok(entropy_of_spectrum(&clamped_spectrum(m)?))
}

pub fn entropy_exact(rho: &DensityMatrix) -> f64 {
    von_neumann_entropy(rho.matrix()).expect("density matrices are PSD")
}

/// `D(ρ‖σ)` for PSD matrices; `+∞` when the support of `ρ` is not contained
/// in that of `σ`.
pub fn relative_entropy(rho: &CMat, sigma: &CMat) -> Result<f64> {
    if rho.shape() != sigma.shape() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            rho.nrows(),
            rho.ncols(),
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    let p = clamped_spectrum(rho)?;
    let (q, v) = hermitian_eigen(sigma);
    if let Some(&qmin) = q.first() {
        if qmin < EIG_CLAMP {
            return Err(Error::NotPsd(qmin));
        }
    }
    let rho_h = hermitian_part(rho);
    let mut cross = 0.0;
    for (jdx, &qj) in q.iter().enumerate() {
        let vj = v.column(jdx);
        let weight = (vj.adjoint() * &rho_h * vj)[(0, 0)].re;
        if qj <= SUPPORT_TOL {
            if weight > SUPPORT_TOL {
                return Ok(f64::INFINITY);
            }
        } else {
            cross += weight * qj.ln();
        }
    }
    Ok(-entropy_of_spectrum(&p) - cross)
}

pub fn rel_entr_exact(rho: &DensityMatrix, sigma: &DensityMatrix) -> f64 {
    relative_entropy(rho.matrix(), sigma.matrix()).expect("density matrices are PSD")
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        c(re, im)
    })
}

/// `G G* / Tr(G G*)` with `G` an `n x rank` complex Gaussian matrix.
pub fn random_density(n: usize, rank: usize, seed: u64) -> Result<DensityMatrix> {
    if n == 0 || rank == 0 || rank > n {
        return Err(Error::InvalidArgument(format!(
            "rank {rank} must lie in 1..={n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = gaussian_matrix(&mut rng, n, rank);
    DensityMatrix::normalized(&g * g.adjoint(), vec![n])
}

/// Haar-random pure state on the given subsystems.
pub fn random_pure(dims: &[usize], seed: u64) -> DensityMatrix {
    let n: usize = dims.iter().product();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = gaussian_matrix(&mut rng, n, 1);
    DensityMatrix::pure(&g.column(0).into_owned(), dims.to_vec())
        .expect("a Gaussian vector is nonzero almost surely")
}

/// A random unit vector (complex Gaussian, normalized).
pub fn random_unit_vector(n: usize, seed: u64) -> DVector<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = gaussian_matrix(&mut rng, n, 1).column(0).into_owned();
    let norm = g.norm();
    g.unscale(norm)
}

/// Random Hermitian matrix with Gaussian entries, used by property tests.
pub fn random_hermitian(n: usize, seed: u64) -> CMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    hermitian_part(&gaussian_matrix(&mut rng, n, n))
}

/// `[[Re H, -Im H], [Im H, Re H]]`.
pub fn real_embedding(h: &HermitianMatrix) -> RMat {
    embed_complex(h.as_matrix())
}

pub(crate) fn embed_complex(m: &CMat) -> RMat {
    let n = m.nrows();
    let mut out = RMat::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = m[(i, j)];
            out[(i, j)] = z.re;
            out[(i + n, j + n)] = z.re;
            out[(i, j + n)] = -z.im;
            out[(i + n, j)] = z.im;
        }
    }
    out
}

/// Binary entropy in bits, with `h2(0) = h2(1) = 0`.
pub fn binary_entropy_bits(p: f64) -> f64 {
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    term(p) + term(1.0 - p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn diag(v: &[f64]) -> CMat {
        CMat::from_diagonal(&DVector::from_iterator(
            v.len(),
            v.iter().map(|&x| c(x, 0.0)),
        ))
    }

    fn bell() -> CMat {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = DVector::from_vec(vec![c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)]);
        &psi * psi.adjoint()
    }

    fn close(a: &CMat, b: &CMat, tol: f64) -> bool {
        a.shape() == b.shape() && (a - b).camax() < tol
    }

    #[test]
    fn kron_basics() {
        assert_eq!(kron(&identity(2), &identity(2)), identity(4));
        assert_eq!(
            kron(&diag(&[1.0, 0.0]), &diag(&[0.0, 1.0])),
            diag(&[0.0, 1.0, 0.0, 0.0])
        );
    }

    #[test]
    fn kron_spectrum_is_products() {
        let a = random_hermitian(2, 1);
        let b = random_hermitian(2, 2);
        let (la, _) = hermitian_eigen(&a);
        let (lb, _) = hermitian_eigen(&b);
        let mut expected: Vec<f64> = la
            .iter()
            .flat_map(|x| lb.iter().map(move |y| x * y))
            .collect();
        expected.sort_by(f64::total_cmp);
        let (got, _) = hermitian_eigen(&kron(&a, &b));
        for (g, e) in got.iter().zip(&expected) {
            assert_abs_diff_eq!(g, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn partial_trace_of_product_and_bell() {
        let ra = random_density(2, 2, 3).unwrap();
        let rb = random_density(3, 3, 4).unwrap();
        let joint = kron(ra.matrix(), rb.matrix());
        assert!(close(
            &partial_trace(&joint, 2, &[2, 3]).unwrap(),
            ra.matrix(),
            1e-12
        ));
        assert!(close(
            &partial_trace(&joint, 1, &[2, 3]).unwrap(),
            rb.matrix(),
            1e-12
        ));
        let half = identity(2).unscale(2.0);
        assert!(close(
            &partial_trace(&bell(), 1, &[2, 2]).unwrap(),
            &half,
            1e-15
        ));
    }

    #[test]
    fn partial_trace_middle_system() {
        let a = random_density(2, 2, 5).unwrap();
        let b = random_density(3, 3, 6).unwrap();
        let cc = random_density(2, 2, 7).unwrap();
        let joint = kron(&kron(a.matrix(), b.matrix()), cc.matrix());
        let out = partial_trace(&joint, 2, &[2, 3, 2]).unwrap();
        assert!(close(&out, &kron(a.matrix(), cc.matrix()), 1e-12));
    }

    #[test]
    fn dimension_errors() {
        let x = identity(4);
        assert!(matches!(
            partial_trace(&x, 1, &[2, 3]),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            partial_transpose(&x, 3, &[2, 2]),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            system_exchange(&x, 1, 2, &[4, 2]),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(apply_choi(&identity(4), &identity(3), 2, 2).is_err());
    }

    #[test]
    fn partial_transpose_product_and_bell() {
        let a = random_hermitian(2, 8);
        let b = random_hermitian(3, 9);
        let pt = partial_transpose(&kron(&a, &b), 2, &[2, 3]).unwrap();
        assert!(close(&pt, &kron(&a, &b.transpose()), 1e-14));
        let pt1 = partial_transpose(&kron(&a, &b), 1, &[2, 3]).unwrap();
        assert!(close(&pt1, &kron(&a.transpose(), &b), 1e-14));
        // The partial transpose of the Bell projector is SWAP/2.
        let (vals, _) = hermitian_eigen(&partial_transpose(&bell(), 2, &[2, 2]).unwrap());
        assert_abs_diff_eq!(vals[0], -0.5, epsilon = 1e-12);
    }

    #[test]
    fn exchange_of_product() {
        let a = random_hermitian(2, 10);
        let b = random_hermitian(3, 11);
        let ex = system_exchange(&kron(&a, &b), 1, 2, &[2, 3]).unwrap();
        assert!(close(&ex, &kron(&b, &a), 1e-14));
        let cc = random_hermitian(2, 12);
        let abc = kron(&kron(&a, &b), &cc);
        let ex = system_exchange(&abc, 1, 3, &[2, 3, 2]).unwrap();
        assert!(close(&ex, &kron(&kron(&cc, &b), &a), 1e-14));
    }

    fn amplitude_damping(gamma: f64) -> CMat {
        let mut u = CMat::zeros(4, 2);
        u[(0, 0)] = c(1.0, 0.0);
        u[(1, 1)] = c(gamma.sqrt(), 0.0);
        u[(2, 1)] = c((1.0 - gamma).sqrt(), 0.0);
        u
    }

    #[test]
    fn isometry_identity_embedding() {
        let rho = random_density(3, 3, 13).unwrap();
        let u = QuantumChannel::stinespring(identity(3), 3, 1).unwrap();
        let out = apply_isometry(&u, &rho).unwrap();
        assert!(close(out.matrix(), rho.matrix(), 1e-15));
        assert_eq!(out.dims(), &[3, 1]);
    }

    #[test]
    fn isometry_matches_kraus_form() {
        let gamma: f64 = 0.2;
        let u = QuantumChannel::stinespring(amplitude_damping(gamma), 2, 2).unwrap();
        let rho = random_density(2, 2, 14).unwrap();
        let out = apply_isometry(&u, &rho).unwrap().partial_trace(2).unwrap();
        let mut a0 = CMat::zeros(2, 2);
        a0[(0, 0)] = c(1.0, 0.0);
        a0[(1, 1)] = c((1.0 - gamma).sqrt(), 0.0);
        let mut a1 = CMat::zeros(2, 2);
        a1[(0, 1)] = c(gamma.sqrt(), 0.0);
        let r = rho.matrix();
        let direct = &a0 * r * a0.adjoint() + &a1 * r * a1.adjoint();
        assert!(close(out.matrix(), &direct, 1e-12));
        let noiseless = QuantumChannel::stinespring(amplitude_damping(0.0), 2, 2).unwrap();
        let out = apply_isometry(&noiseless, &rho)
            .unwrap()
            .partial_trace(2)
            .unwrap();
        assert!(close(out.matrix(), rho.matrix(), 1e-14));
    }

    #[test]
    fn choi_examples() {
        let rho = random_density(2, 2, 15).unwrap();
        let r = rho.matrix();
        // identity channel: Σ |ii⟩⟨jj|
        let mut jid = CMat::zeros(4, 4);
        for i in 0..2 {
            for j in 0..2 {
                jid[(i * 2 + i, j * 2 + j)] = c(1.0, 0.0);
            }
        }
        assert!(close(&apply_choi(&jid, r, 2, 2).unwrap(), r, 1e-14));
        let sigma = random_density(3, 3, 16).unwrap();
        let jconst = kron(&identity(2), sigma.matrix());
        assert!(close(
            &apply_choi(&jconst, r, 2, 3).unwrap(),
            sigma.matrix(),
            1e-14
        ));
        // The transpose map has Choi matrix Σ |i⟩⟨j| ⊗ |j⟩⟨i| = SWAP.
        let mut swap = CMat::zeros(4, 4);
        for i in 0..2 {
            for j in 0..2 {
                swap[(i * 2 + j, j * 2 + i)] = c(1.0, 0.0);
            }
        }
        assert!(close(
            &apply_choi(&swap, r, 2, 2).unwrap(),
            &r.transpose(),
            1e-14
        ));
    }

    #[test]
    fn choi_consistency_with_isometry() {
        for seed in 0..5 {
            let u = random_isometry(2, 6, 100 + seed);
            let ch = QuantumChannel::stinespring(u, 3, 2).unwrap();
            let j = ch.choi_matrix();
            let via_choi = QuantumChannel::choi(j.clone(), 2, 3).unwrap();
            let rho = random_density(2, 2, 200 + seed).unwrap();
            let a = apply_choi(&j, rho.matrix(), 2, 3).unwrap();
            let b = apply_isometry(&ch, &rho).unwrap().partial_trace(2).unwrap();
            assert!(close(&a, b.matrix(), 1e-10));
            assert!(close(&via_choi.apply(rho.matrix()), b.matrix(), 1e-10));
            let kr = QuantumChannel::kraus(ch.kraus_operators()).unwrap();
            assert!(close(&kr.apply(rho.matrix()), b.matrix(), 1e-10));
            let back = QuantumChannel::kraus(via_choi.kraus_operators()).unwrap();
            assert!(close(&back.apply(rho.matrix()), b.matrix(), 1e-10));
        }
    }

    fn random_isometry(din: usize, dout: usize, seed: u64) -> CMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = gaussian_matrix(&mut rng, dout, din);
        g.qr().q()
    }

    #[test]
    fn invalid_channels_are_rejected() {
        assert!(QuantumChannel::stinespring(identity(2).scale(2.0), 2, 1).is_err());
        assert!(QuantumChannel::kraus(vec![identity(2).scale(0.5)]).is_err());
        assert!(QuantumChannel::choi(identity(4), 2, 2).is_err());
        assert!(QuantumChannel::kraus(Vec::new()).is_err());
    }

    #[test]
    fn entropy_examples() {
        let pure = random_pure(&[3], 17);
        assert_abs_diff_eq!(entropy_exact(&pure), 0.0, epsilon = 1e-10);
        let mixed = DensityMatrix::maximally_mixed(vec![5]);
        assert_abs_diff_eq!(entropy_exact(&mixed), 5f64.ln(), epsilon = 1e-12);
        let d = DensityMatrix::new(diag(&[0.25, 0.75]), vec![2]).unwrap();
        let expected = -(0.25f64 * 0.25f64.ln() + 0.75 * 0.75f64.ln());
        assert_abs_diff_eq!(entropy_exact(&d), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(entropy_exact(&d), 0.5623, epsilon = 1e-4);
    }

    #[test]
    fn relative_entropy_examples() {
        let rho = random_density(3, 3, 18).unwrap();
        assert_abs_diff_eq!(rel_entr_exact(&rho, &rho), 0.0, epsilon = 1e-12);
        let mm = DensityMatrix::maximally_mixed(vec![3]);
        assert_abs_diff_eq!(
            rel_entr_exact(&rho, &mm),
            3f64.ln() - entropy_exact(&rho),
            epsilon = 1e-12
        );
        let zero = DensityMatrix::new(diag(&[1.0, 0.0]), vec![2]).unwrap();
        let one = DensityMatrix::new(diag(&[0.0, 1.0]), vec![2]).unwrap();
        assert_eq!(rel_entr_exact(&zero, &one), f64::INFINITY);
        assert!(rel_entr_exact(&zero, &mm_of(2)).is_finite());
    }

    fn mm_of(n: usize) -> DensityMatrix {
        DensityMatrix::maximally_mixed(vec![n])
    }

    #[test]
    fn random_states() {
        let p = random_density(4, 1, 19).unwrap();
        let vals = p.eigenvalues();
        assert_abs_diff_eq!(vals[3], 1.0, epsilon = 1e-12);
        assert!(vals[..3].iter().all(|v| v.abs() < 1e-12));
        assert_eq!(
            random_density(4, 2, 20).unwrap(),
            random_density(4, 2, 20).unwrap()
        );
        assert!(matches!(
            random_density(3, 4, 0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            random_density(3, 0, 0),
            Err(Error::InvalidArgument(_))
        ));
        for seed in 0..1000 {
            let r = random_density(3, 1 + (seed as usize % 3), seed).unwrap();
            assert_abs_diff_eq!(r.matrix().trace().re, 1.0, epsilon = 1e-12);
            assert!(r.eigenvalues()[0] >= -1e-12);
        }
    }

    #[test]
    fn embedding_examples() {
        let real = HermitianMatrix::from_real(&RMat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, -1.0]))
            .unwrap();
        let e = real_embedding(&real);
        assert_eq!(e.view((0, 0), (2, 2)), e.view((2, 2), (2, 2)));
        assert!(e.view((0, 2), (2, 2)).iter().all(|&v| v == 0.0));
        let h = HermitianMatrix::new(random_hermitian(3, 21)).unwrap();
        let e = real_embedding(&h);
        assert_abs_diff_eq!(e.trace(), 2.0 * h.as_matrix().trace().re, epsilon = 1e-12);
        // each eigenvalue appears twice
        let (hv, _) = h.eigen();
        let ev = real_symmetric_eigenvalues(&e);
        for (i, v) in hv.iter().enumerate() {
            assert_abs_diff_eq!(ev[2 * i], v, epsilon = 1e-10);
            assert_abs_diff_eq!(ev[2 * i + 1], v, epsilon = 1e-10);
        }
    }

    #[test]
    fn embedding_preserves_psd() {
        for seed in 0..50 {
            let h = random_hermitian(3, 300 + seed);
            let (vals, _) = hermitian_eigen(&h);
            // Shift so the sample lands on both sides of the cone.
            let shift = vals[0] + if seed % 2 == 0 { 0.05 } else { -0.05 };
            let shifted = HermitianMatrix::new(h - identity(3).scale(shift)).unwrap();
            let psd = shifted.min_eigenvalue() >= 0.0;
            let emb_psd = real_symmetric_eigenvalues(&real_embedding(&shifted))[0] >= 0.0;
            assert_eq!(psd, emb_psd);
        }
    }

    #[test]
    fn hermitian_and_density_validation() {
        let mut m = identity(2);
        m[(0, 1)] = c(1.0, 0.0);
        assert!(matches!(
            HermitianMatrix::new(m),
            Err(Error::NotHermitian(_))
        ));
        assert!(matches!(
            DensityMatrix::new(identity(2), vec![2]),
            Err(Error::InvalidTrace(_))
        ));
        assert!(matches!(
            DensityMatrix::new(diag(&[1.5, -0.5]), vec![2]),
            Err(Error::NotPsd(_))
        ));
        assert!(DensityMatrix::new(diag(&[0.5, 0.5]), vec![3]).is_err());
    }

    #[test]
    fn binary_entropy_values() {
        assert_abs_diff_eq!(binary_entropy_bits(0.5), 1.0, epsilon = 1e-15);
        assert_eq!(binary_entropy_bits(1.0), 0.0);
        assert_abs_diff_eq!(binary_entropy_bits(0.75), 0.811278, epsilon = 1e-6);
    }

    fn arb_dims() -> impl Strategy<Value = (Vec<usize>, u64)> {
        (prop::collection::vec(1usize..=3, 2..=3), any::<u64>())
    }

    proptest! {
        #[test]
        fn partial_trace_preserves_trace((dims, seed) in arb_dims(), sys in 1usize..=3) {
            let sys = 1 + (sys - 1) % dims.len();
            let n: usize = dims.iter().product();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = gaussian_matrix(&mut rng, n, n);
            let out = partial_trace(&x, sys, &dims).unwrap();
            prop_assert!((out.trace() - x.trace()).norm() < 1e-12 * (1.0 + x.camax() * n as f64));
        }

        #[test]
        fn transpose_and_exchange_are_involutions((dims, seed) in arb_dims(), a in 1usize..=3, b in 1usize..=3) {
            let (a, b) = (1 + (a - 1) % dims.len(), 1 + (b - 1) % dims.len());
            let n: usize = dims.iter().product();
            let x = random_hermitian(n, seed);
            let pt = partial_transpose(&x, a, &dims).unwrap();
            prop_assert!(close(&partial_transpose(&pt, a, &dims).unwrap(), &x, 1e-15));
            prop_assert!((pt.trace() - x.trace()).norm() < 1e-12);
            prop_assert!(hermitian_defect(&pt) < 1e-15);
            let ex = system_exchange(&x, a, b, &dims).unwrap();
            let back = system_exchange(&ex, a, b, &exchanged_dims(a, b, &dims)).unwrap();
            prop_assert!(close(&back, &x, 1e-15));
            let (v1, _) = hermitian_eigen(&x);
            let (v2, _) = hermitian_eigen(&ex);
            for (p, q) in v1.iter().zip(&v2) {
                prop_assert!((p - q).abs() < 1e-10);
            }
        }

        #[test]
        fn entropy_is_unitarily_invariant(seed in any::<u64>()) {
            let rho = random_density(3, 2, seed).unwrap();
            let u = random_isometry(3, 6, seed ^ 0xabc);
            let ch = QuantumChannel::stinespring(u, 6, 1).unwrap();
            let out = apply_isometry(&ch, &rho).unwrap();
            prop_assert!((entropy_exact(&out) - entropy_exact(&rho)).abs() < 1e-10);
        }

        #[test]
        fn relative_entropy_is_nonnegative(seed in any::<u64>()) {
            let rho = random_density(3, 3, seed).unwrap();
            let sigma = random_density(3, 3, seed.wrapping_add(1)).unwrap();
            let d = rel_entr_exact(&rho, &sigma);
            let dist = (rho.matrix() - sigma.matrix()).norm();
            prop_assert!(d >= 0.0);
            prop_assert_eq!(d < 1e-14, dist < 1e-8);
        }
    }
}
