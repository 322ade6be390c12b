//! Application problems: channel capacities, relative entropy of
//! entanglement, and the relative entropy of recovery.
//!
//! Every solved quantity is reported in nats and bits together with the
//! solver status and the quadrature scheme that produced it.

mod capacity;
mod recovery;
mod ree;

pub use capacity::{
    amplitude_damping_ea_capacity, amplitude_damping_isometry, amplitude_damping_q_capacity,
    cq_capacity, cq_capacity_pure_binary_exact, ea_capacity, q_capacity_degradable,
};
pub use recovery::{
    cmi, counterexample_state, recovery_scatter, rel_entr_recovery, task_seed,
    VIOLATION_MARGIN_BITS,
};
pub use ree::ree_ppt;

use nalgebra::DVector;

use crate::conic::{ConicBackend, InteriorPoint, Program, Solution, SolveStatus, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::qmat::{c, hermitian_eigen, hermitian_part, nats_to_bits, CMat, DensityMatrix};
use crate::quadrature::QuadratureScheme;

static DEFAULT_BACKEND: InteriorPoint = InteriorPoint {
    max_iter: 200,
    verbose: false,
};

/// Largest `dim(B)·dim(E)` accepted by [`ea_capacity`].
pub const EA_DIM_CAP: usize = 6;
/// Largest `n_A·n_B·n_C` accepted by [`rel_entr_recovery`].
pub const RECOVERY_DIM_CAP: usize = 12;

/// Quadrature scheme, tolerance, backend and size caps shared by every entry point.
#[derive(Clone)]
pub struct Settings<'a> {
    pub scheme: QuadratureScheme,
    pub tol: f64,
    pub backend: &'a dyn ConicBackend,
    pub ea_dim_cap: usize,
    pub recovery_dim_cap: usize,
}

impl Default for Settings<'static> {
    fn default() -> Self {
        Settings {
            scheme: QuadratureScheme::default(),
            tol: DEFAULT_TOL,
            backend: &DEFAULT_BACKEND,
            ea_dim_cap: EA_DIM_CAP,
            recovery_dim_cap: RECOVERY_DIM_CAP,
        }
    }
}

impl<'a> Settings<'a> {
    pub fn with_scheme(mut self, scheme: QuadratureScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_backend<'b>(self, backend: &'b dyn ConicBackend) -> Settings<'b> {
        Settings {
            scheme: self.scheme,
            tol: self.tol,
            backend,
            ea_dim_cap: self.ea_dim_cap,
            recovery_dim_cap: self.recovery_dim_cap,
        }
    }

    /// Solves and rejects certificates of infeasibility or unboundedness,
    /// which never occur for the well-posed problems of this module.
    fn solve(&self, prog: &Program) -> Result<Solution> {
        let sol = prog.solve(self.backend, self.tol)?;
        match sol.status {
            SolveStatus::Infeasible | SolveStatus::Unbounded => Err(Error::SolverFailed {
                status: sol.status,
                detail: format!("after {} iterations", sol.iterations),
            }),
            _ => Ok(sol),
        }
    }
}

impl std::fmt::Debug for Settings<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Settings")
            .field("m", &self.scheme.m())
            .field("k", &self.scheme.k())
            .field("tol", &self.tol)
            .field("backend", &self.backend.id())
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum Optimizer {
    /// Input distribution over the classical alphabet.
    Distribution(Vec<f64>),
    State(DensityMatrix),
}

#[derive(Debug, Clone)]
pub struct CapacityResult {
    pub value_nats: f64,
    pub value_bits: f64,
    pub optimizer: Optimizer,
    pub status: SolveStatus,
    pub m: usize,
    pub k: usize,
}

impl CapacityResult {
    fn new(value_nats: f64, optimizer: Optimizer, status: SolveStatus, s: &Settings) -> Self {
        CapacityResult {
            value_nats,
            value_bits: nats_to_bits(value_nats),
            optimizer,
            status,
            m: s.scheme.m(),
            k: s.scheme.k(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReeResult {
    pub value_nats: f64,
    pub value_bits: f64,
    /// Closest PPT state found.
    pub tau: DensityMatrix,
    pub status: SolveStatus,
    pub m: usize,
    pub k: usize,
}

#[derive(Debug, Clone)]
pub struct RecoveryResult {
    pub cmi_bits: f64,
    pub rer_bits: f64,
    /// Choi matrix of the recovery map `B -> B⊗C`, input factor first.
    pub choi: CMat,
    /// `rer_bits > cmi_bits + VIOLATION_MARGIN_BITS`.
    pub violation: bool,
    pub status: SolveStatus,
    pub m: usize,
    pub k: usize,
}

/// Nearest density matrix to a solver iterate: Hermitian part, clipped
/// spectrum, unit trace. The change is of the order of the solver tolerance.
fn project_density(m: &CMat, dims: Vec<usize>) -> Result<DensityMatrix> {
    let (vals, vecs) = hermitian_eigen(&hermitian_part(m));
    let clipped = DVector::from_iterator(vals.len(), vals.iter().map(|&v| c(v.max(0.0), 0.0)));
    let psd = &vecs * CMat::from_diagonal(&clipped) * vecs.adjoint();
    DensityMatrix::normalized(hermitian_part(&psd), dims)
}

/// Probability vector from solver values, projected the same way.
fn project_simplex(p: &[f64]) -> Vec<f64> {
    let clipped: Vec<f64> = p.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    clipped.iter().map(|v| v / total).collect()
}
