//! Conic programs over real scalar variables with PSD, nonnegative and
//! equality constraints, plus the solver backend contract.

mod chol;
mod dd;
mod expr;
mod ipm;
mod program;
mod sdpa;

pub use expr::{AffineExpr, ScalarExpr, Var};
pub use ipm::InteriorPoint;
pub use program::{EqRow, LmiBlock, LpRow, Program, Sense, SparseEntries, StandardForm};
pub use sdpa::{export_sdpa, import_sdpa, parse_sdpa, write_sdpa};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::qmat::CMat;

/// Default solver tolerance used throughout the library.
pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalLimit,
}

/// Backend output in the minimization form of a [`StandardForm`].
#[derive(Debug, Clone)]
pub struct RawSolution {
    pub status: SolveStatus,
    pub y: Vec<f64>,
    /// `c^T y + offset`.
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub iterations: usize,
}

/// A conic solver. Implementations must be reentrant.
pub trait ConicBackend: Sync {
    fn id(&self) -> String;
    fn solve(&self, sf: &StandardForm, tol: f64) -> Result<RawSolution>;
}

/// Solution of a [`Program`], objective reported in the program's own sense.
#[derive(Debug, Clone)]
pub struct Solution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    /// Relative duality gap `|p − d| / (1 + |p| + |d|)`.
    pub gap: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    /// Largest `max(0, −λ_min(block)) / (1 + ‖block‖)` over the embedded PSD blocks.
    pub max_psd_violation: f64,
    pub iterations: usize,
    pub backend: String,
}

impl Solution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn value(&self, e: &AffineExpr) -> CMat {
        e.evaluate(&self.x)
    }

    pub fn scalar(&self, e: &ScalarExpr) -> f64 {
        e.evaluate(&self.x)
    }
}
