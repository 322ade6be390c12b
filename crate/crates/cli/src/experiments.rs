//! The six reproducible experiments and their fixed CSV column orders.

use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use qrelent::conic::{InteriorPoint, SolveStatus};
use qrelent::qmat::{random_density, random_pure, random_unit_vector, DensityMatrix};
use qrelent::quadrature::QuadratureScheme;
use qrelent::quantinfo::{
    amplitude_damping_ea_capacity, amplitude_damping_q_capacity, counterexample_state, cq_capacity,
    cq_capacity_pure_binary_exact, ree_ppt, rel_entr_recovery, task_seed, Settings,
};
use rayon::prelude::*;

use crate::report::{ExperimentReport, Provenance, Row};
use crate::RunError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Experiment {
    AccuracyCq,
    EaSweep,
    QSweep,
    ReeBench,
    RecoveryScatter,
    RecoveryTheta,
}

/// Bipartite sizes of the REE benchmark ladder: 4, 6, 8, 9, 12, 16.
pub const REE_LADDER: [[usize; 2]; 6] = [[2, 2], [2, 3], [2, 4], [3, 3], [3, 4], [4, 4]];

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::AccuracyCq,
        Experiment::EaSweep,
        Experiment::QSweep,
        Experiment::ReeBench,
        Experiment::RecoveryScatter,
        Experiment::RecoveryTheta,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Experiment::AccuracyCq => "accuracy-cq",
            Experiment::EaSweep => "ea-sweep",
            Experiment::QSweep => "q-sweep",
            Experiment::ReeBench => "ree-bench",
            Experiment::RecoveryScatter => "recovery-scatter",
            Experiment::RecoveryTheta => "recovery-theta",
        }
    }

    /// Data columns in CSV order. `optimal` is 1 when the solver certified
    /// optimality at the requested tolerance and 0 otherwise.
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            Experiment::AccuracyCq => &[
                "channel",
                "epsilon",
                "exact_bits",
                "computed_bits",
                "abs_error",
                "optimal",
            ],
            Experiment::EaSweep | Experiment::QSweep => &["gamma", "capacity_bits", "optimal"],
            Experiment::ReeBench => &["n_a", "n_b", "dim", "ree_bits", "optimal"],
            Experiment::RecoveryScatter => {
                &["sample", "cmi_bits", "rer_bits", "violation", "optimal"]
            }
            Experiment::RecoveryTheta => &["theta", "cmi_bits", "rer_bits", "violation", "optimal"],
        }
    }

    fn uses_grid(self) -> bool {
        matches!(
            self,
            Experiment::EaSweep | Experiment::QSweep | Experiment::RecoveryTheta
        )
    }

    fn default_size(self) -> usize {
        match self {
            Experiment::AccuracyCq => 10,
            Experiment::EaSweep | Experiment::QSweep => 21,
            Experiment::ReeBench => REE_LADDER.len(),
            Experiment::RecoveryScatter => 500,
            Experiment::RecoveryTheta => 50,
        }
    }
}

impl std::str::FromStr for Experiment {
    type Err = RunError;

    fn from_str(s: &str) -> Result<Self, RunError> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.id() == s)
            .ok_or_else(|| RunError::UnknownExperiment(s.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub seed: u64,
    pub m: usize,
    pub k: usize,
    /// Points of the sweep grid (sweeps only).
    pub grid: Option<usize>,
    /// Number of samples; for `ree-bench`, how many ladder sizes to run.
    pub count: Option<usize>,
    pub tol: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            seed: 1,
            m: qrelent::quadrature::DEFAULT_M,
            k: qrelent::quadrature::DEFAULT_K,
            grid: None,
            count: None,
            tol: qrelent::conic::DEFAULT_TOL,
        }
    }
}

/// Checked plan for one run: row count and quadrature scheme.
struct Plan {
    rows: usize,
    scheme: QuadratureScheme,
}

fn plan(exp: Experiment, opts: &RunOptions) -> Result<Plan, RunError> {
    let scheme = QuadratureScheme::new(opts.m, opts.k)
        .map_err(|e| RunError::InvalidOption(e.to_string()))?;
    if !(opts.tol > 0.0 && opts.tol < 1.0) {
        return Err(RunError::InvalidOption(format!(
            "tolerance {} outside (0, 1)",
            opts.tol
        )));
    }
    let rows = if exp.uses_grid() {
        if opts.count.is_some() {
            return Err(RunError::InvalidOption(format!(
                "{} takes --grid, not --count",
                exp.id()
            )));
        }
        let g = opts.grid.unwrap_or(exp.default_size());
        if g < 2 {
            return Err(RunError::InvalidGrid(format!(
                "{g} points; a sweep needs at least 2"
            )));
        }
        g
    } else {
        if opts.grid.is_some() {
            return Err(RunError::InvalidOption(format!(
                "{} takes --count, not --grid",
                exp.id()
            )));
        }
        let n = opts.count.unwrap_or(exp.default_size());
        if n == 0 {
            return Err(RunError::InvalidOption("--count must be at least 1".into()));
        }
        if exp == Experiment::ReeBench && n > REE_LADDER.len() {
            return Err(RunError::InvalidOption(format!(
                "ree-bench has {} ladder sizes, asked for {n}",
                REE_LADDER.len()
            )));
        }
        n
    };
    Ok(Plan { rows, scheme })
}

fn grid_point(i: usize, n: usize, hi: f64) -> f64 {
    // The last point is exactly `hi`.
    hi * (i as f64 / (n - 1) as f64)
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn optimal(s: SolveStatus) -> f64 {
    flag(s == SolveStatus::Optimal)
}

fn compute_row(
    exp: Experiment,
    i: usize,
    n: usize,
    seed: u64,
    s: &Settings,
) -> qrelent::Result<Vec<f64>> {
    let half_pi = std::f64::consts::FRAC_PI_2;
    Ok(match exp {
        Experiment::AccuracyCq => {
            let a = random_unit_vector(2, task_seed(seed, 2 * i as u64));
            let b = random_unit_vector(2, task_seed(seed, 2 * i as u64 + 1));
            let states = [
                DensityMatrix::pure(&a, vec![2])?,
                DensityMatrix::pure(&b, vec![2])?,
            ];
            let exact = cq_capacity_pure_binary_exact(&a, &b)?;
            let r = cq_capacity(&states, s)?;
            let eps = a.dotc(&b).norm();
            vec![
                i as f64,
                eps,
                exact,
                r.value_bits,
                (r.value_bits - exact).abs(),
                optimal(r.status),
            ]
        }
        Experiment::EaSweep => {
            let gamma = grid_point(i, n, 1.0);
            let r = amplitude_damping_ea_capacity(gamma, s)?;
            vec![gamma, r.value_bits, optimal(r.status)]
        }
        Experiment::QSweep => {
            let gamma = grid_point(i, n, 0.5);
            let r = amplitude_damping_q_capacity(gamma, s)?;
            vec![gamma, r.value_bits, optimal(r.status)]
        }
        Experiment::ReeBench => {
            let [na, nb] = REE_LADDER[i];
            let d = na * nb;
            let rho = random_density(d, d, task_seed(seed, i as u64))?.with_dims(vec![na, nb])?;
            let r = ree_ppt(&rho, [na, nb], s)?;
            vec![
                na as f64,
                nb as f64,
                d as f64,
                r.value_bits,
                optimal(r.status),
            ]
        }
        Experiment::RecoveryScatter => {
            let rho = random_pure(&[2, 2, 2], task_seed(seed, i as u64));
            let r = rel_entr_recovery(&rho, [2, 2, 2], s)?;
            vec![
                i as f64,
                r.cmi_bits,
                r.rer_bits,
                flag(r.violation),
                optimal(r.status),
            ]
        }
        Experiment::RecoveryTheta => {
            let theta = grid_point(i, n, half_pi);
            let r = rel_entr_recovery(&counterexample_state(theta)?, [2, 2, 2], s)?;
            vec![
                theta,
                r.cmi_bits,
                r.rer_bits,
                flag(r.violation),
                optimal(r.status),
            ]
        }
    })
}

/// Runs an experiment, handing each finished row to `sink` in row order.
///
/// Rows are solved in parallel chunks of one row per worker thread. `stop`
/// is polled between chunks; when it is set, the report comes back with
/// `truncated = true` and the rows finished so far.
pub fn run(
    exp: Experiment,
    opts: &RunOptions,
    stop: &AtomicBool,
    mut sink: impl FnMut(&Row) -> Result<(), RunError>,
) -> Result<ExperimentReport, RunError> {
    let Plan { rows: n, scheme } = plan(exp, opts)?;
    let backend = InteriorPoint::default();
    let settings = Settings::default()
        .with_scheme(scheme)
        .with_tol(opts.tol)
        .with_backend(&backend);
    let mut report = ExperimentReport {
        provenance: provenance(exp, opts, n),
        columns: exp.columns().iter().map(|c| c.to_string()).collect(),
        rows: Vec::with_capacity(n),
        expected_rows: n,
        truncated: false,
    };
    let chunk = rayon::current_num_threads().max(1);
    let mut start = 0;
    while start < n {
        if stop.load(Ordering::SeqCst) {
            report.truncated = true;
            break;
        }
        let end = (start + chunk).min(n);
        let done: Vec<Result<Row, RunError>> = (start..end)
            .into_par_iter()
            .map(|i| {
                let t = Instant::now();
                let values = compute_row(exp, i, n, opts.seed, &settings)
                    .map_err(|source| RunError::Row { row: i, source })?;
                Ok(Row {
                    values,
                    wall_clock_s: t.elapsed().as_secs_f64(),
                })
            })
            .collect();
        for row in done {
            let row = row?;
            sink(&row)?;
            report.rows.push(row);
        }
        start = end;
    }
    Ok(report)
}

/// Provenance of a run, available before any row is solved.
pub fn provenance(exp: Experiment, opts: &RunOptions, rows: usize) -> Provenance {
    use qrelent::conic::ConicBackend;
    let (grid, count) = if exp.uses_grid() {
        (Some(rows), None)
    } else {
        (None, Some(rows))
    };
    Provenance {
        experiment: exp.id().to_string(),
        m: opts.m,
        k: opts.k,
        seed: opts.seed,
        tol: opts.tol,
        backend: InteriorPoint::default().id(),
        grid,
        count,
    }
}

/// Number of rows `run` will produce, after validating the options.
pub fn planned_rows(exp: Experiment, opts: &RunOptions) -> Result<usize, RunError> {
    Ok(plan(exp, opts)?.rows)
}
