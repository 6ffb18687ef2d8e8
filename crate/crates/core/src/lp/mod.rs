//! Exact linear programming for the equality-constrained ℓ1 problems behind
//! every capacity and Basis Pursuit computation.
//!
//! [`solve_lp`] accepts problems of the form
//!
//! ```text
//!   minimize c'x  subject to  Ax = b,  x_j >= l_j  (l_j may be -inf)
//! ```
//!
//! and reduces them to standard form before running a dense two-phase
//! revised simplex. The ℓ1 wrappers in [`l1`] build their problems through
//! the positive/negative split `x = u - v`.

mod kernels;
mod l1;
mod simplex;

pub use l1::{basis_pursuit, min_l1_nullspace, min_l1_nullspace_warm};
pub(crate) use l1::pivot_order;

use nalgebra::DMatrix;

use crate::error::{CapsetError, Result};
use simplex::{Outcome, Simplex};

/// Entering-variable rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PivotRule {
    /// Devex reference weights, i.e. largest `d_j^2 / w_j`, with the same
    /// Bland fallback as `DantzigWithBlandFallback`.
    DevexWithBlandFallback,
    /// Most negative reduced cost; switches to Bland's rule after
    /// `stall_limit` consecutive degenerate pivots and back after progress.
    #[default]
    DantzigWithBlandFallback,
    /// Smallest-index rule throughout. Slow but cycle-free.
    Bland,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub feas_tol: f64,
    pub opt_tol: f64,
    /// Smallest column entry accepted as a pivot.
    pub pivot_tol: f64,
    pub pivot_rule: PivotRule,
    /// Iteration cap; `None` means `50 * (m + n)` of the standard form.
    pub max_iterations: Option<usize>,
    pub refactor_interval: usize,
    pub stall_limit: usize,
    /// Shift basic values by small deterministic amounts during phase two to
    /// break degenerate stalls; the true right-hand side is restored and any
    /// residual infeasibility removed with dual simplex pivots afterwards.
    pub perturb: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            feas_tol: 1e-9,
            opt_tol: 1e-9,
            pivot_tol: 1e-9,
            pivot_rule: PivotRule::default(),
            max_iterations: None,
            refactor_interval: 200,
            stall_limit: 50,
            perturb: true,
        }
    }
}

impl SolverConfig {
    pub fn with_tolerances(feas_tol: f64, opt_tol: f64) -> Result<Self> {
        if !(feas_tol > 0.0 && opt_tol > 0.0) {
            return Err(CapsetError::InvalidParam(format!(
                "tolerances must be positive (feas_tol={feas_tol}, opt_tol={opt_tol})"
            )));
        }
        Ok(SolverConfig {
            feas_tol,
            opt_tol,
            ..SolverConfig::default()
        })
    }
}

/// `minimize c'x  s.t.  Ax = b, x >= lower`.
#[derive(Debug, Clone)]
pub struct LpProblem {
    objective: Vec<f64>,
    constraint_matrix: DMatrix<f64>,
    rhs: Vec<f64>,
    lower_bounds: Vec<f64>,
}

impl LpProblem {
    /// Builds a problem, checking shapes and finiteness. Lower bounds may be
    /// `f64::NEG_INFINITY` for free variables.
    pub fn new(
        objective: Vec<f64>,
        constraint_matrix: DMatrix<f64>,
        rhs: Vec<f64>,
        lower_bounds: Vec<f64>,
    ) -> Result<Self> {
        let (m, n) = constraint_matrix.shape();
        if rhs.len() != m {
            return Err(CapsetError::InvalidProblem(format!(
                "rhs has length {} but the constraint matrix has {m} rows",
                rhs.len()
            )));
        }
        if objective.len() != n || lower_bounds.len() != n {
            return Err(CapsetError::InvalidProblem(format!(
                "objective/bounds lengths ({}, {}) do not match {n} columns",
                objective.len(),
                lower_bounds.len()
            )));
        }
        let finite = objective.iter().chain(rhs.iter()).all(|v| v.is_finite())
            && constraint_matrix.iter().all(|v| v.is_finite())
            && lower_bounds.iter().all(|v| v.is_finite() || *v == f64::NEG_INFINITY);
        if !finite {
            return Err(CapsetError::InvalidProblem(
                "non-finite entry in problem data".into(),
            ));
        }
        Ok(LpProblem {
            objective,
            constraint_matrix,
            rhs,
            lower_bounds,
        })
    }

    /// Standard-form problem: every variable bounded below by zero.
    pub fn nonnegative(
        objective: Vec<f64>,
        constraint_matrix: DMatrix<f64>,
        rhs: Vec<f64>,
    ) -> Result<Self> {
        let n = constraint_matrix.ncols();
        Self::new(objective, constraint_matrix, rhs, vec![0.0; n])
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn constraint_matrix(&self) -> &DMatrix<f64> {
        &self.constraint_matrix
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn lower_bounds(&self) -> &[f64] {
        &self.lower_bounds
    }

    pub fn num_variables(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.rhs.len()
    }

    /// Max-norm of `Ax - b`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        let (m, _) = self.constraint_matrix.shape();
        (0..m)
            .map(|i| {
                let row = self.constraint_matrix.row(i);
                let ax: f64 = row.iter().zip(x).map(|(a, v)| a * v).sum();
                (ax - self.rhs[i]).abs()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Present iff `status == Optimal`.
    pub optimizer: Option<Vec<f64>>,
    /// Present iff `status == Optimal`.
    pub objective_value: Option<f64>,
    /// Reduced costs of the standard-form columns at the optimum.
    pub reduced_costs: Option<Vec<f64>>,
    /// Optimal basis (one column per row), reusable with [`solve_lp_warm`].
    /// Only present when no variable is free and every row has a
    /// structural basic column.
    pub basis: Option<Vec<usize>>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    fn without_point(status: LpStatus, iterations: usize) -> Self {
        LpSolution {
            status,
            optimizer: None,
            objective_value: None,
            reduced_costs: None,
            basis: None,
            iterations,
        }
    }
}

/// How an original variable maps onto standard-form columns.
#[derive(Debug, Clone, Copy)]
enum Column {
    Shifted { col: usize, lower: f64 },
    Split { pos: usize, neg: usize },
}

/// Solves `problem` to optimality, or reports infeasibility/unboundedness.
/// Deterministic for identical inputs.
pub fn solve_lp(problem: &LpProblem, config: &SolverConfig) -> Result<LpSolution> {
    solve_with_start(problem, config, None)
}

/// Like [`solve_lp`], but first tries `start` (one column index per
/// constraint row) as the initial basis. If that basis is singular or not
/// primal feasible the solver falls back to the cold two-phase start, so the
/// hint never changes the answer, only the work. Requires every lower bound
/// to be finite so that column indices are preserved.
pub fn solve_lp_warm(
    problem: &LpProblem,
    config: &SolverConfig,
    start: &[usize],
) -> Result<LpSolution> {
    if problem.lower_bounds.contains(&f64::NEG_INFINITY) {
        return Err(CapsetError::InvalidParam(
            "warm start needs finite lower bounds".into(),
        ));
    }
    solve_with_start(problem, config, Some(start))
}

fn solve_with_start(
    problem: &LpProblem,
    config: &SolverConfig,
    start: Option<&[usize]>,
) -> Result<LpSolution> {
    if !(config.feas_tol > 0.0 && config.opt_tol > 0.0) {
        return Err(CapsetError::InvalidParam("tolerances must be positive".into()));
    }
    let (m, n) = problem.constraint_matrix.shape();

    let mut columns = Vec::with_capacity(n);
    let mut width = 0;
    for &lower in &problem.lower_bounds {
        if lower == f64::NEG_INFINITY {
            columns.push(Column::Split {
                pos: width,
                neg: width + 1,
            });
            width += 2;
        } else {
            columns.push(Column::Shifted { col: width, lower });
            width += 1;
        }
    }

    let mut a = DMatrix::zeros(m, width);
    let mut b = problem.rhs.clone();
    let mut c = vec![0.0; width];
    for (j, column) in columns.iter().enumerate() {
        let source = problem.constraint_matrix.column(j);
        match *column {
            Column::Shifted { col, lower } => {
                a.set_column(col, &source);
                c[col] = problem.objective[j];
                if lower != 0.0 {
                    for (bi, aij) in b.iter_mut().zip(source.iter()) {
                        *bi -= aij * lower;
                    }
                }
            }
            Column::Split { pos, neg } => {
                a.set_column(pos, &source);
                a.set_column(neg, &(-source));
                c[pos] = problem.objective[j];
                c[neg] = -problem.objective[j];
            }
        }
    }
    for (i, bi) in b.iter_mut().enumerate() {
        if *bi < 0.0 {
            *bi = -*bi;
            a.row_mut(i).neg_mut();
        }
    }

    let (outcome, iterations) = Simplex::new(&a, &b, &c, config).solve(start)?;
    let (z, reduced_costs, final_basis) = match outcome {
        Outcome::Infeasible => return Ok(LpSolution::without_point(LpStatus::Infeasible, iterations)),
        Outcome::Unbounded => return Ok(LpSolution::without_point(LpStatus::Unbounded, iterations)),
        Outcome::Optimal {
            x,
            reduced_costs,
            basis,
        } => (x, reduced_costs, basis),
    };
    let has_split = columns.iter().any(|c| matches!(c, Column::Split { .. }));
    let basis = (!has_split).then_some(final_basis).flatten();

    let x: Vec<f64> = columns
        .iter()
        .map(|column| match *column {
            Column::Shifted { col, lower } => z[col] + lower,
            Column::Split { pos, neg } => z[pos] - z[neg],
        })
        .collect();
    let value = problem
        .objective
        .iter()
        .zip(&x)
        .map(|(c, v)| c * v)
        .sum();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        optimizer: Some(x),
        objective_value: Some(value),
        reduced_costs: Some(reduced_costs),
        basis,
        iterations,
    })
}
