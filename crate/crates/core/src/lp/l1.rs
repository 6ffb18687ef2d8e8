use nalgebra::DMatrix;

use super::{solve_lp_warm, LpProblem, LpSolution, SolverConfig};
use crate::error::{CapsetError, Result};

/// Builds `[[D, -D], [extra rows, -extra rows]]` for the split `x = u - v`.
fn split_matrix(d: &DMatrix<f64>, extra: Option<&[f64]>) -> DMatrix<f64> {
    let (n, l) = d.shape();
    let rows = n + usize::from(extra.is_some());
    let mut a = DMatrix::zeros(rows, 2 * l);
    for j in 0..l {
        for i in 0..n {
            let v = d[(i, j)];
            a[(i, j)] = v;
            a[(i, l + j)] = -v;
        }
    }
    if let Some(row) = extra {
        for (j, &v) in row.iter().enumerate() {
            a[(n, j)] = v;
            a[(n, l + j)] = -v;
        }
    }
    a
}

/// Picks `rows` linearly independent columns of the unsplit matrix `m` by
/// column-pivoted QR, or `None` when `m` is rank deficient. Oriented by
/// [`oriented_start`], any such choice is a primal feasible basis of the
/// split problem, which lets the simplex skip phase one.
pub(crate) fn independent_columns(m: &DMatrix<f64>) -> Option<Vec<usize>> {
    let mut order = pivot_order(m)?;
    order.truncate(m.nrows());
    Some(order)
}

/// All column indices of a full-row-rank `m` in column-pivoted QR order; the
/// first `m.nrows()` are linearly independent.
pub(crate) fn pivot_order(m: &DMatrix<f64>) -> Option<Vec<usize>> {
    let (rows, l) = m.shape();
    if rows > l || rows == 0 {
        return None;
    }
    let qr = m.clone().col_piv_qr();
    let r = qr.r();
    let scale = r[(0, 0)].abs();
    if scale == 0.0 || (0..rows).any(|i| r[(i, i)].abs() <= 1e-10 * scale) {
        return None;
    }
    let mut order = DMatrix::from_fn(1, l, |_, j| j as f64);
    qr.p().permute_columns(&mut order);
    Some(order.iter().map(|&v| v as usize).collect())
}

/// Orients the hinted columns (`j` or `L + j`, taken modulo `L`) by the sign
/// of their basic solution. `None` if the hint is not a nonsingular square
/// basis.
fn oriented_start(problem: &LpProblem, l: usize, start: &[usize]) -> Option<Vec<usize>> {
    let a = problem.constraint_matrix();
    if start.len() != a.nrows() {
        return None;
    }
    let mut columns: Vec<usize> = start.iter().map(|&j| j % l).collect();
    let mut seen = vec![false; l];
    for &j in &columns {
        if std::mem::replace(&mut seen[j], true) {
            return None;
        }
    }
    let xb = a
        .select_columns(&columns)
        .lu()
        .solve(&nalgebra::DVector::from_column_slice(problem.rhs()))?;
    if !xb.iter().all(|v| v.is_finite()) {
        return None;
    }
    for (j, v) in columns.iter_mut().zip(xb.iter()) {
        if *v < 0.0 {
            *j += l;
        }
    }
    Some(columns)
}

/// Maps a split-variable solution back to `x = u - v`, with `objective_value`
/// equal to `||x||_1`.
fn merge_split(mut solution: LpSolution, l: usize) -> LpSolution {
    if let Some(z) = solution.optimizer.take() {
        let x: Vec<f64> = (0..l).map(|j| z[j] - z[l + j]).collect();
        solution.objective_value = Some(x.iter().map(|v| v.abs()).sum());
        solution.optimizer = Some(x);
    }
    solution
}

/// `argmin ||x||_1  s.t.  Dx = 0,  sum_{(k, c) in fixed} c * x_k = target`.
///
/// An `Infeasible` status is a normal outcome: it means the linear
/// functional vanishes on the null space of `D`.
pub fn min_l1_nullspace(
    d: &DMatrix<f64>,
    fixed: &[(usize, f64)],
    target: f64,
    config: &SolverConfig,
) -> Result<LpSolution> {
    min_l1_nullspace_warm(d, fixed, target, config, None)
}

/// [`min_l1_nullspace`] with an optional starting basis: one column index
/// per row of `[D; fixed]`, in split-variable numbering (`j` for `u_j`,
/// `L + j` for `v_j`) or plain column numbers. Each hinted column is oriented
/// by the sign of the basic solution, so any nonsingular choice is primal
/// feasible. An unusable hint falls back to a QR crash basis and then to a
/// cold start; the optimum is unaffected.
pub fn min_l1_nullspace_warm(
    d: &DMatrix<f64>,
    fixed: &[(usize, f64)],
    target: f64,
    config: &SolverConfig,
    start: Option<&[usize]>,
) -> Result<LpSolution> {
    let (n, l) = d.shape();
    if fixed.is_empty() {
        return Err(CapsetError::InvalidParam("no fixed coordinates".into()));
    }
    if target == 0.0 || !target.is_finite() {
        return Err(CapsetError::InvalidParam(format!(
            "target must be finite and nonzero, got {target}"
        )));
    }
    let mut functional = vec![0.0; l];
    for &(k, coefficient) in fixed {
        if k >= l {
            return Err(CapsetError::InvalidParam(format!(
                "fixed index {k} out of range for {l} columns"
            )));
        }
        functional[k] += coefficient;
    }
    let a = split_matrix(d, Some(&functional));
    let mut rhs = vec![0.0; n + 1];
    rhs[n] = target;
    let problem = LpProblem::nonnegative(vec![1.0; 2 * l], a, rhs)?;
    let crash = start
        .and_then(|s| oriented_start(&problem, l, s))
        .or_else(|| {
            let columns = independent_columns(&problem.constraint_matrix().columns(0, l).into_owned())?;
            oriented_start(&problem, l, &columns)
        })
        .unwrap_or_default();
    Ok(merge_split(solve_lp_warm(&problem, config, &crash)?, l))
}

/// Basis Pursuit: `argmin ||a||_1  s.t.  Da = s`.
pub fn basis_pursuit(d: &DMatrix<f64>, s: &[f64], config: &SolverConfig) -> Result<LpSolution> {
    let (n, l) = d.shape();
    if s.len() != n {
        return Err(CapsetError::InvalidParam(format!(
            "signal has length {} but the dictionary has {n} rows",
            s.len()
        )));
    }
    let a = split_matrix(d, None);
    let problem = LpProblem::nonnegative(vec![1.0; 2 * l], a, s.to_vec())?;
    let start = independent_columns(d)
        .and_then(|columns| oriented_start(&problem, l, &columns))
        .unwrap_or_default();
    Ok(merge_split(solve_lp_warm(&problem, config, &start)?, l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::LpStatus;
    use approx::assert_abs_diff_eq;

    fn identity_pair(n: usize) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(n, 2 * n);
        for i in 0..n {
            d[(i, i)] = 1.0;
            d[(i, n + i)] = 1.0;
        }
        d
    }

    #[test]
    fn duplicated_identity_null_vector() {
        let d = identity_pair(2);
        let s = min_l1_nullspace(&d, &[(0, 1.0)], 1.0, &SolverConfig::default()).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_abs_diff_eq!(s.objective_value.unwrap(), 2.0, epsilon = 1e-12);
        let x = s.optimizer.unwrap();
        let expected = [1.0, 0.0, -1.0, 0.0];
        for (a, b) in x.iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_row_null_space() {
        let d = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let s = min_l1_nullspace(&d, &[(1, 1.0)], 1.0, &SolverConfig::default()).unwrap();
        assert_abs_diff_eq!(s.objective_value.unwrap(), 1.0, epsilon = 1e-12);
        let x = s.optimizer.unwrap();
        assert_abs_diff_eq!(x[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn trivial_null_space_is_infeasible() {
        let d = DMatrix::identity(3, 3);
        let s = min_l1_nullspace(&d, &[(0, 1.0)], 1.0, &SolverConfig::default()).unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
    }

    #[test]
    fn argument_validation() {
        let d = identity_pair(2);
        let cfg = SolverConfig::default();
        assert!(min_l1_nullspace(&d, &[], 1.0, &cfg).is_err());
        assert!(min_l1_nullspace(&d, &[(0, 1.0)], 0.0, &cfg).is_err());
        assert!(min_l1_nullspace(&d, &[(4, 1.0)], 1.0, &cfg).is_err());
        assert!(basis_pursuit(&d, &[1.0], &cfg).is_err());
    }

    #[test]
    fn basis_pursuit_on_duplicated_identity() {
        let d = identity_pair(2);
        let s = basis_pursuit(&d, &[1.0, 0.0], &SolverConfig::default()).unwrap();
        assert_abs_diff_eq!(s.objective_value.unwrap(), 1.0, epsilon = 1e-12);
        let x = s.optimizer.unwrap();
        assert_abs_diff_eq!(x[0] + x[2], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[3], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn basis_pursuit_zero_signal() {
        let d = DMatrix::identity(3, 3);
        let s = basis_pursuit(&d, &[0.0; 3], &SolverConfig::default()).unwrap();
        assert!(s.optimizer.unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn basis_pursuit_orthonormal_square() {
        // Rotation by 30 degrees.
        let (c, s) = (30f64.to_radians().cos(), 30f64.to_radians().sin());
        let d = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let signal = [0.3, -1.7];
        let sol = basis_pursuit(&d, &signal, &SolverConfig::default()).unwrap();
        let expected = d.transpose() * nalgebra::DVector::from_column_slice(&signal);
        for (a, b) in sol.optimizer.unwrap().iter().zip(expected.iter()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
        }
    }
}
