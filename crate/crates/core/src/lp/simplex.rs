//! Dense two-phase revised simplex for `min c'x  s.t.  Ax = b, x >= 0`.
//!
//! The basis inverse is kept explicitly and updated with elementary row
//! operations after every pivot, then rebuilt from scratch every
//! `refactor_interval` pivots and before the final optimality check.
//!
//! Both phases optionally run on a slightly shifted right-hand side so that
//! degenerate vertices (the ℓ1 null-space problems are degenerate by
//! construction) do not stall the primal pivots. Each phase's final basis is
//! then re-evaluated on the true right-hand side and repaired with dual
//! simplex pivots, which keep the reduced costs (and hence optimality)
//! intact.

use nalgebra::{DMatrix, DVector};

use super::kernels::{axpy, dot, invert};
use super::{PivotRule, SolverConfig};
use crate::error::{CapsetError, Result};

/// Result of a standard-form solve, in standard-form variables.
#[derive(Debug, Clone)]
pub(crate) enum Outcome {
    Optimal {
        x: Vec<f64>,
        reduced_costs: Vec<f64>,
        /// `None` if an artificial is still basic (dependent rows).
        basis: Option<Vec<usize>>,
    },
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    One,
    Two,
}

pub(crate) struct Simplex<'a> {
    a: &'a DMatrix<f64>,
    /// Right-hand side the basic values are computed from (perturbed during
    /// phase two).
    b: DVector<f64>,
    b_true: DVector<f64>,
    c: &'a [f64],
    m: usize,
    n: usize,
    /// Variable index held by each basis row. Indices `>= n` are artificials.
    basis: Vec<usize>,
    /// Row position of each variable in the basis, `usize::MAX` if nonbasic.
    position: Vec<usize>,
    binv: DMatrix<f64>,
    xb: DVector<f64>,
    config: &'a SolverConfig,
    /// Columns `n/2..n` are the negatives of columns `0..n/2`.
    mirrored: bool,
    max_iterations: usize,
    pub(crate) iterations: usize,
    since_refactor: usize,
    degenerate_run: usize,
    bland_active: bool,
    /// `y` holds `B^-T c_B` for `y_phase` (kept current across primal pivots).
    y_valid: bool,
    y_phase: Phase,
    // scratch
    cb: DVector<f64>,
    y: DVector<f64>,
    aty: DVector<f64>,
    alpha: DVector<f64>,
    /// Reduced costs of the structural columns for `d_phase`, updated along
    /// pivot rows inside `run_phase`.
    d: Vec<f64>,
    d_valid: bool,
    d_fresh: bool,
    d_phase: Phase,
    /// Devex reference weights.
    weights: Vec<f64>,
    rho: DVector<f64>,
    row_alpha: DVector<f64>,
}

impl<'a> Simplex<'a> {
    pub(crate) fn new(
        a: &'a DMatrix<f64>,
        b: &[f64],
        c: &'a [f64],
        config: &'a SolverConfig,
    ) -> Self {
        let (m, n) = a.shape();
        let max_iterations = config.max_iterations.unwrap_or(50 * (m + n));
        let h = n / 2;
        let mirrored = n % 2 == 0
            && n > 0
            && (0..h).all(|j| a.column(j).iter().zip(a.column(h + j).iter()).all(|(p, q)| *p == -*q));
        Simplex {
            a,
            b: DVector::from_column_slice(b),
            b_true: DVector::from_column_slice(b),
            c,
            m,
            n,
            basis: Vec::with_capacity(m),
            position: vec![usize::MAX; n + m],
            binv: DMatrix::identity(m, m),
            xb: DVector::zeros(m),
            config,
            mirrored,
            max_iterations,
            iterations: 0,
            since_refactor: 0,
            degenerate_run: 0,
            bland_active: config.pivot_rule == PivotRule::Bland,
            y_valid: false,
            y_phase: Phase::One,
            cb: DVector::zeros(m),
            y: DVector::zeros(m),
            aty: DVector::zeros(n),
            alpha: DVector::zeros(m),
            d: vec![0.0; n],
            d_valid: false,
            d_fresh: false,
            d_phase: Phase::One,
            weights: vec![1.0; n],
            rho: DVector::zeros(m),
            row_alpha: DVector::zeros(n),
        }
    }

    fn artificial_start(&mut self) {
        let n = self.n;
        self.basis.clear();
        self.position.iter_mut().for_each(|p| *p = usize::MAX);
        for i in 0..self.m {
            self.basis.push(n + i);
            self.position[n + i] = i;
        }
        self.binv = DMatrix::identity(self.m, self.m);
        self.b.copy_from(&self.b_true);
        self.xb.copy_from(&self.b);
    }

    /// Installs `start` as the basis if it is a valid, invertible and primal
    /// feasible choice of structural columns.
    fn try_warm_start(&mut self, start: &[usize]) -> bool {
        if start.len() != self.m || start.iter().any(|&j| j >= self.n) {
            return false;
        }
        self.position.iter_mut().for_each(|p| *p = usize::MAX);
        for (row, &var) in start.iter().enumerate() {
            if self.position[var] != usize::MAX {
                return false;
            }
            self.position[var] = row;
        }
        self.basis = start.to_vec();
        if self.refactor().is_err() {
            return false;
        }
        self.xb.iter().all(|v| *v >= -self.config.feas_tol)
    }

    pub(crate) fn solve(mut self, start: Option<&[usize]>) -> Result<(Outcome, usize)> {
        let (m, n) = (self.m, self.n);
        debug_assert!(self.b.iter().all(|v| *v >= 0.0));
        let warm = m > 0 && start.is_some_and(|s| self.try_warm_start(s));
        if !warm {
            self.artificial_start();
        }
        let perturbed = self.config.perturb && m > 0;
        if perturbed && !warm {
            let scale = 1e-7 * self.b_true.amax().max(1.0);
            for i in 0..m {
                self.b[i] += scale * (1.0 + unit_hash(i));
            }
        }
        if !warm {
            self.xb.copy_from(&self.b);
        }

        if m > 0 && !warm {
            // Phase one is bounded below by zero, so "unbounded" cannot occur.
            let unbounded = "phase one reported an unbounded ray";
            if !self.run_phase(Phase::One, !perturbed)? {
                return Err(self.failure(unbounded));
            }
            if perturbed {
                self.restore_rhs();
                self.dual_cleanup(Phase::One)?;
                if !self.run_phase(Phase::One, true)? {
                    return Err(self.failure(unbounded));
                }
            }
            if self.since_refactor > 0 {
                self.refactor()?;
            }
            let infeasibility = self
                .basis
                .iter()
                .zip(self.xb.iter())
                .filter(|(v, _)| **v >= n)
                .map(|(_, x)| x.abs())
                .fold(0.0, f64::max);
            if infeasibility > self.config.feas_tol {
                return Ok((Outcome::Infeasible, self.iterations));
            }
            self.drive_out_artificials()?;
        }

        self.bland_active = self.config.pivot_rule == PivotRule::Bland;
        self.degenerate_run = 0;
        if perturbed {
            self.perturb_rhs();
        }
        if !self.run_phase(Phase::Two, !perturbed)? {
            return Ok((Outcome::Unbounded, self.iterations));
        }
        if perturbed {
            self.restore_rhs();
            self.dual_cleanup(Phase::Two)?;
            if !self.run_phase(Phase::Two, true)? {
                return Ok((Outcome::Unbounded, self.iterations));
            }
        }

        let mut x = vec![0.0; n];
        for (row, &var) in self.basis.iter().enumerate() {
            if var < n {
                let v = self.xb[row];
                x[var] = if v < 0.0 && v > -self.config.feas_tol { 0.0 } else { v };
            }
        }
        let reduced_costs = self.reduced_costs(Phase::Two);
        let basis = self.basis.iter().all(|&v| v < n).then(|| self.basis.clone());
        Ok((
            Outcome::Optimal {
                x,
                reduced_costs,
                basis,
            },
            self.iterations,
        ))
    }

    fn failure(&self, context: &str) -> CapsetError {
        CapsetError::NumericalFailure {
            iterations: self.iterations,
            context: context.to_string(),
        }
    }

    fn cost(&self, var: usize, phase: Phase) -> f64 {
        match phase {
            Phase::One => {
                if var >= self.n {
                    1.0
                } else {
                    0.0
                }
            }
            Phase::Two => {
                if var >= self.n {
                    0.0
                } else {
                    self.c[var]
                }
            }
        }
    }

    /// Reduced costs of all structural columns (basic ones are ~0).
    fn reduced_costs(&mut self, phase: Phase) -> Vec<f64> {
        self.price(phase);
        (0..self.n)
            .map(|j| self.cost(j, phase) - self.aty[j])
            .collect()
    }

    /// Fills `y = B^-T c_B` and `aty = A^T y`.
    fn price(&mut self, phase: Phase) {
        if !(self.y_valid && self.y_phase == phase) {
            for (row, &var) in self.basis.iter().enumerate() {
                self.cb[row] = self.cost(var, phase);
            }
            self.binv.tr_mul_to(&self.cb, &mut self.y);
            self.y_valid = true;
            self.y_phase = phase;
        }
        tr_mul(self.a, self.mirrored, &self.y, &mut self.aty);
    }

    /// Recomputes `d` from scratch.
    fn reprice(&mut self, phase: Phase) {
        self.price(phase);
        for j in 0..self.n {
            self.d[j] = if self.position[j] == usize::MAX {
                self.cost(j, phase) - self.aty[j]
            } else {
                0.0
            };
        }
        self.d_valid = true;
        self.d_fresh = true;
        self.d_phase = phase;
    }

    fn choose_entering(&self) -> Option<usize> {
        let tol = self.config.opt_tol;
        let d = &self.d;
        if self.bland_active {
            return (0..self.n).find(|&j| d[j] < -tol && self.position[j] == usize::MAX);
        }
        let mut best: Option<usize> = None;
        if self.config.pivot_rule == PivotRule::DevexWithBlandFallback {
            let mut best_score = 0.0;
            for j in 0..self.n {
                let dj = d[j];
                if dj < -tol && self.position[j] == usize::MAX {
                    let score = dj * dj / self.weights[j];
                    if score > best_score {
                        best_score = score;
                        best = Some(j);
                    }
                }
            }
        } else {
            let mut best_d = -tol;
            for j in 0..self.n {
                if d[j] < best_d && self.position[j] == usize::MAX {
                    best_d = d[j];
                    best = Some(j);
                }
            }
        }
        best
    }

    /// Updates `d` and the Devex weights for a pivot of `entering` on `row`,
    /// before the basis changes.
    fn update_pricing(&mut self, row: usize, entering: usize) {
        let m = self.m;
        let binv = self.binv.as_slice();
        for k in 0..m {
            self.rho[k] = binv[k * m + row];
        }
        tr_mul(self.a, self.mirrored, &self.rho, &mut self.row_alpha);
        let pivot = self.alpha[row];
        let ratio = self.d[entering] / pivot;
        let wq = self.weights[entering];
        let devex = self.config.pivot_rule == PivotRule::DevexWithBlandFallback;
        let row_alpha = self.row_alpha.as_slice();
        for j in 0..self.n {
            let r = row_alpha[j];
            if r == 0.0 {
                continue;
            }
            self.d[j] -= ratio * r;
            if devex {
                let g = r / pivot;
                let w = g * g * wq;
                if w > self.weights[j] {
                    self.weights[j] = w;
                }
            }
        }
        for &var in &self.basis {
            if var < self.n {
                self.d[var] = 0.0;
            }
        }
        self.d[entering] = 0.0;
        let leaving = self.basis[row];
        if leaving < self.n {
            self.d[leaving] = -ratio;
            self.weights[leaving] = (wq / (pivot * pivot)).max(1.0);
        }
        self.d_fresh = false;
    }

    fn load_column(&mut self, var: usize) {
        if var < self.n {
            self.alpha.fill(0.0);
            let m = self.m;
            let column = self.a.column(var);
            let binv = self.binv.as_slice();
            let alpha = self.alpha.as_mut_slice();
            for (k, &s) in column.iter().enumerate() {
                if s != 0.0 {
                    axpy(alpha, s, &binv[k * m..(k + 1) * m]);
                }
            }
        } else {
            self.alpha.copy_from(&self.binv.column(var - self.n));
        }
    }

    /// Returns the leaving row, or `None` if the entering direction is an
    /// unbounded ray.
    fn ratio_test(&self, phase: Phase) -> Option<usize> {
        let ptol = self.config.pivot_tol;
        let ftol = self.config.feas_tol;
        let n = self.n;
        // Basic artificials left over from phase one must stay at zero.
        let blocks_at_zero = |row: usize| {
            phase == Phase::Two && self.basis[row] >= n && self.alpha[row].abs() > ptol
        };

        if self.bland_active {
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let ratio = if blocks_at_zero(i) {
                    0.0
                } else if self.alpha[i] > ptol {
                    self.xb[i].max(0.0) / self.alpha[i]
                } else {
                    continue;
                };
                match best {
                    Some((bi, br))
                        if br < ratio || (br == ratio && self.basis[bi] < self.basis[i]) => {}
                    _ => best = Some((i, ratio)),
                }
            }
            return best.map(|(i, _)| i);
        }

        // Harris two-pass ratio test.
        let mut theta_max = f64::INFINITY;
        for i in 0..self.m {
            if blocks_at_zero(i) {
                theta_max = 0.0;
            } else if self.alpha[i] > ptol {
                theta_max = theta_max.min((self.xb[i].max(0.0) + ftol) / self.alpha[i]);
            }
        }
        if theta_max.is_infinite() {
            return None;
        }
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.m {
            let (eligible, weight) = if blocks_at_zero(i) {
                (true, self.alpha[i].abs())
            } else if self.alpha[i] > ptol {
                (self.xb[i].max(0.0) / self.alpha[i] <= theta_max, self.alpha[i])
            } else {
                (false, 0.0)
            };
            if eligible && best.is_none_or(|(_, w)| weight > w) {
                best = Some((i, weight));
            }
        }
        best.map(|(i, _)| i)
    }

    /// Primal step length for a pivot on `row`.
    fn primal_step(&self, row: usize) -> f64 {
        if self.basis[row] >= self.n {
            self.xb[row] / self.alpha[row]
        } else {
            self.xb[row].max(0.0) / self.alpha[row]
        }
    }

    /// Basis exchange along `alpha` with step `theta`.
    fn pivot(&mut self, row: usize, entering: usize, theta: f64) {
        let pivot = self.alpha[row];
        if theta != 0.0 {
            self.xb.axpy(-theta, &self.alpha, 1.0);
        }
        self.xb[row] = theta;

        let leaving = self.basis[row];
        self.position[leaving] = usize::MAX;
        self.basis[row] = entering;
        self.position[entering] = row;

        let m = self.m;
        let alpha = self.alpha.as_slice();
        for col in 0..m {
            let column = self.binv.column_mut(col);
            let column = column.data.into_slice_mut();
            let v = column[row] / pivot;
            if v != 0.0 {
                axpy(column, -v, alpha);
            }
            column[row] = v;
        }
        self.since_refactor += 1;
        self.y_valid = false;
    }

    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let mut basis_matrix = DMatrix::zeros(m, m);
        for (row, &var) in self.basis.iter().enumerate() {
            if var < self.n {
                basis_matrix.set_column(row, &self.a.column(var));
            } else {
                basis_matrix[(var - self.n, row)] = 1.0;
            }
        }
        let inverse = invert(basis_matrix.as_mut_slice(), m, 1e-13)
            .ok_or_else(|| self.failure("singular basis during refactorization"))?;
        self.binv = DMatrix::from_vec(m, m, inverse);
        self.binv.mul_to(&self.b, &mut self.xb);
        self.since_refactor = 0;
        self.y_valid = false;
        self.d_valid = false;
        Ok(())
    }

    fn phase_one_objective(&self) -> f64 {
        self.basis
            .iter()
            .zip(self.xb.iter())
            .filter(|(v, _)| **v >= self.n)
            .map(|(_, x)| *x)
            .sum()
    }

    /// Runs pivots until optimal (`Ok(true)`) or an unbounded ray is found
    /// (`Ok(false)`).
    /// With `confirm`, optimality is re-checked against a fresh
    /// factorization before returning.
    fn run_phase(&mut self, phase: Phase, confirm: bool) -> Result<bool> {
        self.weights.iter_mut().for_each(|w| *w = 1.0);
        self.d_valid = false;
        let mut confirmed = false;
        loop {
            if self.since_refactor >= self.config.refactor_interval {
                self.refactor()?;
            }
            if phase == Phase::One && self.phase_one_objective() <= 1e-3 * self.config.feas_tol {
                return Ok(true);
            }
            if !(self.d_valid && self.d_phase == phase) {
                self.reprice(phase);
            }
            let Some(entering) = self.choose_entering() else {
                if !self.d_fresh {
                    self.reprice(phase);
                    continue;
                }
                if confirm && !confirmed && self.since_refactor > 0 {
                    confirmed = true;
                    if self.refine()? {
                        self.reprice(phase);
                        continue;
                    }
                }
                return Ok(true);
            };
            if self.iterations >= self.max_iterations {
                return Err(self.failure("iteration cap reached"));
            }
            self.iterations += 1;
            confirmed = false;

            self.load_column(entering);
            let Some(row) = self.ratio_test(phase) else {
                return Ok(false);
            };

            let theta = self.primal_step(row);
            let degenerate = theta.abs() <= self.config.feas_tol;
            self.update_pricing(row, entering);
            self.pivot(row, entering, theta);

            if degenerate {
                self.degenerate_run += 1;
                if self.config.pivot_rule != PivotRule::Bland
                    && self.degenerate_run > self.config.stall_limit
                {
                    self.bland_active = true;
                }
            } else {
                self.degenerate_run = 0;
                if self.config.pivot_rule != PivotRule::Bland {
                    self.bland_active = false;
                }
            }
        }
    }

    /// Checks the basic solution against `b`. A small residual is removed
    /// with one refinement step, a large one forces a refactorization.
    /// Returns whether anything changed.
    fn refine(&mut self) -> Result<bool> {
        let mut residual = self.b.clone();
        for (row, &var) in self.basis.iter().enumerate() {
            let v = self.xb[row];
            if var < self.n {
                residual.axpy(-v, &self.a.column(var), 1.0);
            } else {
                residual[var - self.n] -= v;
            }
        }
        let size = residual.amax();
        if size == 0.0 {
            return Ok(false);
        }
        if size > 1e-9 * self.b.amax().max(1.0) {
            self.refactor()?;
        } else {
            self.xb += &self.binv * residual;
        }
        Ok(true)
    }

    /// Shifts every structural basic value up by a small row-dependent amount,
    /// i.e. replaces `b` with `b + B eps`. Artificial rows stay at zero so
    /// that dependent rows remain consistent.
    fn perturb_rhs(&mut self) {
        let scale = 1e-7 * self.b_true.amax().max(1.0);
        for (row, &var) in self.basis.iter().enumerate() {
            if var < self.n {
                let eps = scale * (1.0 + unit_hash(row));
                self.b.axpy(eps, &self.a.column(var), 1.0);
                self.xb[row] += eps;
            }
        }
    }

    /// Switches back to the true right-hand side, recomputing basic values
    /// with the current inverse.
    fn restore_rhs(&mut self) {
        self.b.copy_from(&self.b_true);
        self.binv.mul_to(&self.b, &mut self.xb);
    }

    /// Dual simplex pivots until every basic value is `>= -feas_tol`. The
    /// basis is dual feasible for `phase` on entry (it was optimal for a
    /// shifted rhs). Artificials may re-enter only in phase one.
    fn dual_cleanup(&mut self, phase: Phase) -> Result<()> {
        let (ftol, ptol, otol) = (self.config.feas_tol, self.config.pivot_tol, self.config.opt_tol);
        let candidates = match phase {
            Phase::One => self.n + self.m,
            Phase::Two => self.n,
        };
        let mut row_alpha = DVector::zeros(self.n);
        loop {
            if self.since_refactor >= self.config.refactor_interval {
                self.refactor()?;
            }
            let mut leave: Option<(usize, f64)> = None;
            for row in 0..self.m {
                let v = self.xb[row];
                if v < -ftol && leave.is_none_or(|(_, lv)| v < lv) {
                    leave = Some((row, v));
                }
            }
            let Some((row, _)) = leave else {
                return Ok(());
            };
            if self.iterations >= self.max_iterations {
                return Err(self.failure("iteration cap reached in dual cleanup"));
            }
            self.iterations += 1;

            self.price(phase);
            let rho = self.binv.row(row).transpose();
            tr_mul(self.a, self.mirrored, &rho, &mut row_alpha);
            let n = self.n;
            let entry = |j: usize| if j < n { row_alpha[j] } else { rho[j - n] };
            let eligible = |j: usize| self.position[j] == usize::MAX && entry(j) < -ptol;
            let reduced = |j: usize| {
                let priced = if j < n { self.aty[j] } else { self.y[j - n] };
                (self.cost(j, phase) - priced).max(0.0)
            };
            let mut theta_max = f64::INFINITY;
            for j in (0..candidates).filter(|&j| eligible(j)) {
                theta_max = theta_max.min((reduced(j) + otol) / -entry(j));
            }
            if theta_max.is_infinite() {
                return Err(self.failure("dual cleanup found no entering column"));
            }
            let mut best: Option<(usize, f64)> = None;
            for j in (0..candidates).filter(|&j| eligible(j)) {
                let weight = -entry(j);
                if reduced(j) / weight <= theta_max && best.is_none_or(|(_, w)| weight > w) {
                    best = Some((j, weight));
                }
            }
            let (entering, _) = best.expect("theta_max is finite");
            self.load_column(entering);
            let theta = self.xb[row] / self.alpha[row];
            self.pivot(row, entering, theta);
        }
    }

    /// Pivots basic artificials (all at zero after a feasible phase one) out
    /// of the basis where a structural column allows it. Artificials that
    /// cannot leave mark linearly dependent rows and stay at zero.
    fn drive_out_artificials(&mut self) -> Result<()> {
        let drive_tol = self.config.pivot_tol.max(1e-7);
        for row in 0..self.m {
            if self.basis[row] < self.n {
                continue;
            }
            let rho = self.binv.row(row).transpose();
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.n {
                if self.position[j] != usize::MAX {
                    continue;
                }
                let v = rho.dot(&self.a.column(j)).abs();
                if v > drive_tol && best.is_none_or(|(_, bv)| v > bv) {
                    best = Some((j, v));
                }
            }
            if let Some((j, _)) = best {
                self.load_column(j);
                let theta = self.primal_step(row);
                self.pivot(row, j, theta);
                self.iterations += 1;
            }
        }
        self.refactor()
    }
}

/// `out = A' v`, computing only the first half when the second half of the
/// columns mirrors it.
fn tr_mul(a: &DMatrix<f64>, mirrored: bool, v: &DVector<f64>, out: &mut DVector<f64>) {
    let m = a.nrows();
    let data = a.as_slice();
    let v = v.as_slice();
    let h = if mirrored { a.ncols() / 2 } else { a.ncols() };
    for j in 0..h {
        let value = dot(&data[j * m..(j + 1) * m], v);
        out[j] = value;
        if mirrored {
            out[h + j] = -value;
        }
    }
}

/// Deterministic value in `[0, 1)` per row, so shifted rows rarely tie.
fn unit_hash(i: usize) -> f64 {
    (splitmix(i as u64) >> 11) as f64 / (1u64 << 53) as f64
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
