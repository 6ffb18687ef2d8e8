//! Monte-Carlo estimators over random supports: the greedy pairing sampler
//! on `Q`, the empirical Basis Pursuit test, and the variance comparison
//! between the support statistics and their i.i.d. counterparts.
//!
//! Every trial draws from its own stream `trial_rng(seed, ℓ, t)`, so results
//! are identical for any thread count.

mod oracle;

pub use oracle::{
    oracle_sign_pattern_test, oracle_sweep, oracle_val_c_gamma, OracleSweepConfig,
    OracleSweepReport, OracleViolation, ORACLE_MAX_SUPPORT,
};

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::bounds::{strictly_below, EstimationFunction};
use crate::capacity::{CapacityMatrix, CapacityVector};
use crate::dictionary::Dictionary;
use crate::error::{CapsetError, Result};
use crate::lp::{basis_pursuit, LpStatus, SolverConfig};
use crate::rng::{derive_seed, trial_rng};

/// Sorted set of distinct atom indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Support {
    indices: Vec<usize>,
}

impl Support {
    pub fn new(mut indices: Vec<usize>, l: usize) -> Result<Self> {
        indices.sort_unstable();
        if let Some(&k) = indices.iter().find(|&&k| k >= l) {
            return Err(CapsetError::InvalidParam(format!("index {k} out of range for L={l}")));
        }
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(CapsetError::InvalidParam("support indices must be distinct".into()));
        }
        Ok(Support { indices })
    }

    /// Uniform `size`-subset of `0..l`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, l: usize, size: usize) -> Self {
        let mut indices = index::sample(rng, l, size).into_vec();
        indices.sort_unstable();
        Support { indices }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn capacity_sum(&self, q: &CapacityVector) -> f64 {
        self.indices.iter().map(|&k| q.get(k)).sum()
    }
}

/// Disjoint pairs covering an even support.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairPartition {
    pub pairs: Vec<(usize, usize)>,
}

impl PairPartition {
    /// Checks that `pairs` are disjoint, ordered `(i < j)` and cover `support`.
    pub fn new(pairs: Vec<(usize, usize)>, support: &Support) -> Result<Self> {
        if support.len() % 2 == 1 {
            return Err(CapsetError::OddSupport(support.len()));
        }
        let mut covered: Vec<usize> = pairs.iter().flat_map(|&(i, j)| [i, j]).collect();
        covered.sort_unstable();
        if pairs.iter().any(|&(i, j)| i >= j) || covered != support.indices {
            return Err(CapsetError::InvalidParam(format!(
                "pairs {pairs:?} do not partition the support {:?}",
                support.indices
            )));
        }
        Ok(PairPartition { pairs })
    }

    pub fn sum(&self, qm: &CapacityMatrix) -> f64 {
        self.pairs.iter().map(|&(i, j)| qm.get(i, j)).sum()
    }
}

/// Couple of disjoint pairs as `(i0, j0, i1, j1)` with `i < j` inside each
/// pair and `(i0, j0) < (i1, j1)`.
type Couple = (usize, usize, usize, usize);

fn couple(a: (usize, usize), b: (usize, usize)) -> Couple {
    let a = (a.0.min(a.1), a.0.max(a.1));
    let b = (b.0.min(b.1), b.0.max(b.1));
    let (p, r) = if a <= b { (a, b) } else { (b, a) };
    (p.0, p.1, r.0, r.1)
}

fn better(candidate: (f64, Couple), best: Option<(f64, Couple)>) -> bool {
    match best {
        None => true,
        Some((s, c)) => candidate.0 < s || (candidate.0 == s && candidate.1 < c),
    }
}

/// Repeatedly removes the couple of disjoint pairs with the least summed
/// `Q` from the support; with two indices left they form the last pair.
///
/// The search is pruned with the cheapest single pair `(x, y)`: an optimal
/// couple either contains it, or (if it contains neither `x` nor `y` in the
/// same pair) has the form `(x, u), (y, v)`, since otherwise swapping in
/// `(x, y)` does not increase the sum. Ties go to the lexicographically
/// smallest `(i0, j0, i1, j1)` among the examined candidates. Debug builds
/// compare each step with a full search for small supports.
pub fn greedy_pair_partition(qm: &CapacityMatrix, support: &Support) -> Result<PairPartition> {
    if support.len() % 2 == 1 {
        return Err(CapsetError::OddSupport(support.len()));
    }
    let (pairs, _) = greedy_core(qm, support.indices(), f64::INFINITY);
    Ok(PairPartition { pairs })
}

/// Greedy pairing sum, stopping as soon as it reaches `limit`. Returns the
/// pairs chosen so far and the running sum.
fn greedy_core(qm: &CapacityMatrix, idx: &[usize], limit: f64) -> (Vec<(usize, usize)>, f64) {
    let l = idx.len();
    let w = |a: usize, b: usize| qm.get(idx[a], idx[b]);
    let mut sorted: Vec<(f64, usize, usize)> = Vec::with_capacity(l * l.saturating_sub(1) / 2);
    for a in 0..l {
        for b in a + 1..l {
            sorted.push((w(a, b), a, b));
        }
    }
    sorted.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));

    let mut alive = vec![true; l];
    let mut remaining = l;
    let mut cursor = 0;
    let mut pairs = Vec::with_capacity(l / 2);
    let mut total = 0.0;
    while remaining >= 4 {
        while !(alive[sorted[cursor].1] && alive[sorted[cursor].2]) {
            cursor += 1;
        }
        let (wxy, x, y) = sorted[cursor];

        // Couples containing (x, y).
        let (w1, c, d) = *sorted[cursor + 1..]
            .iter()
            .find(|&&(_, a, b)| alive[a] && alive[b] && a != x && a != y && b != x && b != y)
            .expect("at least four live indices");
        let mut best = (wxy + w1, couple((x, y), (c, d)));

        // Couples (x, u), (y, v).
        let two_best = |anchor: usize| {
            let mut first: Option<(f64, usize)> = None;
            let mut second: Option<(f64, usize)> = None;
            for u in (0..l).filter(|&u| alive[u] && u != x && u != y) {
                let v = w(anchor, u);
                if first.is_none_or(|(f, _)| v < f) {
                    second = first;
                    first = Some((v, u));
                } else if second.is_none_or(|(s, _)| v < s) {
                    second = Some((v, u));
                }
            }
            (first.expect("live partner"), second.expect("live partner"))
        };
        let ((wu1, u1), (wu2, u2)) = two_best(x);
        let ((wv1, v1), (wv2, v2)) = two_best(y);
        let options = if u1 != v1 {
            vec![(wu1 + wv1, u1, v1)]
        } else {
            vec![(wu1 + wv2, u1, v2), (wu2 + wv1, u2, v1)]
        };
        for (sum, u, v) in options {
            let candidate = (sum, couple((x, u), (y, v)));
            if better(candidate, Some(best)) {
                best = candidate;
            }
        }

        #[cfg(debug_assertions)]
        if l <= 24 {
            let full = full_couple_search(&alive, &w);
            debug_assert!(
                (full - best.0).abs() <= 1e-12 * (1.0 + full.abs()),
                "pruned couple sum {} differs from full search {full}",
                best.0
            );
        }

        let (i0, j0, i1, j1) = best.1;
        for k in [i0, j0, i1, j1] {
            alive[k] = false;
        }
        pairs.push((idx[i0], idx[j0]));
        pairs.push((idx[i1], idx[j1]));
        total += best.0;
        remaining -= 4;
        if total >= limit {
            return (pairs, total);
        }
    }
    if remaining == 2 {
        let mut rest = (0..l).filter(|&k| alive[k]);
        let (a, b) = (rest.next().unwrap(), rest.next().unwrap());
        pairs.push((idx[a], idx[b]));
        total += w(a, b);
    }
    (pairs, total)
}

#[cfg(debug_assertions)]
fn full_couple_search(alive: &[bool], w: &impl Fn(usize, usize) -> f64) -> f64 {
    let live: Vec<usize> = (0..alive.len()).filter(|&k| alive[k]).collect();
    let mut best = f64::INFINITY;
    for (p, &a) in live.iter().enumerate() {
        for &b in &live[p + 1..] {
            for (r, &c) in live.iter().enumerate() {
                for &d in &live[r + 1..] {
                    if c != a && c != b && d != a && d != b {
                        best = best.min(w(a, b) + w(c, d));
                    }
                }
            }
        }
    }
    best
}

/// Largest support accepted by [`optimal_matching`].
pub const MATCHING_MAX_SUPPORT: usize = 16;

/// Minimum-sum perfect matching by enumerating all `(ℓ−1)!!` partitions.
pub fn optimal_matching(qm: &CapacityMatrix, support: &Support) -> Result<(PairPartition, f64)> {
    let idx = support.indices();
    if idx.len() % 2 == 1 {
        return Err(CapsetError::OddSupport(idx.len()));
    }
    if idx.len() > MATCHING_MAX_SUPPORT {
        return Err(CapsetError::TooLarge {
            size: idx.len(),
            cap: MATCHING_MAX_SUPPORT,
        });
    }
    let mut best = (f64::INFINITY, Vec::new());
    for_each_matching(idx, &mut Vec::new(), &mut |pairs| {
        let sum: f64 = pairs.iter().map(|&(i, j)| qm.get(i, j)).sum();
        if sum < best.0 {
            best = (sum, pairs.to_vec());
        }
    });
    Ok((PairPartition { pairs: best.1 }, best.0))
}

/// Calls `f` on every perfect matching of `rest` (pairs ordered `(i < j)`
/// when `rest` is sorted).
pub fn for_each_matching(
    rest: &[usize],
    current: &mut Vec<(usize, usize)>,
    f: &mut impl FnMut(&[(usize, usize)]),
) {
    if rest.is_empty() {
        f(current);
        return;
    }
    let first = rest[0];
    for k in 1..rest.len() {
        current.push((first, rest[k]));
        let others: Vec<usize> = rest[1..]
            .iter()
            .enumerate()
            .filter(|(p, _)| p + 1 != k)
            .map(|(_, v)| *v)
            .collect();
        for_each_matching(&others, current, f);
        current.pop();
    }
}

/// One Monte-Carlo trial, kept for audit logs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub ell: usize,
    pub trial: usize,
    /// Seed of the trial's own stream.
    pub seed: u64,
    pub support: Support,
    /// Pairing sum, capacity sum, or 1/0 for recovery.
    pub statistic: f64,
}

pub fn write_trial_log(path: impl AsRef<Path>, records: &[TrialRecord]) -> Result<()> {
    let mut out = String::from("ell,trial,seed,statistic,support\n");
    for r in records {
        let support: Vec<String> = r.support.indices().iter().map(usize::to_string).collect();
        let _ = writeln!(out, "{},{},{},{:.17e},{}", r.ell, r.trial, r.seed, r.statistic, support.join(" "));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Greedy pairing sums of `samples` uniform supports of size `ell`. Sums
/// are cut short once they reach ½ (the statistic then only shows that
/// the support failed).
pub fn comp_b_trials(qm: &CapacityMatrix, ell: usize, samples: usize, seed: u64) -> Result<Vec<TrialRecord>> {
    let l = qm.size();
    if ell % 2 == 1 {
        return Err(CapsetError::OddSupport(ell));
    }
    if ell == 0 || ell > l {
        return Err(CapsetError::InvalidParam(format!("support size {ell} not in 1..={l}")));
    }
    Ok((0..samples)
        .into_par_iter()
        .map(|t| {
            let support = Support::random(&mut trial_rng(seed, ell as u64, t as u64), l, ell);
            let statistic = if pairing_lower_bound(qm, support.indices()) >= 0.5 {
                f64::INFINITY
            } else {
                greedy_core(qm, support.indices(), 0.5).1
            };
            TrialRecord {
                ell,
                trial: t,
                seed: derive_seed(seed, ell as u64, t as u64),
                support,
                statistic,
            }
        })
        .collect())
}

/// `½ Σ_k min_{j≠k} Q_kj` over the support, a lower bound on every pairing sum.
fn pairing_lower_bound(qm: &CapacityMatrix, idx: &[usize]) -> f64 {
    let mut total = 0.0;
    for &k in idx {
        let nearest = idx
            .iter()
            .filter(|&&j| j != k)
            .map(|&j| qm.get(k, j))
            .fold(f64::INFINITY, f64::min);
        total += nearest;
    }
    0.5 * total
}

/// Fraction of sampled even-sized supports whose greedy pairing sum is
/// below ½; odd `ℓ` repeat `ℓ − 1` and are flagged.
pub fn ef_comp_b(qm: &CapacityMatrix, samples: usize, seed: u64) -> Result<EstimationFunction> {
    if samples == 0 {
        return Err(CapsetError::InvalidParam("need at least one sample".into()));
    }
    let l = qm.size();
    let min_q = qm.packed().iter().copied().fold(f64::INFINITY, f64::min);
    let mut values = vec![0.0; l];
    for ell in (2..=l).step_by(2) {
        // Every pairing sum is at least (ℓ/2) min Q.
        if (ell / 2) as f64 * min_q >= 0.5 {
            break;
        }
        let trials = comp_b_trials(qm, ell, samples, seed)?;
        let passed = trials.iter().filter(|r| strictly_below(r.statistic, 0.5)).count();
        values[ell - 1] = passed as f64 / samples as f64;
    }
    Ok(EstimationFunction::new("EF-compB", values)?
        .fill_odd_from_even()
        .with_param("samples", samples as f64)
        .with_param("seed", seed as f64)
        .with_param("E_Q", qm.mean())
        .with_param("var_Q", qm.variance()))
}

/// Distribution of the nonzero coefficients in the empirical test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoeffModel {
    /// I.i.d. standard normal, redrawn while any `|α_k| < 1e-6`.
    #[default]
    GaussianNonzeros,
    /// Uniform random signs `±1`.
    UnitSigns,
}

#[derive(Debug, Clone)]
pub struct EmpiricalConfig {
    pub samples: usize,
    pub seed: u64,
    pub coeff_model: CoeffModel,
    /// Magnitude above which a recovered coefficient counts as nonzero, and
    /// the largest accepted coefficient error.
    pub atol: f64,
    /// Stop after this many consecutive support sizes with no success and
    /// report 0 (flagged as interpolated) for the rest.
    pub zero_run: usize,
    pub solver: SolverConfig,
}

impl Default for EmpiricalConfig {
    fn default() -> Self {
        EmpiricalConfig {
            samples: 1000,
            seed: 0,
            coeff_model: CoeffModel::GaussianNonzeros,
            atol: 1e-6,
            zero_run: 3,
            solver: SolverConfig::default(),
        }
    }
}

/// Outcome counts for one support size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RecoveryRate {
    pub successes: usize,
    /// Trials whose LP did not solve; excluded from the rate.
    pub lp_failures: usize,
    pub trials: usize,
}

impl RecoveryRate {
    pub fn rate(&self) -> f64 {
        let valid = self.trials - self.lp_failures;
        if valid == 0 {
            0.0
        } else {
            self.successes as f64 / valid as f64
        }
    }
}

fn draw_coefficients<R: Rng + ?Sized>(rng: &mut R, ell: usize, model: CoeffModel) -> Vec<f64> {
    match model {
        CoeffModel::GaussianNonzeros => loop {
            let alpha: Vec<f64> = (0..ell).map(|_| StandardNormal.sample(rng)).collect();
            if alpha.iter().all(|a: &f64| a.abs() >= 1e-6) {
                return alpha;
            }
        },
        CoeffModel::UnitSigns => (0..ell)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect(),
    }
}

/// Solves Basis Pursuit for `s = D α` and reports whether `α` came back:
/// same support at `atol` and max-norm error at most `atol`.
/// `Err` only for LP failures.
pub fn bp_recovers(
    dict: &Dictionary,
    support: &Support,
    coefficients: &[f64],
    atol: f64,
    solver: &SolverConfig,
) -> Result<bool> {
    let d = dict.matrix();
    let mut s = vec![0.0; d.nrows()];
    for (&k, &a) in support.indices().iter().zip(coefficients) {
        for (si, dk) in s.iter_mut().zip(d.column(k).iter()) {
            *si += a * dk;
        }
    }
    let solution = basis_pursuit(d, &s, solver)?;
    if solution.status != LpStatus::Optimal {
        return Err(CapsetError::NumericalFailure {
            iterations: solution.iterations,
            context: format!("basis pursuit returned {:?}", solution.status),
        });
    }
    let x = solution.optimizer.unwrap_or_default();
    let mut expected = vec![0.0; d.ncols()];
    for (&k, &a) in support.indices().iter().zip(coefficients) {
        expected[k] = a;
    }
    Ok(x.iter().zip(&expected).all(|(xi, ei)| {
        (xi.abs() > atol) == (*ei != 0.0) && (xi - ei).abs() <= atol
    }))
}

/// Basis Pursuit success count over `config.samples` random supports of
/// size `ell`.
pub fn empirical_recovery_rate(dict: &Dictionary, ell: usize, config: &EmpiricalConfig) -> Result<RecoveryRate> {
    let l = dict.cols();
    if ell == 0 || ell > l {
        return Err(CapsetError::InvalidParam(format!("support size {ell} not in 1..={l}")));
    }
    let outcomes: Vec<Option<bool>> = (0..config.samples)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(config.seed, ell as u64, t as u64);
            let support = Support::random(&mut rng, l, ell);
            let alpha = draw_coefficients(&mut rng, ell, config.coeff_model);
            match bp_recovers(dict, &support, &alpha, config.atol, &config.solver) {
                Ok(ok) => Some(ok),
                Err(e) => {
                    log::warn!("ell={ell} trial {t}: {e}");
                    None
                }
            }
        })
        .collect();
    Ok(RecoveryRate {
        successes: outcomes.iter().filter(|o| **o == Some(true)).count(),
        lp_failures: outcomes.iter().filter(|o| o.is_none()).count(),
        trials: config.samples,
    })
}

/// Empirical recovery fraction for every `ℓ`. Sizes above `N` are 0 without
/// solving: a vertex solution has at most `N` nonzeros.
pub fn ef_empirical(dict: &Dictionary, config: &EmpiricalConfig) -> Result<EstimationFunction> {
    if config.samples == 0 {
        return Err(CapsetError::InvalidParam("need at least one sample".into()));
    }
    let (n, l) = (dict.rows(), dict.cols());
    let mut values = vec![0.0; l];
    let mut interpolated = Vec::new();
    let mut failures = 0;
    let mut zeros = 0;
    for ell in 1..=n.min(l) {
        if zeros >= config.zero_run.max(1) {
            interpolated.push(ell);
            continue;
        }
        let rate = empirical_recovery_rate(dict, ell, config)?;
        failures += rate.lp_failures;
        values[ell - 1] = rate.rate();
        zeros = if rate.successes == 0 { zeros + 1 } else { 0 };
        log::info!("EF-emp ell={ell}: {:.4}", values[ell - 1]);
    }
    let mut ef = EstimationFunction::new("EF-emp", values)?
        .with_param("samples", config.samples as f64)
        .with_param("seed", config.seed as f64)
        .with_param("lp_failures", failures as f64)
        .with_param(
            "unit_signs",
            f64::from(u8::from(config.coeff_model == CoeffModel::UnitSigns)),
        );
    ef.mark_interpolated(interpolated);
    Ok(ef)
}

/// Which statistic a variance row refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceKind {
    /// `x_ℓ = Σ_{k∈Γ} q_k` against `var(y_ℓ) = ℓσ_q²`.
    Q1,
    /// `x_ℓ = Σ_{(i,j)∈I} Q_ij` over a random pair partition `I` of `Γ`,
    /// against `var(y_ℓ) = (ℓ/2)σ_Q²`.
    Q2,
}

impl VarianceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            VarianceKind::Q1 => "q",
            VarianceKind::Q2 => "Q",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceRow {
    pub ell: usize,
    pub kind: VarianceKind,
    /// Sample mean of `x_ℓ` and its exact expectation.
    pub mean_x: f64,
    pub mean_y: f64,
    /// Unbiased sample variance of `x_ℓ`.
    pub var_x: f64,
    /// Standard error of `var_x`.
    pub var_x_se: f64,
    pub var_y: f64,
}

impl VarianceRow {
    /// `var_x − var_y` in units of the sampling error.
    pub fn excess_sigmas(&self) -> f64 {
        if self.var_x_se > 0.0 {
            (self.var_x - self.var_y) / self.var_x_se
        } else if self.var_x > self.var_y {
            f64::INFINITY
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceReport {
    pub samples: usize,
    pub seed: u64,
    pub rows: Vec<VarianceRow>,
}

impl VarianceReport {
    /// Rows where `var_x` exceeds `var_y` by more than `n_sigma` standard errors.
    pub fn violations(&self, n_sigma: f64) -> Vec<&VarianceRow> {
        self.rows.iter().filter(|r| r.excess_sigmas() > n_sigma).collect()
    }

    /// CSV with columns `ell,var_x,var_y,kind,var_x_se`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("ell,var_x,var_y,kind,var_x_se\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.17e},{:.17e},{},{:.17e}",
                r.ell,
                r.var_x,
                r.var_y,
                r.kind.as_str(),
                r.var_x_se
            );
        }
        out
    }
}

/// Sample mean, unbiased variance and the standard error of that variance.
fn moments(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let var = m2 * n / (n - 1.0);
    let se = ((m4 - m2 * m2 * (n - 3.0) / (n - 1.0)) / n).max(0.0).sqrt();
    (mean, var, se)
}

/// Compares sample variances of the support statistics with the i.i.d.
/// variances for `ℓ = 1..=max_ell` (`q`) and even `ℓ ≤ max_ell` (`Q`).
pub fn variance_experiment(
    cv: &CapacityVector,
    qm: &CapacityMatrix,
    max_ell: usize,
    samples: usize,
    seed: u64,
) -> Result<VarianceReport> {
    let l = cv.len();
    if qm.size() != l {
        return Err(CapsetError::InvalidShape(format!("q has {l} entries but Q is {}x{}", qm.size(), qm.size())));
    }
    if samples < 100 {
        return Err(CapsetError::InvalidParam(format!("need at least 100 samples, got {samples}")));
    }
    if max_ell == 0 || max_ell > l {
        return Err(CapsetError::InvalidParam(format!("max support size {max_ell} not in 1..={l}")));
    }
    // Stream tags keep the two experiments on separate random streams.
    const Q2_STREAM: u64 = 1 << 32;
    let mut rows = Vec::new();
    for ell in 1..=max_ell {
        let xs: Vec<f64> = (0..samples)
            .into_par_iter()
            .map(|t| {
                let support = Support::random(&mut trial_rng(seed, ell as u64, t as u64), l, ell);
                support.capacity_sum(cv)
            })
            .collect();
        let (mean_x, var_x, var_x_se) = moments(&xs);
        rows.push(VarianceRow {
            ell,
            kind: VarianceKind::Q1,
            mean_x,
            mean_y: ell as f64 * cv.mean(),
            var_x,
            var_x_se,
            var_y: ell as f64 * cv.variance(),
        });
    }
    for ell in (2..=max_ell).step_by(2) {
        let xs: Vec<f64> = (0..samples)
            .into_par_iter()
            .map(|t| {
                let mut rng = trial_rng(seed, Q2_STREAM + ell as u64, t as u64);
                let mut members = index::sample(&mut rng, l, ell).into_vec();
                members.shuffle(&mut rng);
                members.chunks_exact(2).map(|p| qm.get(p[0], p[1])).sum()
            })
            .collect();
        let (mean_x, var_x, var_x_se) = moments(&xs);
        let pairs = (ell / 2) as f64;
        rows.push(VarianceRow {
            ell,
            kind: VarianceKind::Q2,
            mean_x,
            mean_y: pairs * qm.mean(),
            var_x,
            var_x_se,
            var_y: pairs * qm.variance(),
        });
    }
    Ok(VarianceReport {
        samples,
        seed,
        rows,
    })
}

#[cfg(test)]
mod tests;
