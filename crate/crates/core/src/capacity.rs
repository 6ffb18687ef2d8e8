//! Capacity vector `q`, capacity matrix `Q`, their summary statistics and the
//! ratio family `R_kl = Q_kl / (q_k + q_l)`.
//!
//! CSV formats:
//!
//! ```text
//! # capset-q v1 label=<label> seed=<seed|none>
//! k,q_k
//! 0,<q_0>
//! ...
//! # capset-Q v1 label=<label> seed=<seed|none>
//! i,j,Q_ij
//! 0,1,<Q_01>
//! ...
//! ```
//!
//! Indices are 0-based.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::dictionary::Dictionary;
use crate::error::{CapsetError, Result};
use crate::lp::{min_l1_nullspace_warm, pivot_order, LpSolution, LpStatus, SolverConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityVector {
    q: Vec<f64>,
    mean: f64,
    variance: f64,
}

impl CapacityVector {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        if q.is_empty() {
            return Err(CapsetError::EmptyDomain);
        }
        if let Some(v) = q.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(CapsetError::InvalidParam(format!("capacity value {v} out of range")));
        }
        let (mean, variance) = population_stats(&q);
        Ok(CapacityVector { q, mean, variance })
    }

    pub fn values(&self) -> &[f64] {
        &self.q
    }

    pub fn get(&self, k: usize) -> f64 {
        self.q[k]
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// `E_q`.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// `σ_q² = (1/L) Σ (q_k − E_q)²`.
    pub fn variance(&self) -> f64 {
        self.variance
    }
}

/// Strict upper triangle of the symmetric pair capacities, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityMatrix {
    l: usize,
    packed: Vec<f64>,
    mean: f64,
    variance: f64,
}

/// Position of `(i, j)`, `i < j`, in a row-major packed strict upper triangle.
pub(crate) fn packed_index(l: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < l);
    i * (2 * l - i - 1) / 2 + (j - i - 1)
}

impl CapacityMatrix {
    /// `packed` lists `Q_ij` for `i < j` in row-major order.
    pub fn from_packed(l: usize, packed: Vec<f64>) -> Result<Self> {
        if l < 2 {
            return Err(CapsetError::EmptyDomain);
        }
        if packed.len() != l * (l - 1) / 2 {
            return Err(CapsetError::InvalidShape(format!(
                "{} pair values for L={l}, expected {}",
                packed.len(),
                l * (l - 1) / 2
            )));
        }
        if let Some(v) = packed.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(CapsetError::InvalidParam(format!("capacity value {v} out of range")));
        }
        let (mean, variance) = population_stats(&packed);
        Ok(CapacityMatrix {
            l,
            packed,
            mean,
            variance,
        })
    }

    /// Symmetric accessor; `get(i, i)` is not defined and panics.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i != j, "capacity matrix has no diagonal");
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.packed[packed_index(self.l, a, b)]
    }

    /// Number of atoms `L`.
    pub fn size(&self) -> usize {
        self.l
    }

    pub fn packed(&self) -> &[f64] {
        &self.packed
    }

    /// Iterates `(i, j, Q_ij)` for `i < j`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let l = self.l;
        (0..l)
            .flat_map(move |i| (i + 1..l).map(move |j| (i, j)))
            .zip(self.packed.iter())
            .map(|((i, j), v)| (i, j, *v))
    }

    /// `E_Q`.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// `σ_Q² = (2/(L(L−1))) Σ_{i<j} (Q_ij − E_Q)²`.
    pub fn variance(&self) -> f64 {
        self.variance
    }
}

fn population_stats(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, variance)
}

fn capacity_from(solution: LpSolution, what: impl Fn() -> String) -> Result<Option<f64>> {
    match solution.status {
        LpStatus::Optimal => {
            let objective = solution.objective_value.unwrap_or(f64::NAN);
            if !(objective.is_finite() && objective > 0.0) {
                return Err(CapsetError::NumericalFailure {
                    iterations: solution.iterations,
                    context: format!("{}: optimal objective {objective}", what()),
                });
            }
            Ok(Some(objective))
        }
        LpStatus::Infeasible => Ok(None),
        LpStatus::Unbounded => Err(CapsetError::NumericalFailure {
            iterations: solution.iterations,
            context: format!("{}: l1 objective reported unbounded", what()),
        }),
    }
}

/// `q_k = 1 / min ||x||_1  s.t.  Dx = 0, x_k = 1`, or 0 when no null vector
/// touches coordinate `k`.
pub fn capacity_entry(dict: &Dictionary, k: usize, config: &SolverConfig) -> Result<f64> {
    Ok(solve_entry(dict, k, config, None)?.0)
}

/// Starting columns for the single-index LPs: `N` independent columns of
/// `D` plus one spare, shared by every `k`.
struct EntryCrash {
    base: Vec<usize>,
    spare: usize,
}

impl EntryCrash {
    fn new(dict: &Dictionary) -> Option<Self> {
        let order = pivot_order(dict.matrix())?;
        let n = dict.rows();
        Some(EntryCrash {
            base: order[..n].to_vec(),
            spare: *order.get(n)?,
        })
    }

    /// `[D_S d_k; 0 1]` is nonsingular when `k` is outside `S`; otherwise the
    /// spare column replaces it (nonsingular for generic `D`, and the solver
    /// falls back if not).
    fn start(&self, k: usize) -> Vec<usize> {
        let mut start = self.base.clone();
        start.push(if self.base.contains(&k) { self.spare } else { k });
        start
    }
}

/// Capacity plus the optimal split-variable basis, if any.
fn solve_entry(
    dict: &Dictionary,
    k: usize,
    config: &SolverConfig,
    crash: Option<&EntryCrash>,
) -> Result<(f64, Option<Vec<usize>>)> {
    let what = || format!("capacity q_{k}");
    let start = crash.map(|c| c.start(k));
    let mut solution =
        min_l1_nullspace_warm(dict.matrix(), &[(k, 1.0)], 1.0, config, start.as_deref())
        .map_err(|e| e.with_context(what()))?;
    let basis = solution.basis.take();
    Ok(match capacity_from(solution, what)? {
        Some(obj) => (1.0 / obj, basis),
        None => (0.0, None),
    })
}

/// `Q_ij = 1 / min(obj(x_i + x_j = 1), obj(x_i − x_j = 1))`, 0 if both are
/// infeasible.
pub fn capacity_pair(dict: &Dictionary, i: usize, j: usize, config: &SolverConfig) -> Result<f64> {
    solve_pair(dict, i, j, config, None)
}

/// Starting columns for the pair LPs. A basis that is optimal for `x_i = 1`
/// stays primal feasible for `x_i ± x_j = 1` as long as column `j` is not in
/// it (the new constraint row only differs there), so the pair solve merely
/// has to improve on it. The `x_j = 1` basis works symmetrically, and the
/// shared crash columns are the last resort.
fn pair_start(
    l: usize,
    i: usize,
    j: usize,
    basis_i: Option<&[usize]>,
    basis_j: Option<&[usize]>,
    crash: Option<&EntryCrash>,
) -> Option<Vec<usize>> {
    let avoids = |basis: &[usize], k: usize| basis.iter().all(|&v| v % l != k);
    if let Some(b) = basis_i.filter(|b| avoids(b, j)) {
        return Some(b.to_vec());
    }
    if let Some(b) = basis_j.filter(|b| avoids(b, i)) {
        return Some(b.to_vec());
    }
    let crash = crash?;
    [crash.start(i), crash.start(j)]
        .into_iter()
        .zip([j, i])
        .find(|(start, other)| avoids(start, *other))
        .map(|(start, _)| start)
}

fn solve_pair(
    dict: &Dictionary,
    i: usize,
    j: usize,
    config: &SolverConfig,
    start: Option<&[usize]>,
) -> Result<f64> {
    if i == j {
        return Err(CapsetError::InvalidParam(format!("pair ({i}, {j}) is not distinct")));
    }
    let mut best: Option<f64> = None;
    for sign in [1.0, -1.0] {
        let what = || format!("capacity Q_({i},{j}) sign {sign:+}");
        let fixed = [(i, 1.0), (j, sign)];
        let solution = min_l1_nullspace_warm(dict.matrix(), &fixed, 1.0, config, start)
            .map_err(|e| e.with_context(what()))?;
        if let Some(obj) = capacity_from(solution, what)? {
            best = Some(best.map_or(obj, |b: f64| b.min(obj)));
        }
    }
    Ok(best.map_or(0.0, |obj| 1.0 / obj))
}

fn solve_entries(
    dict: &Dictionary,
    config: &SolverConfig,
    crash: Option<&EntryCrash>,
) -> Result<Vec<(f64, Option<Vec<usize>>)>> {
    (0..dict.cols())
        .into_par_iter()
        .map(|k| solve_entry(dict, k, config, crash))
        .collect()
}

/// All `L` capacities; solves run in parallel on the current rayon pool and
/// are assembled by index.
pub fn capacity_vector(dict: &Dictionary, config: &SolverConfig) -> Result<CapacityVector> {
    let crash = EntryCrash::new(dict);
    let entries = solve_entries(dict, config, crash.as_ref())?;
    CapacityVector::new(entries.into_iter().map(|e| e.0).collect())
}

/// All `L(L−1)/2` pair capacities (two LPs each).
pub fn capacity_matrix(dict: &Dictionary, config: &SolverConfig) -> Result<CapacityMatrix> {
    Ok(capacity_sets(dict, config)?.1)
}

/// `q` and `Q` together. The pair LPs start from the optimal bases of the
/// single-index LPs, which is much cheaper than solving each from scratch.
pub fn capacity_sets(
    dict: &Dictionary,
    config: &SolverConfig,
) -> Result<(CapacityVector, CapacityMatrix)> {
    let l = dict.cols();
    let crash = EntryCrash::new(dict);
    let entries = solve_entries(dict, config, crash.as_ref())?;
    let pairs: Vec<(usize, usize)> = (0..l)
        .flat_map(|i| (i + 1..l).map(move |j| (i, j)))
        .collect();
    let packed = pairs
        .into_par_iter()
        .map(|(i, j)| {
            let (bi, bj) = (entries[i].1.as_deref(), entries[j].1.as_deref());
            let start = pair_start(l, i, j, bi, bj, crash.as_ref());
            solve_pair(dict, i, j, config, start.as_deref())
        })
        .collect::<Result<Vec<_>>>()?;
    let q = CapacityVector::new(entries.into_iter().map(|e| e.0).collect())?;
    Ok((q, CapacityMatrix::from_packed(l, packed)?))
}

/// Mean and spread of `R_kl = Q_kl / (q_k + q_l)` over pairs with
/// `q_k + q_l > 0`. The spread is kept both as a variance and as a standard
/// deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioStats {
    pub mean: f64,
    pub variance: f64,
    pub std_dev: f64,
    pub count: usize,
}

pub fn ratio_stats(q: &CapacityVector, qm: &CapacityMatrix) -> Result<RatioStats> {
    if q.len() != qm.size() {
        return Err(CapsetError::InvalidShape(format!(
            "q has {} entries but Q is {}x{}",
            q.len(),
            qm.size(),
            qm.size()
        )));
    }
    let ratios: Vec<f64> = qm
        .pairs()
        .filter_map(|(i, j, v)| {
            let denom = q.get(i) + q.get(j);
            (denom > 0.0).then(|| v / denom)
        })
        .collect();
    if ratios.is_empty() {
        return Err(CapsetError::EmptyDomain);
    }
    let (mean, variance) = population_stats(&ratios);
    Ok(RatioStats {
        mean,
        variance,
        std_dev: variance.sqrt(),
        count: ratios.len(),
    })
}

/// One failed capacity invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum CapacityViolation {
    /// `q_k > μ_k / (μ_k + 1)`.
    CoherenceBound { k: usize, q: f64, bound: f64 },
    /// `Q_ij < max(q_i, q_j)`.
    PairBelowSingle { i: usize, j: usize, pair: f64, single: f64 },
    /// `Q_ij > q_i + q_j`.
    PairAboveSum { i: usize, j: usize, pair: f64, sum: f64 },
}

/// Checks `q_k ≤ μ_k/(μ_k+1)` and `max(q_i,q_j) ≤ Q_ij ≤ q_i + q_j`, allowing
/// an absolute slack `tol` for LP round-off.
pub fn check_capacity_invariants(
    q: &CapacityVector,
    qm: Option<&CapacityMatrix>,
    mu_k: &[f64],
    tol: f64,
) -> Vec<CapacityViolation> {
    let mut out = Vec::new();
    for (k, (&qk, &mu)) in q.values().iter().zip(mu_k).enumerate() {
        let bound = mu / (mu + 1.0);
        if qk > bound + tol {
            out.push(CapacityViolation::CoherenceBound { k, q: qk, bound });
        }
    }
    if let Some(qm) = qm {
        for (i, j, pair) in qm.pairs() {
            let (qi, qj) = (q.get(i), q.get(j));
            if pair < qi.max(qj) - tol {
                out.push(CapacityViolation::PairBelowSingle {
                    i,
                    j,
                    pair,
                    single: qi.max(qj),
                });
            }
            if pair > qi + qj + tol {
                out.push(CapacityViolation::PairAboveSum {
                    i,
                    j,
                    pair,
                    sum: qi + qj,
                });
            }
        }
    }
    out
}

fn seed_text(seed: Option<u64>) -> String {
    seed.map_or_else(|| "none".to_string(), |s| s.to_string())
}

fn write_header(out: &mut impl Write, kind: &str, label: &str, seed: Option<u64>) -> Result<()> {
    writeln!(
        out,
        "# capset-{kind} v1 label={} seed={}",
        label.replace('\n', " "),
        seed_text(seed)
    )?;
    Ok(())
}

pub fn save_capacity_vector(
    q: &CapacityVector,
    label: &str,
    seed: Option<u64>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_header(&mut out, "q", label, seed)?;
    writeln!(out, "k,q_k")?;
    for (k, v) in q.values().iter().enumerate() {
        writeln!(out, "{k},{v:.17e}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_capacity_matrix(
    qm: &CapacityMatrix,
    label: &str,
    seed: Option<u64>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_header(&mut out, "Q", label, seed)?;
    writeln!(out, "i,j,Q_ij")?;
    for (i, j, v) in qm.pairs() {
        writeln!(out, "{i},{j},{v:.17e}")?;
    }
    out.flush()?;
    Ok(())
}

/// Header label and data rows of a capacity CSV.
fn read_capacity_csv(path: &Path, kind: &str, columns: &str) -> Result<(String, Vec<Vec<String>>)> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| CapsetError::format(path, "empty file"))??;
    let magic = format!("# capset-{kind} v1 label=");
    let rest = header
        .strip_prefix(&magic)
        .ok_or_else(|| CapsetError::format(path, format!("missing `{magic}` header")))?;
    let label = match rest.rfind(" seed=") {
        Some(pos) => rest[..pos].to_string(),
        None => return Err(CapsetError::format(path, "header lacks seed=")),
    };
    let names = lines
        .next()
        .ok_or_else(|| CapsetError::format(path, "missing column header"))??;
    if names.trim() != columns {
        return Err(CapsetError::format(path, format!("expected columns `{columns}`")));
    }
    let mut rows = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(line.split(',').map(|s| s.trim().to_string()).collect());
    }
    Ok((label, rows))
}

fn parse_field<T: std::str::FromStr>(path: &Path, row: usize, text: &str) -> Result<T> {
    text.parse()
        .map_err(|_| CapsetError::format(path, format!("row {row}: bad value `{text}`")))
}

/// Returns the vector and the label recorded in the header.
pub fn load_capacity_vector(path: impl AsRef<Path>) -> Result<(CapacityVector, String)> {
    let path = path.as_ref();
    let (label, rows) = read_capacity_csv(path, "q", "k,q_k")?;
    let mut q = Vec::with_capacity(rows.len());
    for (r, row) in rows.iter().enumerate() {
        if row.len() != 2 || parse_field::<usize>(path, r, &row[0])? != r {
            return Err(CapsetError::format(path, format!("row {r}: expected `{r},<value>`")));
        }
        q.push(parse_field::<f64>(path, r, &row[1])?);
    }
    let q = CapacityVector::new(q).map_err(|e| CapsetError::format(path, e.to_string()))?;
    Ok((q, label))
}

pub fn load_capacity_matrix(path: impl AsRef<Path>) -> Result<(CapacityMatrix, String)> {
    let path = path.as_ref();
    let (label, rows) = read_capacity_csv(path, "Q", "i,j,Q_ij")?;
    // Solve L(L-1)/2 = rows for L.
    let l = (1.0 + (1.0 + 8.0 * rows.len() as f64).sqrt()) as usize / 2;
    if l * (l.saturating_sub(1)) / 2 != rows.len() {
        return Err(CapsetError::format(path, "row count is not a triangular number"));
    }
    let mut packed = Vec::with_capacity(rows.len());
    let expected = (0..l).flat_map(|i| (i + 1..l).map(move |j| (i, j)));
    for (r, (row, (i, j))) in rows.iter().zip(expected).enumerate() {
        if row.len() != 3
            || parse_field::<usize>(path, r, &row[0])? != i
            || parse_field::<usize>(path, r, &row[1])? != j
        {
            return Err(CapsetError::format(path, format!("row {r}: expected pair ({i},{j})")));
        }
        packed.push(parse_field::<f64>(path, r, &row[2])?);
    }
    let qm = CapacityMatrix::from_packed(l, packed)
        .map_err(|e| CapsetError::format(path, e.to_string()))?;
    Ok((qm, label))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::{coherence_profile, gen_random};
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    fn identity_pair(n: usize) -> Dictionary {
        let mut m = DMatrix::zeros(n, 2 * n);
        for i in 0..n {
            m[(i, i)] = 1.0;
            m[(i, n + i)] = 1.0;
        }
        Dictionary::new(m, "I|I", None).unwrap()
    }

    #[test]
    fn duplicated_identity_vector() {
        let q = capacity_vector(&identity_pair(3), &SolverConfig::default()).unwrap();
        for &v in q.values() {
            assert_abs_diff_eq!(v, 0.5, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(q.mean(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(q.variance(), 0.0, epsilon = 1e-12);
    }

    /// Brute-force `max δ_i ± δ_j` over unit-ℓ1 null vectors of `[I | I]`.
    /// The null space is `{(w, −w)}`, so `||δ||_1 = 2||w||_1` and the maximum
    /// of a linear functional `c·w` over `||w||_1 = 1/2` is `max|c_m| / 2`.
    fn identity_pair_pair_oracle(n: usize, i: usize, j: usize) -> f64 {
        let coef = |k: usize, s: f64| -> Vec<f64> {
            let mut c = vec![0.0; n];
            // δ_k = w_k for k < n and −w_{k−n} otherwise.
            if k < n {
                c[k] += s;
            } else {
                c[k - n] -= s;
            }
            c
        };
        [1.0, -1.0]
            .iter()
            .map(|&s| {
                let a = coef(i, 1.0);
                let b = coef(j, s);
                a.iter()
                    .zip(&b)
                    .map(|(x, y)| (x + y).abs())
                    .fold(0.0, f64::max)
                    / 2.0
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn duplicated_identity_pairs_match_oracle() {
        let n = 3;
        let d = identity_pair(n);
        let qm = capacity_matrix(&d, &SolverConfig::default()).unwrap();
        for (i, j, v) in qm.pairs() {
            assert_abs_diff_eq!(v, identity_pair_pair_oracle(n, i, j), epsilon = 1e-12);
        }
        assert_abs_diff_eq!(qm.get(0, 1), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(qm.get(0, n), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn square_invertible_has_zero_capacity() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 0.5, 1.0, -1.0, 0.0, 0.3, 1.0]);
        let d = Dictionary::normalized(m, "square", None).unwrap();
        let cfg = SolverConfig::default();
        let q = capacity_vector(&d, &cfg).unwrap();
        assert!(q.values().iter().all(|v| *v == 0.0));
        let qm = capacity_matrix(&d, &cfg).unwrap();
        assert!(qm.packed().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn statistics_are_recomputable() {
        let q = CapacityVector::new(vec![0.1, 0.2, 0.4]).unwrap();
        let mean = 0.7 / 3.0;
        let var = ((0.1f64 - mean).powi(2) + (0.2 - mean).powi(2) + (0.4 - mean).powi(2)) / 3.0;
        assert_abs_diff_eq!(q.mean(), mean, epsilon = 1e-15);
        assert_abs_diff_eq!(q.variance(), var, epsilon = 1e-15);
        assert!(CapacityVector::new(vec![]).is_err());
        assert!(CapacityVector::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn packed_layout() {
        let l = 5;
        let mut seen = Vec::new();
        for i in 0..l {
            for j in i + 1..l {
                seen.push(packed_index(l, i, j));
            }
        }
        assert_eq!(seen, (0..10).collect::<Vec<_>>());
        let qm = CapacityMatrix::from_packed(3, vec![0.1, 0.2, 0.3]).unwrap();
        assert_eq!(qm.get(2, 1), 0.3);
        assert_eq!(qm.get(0, 2), 0.2);
        assert!(CapacityMatrix::from_packed(3, vec![0.1]).is_err());
    }

    #[test]
    fn random_dictionary_invariants() {
        let d = gen_random(5, 10, 21).unwrap();
        let cfg = SolverConfig::default();
        let q = capacity_vector(&d, &cfg).unwrap();
        let qm = capacity_matrix(&d, &cfg).unwrap();
        let profile = coherence_profile(&d, 1).unwrap();
        assert!(check_capacity_invariants(&q, Some(&qm), &profile.mu_k, 1e-9).is_empty());
        assert!(q.values().iter().all(|v| *v > 0.0 && *v < 1.0));
        assert!(qm.packed().iter().all(|v| *v < 1.0));
    }

    #[test]
    fn violations_are_reported() {
        let q = CapacityVector::new(vec![0.4, 0.1]).unwrap();
        let qm = CapacityMatrix::from_packed(2, vec![0.2]).unwrap();
        let v = check_capacity_invariants(&q, Some(&qm), &[0.5, 0.5], 1e-12);
        assert_eq!(v.len(), 2);
        assert!(matches!(v[0], CapacityViolation::CoherenceBound { k: 0, .. }));
        assert!(matches!(v[1], CapacityViolation::PairBelowSingle { i: 0, j: 1, .. }));
        let qm = CapacityMatrix::from_packed(2, vec![0.6]).unwrap();
        let v = check_capacity_invariants(&q, Some(&qm), &[1.0, 1.0], 1e-12);
        assert!(matches!(v[..], [CapacityViolation::PairAboveSum { .. }]));
    }

    #[test]
    fn ratio_of_additive_matrix_is_one() {
        let q = CapacityVector::new(vec![0.1, 0.2, 0.3]).unwrap();
        let qm = CapacityMatrix::from_packed(3, vec![0.3, 0.4, 0.5]).unwrap();
        let r = ratio_stats(&q, &qm).unwrap();
        assert_abs_diff_eq!(r.mean, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.std_dev, 0.0, epsilon = 1e-15);
        assert_eq!(r.count, 3);
        let zero = CapacityVector::new(vec![0.0; 3]).unwrap();
        assert!(matches!(ratio_stats(&zero, &qm), Err(CapsetError::EmptyDomain)));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let d = gen_random(3, 6, 5).unwrap();
        let cfg = SolverConfig::default();
        let q = capacity_vector(&d, &cfg).unwrap();
        let qm = capacity_matrix(&d, &cfg).unwrap();
        let qp = dir.path().join("q.csv");
        let qmp = dir.path().join("Q.csv");
        save_capacity_vector(&q, d.label(), d.seed(), &qp).unwrap();
        save_capacity_matrix(&qm, d.label(), d.seed(), &qmp).unwrap();
        let (q2, label) = load_capacity_vector(&qp).unwrap();
        assert_eq!(q2, q);
        assert_eq!(label, d.label());
        let (qm2, _) = load_capacity_matrix(&qmp).unwrap();
        assert_eq!(qm2, qm);
        let head = std::fs::read_to_string(&qp).unwrap();
        assert!(head.starts_with("# capset-q v1 label=random N=3 L=6 seed=5 seed=5\nk,q_k\n0,"));
    }
}
