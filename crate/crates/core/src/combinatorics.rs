//! Quantized combinatorial count over the capacity vector.
//!
//! `q` is quantized to `d` levels (each cluster takes its maximum, so every
//! quantized sum bounds the true one from above). A support of size `ℓ` is
//! then described by how many indices it takes from each cluster, and the
//! count weights each such composition by the number of supports it stands
//! for.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::bounds::{strictly_below, EstimationFunction};
use crate::capacity::CapacityVector;
use crate::error::{CapsetError, Result};

/// Largest `d` searched exhaustively over breakpoints; above it the optimal
/// contiguous partition comes from dynamic programming.
pub const EXHAUSTIVE_MAX_D: usize = 4;

/// Cap on `Π (|Λ_i| + 1)`, the number of compositions over all `ℓ`.
pub const MAX_COMPOSITIONS: u128 = 50_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizationScheme {
    /// Original indices per cluster; clusters are ordered by level.
    pub clusters: Vec<Vec<usize>>,
    /// `levels[i] = max_{k ∈ clusters[i]} q_k`.
    pub levels: Vec<f64>,
    /// `f = Σ_i (|Λ_i| levels[i] − Σ_{k∈Λ_i} q_k)`.
    pub objective: f64,
}

impl QuantizationScheme {
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// Total number of indices `L`.
    pub fn size(&self) -> usize {
        self.clusters.iter().map(Vec::len).sum()
    }

    /// Quantized value of every index.
    pub fn quantized(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.size()];
        for (cluster, level) in self.clusters.iter().zip(&self.levels) {
            for &k in cluster {
                out[k] = *level;
            }
        }
        out
    }
}

/// Best quantization of `q` into `d` clusters that are contiguous in sorted
/// order (an exchange argument shows some optimal partition has this form).
/// Ties go to the lexicographically smallest breakpoint tuple.
pub fn quantize(cv: &CapacityVector, d: usize) -> Result<QuantizationScheme> {
    let l = cv.len();
    if d == 0 || d > l {
        return Err(CapsetError::InvalidParam(format!("quantization levels d={d} not in 1..={l}")));
    }
    let q = cv.values();
    let mut order: Vec<usize> = (0..l).collect();
    order.sort_by(|&a, &b| q[a].total_cmp(&q[b]).then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&k| q[k]).collect();

    // cost[a][b]: error of the run sorted[a..b]; built incrementally so that
    // runs of equal values cost exactly zero.
    let mut cost = vec![vec![0.0; l + 1]; l + 1];
    for a in 0..l {
        for b in a + 2..=l {
            cost[a][b] = cost[a][b - 1] + (b - 1 - a) as f64 * (sorted[b - 1] - sorted[b - 2]);
        }
    }

    let breaks = if d <= EXHAUSTIVE_MAX_D {
        exhaustive_breaks(&cost, l, d)
    } else {
        dp_breaks(&cost, l, d)
    };

    let mut bounds = vec![0];
    bounds.extend(&breaks);
    bounds.push(l);
    let mut clusters = Vec::with_capacity(d);
    let mut levels = Vec::with_capacity(d);
    let mut objective = 0.0;
    for w in bounds.windows(2) {
        let members = order[w[0]..w[1]].to_vec();
        let level = sorted[w[1] - 1];
        objective += members.iter().map(|&k| level - q[k]).sum::<f64>();
        clusters.push(members);
        levels.push(level);
    }
    Ok(QuantizationScheme {
        clusters,
        levels,
        objective,
    })
}

/// All `C(L−1, d−1)` interior breakpoint tuples in lexicographic order.
fn exhaustive_breaks(cost: &[Vec<f64>], l: usize, d: usize) -> Vec<usize> {
    fn walk(
        cost: &[Vec<f64>],
        l: usize,
        left: usize,
        start: usize,
        acc: f64,
        current: &mut Vec<usize>,
        best: &mut (f64, Vec<usize>),
    ) {
        if left == 0 {
            let total = acc + cost[start][l];
            if total < best.0 {
                *best = (total, current.clone());
            }
            return;
        }
        for b in start + 1..=l - left {
            current.push(b);
            walk(cost, l, left - 1, b, acc + cost[start][b], current, best);
            current.pop();
        }
    }
    let mut best = (f64::INFINITY, Vec::new());
    walk(cost, l, d - 1, 0, 0.0, &mut Vec::with_capacity(d), &mut best);
    best.1
}

/// Optimal contiguous partition by dynamic programming, `O(d L²)`. Among
/// equal costs the smallest breakpoint is kept at every stage.
fn dp_breaks(cost: &[Vec<f64>], l: usize, d: usize) -> Vec<usize> {
    // best[c][b]: min cost of splitting sorted[0..b] into c runs.
    let mut best = vec![vec![f64::INFINITY; l + 1]; d + 1];
    let mut from = vec![vec![0usize; l + 1]; d + 1];
    best[0][0] = 0.0;
    for c in 1..=d {
        for b in c..=l {
            for a in c - 1..b {
                let v = best[c - 1][a] + cost[a][b];
                if v < best[c][b] {
                    best[c][b] = v;
                    from[c][b] = a;
                }
            }
        }
    }
    let mut breaks = Vec::with_capacity(d - 1);
    let mut b = l;
    for c in (2..=d).rev() {
        b = from[c][b];
        breaks.push(b);
    }
    breaks.reverse();
    breaks
}

/// `C(n, k)` for `k = 0..=n`.
pub fn binomial_row(n: usize) -> Vec<BigUint> {
    let mut row = Vec::with_capacity(n + 1);
    let mut c = BigUint::one();
    row.push(c.clone());
    for k in 0..n {
        c = c * BigUint::from(n - k) / BigUint::from(k + 1);
        row.push(c.clone());
    }
    row
}

pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut c = BigUint::one();
    for i in 0..k {
        c = c * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    c
}

/// Exact weighted tally for one support size.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionCount {
    /// Supports whose quantized sum is below ½.
    pub passing: BigUint,
    /// All supports of this size, `C(L, ℓ)`.
    pub total: BigUint,
}

impl CompositionCount {
    pub fn fraction(&self) -> f64 {
        ratio(&self.passing, &self.total)
    }
}

fn ratio(num: &BigUint, den: &BigUint) -> f64 {
    if den.is_zero() {
        return 0.0;
    }
    // Shift both so the quotient keeps full double precision.
    let shift = den.bits().saturating_sub(64);
    let n = (num >> shift).to_f64().unwrap_or(f64::INFINITY);
    let d = (den >> shift).to_f64().unwrap_or(f64::INFINITY);
    n / d
}

/// Enumerates compositions `p` with `0 ≤ p_i ≤ |Λ_i|`, `Σ p_i = ℓ`; a
/// composition passes iff `Σ p_i level_i < ½` and carries weight
/// `Π C(|Λ_i|, p_i)`. The weights over all compositions must add up to
/// `C(L, ℓ)`, which is checked exactly.
pub fn count_compositions(scheme: &QuantizationScheme, ell: usize) -> Result<CompositionCount> {
    let l = scheme.size();
    if ell == 0 || ell > l {
        return Err(CapsetError::InvalidParam(format!("support size {ell} not in 1..={l}")));
    }
    let combos: u128 = scheme
        .clusters
        .iter()
        .map(|c| c.len() as u128 + 1)
        .try_fold(1u128, |acc, v| acc.checked_mul(v))
        .unwrap_or(u128::MAX);
    if combos > MAX_COMPOSITIONS {
        return Err(CapsetError::TooLarge {
            size: combos.min(usize::MAX as u128) as usize,
            cap: MAX_COMPOSITIONS as usize,
        });
    }

    let sizes: Vec<usize> = scheme.clusters.iter().map(Vec::len).collect();
    let rows: Vec<Vec<BigUint>> = sizes.iter().map(|&s| binomial_row(s)).collect();
    // Largest number of indices the clusters after position i can still take.
    let mut tail = vec![0; sizes.len() + 1];
    for i in (0..sizes.len()).rev() {
        tail[i] = tail[i + 1] + sizes[i];
    }

    struct Walk<'a> {
        sizes: &'a [usize],
        rows: &'a [Vec<BigUint>],
        levels: &'a [f64],
        tail: &'a [usize],
        passing: BigUint,
        all: BigUint,
    }
    fn walk(w: &mut Walk, i: usize, remaining: usize, sum: f64, weight: &BigUint) {
        if i == w.sizes.len() {
            debug_assert_eq!(remaining, 0);
            w.all += weight;
            if strictly_below(sum, 0.5) {
                w.passing += weight;
            }
            return;
        }
        let lo = remaining.saturating_sub(w.tail[i + 1]);
        let hi = remaining.min(w.sizes[i]);
        for p in lo..=hi {
            let next = weight * &w.rows[i][p];
            walk(w, i + 1, remaining - p, sum + p as f64 * w.levels[i], &next);
        }
    }
    let mut state = Walk {
        sizes: &sizes,
        rows: &rows,
        levels: &scheme.levels,
        tail: &tail,
        passing: BigUint::zero(),
        all: BigUint::zero(),
    };
    walk(&mut state, 0, ell, 0.0, &BigUint::one());

    let total = binomial(l, ell);
    if state.all != total {
        return Err(CapsetError::InvariantViolation(format!(
            "composition weights sum to {} but C({l}, {ell}) = {total}",
            state.all
        )));
    }
    Ok(CompositionCount {
        passing: state.passing,
        total,
    })
}

/// Fraction of `ℓ`-sized supports certified by the quantized capacities.
pub fn combinatorial_count(scheme: &QuantizationScheme, ell: usize) -> Result<f64> {
    Ok(count_compositions(scheme, ell)?.fraction())
}

/// `quantize` followed by `combinatorial_count` for every `ℓ = 1..=L`.
pub fn ef_count(cv: &CapacityVector, d: usize) -> Result<EstimationFunction> {
    let scheme = quantize(cv, d)?;
    let values = (1..=cv.len())
        .into_par_iter()
        .map(|ell| combinatorial_count(&scheme, ell))
        .collect::<Result<Vec<_>>>()?;
    Ok(EstimationFunction::new("EF-count", values)?
        .with_param("d", d as f64)
        .with_param("quantization_error", scheme.objective)
        .with_param("E_q", cv.mean())
        .with_param("var_q", cv.variance()))
}
