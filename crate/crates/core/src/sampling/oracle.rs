//! Exponential-cost oracles for small supports: `val(C_Γ)` by sign-pattern
//! enumeration, the exhaustive Basis Pursuit test, and a consistency sweep
//! tying them to `q`, `Q` and the greedy pairing.

use rand::Rng;

use super::{bp_recovers, for_each_matching, greedy_pair_partition, optimal_matching, Support};
use crate::bounds::strictly_below;
use crate::capacity::{CapacityMatrix, CapacityVector};
use crate::dictionary::Dictionary;
use crate::error::{CapsetError, Result};
use crate::lp::{min_l1_nullspace, LpStatus, SolverConfig};
use crate::rng::trial_rng;

/// Largest support the oracles accept (`2^(|Γ|−1)` LPs each).
pub const ORACLE_MAX_SUPPORT: usize = 16;

fn check_size(support: &Support) -> Result<()> {
    if support.len() > ORACLE_MAX_SUPPORT {
        return Err(CapsetError::TooLarge {
            size: support.len(),
            cap: ORACLE_MAX_SUPPORT,
        });
    }
    if support.is_empty() {
        return Err(CapsetError::InvalidParam("empty support".into()));
    }
    Ok(())
}

/// Sign patterns with the first sign fixed to `+1`.
fn sign_patterns(size: usize) -> impl Iterator<Item = Vec<f64>> {
    (0u32..1 << (size - 1)).map(move |bits| {
        (0..size)
            .map(|k| if k > 0 && bits >> (k - 1) & 1 == 1 { -1.0 } else { 1.0 })
            .collect()
    })
}

/// `val(C_Γ)`: the largest `Σ_{k∈Γ} |δ_k|` over null vectors with
/// `||δ||_1 = 1`, i.e. the maximum over sign patterns `s` of
/// `1 / min ||x||_1 s.t. Dx = 0, Σ s_k x_k = 1` (0 if all are infeasible).
pub fn oracle_val_c_gamma(dict: &Dictionary, support: &Support, config: &SolverConfig) -> Result<f64> {
    check_size(support)?;
    let mut best: f64 = 0.0;
    for signs in sign_patterns(support.len()) {
        let fixed: Vec<(usize, f64)> = support.indices().iter().copied().zip(signs).collect();
        let solution = min_l1_nullspace(dict.matrix(), &fixed, 1.0, config)?;
        match solution.status {
            LpStatus::Optimal => {
                let obj = solution.objective_value.unwrap_or(f64::NAN);
                if !(obj > 0.0) {
                    return Err(CapsetError::NumericalFailure {
                        iterations: solution.iterations,
                        context: format!("val(C_Γ) objective {obj}"),
                    });
                }
                best = best.max(1.0 / obj);
            }
            LpStatus::Infeasible => {}
            LpStatus::Unbounded => {
                return Err(CapsetError::NumericalFailure {
                    iterations: solution.iterations,
                    context: "val(C_Γ) LP reported unbounded".into(),
                })
            }
        }
    }
    Ok(best)
}

/// Whether Basis Pursuit recovers `Σ s_k e_k` for every sign pattern on the
/// support (first sign fixed by symmetry), which decides
/// ℓ1-reconstructibility of the support.
pub fn oracle_sign_pattern_test(dict: &Dictionary, support: &Support, config: &SolverConfig) -> Result<bool> {
    check_size(support)?;
    for signs in sign_patterns(support.len()) {
        if !bp_recovers(dict, support, &signs, 1e-6, config)? {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone)]
pub struct OracleSweepConfig {
    /// Number of random supports.
    pub supports: usize,
    /// Support sizes are drawn uniformly from `1..=max_support`.
    pub max_support: usize,
    pub seed: u64,
    /// Multiplies `q` and `Q` before the checks; 1 except for fault injection.
    pub capacity_scale: f64,
    /// Slack for comparisons between LP values.
    pub tol: f64,
    pub solver: SolverConfig,
}

impl Default for OracleSweepConfig {
    fn default() -> Self {
        OracleSweepConfig {
            supports: 100,
            max_support: 4,
            seed: 0,
            capacity_scale: 1.0,
            tol: 1e-9,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleViolation {
    /// `val(C_Γ) < ½` but some sign pattern is not recovered.
    Lemma { support: Vec<usize>, val: f64 },
    /// `val(C_Γ) > Σ_{k∈Γ} q_k`.
    AboveCapacitySum { support: Vec<usize>, val: f64, sum: f64 },
    /// `val(C_Γ) >` the `Q` sum of some pair partition.
    AbovePairing { support: Vec<usize>, val: f64, pairs: Vec<(usize, usize)>, sum: f64 },
    /// Greedy pairing cheaper than the optimal matching.
    GreedyBelowOptimal { support: Vec<usize>, greedy: f64, optimal: f64 },
    /// Greedy pairing differs from the optimum on a constant matrix.
    ConstantMismatch { support: Vec<usize>, greedy: f64, optimal: f64 },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OracleSweepReport {
    pub supports: usize,
    /// Supports with `val(C_Γ) < ½`, i.e. where the recovery claim was tested.
    pub certified: usize,
    pub reconstructible: usize,
    pub matchings_checked: usize,
    pub violations: Vec<OracleViolation>,
}

impl OracleSweepReport {
    pub fn merge(&mut self, other: OracleSweepReport) {
        self.supports += other.supports;
        self.certified += other.certified;
        self.reconstructible += other.reconstructible;
        self.matchings_checked += other.matchings_checked;
        self.violations.extend(other.violations);
    }
}

/// Random-support sweep over one dictionary:
/// - `val(C_Γ) < ½` implies every sign pattern is recovered;
/// - `val(C_Γ) ≤ Σ_{k∈Γ} q_k` and `≤` the `Q` sum of every pair partition;
/// - greedy pairing sum `≥` optimal matching sum, with equality when `Q` is
///   constant.
pub fn oracle_sweep(
    dict: &Dictionary,
    q: &CapacityVector,
    qm: &CapacityMatrix,
    config: &OracleSweepConfig,
) -> Result<OracleSweepReport> {
    let l = dict.cols();
    if q.len() != l || qm.size() != l {
        return Err(CapsetError::InvalidShape("capacities do not match the dictionary".into()));
    }
    let max_support = config.max_support.min(l);
    if max_support == 0 || max_support > ORACLE_MAX_SUPPORT {
        return Err(CapsetError::TooLarge {
            size: config.max_support,
            cap: ORACLE_MAX_SUPPORT,
        });
    }
    let scale = config.capacity_scale;
    let q = CapacityVector::new(q.values().iter().map(|v| v * scale).collect())?;
    let qm = CapacityMatrix::from_packed(l, qm.packed().iter().map(|v| v * scale).collect())?;
    let constant = CapacityMatrix::from_packed(l, vec![0.1; l * (l - 1) / 2])?;

    let mut report = OracleSweepReport::default();
    for t in 0..config.supports {
        let mut rng = trial_rng(config.seed, 0, t as u64);
        let size = rng.random_range(1..=max_support);
        let support = Support::random(&mut rng, l, size);
        let ids = support.indices().to_vec();
        report.supports += 1;

        let val = oracle_val_c_gamma(dict, &support, &config.solver)?;
        if strictly_below(val, 0.5) && val < 0.5 - config.tol {
            report.certified += 1;
            if oracle_sign_pattern_test(dict, &support, &config.solver)? {
                report.reconstructible += 1;
            } else {
                report.violations.push(OracleViolation::Lemma { support: ids.clone(), val });
            }
        }
        let sum = support.capacity_sum(&q);
        if val > sum + config.tol {
            report.violations.push(OracleViolation::AboveCapacitySum { support: ids.clone(), val, sum });
        }
        if size % 2 == 1 {
            continue;
        }
        for_each_matching(&ids, &mut Vec::new(), &mut |pairs| {
            let pair_sum: f64 = pairs.iter().map(|&(i, j)| qm.get(i, j)).sum();
            if val > pair_sum + config.tol {
                report.violations.push(OracleViolation::AbovePairing {
                    support: ids.clone(),
                    val,
                    pairs: pairs.to_vec(),
                    sum: pair_sum,
                });
            }
        });
        let greedy = greedy_pair_partition(&qm, &support)?.sum(&qm);
        let (_, optimal) = optimal_matching(&qm, &support)?;
        report.matchings_checked += 1;
        if greedy < optimal - config.tol {
            report.violations.push(OracleViolation::GreedyBelowOptimal { support: ids.clone(), greedy, optimal });
        }
        let greedy_c = greedy_pair_partition(&constant, &support)?.sum(&constant);
        let (_, optimal_c) = optimal_matching(&constant, &support)?;
        if (greedy_c - optimal_c).abs() > config.tol {
            report.violations.push(OracleViolation::ConstantMismatch {
                support: ids,
                greedy: greedy_c,
                optimal: optimal_c,
            });
        }
    }
    Ok(report)
}
