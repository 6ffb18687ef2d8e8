use super::*;
use crate::dictionary::gen_random;
use approx::assert_relative_eq;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(l: usize, seed: u64) -> CapacityMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CapacityMatrix::from_packed(l, (0..l * (l - 1) / 2).map(|_| rng.random_range(0.05..0.4)).collect())
        .unwrap()
}

fn identity_pair(n: usize) -> Dictionary {
    let mut d = DMatrix::zeros(n, 2 * n);
    for i in 0..n {
        d[(i, i)] = 1.0;
        d[(i, n + i)] = 1.0;
    }
    Dictionary::new(d, "I|I", None).unwrap()
}

fn rotation(n: usize) -> Dictionary {
    // Orthonormal: Q factor of a fixed random matrix.
    let g = gen_random(n, n + 1, 3).unwrap();
    let square = g.matrix().columns(0, n).into_owned();
    let q = square.qr().q();
    Dictionary::new(q, "orthonormal", None).unwrap()
}

#[test]
fn support_validation() {
    assert_eq!(Support::new(vec![3, 1], 5).unwrap().indices(), &[1, 3]);
    assert!(Support::new(vec![1, 1], 5).is_err());
    assert!(Support::new(vec![5], 5).is_err());
}

#[test]
fn two_element_support_is_forced() {
    let qm = random_matrix(7, 1);
    let s = Support::new(vec![2, 5], 7).unwrap();
    let p = greedy_pair_partition(&qm, &s).unwrap();
    assert_eq!(p.pairs, vec![(2, 5)]);
    assert_eq!(p.sum(&qm), qm.get(2, 5));
}

#[test]
fn odd_support_is_rejected() {
    let qm = random_matrix(7, 1);
    let s = Support::new(vec![0, 2, 5], 7).unwrap();
    assert!(matches!(greedy_pair_partition(&qm, &s), Err(CapsetError::OddSupport(3))));
    assert!(matches!(optimal_matching(&qm, &s), Err(CapsetError::OddSupport(3))));
}

#[test]
fn constant_matrix_pairs_lexicographically() {
    let qm = CapacityMatrix::from_packed(10, vec![0.2; 45]).unwrap();
    let s = Support::new(vec![9, 1, 4, 7, 2, 0], 10).unwrap();
    let p = greedy_pair_partition(&qm, &s).unwrap();
    assert_eq!(p.pairs, vec![(0, 1), (2, 4), (7, 9)]);
    assert_relative_eq!(p.sum(&qm), 0.6, epsilon = 1e-15);
}

#[test]
fn greedy_versus_all_matchings_of_six() {
    for seed in 0..20 {
        let qm = random_matrix(9, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        let s = Support::random(&mut rng, 9, 6);
        let mut count = 0;
        let mut best = f64::INFINITY;
        for_each_matching(s.indices(), &mut Vec::new(), &mut |pairs| {
            count += 1;
            best = best.min(pairs.iter().map(|&(i, j)| qm.get(i, j)).sum());
        });
        assert_eq!(count, 15);
        let greedy = greedy_pair_partition(&qm, &s).unwrap();
        PairPartition::new(greedy.pairs.clone(), &s).unwrap();
        assert!(greedy.sum(&qm) >= best - 1e-15);
        assert_relative_eq!(optimal_matching(&qm, &s).unwrap().1, best);
    }
}

#[test]
fn matching_size_cap() {
    let qm = random_matrix(20, 2);
    let s = Support::new((0..18).collect(), 20).unwrap();
    assert!(matches!(optimal_matching(&qm, &s), Err(CapsetError::TooLarge { .. })));
}

#[test]
fn comp_b_edge_values() {
    // max Q ≤ 1/ℓ: every pairing of ℓ indices sums to at most ½.
    let qm = CapacityMatrix::from_packed(30, vec![0.04; 435]).unwrap();
    let ef = ef_comp_b(&qm, 50, 1).unwrap();
    for ell in (2..=24).step_by(2) {
        assert_eq!(ef.value(ell), 1.0, "ell={ell}");
    }
    // (ℓ/2)·0.04 ≥ ½ from ℓ = 26 on.
    assert_eq!(ef.value(26), 0.0);
    assert!(ef.is_interpolated(25) && ef.value(25) == ef.value(24));
}

#[test]
fn comp_b_is_reproducible_across_thread_counts() {
    let qm = random_matrix(24, 5);
    let a = ef_comp_b(&qm, 200, 9).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let b = pool.install(|| ef_comp_b(&qm, 200, 9).unwrap());
    assert_eq!(a, b);
    let c = ef_comp_b(&qm, 200, 10).unwrap();
    assert_ne!(a.values(), c.values());
}

#[test]
fn trial_records_and_log() {
    let qm = random_matrix(12, 3);
    let records = comp_b_trials(&qm, 4, 10, 2).unwrap();
    assert_eq!(records.len(), 10);
    for r in &records {
        let greedy = greedy_pair_partition(&qm, &r.support).unwrap().sum(&qm);
        if greedy < 0.5 {
            assert_relative_eq!(r.statistic, greedy, epsilon = 1e-15);
        } else {
            assert!(r.statistic >= 0.5);
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trials.csv");
    write_trial_log(&path, &records).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 11);
    assert!(comp_b_trials(&qm, 3, 10, 2).is_err());
}

#[test]
fn empirical_on_orthonormal_and_single_atoms() {
    let d = rotation(5);
    let config = EmpiricalConfig {
        samples: 20,
        seed: 4,
        ..EmpiricalConfig::default()
    };
    let ef = ef_empirical(&d, &config).unwrap();
    assert_eq!(ef.values(), &[1.0; 5]);

    let d = gen_random(8, 16, 2).unwrap();
    let rate = empirical_recovery_rate(&d, 1, &config).unwrap();
    assert_eq!(rate.successes, 20);
    let signs = EmpiricalConfig {
        coeff_model: CoeffModel::UnitSigns,
        ..config.clone()
    };
    assert_eq!(empirical_recovery_rate(&d, 1, &signs).unwrap().rate(), 1.0);
}

#[test]
fn empirical_zero_beyond_rows() {
    let d = gen_random(4, 10, 6).unwrap();
    let config = EmpiricalConfig {
        samples: 30,
        seed: 1,
        ..EmpiricalConfig::default()
    };
    let ef = ef_empirical(&d, &config).unwrap();
    assert!(ef.values()[4..].iter().all(|v| *v == 0.0));
    assert_eq!(ef.value(1), 1.0);
}

#[test]
fn duplicated_atoms_oracles() {
    let d = identity_pair(3);
    let config = SolverConfig::default();
    let single = Support::new(vec![0], 6).unwrap();
    assert_relative_eq!(oracle_val_c_gamma(&d, &single, &config).unwrap(), 0.5, epsilon = 1e-12);
    let twin = Support::new(vec![0, 3], 6).unwrap();
    assert!(!oracle_sign_pattern_test(&d, &twin, &config).unwrap());
    assert_relative_eq!(oracle_val_c_gamma(&d, &twin, &config).unwrap(), 1.0, epsilon = 1e-12);
}

#[test]
fn orthonormal_oracles() {
    let d = rotation(4);
    let config = SolverConfig::default();
    for ids in [vec![0], vec![1, 2], vec![0, 1, 2, 3]] {
        let s = Support::new(ids, 4).unwrap();
        assert!(oracle_sign_pattern_test(&d, &s, &config).unwrap());
        assert_eq!(oracle_val_c_gamma(&d, &s, &config).unwrap(), 0.0);
    }
    let big = Support::new((0..17).collect(), 20).unwrap();
    assert!(matches!(
        oracle_val_c_gamma(&gen_random(4, 20, 1).unwrap(), &big, &config),
        Err(CapsetError::TooLarge { .. })
    ));
}

#[test]
fn moments_of_a_small_sample() {
    let (mean, var, se) = moments(&[1.0, 2.0, 3.0, 4.0]);
    assert_eq!(mean, 2.5);
    assert_relative_eq!(var, 5.0 / 3.0, epsilon = 1e-15);
    assert!(se > 0.0);
}

#[test]
fn variance_of_capacity_sums() {
    // Sampling without replacement: E var_x = ℓσ²(L−ℓ)/(L−1).
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let l = 40;
    let cv = CapacityVector::new((0..l).map(|_| rng.random_range(0.0..0.3)).collect()).unwrap();
    let qm = random_matrix(l, 8);
    let report = variance_experiment(&cv, &qm, 10, 20_000, 3).unwrap();
    for row in report.rows.iter().filter(|r| r.kind == VarianceKind::Q1) {
        let ell = row.ell as f64;
        let expected = ell * cv.variance() * (l as f64 - ell) / (l as f64 - 1.0);
        assert!((row.var_x - expected).abs() < 5.0 * row.var_x_se, "{row:?} expected {expected}");
        assert!((row.mean_x - row.mean_y).abs() < 5.0 * (row.var_x / 20_000.0).sqrt());
    }
    let first = &report.rows[0];
    assert_eq!((first.ell, first.kind), (1, VarianceKind::Q1));
    assert_relative_eq!(first.var_y, cv.variance());
    let q2: Vec<_> = report.rows.iter().filter(|r| r.kind == VarianceKind::Q2).collect();
    assert_eq!(q2.iter().map(|r| r.ell).collect::<Vec<_>>(), vec![2, 4, 6, 8, 10]);
    for r in q2 {
        assert_relative_eq!(r.var_y, (r.ell / 2) as f64 * qm.variance());
    }
    assert!(report.to_csv().starts_with("ell,var_x,var_y,kind,var_x_se\n1,"));
    assert!(variance_experiment(&cv, &qm, 10, 50, 3).is_err());
}

#[test]
fn sweep_on_small_dictionary_and_fault_injection() {
    let d = gen_random(5, 10, 11).unwrap();
    let solver = SolverConfig::default();
    let (q, qm) = crate::capacity::capacity_sets(&d, &solver).unwrap();
    let config = OracleSweepConfig {
        supports: 40,
        seed: 2,
        ..OracleSweepConfig::default()
    };
    let report = oracle_sweep(&d, &q, &qm, &config).unwrap();
    assert_eq!(report.supports, 40);
    assert!(report.violations.is_empty(), "{:?}", report.violations);
    assert!(report.matchings_checked > 0);

    let faulty = OracleSweepConfig {
        capacity_scale: 0.5,
        ..config
    };
    let report = oracle_sweep(&d, &q, &qm, &faulty).unwrap();
    assert!(!report.violations.is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn greedy_is_a_partition_and_never_beats_the_optimum(
        seed in 0u64..10_000,
        half in 1usize..5,
    ) {
        let l = 12;
        let qm = random_matrix(l, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
        let s = Support::random(&mut rng, l, 2 * half);
        let greedy = greedy_pair_partition(&qm, &s).unwrap();
        prop_assert!(PairPartition::new(greedy.pairs.clone(), &s).is_ok());
        let (_, best) = optimal_matching(&qm, &s).unwrap();
        prop_assert!(greedy.sum(&qm) >= best - 1e-12);
    }
}
