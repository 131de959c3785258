use rankrefine_core::metrics::mae;
use rankrefine_core::SolverConfig;
use rankrefine_experiments::*;
use rankrefine_forest::ForestConfig;

fn benchmark() -> rankrefine_core::Dataset {
    make_synthetic_dataset(BENCHMARK_ROWS, BENCHMARK_DIM, BENCHMARK_NOISE_SD, 7).unwrap()
}

fn grid(accuracies: Vec<f64>, ks: Vec<usize>) -> SweepGrid {
    SweepGrid {
        accuracies,
        ks,
        seeds: 3,
        ..SweepGrid::default()
    }
}

#[test]
fn bound_at_one_half() {
    let r = validate_bound(&[0.5], 1_000_000, 1).unwrap();
    assert!((r[0].empirical_beta - 0.5).abs() <= 0.005, "{:?}", r[0]);
}

#[test]
fn bound_error_shrinks_with_samples() {
    // Average |error| over several seeds at n and 16n; 1/sqrt(n) scaling
    // predicts a 4x reduction, allow anything beyond 2x.
    let alphas = [0.3, 0.6, 0.9];
    let err = |n: usize| -> f64 {
        (0..8u64)
            .flat_map(|seed| validate_bound(&alphas, n, seed).unwrap())
            .map(|r| (r.empirical_beta - r.alpha).abs())
            .sum::<f64>()
    };
    let small = err(10_000);
    let large = err(160_000);
    assert!(large * 2.0 < small, "n=1e4: {small}, n=1.6e5: {large}");
}

#[test]
fn forest_beats_the_mean_on_the_benchmark() {
    let data = benchmark();
    for seed in 0..3 {
        let ctx = prepare_seed(&data, &SweepGrid::default(), &ForestConfig::default(), seed).unwrap();
        let train_mean = ctx.train.targets().iter().sum::<f64>() / ctx.train.len() as f64;
        let targets = ctx.test.targets();
        let mean_mae = mae(&vec![train_mean; targets.len()], &targets).unwrap();
        assert!(
            ctx.mae_reg < mean_mae,
            "seed {seed}: forest {} vs mean {mean_mae}",
            ctx.mae_reg
        );
    }
}

#[test]
fn perfect_ranker_with_thirty_comparisons_helps_a_lot() {
    let recs = run_oracle_sweep(
        &benchmark(),
        &grid(vec![1.0], vec![30]),
        &ForestConfig::default(),
        &SolverConfig::default(),
    )
    .unwrap();
    let beta = mean_beta(&recs, 1.0, 30).unwrap();
    assert!(beta < 0.6, "beta {beta}");
}

#[test]
fn coin_flip_ranker_is_worse_than_an_informative_one() {
    let data = benchmark();
    let recs = run_oracle_sweep(
        &data,
        &grid(vec![0.5, 0.8], vec![20]),
        &ForestConfig::default(),
        &SolverConfig::default(),
    )
    .unwrap();
    assert!(mean_beta(&recs, 0.5, 20).unwrap() > mean_beta(&recs, 0.8, 20).unwrap());

    // A very large variance floor mutes the ranker entirely.
    let muted = SweepGrid {
        clamp_c: 1e6,
        ..grid(vec![0.5], vec![20])
    };
    let recs = run_oracle_sweep(&data, &muted, &ForestConfig::default(), &SolverConfig::default()).unwrap();
    assert!((mean_beta(&recs, 0.5, 20).unwrap() - 1.0).abs() < 1e-3);
}

#[test]
fn comparison_sets_are_shared_across_accuracies_and_nested_in_k() {
    let data = benchmark();
    let ctx = prepare_seed(&data, &SweepGrid::default(), &ForestConfig::default(), 0).unwrap();
    let ref_ids = |sets: &[rankrefine_core::ComparisonSet]| -> Vec<Vec<String>> {
        sets.iter()
            .map(|s| s.outcomes().iter().map(|o| o.ref_id.clone()).collect())
            .collect()
    };
    let a = comparison_sets(&ctx, 0, 0.6, 20).unwrap();
    let b = comparison_sets(&ctx, 0, 0.9, 20).unwrap();
    let c = comparison_sets(&ctx, 0, 0.9, 10).unwrap();
    assert_eq!(a, comparison_sets(&ctx, 0, 0.6, 20).unwrap());
    assert_eq!(ref_ids(&a), ref_ids(&b));
    for (long, short) in b.iter().zip(&c) {
        assert_eq!(&long.outcomes()[..10], short.outcomes());
    }
    let train_ids: Vec<&str> = ctx.train.rows().iter().map(|r| r.id.as_str()).collect();
    assert!(ref_ids(&a).iter().flatten().all(|id| train_ids.contains(&id.as_str())));
}

#[test]
fn noise_floor_keeps_variances_positive() {
    let data = benchmark();
    let ctx = prepare_seed(&data, &SweepGrid::default(), &ForestConfig::default(), 1).unwrap();
    let sets = comparison_sets(&ctx, 0, 0.8, 20).unwrap();
    let noise = VarianceNoise {
        b: 1e6,
        floor: 1e-6,
        master_seed: 0,
    };
    let cell = fuse_cell(&ctx, &sets, &SolverConfig::default(), None, Some(noise)).unwrap();
    assert!(cell.rank_variances.iter().all(|&v| v >= 1e-6));
    assert!(cell.rank_variances.contains(&1e-6));
    assert!(cell.fused.iter().all(|v| v.is_finite()));
}

#[test]
fn zero_noise_matches_the_plain_sweep() {
    let data = benchmark();
    let g = grid(vec![0.8], vec![20]);
    let plain = run_oracle_sweep(&data, &g, &ForestConfig::default(), &SolverConfig::default()).unwrap();
    let noisy = run_noise_sweep(
        &data,
        &[0.0, 1.0],
        &g,
        &NoiseSettings::default(),
        &ForestConfig::default(),
        &SolverConfig::default(),
    )
    .unwrap();
    assert_eq!(noisy[0].beta, mean_beta(&plain, 0.8, 20).unwrap());
    assert_ne!(noisy[1].beta, noisy[0].beta);
}

#[test]
fn stored_beta_is_exact() {
    let recs = run_oracle_sweep(
        &benchmark(),
        &grid(vec![0.7], vec![10]),
        &ForestConfig::default(),
        &SolverConfig::default(),
    )
    .unwrap();
    for r in recs {
        assert_eq!(r.beta, r.mae_post / r.mae_reg);
    }
}
