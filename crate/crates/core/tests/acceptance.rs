//! Acceptance suite: every criterion runs at its stated tolerance against an
//! independent oracle and prints one pass line (run with `-- --nocapture` to
//! see them). Criterion 09 (byte-identical CLI outputs) lives in the CLI
//! crate's acceptance suite.

mod common;

use std::time::{Duration, Instant};

use losvm_core::dataset::{standardize, synth_dirty, DataMatrix};
use losvm_core::kernel::{
    gamma_scott, gamma_silverman, gamma_sklearn, KernelContext, KernelKind,
};
use losvm_core::losvm::{
    leave_out_eval, leave_out_eval_retrained, redistribute_alpha, run_losvm, swap_out,
    ScoreMethod,
};
use losvm_core::metrics::{auroc, average_precision, build_report, ScoredPoint};
use losvm_core::solver::{
    decision_score_index, init_model, objective, optimize, select_violating_pair, smo_step,
    train, Variant,
};
use losvm_core::total_variance;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn rbf_ctx(data: &DataMatrix, gamma: f64) -> KernelContext {
    KernelContext::new(data, KernelKind::Rbf { gamma })
}

/// Shared instance family for the warm/cold and non-support-vector checks:
/// 50 random instances, N in [20, 60], d in {2, 5}, Silverman gamma, C = 1.
fn warm_cold_instances() -> Vec<(DataMatrix, f64, Variant)> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    (0..50)
        .map(|i| {
            let n = rng.random_range(20..=60);
            let d = if i % 2 == 0 { 2 } else { 5 };
            let data = common::random_points(n, d, &mut rng);
            let var = total_variance(&data).unwrap();
            let gamma = gamma_silverman(n, d, var).unwrap();
            let variant = if i % 4 < 2 { Variant::Svdd } else { Variant::Ocsvm };
            (data, gamma, variant)
        })
        .collect()
}

#[test]
fn a01_warm_cold_retrain_equivalence() {
    let started = Instant::now();
    let mut checked = 0usize;
    for (data, gamma, variant) in warm_cold_instances() {
        let mut ctx = rbf_ctx(&data, gamma);
        let mut model = train(&mut ctx, variant, 1.0, 1e-9).unwrap();
        for t in model.sv_indices() {
            let outcome = leave_out_eval(&mut model, &mut ctx, t).unwrap();
            assert_eq!(outcome.method, ScoreMethod::WarmRetrain);
            let warm = outcome.retrained_objective.unwrap();

            let reduced = data.without_row(t);
            let mut cold_ctx = rbf_ctx(&reduced, gamma);
            let cold_model = train(&mut cold_ctx, variant, 1.0, 1e-9).unwrap();
            let cold = objective(&cold_model, &cold_ctx);

            let rel = (warm - cold).abs() / cold.abs().max(1.0);
            assert!(
                rel <= 1e-6,
                "warm {warm} vs cold {cold}: relative error {rel:.3e} (variant {variant})"
            );
            checked += 1;
        }
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed < Duration::from_secs(60),
        "warm/cold sweep took {elapsed:?}"
    );
    println!(
        "[acceptance] 01 warm/cold retrain equivalence <= 1e-6: PASS \
         ({checked} support vectors, {elapsed:.2?})"
    );
}

#[test]
fn a02_leaving_out_non_support_vectors_changes_nothing() {
    let mut checked = 0usize;
    for (data, gamma, variant) in warm_cold_instances() {
        let mut ctx = rbf_ctx(&data, gamma);
        let mut model = train(&mut ctx, variant, 1.0, 1e-9).unwrap();
        let full_objective = objective(&model, &ctx);
        let non_svs: Vec<usize> = (0..model.active_size())
            .filter(|&t| model.alpha()[t] == 0.0)
            .collect();
        for t in non_svs {
            let direct = decision_score_index(&model, &mut ctx, t).unwrap();
            let outcome = leave_out_eval_retrained(&mut model, &mut ctx, t).unwrap();
            assert_eq!(
                outcome.pair_updates, 0,
                "restricted state of a non-support vector must already be optimal"
            );
            let restricted = outcome.retrained_objective.unwrap();
            assert!(
                (restricted - full_objective).abs() <= 1e-12,
                "objective moved: {full_objective} -> {restricted}"
            );
            assert!((outcome.score - direct).abs() <= 1e-12);
            checked += 1;
        }
    }
    println!(
        "[acceptance] 02 non-support-vector removal: objective unchanged <= 1e-12, \
         0 pair updates: PASS ({checked} points)"
    );
}

#[test]
fn a03_converged_objective_matches_enumeration_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0A03);
    for case in 0..100 {
        let n = rng.random_range(2..=8usize);
        let data = common::random_points(n, 2, &mut rng);
        let gamma = rng.random_range(0.3..3.0);
        let variant = if case % 2 == 0 { Variant::Svdd } else { Variant::Ocsvm };
        let mut ctx = rbf_ctx(&data, gamma);
        let model = train(&mut ctx, variant, 1.0, 1e-10).unwrap();
        let solved = objective(&model, &ctx);

        let points: Vec<Vec<f64>> = (0..n).map(|i| data.row(i).to_vec()).collect();
        let brute = common::brute_force_qp(&points, gamma, variant);
        assert!(
            (solved - brute).abs() <= 1e-5,
            "case {case} (n={n}, gamma={gamma:.3}, {variant}): solver {solved} vs \
             enumeration {brute}"
        );
    }
    println!(
        "[acceptance] 03 QP objective vs subset-enumeration oracle <= 1e-5: PASS \
         (100 instances, n <= 8)"
    );
}

#[test]
fn a04_gradient_maintained_within_1e10_of_dense_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0A04);
    let mut step_checks = 0usize;
    let mut redistribution_checks = 0usize;
    for run in 0..20 {
        let n = rng.random_range(10..=40usize);
        let d = if run % 2 == 0 { 2 } else { 3 };
        let data = common::random_points(n, d, &mut rng);
        let gamma = rng.random_range(0.5..2.0);
        let variant = if run % 2 == 0 { Variant::Svdd } else { Variant::Ocsvm };
        let mut ctx = rbf_ctx(&data, gamma);

        let check = |model: &losvm_core::SvmModel, ctx: &KernelContext| {
            let rows: Vec<Vec<f64>> = (0..ctx.len()).map(|i| ctx.point(i).to_vec()).collect();
            let dense = common::dense_gradient(model, &rows, gamma);
            for (g, d) in model.gradient()[..model.active_size()].iter().zip(&dense) {
                assert!(
                    (g - d).abs() <= 1e-10,
                    "maintained gradient {g} vs dense {d}"
                );
            }
        };

        // every solver step, driven from the cold start
        let mut model = init_model(&mut ctx, variant, 1.0, 1e-8).unwrap();
        while let Some((i, k)) = select_violating_pair(&model) {
            smo_step(&mut model, &mut ctx, i, k);
            check(&model, &ctx);
            step_checks += 1;
            assert!(model.pair_updates() < 100_000, "runaway solve");
        }
        optimize(&mut model, &mut ctx).unwrap();

        // every redistribution: permanently remove three support vectors
        for _ in 0..3 {
            let sv = match model.sv_indices().first() {
                Some(&sv) => sv,
                None => break,
            };
            let last = swap_out(&mut model, &mut ctx, sv).unwrap();
            redistribute_alpha(&mut model, &mut ctx, last).unwrap();
            check(&model, &ctx);
            redistribution_checks += 1;
            optimize(&mut model, &mut ctx).unwrap();
            check(&model, &ctx);
        }
    }
    println!(
        "[acceptance] 04 incremental gradient vs dense K*alpha - p <= 1e-10: PASS \
         ({step_checks} steps, {redistribution_checks} redistributions)"
    );
}

#[test]
fn a05_ranking_metrics_match_counting_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0A05);
    let mut tie_cases = 0usize;
    for case in 0..1000 {
        let n = rng.random_range(2..=200usize);
        let mut flags: Vec<bool> = (0..n).map(|_| rng.random_bool(0.25)).collect();
        flags[0] = true;
        if n > 1 {
            flags[1] = false;
        }
        let scores: Vec<f64> = if case % 50 == 0 {
            tie_cases += 1;
            vec![1.5; n]
        } else {
            // coarse grid forces plenty of ties
            (0..n).map(|_| rng.random_range(0..40) as f64 / 8.0).collect()
        };
        let ids: Vec<u64> = (0..n as u64).collect();

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            scores[b]
                .partial_cmp(&scores[a])
                .unwrap()
                .then_with(|| ids[a].cmp(&ids[b]))
        });
        let ranked_flags: Vec<bool> = order.iter().map(|&i| flags[i]).collect();

        let avep = average_precision(&ranked_flags).unwrap();
        let roc = auroc(&scores, &flags).unwrap();
        let avep_oracle = common::avep_brute(&scores, &ids, &flags);
        let roc_oracle = common::auroc_brute(&scores, &flags);
        assert!(
            (avep - avep_oracle).abs() <= 1e-12,
            "case {case}: avep {avep} vs oracle {avep_oracle}"
        );
        assert!(
            (roc - roc_oracle).abs() <= 1e-12,
            "case {case}: auroc {roc} vs oracle {roc_oracle}"
        );
        if case % 50 == 0 {
            assert_eq!(roc, 0.5, "all-ties ranking must score exactly one half");
        }
    }
    println!(
        "[acceptance] 05 AveP/AUROC vs O(N^2) counting oracles <= 1e-12: PASS \
         (1000 rankings, {tie_cases} all-tie cases)"
    );
}

#[test]
fn a06_bandwidth_heuristics() {
    // Scott and Silverman coincide bitwise at d = 2: the inner Silverman
    // factor (d+2)/4 is exactly one.
    for n in [1usize, 2, 10, 64, 100, 977, 10_000] {
        for var in [0.1, 0.5, 1.0, 2.0, 3.7] {
            let scott = gamma_scott(n, 2, var).unwrap();
            let silverman = gamma_silverman(n, 2, var).unwrap();
            assert_eq!(scott, silverman, "n={n}, var={var}");
        }
    }

    // direct evaluation of 0.5 * (100 * 6 / 4)^(2/8) / 1
    let g = gamma_silverman(100, 4, 1.0).unwrap();
    let direct = 0.5 * 150.0f64.powf(0.25);
    assert!((g - direct).abs() <= 1e-12);
    assert!((g - 1.74982).abs() <= 1e-4, "silverman(100, 4, 1) = {g}");

    // the sklearn heuristic has no data-set-size input at all
    let small = gamma_sklearn(3, 1.25).unwrap();
    let large = gamma_sklearn(3, 1.25).unwrap();
    assert_eq!(small, large);
    assert_eq!(small, 1.0 / (3.0 * 1.25));

    println!(
        "[acceptance] 06 bandwidth heuristics: scott == silverman at d=2, \
         silverman(100,4,1) = {g:.6}, sklearn size-free: PASS"
    );
}

#[test]
fn a07_iterative_removal_beats_plain_slack_scoring() {
    let started = Instant::now();
    let mut leave_out_sum = 0.0;
    let mut plain_sum = 0.0;
    let seeds = 10u64;
    for seed in 0..seeds {
        let data = standardize(&synth_dirty(200, 25, seed)).unwrap();
        let n = data.n_rows();
        let var = total_variance(&data).unwrap();
        let gamma = gamma_silverman(n, 2, var).unwrap();

        let mut ctx = rbf_ctx(&data, gamma);
        let (report, _) = run_losvm(&mut ctx, Variant::Svdd, 1.0, 1e-4, 25, 25).unwrap();
        leave_out_sum += report.metrics.unwrap().adjusted_average_precision;

        let mut plain_ctx = rbf_ctx(&data, gamma);
        let model = train(&mut plain_ctx, Variant::Svdd, 1.0, 1e-4).unwrap();
        let points: Vec<ScoredPoint> = (0..n)
            .map(|t| ScoredPoint {
                id: plain_ctx.id(t),
                score: decision_score_index(&model, &mut plain_ctx, t).unwrap(),
                outlier: plain_ctx.label(t),
                removed_in_batch: None,
                method: None,
            })
            .collect();
        let plain_report = build_report(points);
        plain_sum += plain_report.metrics.unwrap().adjusted_average_precision;
    }
    let elapsed = started.elapsed();
    let leave_out_mean = leave_out_sum / seeds as f64;
    let plain_mean = plain_sum / seeds as f64;
    assert!(
        leave_out_mean > plain_mean,
        "mean AdjAveP: leave-out removal {leave_out_mean:.4} vs plain slack {plain_mean:.4}"
    );
    assert!(elapsed < Duration::from_secs(300), "took {elapsed:?}");
    println!(
        "[acceptance] 07 masking: leave-out removal AdjAveP {leave_out_mean:.4} > \
         plain slack {plain_mean:.4}: PASS ({elapsed:.2?})"
    );
}

#[test]
fn a08_batching_trades_wall_time_without_quality_loss() {
    let seeds = 5u64;
    let mut wall_coarse = Duration::ZERO;
    let mut wall_fine = Duration::ZERO;
    let mut auroc_gap_sum = 0.0;
    for seed in 0..seeds {
        let data = standardize(&synth_dirty(1000, 50, seed)).unwrap();
        let n = data.n_rows();
        let var = total_variance(&data).unwrap();
        let gamma = gamma_silverman(n, 2, var).unwrap();

        let mut ctx4 = rbf_ctx(&data, gamma);
        let t0 = Instant::now();
        let (report4, trace4) = run_losvm(&mut ctx4, Variant::Svdd, 1.0, 1e-4, 20, 4).unwrap();
        wall_coarse += t0.elapsed();
        assert_eq!(trace4.batches.len(), 4);

        let mut ctx20 = rbf_ctx(&data, gamma);
        let t0 = Instant::now();
        let (report20, trace20) = run_losvm(&mut ctx20, Variant::Svdd, 1.0, 1e-4, 20, 20).unwrap();
        wall_fine += t0.elapsed();
        assert_eq!(trace20.batches.len(), 20);

        let a4 = report4.metrics.unwrap().auroc;
        let a20 = report20.metrics.unwrap().auroc;
        auroc_gap_sum += (a4 - a20).abs();
    }
    let mean_gap = auroc_gap_sum / seeds as f64;
    assert!(
        wall_coarse < wall_fine,
        "4 batches ({wall_coarse:?}) should be faster than 20 ({wall_fine:?})"
    );
    assert!(mean_gap <= 0.05, "mean |AUROC(b=4) - AUROC(b=20)| = {mean_gap:.4}");
    println!(
        "[acceptance] 08 batching: wall {wall_coarse:.2?} (b=4) < {wall_fine:.2?} (b=20), \
         mean AUROC gap {mean_gap:.4} <= 0.05: PASS"
    );
}

#[test]
fn a10_cached_and_uncached_pipelines_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0A10);
    for case in 0..10 {
        let n_cluster = rng.random_range(30..=60);
        let n_noise = rng.random_range(4..=10);
        let data = standardize(&synth_dirty(n_cluster, n_noise, 1000 + case)).unwrap();
        let var = total_variance(&data).unwrap();
        let gamma = gamma_silverman(data.n_rows(), 2, var).unwrap();
        let (r, b) = if case % 2 == 0 { (6, 3) } else { (0, 1) };

        let mut cached = KernelContext::new(&data, KernelKind::Rbf { gamma });
        let (report_cached, _) = run_losvm(&mut cached, Variant::Svdd, 1.0, 1e-6, r, b).unwrap();

        let mut plain =
            KernelContext::with_cache_budget(&data, KernelKind::Rbf { gamma }, None);
        let (report_plain, _) = run_losvm(&mut plain, Variant::Svdd, 1.0, 1e-6, r, b).unwrap();

        for (a, b) in report_cached.entries.iter().zip(&report_plain.entries) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.rank, b.rank);
            assert!(
                (a.score - b.score).abs() <= 1e-12,
                "id {}: cached {} vs uncached {}",
                a.id,
                a.score,
                b.score
            );
            assert_eq!(a.removed_in_batch, b.removed_in_batch);
        }
    }
    println!(
        "[acceptance] 10 cache-enabled scores equal cache-disabled <= 1e-12: PASS \
         (10 instances, removals included)"
    );
}
