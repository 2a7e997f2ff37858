//! Property tests for the weighting formulas, percentile threshold, trace
//! round-trip, and filter semantics.

use proptest::prelude::*;

use nurd_core::nurd::{
    adjust, calibration_term, latency_indicator, percentile_nearest_rank, weight, RHO_CAP,
};
use nurd_core::trace::{
    filter_jobs, generate_synthetic, parse_canonical, write_canonical, LatencyShape,
    SyntheticConfig,
};

proptest! {
    #[test]
    fn weight_stays_within_epsilon_and_one(
        z in 1e-6..=0.999999f64,
        rho in 0.0..1e6f64,
        alpha in 0.01..2.0f64,
        epsilon in 1e-4..0.999f64,
    ) {
        let delta = calibration_term(rho, alpha);
        let w = weight(z, delta, epsilon);
        prop_assert!(w >= epsilon);
        prop_assert!(w <= 1.0);
    }

    #[test]
    fn calibration_term_range(rho in 0.0..1e9f64, alpha in 0.01..2.0f64) {
        let delta = calibration_term(rho, alpha);
        prop_assert!(delta > -alpha);
        prop_assert!(delta <= 1.0 - alpha);
    }

    #[test]
    fn adjustment_only_amplifies(y_hat in 0.0..1e6f64, w in 0.05..=1.0f64) {
        let y_adj = adjust(y_hat, w);
        prop_assert!(y_adj >= y_hat);
    }

    #[test]
    fn latency_indicator_is_capped_and_nonnegative(
        c_fin in prop::collection::vec(-1.0..1.0f64, 1..8),
        shift in prop::collection::vec(-1.0..1.0f64, 1..8),
    ) {
        let dim = c_fin.len().min(shift.len());
        let c_fin = &c_fin[..dim];
        let c_run: Vec<f64> = c_fin.iter().zip(&shift[..dim]).map(|(a, b)| a + b).collect();
        let rho = latency_indicator(c_fin, &c_run, RHO_CAP);
        prop_assert!(rho >= 0.0);
        prop_assert!(rho <= RHO_CAP);
    }

    #[test]
    fn flag_decisions_are_monotone_in_propensity(
        y_hat in 0.1..1000.0f64,
        tau in 0.1..1000.0f64,
        rho in 0.0..1e6f64,
        z1 in 1e-6..=0.999999f64,
        z2 in 1e-6..=0.999999f64,
        epsilon in 1e-4..0.5f64,
    ) {
        let (lo, hi) = if z1 <= z2 { (z1, z2) } else { (z2, z1) };
        let delta = calibration_term(rho, 0.5);
        let flag = |z: f64| adjust(y_hat, weight(z, delta, epsilon)) >= tau;
        // A higher propensity score can only make flagging less likely.
        if flag(hi) {
            prop_assert!(flag(lo));
        }
    }

    #[test]
    fn percentile_matches_brute_force(
        mut latencies in prop::collection::vec(0.001..1e5f64, 1..300),
        p in 1u32..100,
    ) {
        let value = percentile_nearest_rank(&latencies, p as f64);
        latencies.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let rank = ((p as usize) * latencies.len()).div_ceil(100).max(1);
        prop_assert_eq!(value, latencies[rank - 1]);
    }

    #[test]
    fn filter_jobs_is_idempotent(sizes in prop::collection::vec(10usize..400, 0..12), min in 1usize..400) {
        let jobs: Vec<_> = sizes
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                generate_synthetic(&SyntheticConfig {
                    n_tasks: n.max(10),
                    feature_dim: 1,
                    n_checkpoints: 4,
                    latency_shape: LatencyShape::Bimodal,
                    seed: i as u64,
                    ..Default::default()
                })
                .unwrap()
            })
            .collect();
        let once = filter_jobs(jobs, min);
        prop_assert!(once.iter().all(|j| j.n_tasks() >= min));
        let twice = filter_jobs(once.clone(), min);
        prop_assert_eq!(once.len(), twice.len());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn canonical_round_trip_is_exact(seed in 0u64..1000, shape_pick in 0u8..2) {
        let shape = if shape_pick == 0 {
            LatencyShape::Bimodal
        } else {
            LatencyShape::LongTail
        };
        let job = generate_synthetic(&SyntheticConfig {
            n_tasks: 30,
            feature_dim: 3,
            n_checkpoints: 8,
            latency_shape: shape,
            seed,
            ..Default::default()
        })
        .unwrap();
        let mut tasks_csv = Vec::new();
        let mut snaps_csv = Vec::new();
        write_canonical(std::slice::from_ref(&job), &mut tasks_csv, &mut snaps_csv).unwrap();
        let reparsed = parse_canonical(&tasks_csv[..], &snaps_csv[..]).unwrap();
        prop_assert_eq!(reparsed.len(), 1);
        let back = &reparsed[0];
        prop_assert_eq!(&back.job_id, &job.job_id);
        prop_assert_eq!(&back.checkpoints, &job.checkpoints);
        for (a, b) in job.tasks.iter().zip(&back.tasks) {
            prop_assert_eq!(&a.task_id, &b.task_id);
            prop_assert_eq!(a.latency, b.latency);
            prop_assert_eq!(&a.snapshots, &b.snapshots);
        }
    }
}
