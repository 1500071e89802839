use forage_core::agents::{threshold_decide, Decision};
use forage_core::env::{lidar_scan, patch_reward, reset, Action, ObjectKind, WorldConfig};
use forage_core::optimal::{discounted_mvt_leave_step, PatchSchedule, DEFAULT_HORIZON};
use forage_core::stats::{anova_oneway, linear_regression, pca, pearson, t_test_welch};
use proptest::prelude::*;

fn sample(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0..50.0f64, n)
}

proptest! {
    #[test]
    fn reward_strictly_decreases(n in 0u32..5000, k in 1u32..200) {
        let c = WorldConfig::default();
        prop_assert!(patch_reward(n + k, c.n0, c.lambda) < patch_reward(n, c.n0, c.lambda));
    }

    #[test]
    fn cumulative_equals_summed_rewards(t in 0u32..3000, n0 in 0.001..1.0f64, lambda in 0.0001..0.1f64) {
        let s = PatchSchedule::new(n0, lambda);
        let sum: f64 = (0..t).map(|n| s.reward(n)).sum();
        prop_assert!((s.cumulative(t) - sum).abs() <= 1e-11 * sum.max(1e-300) + 1e-15);
    }

    #[test]
    fn observations_are_well_formed(
        x in -16.0..16.0f64,
        y in -16.0..16.0f64,
        heading in -4.0..4.0f64,
        d0 in 0u32..400,
        d1 in 0u32..400,
        distance in 5.0..12.0f64,
    ) {
        let config = WorldConfig::default().with_distance(distance);
        let mut state = reset(&config, 0).unwrap();
        state.position = [x, y];
        state.heading = heading;
        state.depletion = [d0, d1];
        let obs = lidar_scan(&state, &config, 0.0, Action::idle());
        prop_assert_eq!(obs.rays.len(), config.sensor.rays);
        for ray in &obs.rays {
            prop_assert!((0.0..=1.0).contains(&ray.distance));
            let hot = ray.kind.one_hot();
            prop_assert_eq!(hot.iter().sum::<f64>(), 1.0);
            prop_assert_eq!(ray.kind == ObjectKind::Patch, ray.patch.is_some());
            prop_assert!(ray.color.iter().all(|c| (0.0..=1.0).contains(c)));
        }
        prop_assert!(obs.to_vec().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn higher_threshold_never_stays_longer(r in 0.0..0.05f64, a in 0.0..0.05f64, b in 0.0..0.05f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        if threshold_decide(r, lo) == Decision::Leave {
            prop_assert_eq!(threshold_decide(r, hi), Decision::Leave);
        }
    }

    #[test]
    fn ols_residuals_are_orthogonal(x in sample(12), y in sample(12)) {
        let spread = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - x.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assume!(spread > 1e-3);
        let r = linear_regression(&x, &y).unwrap();
        let res: Vec<f64> = x.iter().zip(&y).map(|(x, y)| y - r.intercept - r.slope * x).collect();
        let scale: f64 = y.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
        let xscale: f64 = x.iter().zip(&y).map(|(x, y)| (x * y).abs()).sum::<f64>().max(1.0);
        prop_assert!(res.iter().sum::<f64>().abs() <= 1e-9 * scale);
        prop_assert!(res.iter().zip(&x).map(|(e, x)| e * x).sum::<f64>().abs() <= 1e-9 * xscale);
        prop_assert!((0.0..=1.0).contains(&r.p));
    }

    #[test]
    fn regression_p_equals_pearson_p(x in sample(15), y in sample(15)) {
        let r = linear_regression(&x, &y);
        let c = pearson(&x, &y);
        if let (Ok(r), Ok(c)) = (r, c) {
            prop_assert!((r.p - c.p).abs() <= 1e-10, "{} vs {}", r.p, c.p);
        }
    }

    // equal group sizes, where the Welch and pooled t statistics coincide
    #[test]
    fn two_group_anova_is_t_squared(a in sample(9), b in sample(9)) {
        if let (Ok(f), Ok(t)) = (anova_oneway(&[a.clone(), b.clone()]), t_test_welch(&a, &b)) {
            prop_assert!((f.f - t.t * t.t).abs() <= 1e-9 * f.f.max(1.0));
        }
    }

    #[test]
    fn pca_is_orthonormal_complete_and_order_free(
        rows in prop::collection::vec(prop::collection::vec(-10.0..10.0f64, 3), 6..40),
        shift in 1usize..39,
    ) {
        let p = pca(&rows).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = p.components[i].iter().zip(&p.components[j]).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((dot - want).abs() <= 1e-9);
            }
        }
        let total: f64 = p.explained_variance_ratio.iter().sum();
        prop_assert!(p.explained_variance_ratio.iter().all(|r| *r >= -1e-12));
        prop_assert!(total <= 1.0 + 1e-9);
        for row in &rows {
            let s = p.project(row, 3);
            for (k, v) in row.iter().enumerate() {
                let back = p.mean[k] + (0..3).map(|c| s[c] * p.components[c][k]).sum::<f64>();
                prop_assert!((back - v).abs() <= 1e-9);
            }
        }
        let mut shuffled = rows.clone();
        shuffled.rotate_left(shift % rows.len());
        let q = pca(&shuffled).unwrap();
        for (a, b) in p.explained_variance_ratio.iter().zip(&q.explained_variance_ratio) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn doubling_the_horizon_moves_leave_step_at_most_one(tau in 20u32..120, g in 0usize..4) {
        let gamma = [0.99, 0.995, 0.998, 0.999][g];
        let s = PatchSchedule::default();
        let a = discounted_mvt_leave_step(tau, gamma, DEFAULT_HORIZON, &s, 1000).unwrap();
        let b = discounted_mvt_leave_step(tau, gamma, 2 * DEFAULT_HORIZON, &s, 1000).unwrap();
        prop_assert!((i64::from(a.leave_step) - i64::from(b.leave_step)).abs() <= 1);
    }
}
