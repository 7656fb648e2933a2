use std::sync::Arc;

use logtm_core::bridge::lift_to_ball;
use logtm_core::euler_lagrange::potential_f;
use logtm_core::growth::{GrowthFamily, GrowthSpec};
use logtm_core::kernel::{b0_cross, b0_radial, nodal_masses};
use logtm_core::maximize::pav_nonincreasing;
use logtm_core::moser::{moser_grid, moser_profile};
use logtm_core::radial::{
    constraint_norm, dim_params, grad_norm, lp_norm, rescale_to_ball, NormKind, RadialGrid,
    RadialProfile,
};
use logtm_core::rearrange::schwarz_symmetrize;
use logtm_core::samples::{random_feasible_profile, random_smooth_profile, random_step_profile};
use proptest::prelude::*;

fn unit_grid(cells: usize) -> Arc<RadialGrid> {
    Arc::new(RadialGrid::uniform(1.0, cells).unwrap())
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn b0_is_quadratic(seed in 0u64..10_000, lambda in 0.01f64..50.0, n in 2usize..=4) {
        let p = dim_params(n).unwrap();
        let v = random_step_profile(unit_grid(256), 6, seed).unwrap();
        let b = b0_radial(&v, &p).unwrap();
        let bl = b0_radial(&v.scaled(lambda), &p).unwrap();
        prop_assert!(close(bl, lambda * lambda * b, 1e-12));
    }

    #[test]
    fn b0_cross_is_symmetric_and_bilinear(s1 in 0u64..10_000, s2 in 0u64..10_000, a in -3.0f64..3.0) {
        let p = dim_params(3).unwrap();
        let g = unit_grid(128);
        let v = random_smooth_profile(g.clone(), s1).unwrap();
        let w = random_step_profile(g.clone(), 5, s2).unwrap();
        let vw = b0_cross(&v, &w, &p).unwrap();
        prop_assert_eq!(vw, b0_cross(&w, &v, &p).unwrap());
        let sum = v.with_values(v.values().iter().zip(w.values()).map(|(x, y)| x + a * y).collect()).unwrap();
        let lhs = b0_cross(&sum, &v, &p).unwrap();
        let rhs = b0_cross(&v, &v, &p).unwrap() + a * vw;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (lhs.abs() + rhs.abs() + 1.0));
        // the diagonal of the cross form is the quadratic form
        let diag = b0_cross(&v, &v, &p).unwrap();
        prop_assert!(close(diag, b0_radial(&v, &p).unwrap(), 1e-12));
    }

    #[test]
    fn nodal_masses_are_nonnegative(seed in 0u64..10_000, n in 2usize..=5) {
        let p = dim_params(n).unwrap();
        let v = random_smooth_profile(unit_grid(64), seed).unwrap();
        prop_assert!(nodal_masses(&v, &p).iter().all(|&m| m >= 0.0));
    }

    #[test]
    fn potential_is_nonincreasing(seed in 0u64..10_000, n in 2usize..=3) {
        let p = dim_params(n).unwrap();
        let g = Arc::new(RadialGrid::uniform(3.0, 300).unwrap());
        let v = random_smooth_profile(g, seed).unwrap();
        prop_assert!(potential_f(&v, &p).is_ok());
    }

    #[test]
    fn symmetrization_is_equimeasurable(seed in 0u64..10_000, n in 2usize..=3) {
        let p = dim_params(n).unwrap();
        let v = random_smooth_profile(unit_grid(1024), seed).unwrap();
        let s = schwarz_symmetrize(&v, &p).unwrap();
        prop_assert!(s.is_nonincreasing(0.0));
        for q in [1.0, 2.0] {
            let a = lp_norm(&v, q, &p).unwrap();
            let b = lp_norm(&s, q, &p).unwrap();
            prop_assert!(close(a, b, 1e-4), "q = {}: {} vs {}", q, a, b);
        }
        prop_assert!(grad_norm(&s, &p) <= grad_norm(&v, &p) + 1e-4);
    }

    #[test]
    fn pav_output_is_a_projection(values in proptest::collection::vec(-5.0f64..5.0, 1..60), seed in 0u64..1000) {
        let weights: Vec<f64> = (0..values.len()).map(|k| 0.1 + ((k as u64 * 7 + seed) % 13) as f64).collect();
        let out = pav_nonincreasing(&values, &weights);
        prop_assert!(out.windows(2).all(|w| w[0] >= w[1] - 1e-12));
        let mean_in: f64 = values.iter().zip(&weights).map(|(x, w)| x * w).sum();
        let mean_out: f64 = out.iter().zip(&weights).map(|(x, w)| x * w).sum();
        prop_assert!((mean_in - mean_out).abs() <= 1e-9 * (1.0 + mean_in.abs()));
        prop_assert_eq!(pav_nonincreasing(&out, &weights), out);
    }

    #[test]
    fn rescaling_lands_in_the_unit_ball(seed in 0u64..10_000, factor in 0.1f64..100.0, full in any::<bool>()) {
        let p = dim_params(2).unwrap();
        let kind = if full { NormKind::Full } else { NormKind::Gradient };
        let u = random_smooth_profile(Arc::new(RadialGrid::uniform(4.0, 200).unwrap()), seed).unwrap();
        let r = rescale_to_ball(&u.scaled(factor), kind, &p);
        prop_assert!(constraint_norm(&r, kind, &p) <= 1.0 + 1e-12);
    }

    #[test]
    fn critical_growth_is_nondecreasing(beta in -2.0f64..0.0, c in 0.1f64..10.0, s in 0.0f64..4.0, ds in 1e-6f64..0.5) {
        let p = dim_params(2).unwrap();
        for spec in [GrowthSpec::ball_critical(beta, c, p).unwrap(), GrowthSpec::space_critical(beta, c, p).unwrap()] {
            prop_assert!(spec.value(s + ds).unwrap() >= spec.value(s).unwrap());
            prop_assert!(spec.derivative(s).unwrap() >= 0.0);
        }
    }

    #[test]
    fn growth_round_trips_through_text(beta in -2.0f64..0.0, c in 0.1f64..10.0, ball in any::<bool>()) {
        let p = dim_params(2).unwrap();
        let family = if ball { GrowthFamily::BallCritical { beta, c } } else { GrowthFamily::SpaceCritical { beta, c } };
        let spec = GrowthSpec::new(family, p).unwrap();
        prop_assert_eq!(GrowthSpec::from_key_value(&spec.to_key_value()).unwrap(), spec);
    }

    #[test]
    fn growth_even_extension(beta in -2.0f64..0.0, s in 0.0f64..3.0) {
        let p = dim_params(2).unwrap();
        let spec = GrowthSpec::space_critical(beta, 1.0, p).unwrap();
        prop_assert_eq!(spec.value(-s).unwrap(), spec.value(s).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn lifts_stay_feasible(seed in 0u64..10_000) {
        let p = dim_params(2).unwrap();
        let g = Arc::new(RadialGrid::default_layout(8.0, 512).unwrap());
        let u = random_feasible_profile(g, NormKind::Full, &p, seed).unwrap();
        let lift = lift_to_ball(&u, &p).unwrap();
        prop_assert!(grad_norm(&lift, &p) <= 1.0 + 1e-6);
    }
}

#[test]
fn moser_profiles_have_unit_gradient_norm() {
    for n_dim in [2, 3] {
        let p = dim_params(n_dim).unwrap();
        for n in [10u64, 100, 1000, 10_000] {
            let u = moser_profile(n, &p, Arc::new(moser_grid(n).unwrap())).unwrap();
            let gn = grad_norm(&u, &p);
            assert!((gn - 1.0).abs() < 1e-4, "N = {n_dim}, n = {n}: {gn}");
        }
    }
}

#[test]
fn profile_csv_round_trip() {
    let g = Arc::new(RadialGrid::default_layout(2.0, 64).unwrap());
    let u = RadialProfile::from_fn(g, |r| (-r).exp() / 3.0).unwrap();
    assert_eq!(RadialProfile::from_csv(&u.to_csv()).unwrap(), u);
}
