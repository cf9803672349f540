use exterior_gs::curve::{count_solutions, solve_point, threshold_with, trace_curve, transform_solution, CrossingKind};
use exterior_gs::pohozaev::{boundary_rhs, concentration_ratios, reversed_inequality_slack};
use exterior_gs::profile::{action, mass, nehari_residual, surface_area, Moments};
use exterior_gs::shooter::{slope_anchor, solve_ground_state, ShooterConfig};
use exterior_gs::{CurveConfig, ProblemParams, RadialSolution};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn solve(n: usize, p: f64, lambda: f64, radius: f64) -> RadialSolution {
    let params = ProblemParams::new(n, p, lambda, radius).unwrap();
    solve_ground_state(&params, &ShooterConfig::default(), None).unwrap()
}

#[test]
fn boundary_slope_is_independent_of_the_starting_guess() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(0x5eed);
    for &(n, p, lambda) in &[(3, 4.0, 1.0), (2, 6.0, 4.0), (4, 3.0, 0.25)] {
        let params = ProblemParams::new(n, p, lambda, 1.0).unwrap();
        let anchor = slope_anchor(&params);
        let reference = solve_ground_state(&params, &ShooterConfig::default(), None)
            .unwrap()
            .slope;
        for _ in 0..3 {
            let hint = anchor * 10f64.powf(rng.gen_range(-1.0..1.0));
            let s = solve_ground_state(&params, &ShooterConfig::default(), Some(hint))
                .unwrap()
                .slope;
            assert!(
                ((s - reference) / reference).abs() < 1e-10,
                "({n},{p},{lambda}) hint {hint}: {s} vs {reference}"
            );
        }
    }
}

#[test]
fn peak_height_tracks_the_natural_amplitude() {
    for &(n, p) in &[(3, 4.0), (2, 6.0), (3, 3.0)] {
        for k in -3..=3 {
            let lambda = 10f64.powi(k);
            let sol = solve(n, p, lambda, 1.0);
            let ratio = sol.u_max.powf(p - 2.0) / lambda;
            assert!((1.0..=30.0).contains(&ratio), "({n},{p},{lambda}): {ratio}");
        }
    }
}

#[test]
fn action_equals_power_moment_share_on_ground_states() {
    for &(n, p, lambda) in &[(3, 4.0, 1.0), (2, 4.0, 0.25), (4, 3.0, 4.0)] {
        let sol = solve(n, p, lambda, 1.0);
        let m = Moments::compute(&sol).unwrap();
        let expected = (0.5 - 1.0 / p) * m.power.value;
        let a = action(&sol).unwrap();
        assert!(a > 0.0);
        assert!(((a - expected) / expected).abs() < 1e-8, "{a} vs {expected}");
    }
}

#[test]
fn doubled_profile_is_far_from_the_nehari_manifold() {
    let sol = solve(3, 4.0, 1.0, 1.0);
    let mut doubled = sol.clone();
    for g in &mut doubled.grid {
        g.u *= 2.0;
        g.v *= 2.0;
    }
    doubled.tail.u_match *= 2.0;
    doubled.u_max *= 2.0;
    assert!(nehari_residual(&sol).unwrap() < 1e-8);
    // A + λB scales by 4 and C by 2^p = 16, so the normalized residual is 3/4.
    let r = nehari_residual(&doubled).unwrap();
    assert!(r > 0.5, "{r}");
}

#[test]
fn boundary_terms_agree_at_unit_radius() {
    for &(n, p, lambda) in &[(3, 4.0, 1.0), (2, 6.0, 0.25), (4, 3.0, 64.0)] {
        let sol = solve(n, p, lambda, 1.0);
        let (a, b) = boundary_rhs(&sol).unwrap();
        assert!(((a - b) / a).abs() < 1e-12, "{a} vs {b}");
        let sol2 = solve(n, p, lambda, 2.0);
        let (a2, b2) = boundary_rhs(&sol2).unwrap();
        assert!((a2 / b2 - 2.0).abs() < 1e-10);
    }
}

#[test]
fn reversed_inequality_matches_the_boundary_flux() {
    for &(n, p, lambda) in &[(3, 4.0, 1.0), (3, 3.0, 0.25), (2, 7.0, 4.0), (4, 3.0, 64.0)] {
        let sol = solve(n, p, lambda, 1.0);
        let slack = reversed_inequality_slack(&sol).unwrap();
        assert!(slack >= -1e-5, "({n},{p},{lambda}): {slack}");

        let m = Moments::compute(&sol).unwrap();
        let nf = n as f64;
        let lhs = (nf - 2.0) * m.grad.value + nf * lambda * m.mass.value - 2.0 * nf / p * m.power.value;
        let flux = surface_area::<f64>(n).unwrap() * sol.slope * sol.slope;
        assert!(((lhs - flux) / flux).abs() < 1e-6, "{lhs} vs {flux}");
    }
}

#[test]
fn mass_concentrates_near_the_boundary_as_lambda_shrinks() {
    let ratios: Vec<f64> = [1e-2, 1e-1, 1.0]
        .iter()
        .map(|&l| concentration_ratios(&solve(3, 4.0, l, 1.0)).unwrap().0)
        .collect();
    assert!(ratios.windows(2).all(|w| w[0] < w[1]), "{ratios:?}");
}

#[test]
fn single_precision_agrees_with_double() {
    let p32 = exterior_gs::problem::ProblemParams::<f32>::new(3, 4.0, 1.0, 1.0).unwrap();
    let s32 = solve_ground_state(&p32, &ShooterConfig::<f32>::default(), None).unwrap();
    let m32 = mass(&s32).unwrap().value as f64;
    let m64 = mass(&solve(3, 4.0, 1.0, 1.0)).unwrap().value;
    assert!(((m32 - m64) / m64).abs() < 1e-5, "{m32} vs {m64}");
}

#[test]
fn curve_points_do_not_depend_on_grid_density() {
    let config = CurveConfig::default();
    let coarse = trace_curve(3, 4.0, 1.0, 1e-2, 1e2, 9, &config).unwrap();
    let fine = trace_curve(3, 4.0, 1.0, 1e-2, 1e2, 17, &config).unwrap();
    for (i, pt) in coarse.points.iter().enumerate() {
        let twin = &fine.points[2 * i];
        assert!(((pt.lambda - twin.lambda) / pt.lambda).abs() < 1e-14);
        assert!(((pt.d - twin.d) / pt.d).abs() < 1e-8, "{} vs {}", pt.d, twin.d);
    }
}

#[test]
fn threshold_level_is_a_single_tangency() {
    let config = CurveConfig::default();
    let (rep, curve) = threshold_with(3, 4.0, 1.0, &config, &mut |_| None).unwrap();
    let at = count_solutions(&curve, rep.eta);
    assert_eq!(at.total(), 1);
    assert_eq!(at.crossings[0].kind, CrossingKind::Tangency);
    assert_eq!(at.transversal(), 0);
    for c in [0.5 * rep.eta, 0.99 * rep.eta] {
        assert_eq!(count_solutions(&curve, c).total(), 0);
    }
    assert_eq!(count_solutions(&curve, 1.5 * rep.eta).transversal(), 2);
}

#[test]
fn rescaled_solution_solves_the_rescaled_problem() {
    let config = CurveConfig::default();
    let base = solve(3, 4.0, 1.0, 1.0);
    let moved = transform_solution(&base, 0.5).unwrap();
    assert_eq!(moved.params.lambda, 4.0);
    let (pt, _) = solve_point(&moved.params, None, &config).unwrap();
    let d = mass(&moved).unwrap().value;
    assert!(((d - pt.d) / pt.d).abs() < 1e-8);
    // Mass scales by R^{N − 4/(p−2)} = R.
    assert!((d / mass(&base).unwrap().value - 0.5).abs() < 1e-10);
}

fn admissible() -> impl Strategy<Value = (usize, f64, f64)> {
    (2usize..=4)
        .prop_flat_map(|n| {
            let hi = if n == 2 {
                8.0
            } else {
                2.0 * n as f64 / (n as f64 - 2.0) - 0.3
            };
            (Just(n), 2.3..hi, -2.0f64..2.0)
        })
        .prop_map(|(n, p, k)| (n, p, 10f64.powf(k)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ground_states_are_positive_and_satisfy_the_identities((n, p, lambda) in admissible()) {
        let params = ProblemParams::new(n, p, lambda, 1.0).unwrap();
        let (pt, sol) = solve_point(&params, None, &CurveConfig::default()).unwrap();
        prop_assert!(sol.check_invariants().is_ok());
        prop_assert!(sol.grid.iter().skip(1).all(|g| g.u > 0.0));
        prop_assert!(sol.slope > 0.0 && sol.r_bar > 1.0);
        prop_assert!(pt.d > 0.0 && pt.action > 0.0);
        prop_assert!(pt.diagnostics.nehari_res < 1e-6);
        prop_assert!(pt.diagnostics.pohozaev_full_res < 1e-4);
        prop_assert!(pt.diagnostics.boundary_res_a18 < 1e-4);
        prop_assert!(pt.diagnostics.boundary_res_a20 < 1e-4);
    }

    #[test]
    fn mass_scales_with_the_radius((n, p, lambda) in admissible(), rho in 0.5f64..2.0) {
        let base = solve(n, p, lambda, 1.0);
        let moved = transform_solution(&base, rho).unwrap();
        let expo = n as f64 - 4.0 / (p - 2.0);
        let ratio = mass(&moved).unwrap().value / mass(&base).unwrap().value;
        prop_assert!((ratio / rho.powf(expo) - 1.0).abs() < 1e-9);
    }
}
