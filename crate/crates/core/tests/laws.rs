use covering_core::analysis::{
    clique_statistic, density_experiment, fit_alpha, p_tau, simulate_idealized_tree, BudgetRule,
    IdealizedTreeConfig,
};
use covering_core::design::verify_with_budget;
use covering_core::geometry::{
    ag_hyperplane_covering, induced_cover, precompute_small_covers, select_induced_params,
};
use covering_core::greedy::{budget_with_beta, uncovered_fraction_at_tau, DEFAULT_BETA};
use covering_core::{
    density, greedy_cover, schonheim_bound, verify, CoveringDesign, DesignParams, GreedyConfig,
    VerifyMode,
};

fn params(v: u32, k: u32, t: u32) -> DesignParams {
    DesignParams::new(v, k, t).unwrap()
}

fn assert_verified_above_bound(d: &CoveringDesign) {
    let r = verify_with_budget(d, VerifyMode::Exhaustive, 50_000_000).unwrap();
    assert_eq!(r.is_covering, Some(true), "{}", d.params());
    assert!(
        d.len() as u64 >= schonheim_bound(d.params()).unwrap().value,
        "{}",
        d.params()
    );
}

#[test]
fn tree_estimates_match_closed_form() {
    for (tau, d, expected) in [(2.0, 2, 0.4472), (1.0, 5, 0.6988)] {
        let est = simulate_idealized_tree(&IdealizedTreeConfig::new(tau, d, 10_000, 11)).unwrap();
        assert!((p_tau(tau, d) - expected).abs() < 1e-4);
        assert!(
            (est.estimate - expected).abs() <= 0.02,
            "tau={tau} D={d}: {}",
            est.estimate
        );
    }
}

#[test]
fn greedy_fraction_at_tau_three_matches_law() {
    let (frac, _) = uncovered_fraction_at_tau(params(150, 3, 2), 3.0, 50, 7).unwrap();
    assert!((frac - 7f64.powf(-0.5)).abs() <= 0.05, "{frac}");
}

#[test]
fn greedy_fraction_approaches_law_as_v_grows() {
    let target = p_tau(2.0, 2);
    let (small, _) = uncovered_fraction_at_tau(params(50, 3, 2), 2.0, 50, 1).unwrap();
    let (large, _) = uncovered_fraction_at_tau(params(200, 3, 2), 2.0, 50, 1).unwrap();
    assert!(
        (large - target).abs() < (small - target).abs(),
        "v=50: {small}, v=200: {large}, law {target}"
    );
}

#[test]
fn mean_density_exceeds_one_and_falls_with_v() {
    let rows = density_experiment(3, 2, &[30, 100], 1000, BudgetRule::default(), 3).unwrap();
    assert!(rows.iter().all(|r| r.mean_density > 1.0));
    assert!(rows[1].mean_density < rows[0].mean_density, "{rows:?}");
    let rows = density_experiment(
        4,
        2,
        &[10, 20],
        50,
        BudgetRule::EarlyAbort { beta: DEFAULT_BETA },
        3,
    )
    .unwrap();
    assert!(rows.iter().all(|r| r.mean_density > 1.0));
}

#[test]
fn density_excess_at_v_100() {
    let early = density_experiment(
        3,
        2,
        &[100],
        1000,
        BudgetRule::EarlyAbort { beta: DEFAULT_BETA },
        5,
    )
    .unwrap();
    let ln_early = (early[0].mean_density - 1.0).ln();
    assert!((ln_early + 1.7).abs() <= 0.3, "{ln_early}");
    let saturated = density_experiment(3, 2, &[100], 1000, BudgetRule::default(), 5).unwrap();
    let ln_sat = (saturated[0].mean_density - 1.0).ln();
    assert!((ln_sat + 2.0).abs() <= 0.1, "{ln_sat}");
}

#[test]
fn fit_on_synthetic_4_3_data_gives_one_third() {
    let pts: Vec<(u32, f64)> = (30..=150)
        .step_by(10)
        .map(|v| (v, 1.0 + 0.7 * f64::from(v).powf(-1.0 / 3.0)))
        .collect();
    let fit = fit_alpha(&pts, 100, 150).unwrap();
    assert!((fit.alpha - 1.0 / 3.0).abs() < 1e-6);
}

#[test]
fn leftover_edges_outside_triangles_are_common() {
    let p = params(40, 3, 2);
    let budget = budget_with_beta(p, DEFAULT_BETA).unwrap();
    let positive = (0..100)
        .filter(|&s| {
            let stat = clique_statistic(p, &GreedyConfig::with_budget(s, budget)).unwrap();
            stat.isolated_fraction().is_some_and(|f| f > 0.0)
        })
        .count();
    assert!(positive > 50, "{positive}");
}

#[test]
fn constructed_designs_respect_schonheim() {
    for (p, t) in [(2, 2), (3, 2), (5, 2), (2, 3), (3, 3)] {
        assert_verified_above_bound(&ag_hyperplane_covering(p, t).unwrap());
    }
    for (v, k, t) in [(7, 3, 2), (10, 4, 2), (12, 4, 3), (15, 5, 2), (30, 6, 3)] {
        for seed in 0..5 {
            let (d, _) = greedy_cover(
                params(v, k, t),
                &GreedyConfig::new(params(v, k, t), seed).unwrap(),
            )
            .unwrap();
            assert_verified_above_bound(&d);
        }
    }
    let p = params(500, 3, 2);
    let cfg = select_induced_params(p).unwrap();
    let cache = precompute_small_covers(3, 2, cfg.ell, None, 0).unwrap();
    let (d, _) = induced_cover(p, &cache, &cfg).unwrap();
    assert_verified_above_bound(&d);
    assert!(density(&d).unwrap().as_f64() <= 2.5);
}

#[test]
fn affine_plane_of_order_three_is_a_steiner_system() {
    let d = ag_hyperplane_covering(3, 2).unwrap();
    assert_eq!(d.len(), 12);
    assert_eq!(density(&d).unwrap().as_f64(), 1.0);
    assert_eq!(
        verify(&d, VerifyMode::Exhaustive).unwrap().is_covering,
        Some(true)
    );
}
