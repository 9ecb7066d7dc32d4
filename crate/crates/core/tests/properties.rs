use approx::assert_relative_eq;
use poa_core::instances::{random_cost, random_game};
use poa_core::metric::{check_metric_axioms, dist};
use poa_core::solver::{dirichlet_flow, poa, solve_we, solve_we_from, SolveOptions};
use poa_core::transforms::{cost_normalize, demand_normalize, NormalizationFactor};
use poa_core::{CostFunction, Game, PathFlow};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cost(seed: u64) -> CostFunction {
    random_cost(&mut ChaCha8Rng::seed_from_u64(seed))
}

fn game(seed: u64) -> Game {
    random_game(&mut ChaCha8Rng::seed_from_u64(seed))
}

fn feasible(g: &Game, seed: u64) -> PathFlow {
    PathFlow(dirichlet_flow(g, &mut ChaCha8Rng::seed_from_u64(seed)))
}

fn opts() -> SolveOptions {
    SolveOptions::with_tol(1e-12)
}

fn simpson<F: Fn(f64) -> f64>(f: F, b: f64, n: usize) -> f64 {
    let h = b / n as f64;
    let mut s = f(0.0) + f(b);
    for i in 1..n {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn derivative_matches_central_difference(seed in any::<u64>(), x in 0.05f64..3.0) {
        let c = cost(seed);
        let h = 1e-6;
        prop_assume!(c.kink_near(x, 1e-4).is_none());
        let fd = (c.value(x + h) - c.value(x - h)) / (2.0 * h);
        let d = c.derivative_value(x);
        prop_assert!((fd - d).abs() <= 1e-5 * (1.0 + d.abs()), "{fd} vs {d}");
    }

    #[test]
    fn integral_matches_simpson(seed in any::<u64>(), x in 0.0f64..3.0) {
        let c = cost(seed);
        let exact = c.integral_value(x);
        let approx = simpson(|y| c.value(y), x, 20_000);
        prop_assert!((exact - approx).abs() <= 1e-6 * (1.0 + exact.abs()), "{exact} vs {approx}");
    }

    #[test]
    fn lipschitz_constant_bounds_differences(seed in any::<u64>(), t in 0.1f64..3.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let c = cost(seed);
        let m = c.lipschitz_on(t);
        let (x, y) = (a * t, b * t);
        prop_assert!((c.value(x) - c.value(y)).abs() <= m * (x - y).abs() * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn arc_flows_are_linear(seed in any::<u64>(), s1 in any::<u64>(), s2 in any::<u64>(), w in 0.0f64..1.0) {
        let g = game(seed);
        let (f1, f2) = (feasible(&g, s1), feasible(&g, s2));
        let mix: Vec<f64> = f1.0.iter().zip(&f2.0).map(|(a, b)| w * a + (1.0 - w) * b).collect();
        let x = g.arc_flows_raw(&mix);
        let (x1, x2) = (g.arc_flows_raw(&f1.0), g.arc_flows_raw(&f2.0));
        for a in 0..g.num_arcs() {
            assert_relative_eq!(x[a], w * x1[a] + (1.0 - w) * x2[a], epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn total_cost_forms_agree(seed in any::<u64>(), fs in any::<u64>()) {
        let g = game(seed);
        let f = feasible(&g, fs);
        let total = g.total_cost(&f).unwrap();
        let x = g.arc_flows(&f).unwrap();
        let by_arc: f64 = x.iter().zip(g.costs()).map(|(xa, c)| xa * c.value(*xa)).sum();
        let pc = g.path_costs(&f).unwrap();
        let by_path: f64 = pc.iter().zip(&f.0).map(|(c, fs)| c * fs).sum();
        assert_relative_eq!(total, by_arc, max_relative = 1e-12);
        assert_relative_eq!(total, by_path, max_relative = 1e-12);
    }

    #[test]
    fn equilibrium_solves_variational_inequality(seed in any::<u64>(), fs in any::<u64>()) {
        let g = game(seed);
        let we = solve_we(&g, &opts()).unwrap();
        prop_assert!(we.converged);
        let f = feasible(&g, fs);
        let pc = g.path_costs(&we.flow).unwrap();
        let vi: f64 = pc.iter().zip(f.0.iter().zip(&we.flow.0)).map(|(c, (a, b))| c * (a - b)).sum();
        prop_assert!(vi >= -1e-9, "VI value {vi}");
        prop_assert!(g.potential(&we.flow).unwrap() <= g.potential(&f).unwrap() + 1e-9);
    }

    #[test]
    fn equilibrium_arc_costs_are_unique(seed in any::<u64>(), fs in any::<u64>()) {
        let g = game(seed);
        let a = solve_we(&g, &opts()).unwrap();
        let b = solve_we_from(&g, &feasible(&g, fs), &opts()).unwrap();
        prop_assert!(a.converged && b.converged);
        for (ca, cb) in a.arc_costs.iter().zip(&b.arc_costs) {
            prop_assert!((ca - cb).abs() <= 1e-5 * (1.0 + ca.abs()), "{ca} vs {cb}");
        }
        assert_relative_eq!(a.total_cost, b.total_cost, max_relative = 1e-6);
    }

    #[test]
    fn metric_axioms_hold(s1 in any::<u64>(), s2 in any::<u64>(), s3 in any::<u64>()) {
        let g1 = game(s1);
        let s = g1.structure().clone();
        let other = |seed| poa_core::instances::random_game_on(s.clone(), &mut ChaCha8Rng::seed_from_u64(seed));
        let report = check_metric_axioms(&g1, &other(s2), &other(s3)).unwrap();
        prop_assert!(report.ok(), "{:?}", report.violations);
        prop_assert_eq!(dist(&g1, &g1).unwrap().value, 0.0);
    }

    #[test]
    fn demand_normalization_rescales_costs(seed in any::<u64>(), fs in any::<u64>(), u in 0.1f64..10.0) {
        let g = game(seed);
        let h = demand_normalize(&g, NormalizationFactor::new(u).unwrap()).unwrap();
        let f = feasible(&g, fs);
        let scaled = PathFlow(f.0.iter().map(|v| v / u).collect());
        assert_relative_eq!(g.total_cost(&f).unwrap(), u * h.total_cost(&scaled).unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn price_of_anarchy_is_normalization_invariant(seed in any::<u64>(), u in 0.1f64..10.0) {
        let g = game(seed);
        let u = NormalizationFactor::new(u).unwrap();
        let base = poa(&g, &opts()).unwrap().poa;
        let psi = poa(&cost_normalize(&g, u).unwrap(), &opts()).unwrap().poa;
        let lambda = poa(&demand_normalize(&g, u).unwrap(), &opts()).unwrap().poa;
        prop_assert!((base - psi).abs() <= 1e-6 && (base - lambda).abs() <= 1e-6, "{base} {psi} {lambda}");
    }
}
