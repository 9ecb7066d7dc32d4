//! One pass/fail line per acceptance criterion. Exits non-zero if any fails.

use std::time::{Duration, Instant};

use poa_core::convergence::{converge_down, converge_up, fit_rate, DemandSchedule, RateAxis};
use poa_core::instances::{
    parallel_game, pigou, random_game, random_game_on, random_structure, shifted_affine_pair,
    truncation_triple, two_od_game,
};
use poa_core::metric::{check_metric_axioms, dist, naive_distance, PerturbationKind};
use poa_core::sensitivity::{fit_hoelder, sweep, CertificateKind, HoelderPoint};
use poa_core::solver::{
    approximation_threshold, check_approximation_bounds, poa, solve_so, solve_we, SolveOptions,
};
use poa_core::transforms::{
    cost_normalize, demand_normalize, truncate_extend, ExtensionMode, NormalizationFactor,
};
use poa_core::{games_equivalent, CostFunction, Game, PathFlow, DEFAULT_GRID};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SOLVER_TOL: f64 = 1e-12;
const PIGOU_POA_TOL: f64 = 1e-6;
const PIGOU_FLOW_TOL: f64 = 1e-6;
const PIGOU_RUNTIME: Duration = Duration::from_secs(1);
const EXACT_TOL: f64 = 1e-12;
const AXIOM_TRIPLES: usize = 1000;
const INVARIANCE_GAMES: usize = 50;
const INVARIANCE_TOL: f64 = 1e-6;
const UPSILONS: [f64; 3] = [0.5, 2.0, 10.0];
const SHRINK_DELTA_TOL: f64 = 1e-6;
const SOUNDNESS_RADII: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];
const SOUNDNESS_SAMPLES: usize = 32;
const SOUNDNESS_SLACK: f64 = 20.0;
const SOUNDNESS_RUNTIME: Duration = Duration::from_secs(120);
const EXPONENT_RADII: [f64; 8] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8];
const EXPONENT_SAMPLES: usize = 32;
const EXPONENT_SEED: u64 = 1;
const GAMMA_MIN: f64 = 0.9;
const R2_MIN: f64 = 0.95;
const RATE_TOL: f64 = 1e-13;
const DOWN_SLOPE_MIN: f64 = 0.9;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn opts() -> SolveOptions {
    SolveOptions::with_tol(SOLVER_TOL)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn pigou_reproduction() -> Outcome {
    let start = Instant::now();
    let g = pigou();
    let we = solve_we(&g, &opts()).unwrap();
    let so = solve_so(&g, &opts()).unwrap();
    let rho = poa(&g, &opts()).unwrap().poa;
    let elapsed = start.elapsed();

    // Independent oracle: grid search of x² + (1 − x) over x ∈ [0, 1].
    let n = 1_000_000;
    let (mut best_x, mut best_c) = (0.0, f64::INFINITY);
    for i in 0..=n {
        let x = i as f64 / n as f64;
        let c = x * x + (1.0 - x);
        if c < best_c {
            best_c = c;
            best_x = x;
        }
    }
    let f = we.flow.values();
    let s = so.flow.values();
    let pass = close(f[0], 1.0, PIGOU_FLOW_TOL)
        && close(f[1], 0.0, PIGOU_FLOW_TOL)
        && close(we.total_cost, 1.0, 1e-9)
        && close(s[0], best_x, PIGOU_FLOW_TOL)
        && close(s[1], 1.0 - best_x, PIGOU_FLOW_TOL)
        && close(so.total_cost, best_c, 1e-9)
        && close(rho, 4.0 / 3.0, PIGOU_POA_TOL)
        && elapsed < PIGOU_RUNTIME;
    outcome(
        pass,
        format!(
            "WE ({:.9}, {:.9}) cost {:.12}; SO ({:.9}, {:.9}) cost {:.12} vs oracle ({best_x}, {best_c:.12}); PoA {rho:.12}; {:?}",
            f[0], f[1], we.total_cost, s[0], s[1], so.total_cost, elapsed
        ),
    )
}

fn approximate_flow_bounds() -> Outcome {
    let g = pigou();
    let we = PathFlow(vec![1.0, 0.0]);
    let mut pass = true;
    let mut parts = Vec::new();
    for eps in [1e-2f64, 1e-4] {
        let r = eps.sqrt();
        let f = PathFlow(vec![1.0 - r, r]);
        let threshold = approximation_threshold(&g, &f).unwrap();
        let diff = (g.total_cost(&f).unwrap() - g.total_cost(&we).unwrap()).abs();
        let bounds = check_approximation_bounds(&g, &f, &we, threshold, 1.0).unwrap();
        let ok = close(threshold, eps, EXACT_TOL)
            && close(diff, r - eps, EXACT_TOL)
            && bounds.all_hold();
        pass &= ok;
        parts.push(format!(
            "ε={eps:e}: threshold {threshold:e}, |ΔC| {diff:e} (√ε−ε = {:e}), bounds hold {}",
            r - eps,
            bounds.all_hold()
        ));
    }
    outcome(pass, parts.join("; "))
}

fn shifted_affine_reproduction() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for eps in [1e-2, 1e-4] {
        let (g1, g2) = shifted_affine_pair(eps).unwrap();
        let d = dist(&g1, &g2).unwrap();
        let half = PathFlow(vec![0.5, 0.5]);
        let threshold = approximation_threshold(&g1, &half).unwrap();
        let we = solve_we(&g1, &opts()).unwrap();
        let f = we.flow.values();
        let ok = d.value == eps
            && close(threshold, 0.5 * eps, EXACT_TOL)
            && close(f[0], (1.0 + eps) / 2.0, 1e-9)
            && close(f[1], (1.0 - eps) / 2.0, 1e-9);
        pass &= ok;
        parts.push(format!(
            "ε={eps:e}: Dist {:e}, threshold {threshold:e}, WE ({:.12}, {:.12})",
            d.value, f[0], f[1]
        ));
    }
    outcome(pass, parts.join("; "))
}

fn metric_axioms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut failures = 0;
    let mut equivalent_reps = 0;
    let mut worst = f64::INFINITY;
    for _ in 0..AXIOM_TRIPLES {
        let s = random_structure(&mut rng);
        let g1 = random_game_on(s.clone(), &mut rng);
        let g2 = random_game_on(s.clone(), &mut rng);
        let g3 = random_game_on(s, &mut rng);
        let r = check_metric_axioms(&g1, &g2, &g3).unwrap();
        worst = worst.min(r.worst_triangle_margin);
        if !r.ok() {
            failures += 1;
        }
        // A different representation of the same game: costs frozen beyond T.
        let frozen = truncate_extend(&g1, g1.total_demand(), ExtensionMode::Constant).unwrap();
        if games_equivalent(&g1, &frozen, 1025).unwrap() && dist(&g1, &frozen).unwrap().value == 0.0
        {
            equivalent_reps += 1;
        }
    }
    let [a, b, c] = truncation_triple().unwrap();
    let direct = naive_distance(&a, &c, DEFAULT_GRID).unwrap().value;
    let via = naive_distance(&a, &b, DEFAULT_GRID).unwrap().value
        + naive_distance(&b, &c, DEFAULT_GRID).unwrap().value;
    let naive_breaks = direct > via;
    let proper = check_metric_axioms(&a, &b, &c).unwrap().ok();
    outcome(
        failures == 0 && equivalent_reps == AXIOM_TRIPLES && naive_breaks && proper,
        format!(
            "{failures}/{AXIOM_TRIPLES} triples fail; worst triangle margin {worst:e}; {equivalent_reps}/{AXIOM_TRIPLES} equivalent representations at distance 0; naive operator {direct} > {via} on the truncation triple"
        ),
    )
}

fn rho_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut errors = 0;
    for _ in 0..INVARIANCE_GAMES {
        let g = random_game(&mut rng);
        let base = match poa(&g, &opts()) {
            Ok(b) => b,
            Err(_) => {
                errors += 1;
                continue;
            }
        };
        for u in UPSILONS {
            let u = NormalizationFactor::new(u).unwrap();
            for h in [
                cost_normalize(&g, u).unwrap(),
                demand_normalize(&g, u).unwrap(),
            ] {
                match poa(&h, &opts()) {
                    Ok(r) => worst = worst.max((r.poa - base.poa).abs()),
                    Err(_) => errors += 1,
                }
            }
        }
    }
    outcome(
        errors == 0 && worst <= INVARIANCE_TOL,
        format!("max |Δρ| over {INVARIANCE_GAMES} games × υ ∈ {UPSILONS:?} × (Ψ, Λ): {worst:e}; {errors} solver errors"),
    )
}

fn normalization_shrinkage_mechanism() -> Outcome {
    let a = pigou();
    let b = parallel_game(
        vec![CostFunction::constant(1.0), CostFunction::constant(1.0)],
        1.0,
    )
    .unwrap();
    let d0 = dist(&a, &b).unwrap();
    let r0 = (poa(&a, &opts()).unwrap().poa - poa(&b, &opts()).unwrap().poa).abs();
    let ten = NormalizationFactor::new(10.0).unwrap();
    let (mut x, mut y) = (a, b);
    for _ in 0..3 {
        x = cost_normalize(&x, ten).unwrap();
        y = cost_normalize(&y, ten).unwrap();
    }
    let d3 = dist(&x, &y).unwrap();
    let r3 = (poa(&x, &opts()).unwrap().poa - poa(&y, &opts()).unwrap().poa).abs();
    let shrink_ok =
        (d3.value * 1000.0 - d0.value).abs() <= 1000.0 * d3.error_bound + d0.error_bound + 1e-15;
    outcome(
        r0 >= 0.1 && shrink_ok && (r3 - r0).abs() < SHRINK_DELTA_TOL,
        format!(
            "Dist {:e} → {:e} (ratio {}), |Δρ| {r0:.12} → {r3:.12}; ratio |Δρ|/Dist^γ grows by 10^(3γ)",
            d0.value,
            d3.value,
            d0.value / d3.value
        ),
    )
}

fn lipschitz_bases() -> Vec<(&'static str, Game)> {
    vec![
        ("pigou", pigou()),
        ("x vs x + 0.01", shifted_affine_pair(0.01).unwrap().0),
        (
            "affine",
            parallel_game(
                vec![
                    CostFunction::affine(1.0, 0.5),
                    CostFunction::affine(2.0, 0.2),
                ],
                1.0,
            )
            .unwrap(),
        ),
        (
            "bpr",
            parallel_game(
                vec![
                    CostFunction::bpr(1.0, 2.0, 1.0),
                    CostFunction::affine(0.5, 0.3),
                ],
                1.0,
            )
            .unwrap(),
        ),
        ("two_od", two_od_game()),
    ]
}

fn certificate_soundness() -> Outcome {
    let start = Instant::now();
    let mut records = 0;
    let mut covered = 0;
    let mut violations = 0;
    let mut errors = 0;
    for (i, (_, g)) in lipschitz_bases().into_iter().enumerate() {
        for kind in [
            PerturbationKind::Cost,
            PerturbationKind::Demand,
            PerturbationKind::Joint,
        ] {
            let s = sweep(
                &g,
                kind,
                &SOUNDNESS_RADII,
                SOUNDNESS_SAMPLES,
                100 + i as u64,
            )
            .unwrap();
            records += s.records.len();
            covered += s.records.iter().filter(|r| !r.bounds.is_empty()).count();
            errors += s.records.iter().filter(|r| !r.usable()).count();
            violations += s.violations(SOUNDNESS_SLACK).len();
        }
    }
    let elapsed = start.elapsed();
    outcome(
        violations == 0 && errors == 0 && elapsed < SOUNDNESS_RUNTIME,
        format!("{records} records over 5 bases × 3 kinds, {covered} inside a certificate radius, {violations} violations, {errors} failed solves; {elapsed:?}"),
    )
}

fn exponent_one() -> Outcome {
    let bases = [
        (
            "constant (1, 1)",
            parallel_game(
                vec![CostFunction::constant(1.0), CostFunction::constant(1.0)],
                1.0,
            )
            .unwrap(),
        ),
        ("x vs x + 0.01", shifted_affine_pair(0.01).unwrap().0),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, g) in bases {
        let s = sweep(
            &g,
            PerturbationKind::Joint,
            &EXPONENT_RADII,
            EXPONENT_SAMPLES,
            EXPONENT_SEED,
        )
        .unwrap();
        let exponent1: Vec<_> = s
            .certificates
            .iter()
            .filter(|c| {
                matches!(
                    c.which,
                    CertificateKind::ConstantCosts | CertificateKind::Smooth
                )
            })
            .collect();
        let exponent1_violations = s
            .violations(SOUNDNESS_SLACK)
            .iter()
            .filter(|v| {
                matches!(
                    v.1,
                    CertificateKind::ConstantCosts | CertificateKind::Smooth
                )
            })
            .count();
        let pts: Vec<HoelderPoint> = s.records.iter().map(HoelderPoint::from).collect();
        match fit_hoelder(&pts, 1e-14) {
            Ok(f) => {
                let ok = f.gamma >= GAMMA_MIN
                    && f.r2 >= R2_MIN
                    && exponent1.len() == 1
                    && exponent1_violations == 0;
                pass &= ok;
                parts.push(format!(
                    "{name}: γ̂ {:.4}, r² {:.4} ({} records), {} exponent-1 certificate(s), {exponent1_violations} violations",
                    f.gamma, f.r2, f.used, exponent1.len()
                ));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{name}: fit failed: {e}"));
            }
        }
    }
    outcome(pass, parts.join("; "))
}

fn convergence_down() -> Outcome {
    let g = parallel_game(
        vec![
            CostFunction::bpr(0.25, 1.25, 1.0),
            CostFunction::bpr(0.25, 1.0, 1.0),
        ],
        1.0,
    )
    .unwrap();
    let s = DemandSchedule::fixed_ratio(&g, vec![1e-1, 1e-2, 1e-3, 1e-4]).unwrap();
    let o = SolveOptions::with_tol(RATE_TOL);
    let pts = converge_down(&g, &s, &o).unwrap();
    let dominated = pts
        .iter()
        .all(|p| p.bound.is_some_and(|b| p.poa_minus_one <= b));
    let fit = fit_rate(&pts, RateAxis::Total, RATE_TOL).unwrap();
    let desc: Vec<String> = pts
        .iter()
        .map(|p| {
            format!(
                "T={:e}: {:.3e} ≤ {}",
                p.total,
                p.poa_minus_one,
                p.bound.map_or("none".into(), |b| format!("{b:.3e}"))
            )
        })
        .collect();
    outcome(
        dominated && !fit.degenerate && fit.slope >= DOWN_SLOPE_MIN,
        format!("{}; slope {:.4}", desc.join(", "), fit.slope),
    )
}

fn convergence_up() -> Outcome {
    let g = parallel_game(
        vec![
            CostFunction::monomial_log(1.0, 1.0, 1.0),
            CostFunction::monomial_log(2.0, 1.0, 1.0),
        ],
        1.0,
    )
    .unwrap();
    let s = DemandSchedule::fixed_ratio(&g, DemandSchedule::geometric(10.0, 10.0, 6)).unwrap();
    let o = SolveOptions::with_tol(RATE_TOL);
    let pts = converge_up(&g, &s, &o).unwrap();
    let ln_ok = pts
        .iter()
        .all(|p| p.ln_bound.is_some_and(|b| p.poa_minus_one <= b));
    let cert_ok = pts
        .iter()
        .all(|p| p.bound.is_none_or(|b| p.poa_minus_one <= b));
    let w_ok = pts
        .iter()
        .all(|p| p.w <= (p.total / (p.total + 1.0)) / (p.total + 1.0).ln() * 2.0);
    let monotone = pts
        .windows(2)
        .all(|w| w[1].poa_minus_one <= w[0].poa_minus_one + 10.0 * RATE_TOL);
    let desc: Vec<String> = pts
        .iter()
        .map(|p| {
            format!(
                "T={:e}: {:.3e} ≤ {:.3e} (w {:.3e}, certified {})",
                p.total,
                p.poa_minus_one,
                p.ln_bound.unwrap_or(f64::NAN),
                p.w,
                p.bound.map_or("none".into(), |b| format!("{b:.3e}"))
            )
        })
        .collect();
    outcome(
        ln_ok && cert_ok && w_ok && monotone,
        format!("{}; monotone {monotone}", desc.join(", ")),
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        ("Pigou reproduction", pigou_reproduction),
        ("ε-approximate flow bounds", approximate_flow_bounds),
        ("shifted-affine distance", shifted_affine_reproduction),
        ("metric axioms", metric_axioms),
        ("ρ-invariance", rho_invariance),
        ("normalization shrinkage", normalization_shrinkage_mechanism),
        ("certificate soundness", certificate_soundness),
        ("exponent-1 regimes", exponent_one),
        ("convergence down", convergence_down),
        ("convergence up", convergence_up),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<28} {}  {}",
            i + 1,
            name,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
