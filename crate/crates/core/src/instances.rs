//! Small named games and a random game generator.

use std::sync::Arc;

use rand::Rng;

use crate::cost::CostFunction;
use crate::error::Result;
use crate::game::{Game, Structure};

pub fn parallel_game(costs: Vec<CostFunction>, demand: f64) -> Result<Game> {
    Game::new(
        Arc::new(Structure::parallel(costs.len())?),
        costs,
        vec![demand],
    )
}

/// `x` against `1` with unit demand.
pub fn pigou() -> Game {
    parallel_game(
        vec![CostFunction::affine(1.0, 0.0), CostFunction::constant(1.0)],
        1.0,
    )
    .expect("valid game")
}

/// `(x, x + ε)` and `(x, x)`, both with unit demand.
pub fn shifted_affine_pair(eps: f64) -> Result<(Game, Game)> {
    Ok((
        parallel_game(
            vec![
                CostFunction::affine(1.0, 0.0),
                CostFunction::affine(1.0, eps),
            ],
            1.0,
        )?,
        parallel_game(
            vec![
                CostFunction::affine(1.0, 0.0),
                CostFunction::affine(1.0, 0.0),
            ],
            1.0,
        )?,
    ))
}

/// Three games `(τ, d)`, `(σ, d)`, `(σ, d')` with `τ = σ` on `[0, T(d)]`
/// and `τ`, `σ` far apart on `(T(d), T(d')]`.
pub fn truncation_triple() -> Result<[Game; 3]> {
    let s = Arc::new(Structure::parallel(2)?);
    let tau = vec![CostFunction::affine(1.0, 0.0), CostFunction::constant(1.0)];
    let sigma = vec![
        CostFunction::piecewise_linear(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 10.0]),
        CostFunction::constant(1.0),
    ];
    Ok([
        Game::new(s.clone(), tau, vec![1.0])?,
        Game::new(s.clone(), sigma.clone(), vec![1.0])?,
        Game::new(s, sigma, vec![2.0])?,
    ])
}

/// The `n`-th game `(1/n, x^β/n)` with unit demand, and the generalized
/// limit game with both costs identically 0.
pub fn vanishing_cost_sequence(n: u32, beta: f64) -> Result<(Game, Game)> {
    let k = 1.0 / n as f64;
    let second = if beta == 0.0 {
        CostFunction::constant(k)
    } else {
        CostFunction::bpr(k, beta, 0.0)
    };
    let s = Arc::new(Structure::parallel(2)?);
    Ok((
        Game::new(
            s.clone(),
            vec![CostFunction::constant(k), second],
            vec![1.0],
        )?,
        Game::generalized(
            s,
            vec![CostFunction::constant(0.0), CostFunction::constant(0.0)],
            vec![1.0],
        )?,
    ))
}

/// Two O/D pairs sharing arcs `a`, `b`: paths `a·c`, `b·c` and `a·e`, `b·e`.
pub fn two_od_structure() -> Result<Structure> {
    let ids = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    Structure::new(
        ids(&["a", "b", "c", "e"]),
        vec![
            ("k1".into(), vec![ids(&["a", "c"]), ids(&["b", "c"])]),
            ("k2".into(), vec![ids(&["a", "e"]), ids(&["b", "e"])]),
        ],
    )
}

pub fn two_od_game() -> Game {
    let s = Arc::new(two_od_structure().expect("valid structure"));
    let costs = vec![
        CostFunction::affine(1.0, 0.2),
        CostFunction::bpr(0.5, 2.0, 0.5),
        CostFunction::constant(0.3),
        CostFunction::polynomial(vec![0.1, 0.2, 0.3]),
    ];
    Game::new(s, costs, vec![1.0, 0.5]).expect("valid game")
}

/// A random structure: 2 to 4 parallel arcs or the two-O/D network.
pub fn random_structure<R: Rng>(rng: &mut R) -> Arc<Structure> {
    let s = match rng.gen_range(0..4) {
        3 => two_od_structure(),
        n => Structure::parallel(n + 2),
    };
    Arc::new(s.expect("valid structure"))
}

/// A random strictly positive, nondecreasing cost from one of the
/// supported families, with convex `x·τ(x)`.
pub fn random_cost<R: Rng>(rng: &mut R) -> CostFunction {
    match rng.gen_range(0..6) {
        0 => CostFunction::constant(rng.gen_range(0.2..2.0)),
        1 => CostFunction::affine(rng.gen_range(0.1..2.0), rng.gen_range(0.0..1.0)),
        2 => CostFunction::polynomial(vec![
            rng.gen_range(0.0..1.0),
            rng.gen_range(0.0..1.0),
            rng.gen_range(0.05..1.0),
        ]),
        3 => CostFunction::bpr(
            rng.gen_range(0.1..2.0),
            rng.gen_range(1..=4) as f64,
            rng.gen_range(0.0..1.0),
        ),
        4 => CostFunction::monomial_log(
            rng.gen_range(0.5..2.0),
            rng.gen_range(1..=2) as f64,
            [0.5, 1.0][rng.gen_range(0..2)],
        ),
        _ => {
            let v0 = rng.gen_range(0.1..1.0);
            let s1 = rng.gen_range(0.0..1.0);
            let s2 = s1 + rng.gen_range(0.0..2.0);
            let b1 = rng.gen_range(0.3..1.5);
            CostFunction::piecewise_linear(
                vec![0.0, b1, 4.0],
                vec![v0, v0 + s1 * b1, v0 + s1 * b1 + s2 * (4.0 - b1)],
            )
        }
    }
}

/// A random game on `structure` with demands in `[0.2, 2)`.
pub fn random_game_on<R: Rng>(structure: Arc<Structure>, rng: &mut R) -> Game {
    loop {
        let costs = (0..structure.num_arcs())
            .map(|_| random_cost(rng))
            .collect();
        let demands = (0..structure.num_od_pairs())
            .map(|_| rng.gen_range(0.2..2.0))
            .collect();
        if let Ok(g) = Game::new(structure.clone(), costs, demands) {
            return g;
        }
    }
}

pub fn random_game<R: Rng>(rng: &mut R) -> Game {
    let s = random_structure(rng);
    random_game_on(s, rng)
}
