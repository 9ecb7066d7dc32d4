//! Shrinks the pair (x, 1) / (1, 1) by cost normalization: the distance
//! falls like 1/υ while both prices of anarchy stay put, so |Δρ|/Dist^γ is
//! unbounded for every γ > 0.

use poa_core::instances::{parallel_game, pigou};
use poa_core::sensitivity::normalization_shrinkage;
use poa_core::solver::SolveOptions;
use poa_core::CostFunction;

fn main() -> poa_core::Result<()> {
    let constant = parallel_game(
        vec![CostFunction::constant(1.0), CostFunction::constant(1.0)],
        1.0,
    )?;
    let factors: Vec<f64> = (0..7).map(|n| 10f64.powi(n)).collect();
    let steps = normalization_shrinkage(
        &pigou(),
        &constant,
        &factors,
        &SolveOptions::with_tol(1e-12),
    )?;
    println!(
        "{:>10} {:>12} {:>10} {:>10} {:>14} {:>14}",
        "upsilon", "dist", "poa_a", "poa_b", "ratio g=1", "ratio g=1/2"
    );
    for s in steps {
        let delta = (s.poa_a - s.poa_b).abs();
        println!(
            "{:>10.0e} {:>12.3e} {:>10.6} {:>10.6} {:>14.3e} {:>14.3e}",
            s.upsilon,
            s.dist,
            s.poa_a,
            s.poa_b,
            delta / s.dist,
            delta / s.dist.sqrt()
        );
    }
    Ok(())
}
