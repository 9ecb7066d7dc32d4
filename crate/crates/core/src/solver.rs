//! Wardrop equilibria, social optima and the price of anarchy.
//!
//! Both problems are solved by conditional-gradient methods on path flows.
//! The Frank–Wolfe duality gap of the Wardrop problem is the approximation
//! threshold `ε(τ, d, f)`, so it doubles as the stopping certificate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Game, PathFlow};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100_000;
const SO_MULTISTARTS: usize = 8;
const CONVEXITY_SAMPLES: usize = 257;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Per-O/D pairwise steps from the costliest used path to the cheapest.
    PairwiseFrankWolfe,
    /// Classic Frank–Wolfe towards the all-or-nothing assignment.
    FrankWolfe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Wardrop,
    SocialOptimum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub method: Method,
    /// Seed for social-optimum multistarts on non-convex instances.
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            method: Method::PairwiseFrankWolfe,
            seed: 0,
        }
    }
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolveOptions {
            tol,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub objective: Objective,
    pub flow: PathFlow,
    pub arc_flows: Vec<f64>,
    pub arc_costs: Vec<f64>,
    pub total_cost: f64,
    pub user_costs: Vec<f64>,
    /// Duality gap w.r.t. the objective's gradient; for Wardrop solves this
    /// is the approximation threshold of `flow`.
    pub duality_gap: f64,
    pub iterations: usize,
    pub converged: bool,
    pub optimality_certified: bool,
    /// Duality gap after every iteration.
    pub trace: Vec<f64>,
}

/// Flows within a few ulps of a kink are treated as sitting on it, so
/// that rounding cannot hide the jump of the gradient.
const KINK_SNAP: f64 = 8.0 * f64::EPSILON;

fn gradient(game: &Game, objective: Objective, a: usize, x: f64) -> f64 {
    let c = &game.costs()[a];
    let x = c.kink_near(x, KINK_SNAP).map_or(x, |b| x.max(b));
    match objective {
        Objective::Wardrop => c.value(x),
        Objective::SocialOptimum => c.marginal().value(x),
    }
}

fn arc_objective(game: &Game, objective: Objective, a: usize, x: f64) -> f64 {
    let c = &game.costs()[a];
    match objective {
        Objective::Wardrop => c.integral_value(x),
        Objective::SocialOptimum => x * c.value(x),
    }
}

fn gradient_left(game: &Game, objective: Objective, a: usize, x: f64) -> f64 {
    let c = &game.costs()[a];
    let x = c.kink_near(x, KINK_SNAP).map_or(x, |b| x.min(b));
    match objective {
        Objective::Wardrop => c.value(x),
        Objective::SocialOptimum => c.marginal().left_value(x),
    }
}

/// Rate of decrease when shifting flow from path `s` to path `t`: left
/// gradients on arcs only `s` uses, right gradients on arcs only `t` uses.
fn descent(s: &[usize], t: &[usize], left: &[f64], right: &[f64]) -> f64 {
    s.iter()
        .filter(|a| !t.contains(a))
        .map(|a| left[*a])
        .sum::<f64>()
        - t.iter()
            .filter(|a| !s.contains(a))
            .map(|a| right[*a])
            .sum::<f64>()
}

/// `Σ_k Σ_{s used} f_s·max(0, max_t descent(s → t))`. With continuous
/// gradients this is the Frank–Wolfe gap `Σ (g_s − min_t g_t)·f_s`; at
/// kinks of the gradient it vanishes exactly when no pairwise shift
/// descends.
fn stationarity_gap(game: &Game, f: &[f64], left: &[f64], right: &[f64]) -> f64 {
    if left == right {
        return gap_of(game, f, &game.path_costs_from_arc_costs(right));
    }
    let st = game.structure();
    let mut gap = 0.0;
    for k in 0..game.num_od_pairs() {
        let ps = st.od_paths(k);
        for s in ps.iter().filter(|s| f[**s] > 0.0) {
            let best = ps
                .iter()
                .filter(|t| *t != s)
                .map(|t| descent(st.path(*s), st.path(*t), left, right))
                .fold(0.0, f64::max);
            gap += f[*s] * best;
        }
    }
    gap
}

fn gap_of(game: &Game, f: &[f64], path_grad: &[f64]) -> f64 {
    let s = game.structure();
    let mut gap = 0.0;
    for k in 0..game.num_od_pairs() {
        let ps = s.od_paths(k);
        let min = ps
            .iter()
            .map(|p| path_grad[*p])
            .fold(f64::INFINITY, f64::min);
        gap += ps
            .iter()
            .map(|p| (path_grad[*p] - min) * f[*p])
            .sum::<f64>();
    }
    gap
}

/// Sign change of `deriv` on `[0, t_max]`, assuming `deriv(0) < 0` and a
/// single sign change, found by bisection to machine precision. Returns the
/// upper end of the final bracket so a step stopped by a gradient jump
/// lands on the kink.
fn bisect_step<F: Fn(f64) -> f64>(deriv: F, t_max: f64) -> f64 {
    if deriv(t_max) <= 0.0 {
        return t_max;
    }
    let (mut lo, mut hi) = (0.0f64, t_max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if deriv(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// All-or-nothing assignment under arc gradients evaluated at `x`.
fn all_or_nothing(game: &Game, objective: Objective, x: &[f64]) -> Vec<f64> {
    let grad: Vec<f64> = (0..game.num_arcs())
        .map(|a| gradient(game, objective, a, x[a]))
        .collect();
    let pg = game.path_costs_from_arc_costs(&grad);
    let s = game.structure();
    let mut y = vec![0.0; game.num_paths()];
    for k in 0..game.num_od_pairs() {
        let best = cheapest(s.od_paths(k), &pg);
        y[best] = game.demands()[k];
    }
    y
}

fn cheapest(paths: &[usize], path_grad: &[f64]) -> usize {
    let mut best = paths[0];
    for p in &paths[1..] {
        if path_grad[*p] < path_grad[best] {
            best = *p;
        }
    }
    best
}

struct RawSolve {
    flow: Vec<f64>,
    gap: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

fn run(
    game: &Game,
    objective: Objective,
    start: Vec<f64>,
    opts: &SolveOptions,
    guard: bool,
) -> RawSolve {
    let mut f = start;
    let mut trace = Vec::new();
    let structure = game.structure().clone();
    for it in 0..=opts.max_iter {
        let x = game.arc_flows_raw(&f);
        let grad: Vec<f64> = (0..game.num_arcs())
            .map(|a| gradient(game, objective, a, x[a]))
            .collect();
        let left: Vec<f64> = (0..game.num_arcs())
            .map(|a| gradient_left(game, objective, a, x[a]))
            .collect();
        let gap = stationarity_gap(game, &f, &left, &grad);
        trace.push(gap);
        if gap <= opts.tol {
            return RawSolve {
                flow: f,
                gap,
                iterations: it,
                converged: true,
                trace,
            };
        }
        if it == opts.max_iter {
            return RawSolve {
                flow: f,
                gap,
                iterations: it,
                converged: false,
                trace,
            };
        }
        let moved = match opts.method {
            Method::PairwiseFrankWolfe => {
                pairwise_sweep(game, objective, &mut f, x, it, guard, &structure)
            }
            Method::FrankWolfe => classic_step(game, objective, &mut f, &x, it, guard),
        };
        if !moved {
            // On a non-convex objective a point without a descent move is a
            // local optimum even if the right-derivative gap is positive.
            return RawSolve {
                flow: f,
                gap,
                iterations: it,
                converged: guard,
                trace,
            };
        }
    }
    unreachable!("loop returns on its last iteration")
}

fn pairwise_sweep(
    game: &Game,
    objective: Objective,
    f: &mut [f64],
    mut x: Vec<f64>,
    it: usize,
    guard: bool,
    structure: &crate::game::Structure,
) -> bool {
    let mut moved = false;
    for k in 0..game.num_od_pairs() {
        if game.demands()[k] == 0.0 {
            continue;
        }
        let ps = structure.od_paths(k);
        let mut right = vec![0.0; game.num_arcs()];
        let mut left = vec![0.0; game.num_arcs()];
        for p in ps {
            for a in structure.path(*p) {
                right[*a] = gradient(game, objective, *a, x[*a]);
                left[*a] = gradient_left(game, objective, *a, x[*a]);
            }
        }
        let mut best: Option<(usize, usize, f64)> = None;
        for s in ps.iter().filter(|s| f[**s] > 0.0) {
            for t in ps.iter().filter(|t| *t != s) {
                let d = descent(structure.path(*s), structure.path(*t), &left, &right);
                if d > 0.0 && best.is_none_or(|b| d > b.2) {
                    best = Some((*s, *t, d));
                }
            }
        }
        let Some((from, to, _)) = best else { continue };
        let plus: Vec<usize> = structure
            .path(to)
            .iter()
            .copied()
            .filter(|a| !structure.path(from).contains(a))
            .collect();
        let minus: Vec<usize> = structure
            .path(from)
            .iter()
            .copied()
            .filter(|a| !structure.path(to).contains(a))
            .collect();
        let t_max = f[from];
        let deriv = |t: f64| {
            plus.iter()
                .map(|a| gradient(game, objective, *a, x[*a] + t))
                .sum::<f64>()
                - minus
                    .iter()
                    .map(|a| gradient(game, objective, *a, (x[*a] - t).max(0.0)))
                    .sum::<f64>()
        };
        let mut t = bisect_step(deriv, t_max);
        if guard {
            let change = |t: f64| {
                plus.iter()
                    .map(|a| {
                        arc_objective(game, objective, *a, x[*a] + t)
                            - arc_objective(game, objective, *a, x[*a])
                    })
                    .sum::<f64>()
                    + minus
                        .iter()
                        .map(|a| {
                            arc_objective(game, objective, *a, (x[*a] - t).max(0.0))
                                - arc_objective(game, objective, *a, x[*a])
                        })
                        .sum::<f64>()
            };
            if change(t) > 0.0 {
                t = t_max * 2.0 / (it as f64 + 2.0);
                let mut tries = 0;
                while change(t) > 0.0 && tries < 40 {
                    t *= 0.5;
                    tries += 1;
                }
                if change(t) > 0.0 {
                    t = 0.0;
                }
            }
        }
        if t <= 0.0 || f[to] + t == f[to] {
            continue;
        }
        moved = true;
        if t >= t_max {
            f[from] = 0.0;
        } else {
            f[from] -= t;
        }
        f[to] += t;
        for a in &plus {
            x[*a] += t;
        }
        for a in &minus {
            x[*a] = (x[*a] - t).max(0.0);
        }
    }
    moved
}

fn classic_step(
    game: &Game,
    objective: Objective,
    f: &mut [f64],
    x: &[f64],
    it: usize,
    guard: bool,
) -> bool {
    let y = all_or_nothing(game, objective, x);
    let dir: Vec<f64> = y.iter().zip(f.iter()).map(|(a, b)| a - b).collect();
    let dx = game.arc_flows_raw(&dir);
    let deriv = |t: f64| {
        (0..game.num_arcs())
            .filter(|a| dx[*a] != 0.0)
            .map(|a| gradient(game, objective, a, (x[a] + t * dx[a]).max(0.0)) * dx[a])
            .sum::<f64>()
    };
    if !(deriv(0.0) < 0.0) {
        return false;
    }
    let mut t = bisect_step(deriv, 1.0);
    if guard {
        let value = |t: f64| {
            (0..game.num_arcs())
                .map(|a| arc_objective(game, objective, a, (x[a] + t * dx[a]).max(0.0)))
                .sum::<f64>()
        };
        let base = value(0.0);
        if value(t) > base {
            t = 2.0 / (it as f64 + 2.0);
            let mut tries = 0;
            while value(t) > base && tries < 40 {
                t *= 0.5;
                tries += 1;
            }
        }
    }
    if t <= 0.0 {
        return false;
    }
    for (fs, d) in f.iter_mut().zip(&dir) {
        *fs = (*fs + t * d).max(0.0);
    }
    true
}

fn report(game: &Game, objective: Objective, raw: RawSolve, certified: bool) -> SolveReport {
    let x = game.arc_flows_raw(&raw.flow);
    let arc_costs = game.arc_costs_at(&x);
    let pc = game.path_costs_from_arc_costs(&arc_costs);
    let total_cost = x.iter().zip(&arc_costs).map(|(f, c)| f * c).sum();
    let user_costs = game.user_costs_from_path_costs(&pc);
    SolveReport {
        objective,
        flow: PathFlow(raw.flow),
        arc_flows: x,
        arc_costs,
        total_cost,
        user_costs,
        duality_gap: raw.gap,
        iterations: raw.iterations,
        converged: raw.converged,
        optimality_certified: certified && raw.converged,
        trace: raw.trace,
    }
}

fn validate_opts(opts: &SolveOptions) -> Result<()> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {}",
            opts.tol
        )));
    }
    Ok(())
}

/// Wardrop equilibrium from the all-or-nothing assignment at zero flow.
pub fn solve_we(game: &Game, opts: &SolveOptions) -> Result<SolveReport> {
    let start = all_or_nothing(game, Objective::Wardrop, &vec![0.0; game.num_arcs()]);
    solve_we_from(game, &PathFlow(start), opts)
}

/// Wardrop equilibrium from a given feasible flow.
pub fn solve_we_from(game: &Game, start: &PathFlow, opts: &SolveOptions) -> Result<SolveReport> {
    validate_opts(opts)?;
    game.check_condition2()?;
    game.check_feasible(start)?;
    let raw = run(
        game,
        Objective::Wardrop,
        start.values().to_vec(),
        opts,
        false,
    );
    Ok(report(game, Objective::Wardrop, raw, true))
}

/// Whether every marginal cost is non-decreasing on `[0, T(d)]`.
pub fn so_objective_convex(game: &Game) -> bool {
    let t = game.total_demand();
    game.costs()
        .iter()
        .all(|c| c.marginal().is_nondecreasing_on(t, CONVEXITY_SAMPLES))
}

/// Social optimum. Certified when the total cost is convex; otherwise the
/// best of several multistarts, reported uncertified.
pub fn solve_so(game: &Game, opts: &SolveOptions) -> Result<SolveReport> {
    solve_so_with_start(game, opts, None)
}

fn solve_so_with_start(
    game: &Game,
    opts: &SolveOptions,
    extra: Option<&PathFlow>,
) -> Result<SolveReport> {
    validate_opts(opts)?;
    game.check_condition2()?;
    let convex = so_objective_convex(game);
    let aon = all_or_nothing(game, Objective::SocialOptimum, &vec![0.0; game.num_arcs()]);
    if convex {
        let raw = run(game, Objective::SocialOptimum, aon, opts, false);
        return Ok(report(game, Objective::SocialOptimum, raw, true));
    }
    let mut starts = vec![aon];
    if let Some(e) = extra {
        starts.push(e.values().to_vec());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..SO_MULTISTARTS {
        starts.push(dirichlet_flow(game, &mut rng));
    }
    let mut best: Option<SolveReport> = None;
    for s in starts {
        let r = report(
            game,
            Objective::SocialOptimum,
            run(game, Objective::SocialOptimum, s, opts, true),
            false,
        );
        let better = match &best {
            None => true,
            Some(b) => {
                (r.converged && !b.converged)
                    || (r.converged == b.converged && r.total_cost < b.total_cost)
            }
        };
        if better {
            best = Some(r);
        }
    }
    Ok(best.expect("at least one start"))
}

/// A random feasible flow: each demand split by a flat Dirichlet draw.
pub fn dirichlet_flow<R: Rng>(game: &Game, rng: &mut R) -> Vec<f64> {
    let s = game.structure();
    let mut f = vec![0.0; game.num_paths()];
    for k in 0..game.num_od_pairs() {
        let ps = s.od_paths(k);
        let w: Vec<f64> = ps.iter().map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
        let total: f64 = w.iter().sum();
        for (p, wi) in ps.iter().zip(&w) {
            f[*p] = game.demands()[k] * wi / total;
        }
    }
    f
}

/// `ε(τ, d, f) = Σ_k Σ_{s∈S_k} (τ_s(f) − L_k)·f_s`.
pub fn approximation_threshold(game: &Game, flow: &PathFlow) -> Result<f64> {
    let pc = game.path_costs(flow)?;
    Ok(gap_of(game, flow.values(), &pc))
}

/// Bounds of the form `(T/|S|)·min_a τ_a(T/|S|) ≤ C* ≤ C̃ ≤ |A|·T·max_a τ_a(T)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostBounds {
    pub lower: f64,
    pub upper: f64,
    /// `|A|·|S|·max_a τ_a(T) / min_a τ_a(T/|S|)`.
    pub poa_upper: f64,
}

pub fn cost_bounds(game: &Game) -> CostBounds {
    let t = game.total_demand();
    let ns = game.num_paths() as f64;
    let na = game.num_arcs() as f64;
    let min_small = game
        .costs()
        .iter()
        .map(|c| c.value(t / ns))
        .fold(f64::INFINITY, f64::min);
    let max_t = game.costs().iter().map(|c| c.value(t)).fold(0.0, f64::max);
    CostBounds {
        lower: t / ns * min_small,
        upper: na * t * max_t,
        poa_upper: na * ns * max_t / min_small,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoaReport {
    pub poa: f64,
    pub we: SolveReport,
    pub so: SolveReport,
    pub bounds: CostBounds,
}

fn le(a: f64, b: f64) -> bool {
    a <= b + 1e-9 * b.abs() + 1e-12
}

/// `ρ(Γ) = C(Γ, f̃) / C(Γ, f*)`, with the sandwich `1 ≤ ρ ≤ poa_upper`
/// and `lower ≤ C* ≤ C̃ ≤ upper` asserted.
pub fn poa(game: &Game, opts: &SolveOptions) -> Result<PoaReport> {
    let we = solve_we(game, opts)?;
    if !we.converged {
        return Err(Error::Unconverged {
            iterations: we.iterations,
            gap: we.duality_gap,
            tol: opts.tol,
        });
    }
    let so = solve_so_with_start(game, opts, Some(&we.flow))?;
    if !so.converged {
        return Err(Error::Unconverged {
            iterations: so.iterations,
            gap: so.duality_gap,
            tol: opts.tol,
        });
    }
    let poa = we.total_cost / so.total_cost;
    let bounds = cost_bounds(game);
    if poa < 1.0 - 10.0 * opts.tol {
        return Err(Error::InvariantViolation(format!(
            "price of anarchy {poa} below 1"
        )));
    }
    if !le(poa, bounds.poa_upper) {
        return Err(Error::InvariantViolation(format!(
            "price of anarchy {poa} above the bound {}",
            bounds.poa_upper
        )));
    }
    if !(le(bounds.lower, so.total_cost) && le(we.total_cost, bounds.upper)) {
        return Err(Error::InvariantViolation(format!(
            "optimal cost {} / equilibrium cost {} outside [{}, {}]",
            so.total_cost, we.total_cost, bounds.lower, bounds.upper
        )));
    }
    Ok(PoaReport {
        poa,
        we,
        so,
        bounds,
    })
}

/// Outcome of checking the ε-approximation inequalities for a flow `f`
/// against an equilibrium `f̃`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproximationReport {
    /// `Σ_{s∈S_k} f_s·τ_s(f) − d_k·min_s τ_s(f)` per O/D pair.
    pub per_od_excess: Vec<f64>,
    pub per_od_holds: bool,
    /// `Σ_a τ_a(f̃_a)(f_a − f̃_a)`, `Φ(f) − Φ(f̃)`, `Σ_a τ_a(f_a)(f_a − f̃_a)`.
    pub potential_chain: [f64; 3],
    pub potential_chain_holds: bool,
    /// `Σ_a |τ_a(f_a) − τ_a(f̃_a)|·|f_a − f̃_a|`.
    pub cross_term: f64,
    pub cross_term_holds: bool,
    pub max_arc_cost_diff: f64,
    pub arc_cost_bound: f64,
    pub arc_cost_holds: bool,
    pub max_user_cost_diff: f64,
    pub user_cost_bound: f64,
    pub user_cost_holds: bool,
    pub total_cost_diff: f64,
    pub total_cost_bound: f64,
    pub total_cost_holds: bool,
}

impl ApproximationReport {
    pub fn all_hold(&self) -> bool {
        self.per_od_holds
            && self.potential_chain_holds
            && self.cross_term_holds
            && self.arc_cost_holds
            && self.user_cost_holds
            && self.total_cost_holds
    }
}

/// Checks the ε-approximation inequalities. They can be tight (the
/// Pigou instance attains several with equality), so each comparison is
/// non-strict with a relative slack of 1e-9.
pub fn check_approximation_bounds(
    game: &Game,
    f: &PathFlow,
    f_we: &PathFlow,
    eps: f64,
    m: f64,
) -> Result<ApproximationReport> {
    let threshold = approximation_threshold(game, f)?;
    if !le(threshold, eps) {
        return Err(Error::Precondition(format!(
            "flow has approximation threshold {threshold} > ε = {eps}"
        )));
    }
    let s = game.structure();
    let x = game.arc_flows(f)?;
    let xt = game.arc_flows(f_we)?;
    let tau = game.arc_costs_at(&x);
    let taut = game.arc_costs_at(&xt);
    let pc = game.path_costs_from_arc_costs(&tau);
    let pct = game.path_costs_from_arc_costs(&taut);
    let per_od_excess: Vec<f64> = (0..game.num_od_pairs())
        .map(|k| {
            let ps = s.od_paths(k);
            let min = ps.iter().map(|p| pc[*p]).fold(f64::INFINITY, f64::min);
            ps.iter().map(|p| f.values()[*p] * pc[*p]).sum::<f64>() - game.demands()[k] * min
        })
        .collect();
    let per_od_holds = per_od_excess
        .iter()
        .all(|e| le(0.0, *e + 1e-12) && le(*e, eps));
    let lin_lo: f64 = (0..game.num_arcs()).map(|a| taut[a] * (x[a] - xt[a])).sum();
    let lin_hi: f64 = (0..game.num_arcs()).map(|a| tau[a] * (x[a] - xt[a])).sum();
    let phi: f64 = game
        .costs()
        .iter()
        .enumerate()
        .map(|(a, c)| c.integral_value(x[a]) - c.integral_value(xt[a]))
        .sum();
    let potential_chain_holds =
        le(0.0, lin_lo + 1e-12) && le(lin_lo, phi) && le(phi, lin_hi) && le(lin_hi, eps);
    let cross_term: f64 = (0..game.num_arcs())
        .map(|a| (tau[a] - taut[a]).abs() * (x[a] - xt[a]).abs())
        .sum();
    let root = (m * eps).sqrt();
    let na = game.num_arcs() as f64;
    let max_arc_cost_diff = (0..game.num_arcs())
        .map(|a| (tau[a] - taut[a]).abs())
        .fold(0.0, f64::max);
    let lt = game.user_costs_from_path_costs(&pct);
    let lf = game.user_costs_from_path_costs(&pc);
    let max_user_cost_diff = lt
        .iter()
        .zip(&lf)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let c_f: f64 = x.iter().zip(&tau).map(|(a, b)| a * b).sum();
    let c_t: f64 = xt.iter().zip(&taut).map(|(a, b)| a * b).sum();
    let total_cost_diff = (c_f - c_t).abs();
    let total_cost_bound = na * root * game.total_demand() + eps;
    Ok(ApproximationReport {
        per_od_excess,
        per_od_holds,
        potential_chain: [lin_lo, phi, lin_hi],
        potential_chain_holds,
        cross_term,
        cross_term_holds: le(cross_term, eps),
        max_arc_cost_diff,
        arc_cost_bound: root,
        arc_cost_holds: le(max_arc_cost_diff, root),
        max_user_cost_diff,
        user_cost_bound: na * root,
        user_cost_holds: le(max_user_cost_diff, na * root),
        total_cost_diff,
        total_cost_bound,
        total_cost_holds: le(total_cost_diff, total_cost_bound),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::CostFunction;
    use crate::game::Structure;
    use std::sync::Arc;

    fn parallel(costs: Vec<CostFunction>, d: f64) -> Game {
        Game::new(
            Arc::new(Structure::parallel(costs.len()).unwrap()),
            costs,
            vec![d],
        )
        .unwrap()
    }

    fn pigou() -> Game {
        parallel(
            vec![
                CostFunction::bpr(1.0, 1.0, 0.0),
                CostFunction::constant(1.0),
            ],
            1.0,
        )
    }

    #[test]
    fn pigou_equilibrium_and_optimum() {
        let g = pigou();
        let opts = SolveOptions::default();
        let we = solve_we(&g, &opts).unwrap();
        assert!(we.converged);
        assert_eq!(we.flow.values(), &[1.0, 0.0]);
        assert_eq!(we.total_cost, 1.0);
        let so = solve_so(&g, &opts).unwrap();
        assert!(so.optimality_certified);
        assert!((so.flow.values()[0] - 0.5).abs() < 1e-12);
        assert!((so.total_cost - 0.75).abs() < 1e-14);
        let p = poa(&g, &opts).unwrap();
        assert!((p.poa - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn both_methods_agree() {
        let g = parallel(
            vec![
                CostFunction::bpr(1.0, 2.0, 0.3),
                CostFunction::affine(0.5, 0.6),
                CostFunction::bpr(2.0, 1.5, 0.1),
            ],
            1.7,
        );
        let a = solve_we(&g, &SolveOptions::default()).unwrap();
        let b = solve_we(
            &g,
            &SolveOptions {
                method: Method::FrankWolfe,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(a.converged);
        for (x, y) in a.arc_costs.iter().zip(&b.arc_costs) {
            assert!((x - y).abs() < 1e-6, "{x} vs {y}");
        }
        assert!(a.iterations < b.iterations.max(1) * 10);
    }

    #[test]
    fn gap_equals_threshold() {
        let g = parallel(
            vec![
                CostFunction::bpr(1.0, 2.0, 0.0),
                CostFunction::affine(1.0, 0.2),
            ],
            1.0,
        );
        let r = solve_we(&g, &SolveOptions::with_tol(1e-6)).unwrap();
        let eps = approximation_threshold(&g, &r.flow).unwrap();
        assert!((eps - r.duality_gap).abs() < 1e-15);
    }

    #[test]
    fn unconverged_is_reported_not_raised() {
        let g = parallel(
            vec![
                CostFunction::bpr(1.0, 3.0, 0.0),
                CostFunction::affine(1.0, 0.1),
            ],
            1.0,
        );
        let r = solve_we(
            &g,
            &SolveOptions {
                max_iter: 0,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(!r.converged);
        assert!(matches!(
            poa(
                &g,
                &SolveOptions {
                    max_iter: 0,
                    ..Default::default()
                }
            ),
            Err(Error::Unconverged { .. })
        ));
    }

    #[test]
    fn zero_demand_pair_is_skipped() {
        let s = Structure::from_indices(4, vec![vec![vec![0], vec![1]], vec![vec![2], vec![3]]])
            .unwrap();
        let g = Game::new(
            Arc::new(s),
            vec![
                CostFunction::affine(1.0, 0.0),
                CostFunction::constant(0.5),
                CostFunction::affine(1.0, 0.1),
                CostFunction::constant(1.0),
            ],
            vec![1.0, 0.0],
        )
        .unwrap();
        let r = solve_we(&g, &SolveOptions::default()).unwrap();
        assert!(r.converged);
        assert_eq!(&r.flow.values()[2..], &[0.0, 0.0]);
    }

    #[test]
    fn non_convex_so_is_uncertified() {
        // x·τ(x) is not convex for a concave step-like cost.
        let step = CostFunction::piecewise_linear(vec![0.0, 0.4, 0.5], vec![0.1, 0.1, 2.0]);
        let g = parallel(vec![step, CostFunction::affine(1.0, 0.2)], 1.0);
        assert!(!so_objective_convex(&g));
        let r = solve_so(&g, &SolveOptions::default()).unwrap();
        assert!(!r.optimality_certified);
        let p = poa(&g, &SolveOptions::default()).unwrap();
        assert!(p.so.total_cost <= p.we.total_cost + 1e-10);
    }
}
