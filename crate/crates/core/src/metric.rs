//! The metric on game space and ε-ball sampling.
//!
//! `Dist((τ,d),(σ,d')) = max{‖d−d'‖∞, max_a sup_{[0,min(T,T')]} |τ_a−σ_a|,
//! ‖τ(T)−σ(T')‖∞}` with `T = T(d)`, `T' = T(d')`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cost::{point_difference, sup_distance, CostFunction, DEFAULT_GRID};
use crate::error::{Error, Result};
use crate::game::{games_equivalent, Game};

/// Smallest total demand a perturbed game may keep.
pub const MIN_TOTAL_DEMAND: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub value: f64,
    pub demand_part: f64,
    /// `max(interval_part, endpoint_part)`.
    pub cost_part: f64,
    pub interval_part: f64,
    pub endpoint_part: f64,
    /// The true distance lies in `[value, value + error_bound]`.
    pub error_bound: f64,
}

impl MetricValue {
    pub const ZERO: MetricValue = MetricValue {
        value: 0.0,
        demand_part: 0.0,
        cost_part: 0.0,
        interval_part: 0.0,
        endpoint_part: 0.0,
        error_bound: 0.0,
    };
}

fn demand_distance(g1: &Game, g2: &Game) -> f64 {
    g1.demands()
        .iter()
        .zip(g2.demands())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Max over arcs of the sup distance on `[0, t]`, with the certified slack.
fn interval_distance(g1: &Game, g2: &Game, t: f64, grid_n: usize) -> (f64, f64) {
    let mut est = 0.0f64;
    let mut upper = 0.0f64;
    for (f, g) in g1.costs().iter().zip(g2.costs()) {
        let d = sup_distance(f, g, t, grid_n);
        est = est.max(d.estimate);
        upper = upper.max(d.estimate + d.error_bound);
    }
    (est, upper - est)
}

pub fn dist(g1: &Game, g2: &Game) -> Result<MetricValue> {
    dist_with_grid(g1, g2, DEFAULT_GRID)
}

pub fn dist_with_grid(g1: &Game, g2: &Game, grid_n: usize) -> Result<MetricValue> {
    if !g1.same_structure(g2) {
        return Err(Error::StructureMismatch);
    }
    let (t1, t2) = (g1.total_demand(), g2.total_demand());
    let demand_part = demand_distance(g1, g2);
    let (interval_part, error_bound) = interval_distance(g1, g2, t1.min(t2), grid_n);
    let endpoint_part = g1
        .costs()
        .iter()
        .zip(g2.costs())
        .map(|(f, g)| {
            if t1 == t2 {
                point_difference(f, g, t1)
            } else {
                (f.value(t1) - g.value(t2)).abs()
            }
        })
        .fold(0.0, f64::max);
    let cost_part = interval_part.max(endpoint_part);
    let value = demand_part.max(cost_part);
    // The slack only matters if the interval part could overtake the rest.
    let error_bound = (interval_part + error_bound - value).max(0.0);
    Ok(MetricValue {
        value,
        demand_part,
        cost_part,
        interval_part,
        endpoint_part,
        error_bound,
    })
}

/// The operator `max{‖d−d'‖, max_a sup_{[0,max(T,T')]} |τ_a−σ_a|}`, which
/// looks at costs beyond the smaller demand. It is not a metric on
/// equivalence classes and violates the triangle inequality.
pub fn naive_distance(g1: &Game, g2: &Game, grid_n: usize) -> Result<MetricValue> {
    if !g1.same_structure(g2) {
        return Err(Error::StructureMismatch);
    }
    let t = g1.total_demand().max(g2.total_demand());
    let demand_part = demand_distance(g1, g2);
    let (interval_part, err) = interval_distance(g1, g2, t, grid_n);
    let value = demand_part.max(interval_part);
    Ok(MetricValue {
        value,
        demand_part,
        cost_part: interval_part,
        interval_part,
        endpoint_part: 0.0,
        error_bound: (interval_part + err - value).max(0.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomReport {
    pub symmetric: bool,
    pub nonnegative: bool,
    pub identity_consistent: bool,
    pub triangle: bool,
    /// Smallest `D(x,z) + D(z,y) + slack − D(x,y)` over the orientations.
    pub worst_triangle_margin: f64,
    pub violations: Vec<String>,
}

impl AxiomReport {
    pub fn ok(&self) -> bool {
        self.symmetric && self.nonnegative && self.identity_consistent && self.triangle
    }
}

const EQUIVALENCE_SAMPLES: usize = 1025;

/// Symmetry, non-negativity, identity of indiscernibles (against
/// `games_equivalent`) and the triangle inequality, each up to the
/// certified grid error.
pub fn check_metric_axioms(g1: &Game, g2: &Game, g3: &Game) -> Result<AxiomReport> {
    let games = [g1, g2, g3];
    let mut d = [[MetricValue::ZERO; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            d[i][j] = dist(games[i], games[j])?;
        }
    }
    let mut violations = Vec::new();
    let mut symmetric = true;
    let mut nonnegative = true;
    let mut identity_consistent = true;
    for i in 0..3 {
        for j in 0..3 {
            if d[i][j].value != d[j][i].value {
                symmetric = false;
                violations.push(format!(
                    "Dist(g{},g{}) = {} ≠ {}",
                    i + 1,
                    j + 1,
                    d[i][j].value,
                    d[j][i].value
                ));
            }
            if !(d[i][j].value >= 0.0) {
                nonnegative = false;
                violations.push(format!(
                    "Dist(g{},g{}) = {} < 0",
                    i + 1,
                    j + 1,
                    d[i][j].value
                ));
            }
            let eq = games_equivalent(games[i], games[j], EQUIVALENCE_SAMPLES)?;
            let consistent = if eq {
                d[i][j].value <= d[i][j].error_bound + 1e-12 * games[i].total_demand().max(1.0)
            } else {
                d[i][j].value + d[i][j].error_bound > 0.0
            };
            if !consistent {
                identity_consistent = false;
                violations.push(format!(
                    "g{} and g{} equivalent = {eq} but Dist = {}",
                    i + 1,
                    j + 1,
                    d[i][j].value
                ));
            }
        }
    }
    let mut worst = f64::INFINITY;
    for (x, y, z) in [(0, 1, 2), (0, 2, 1), (1, 2, 0)] {
        let rhs = d[x][z].value + d[z][y].value + d[x][z].error_bound + d[z][y].error_bound;
        let margin = rhs + 1e-12 * rhs.max(1.0) - d[x][y].value;
        worst = worst.min(margin);
        if margin < 0.0 {
            violations.push(format!(
                "Dist(g{},g{}) = {} > Dist(g{},g{}) + Dist(g{},g{}) = {}",
                x + 1,
                y + 1,
                d[x][y].value,
                x + 1,
                z + 1,
                z + 1,
                y + 1,
                rhs
            ));
        }
    }
    Ok(AxiomReport {
        symmetric,
        nonnegative,
        identity_consistent,
        triangle: worst >= 0.0,
        worst_triangle_margin: worst,
        violations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    /// Vary demands, keep costs.
    Demand,
    /// Vary costs, keep demands.
    Cost,
    /// Vary both.
    Joint,
}

impl PerturbationKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PerturbationKind::Demand => "demand",
            PerturbationKind::Cost => "cost",
            PerturbationKind::Joint => "joint",
        }
    }

    /// Name of the subspace the perturbation stays in, in the convention
    /// where a slice is named after what it holds fixed: varying demands
    /// moves within the cost slice and vice versa.
    pub fn slice_name(&self) -> &'static str {
        match self {
            PerturbationKind::Demand => "cost_slice",
            PerturbationKind::Cost => "demand_slice",
            PerturbationKind::Joint => "none",
        }
    }
}

impl std::str::FromStr for PerturbationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "demand" => Ok(PerturbationKind::Demand),
            "cost" => Ok(PerturbationKind::Cost),
            "joint" => Ok(PerturbationKind::Joint),
            other => Err(Error::InvalidParameter(format!(
                "unknown perturbation kind {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub kind: PerturbationKind,
    pub target: f64,
    pub seed: u64,
    pub game: Game,
    pub realized: MetricValue,
    /// Step along the sampled direction that produced `game`.
    pub scale: f64,
    /// Set when the realized distance could not be brought into
    /// `[target/2, target]`.
    pub flagged: bool,
}

/// A random perturbation direction: per-O/D demand shifts and per-arc
/// intercept and slope shifts, all drawn uniformly from `(−1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    pub demand: Vec<f64>,
    pub intercept: Vec<f64>,
    pub slope: Vec<f64>,
}

impl Direction {
    pub fn sample(base: &Game, kind: PerturbationKind, seed: u64) -> Direction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw =
            |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect() };
        let demand = draw(base.num_od_pairs());
        let intercept = draw(base.num_arcs());
        let slope = draw(base.num_arcs());
        let zero_k = vec![0.0; base.num_od_pairs()];
        let zero_a = vec![0.0; base.num_arcs()];
        match kind {
            PerturbationKind::Demand => Direction {
                demand,
                intercept: zero_a.clone(),
                slope: zero_a,
            },
            PerturbationKind::Cost => Direction {
                demand: zero_k,
                intercept,
                slope,
            },
            PerturbationKind::Joint => Direction {
                demand: demand.iter().map(|v| 0.5 * v).collect(),
                intercept: intercept.iter().map(|v| 0.5 * v).collect(),
                slope: slope.iter().map(|v| 0.5 * v).collect(),
            },
        }
    }

    /// The game moved by `t` along this direction. Slope shifts are scaled
    /// by `1/T(d)` so that they move costs at `T(d)` by about `t`.
    pub fn apply(&self, base: &Game, t: f64) -> Result<Game> {
        let total = base.total_demand();
        let demands: Vec<f64> = base
            .demands()
            .iter()
            .zip(&self.demand)
            .map(|(d, u)| (d + t * u).max(0.0))
            .collect();
        if demands.iter().sum::<f64>() <= MIN_TOTAL_DEMAND {
            return Err(Error::Condition2("perturbed total demand vanishes".into()));
        }
        let costs = base
            .costs()
            .iter()
            .zip(self.intercept.iter().zip(&self.slope))
            .map(|(c, (i, s))| perturb_cost(c, t * i, t * s / total))
            .collect();
        Game::new(base.structure().clone(), costs, demands)
    }
}

fn shifted(v: f64, delta: f64) -> f64 {
    (v + delta).max(0.5 * v)
}

/// Shifts a cost's level by about `delta` and its slope by about `slope`,
/// clipping so parameters never drop below half their base value.
pub fn perturb_cost(c: &CostFunction, delta: f64, slope: f64) -> CostFunction {
    use CostFunction::*;
    if delta == 0.0 && slope == 0.0 {
        return c.clone();
    }
    match c {
        Constant { c } => Affine {
            slope: slope.max(0.0),
            intercept: shifted(*c, delta),
        },
        Affine {
            slope: a,
            intercept,
        } => Affine {
            slope: shifted(*a, slope),
            intercept: shifted(*intercept, delta),
        },
        Polynomial { coefficients } => {
            let mut co = coefficients.clone();
            if co.len() < 2 {
                co.resize(2, 0.0);
            }
            co[0] = shifted(co[0], delta);
            co[1] = shifted(co[1], slope);
            Polynomial { coefficients: co }
        }
        Bpr { q, beta, p } => Bpr {
            q: shifted(*q, slope),
            beta: *beta,
            p: shifted(*p, delta),
        },
        MonomialLog { zeta, beta, alpha } => MonomialLog {
            zeta: shifted(*zeta, slope),
            beta: *beta,
            alpha: *alpha,
        },
        PiecewiseLinear {
            breakpoints,
            values,
        } => PiecewiseLinear {
            breakpoints: breakpoints.clone(),
            values: values
                .iter()
                .zip(breakpoints)
                .map(|(v, b)| (v + delta + slope.max(0.0) * b).max(0.5 * v))
                .collect(),
        },
        Scaled {
            inner,
            arg_scale,
            value_scale,
        } => Scaled {
            inner: inner.clone(),
            arg_scale: *arg_scale,
            value_scale: value_scale * (1.0 + slope + delta).max(0.5),
        },
        Truncated { inner, at } => Truncated {
            inner: Box::new(perturb_cost(inner, delta, slope)),
            at: *at,
        },
        Tangent { inner, at } => Tangent {
            inner: Box::new(perturb_cost(inner, delta, slope)),
            at: *at,
        },
    }
}

/// Draws a game at certified distance at most `radius` from `base`, aiming
/// for a realized distance in `[radius/2, radius]`.
pub fn sample_ball(
    base: &Game,
    radius: f64,
    kind: PerturbationKind,
    seed: u64,
) -> Result<Perturbation> {
    if !(radius >= 0.0) || !radius.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "radius must be finite and non-negative, got {radius}"
        )));
    }
    let unchanged = |flagged| Perturbation {
        kind,
        target: radius,
        seed,
        game: base.clone(),
        realized: MetricValue::ZERO,
        scale: 0.0,
        flagged,
    };
    if radius == 0.0 {
        return Ok(unchanged(false));
    }
    let dir = Direction::sample(base, kind, seed);
    let eval = |t: f64| -> Option<(Game, MetricValue)> {
        let g = dir.apply(base, t).ok()?;
        let m = dist(base, &g).ok()?;
        Some((g, m))
    };
    let inside = |m: &MetricValue| m.value + m.error_bound <= radius;
    let done = |g: Game, m: MetricValue, t: f64, flagged: bool| Perturbation {
        kind,
        target: radius,
        seed,
        game: g,
        realized: m,
        scale: t,
        flagged,
    };

    let mut t = radius;
    let mut lo: Option<(f64, Game, MetricValue)> = None;
    for _ in 0..80 {
        match eval(t) {
            Some((g, m)) if inside(&m) => {
                lo = Some((t, g, m));
                break;
            }
            _ => t *= 0.5,
        }
    }
    let Some((mut lo_t, mut lo_g, mut lo_m)) = lo else {
        return Ok(unchanged(true));
    };
    if lo_m.value >= 0.5 * radius {
        return Ok(done(lo_g, lo_m, lo_t, false));
    }
    let mut hi_t = None;
    for _ in 0..80 {
        let t2 = lo_t * 2.0;
        match eval(t2) {
            Some((g, m)) if inside(&m) => {
                if m.value >= 0.5 * radius {
                    return Ok(done(g, m, t2, false));
                }
                lo_t = t2;
                lo_g = g;
                lo_m = m;
            }
            _ => {
                hi_t = Some(t2);
                break;
            }
        }
    }
    let Some(mut hi_t) = hi_t else {
        return Ok(done(lo_g, lo_m, lo_t, true));
    };
    for _ in 0..100 {
        let mid = 0.5 * (lo_t + hi_t);
        if mid <= lo_t || mid >= hi_t {
            break;
        }
        match eval(mid) {
            Some((g, m)) if inside(&m) => {
                if m.value >= 0.5 * radius {
                    return Ok(done(g, m, mid, false));
                }
                lo_t = mid;
                lo_g = g;
                lo_m = m;
            }
            _ => hi_t = mid,
        }
    }
    Ok(done(lo_g, lo_m, lo_t, true))
}
