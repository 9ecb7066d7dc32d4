//! Rates at which the price of anarchy approaches 1 as the total demand
//! tends to 0 or to infinity.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::CostFunction;
use crate::error::{Error, Result};
use crate::game::Game;
use crate::metric::dist;
use crate::numerics::linear_fit;
use crate::sensitivity::{constant_costs_radius, BaseProfile};
use crate::solver::{poa, SolveOptions};
use crate::transforms::{cost_normalize, demand_normalize, NormalizationFactor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "pattern")]
pub enum DemandPattern {
    /// `d_k/T` is the same at every total.
    FixedRatio,
    /// `d_k/T` oscillates with relative amplitude `amplitude < 1`, so the
    /// ratios stay bounded away from 0.
    DriftingRatio { amplitude: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandSchedule {
    pub direction: Vec<f64>,
    pub totals: Vec<f64>,
    pub pattern: DemandPattern,
}

impl DemandSchedule {
    pub fn new(direction: Vec<f64>, totals: Vec<f64>, pattern: DemandPattern) -> Result<Self> {
        if direction.is_empty() || direction.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
            return Err(Error::InvalidParameter(
                "demand direction entries must be positive".into(),
            ));
        }
        if totals.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(Error::InvalidParameter(
                "totals must be positive and finite".into(),
            ));
        }
        if let DemandPattern::DriftingRatio { amplitude } = pattern {
            if !(0.0..1.0).contains(&amplitude) {
                return Err(Error::InvalidParameter(format!(
                    "drift amplitude {amplitude} must lie in [0, 1)"
                )));
            }
        }
        Ok(DemandSchedule {
            direction,
            totals,
            pattern,
        })
    }

    /// Fixed-ratio schedule following the demand pattern of `g`.
    pub fn fixed_ratio(g: &Game, totals: Vec<f64>) -> Result<Self> {
        DemandSchedule::new(
            g.demands()
                .iter()
                .map(|d| d.max(f64::MIN_POSITIVE))
                .collect(),
            totals,
            DemandPattern::FixedRatio,
        )
    }

    /// `start, start·ratio, …` with `n` entries.
    pub fn geometric(start: f64, ratio: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| start * ratio.powi(i as i32)).collect()
    }

    /// Demand vector at the `n`-th total.
    pub fn demands(&self, n: usize) -> Vec<f64> {
        let t = self.totals[n];
        let w: Vec<f64> = match self.pattern {
            DemandPattern::FixedRatio => self.direction.clone(),
            DemandPattern::DriftingRatio { amplitude } => self
                .direction
                .iter()
                .enumerate()
                .map(|(k, d)| d * (1.0 + amplitude * ((n + 2 * k) as f64).sin()))
                .collect(),
        };
        let s: f64 = w.iter().sum();
        w.iter().map(|x| t * x / s).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub total: f64,
    pub poa_minus_one: f64,
    /// Certified bound on `poa − 1`, when the certificate applies.
    pub bound: Option<f64>,
    /// Distance from the normalized game to its limit game, plus grid error.
    pub w: f64,
    /// Closed-form logarithmic bound for monomial-log costs.
    pub ln_bound: Option<f64>,
}

/// Small-demand run: solves `Λ_T(g)` at each total `T` and attaches the
/// linear bound `8·M²·|A|·(|K|+1)·T/τ_min(0)` (with `M ≥ 1` a Lipschitz
/// constant on `[0, max T]`), emitted while `M·T` is inside the radius of the
/// constant-cost certificate at the limit game `(τ(0), d/T)`.
pub fn converge_down(
    g0: &Game,
    schedule: &DemandSchedule,
    opts: &SolveOptions,
) -> Result<Vec<RatePoint>> {
    check_schedule(g0, schedule)?;
    let b = schedule.totals.iter().copied().fold(0.0, f64::max);
    let tau0: Vec<f64> = g0.costs().iter().map(|c| c.value(0.0)).collect();
    let tau_min0 = tau0.iter().copied().fold(f64::INFINITY, f64::min);
    if !(tau_min0 > 0.0) {
        return Err(Error::Precondition(
            "every cost must be strictly positive at 0".into(),
        ));
    }
    let m = g0
        .costs()
        .iter()
        .map(|c| c.lipschitz_on(b))
        .fold(0.0, f64::max);
    if !m.is_finite() {
        return Err(Error::Precondition(format!(
            "costs are not Lipschitz on [0, {b}]"
        )));
    }
    let mc = m.max(1.0);
    let na = g0.num_arcs() as f64;
    let nk = g0.num_od_pairs() as f64;
    let constants: Vec<CostFunction> = tau0.iter().map(|c| CostFunction::constant(*c)).collect();

    (0..schedule.totals.len())
        .into_par_iter()
        .map(|n| {
            let t = schedule.totals[n];
            let g = g0.with_demands(schedule.demands(n))?;
            let scaled = demand_normalize(&g, NormalizationFactor::new(t)?)?;
            let rho = poa(&scaled, opts)?.poa;
            let limit = Game::new(
                g.structure().clone(),
                constants.clone(),
                scaled.demands().to_vec(),
            )?;
            let limit_profile = BaseProfile::compute(&limit, opts)?;
            let mv = dist(&limit, &scaled)?;
            let bound = (m * t <= constant_costs_radius(&limit_profile))
                .then(|| 8.0 * mc * mc * na * (nk + 1.0) * t / tau_min0);
            Ok(RatePoint {
                total: t,
                poa_minus_one: rho - 1.0,
                bound,
                w: mv.value + mv.error_bound,
                ln_bound: None,
            })
        })
        .collect()
}

/// Leading behaviour `coeff·x^β·ln^α(x)` as `x → ∞`.
fn asymptotic_form(c: &CostFunction) -> Option<(f64, f64, f64)> {
    use CostFunction::*;
    match c {
        Affine { slope, .. } if *slope > 0.0 => Some((*slope, 1.0, 0.0)),
        Polynomial { coefficients } => {
            let n = coefficients.iter().rposition(|v| *v != 0.0)?;
            (n > 0).then(|| (coefficients[n], n as f64, 0.0))
        }
        Bpr { q, beta, .. } if *q > 0.0 && *beta > 0.0 => Some((*q, *beta, 0.0)),
        MonomialLog { zeta, beta, alpha } if *zeta > 0.0 => Some((*zeta, *beta, *alpha)),
        _ => None,
    }
}

/// Large-demand run. At each total `T` the game is normalized to
/// `Γ̂ = Ψ_{τ_b(T)}∘Λ_T(g)` with `b` the lexicographically first arc, and
/// compared with the limit game whose costs are `λ_a·x^β`. The certified
/// bound is the same-demand certificate of the limit game evaluated at
/// `w(T) = dist(Γ̂, limit)`, emitted while `w(T)` is inside its radius.
pub fn converge_up(
    g0: &Game,
    schedule: &DemandSchedule,
    opts: &SolveOptions,
) -> Result<Vec<RatePoint>> {
    check_schedule(g0, schedule)?;
    let arcs = g0.structure().arcs();
    let b = (0..arcs.len())
        .min_by(|i, j| arcs[*i].cmp(&arcs[*j]))
        .expect("at least one arc");
    let mut forms = Vec::with_capacity(arcs.len());
    for (a, c) in g0.costs().iter().enumerate() {
        let f = asymptotic_form(c).ok_or_else(|| {
            Error::Precondition(format!(
                "cost of arc {:?} is not regularly varying with a positive index among the supported families",
                arcs[a]
            ))
        })?;
        forms.push(f);
    }
    let (_, beta, alpha) = forms[b];
    if forms.iter().any(|f| f.1 != beta || f.2 != alpha) {
        return Err(Error::Precondition(
            "costs have different growth indices; the price of anarchy need not converge to 1 for such games".into(),
        ));
    }
    let lambda: Vec<f64> = forms.iter().map(|f| f.0 / forms[b].0).collect();
    let lambda_max = lambda.iter().copied().fold(0.0, f64::max);
    let limit_costs: Vec<CostFunction> = lambda
        .iter()
        .map(|l| CostFunction::bpr(*l, beta, 0.0))
        .collect();
    let lip = limit_costs
        .iter()
        .map(|c| c.lipschitz_on(1.0))
        .fold(0.0, f64::max);
    let na = g0.num_arcs() as f64;

    (0..schedule.totals.len())
        .into_par_iter()
        .map(|n| {
            let t = schedule.totals[n];
            let g = g0.with_demands(schedule.demands(n))?;
            let scaled = demand_normalize(&g, NormalizationFactor::new(t)?)?;
            let hat = cost_normalize(&scaled, NormalizationFactor::new(g.costs()[b].value(t))?)?;
            let rho = poa(&hat, opts)?.poa;
            let limit = Game::new(
                g.structure().clone(),
                limit_costs.clone(),
                hat.demands().to_vec(),
            )?;
            let lr = poa(&limit, opts)?;
            let c_star = lr.so.total_cost;
            let mv = dist(&hat, &limit)?;
            let w = mv.value + mv.error_bound;
            let constant = lip
                .is_finite()
                .then(|| 2.0 * (lr.poa + (na * lip).sqrt() + 2.0) / c_star * na);
            let bound = constant
                .filter(|_| w <= c_star / (2.0 * na))
                .map(|c| c * w.sqrt().max(w));
            let ln_bound = (alpha > 0.0).then_some(()).and(constant).map(|c| {
                c * ((alpha / beta) * (t / (t + 1.0)) / (t + 1.0).ln() * lambda_max).sqrt()
            });
            Ok(RatePoint {
                total: t,
                poa_minus_one: rho - 1.0,
                bound,
                w,
                ln_bound,
            })
        })
        .collect()
}

fn check_schedule(g0: &Game, s: &DemandSchedule) -> Result<()> {
    if s.direction.len() != g0.num_od_pairs() {
        return Err(Error::InvalidParameter(format!(
            "schedule has {} demand entries, game has {} O/D pairs",
            s.direction.len(),
            g0.num_od_pairs()
        )));
    }
    if s.totals.is_empty() {
        return Err(Error::InvalidParameter("no totals".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateAxis {
    /// Regress on `T`.
    Total,
    /// Regress on `1/ln(T + 1)`.
    InverseLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub used: usize,
    /// Every point was censored (price of anarchy numerically 1).
    pub degenerate: bool,
}

pub const MIN_RATE_POINTS: usize = 4;

/// Log–log least squares of `poa − 1` against the chosen axis, using points
/// with `poa − 1 > 10·tol`.
pub fn fit_rate(points: &[RatePoint], axis: RateAxis, tol: f64) -> Result<RateFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| p.poa_minus_one > 10.0 * tol)
        .map(|p| {
            let x = match axis {
                RateAxis::Total => p.total,
                RateAxis::InverseLog => 1.0 / (p.total + 1.0).ln(),
            };
            (x.ln(), p.poa_minus_one.ln())
        })
        .unzip();
    if xs.is_empty() {
        return Ok(RateFit {
            slope: f64::NAN,
            intercept: f64::NAN,
            r2: f64::NAN,
            used: 0,
            degenerate: true,
        });
    }
    if xs.len() < MIN_RATE_POINTS {
        return Err(Error::TooFewRecords {
            usable: xs.len(),
            needed: MIN_RATE_POINTS,
        });
    }
    let f = linear_fit(&xs, &ys).ok_or(Error::TooFewRecords {
        usable: xs.len(),
        needed: MIN_RATE_POINTS,
    })?;
    Ok(RateFit {
        slope: f.slope,
        intercept: f.intercept,
        r2: f.r2,
        used: xs.len(),
        degenerate: false,
    })
}
