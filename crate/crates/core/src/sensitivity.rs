//! Local Hölder certificates for the price of anarchy, randomized sweeps
//! around a base game and log–log exponent fits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::CostFunction;
use crate::error::{Error, Result};
use crate::game::Game;
use crate::metric::{dist, sample_ball, MetricValue, PerturbationKind};
use crate::numerics::{linear_fit, mix_seed};
use crate::solver::{poa, PoaReport, SolveOptions};
use crate::transforms::{cost_normalize, NormalizationFactor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    /// Same demands, Lipschitz base costs: exponent ½.
    CostSlice,
    /// Same costs, smaller total demand: exponent ½.
    DemandSlice,
    /// Base costs constant on `[0, T]`: exponent 1 on the whole space.
    ConstantCosts,
    /// Base costs C¹ on `[0, T]` with positive derivative: exponent 1 on the
    /// whole space.
    Smooth,
}

impl CertificateKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CertificateKind::CostSlice => "cost_slice",
            CertificateKind::DemandSlice => "demand_slice",
            CertificateKind::ConstantCosts => "constant_costs",
            CertificateKind::Smooth => "smooth",
        }
    }
}

/// `|ρ(Γ) − ρ(Γ')| ≤ bound(dist(Γ, Γ'))` for every `Γ'` covered by the
/// certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoelderCertificate {
    pub which: CertificateKind,
    pub constant: f64,
    pub exponent: f64,
    pub radius: f64,
    /// Lipschitz constant of the base costs used by the certificate.
    pub lipschitz: f64,
    pub total_demand: f64,
    pub num_od_pairs: usize,
}

impl HoelderCertificate {
    pub fn bound(&self, d: f64) -> f64 {
        match self.which {
            CertificateKind::CostSlice => self.constant * d.sqrt().max(d),
            CertificateKind::DemandSlice => self.constant * d.sqrt().max(self.lipschitz.sqrt() * d),
            CertificateKind::ConstantCosts | CertificateKind::Smooth => self.constant * d,
        }
    }

    /// Whether `other` lies in the region where the certificate applies;
    /// `d` is an upper bound on `dist(base, other)`.
    pub fn covers(&self, base: &Game, other: &Game, d: f64) -> bool {
        if !base.same_structure(other) || !(d <= self.radius) {
            return false;
        }
        match self.which {
            CertificateKind::CostSlice => base.demands() == other.demands(),
            CertificateKind::DemandSlice => {
                base.costs() == other.costs()
                    && other.total_demand() <= self.total_demand
                    && d < self.total_demand / self.num_od_pairs as f64
            }
            CertificateKind::ConstantCosts | CertificateKind::Smooth => true,
        }
    }
}

/// Quantities of a base game entering the certificate constants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaseProfile {
    pub poa: f64,
    pub so_cost: f64,
    pub we_cost: f64,
    pub total_demand: f64,
    pub num_arcs: usize,
    pub num_od_pairs: usize,
    /// `max_a` Lipschitz constant on `[0, T]` (may be infinite).
    pub lipschitz: f64,
    /// `min_a` infimum of the derivative on `[0, T]`.
    pub deriv_min: f64,
    /// `max_a τ_a(T)`.
    pub cost_max: f64,
    /// `max_s τ_s(0)`.
    pub path_cost_max_at_zero: f64,
    pub constant_costs: bool,
    pub continuously_differentiable: bool,
}

impl BaseProfile {
    pub fn new(game: &Game, report: &PoaReport) -> BaseProfile {
        let t = game.total_demand();
        let ranges: Vec<(f64, f64)> = game
            .costs()
            .iter()
            .map(|c| c.derivative_range(0.0, t))
            .collect();
        let zero_costs = game.arc_costs_at(&vec![0.0; game.num_arcs()]);
        let path_zero = game.path_costs_from_arc_costs(&zero_costs);
        BaseProfile {
            poa: report.poa,
            so_cost: report.so.total_cost,
            we_cost: report.we.total_cost,
            total_demand: t,
            num_arcs: game.num_arcs(),
            num_od_pairs: game.num_od_pairs(),
            lipschitz: ranges.iter().map(|r| r.1).fold(0.0, f64::max),
            deriv_min: ranges.iter().map(|r| r.0).fold(f64::INFINITY, f64::min),
            cost_max: game.costs().iter().map(|c| c.value(t)).fold(0.0, f64::max),
            path_cost_max_at_zero: path_zero.iter().copied().fold(0.0, f64::max),
            constant_costs: ranges.iter().all(|r| r.0 == 0.0 && r.1 == 0.0),
            continuously_differentiable: game.costs().iter().all(|c| c1_on(c, t)),
        }
    }

    pub fn compute(game: &Game, opts: &SolveOptions) -> Result<BaseProfile> {
        Ok(BaseProfile::new(game, &poa(game, opts)?))
    }

    fn at(&self) -> f64 {
        self.num_arcs as f64 * self.total_demand
    }

    fn cert(
        &self,
        which: CertificateKind,
        constant: f64,
        exponent: f64,
        radius: f64,
        lipschitz: f64,
    ) -> HoelderCertificate {
        HoelderCertificate {
            which,
            constant,
            exponent,
            radius,
            lipschitz,
            total_demand: self.total_demand,
            num_od_pairs: self.num_od_pairs,
        }
    }
}

fn kink_candidates(c: &CostFunction, out: &mut Vec<f64>, scale: f64) {
    use CostFunction::*;
    match c {
        PiecewiseLinear { breakpoints, .. } => out.extend(breakpoints.iter().map(|b| b / scale)),
        Scaled {
            inner, arg_scale, ..
        } => kink_candidates(inner, out, scale * arg_scale),
        Truncated { inner, at } | Tangent { inner, at } => {
            out.push(*at / scale);
            kink_candidates(inner, out, scale);
        }
        _ => {}
    }
}

/// Continuously differentiable on `[0, t]` with a bounded derivative.
fn c1_on(c: &CostFunction, t: f64) -> bool {
    if !c.lipschitz_on(t).is_finite() {
        return false;
    }
    let mut k = Vec::new();
    kink_candidates(c, &mut k, 1.0);
    k.iter()
        .filter(|x| **x > 0.0 && **x < t)
        .all(|x| c.differentiable_at(*x))
}

/// Same-demand certificate; `None` when the base costs are not Lipschitz
/// on `[0, T]`.
pub fn certificate_cost_slice(p: &BaseProfile) -> Option<HoelderCertificate> {
    let m = p.lipschitz;
    if !m.is_finite() {
        return None;
    }
    let at = p.at();
    let h = 2.0 * (p.poa + (m * at).sqrt() + 2.0) / p.so_cost * at;
    Some(p.cert(
        CertificateKind::CostSlice,
        h,
        0.5,
        p.so_cost / (2.0 * at),
        m,
    ))
}

/// Same-cost certificate for games with total demand at most `T`.
pub fn certificate_demand_slice(p: &BaseProfile) -> Option<HoelderCertificate> {
    if !p.lipschitz.is_finite() {
        return None;
    }
    let m = p.lipschitz.max(1.0);
    let at = p.at();
    let na = p.num_arcs as f64;
    let nk = p.num_od_pairs as f64;
    let m_tilde = 2.0 * (((m * at).sqrt() + 2.0) * at + na * nk * p.cost_max) * m.sqrt();
    let m_star = 2.0 * (na * nk * p.cost_max + at * m);
    let h = (2.0 * p.poa * m_star + 2.0 * m_tilde) / p.so_cost;
    let radius = (p.total_demand / nk).min(p.so_cost / (2.0 * m_star));
    Some(p.cert(CertificateKind::DemandSlice, h, 0.5, radius, m))
}

/// Global Lipschitz certificate for base games with constant costs on
/// `[0, T]`.
pub fn certificate_constant_costs(p: &BaseProfile) -> Option<HoelderCertificate> {
    if !p.constant_costs {
        return None;
    }
    let at = p.at();
    let nk = p.num_od_pairs as f64;
    let h = 8.0 * at * (nk + 1.0) / p.so_cost;
    Some(p.cert(
        CertificateKind::ConstantCosts,
        h,
        1.0,
        constant_costs_radius(p),
        0.0,
    ))
}

/// Radius under which the constant-cost certificate holds: the perturbed
/// total demand stays below `2T` and the optimal cost of the constant-cost
/// game at the perturbed demands stays above `C*/2` after the perturbation
/// error is subtracted.
pub fn constant_costs_radius(p: &BaseProfile) -> f64 {
    let nk = p.num_od_pairs as f64;
    let denom = nk * p.path_cost_max_at_zero + 2.0 * p.at() * (nk + 1.0);
    (p.total_demand / nk).min(p.so_cost / (2.0 * denom))
}

/// Global Lipschitz certificate for C¹ base costs with positive derivative
/// on `[0, T]`.
pub fn certificate_smooth(p: &BaseProfile) -> Option<HoelderCertificate> {
    if !p.continuously_differentiable || !(p.deriv_min > 0.0) || !p.lipschitz.is_finite() {
        return None;
    }
    let m = p.lipschitz.max(1.0);
    let at = p.at();
    let na = p.num_arcs as f64;
    let nk = p.num_od_pairs as f64;
    let kp = 1.0 + nk * m;
    let ratio = 2.0 + m / p.deriv_min;
    let a1 = (4.0 + 4.0 * ratio * p.poa) / p.so_cost * at * kp;
    let we_c = 2.0 * ratio * at * kp + 2.0 * na * p.cost_max * nk * kp;
    let so_c = 4.0 * (na * nk * p.cost_max + at * m) * kp;
    let a2 = (2.0 * p.poa * so_c + 2.0 * we_c) / p.so_cost;
    let radius = (p.total_demand / nk)
        .min(p.so_cost / (2.0 * so_c))
        .min(p.so_cost / (4.0 * at * kp));
    Some(p.cert(CertificateKind::Smooth, a1 + a2, 1.0, radius, m))
}

/// Every certificate whose hypotheses hold for the base game.
pub fn certificates(p: &BaseProfile) -> Vec<HoelderCertificate> {
    [
        certificate_cost_slice(p),
        certificate_demand_slice(p),
        certificate_constant_costs(p),
        certificate_smooth(p),
    ]
    .into_iter()
    .flatten()
    .collect()
}

/// One perturbed game of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub seed: u64,
    pub kind: PerturbationKind,
    pub slice: String,
    pub radius: f64,
    pub dist: MetricValue,
    pub base_poa: f64,
    pub pert_poa: f64,
    pub delta: f64,
    /// Solver tolerance used for the perturbed game.
    pub tol: f64,
    /// Tightest applicable certified bound at `dist + error`.
    pub cert_bound: Option<f64>,
    /// Every applicable certificate and its bound.
    pub bounds: Vec<(CertificateKind, f64)>,
    /// The sampler could not land the realized distance in `[r/2, r]`.
    pub flagged: bool,
    pub error: Option<String>,
}

impl SweepRecord {
    pub fn usable(&self) -> bool {
        self.error.is_none() && self.delta.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sweep {
    pub base: BaseProfile,
    pub certificates: Vec<HoelderCertificate>,
    pub records: Vec<SweepRecord>,
}

impl Sweep {
    /// Records whose `delta` exceeds a covering certificate's bound by more
    /// than `slack_factor` times the record's solver tolerance.
    pub fn violations(&self, slack_factor: f64) -> Vec<(&SweepRecord, CertificateKind, f64)> {
        let mut out = Vec::new();
        for r in self.records.iter().filter(|r| r.usable()) {
            for (k, b) in &r.bounds {
                if r.delta > b + slack_factor * r.tol {
                    out.push((r, *k, *b));
                }
            }
        }
        out
    }
}

/// Solver tolerance used for perturbations at radius `r`.
pub fn sweep_tolerance(r: f64) -> f64 {
    (r * r / 100.0).clamp(1e-14, crate::solver::DEFAULT_TOL)
}

/// Samples `samples` games per radius around `base`, solves each, and
/// records the change in the price of anarchy together with every
/// applicable certified bound. Sample `i` uses the same seed at every
/// radius.
pub fn sweep(
    base: &Game,
    kind: PerturbationKind,
    radii: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Sweep> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
        return Err(Error::InvalidParameter(
            "radii must be positive and finite".into(),
        ));
    }
    let tol_min = radii
        .iter()
        .map(|r| sweep_tolerance(*r))
        .fold(f64::INFINITY, f64::min);
    let base_report = poa(
        base,
        &SolveOptions {
            seed,
            ..SolveOptions::with_tol(tol_min)
        },
    )?;
    let profile = BaseProfile::new(base, &base_report);
    let certs = certificates(&profile);
    let base_poa = profile.poa;

    let jobs: Vec<(f64, u64)> = (0..samples as u64)
        .flat_map(|i| radii.iter().map(move |r| (*r, mix_seed(seed, i))))
        .collect();
    let mut records: Vec<SweepRecord> = jobs
        .par_iter()
        .map(|(r, s)| one_record(base, base_poa, &certs, kind, *r, *s))
        .collect();
    records.sort_by(|a, b| a.seed.cmp(&b.seed).then(a.radius.total_cmp(&b.radius)));
    Ok(Sweep {
        base: profile,
        certificates: certs,
        records,
    })
}

fn one_record(
    base: &Game,
    base_poa: f64,
    certs: &[HoelderCertificate],
    kind: PerturbationKind,
    radius: f64,
    seed: u64,
) -> SweepRecord {
    let tol = sweep_tolerance(radius);
    let mut rec = SweepRecord {
        seed,
        kind,
        slice: kind.slice_name().to_string(),
        radius,
        dist: MetricValue {
            value: f64::NAN,
            error_bound: f64::NAN,
            ..MetricValue::ZERO
        },
        base_poa,
        pert_poa: f64::NAN,
        delta: f64::NAN,
        tol,
        cert_bound: None,
        bounds: Vec::new(),
        flagged: false,
        error: None,
    };
    let p = match sample_ball(base, radius, kind, seed) {
        Ok(p) => p,
        Err(e) => {
            rec.error = Some(e.to_string());
            return rec;
        }
    };
    rec.dist = p.realized;
    rec.flagged = p.flagged;
    let d_upper = p.realized.value + p.realized.error_bound;
    rec.bounds = certs
        .iter()
        .filter(|c| c.covers(base, &p.game, d_upper))
        .map(|c| (c.which, c.bound(d_upper)))
        .collect();
    rec.cert_bound = rec.bounds.iter().map(|b| b.1).reduce(f64::min);
    match poa(
        &p.game,
        &SolveOptions {
            seed,
            ..SolveOptions::with_tol(tol)
        },
    ) {
        Ok(r) => {
            rec.pert_poa = r.poa;
            rec.delta = (r.poa - base_poa).abs();
        }
        Err(e) => rec.error = Some(e.to_string()),
    }
    rec
}

/// Point used by the exponent fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoelderPoint {
    pub dist: f64,
    pub dist_err: f64,
    pub delta: f64,
}

impl From<&SweepRecord> for HoelderPoint {
    fn from(r: &SweepRecord) -> Self {
        HoelderPoint {
            dist: r.dist.value,
            dist_err: r.dist.error_bound,
            delta: r.delta,
        }
    }
}

/// `log δ ≈ log H + γ̂·log dist`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoelderFit {
    pub gamma: f64,
    pub constant: f64,
    pub r2: f64,
    pub used: usize,
}

pub const MIN_FIT_RECORDS: usize = 8;

/// Least-squares fit of `log δ` on `log dist`. Points with `δ` at or below
/// `max(1e-12, tol)` or with a distance not resolved above its error bound
/// are censored.
pub fn fit_hoelder(points: &[HoelderPoint], tol: f64) -> Result<HoelderFit> {
    let floor = tol.max(1e-12);
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| {
            p.delta.is_finite()
                && p.dist.is_finite()
                && p.delta > floor
                && p.dist > p.dist_err.max(0.0)
        })
        .map(|p| (p.dist.ln(), p.delta.ln()))
        .unzip();
    if xs.len() < MIN_FIT_RECORDS {
        return Err(Error::TooFewRecords {
            usable: xs.len(),
            needed: MIN_FIT_RECORDS,
        });
    }
    let f = linear_fit(&xs, &ys).ok_or(Error::TooFewRecords {
        usable: xs.len(),
        needed: MIN_FIT_RECORDS,
    })?;
    Ok(HoelderFit {
        gamma: f.slope,
        constant: f.intercept.exp(),
        r2: f.r2,
        used: xs.len(),
    })
}

/// Largest `δ` observed at each radius, in the order of `radii`.
pub fn max_delta_by_radius(records: &[SweepRecord], radii: &[f64]) -> Vec<f64> {
    radii
        .iter()
        .map(|r| {
            records
                .iter()
                .filter(|x| x.radius == *r && x.usable())
                .map(|x| x.delta)
                .fold(0.0, f64::max)
        })
        .collect()
}

/// A pair of games shrunk by a common cost normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShrinkStep {
    pub upsilon: f64,
    pub dist: f64,
    pub poa_a: f64,
    pub poa_b: f64,
}

/// Applies `Ψ_υ` to both games for each factor. Distances shrink like
/// `1/υ` while both prices of anarchy are unchanged, so no single Hölder
/// constant can hold on the whole space.
pub fn normalization_shrinkage(
    a: &Game,
    b: &Game,
    factors: &[f64],
    opts: &SolveOptions,
) -> Result<Vec<ShrinkStep>> {
    let pa = poa(a, opts)?.poa;
    let pb = poa(b, opts)?.poa;
    let mut out = Vec::with_capacity(factors.len());
    for u in factors {
        let u = NormalizationFactor::new(*u)?;
        let a2 = cost_normalize(a, u)?;
        let b2 = cost_normalize(b, u)?;
        out.push(ShrinkStep {
            upsilon: u.get(),
            dist: dist(&a2, &b2)?.value,
            poa_a: if u.get() == 1.0 {
                pa
            } else {
                poa(&a2, opts)?.poa
            },
            poa_b: if u.get() == 1.0 {
                pb
            } else {
                poa(&b2, opts)?.poa
            },
        });
    }
    Ok(out)
}
