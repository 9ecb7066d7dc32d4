//! Cost and demand normalizations and the auxiliary games built from a base
//! game and a new demand vector.

use serde::{Deserialize, Serialize};

use crate::cost::CostFunction;
use crate::error::{Error, Result};
use crate::game::Game;

/// A positive scaling factor `υ`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct NormalizationFactor(f64);

impl NormalizationFactor {
    pub fn new(v: f64) -> Result<Self> {
        if v.is_finite() && v > 0.0 {
            Ok(NormalizationFactor(v))
        } else {
            Err(Error::InvalidParameter(format!(
                "normalization factor must be positive, got {v}"
            )))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for NormalizationFactor {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        NormalizationFactor::new(v)
    }
}

impl From<NormalizationFactor> for f64 {
    fn from(v: NormalizationFactor) -> f64 {
        v.0
    }
}

/// `Ψ_υ(τ, d) = (τ/υ, d)`.
pub fn cost_normalize(g: &Game, upsilon: NormalizationFactor) -> Result<Game> {
    let u = upsilon.get();
    if u == 1.0 {
        return Ok(g.clone());
    }
    let costs = g.costs().iter().map(|c| c.scale_value(1.0 / u)).collect();
    Game::generalized(g.structure().clone(), costs, g.demands().to_vec())
}

/// `Λ_υ(τ, d) = (τ(υ·), d/υ)`.
pub fn demand_normalize(g: &Game, upsilon: NormalizationFactor) -> Result<Game> {
    let u = upsilon.get();
    if u == 1.0 {
        return Ok(g.clone());
    }
    let costs = g.costs().iter().map(|c| c.scale_argument(u)).collect();
    let demands = g.demands().iter().map(|d| d / u).collect();
    Game::generalized(g.structure().clone(), costs, demands)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtensionMode {
    /// Freeze each cost beyond `min(T, T')`.
    Constant,
    /// Continue each cost beyond `T` along its tangent at `T`.
    Tangent,
}

/// The game `(τ̂, d')` whose costs agree with the base costs on
/// `[0, min(T(d), T(d'))]` and are extended beyond according to `mode`.
pub fn auxiliary_game(base: &Game, demands: Vec<f64>, mode: ExtensionMode) -> Result<Game> {
    let t = base.total_demand();
    let t_new: f64 = demands.iter().sum();
    if !(t_new > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "new total demand {t_new} must be positive"
        )));
    }
    let costs = match mode {
        ExtensionMode::Constant => {
            let t_min = t.min(t_new);
            base.costs()
                .iter()
                .map(|c| CostFunction::Truncated {
                    inner: Box::new(c.clone()),
                    at: t_min,
                })
                .collect()
        }
        ExtensionMode::Tangent => {
            let mut out = Vec::with_capacity(base.num_arcs());
            for (a, c) in base.costs().iter().enumerate() {
                if !c.differentiable_at(t) {
                    return Err(Error::Precondition(format!(
                        "cost of arc {:?} is not differentiable at {t}",
                        base.structure().arcs()[a]
                    )));
                }
                out.push(CostFunction::Tangent {
                    inner: Box::new(c.clone()),
                    at: t,
                });
            }
            out
        }
    };
    Game::generalized(base.structure().clone(), costs, demands)
}

/// `auxiliary_game` with the base demands rescaled to total `new_total`.
pub fn truncate_extend(base: &Game, new_total: f64, mode: ExtensionMode) -> Result<Game> {
    if !(new_total > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "new total demand {new_total} must be positive"
        )));
    }
    let k = new_total / base.total_demand();
    auxiliary_game(base, base.demands().iter().map(|d| d * k).collect(), mode)
}
