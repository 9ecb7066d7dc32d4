//! Wardrop equilibria, social optima and the price of anarchy of
//! non-atomic congestion games, together with a metric on game space,
//! ρ-invariant normalizations, Hölder sensitivity certificates and
//! demand-scaling convergence experiments.

// Negated float comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convergence;
pub mod cost;
pub mod error;
pub mod game;
pub mod instances;
pub mod io;
pub mod metric;
pub mod numerics;
pub mod sensitivity;
pub mod solver;
pub mod transforms;

pub use cost::{sup_distance, CostFunction, IntervalBound, SupDistance, DEFAULT_GRID};
pub use error::{Error, Result};
pub use game::{games_equivalent, Game, PathFlow, Structure};
