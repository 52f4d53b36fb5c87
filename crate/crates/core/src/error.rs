//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("not a submeasure: weight deficit {deficit:.3e} at position {position}")]
    NotASubmeasure { position: f64, deficit: f64 },

    #[error("quantile level {level} outside (0, {mass}]")]
    QuantileOutOfRange { level: f64, mass: f64 },

    #[error("mass mismatch: {left} vs {right}")]
    MassMismatch { left: f64, right: f64 },

    #[error("order violation: {relation} fails{}", match .chain_index { Some(i) => format!(" at chain index {i}"), None => String::new() })]
    OrderViolation {
        relation: &'static str,
        chain_index: Option<usize>,
    },

    #[error("no convex minorant: left slope {left} exceeds right slope {right}")]
    NoConvexMinorant { left: f64, right: f64 },

    #[error("not a potential function: {0}")]
    NotAPotential(String),

    #[error("asymptotic mismatch: inputs differ in mass or first moment")]
    AsymptoticMismatch,

    #[error("invalid peacock: {0}")]
    InvalidPeacock(String),

    #[error("residual family fails convex order at time index {0}")]
    ResidualNotPeacock(usize),

    #[error("negative slice weight {weight:.3e} at position {position} (slice {slice})")]
    NegativeSlice {
        slice: usize,
        position: f64,
        weight: f64,
    },

    #[error("mixture has {0} non-binomial links; pass force to sample anyway")]
    NonBinomialMixture(usize),

    #[error("point {x} outside hull [{lo}, {hi}] of the target set")]
    OutOfHull { x: f64, lo: f64, hi: f64 },

    #[error("no feasible boundary fractions: {0}")]
    NoSolution(String),

    #[error("invalid parametrization: {0}")]
    InvalidParametrization(String),

    #[error("bad distribution spec: {0}")]
    BadSpec(String),

    #[error("linear program infeasible")]
    Infeasible,

    #[error("linear program unbounded")]
    Unbounded,

    #[error("simplex iteration limit reached")]
    IterationLimit,

    #[error("problem size {size} exceeds limit {limit}")]
    SizeLimit { size: usize, limit: usize },

    #[error("alpha {0} outside [0, 1]")]
    AlphaOutOfRange(f64),
}
