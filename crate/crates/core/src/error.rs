use thiserror::Error;

use crate::equilibria::EquilibriumKind;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("negative concentration (s1 = {s1}, s2 = {s2})")]
    NegativeConcentration { s1: f64, s2: f64 },

    #[error("state (x1 = {x1}, x2 = {x2}) lies outside the admissible region")]
    OutOfRegion { x1: f64, x2: f64 },

    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("growth model violates {count} hypothesis check(s), first: {first}")]
    HypothesesViolated { count: usize, first: String },

    #[error("{kind:?} residual {residual:e} exceeds tolerance")]
    ResidualTooLarge {
        kind: EquilibriumKind,
        residual: f64,
    },

    #[error("dilution rate {dilution} is within tolerance of threshold {threshold} = {value}")]
    AtBifurcation {
        dilution: f64,
        threshold: &'static str,
        value: f64,
    },

    #[error("equilibrium at ({x1}, {x2}) is not a saddle")]
    NotASaddle { x1: f64, x2: f64 },

    #[error("unknown growth family `{0}`")]
    UnknownFamily(String),

    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
