use alloc::string::String;

use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unreduced derivative V^({0}) reached moment evaluation")]
    UnreducedDerivative(u8),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("boundary term undecidable at order {0}")]
    Undecidable(usize),
    #[error("potential too singular at the origin: {0}")]
    TooSingular(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("contradictory constraints: {0}")]
    Contradictory(String),
    #[error("block {0} is empty after dropping divergent entries")]
    EmptyBlock(String),
    #[error("no bound state: {0}")]
    NoBoundState(String),
    #[error("bracket [{lo}, {hi}] does not straddle a sign change")]
    Bracket { lo: f64, hi: f64 },
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("solver failure: {0}")]
    Solver(String),
}
