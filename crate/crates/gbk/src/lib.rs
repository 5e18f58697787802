//! Generalized Baskakov-Kantorovich operators.
//!
//! This crate evaluates the positive linear operators `K_n^a` built from the
//! Mihesan basis `W_{n,k}^a(x)`, computes their raw and central moments as
//! exact rational functions of `x`, and ships a numerical laboratory that
//! checks the classical approximation statements for this operator family:
//! direct estimates through moduli of smoothness, weighted approximation,
//! simultaneous approximation of derivatives, Voronovskaja asymptotics,
//! statistical (Cesaro-density) convergence, and rates for functions whose
//! derivative has bounded variation.
//!
//! The layering is strict: [`ratcore`] knows nothing about operators,
//! [`basis`] and [`moments`] build on it, [`operator`] adds floating-point
//! series evaluation, and [`analysis`] / [`bv`] only consume the public
//! surfaces below them. Everything symbolic is exact (big-rational
//! coefficients); everything numeric carries an explicit truncation
//! certificate.
//!
//! A narrative guide with runnable snippets lives in `book/`; the snippets
//! are compiled as doc-tests through the [`guide`] module.

pub mod analysis;
pub mod basis;
pub mod bv;
pub mod catalog;
pub mod cli;
pub mod guide;
pub mod moments;
pub mod operator;
pub mod ratcore;
pub mod report;

/// Crate-wide error type.
///
/// Numerical failures (`TruncationFailure`, `StepUnderflow`) are recoverable
/// signals that a parameter lies outside the supported range; they map to
/// CLI exit code 2.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("evaluation at the pole x = -1")]
    Pole,
    #[error("truncation failed: tail bound {tail:.3e} still above tolerance after {terms} terms")]
    TruncationFailure { tail: f64, terms: usize },
    #[error("recurrence step left the p(x)/(1+x)^m family")]
    DivisionNotExact,
    #[error("order estimate undefined: zero value at n = {n}")]
    OrderUndefined { n: u64 },
    #[error("step underflow in numerical differentiation (required step below {min_h:.3e})")]
    StepUnderflow { min_h: f64 },
    #[error("rate fit requires positive errors (got {value:e} at n = {n})")]
    NonpositiveError { n: u64, value: f64 },
    #[error("cannot determine monotone pieces for total variation on [{c}, {d}]")]
    UnknownMonotonicity { c: f64, d: f64 },
    #[error("function `{id}` lacks one-sided derivative data at x = {x}")]
    MissingOneSidedData { id: String, x: f64 },
    #[error("second-moment bound not yet valid at n = {n}; minimal valid n is {min_n}")]
    RemarkNotYetValid { n: u64, min_n: u64 },
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
