use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-monotone interfaces: z[{index}] = {value} does not lie strictly below its predecessor")]
    NonMonotoneInterfaces { index: usize, value: f64 },

    #[error("interface {index} at z = {value} is outside the open slab (-H, 0)")]
    InterfaceOutOfSlab { index: usize, value: f64 },

    #[error("non-positive coefficient {name} at layer {layer}: {value}")]
    NonPositiveCoefficient {
        name: &'static str,
        layer: usize,
        value: f64,
    },

    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("transition half-width {epsilon} too large: 2*eps must stay below the thinnest layer ({min_thickness})")]
    EpsilonTooLarge { epsilon: f64, min_thickness: f64 },

    #[error("grid is not aligned with breakpoint z = {z}")]
    MisalignedGrid { z: f64 },

    #[error("background strip width {delta} is invalid: {reason}")]
    InvalidDelta { delta: f64, reason: String },

    #[error("shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("eigensolver failed to converge for mode {mode} at index {index}")]
    EigenNonConvergence { mode: usize, index: usize },

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    PowerIterationNonConvergence { iterations: usize, residual: f64 },

    #[error("pressure compatibility residual {residual:e} exceeds tolerance")]
    Compatibility { residual: f64 },

    #[error("spectrum truncated too far: Parseval deficit {deficit:e}")]
    TruncationDeficit { deficit: f64 },

    #[error("non-finite value detected at step {step}")]
    NonFinite { step: u64 },

    #[error("series and ledger disagree on {what}: {series} vs {ledger}")]
    LedgerMismatch {
        what: &'static str,
        series: f64,
        ledger: f64,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("state at t = {t} lies outside the absorbing ball: {what} = {value:e} > {radius:e}")]
    OutsideAbsorbingBall {
        t: f64,
        what: &'static str,
        value: f64,
        radius: f64,
    },

    #[error("time schedules are not in lockstep: {0}")]
    Lockstep(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
