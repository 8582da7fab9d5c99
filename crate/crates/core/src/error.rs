use std::fmt;

use thiserror::Error;

/// One breach of a generator invariant. Regime indices are 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub row: usize,
    pub col: usize,
    pub time: f64,
    pub value: f64,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// Off-diagonal rate is zero or negative.
    NonPositiveRate,
    /// Off-diagonal rate is not finite or exceeds the declared sup bound.
    Unbounded,
    /// Off-diagonal rate fell below the declared inf bound.
    BelowDeclaredInf,
    /// Row does not sum to zero; `col` holds the diagonal index and `value` the row sum.
    RowSum,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            ViolationKind::NonPositiveRate => "non-positive off-diagonal rate",
            ViolationKind::Unbounded => "unbounded off-diagonal rate",
            ViolationKind::BelowDeclaredInf => "rate below declared inf bound",
            ViolationKind::RowSum => "row does not sum to zero",
        };
        write!(
            f,
            "{what}: a({},{}) at t={} is {:e}",
            self.row, self.col, self.time, self.value
        )
    }
}

/// Every breach found while validating a generator.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
}

impl ViolationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ViolationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} generator violation(s)", self.violations.len())?;
        for v in &self.violations {
            write!(f, "; {v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum PricingError {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid generator: {0}")]
    InvalidGenerator(ViolationReport),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("expm requires constant generator")]
    ConstantGeneratorRequired,

    #[error("off-diagonal rate a({row},{col}) = {value:e} at t={time} is not strictly positive")]
    NonPositiveRate {
        row: usize,
        col: usize,
        time: f64,
        value: f64,
    },

    #[error("ODE step size underflow at time-to-maturity {at} (step {step:e})")]
    StepSizeUnderflow { at: f64, step: f64 },

    #[error("numerical failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, PricingError>;
