//! Pricing of vulnerable contingent claims in continuous-time Markov
//! regime-switching markets.
//!
//! The main engine expands the pre-default price in a Poisson series over the
//! number of regime transitions, evaluated under a homogenized measure where
//! the kernel of each term is the Laplace transform of a symmetric Dirichlet
//! distribution. Long maturities are handled by chaining short steps.
//!
//! Three independent reference engines (backward ODE, matrix exponential and
//! Monte Carlo under the risk-neutral measure) live in [`reference`].

pub mod barrier;
pub mod dirichlet;
pub mod error;
pub mod fixtures;
pub mod measure;
pub mod model;
pub mod quad;
pub mod reference;
pub mod series;
pub mod vulnerable;

pub use error::{PricingError, Result, Violation, ViolationKind, ViolationReport};
pub use measure::{transform, transform_rate_only, Discounting, FrozenParams, TransformedParams};
pub use model::{
    validate_generator, validate_generator_with, Generator, PayoffVector, RegimeModel,
    TimeVaryingGenerator,
};
