//! Independent reference engines: backward ODE, matrix exponential and
//! Monte Carlo under the risk-neutral measure.

pub mod expm;
pub mod mc;
pub mod ode;

pub use expm::{expm_price, transition_matrix};
pub use mc::{mc_price, McConfig, McEstimate, McPayoff};
pub use ode::{ode_price, ode_price_dense, OdeConfig, OdeMethod};
