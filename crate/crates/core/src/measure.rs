//! Change to the homogenized measure under which the chain jumps at unit rate
//! to a uniformly chosen other regime.
//!
//! Under that measure the pricing problem is described by a jump-penalty
//! matrix `K̃` and an adjusted rate vector `r̃`:
//!
//! ```text
//! K̃_ij(t) = -ln((N-1) a_ij(t))    i != j
//! r̃_i(t)  = d_i - 1 - a_ii(t)
//! ```
//!
//! where `d` is the discount vector, either `r + hL` or `r`.

use nalgebra::DMatrix;

use crate::error::{PricingError, Result};
use crate::model::{Generator, RegimeModel};
use crate::quad;

/// Which discount rates enter `r̃`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Discounting {
    /// `r_i + h_i L_i`
    CreditAdjusted,
    /// `r_i` alone
    RateOnly,
}

/// `K̃` and `r̃` evaluated at one instant.
#[derive(Clone, Debug)]
pub struct FrozenParams {
    pub k_tilde: DMatrix<f64>,
    pub r_tilde: Vec<f64>,
}

impl FrozenParams {
    pub fn n_regimes(&self) -> usize {
        self.r_tilde.len()
    }
}

/// Evaluable `K̃(t)` and `r̃(t)`. Constant generators are transformed once.
#[derive(Clone, Debug)]
pub struct TransformedParams {
    generator: Generator,
    discount: Vec<f64>,
    cached: Option<FrozenParams>,
}

fn freeze(a: &DMatrix<f64>, discount: &[f64], t: f64) -> Result<FrozenParams> {
    let n = discount.len();
    let scale = (n.max(2) - 1) as f64;
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            let v = a[(i, j)];
            if !(v > 0.0) {
                return Err(PricingError::NonPositiveRate {
                    row: i + 1,
                    col: j + 1,
                    time: t,
                    value: v,
                });
            }
            k[(i, j)] = -(scale * v).ln();
        }
    }
    let r_tilde = (0..n).map(|i| discount[i] - 1.0 - a[(i, i)]).collect();
    Ok(FrozenParams { k_tilde: k, r_tilde })
}

impl TransformedParams {
    pub fn new(model: &RegimeModel, discounting: Discounting) -> Result<Self> {
        let discount = match discounting {
            Discounting::CreditAdjusted => model.credit_adjusted_rates(),
            Discounting::RateOnly => model.short_rates().to_vec(),
        };
        let generator = model.generator().clone();
        let cached = match &generator {
            Generator::Constant(a) => Some(freeze(a, &discount, 0.0)?),
            Generator::TimeVarying(_) => None,
        };
        Ok(Self {
            generator,
            discount,
            cached,
        })
    }

    pub fn n_regimes(&self) -> usize {
        self.discount.len()
    }

    pub fn is_constant(&self) -> bool {
        self.cached.is_some()
    }

    /// The discount vector `d` used in `r̃`.
    pub fn discount(&self) -> &[f64] {
        &self.discount
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    /// `K̃` and `r̃` at calendar time `t`.
    pub fn at(&self, t: f64) -> Result<FrozenParams> {
        match &self.cached {
            Some(p) => Ok(p.clone()),
            None => freeze(&self.generator.at(t), &self.discount, t),
        }
    }

    pub fn k_tilde(&self, t: f64) -> Result<DMatrix<f64>> {
        self.at(t).map(|p| p.k_tilde)
    }

    pub fn r_tilde(&self, t: f64) -> Result<Vec<f64>> {
        self.at(t).map(|p| p.r_tilde)
    }

    /// `∫_a^b r̃_i(w) dw`.
    pub fn r_tilde_integral(&self, i: usize, a: f64, b: f64) -> f64 {
        match &self.cached {
            Some(p) => p.r_tilde[i] * (b - a),
            None => {
                let d = self.discount[i] - 1.0;
                d * (b - a) - quad::integrate(|w| self.generator.at(w)[(i, i)], a, b)
            }
        }
    }
}

/// Homogenized-measure parameters discounting at `r + hL`.
pub fn transform(model: &RegimeModel) -> Result<TransformedParams> {
    TransformedParams::new(model, Discounting::CreditAdjusted)
}

/// Homogenized-measure parameters discounting at `r` alone.
pub fn transform_rate_only(model: &RegimeModel) -> Result<TransformedParams> {
    TransformedParams::new(model, Discounting::RateOnly)
}
