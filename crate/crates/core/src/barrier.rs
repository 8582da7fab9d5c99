//! Knock-out and knock-in claims on the volatility level `σ(X_t)`.
//!
//! A knock-out claim pays `Ξ(X_T)` only if `σ(X_s) < B` for every `s` in
//! `[0, T]`. Its series coefficients are the ordinary path sums restricted to
//! paths whose every visited regime, start included, lies below the barrier.
//! The same restriction chains across steps, so the short-step recursion
//! applies unchanged. Knock-in prices follow from parity with the plain claim.

use crate::error::{PricingError, Result};
use crate::measure::{Discounting, FrozenParams, TransformedParams};
use crate::model::{validate_generator, Generator, PayoffVector, RegimeModel};
use crate::reference::expm::discounted_expm;
use crate::series::{phi_masked, price_surface, LaplaceMode, PathCache, PriceSurface, PricerConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BarrierDirection {
    KnockOut,
    KnockIn,
}

#[derive(Clone, Debug)]
pub struct BarrierSpec {
    pub barrier: f64,
    pub direction: BarrierDirection,
    pub payoff: PayoffVector,
    /// Rate-only by default; credit-adjusted gives the vulnerable variant.
    pub discounting: Discounting,
}

impl BarrierSpec {
    pub fn new(barrier: f64, direction: BarrierDirection, payoff: PayoffVector) -> Result<Self> {
        if !(barrier > 0.0) {
            return Err(PricingError::InvalidConfig(format!("barrier must be positive, got {barrier}")));
        }
        Ok(Self {
            barrier,
            direction,
            payoff,
            discounting: Discounting::RateOnly,
        })
    }

    /// Pays 1 at maturity.
    pub fn digital(barrier: f64, direction: BarrierDirection, n: usize) -> Result<Self> {
        Self::new(barrier, direction, PayoffVector::ones(n))
    }

    /// Pays `(σ(X_T) - K)^+` at maturity.
    pub fn vol_call(barrier: f64, direction: BarrierDirection, strike: f64, vols: &[f64]) -> Result<Self> {
        let payoff = PayoffVector::new(vols.iter().map(|s| (s - strike).max(0.0)).collect())?;
        Self::new(barrier, direction, payoff)
    }

    pub fn with_discounting(self, discounting: Discounting) -> Self {
        Self { discounting, ..self }
    }

    /// Regimes strictly below the barrier.
    pub fn alive(&self, vols: &[f64]) -> Vec<bool> {
        vols.iter().map(|&s| s < self.barrier).collect()
    }
}

/// Knock-out series coefficient `Φ^OUT_{i,m}` under frozen parameters.
pub fn phi_out(
    i: usize,
    m: usize,
    zeta: f64,
    spec: &BarrierSpec,
    vols: &[f64],
    fp: &FrozenParams,
    laplace: LaplaceMode,
    cache: &PathCache,
) -> Result<f64> {
    let alive = spec.alive(vols);
    phi_masked(i, m, zeta, spec.payoff.values(), fp, laplace, 2, cache, Some(&alive))
}

/// Knock-out, knock-in and plain surfaces on a common grid.
#[derive(Clone, Debug)]
pub struct BarrierPrices {
    pub knock_out: PriceSurface,
    pub knock_in: PriceSurface,
    pub plain: PriceSurface,
}

fn setup(t: f64, spec: &BarrierSpec, model: &RegimeModel) -> Result<(TransformedParams, Vec<bool>)> {
    validate_generator(model.generator(), t).map_err(PricingError::InvalidGenerator)?;
    if spec.payoff.len() != model.n_regimes() {
        return Err(PricingError::InvalidModel("payoff length differs from regime count".into()));
    }
    let tp = TransformedParams::new(model, spec.discounting)?;
    Ok((tp, spec.alive(model.vols())))
}

/// All three legs; knock-in is plain minus knock-out.
pub fn price_barrier_legs(t: f64, spec: &BarrierSpec, cfg: &PricerConfig, model: &RegimeModel) -> Result<BarrierPrices> {
    let (tp, alive) = setup(t, spec, model)?;
    let knock_out = price_surface(t, &spec.payoff, cfg, &tp, Some(&alive))?;
    let plain = price_surface(t, &spec.payoff, cfg, &tp, None)?;
    let knock_in = PriceSurface::new(plain.grid().to_vec(), plain.prices() - knock_out.prices());
    Ok(BarrierPrices {
        knock_out,
        knock_in,
        plain,
    })
}

/// Price surface for the direction in `spec`.
pub fn price_barrier(t: f64, spec: &BarrierSpec, cfg: &PricerConfig, model: &RegimeModel) -> Result<PriceSurface> {
    match spec.direction {
        BarrierDirection::KnockOut => {
            let (tp, alive) = setup(t, spec, model)?;
            price_surface(t, &spec.payoff, cfg, &tp, Some(&alive))
        }
        BarrierDirection::KnockIn => Ok(price_barrier_legs(t, spec, cfg, model)?.knock_in),
    }
}

/// Knock-out price from the matrix exponential of the generator restricted
/// to the regimes below the barrier. Constant generators only.
pub fn knock_out_expm(t: f64, spec: &BarrierSpec, model: &RegimeModel) -> Result<Vec<f64>> {
    let a = match model.generator() {
        Generator::Constant(a) => a,
        Generator::TimeVarying(_) => return Err(PricingError::ConstantGeneratorRequired),
    };
    let alive = spec.alive(model.vols());
    let idx: Vec<usize> = (0..model.n_regimes()).filter(|&i| alive[i]).collect();
    let discount = match spec.discounting {
        Discounting::RateOnly => model.short_rates().to_vec(),
        Discounting::CreditAdjusted => model.credit_adjusted_rates(),
    };
    let sub = a.select_rows(&idx).select_columns(&idx);
    let d: Vec<f64> = idx.iter().map(|&i| discount[i]).collect();
    let xi: Vec<f64> = idx.iter().map(|&i| spec.payoff[i]).collect();
    let v = if idx.is_empty() { Vec::new() } else { discounted_expm(&sub, &d, t, &xi) };
    let mut out = vec![0.0; model.n_regimes()];
    for (k, &i) in idx.iter().enumerate() {
        out[i] = v[k];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::measure::transform_rate_only;
    use crate::series::Steps;

    #[test]
    fn knocked_out_start_is_zero() {
        let m = fixtures::table1_model_floored();
        let spec = BarrierSpec::digital(0.2, BarrierDirection::KnockOut, 3).unwrap();
        let fp = transform_rate_only(&m).unwrap().at(0.0).unwrap();
        let cache = PathCache::new(3, 4);
        for mm in 0..5 {
            assert_eq!(phi_out(2, mm, 0.7, &spec, m.vols(), &fp, LaplaceMode::Exact, &cache).unwrap(), 0.0);
        }
        let s = price_barrier(10.0, &spec, &PricerConfig::new(3, Steps::Width(0.5)), &m).unwrap();
        assert!(s.prices().row(2).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn no_jump_term() {
        let m = fixtures::table1_model_floored();
        let spec = BarrierSpec::digital(0.2, BarrierDirection::KnockOut, 3).unwrap();
        let fp = transform_rate_only(&m).unwrap().at(0.0).unwrap();
        let cache = PathCache::new(3, 1);
        let v = phi_out(0, 0, 0.4, &spec, m.vols(), &fp, LaplaceMode::Exact, &cache).unwrap();
        assert_eq!(v, (-0.4 * fp.r_tilde[0]).exp());
    }

    #[test]
    fn matches_killed_chain_expm() {
        let m = fixtures::table1_model_floored();
        let spec = BarrierSpec::vol_call(0.2, BarrierDirection::KnockOut, 0.075, m.vols()).unwrap();
        let s = price_barrier(5.0, &spec, &PricerConfig::new(8, Steps::Width(0.25)), &m).unwrap();
        let e = knock_out_expm(5.0, &spec, &m).unwrap();
        for i in 0..3 {
            assert!((s.at_maturity()[i] - e[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn parity_and_ordering() {
        let m = fixtures::table1_model_floored();
        let cfg = PricerConfig::new(4, Steps::Width(0.5));
        let mut prev: Option<Vec<f64>> = None;
        for b in [0.1, 0.2, f64::INFINITY] {
            let spec = BarrierSpec::digital(b, BarrierDirection::KnockOut, 3).unwrap();
            let legs = price_barrier_legs(3.0, &spec, &cfg, &m).unwrap();
            for i in 0..3 {
                for j in 0..legs.plain.grid().len() {
                    let (o, n, p) = (legs.knock_out.price(i, j), legs.knock_in.price(i, j), legs.plain.price(i, j));
                    assert!((o + n - p).abs() <= 1e-12);
                    assert!(o <= p + 1e-15);
                }
            }
            let ko = legs.knock_out.at_maturity();
            if let Some(prev) = prev {
                for i in 0..3 {
                    assert!(prev[i] <= ko[i] + 1e-15);
                }
            }
            prev = Some(ko);
        }
    }

    #[test]
    fn rejects_non_positive_barrier() {
        assert!(BarrierSpec::digital(0.0, BarrierDirection::KnockOut, 3).is_err());
    }
}
