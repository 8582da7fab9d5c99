//! Closed-form prices for time-invariant generators.

use nalgebra::{DMatrix, DVector};

use crate::error::{PricingError, Result};
use crate::model::{Generator, PayoffVector, RegimeModel};

/// `exp(-t (diag(d) - A)) Ξ`.
pub fn discounted_expm(a: &DMatrix<f64>, discount: &[f64], t: f64, payoff: &[f64]) -> Vec<f64> {
    let n = a.nrows();
    if t == 0.0 {
        return payoff.to_vec();
    }
    let f = DMatrix::from_fn(n, n, |i, j| {
        let d = if i == j { discount[i] } else { 0.0 };
        -(d - a[(i, j)]) * t
    });
    let e = f.exp();
    (e * DVector::from_column_slice(payoff)).iter().copied().collect()
}

fn constant(model: &RegimeModel) -> Result<&DMatrix<f64>> {
    match model.generator() {
        Generator::Constant(a) => Ok(a),
        Generator::TimeVarying(_) => Err(PricingError::ConstantGeneratorRequired),
    }
}

/// Pre-default price discounted at `r + hL`, by Padé scaling and squaring.
pub fn expm_price(t: f64, payoff: &PayoffVector, model: &RegimeModel) -> Result<Vec<f64>> {
    let a = constant(model)?;
    check(t, payoff, model)?;
    Ok(discounted_expm(a, &model.credit_adjusted_rates(), t, payoff.values()))
}

/// Same as [`expm_price`] but discounted at `r` alone.
pub fn expm_price_rate_only(t: f64, payoff: &PayoffVector, model: &RegimeModel) -> Result<Vec<f64>> {
    let a = constant(model)?;
    check(t, payoff, model)?;
    Ok(discounted_expm(a, model.short_rates(), t, payoff.values()))
}

fn check(t: f64, payoff: &PayoffVector, model: &RegimeModel) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(PricingError::InvalidConfig(format!("maturity must be non-negative, got {t}")));
    }
    if payoff.len() != model.n_regimes() {
        return Err(PricingError::InvalidModel("payoff length differs from regime count".into()));
    }
    Ok(())
}

/// Transition matrix `exp(A t)` of a time-invariant chain.
pub fn transition_matrix(model: &RegimeModel, t: f64) -> Result<DMatrix<f64>> {
    Ok((constant(model)? * t).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn diagonal_case() {
        let g = Generator::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let m = RegimeModel::new(vec![0.02, 0.05], vec![0.01, 0.1], vec![0.5, 0.2], vec![0.1, 0.1], vec![0.0; 2], g)
            .unwrap();
        let xi = PayoffVector::new(vec![2.0, 3.0]).unwrap();
        let p = expm_price(4.0, &xi, &m).unwrap();
        assert!((p[0] - 2.0 * (-0.025f64 * 4.0).exp()).abs() < 1e-14);
        assert!((p[1] - 3.0 * (-0.07f64 * 4.0).exp()).abs() < 1e-14);
    }

    #[test]
    fn zero_maturity_is_identity() {
        let m = fixtures::table1_model();
        let xi = PayoffVector::new(vec![0.1, 0.2, 0.3]).unwrap();
        assert_eq!(expm_price(0.0, &xi, &m).unwrap(), vec![0.1, 0.2, 0.3]);
    }

    #[test]
    fn transition_matrix_is_stochastic() {
        let m = fixtures::table1_model();
        for t in [0.1, 1.0, 10.0] {
            let p = transition_matrix(&m, t).unwrap();
            for i in 0..3 {
                assert!((p.row(i).sum() - 1.0).abs() < 1e-10);
                assert!(p.row(i).iter().all(|&v| v >= 0.0));
            }
        }
    }

    #[test]
    fn time_varying_is_rejected() {
        let err = expm_price(1.0, &PayoffVector::ones(3), &fixtures::sinusoidal_model()).unwrap_err();
        assert_eq!(err.to_string(), "expm requires constant generator");
    }
}
