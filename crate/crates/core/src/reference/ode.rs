//! Backward linear ODE for pre-default prices.
//!
//! In time to maturity `τ = T - t` the price vector solves
//! `dΨ/dτ = -(diag(d) - A(T - τ)) Ψ` with `Ψ(0) = Ξ`.

use nalgebra::DMatrix;

use crate::error::{PricingError, Result};
use crate::model::{PayoffVector, RegimeModel};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OdeMethod {
    /// Dormand-Prince 5(4) with error control.
    Adaptive,
    /// Classical fourth-order Runge-Kutta with this many steps per unit time-to-maturity.
    FixedStep(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub method: OdeMethod,
    /// Steps shorter than this abort the integration.
    pub min_step: f64,
}

impl Default for OdeConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            method: OdeMethod::Adaptive,
            min_step: 1e-12,
        }
    }
}

impl OdeConfig {
    pub fn with_tolerances(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }
}

struct System<'a> {
    model: &'a RegimeModel,
    discount: Vec<f64>,
    maturity: f64,
    constant: Option<DMatrix<f64>>,
}

impl System<'_> {
    fn rhs(&self, tau: f64, y: &[f64], out: &mut [f64]) {
        let owned;
        let a = match &self.constant {
            Some(a) => a,
            None => {
                owned = self.model.generator().at(self.maturity - tau);
                &owned
            }
        };
        let n = y.len();
        for i in 0..n {
            let mut acc = -self.discount[i] * y[i];
            for (j, yj) in y.iter().enumerate() {
                acc += a[(i, j)] * yj;
            }
            out[i] = acc;
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combine(y: &[f64], h: f64, terms: &[(f64, &[f64])], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        *o = y[i] + h * acc;
    }
}

/// One Dormand-Prince step; returns the scaled error norm.
fn dopri_step(sys: &System<'_>, tau: f64, h: f64, y: &[f64], k1: &[f64], y_new: &mut [f64], k7: &mut [f64], cfg: &OdeConfig) -> f64 {
    let n = y.len();
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    combine(y, h, &[(A21, k1)], &mut tmp);
    sys.rhs(tau + C2 * h, &tmp, &mut k2);
    combine(y, h, &[(A31, k1), (A32, &k2)], &mut tmp);
    sys.rhs(tau + C3 * h, &tmp, &mut k3);
    combine(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)], &mut tmp);
    sys.rhs(tau + C4 * h, &tmp, &mut k4);
    combine(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)], &mut tmp);
    sys.rhs(tau + C5 * h, &tmp, &mut k5);
    combine(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], &mut tmp);
    sys.rhs(tau + h, &tmp, &mut k6);
    combine(y, h, &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)], y_new);
    sys.rhs(tau + h, y_new, k7);
    let mut err = 0.0;
    for i in 0..n {
        let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let sc = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(y_new[i].abs());
        err += (e / sc).powi(2);
    }
    (err / n as f64).sqrt()
}

fn rk4_step(sys: &System<'_>, tau: f64, h: f64, y: &mut [f64]) {
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    sys.rhs(tau, y, &mut k1);
    combine(y, 0.5 * h, &[(1.0, &k1)], &mut tmp);
    sys.rhs(tau + 0.5 * h, &tmp, &mut k2);
    combine(y, 0.5 * h, &[(1.0, &k2)], &mut tmp);
    sys.rhs(tau + 0.5 * h, &tmp, &mut k3);
    combine(y, h, &[(1.0, &k3)], &mut tmp);
    sys.rhs(tau + h, &tmp, &mut k4);
    for i in 0..n {
        y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// Prices at each time to maturity in `outputs` (sorted ascending, within `[0, t]`).
pub fn ode_price_dense(
    t: f64,
    payoff: &PayoffVector,
    model: &RegimeModel,
    cfg: &OdeConfig,
    outputs: &[f64],
) -> Result<Vec<Vec<f64>>> {
    if !(cfg.abs_tol > 0.0 && cfg.rel_tol > 0.0) {
        return Err(PricingError::InvalidConfig("ODE tolerances must be positive".into()));
    }
    if payoff.len() != model.n_regimes() {
        return Err(PricingError::InvalidModel("payoff length differs from regime count".into()));
    }
    if outputs.windows(2).any(|w| w[1] < w[0]) || outputs.iter().any(|&o| o < 0.0 || o > t) {
        return Err(PricingError::InvalidConfig("output times must be sorted within [0, T]".into()));
    }
    let sys = System {
        model,
        discount: model.credit_adjusted_rates(),
        maturity: t,
        constant: model.generator().is_constant().then(|| model.generator().at(0.0)),
    };
    let n = model.n_regimes();
    let mut y = payoff.values().to_vec();
    let mut tau = 0.0;
    let mut out = Vec::with_capacity(outputs.len());
    match cfg.method {
        OdeMethod::FixedStep(per_unit) => {
            let per_unit = per_unit.max(1) as f64;
            for &target in outputs {
                let span = target - tau;
                if span > 0.0 {
                    let steps = (span * per_unit).ceil().max(1.0) as usize;
                    let h = span / steps as f64;
                    for s in 0..steps {
                        rk4_step(&sys, tau + s as f64 * h, h, &mut y);
                    }
                    tau = target;
                }
                out.push(y.clone());
            }
        }
        OdeMethod::Adaptive => {
            let mut k1 = vec![0.0; n];
            let mut k7 = vec![0.0; n];
            let mut y_new = vec![0.0; n];
            sys.rhs(0.0, &y, &mut k1);
            let mut h = (0.01 * t).clamp(1e-6, 0.1);
            for &target in outputs {
                while tau < target {
                    let remaining = target - tau;
                    let last = h >= remaining;
                    let step = if last { remaining } else { h };
                    let err = dopri_step(&sys, tau, step, &y, &k1, &mut y_new, &mut k7, cfg);
                    if err <= 1.0 {
                        tau = if last { target } else { tau + step };
                        std::mem::swap(&mut y, &mut y_new);
                        std::mem::swap(&mut k1, &mut k7);
                    }
                    let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                    if err <= 1.0 && last {
                        // keep the pre-clip step size for the next segment
                        h = h.max(step * factor);
                    } else {
                        h = step * factor;
                    }
                    if h < cfg.min_step && tau < target {
                        return Err(PricingError::StepSizeUnderflow { at: tau, step: h });
                    }
                }
                out.push(y.clone());
            }
        }
    }
    Ok(out)
}

/// Pre-default price at time to maturity `t`, discounted at `r + hL`.
pub fn ode_price(t: f64, payoff: &PayoffVector, model: &RegimeModel, cfg: &OdeConfig) -> Result<Vec<f64>> {
    Ok(ode_price_dense(t, payoff, model, cfg, &[t])?.pop().expect("one output"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::Generator;
    use crate::reference::expm::expm_price;

    #[test]
    fn single_regime_is_exponential() {
        let g = Generator::from_rows(&[vec![0.0]]).unwrap();
        let m = RegimeModel::new(vec![0.04], vec![0.02], vec![0.5], vec![0.2], vec![0.0], g).unwrap();
        let xi = PayoffVector::new(vec![2.5]).unwrap();
        let p = ode_price(7.0, &xi, &m, &OdeConfig::default()).unwrap();
        assert!((p[0] - 2.5 * (-0.05f64 * 7.0).exp()).abs() < 1e-8);
    }

    #[test]
    fn agrees_with_expm() {
        let m = fixtures::table1_model();
        let xi = PayoffVector::ones(3);
        for t in [1.0, 10.0, 50.0] {
            let o = ode_price(t, &xi, &m, &OdeConfig::default()).unwrap();
            let e = expm_price(t, &xi, &m).unwrap();
            for i in 0..3 {
                assert!((o[i] - e[i]).abs() < 1e-8, "T={t}: {o:?} {e:?}");
            }
        }
    }

    #[test]
    fn fixed_step_agrees() {
        let m = fixtures::table1_model();
        let xi = PayoffVector::ones(3);
        let cfg = OdeConfig {
            method: OdeMethod::FixedStep(50),
            ..OdeConfig::default()
        };
        let o = ode_price(5.0, &xi, &m, &cfg).unwrap();
        let e = expm_price(5.0, &xi, &m).unwrap();
        for i in 0..3 {
            assert!((o[i] - e[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn dense_bond_prices_decay() {
        let m = fixtures::table1_model();
        let grid: Vec<f64> = (0..=100).map(|k| 0.3 * k as f64).collect();
        let d = ode_price_dense(30.0, &PayoffVector::ones(3), &m, &OdeConfig::default(), &grid).unwrap();
        for w in d.windows(2) {
            for i in 0..3 {
                assert!(w[1][i] <= w[0][i]);
            }
        }
    }

    #[test]
    fn flat_rate_fixture_matches_published_ode_column() {
        let m = fixtures::flat_rate_model();
        let d = ode_price_dense(
            50.0,
            &PayoffVector::ones(3),
            &m,
            &OdeConfig::default(),
            &fixtures::BOND_MATURITIES,
        )
        .unwrap();
        for (row, want) in d.iter().zip(fixtures::BOND_TABLE_ODE) {
            for i in 0..3 {
                assert!((row[i] - want[i]).abs() < 1.5e-4, "{row:?} {want:?}");
            }
        }
    }

    #[test]
    fn underflow_is_reported() {
        let m = fixtures::table1_model();
        let cfg = OdeConfig {
            abs_tol: 1e-30,
            rel_tol: 1e-30,
            min_step: 1e-3,
            method: OdeMethod::Adaptive,
        };
        let err = ode_price(1.0, &PayoffVector::ones(3), &m, &cfg).unwrap_err();
        assert!(matches!(err, PricingError::StepSizeUnderflow { .. }));
    }
}
