//! Vulnerable European options on a stock whose rate and volatility follow
//! the regime.
//!
//! Over a short horizon `ζ` the option is priced as a regime claim paying the
//! Black-Scholes value with the terminal regime's parameters. Longer
//! maturities run backwards on a log-spot lattice `s e^{kΔ}`, `|k| <= B`.
//! Each step mixes lattice values with Gaussian cell weights and then applies
//! the one-step series operator. That operator is linear, so it is evaluated
//! once per basis payoff and reused for every lattice row.

use log::warn;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{PricingError, Result};
use crate::measure::{transform, TransformedParams};
use crate::model::{validate_generator, PayoffVector, RegimeModel};
use crate::series::{price_surface, PricerConfig, Steps};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptionKind {
    Call,
    Put,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptionSpec {
    pub strike: f64,
    pub spot: f64,
    pub kind: OptionKind,
    pub maturity: f64,
}

impl OptionSpec {
    pub fn new(strike: f64, spot: f64, kind: OptionKind, maturity: f64) -> Result<Self> {
        if !(strike > 0.0 && spot > 0.0) {
            return Err(PricingError::InvalidConfig("strike and spot must be positive".into()));
        }
        if !(maturity > 0.0 && maturity.is_finite()) {
            return Err(PricingError::InvalidConfig("maturity must be positive".into()));
        }
        Ok(Self {
            strike,
            spot,
            kind,
            maturity,
        })
    }
}

fn std_normal() -> Normal {
    Normal::standard()
}

/// Black-Scholes value with variance rate `var` over `zeta` years.
///
/// Zero time or zero variance gives the discounted intrinsic value.
pub fn bs_kernel(zeta: f64, s0: f64, var: f64, rate: f64, strike: f64, kind: OptionKind) -> f64 {
    let df = (-rate * zeta).exp();
    let total = var * zeta;
    if total <= 0.0 {
        return match kind {
            OptionKind::Call => (s0 - strike * df).max(0.0),
            OptionKind::Put => (strike * df - s0).max(0.0),
        };
    }
    let sd = total.sqrt();
    let d1 = ((s0 / strike).ln() + rate * zeta + 0.5 * total) / sd;
    let d2 = d1 - sd;
    let n = std_normal();
    match kind {
        OptionKind::Call => s0 * n.cdf(d1) - strike * df * n.cdf(d2),
        OptionKind::Put => strike * df * n.cdf(-d2) - s0 * n.cdf(-d1),
    }
}

/// Shape of the log-spot lattice and the pricer used within each step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatticeConfig {
    /// Log-spot spacing `Δ`; `None` picks `σ_min √δ / 4`.
    pub spacing: Option<f64>,
    /// Half-width `B`; `None` spans six standard deviations plus the largest drift.
    pub half_width: Option<usize>,
    /// Number of backward steps of width `δ = T / steps`.
    pub steps: usize,
    /// Series pricer; its step setting applies within one lattice step.
    pub pricer: PricerConfig,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self {
            spacing: None,
            half_width: None,
            steps: 128,
            pricer: PricerConfig::new(4, Steps::Count(1)),
        }
    }
}

/// Prices over lattice spots (rows) and start regimes (columns).
#[derive(Clone, Debug)]
pub struct VulnLattice {
    pub spacing: f64,
    pub half_width: usize,
    pub prices: DMatrix<f64>,
    /// Largest probability mass the lattice walk from the spot puts on an end cell.
    pub end_cell_mass: f64,
    spot: f64,
}

impl VulnLattice {
    /// Spot of lattice row `k` in `-B..=B`.
    pub fn spot_at(&self, k: i64) -> f64 {
        self.spot * (k as f64 * self.spacing).exp()
    }

    pub fn row(&self, k: i64) -> Vec<f64> {
        let r = (k + self.half_width as i64) as usize;
        self.prices.row(r).iter().copied().collect()
    }

    /// Prices at the requested spot, per start regime.
    pub fn at_spot(&self) -> Vec<f64> {
        self.row(0)
    }
}

/// One-step series operator as an `N × N` matrix: column `j` prices the unit payoff in regime `j`.
fn step_operator(zeta: f64, cfg: &PricerConfig, tp: &TransformedParams) -> Result<DMatrix<f64>> {
    let n = tp.n_regimes();
    let mut p = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = price_surface(zeta, &PayoffVector::from_unchecked(e), cfg, tp, None)?.at_maturity();
        for i in 0..n {
            p[(i, j)] = col[i];
        }
    }
    Ok(p)
}

fn terminal_bs(zeta: f64, spot: f64, strike: f64, kind: OptionKind, model: &RegimeModel) -> DVector<f64> {
    let r = model.short_rates();
    let v = model.vols();
    DVector::from_fn(model.n_regimes(), |j, _| {
        bs_kernel(zeta, spot * (zeta * r[j]).exp(), v[j] * v[j], 0.0, strike, kind)
    })
}

/// Short-maturity vulnerable option price per start regime.
pub fn first_order_vuln_price(
    zeta: f64,
    spot: f64,
    strike: f64,
    kind: OptionKind,
    model: &RegimeModel,
    cfg: &PricerConfig,
) -> Result<Vec<f64>> {
    let xi = terminal_bs(zeta, spot, strike, kind, model);
    if zeta == 0.0 {
        return Ok(xi.iter().copied().collect());
    }
    validate_generator(model.generator(), zeta).map_err(PricingError::InvalidGenerator)?;
    let tp = transform(model)?;
    let payoff = PayoffVector::new(xi.iter().copied().collect())?;
    Ok(price_surface(zeta, &payoff, cfg, &tp, None)?.at_maturity())
}

/// Gaussian cell weights for moving from row `i` to every row `k` in regime `j`.
/// Returned as a function of the offset `k - i` with end cells absorbing the tails.
struct CellWeights {
    // cdf[o] = Φ(z) at the upper edge of offset o - 2B
    upper_cdf: Vec<f64>,
    half_width: i64,
    // offsets beyond this carry less than 1e-30 of the mass
    band: i64,
}

impl CellWeights {
    fn new(spacing: f64, half_width: usize, drift: f64, sd: f64) -> Self {
        let b = half_width as i64;
        let n = std_normal();
        let upper_cdf = (-2 * b..=2 * b)
            .map(|o| n.cdf(((o as f64 + 0.5) * spacing - drift) / sd))
            .collect();
        let reach = (drift.abs() + 12.0 * sd) / spacing;
        let band = if reach.is_finite() { (reach.ceil() as i64 + 1).min(2 * b) } else { 2 * b };
        Self {
            upper_cdf,
            half_width: b,
            band,
        }
    }

    /// Rows reachable from row `i` with non-negligible weight.
    fn reach(&self, i: i64) -> std::ops::RangeInclusive<i64> {
        (i - self.band).max(-self.half_width)..=(i + self.band).min(self.half_width)
    }

    fn upper(&self, i: i64, k: i64) -> f64 {
        if k == self.half_width {
            1.0
        } else {
            self.upper_cdf[(k - i + 2 * self.half_width) as usize]
        }
    }

    fn weight(&self, i: i64, k: i64) -> f64 {
        let lower = if k == -self.half_width { 0.0 } else { self.upper(i, k - 1) };
        self.upper(i, k) - lower
    }
}

/// Mixing weights from lattice row `from` to every row `-B..=B`, for one
/// regime with per-step log drift `drift` and standard deviation `sd`.
pub fn cell_weights(spacing: f64, half_width: usize, drift: f64, sd: f64, from: i64) -> Vec<f64> {
    let w = CellWeights::new(spacing, half_width, drift, sd);
    let b = half_width as i64;
    (-b..=b).map(|k| w.weight(from, k)).collect()
}

/// Resolved lattice dimensions for a spec and model.
pub fn lattice_shape(spec: &OptionSpec, lat: &LatticeConfig, model: &RegimeModel) -> Result<(f64, usize, f64)> {
    if lat.steps == 0 {
        return Err(PricingError::InvalidConfig("lattice needs at least one step".into()));
    }
    let delta = spec.maturity / lat.steps as f64;
    let vols = model.vols();
    let s_min = vols.iter().copied().fold(f64::INFINITY, f64::min);
    let s_max = vols.iter().copied().fold(0.0, f64::max);
    let spacing = lat.spacing.unwrap_or(0.25 * s_min * delta.sqrt());
    if !(spacing > 0.0) {
        return Err(PricingError::InvalidConfig("lattice spacing must be positive".into()));
    }
    let drift = (0..model.n_regimes())
        .map(|j| (model.short_rates()[j] - 0.5 * vols[j] * vols[j]).abs())
        .fold(0.0, f64::max);
    let half_width = lat
        .half_width
        .unwrap_or_else(|| ((6.0 * s_max * spec.maturity.sqrt() + drift * spec.maturity) / spacing).ceil() as usize)
        .max(1);
    Ok((spacing, half_width, delta))
}

/// Lattice of vulnerable option prices; row `0` holds the prices at the spot.
pub fn vuln_option_price(spec: &OptionSpec, lat: &LatticeConfig, model: &RegimeModel) -> Result<VulnLattice> {
    let (spacing, half_width, delta) = lattice_shape(spec, lat, model)?;
    validate_generator(model.generator(), spec.maturity).map_err(PricingError::InvalidGenerator)?;
    let tp = transform(model)?;
    let n = model.n_regimes();
    let b = half_width as i64;
    let rows = 2 * half_width + 1;
    let spot_of = |k: i64| spec.spot * (k as f64 * spacing).exp();

    let base = step_operator(delta, &lat.pricer, &tp)?;
    let mut values = DMatrix::zeros(rows, n);
    for k in -b..=b {
        let xi = terminal_bs(delta, spot_of(k), spec.strike, spec.kind, model);
        let v = &base * xi;
        values.row_mut((k + b) as usize).copy_from(&v.transpose());
    }

    let vols = model.vols();
    let drifts: Vec<f64> = (0..n)
        .map(|j| model.short_rates()[j] - 0.5 * vols[j] * vols[j])
        .collect();
    let weights: Vec<CellWeights> = (0..n)
        .map(|j| CellWeights::new(spacing, half_width, delta * drifts[j], vols[j] * delta.sqrt()))
        .collect();

    let mut end_cell_mass: f64 = 0.0;
    if lat.steps > 1 {
        // walk from the spot under the widest regime to monitor tail truncation
        let j_wide = (0..n)
            .max_by(|&a, &c| {
                (vols[a] + drifts[a].abs()).total_cmp(&(vols[c] + drifts[c].abs()))
            })
            .expect("at least one regime");
        let w = &weights[j_wide];
        let mut dist = vec![0.0; rows];
        dist[half_width] = 1.0;
        for _ in 1..lat.steps {
            let mut next = vec![0.0; rows];
            for i in -b..=b {
                let p = dist[(i + b) as usize];
                if p < 1e-300 {
                    continue;
                }
                for k in w.reach(i) {
                    next[(k + b) as usize] += p * w.weight(i, k);
                }
            }
            end_cell_mass = end_cell_mass.max(next[0]).max(next[rows - 1]);
            dist = next;
        }
        if end_cell_mass > 0.01 {
            warn!(
                "lattice too narrow: {:.3}% of the mass reaches an end cell",
                100.0 * end_cell_mass
            );
        }
    }

    let op = if lat.steps > 1 { step_operator(delta, &lat.pricer, &tp)? } else { base };
    for _ in 1..lat.steps {
        let cols: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                let w = &weights[j];
                (-b..=b)
                    .into_par_iter()
                    .map(|i| w.reach(i).map(|k| values[((k + b) as usize, j)] * w.weight(i, k)).sum())
                    .collect()
            })
            .collect();
        let mixed = DMatrix::from_fn(rows, n, |r, j| cols[j][r]);
        values = &mixed * op.transpose();
    }

    Ok(VulnLattice {
        spacing,
        half_width,
        prices: values,
        end_cell_mass,
        spot: spec.spot,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::Generator;

    #[test]
    fn kernel_limits() {
        assert_eq!(bs_kernel(0.0, 1.3, 0.04, 0.05, 1.0, OptionKind::Call), 0.30000000000000004);
        let atm = bs_kernel(1.0, 1.0, 0.04, 0.0, 1.0, OptionKind::Call);
        let n = Normal::standard();
        assert!((atm - (2.0 * n.cdf(0.1) - 1.0)).abs() < 1e-15);
        assert!((atm - 0.0796557).abs() < 1e-7);
        let deep = bs_kernel(0.1, 10.0, 0.0025, 0.0, 1.0, OptionKind::Call);
        assert!((deep - 9.0).abs() < 1e-10);
    }

    #[test]
    fn atm_call_matches_quadrature() {
        // E[(e^{σZ - σ²/2} - 1)^+] by direct integration of the normal density
        let s = 0.2;
        let q = crate::quad::integrate(
            |z| {
                let pay = ((s * z - 0.5 * s * s).exp() - 1.0).max(0.0);
                pay * (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
            },
            0.5 * s,
            12.0,
        );
        assert!((bs_kernel(1.0, 1.0, s * s, 0.0, 1.0, OptionKind::Call) - q).abs() < 1e-9);
    }

    #[test]
    fn kernel_put_call_parity() {
        for (s, k, v, r, t) in [(1.0, 1.0, 0.04, 0.03, 2.0), (0.8, 1.1, 0.01, 0.1, 0.5)] {
            let c = bs_kernel(t, s, v, r, k, OptionKind::Call);
            let p = bs_kernel(t, s, v, r, k, OptionKind::Put);
            assert!((c - p - (s - k * (-r * t).exp())).abs() < 1e-14);
        }
    }

    #[test]
    fn single_regime_is_vulnerable_black_scholes() {
        let g = Generator::from_rows(&[vec![0.0]]).unwrap();
        let m = RegimeModel::new(vec![0.04], vec![0.03], vec![0.6], vec![0.25], vec![0.0], g).unwrap();
        let cfg = PricerConfig::new(3, Steps::Count(2));
        let v = first_order_vuln_price(0.5, 1.1, 1.0, OptionKind::Call, &m, &cfg).unwrap();
        let want = (-0.018f64 * 0.5).exp() * bs_kernel(0.5, 1.1, 0.0625, 0.04, 1.0, OptionKind::Call);
        assert!((v[0] - want).abs() < 1e-14);
    }

    #[test]
    fn zero_horizon_is_intrinsic() {
        let m = fixtures::table1_model_floored();
        let v = first_order_vuln_price(0.0, 1.2, 1.0, OptionKind::Call, &m, &PricerConfig::default()).unwrap();
        for x in v {
            assert!((x - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn weights_sum_to_one() {
        let w = CellWeights::new(0.01, 50, 0.003, 0.05);
        for i in -50..=50 {
            let s: f64 = (-50..=50).map(|k| w.weight(i, k)).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
