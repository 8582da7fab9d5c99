//! Poisson-series pricer with short-step decomposition.
//!
//! Over a step of length `ζ` the price is
//!
//! ```text
//! Ψ_i ≈ Σ_{m<M} e^{-ζ} ζ^m / m! · Φ_{i,m}
//! ```
//!
//! where `Φ_{i,m}` averages over the `(N-1)^m` embedded-chain paths that
//! start in regime `i`. A maturity `T` is split into `k` steps and the series
//! is applied backwards, each step using the previous prices as its payoff.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::dirichlet::{laplace_exact, moment_table, MomentTable};
use crate::error::{PricingError, Result};
use crate::measure::{transform, FrozenParams, TransformedParams};
use crate::model::{validate_generator, PayoffVector, RegimeModel};
use crate::quad;

/// How the maturity is cut into steps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Steps {
    /// `k` equal steps of `T/k`.
    Count(usize),
    /// Steps of width `δ`; the earliest-computed step takes the remainder.
    Width(f64),
}

/// Evaluation of the Dirichlet kernel in path-enumerated terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LaplaceMode {
    Exact,
    /// Taylor polynomial of the given order.
    Taylor(usize),
}

/// Treatment of the generator within a step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeneratorMode {
    /// Generator must be time-invariant.
    Constant,
    /// `K̃, r̃` are frozen at the calendar start of each step.
    FrozenPerStep,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PricerConfig {
    /// Number of Poisson terms `M`.
    pub terms: usize,
    pub steps: Steps,
    pub laplace: LaplaceMode,
    /// Leading terms evaluated without approximation (0, 1 or 2).
    pub exact_terms: usize,
    pub generator_mode: GeneratorMode,
}

impl Default for PricerConfig {
    fn default() -> Self {
        Self {
            terms: 2,
            steps: Steps::Width(2.5),
            laplace: LaplaceMode::Exact,
            exact_terms: 2,
            generator_mode: GeneratorMode::Constant,
        }
    }
}

impl PricerConfig {
    pub fn new(terms: usize, steps: Steps) -> Self {
        Self {
            terms,
            steps,
            ..Self::default()
        }
    }

    pub fn with_laplace(self, laplace: LaplaceMode) -> Self {
        Self { laplace, ..self }
    }

    pub fn with_exact_terms(self, exact_terms: usize) -> Self {
        Self { exact_terms, ..self }
    }

    pub fn with_generator_mode(self, generator_mode: GeneratorMode) -> Self {
        Self {
            generator_mode,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.terms == 0 {
            return Err(PricingError::InvalidConfig("M must be at least 1".into()));
        }
        if self.exact_terms > 2 {
            return Err(PricingError::InvalidConfig("exact_terms must be 0, 1 or 2".into()));
        }
        match self.steps {
            Steps::Count(0) => return Err(PricingError::InvalidConfig("k must be at least 1".into())),
            Steps::Width(d) if !(d > 0.0 && d.is_finite()) => {
                return Err(PricingError::InvalidConfig("step width must be positive".into()))
            }
            _ => {}
        }
        if let LaplaceMode::Taylor(p) = self.laplace {
            if self.exact_terms < 1 || self.exact_terms > self.terms {
                return Err(PricingError::InvalidConfig(
                    "Taylor mode needs 1 <= exact_terms <= M".into(),
                ));
            }
            moment_table(1, p)?;
        }
        Ok(())
    }

    /// Step lengths for maturity `t`, earliest-computed first.
    pub fn step_lengths(&self, t: f64) -> Vec<f64> {
        match self.steps {
            Steps::Count(k) => vec![t / k as f64; k],
            Steps::Width(d) => {
                let k = ((t / d) - 1e-9).ceil().max(1.0) as usize;
                let mut v = vec![d; k];
                v[0] = t - (k - 1) as f64 * d;
                v
            }
        }
    }

    pub fn step_count(&self, t: f64) -> usize {
        self.step_lengths(t).len()
    }

    /// The `r` of the error bound: `M` when every term is exact.
    pub fn effective_exact_terms(&self) -> usize {
        if self.laplace == LaplaceMode::Exact && self.generator_mode == GeneratorMode::Constant {
            self.terms
        } else {
            self.exact_terms.min(self.terms)
        }
    }
}

/// Embedded-chain paths per start regime and jump count.
#[derive(Clone, Debug)]
pub struct PathCache {
    n: usize,
    max_m: usize,
    // states[m][i]: flattened paths of m+1 states, start included
    states: Vec<Vec<Vec<u16>>>,
    // penalties[m][i][p]: Σ K̃ along path p
    penalties: Option<Vec<Vec<Vec<f64>>>>,
}

impl PathCache {
    /// Enumerates every path with up to `max_m` jumps among `n` regimes.
    pub fn new(n: usize, max_m: usize) -> Self {
        let mut states = vec![vec![Vec::new(); n]; max_m + 1];
        for (m, per_m) in states.iter_mut().enumerate() {
            for (i, flat) in per_m.iter_mut().enumerate() {
                let mut path = vec![i as u16];
                depth_first(n, m, &mut path, flat);
            }
        }
        Self {
            n,
            max_m,
            states,
            penalties: None,
        }
    }

    /// Same paths with `Σ K̃` precomputed for a time-invariant `K̃`.
    pub fn with_penalties(n: usize, max_m: usize, k_tilde: &DMatrix<f64>) -> Self {
        let mut cache = Self::new(n, max_m);
        let pen = cache
            .states
            .iter()
            .enumerate()
            .map(|(m, per_m)| {
                per_m
                    .iter()
                    .map(|flat| flat.chunks(m + 1).map(|p| path_penalty(p, k_tilde)).collect())
                    .collect()
            })
            .collect();
        cache.penalties = Some(pen);
        cache
    }

    pub fn n_regimes(&self) -> usize {
        self.n
    }

    pub fn max_jumps(&self) -> usize {
        self.max_m
    }

    pub fn path_count(&self, i: usize, m: usize) -> usize {
        self.states[m][i].len() / (m + 1)
    }

    /// Paths from regime `i` with `m` jumps, as state sequences of length `m+1`.
    pub fn paths(&self, i: usize, m: usize) -> impl Iterator<Item = &[u16]> {
        self.states[m][i].chunks(m + 1)
    }
}

fn depth_first(n: usize, m: usize, path: &mut Vec<u16>, out: &mut Vec<u16>) {
    if path.len() == m + 1 {
        out.extend_from_slice(path);
        return;
    }
    let last = *path.last().expect("path starts non-empty");
    for j in 0..n as u16 {
        if j != last {
            path.push(j);
            depth_first(n, m, path, out);
            path.pop();
        }
    }
}

fn path_penalty(p: &[u16], k_tilde: &DMatrix<f64>) -> f64 {
    p.windows(2)
        .map(|w| k_tilde[(w[0] as usize, w[1] as usize)])
        .sum()
}

/// Prices per regime on the grid of cumulative step ends.
#[derive(Clone, Debug, PartialEq)]
pub struct PriceSurface {
    grid: Vec<f64>,
    prices: DMatrix<f64>,
}

impl PriceSurface {
    pub fn new(grid: Vec<f64>, prices: DMatrix<f64>) -> Self {
        assert_eq!(grid.len(), prices.ncols());
        Self { grid, prices }
    }

    /// Times to maturity of the columns.
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn prices(&self) -> &DMatrix<f64> {
        &self.prices
    }

    pub fn n_regimes(&self) -> usize {
        self.prices.nrows()
    }

    /// Price for regime `i` (0-based) at grid column `j`.
    pub fn price(&self, i: usize, j: usize) -> f64 {
        self.prices[(i, j)]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.prices.column(j).iter().copied().collect()
    }

    /// Prices at the full maturity.
    pub fn at_maturity(&self) -> Vec<f64> {
        self.column(self.grid.len() - 1)
    }
}

fn phi1_kernel(zeta: f64, delta: f64) -> f64 {
    let y = zeta * delta;
    if delta.abs() < 1e-9 || y == 0.0 {
        1.0
    } else {
        -(-y).exp_m1() / y
    }
}

enum Kernel<'a> {
    Exact,
    Taylor(&'a MomentTable),
}

/// Path-enumerated `Φ_{i,m}` under frozen `K̃, r̃`.
fn phi_paths(
    i: usize,
    m: usize,
    zeta: f64,
    payoff: &[f64],
    fp: &FrozenParams,
    cache: &PathCache,
    kernel: &Kernel<'_>,
    alive: Option<&[bool]>,
) -> f64 {
    let n = fp.n_regimes();
    if n < 2 {
        return 0.0;
    }
    let rt = &fp.r_tilde;
    let mut x = vec![0.0; m];
    let mut sum = 0.0;
    let pens = cache.penalties.as_ref().map(|p| &p[m][i]);
    for (idx, p) in cache.paths(i, m).enumerate() {
        if let Some(a) = alive {
            if p.iter().any(|&s| !a[s as usize]) {
                continue;
            }
        }
        let end = *p.last().expect("non-empty path") as usize;
        let xi = payoff[end];
        if xi == 0.0 {
            continue;
        }
        let pen = match pens {
            Some(v) => v[idx],
            None => path_penalty(p, &fp.k_tilde),
        };
        for (xj, &s) in x.iter_mut().zip(p) {
            *xj = zeta * (rt[s as usize] - rt[end]);
        }
        let lap = match kernel {
            Kernel::Exact => laplace_exact(&x),
            Kernel::Taylor(t) => t.evaluate(&x),
        };
        sum += xi * (-zeta * rt[end] - pen).exp() * lap;
    }
    sum / ((n - 1) as f64).powi(m as i32)
}

/// Closed-form `Φ_{i,0}` and `Φ_{i,1}` under frozen parameters.
fn phi_closed(i: usize, m: usize, zeta: f64, payoff: &[f64], fp: &FrozenParams, alive: Option<&[bool]>) -> f64 {
    let ok = |s: usize| alive.is_none_or(|a| a[s]);
    if !ok(i) {
        return 0.0;
    }
    let rt = &fp.r_tilde;
    match m {
        0 => payoff[i] * (-zeta * rt[i]).exp(),
        1 => {
            let n = fp.n_regimes();
            if n < 2 {
                return 0.0;
            }
            let s: f64 = (0..n)
                .filter(|&j| j != i && ok(j))
                .map(|j| {
                    payoff[j]
                        * (-zeta * rt[j] - fp.k_tilde[(i, j)]).exp()
                        * phi1_kernel(zeta, rt[i] - rt[j])
                })
                .sum();
            s / (n - 1) as f64
        }
        _ => unreachable!("closed forms exist for m <= 1"),
    }
}

/// `Φ_{i,m}` with time-invariant (or frozen) parameters.
///
/// `m = 0` and `m = 1` use closed forms when the Laplace mode is exact;
/// other terms sum over the paths in `cache`.
pub fn phi(
    i: usize,
    m: usize,
    zeta: f64,
    payoff: &PayoffVector,
    fp: &FrozenParams,
    laplace: LaplaceMode,
    cache: &PathCache,
) -> Result<f64> {
    phi_masked(i, m, zeta, payoff.values(), fp, laplace, 2, cache, None)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn phi_masked(
    i: usize,
    m: usize,
    zeta: f64,
    payoff: &[f64],
    fp: &FrozenParams,
    laplace: LaplaceMode,
    exact_terms: usize,
    cache: &PathCache,
    alive: Option<&[bool]>,
) -> Result<f64> {
    if m == 0 || (m == 1 && (laplace == LaplaceMode::Exact || exact_terms >= 2)) {
        return Ok(phi_closed(i, m, zeta, payoff, fp, alive));
    }
    if m > cache.max_jumps() {
        return Err(PricingError::InvalidConfig(format!(
            "path cache holds at most {} jumps, {m} requested",
            cache.max_jumps()
        )));
    }
    let table;
    let kernel = match laplace {
        LaplaceMode::Exact => Kernel::Exact,
        LaplaceMode::Taylor(_) if m < exact_terms => Kernel::Exact,
        LaplaceMode::Taylor(p) => {
            table = moment_table(m, p)?;
            Kernel::Taylor(&table)
        }
    };
    Ok(phi_paths(i, m, zeta, payoff, fp, cache, &kernel, alive))
}

/// `Φ_{i,0}` and `Φ_{i,1}` for a generator varying over calendar `[a, b]`.
fn phi_time_varying(i: usize, m: usize, a: f64, b: f64, payoff: &[f64], tp: &TransformedParams, alive: Option<&[bool]>) -> f64 {
    let ok = |s: usize| alive.is_none_or(|al| al[s]);
    if !ok(i) {
        return 0.0;
    }
    match m {
        0 => payoff[i] * (-tp.r_tilde_integral(i, a, b)).exp(),
        1 => {
            let n = tp.n_regimes();
            let zeta = b - a;
            if n < 2 || zeta == 0.0 {
                return 0.0;
            }
            let integrand = |v: f64| {
                let gen = tp.generator().at(v);
                let head = tp.r_tilde_integral(i, a, v);
                (0..n)
                    .filter(|&j| j != i && ok(j) && payoff[j] != 0.0)
                    .map(|j| gen[(i, j)] * payoff[j] * (-head - tp.r_tilde_integral(j, v, b)).exp())
                    .sum::<f64>()
            };
            quad::integrate(integrand, a, b) / zeta
        }
        _ => unreachable!("closed forms exist for m <= 1"),
    }
}

/// `Σ_{m<M} e^{-ζ} ζ^m/m! Φ_{i,m}` with time-invariant (or frozen) parameters.
pub fn truncated_series(
    i: usize,
    zeta: f64,
    payoff: &PayoffVector,
    fp: &FrozenParams,
    cfg: &PricerConfig,
    cache: &PathCache,
) -> Result<f64> {
    series_term_sum(i, zeta, payoff.values(), fp, cfg, cache, None, None)
}

#[allow(clippy::too_many_arguments)]
fn series_term_sum(
    i: usize,
    zeta: f64,
    payoff: &[f64],
    fp: &FrozenParams,
    cfg: &PricerConfig,
    cache: &PathCache,
    exact_window: Option<(&TransformedParams, f64, f64)>,
    alive: Option<&[bool]>,
) -> Result<f64> {
    let mut weight = (-zeta).exp();
    let mut sum = 0.0;
    for m in 0..cfg.terms {
        if m > 0 {
            weight *= zeta / m as f64;
        }
        let term = match exact_window {
            Some((tp, a, b)) if m < cfg.exact_terms => phi_time_varying(i, m, a, b, payoff, tp, alive),
            _ => phi_masked(i, m, zeta, payoff, fp, cfg.laplace, cfg.exact_terms, cache, alive)?,
        };
        sum += weight * term;
    }
    Ok(sum)
}

/// Backward recursion shared by claim and barrier pricing. `alive` marks
/// regimes that keep the claim alive; dead regimes price at zero.
pub(crate) fn price_surface(
    t: f64,
    payoff: &PayoffVector,
    cfg: &PricerConfig,
    tp: &TransformedParams,
    alive: Option<&[bool]>,
) -> Result<PriceSurface> {
    cfg.validate()?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(PricingError::InvalidConfig(format!("maturity must be positive, got {t}")));
    }
    let n = tp.n_regimes();
    if payoff.len() != n {
        return Err(PricingError::InvalidModel(format!(
            "payoff has {} entries, model has {n} regimes",
            payoff.len()
        )));
    }
    if cfg.generator_mode == GeneratorMode::Constant && !tp.is_constant() {
        return Err(PricingError::InvalidConfig(
            "constant generator mode needs a time-invariant generator; use frozen-per-step".into(),
        ));
    }
    let max_m = cfg.terms.saturating_sub(1);
    let cache = if tp.is_constant() {
        PathCache::with_penalties(n, max_m, &tp.at(0.0)?.k_tilde)
    } else {
        PathCache::new(n, max_m)
    };
    let steps = cfg.step_lengths(t);
    let mut grid = Vec::with_capacity(steps.len());
    let mut prices = DMatrix::zeros(n, steps.len());
    let mut current: Vec<f64> = payoff.values().to_vec();
    if let Some(a) = alive {
        for (v, &ok) in current.iter_mut().zip(a) {
            if !ok {
                *v = 0.0;
            }
        }
    }
    let mut tau = 0.0;
    for (col, &zeta) in steps.iter().enumerate() {
        let cal_end = t - tau;
        tau += zeta;
        let cal_start = t - tau;
        let fp = tp.at(cal_start)?;
        let window = (!tp.is_constant()).then_some((tp, cal_start, cal_end));
        let next: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| series_term_sum(i, zeta, &current, &fp, cfg, &cache, window, alive))
            .collect::<Result<_>>()?;
        for (i, v) in next.iter().enumerate() {
            prices[(i, col)] = *v;
        }
        grid.push(tau);
        current = next;
    }
    Ok(PriceSurface::new(grid, prices))
}

/// Pre-default price surface of the claim paying `payoff` at maturity `t`,
/// discounted at `r + hL`.
pub fn price_claim(t: f64, payoff: &PayoffVector, cfg: &PricerConfig, model: &RegimeModel) -> Result<PriceSurface> {
    validate_generator(model.generator(), t).map_err(PricingError::InvalidGenerator)?;
    let tp = transform(model)?;
    price_surface(t, payoff, cfg, &tp, None)
}

/// A-priori bound `D T^α / k^(α-1)` with `α = (r + j) ∧ M` and `D = ‖Ξ‖∞ (1 + B)`.
pub fn error_bound(cfg: &PricerConfig, t: f64, payoff: &PayoffVector, b_const: f64, j_order: usize) -> Result<f64> {
    let alpha = (cfg.effective_exact_terms() + j_order).min(cfg.terms);
    if alpha < 1 {
        return Err(PricingError::InvalidConfig("error bound needs alpha >= 1".into()));
    }
    let k = cfg.step_count(t) as f64;
    let d = payoff.sup_norm() * (1.0 + b_const);
    Ok(d * t.powi(alpha as i32) / k.powi(alpha as i32 - 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::Generator;
    use crate::reference::expm::expm_price;

    fn two_state(r: f64, h: f64) -> RegimeModel {
        let g = Generator::from_rows(&[vec![-0.7, 0.7], vec![0.3, -0.3]]).unwrap();
        RegimeModel::new(vec![r, r], vec![h, h], vec![0.5, 0.5], vec![0.1, 0.2], vec![0.0, 0.0], g).unwrap()
    }

    #[test]
    fn path_counts() {
        let c = PathCache::new(4, 5);
        for m in 0..=5 {
            for i in 0..4 {
                assert_eq!(c.path_count(i, m), 3usize.pow(m as u32));
                for p in c.paths(i, m) {
                    assert_eq!(p[0] as usize, i);
                    assert!(p.windows(2).all(|w| w[0] != w[1]));
                }
            }
        }
    }

    #[test]
    fn phi0_no_jump_discount() {
        let fp = FrozenParams {
            k_tilde: DMatrix::zeros(2, 2),
            r_tilde: vec![0.06, 0.1],
        };
        let c = PathCache::new(2, 1);
        let v = phi(0, 0, 0.5, &PayoffVector::ones(2), &fp, LaplaceMode::Exact, &c).unwrap();
        assert!((v - (-0.03f64).exp()).abs() < 1e-15);
        assert!((v - 0.970446).abs() < 5e-7);
    }

    #[test]
    fn phi1_confluent() {
        let a = 0.2;
        let fp = FrozenParams {
            k_tilde: DMatrix::from_row_slice(2, 2, &[0.0, 0.3, 0.1, 0.0]),
            r_tilde: vec![a, a],
        };
        let c = PathCache::new(2, 1);
        let xi = PayoffVector::new(vec![1.0, 2.0]).unwrap();
        let v = phi(0, 1, 0.8, &xi, &fp, LaplaceMode::Exact, &c).unwrap();
        assert!((v - 2.0 * (-0.8 * a - 0.3f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn phi1_closed_form_agrees_with_path_sum() {
        let tp = transform(&fixtures::table1_model_floored()).unwrap();
        let fp = tp.at(0.0).unwrap();
        let c = PathCache::new(3, 2);
        let xi = PayoffVector::new(vec![0.3, 1.0, 2.0]).unwrap();
        for i in 0..3 {
            let closed = phi(i, 1, 1.3, &xi, &fp, LaplaceMode::Exact, &c).unwrap();
            let paths = phi_masked(i, 1, 1.3, xi.values(), &fp, LaplaceMode::Taylor(8), 0, &c, None).unwrap();
            let exact_paths = phi_paths(i, 1, 1.3, xi.values(), &fp, &c, &Kernel::Exact, None);
            assert!((closed - exact_paths).abs() < 1e-14, "{closed} {exact_paths}");
            assert!((closed - paths).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_time_returns_payoff() {
        let tp = transform(&fixtures::table1_model_floored()).unwrap();
        let fp = tp.at(0.0).unwrap();
        let c = PathCache::new(3, 3);
        let xi = PayoffVector::new(vec![0.3, 1.0, 2.0]).unwrap();
        let cfg = PricerConfig::new(4, Steps::Count(1));
        for i in 0..3 {
            assert_eq!(truncated_series(i, 0.0, &xi, &fp, &cfg, &c).unwrap(), xi[i]);
        }
    }

    #[test]
    fn single_term() {
        let tp = transform(&fixtures::table1_model_floored()).unwrap();
        let fp = tp.at(0.0).unwrap();
        let c = PathCache::new(3, 0);
        let xi = PayoffVector::new(vec![0.3, 1.0, 2.0]).unwrap();
        let cfg = PricerConfig::new(1, Steps::Count(1));
        for i in 0..3 {
            let v = truncated_series(i, 0.7, &xi, &fp, &cfg, &c).unwrap();
            assert!((v - xi[i] * (-0.7 * (1.0 + fp.r_tilde[i])).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn deterministic_discounting() {
        // a single regime has no jump paths, so every truncation is exact
        for h in [0.0, 0.02] {
            let g = Generator::from_rows(&[vec![0.0]]).unwrap();
            let m = RegimeModel::new(vec![0.04], vec![h], vec![0.5], vec![0.1], vec![0.0], g).unwrap();
            let xi = PayoffVector::new(vec![1.5]).unwrap();
            for (terms, k) in [(1, 1), (2, 3), (4, 7)] {
                let s = price_claim(3.0, &xi, &PricerConfig::new(terms, Steps::Count(k)), &m).unwrap();
                let want = 1.5 * (-(0.04 + 0.5 * h) * 3.0f64).exp();
                assert!((s.at_maturity()[0] - want).abs() < 1e-14, "M={terms} k={k}");
            }
        }
        // with jumps the regime-blind discount is recovered as M grows
        let m = two_state(0.04, 0.0);
        let xi = PayoffVector::new(vec![1.5, 1.5]).unwrap();
        let s = price_claim(3.0, &xi, &PricerConfig::new(12, Steps::Count(3)), &m).unwrap();
        for v in s.at_maturity() {
            assert!((v - 1.5 * (-0.12f64).exp()).abs() < 1e-10, "{v}");
        }
    }

    #[test]
    fn remainder_step_comes_first() {
        let cfg = PricerConfig::new(2, Steps::Width(2.5));
        assert_eq!(cfg.step_lengths(1.0), vec![1.0]);
        assert_eq!(cfg.step_lengths(5.0), vec![2.5, 2.5]);
        let s = cfg.step_lengths(6.0);
        assert_eq!(s.len(), 3);
        assert!((s[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn many_terms_converge_to_expm() {
        let m = fixtures::table1_model_floored();
        let xi = PayoffVector::ones(3);
        let s = price_claim(2.0, &xi, &PricerConfig::new(10, Steps::Count(4)), &m).unwrap();
        let e = expm_price(2.0, &xi, &m).unwrap();
        for i in 0..3 {
            assert!((s.at_maturity()[i] - e[i]).abs() < 1e-8, "{:?} vs {:?}", s.at_maturity(), e);
        }
    }

    #[test]
    fn homogenization_offset_series_sums_to_one() {
        // with zero discounting every path weight is a probability
        let fp_model = fixtures::table1_model_floored();
        let tp = transform(&fp_model).unwrap();
        let mut fp = tp.at(0.0).unwrap();
        let a = fp_model.generator().at(0.0);
        for i in 0..3 {
            fp.r_tilde[i] = -1.0 - a[(i, i)];
        }
        let c = PathCache::new(3, 12);
        let xi = PayoffVector::ones(3);
        let mut prev = 0.0;
        for terms in 1..=13 {
            let cfg = PricerConfig::new(terms, Steps::Count(1));
            let v = truncated_series(0, 1.5, &xi, &fp, &cfg, &c).unwrap();
            assert!(v >= prev - 1e-15 && v <= 1.0 + 1e-12);
            prev = v;
        }
        assert!((prev - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bound_formula() {
        let cfg = PricerConfig::new(2, Steps::Count(4));
        assert!((error_bound(&cfg, 1.0, &PayoffVector::ones(3), 0.0, 0).unwrap() - 0.25).abs() < 1e-15);
        let cfg = PricerConfig::new(3, Steps::Count(2));
        let xi = PayoffVector::new(vec![2.0, -3.0]).unwrap();
        assert!((error_bound(&cfg, 2.0, &xi, 0.0, 0).unwrap() - 3.0 * 8.0 / 4.0).abs() < 1e-15);
        let bad = PricerConfig::new(2, Steps::Count(4))
            .with_laplace(LaplaceMode::Taylor(2))
            .with_exact_terms(1);
        assert!(error_bound(&bad, 1.0, &PayoffVector::ones(1), 0.0, 0).is_ok());
    }

    #[test]
    fn constant_mode_rejects_time_varying() {
        let m = fixtures::sinusoidal_model();
        let err = price_claim(1.0, &PayoffVector::ones(3), &PricerConfig::default(), &m).unwrap_err();
        assert!(matches!(err, PricingError::InvalidConfig(_)));
    }
}
