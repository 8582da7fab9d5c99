//! Monte Carlo under the risk-neutral measure.
//!
//! Regime paths are drawn from exponential holding times. Time-varying
//! generators are sampled by thinning against the declared per-entry sup
//! bounds. Each path owns a ChaCha stream keyed by start regime and path
//! index, and partial sums are reduced in a fixed order, so estimates depend
//! only on the seed and path count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Open01;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{PricingError, Result};
use crate::measure::FrozenParams;
use crate::model::{Generator, PayoffVector, RegimeModel};

const CHUNK: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct McConfig {
    pub n_paths: usize,
    pub seed: u64,
    /// Each sample averages a path and its mirror (`u -> 1 - u`).
    pub antithetic: bool,
    /// Stratify the first uniform of each path across the sample.
    pub stratified: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            seed: 0x5eed,
            antithetic: false,
            stratified: false,
        }
    }
}

impl McConfig {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        Self {
            n_paths,
            seed,
            ..Self::default()
        }
    }
}

/// Claim simulated by [`mc_price`].
#[derive(Clone, Debug)]
pub enum McPayoff {
    /// `Ξ(X_T)` discounted at `r + hL`.
    Terminal(PayoffVector),
    /// `Ξ(X_T)` if `σ(X_s) < barrier` on `[0, T]`, discounted at `r`.
    KnockOut { barrier: f64, payoff: PayoffVector },
    /// `Ξ(X_T)` if `σ(X_s) >= barrier` somewhere on `[0, T]`, discounted at `r`.
    KnockIn { barrier: f64, payoff: PayoffVector },
    /// Vulnerable European call on the regime-switching stock, discounted at `r + hL`.
    VulnerableCall { spot: f64, strike: f64 },
    VulnerablePut { spot: f64, strike: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct McEstimate {
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
    pub n_paths: usize,
    pub seed: u64,
}

struct Draws {
    rng: ChaCha8Rng,
    mirror: bool,
    first: Option<f64>,
}

impl Draws {
    fn uniform(&mut self) -> f64 {
        let u = match self.first.take() {
            Some(u) => u,
            None => self.rng.sample(Open01),
        };
        if self.mirror {
            1.0 - u
        } else {
            u
        }
    }
}

/// Accumulated along one path.
#[derive(Default)]
struct PathStats {
    rate_integral: f64,
    spread_integral: f64,
    var_integral: f64,
    max_vol: f64,
    end: usize,
}

struct Simulator<'a> {
    model: &'a RegimeModel,
    spreads: Vec<f64>,
    exit_bound: Vec<f64>,
}

impl Simulator<'_> {
    fn run(&self, start: usize, t: f64, d: &mut Draws) -> PathStats {
        let r = self.model.short_rates();
        let vols = self.model.vols();
        let g = self.model.generator();
        let n = self.model.n_regimes();
        let mut s = start;
        let mut now = 0.0;
        let mut st = PathStats {
            max_vol: vols[s],
            ..PathStats::default()
        };
        let occupy = |st: &mut PathStats, s: usize, dt: f64| {
            st.rate_integral += r[s] * dt;
            st.spread_integral += self.spreads[s] * dt;
            st.var_integral += vols[s] * vols[s] * dt;
        };
        loop {
            let bound = self.exit_bound[s];
            if bound <= 0.0 {
                occupy(&mut st, s, t - now);
                break;
            }
            let hold = -d.uniform().ln() / bound;
            if now + hold >= t {
                occupy(&mut st, s, t - now);
                break;
            }
            occupy(&mut st, s, hold);
            now += hold;
            let a = g.at(now);
            let exit = -a[(s, s)];
            let mut u = d.uniform() * bound;
            if let Generator::TimeVarying(_) = g {
                if u >= exit {
                    // rejected candidate: stay put
                    continue;
                }
            }
            let mut next = s;
            for j in (0..n).filter(|&j| j != s) {
                next = j;
                if u < a[(s, j)] {
                    break;
                }
                u -= a[(s, j)];
            }
            s = next;
            st.max_vol = st.max_vol.max(vols[s]);
        }
        st.end = s;
        st
    }
}

fn sample(sim: &Simulator<'_>, spec: &McPayoff, start: usize, t: f64, d: &mut Draws, normal: &Normal) -> f64 {
    let st = sim.run(start, t, d);
    match spec {
        McPayoff::Terminal(xi) => (-(st.rate_integral + st.spread_integral)).exp() * xi[st.end],
        McPayoff::KnockOut { barrier, payoff } => {
            if st.max_vol < *barrier {
                (-st.rate_integral).exp() * payoff[st.end]
            } else {
                0.0
            }
        }
        McPayoff::KnockIn { barrier, payoff } => {
            if st.max_vol >= *barrier {
                (-st.rate_integral).exp() * payoff[st.end]
            } else {
                0.0
            }
        }
        McPayoff::VulnerableCall { spot, strike } | McPayoff::VulnerablePut { spot, strike } => {
            let z = normal.inverse_cdf(d.uniform());
            let s_t = spot * (st.rate_integral - 0.5 * st.var_integral + st.var_integral.sqrt() * z).exp();
            let intrinsic = match spec {
                McPayoff::VulnerableCall { .. } => (s_t - strike).max(0.0),
                _ => (strike - s_t).max(0.0),
            };
            (-(st.rate_integral + st.spread_integral)).exp() * intrinsic
        }
    }
}

fn payoff_len(spec: &McPayoff) -> Option<usize> {
    match spec {
        McPayoff::Terminal(x) | McPayoff::KnockOut { payoff: x, .. } | McPayoff::KnockIn { payoff: x, .. } => {
            Some(x.len())
        }
        _ => None,
    }
}

fn stream_rng(seed: u64, start: usize, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((start as u64) << 48) | path as u64);
    rng
}

/// Sample mean and standard error of `f(path)` over `n` paths in fixed-order chunks.
fn reduce<F: Fn(usize) -> f64 + Sync>(n: usize, f: F) -> (f64, f64) {
    let chunks: Vec<(f64, f64)> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut s = 0.0;
            let mut s2 = 0.0;
            for p in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let v = f(p);
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = chunks.iter().fold((0.0, 0.0), |(a, b), (c, d)| (a + c, b + d));
    let nf = n as f64;
    let mean = s / nf;
    let var = if n > 1 { ((s2 - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
    (mean, (var / nf).sqrt())
}

/// Per-start-regime estimate and standard error for the claim `spec` with maturity `t`.
pub fn mc_price(t: f64, spec: &McPayoff, model: &RegimeModel, cfg: &McConfig) -> Result<McEstimate> {
    if cfg.n_paths == 0 {
        return Err(PricingError::InvalidConfig("n_paths must be at least 1".into()));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(PricingError::InvalidConfig(format!("maturity must be non-negative, got {t}")));
    }
    let n = model.n_regimes();
    if payoff_len(spec).is_some_and(|l| l != n) {
        return Err(PricingError::InvalidModel("payoff length differs from regime count".into()));
    }
    let sim = Simulator {
        model,
        spreads: (0..n).map(|i| model.hazards()[i] * model.losses()[i]).collect(),
        exit_bound: (0..n).map(|i| model.generator().exit_rate_bound(i)).collect(),
    };
    let normal = Normal::standard();
    let mut mean = Vec::with_capacity(n);
    let mut std_error = Vec::with_capacity(n);
    for start in 0..n {
        let draw = |p: usize, mirror: bool| {
            let mut rng = stream_rng(cfg.seed, start, p);
            let first = cfg
                .stratified
                .then(|| (p as f64 + rng.sample::<f64, _>(Open01)) / cfg.n_paths as f64);
            let mut d = Draws { rng, mirror, first };
            sample(&sim, spec, start, t, &mut d, &normal)
        };
        let (m, se) = reduce(cfg.n_paths, |p| {
            if cfg.antithetic {
                0.5 * (draw(p, false) + draw(p, true))
            } else {
                draw(p, false)
            }
        });
        mean.push(m);
        std_error.push(se);
    }
    Ok(McEstimate {
        mean,
        std_error,
        n_paths: cfg.n_paths,
        seed: cfg.seed,
    })
}

/// Estimate of the series coefficient `Φ_{i,m}` by simulation under the
/// homogenized measure, conditional on exactly `m` jumps in `[0, ζ]`.
///
/// Jump times are sorted uniforms and each jump picks one of the other
/// regimes uniformly. `alive` optionally zeroes paths through dead regimes.
#[allow(clippy::too_many_arguments)]
pub fn conditional_phi_mc(
    i: usize,
    m: usize,
    zeta: f64,
    payoff: &PayoffVector,
    fp: &FrozenParams,
    alive: Option<&[bool]>,
    n_paths: usize,
    seed: u64,
) -> (f64, f64) {
    let n = fp.n_regimes();
    reduce(n_paths, |p| {
        let mut rng = stream_rng(seed, i, p);
        let mut times: Vec<f64> = (0..m).map(|_| zeta * rng.sample::<f64, _>(Open01)).collect();
        times.sort_by(f64::total_cmp);
        let mut s = i;
        let mut prev = 0.0;
        let mut log_w = 0.0;
        let mut ok = alive.is_none_or(|a| a[s]);
        for &tj in &times {
            log_w -= fp.r_tilde[s] * (tj - prev);
            prev = tj;
            let mut j = rng.random_range(0..n - 1);
            if j >= s {
                j += 1;
            }
            log_w -= fp.k_tilde[(s, j)];
            s = j;
            ok &= alive.is_none_or(|a| a[s]);
        }
        log_w -= fp.r_tilde[s] * (zeta - prev);
        if ok {
            payoff[s] * log_w.exp()
        } else {
            0.0
        }
    })
}
