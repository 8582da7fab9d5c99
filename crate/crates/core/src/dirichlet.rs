//! Laplace transform of the flat Dirichlet distribution on the simplex.
//!
//! For `x ∈ R^m`,
//!
//! ```text
//! L_m(x) = m! ∫_{T_m} exp(-<x, λ>) dλ,   T_m = {λ ≥ 0, Σ λ_j ≤ 1}
//! ```
//!
//! which equals `m!` times the divided difference of `exp` over the nodes
//! `0, -x_1, ..., -x_m`. Nodes are recentred at the midpoint of their range.
//! A narrow node set is summed directly from the series
//! `[w_0..w_m] exp = Σ_k h_k(w) / (m+k)!` (with `h_k` the complete homogeneous
//! symmetric polynomial). A wide set is scaled into that regime and recovered
//! by repeated squaring of the lower bidiagonal node matrix exponential.
//! Every quantity involved is positive, so confluent nodes cost nothing extra.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, OnceLock, RwLock};

use num_rational::Ratio;

use crate::error::{PricingError, Result};

/// Default cap on the Taylor order accepted by [`laplace_taylor`].
pub const DEFAULT_MAX_TAYLOR_ORDER: usize = 8;

static MAX_TAYLOR_ORDER: AtomicUsize = AtomicUsize::new(DEFAULT_MAX_TAYLOR_ORDER);

/// Changes the largest Taylor order accepted by [`laplace_taylor`].
pub fn set_max_taylor_order(p: usize) {
    MAX_TAYLOR_ORDER.store(p, Ordering::Relaxed);
}

pub fn max_taylor_order() -> usize {
    MAX_TAYLOR_ORDER.load(Ordering::Relaxed)
}

/// Node spread below which the centred series is summed directly.
const SERIES_SPREAD: f64 = 1.0;

/// Arguments of one transform evaluation; `m` is the length of `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct LaplaceQuery {
    x: Vec<f64>,
}

impl LaplaceQuery {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if x.is_empty() {
            return Err(PricingError::InvalidConfig("Laplace query needs m >= 1".into()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(PricingError::InvalidConfig("Laplace arguments must be finite".into()));
        }
        Ok(Self { x })
    }

    pub fn m(&self) -> usize {
        self.x.len()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn exact(&self) -> f64 {
        laplace_exact(&self.x)
    }

    pub fn taylor(&self, p: usize) -> Result<f64> {
        laplace_taylor(&self.x, p)
    }

    pub fn remainder_bound(&self, p: usize) -> f64 {
        taylor_remainder_bound(&self.x, p)
    }
}

/// `L_m(x)` for `m = x.len()`. An empty `x` gives 1.
pub fn laplace_exact(x: &[f64]) -> f64 {
    let m = x.len();
    if m == 0 {
        return 1.0;
    }
    let (lo, hi) = x
        .iter()
        .fold((0.0_f64, 0.0_f64), |(lo, hi), &v| (lo.min(-v), hi.max(-v)));
    let c = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut w = Vec::with_capacity(m + 1);
    w.push(-c);
    w.extend(x.iter().map(|&v| -v - c));
    let dd = if half <= SERIES_SPREAD {
        // m! [w] exp, summed with the factorial folded in
        normalized_series(&w)
    } else {
        let s = (half / SERIES_SPREAD).log2().ceil().max(0.0) as i32;
        let e = scaled_squaring(&w, s);
        e * factorial(m)
    };
    c.exp() * dd
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, k| a * k as f64)
}

/// `m! [w_0..w_m] exp` for nodes of small spread.
fn normalized_series(w: &[f64]) -> f64 {
    let m = w.len() - 1;
    // h[k] tracks h_k over the nodes processed so far
    let mut h = vec![0.0; 64];
    h[0] = 1.0;
    let mut sum = 0.0;
    let kmax = h.len() - 1;
    for &wi in w {
        for k in 1..=kmax {
            h[k] += wi * h[k - 1];
        }
    }
    let rho = w.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let mut coef = 1.0;
    let mut tail = 1.0;
    for (k, hk) in h.iter().enumerate() {
        if k > 0 {
            coef /= (m + k) as f64;
            tail *= rho / k as f64;
        }
        sum += hk * coef;
        // |h_k| m!/(m+k)! <= rho^k / k!
        if tail < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// Raw divided difference `[w_0..w_m] exp` by scaling and squaring.
fn scaled_squaring(w: &[f64], s: i32) -> f64 {
    let n = w.len();
    let rho = 0.5_f64.powi(s);
    let v: Vec<f64> = w.iter().map(|&t| t * rho).collect();
    let rho_v = v.iter().fold(0.0_f64, |a, t| a.max(t.abs()));
    // e[i][j] = rho^(i-j) [v_j..v_i] exp for i >= j
    let mut e = vec![vec![0.0; n]; n];
    for j in 0..n {
        let mut h = vec![0.0; 64];
        h[0] = 1.0;
        for i in j..n {
            for k in 1..h.len() {
                h[k] += v[i] * h[k - 1];
            }
            let d = i - j;
            let mut coef = 1.0 / factorial(d);
            let mut tail = coef;
            let mut sum = 0.0;
            for (k, hk) in h.iter().enumerate() {
                if k > 0 {
                    coef /= (d + k) as f64;
                    tail *= rho_v / k as f64;
                }
                sum += hk * coef;
                if tail < 1e-18 * sum.abs() {
                    break;
                }
            }
            e[i][j] = sum * rho.powi(d as i32);
        }
    }
    for _ in 0..s {
        let mut next = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let mut acc = 0.0;
                for (k, ek) in e.iter().enumerate().take(i + 1).skip(j) {
                    acc += e[i][k] * ek[j];
                }
                next[i][j] = acc;
            }
        }
        e = next;
    }
    e[n - 1][0]
}

/// Coefficients of the order-`p` Taylor polynomial of `L_m` at the origin.
///
/// Each monomial `x^k` with `|k| = l` carries the multinomial count times
/// the Dirichlet moment `E[Π λ_j^{k_j}] = m! Π k_j! / (m+l)!` and the sign
/// `(-1)^l / l!`.
#[derive(Debug)]
pub struct MomentTable {
    m: usize,
    p: usize,
    terms: Vec<MomentTerm>,
}

#[derive(Clone, Debug)]
pub struct MomentTerm {
    /// Exponent of each argument.
    pub exponents: Vec<u32>,
    pub coefficient: Ratio<i128>,
    coefficient_f64: f64,
}

fn ratio_factorial(n: u32) -> i128 {
    (1..=n as i128).product::<i128>().max(1)
}

impl MomentTable {
    fn build(m: usize, p: usize) -> Self {
        let mut terms = Vec::new();
        let mut exps = vec![0u32; m];
        for l in 0..=p as u32 {
            enumerate(&mut exps, 0, l, &mut |k| {
                let prod_kfact: i128 = k.iter().map(|&ki| ratio_factorial(ki)).product();
                // multinomial l! / Π k_j!
                let multinomial = Ratio::new(ratio_factorial(l), prod_kfact);
                // m! Π k_j! / (m+l)!
                let rising: i128 = (1..=l as i128).map(|q| m as i128 + q).product::<i128>().max(1);
                let moment = Ratio::new(prod_kfact, rising);
                let sign = if l % 2 == 0 { 1 } else { -1 };
                let coefficient = Ratio::from_integer(sign) * multinomial * moment
                    / Ratio::from_integer(ratio_factorial(l));
                let coefficient_f64 = *coefficient.numer() as f64 / *coefficient.denom() as f64;
                terms.push(MomentTerm {
                    exponents: k.to_vec(),
                    coefficient,
                    coefficient_f64,
                });
            });
        }
        Self { m, p, terms }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn order(&self) -> usize {
        self.p
    }

    pub fn terms(&self) -> &[MomentTerm] {
        &self.terms
    }

    /// Exact coefficient of the monomial with the given exponents, zero when absent.
    pub fn coefficient(&self, exponents: &[u32]) -> Ratio<i128> {
        self.terms
            .iter()
            .find(|t| t.exponents == exponents)
            .map(|t| t.coefficient)
            .unwrap_or_else(|| Ratio::from_integer(0))
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.exponents
                    .iter()
                    .zip(x)
                    .fold(t.coefficient_f64, |acc, (&k, &xi)| acc * xi.powi(k as i32))
            })
            .sum()
    }
}

fn enumerate(exps: &mut [u32], pos: usize, left: u32, f: &mut impl FnMut(&[u32])) {
    if pos + 1 == exps.len() {
        exps[pos] = left;
        f(exps);
        exps[pos] = 0;
        return;
    }
    for k in (0..=left).rev() {
        exps[pos] = k;
        enumerate(exps, pos + 1, left - k, f);
    }
    exps[pos] = 0;
}

type TableCache = RwLock<HashMap<(usize, usize), Arc<MomentTable>>>;

fn cache() -> &'static TableCache {
    static CACHE: OnceLock<TableCache> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Memoized moment table for `(m, p)`; safe to call from many threads.
pub fn moment_table(m: usize, p: usize) -> Result<Arc<MomentTable>> {
    let max = max_taylor_order();
    if p > max {
        return Err(PricingError::InvalidConfig(format!(
            "Taylor order {p} exceeds the configured maximum {max}"
        )));
    }
    if m == 0 {
        return Err(PricingError::InvalidConfig("Laplace query needs m >= 1".into()));
    }
    if let Some(t) = cache().read().expect("moment cache poisoned").get(&(m, p)) {
        return Ok(t.clone());
    }
    let table = Arc::new(MomentTable::build(m, p));
    let mut guard = cache().write().expect("moment cache poisoned");
    Ok(guard.entry((m, p)).or_insert(table).clone())
}

/// Order-`p` Taylor polynomial of `L_m` at the origin, `m = x.len()`.
pub fn laplace_taylor(x: &[f64], p: usize) -> Result<f64> {
    Ok(moment_table(x.len(), p)?.evaluate(x))
}

/// Upper bound on `|L_m(x) - laplace_taylor(x, p)|`:
/// `Σ_{i>p} m^{i/2} |x|^i m!/(m+i)!`.
pub fn taylor_remainder_bound(x: &[f64], p: usize) -> f64 {
    let m = x.len() as f64;
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return 0.0;
    }
    let a = m.sqrt() * norm;
    // term_i = a^i m!/(m+i)!
    let mut term = 1.0;
    for i in 1..=p + 1 {
        term *= a / (m + i as f64);
    }
    let mut sum = 0.0;
    let mut i = p + 1;
    loop {
        sum += term;
        let ratio = a / (m + (i + 1) as f64);
        let next = term * ratio;
        if next < 1e-18 && ratio < 0.5 {
            // remaining terms are dominated by a geometric tail
            sum += next / (1.0 - ratio);
            break;
        }
        term = next;
        i += 1;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simplex_quadrature(x: &[f64]) -> f64 {
        // tensor Gauss-Legendre on the unit cube mapped onto the simplex
        let gl = gauss_quad::GaussLegendre::new(20.try_into().unwrap());
        let nodes: Vec<(f64, f64)> = gl
            .nodes()
            .zip(gl.weights())
            .map(|(&u, &w)| (0.5 * (u + 1.0), 0.5 * w))
            .collect();
        let m = x.len();
        let mut total = 0.0;
        let mut idx = vec![0usize; m];
        loop {
            let mut rem = 1.0;
            let mut jac = 1.0;
            let mut dot = 0.0_f64;
            let mut wt = 1.0;
            for (d, &k) in idx.iter().enumerate() {
                let (u, w) = nodes[k];
                let lam = rem * u;
                jac *= rem;
                dot += x[d] * lam;
                rem -= lam;
                wt *= w;
            }
            total += wt * jac * (-dot).exp();
            let mut d = 0;
            loop {
                if d == m {
                    return total * factorial(m);
                }
                idx[d] += 1;
                if idx[d] < nodes.len() {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
        }
    }

    #[test]
    fn origin_is_one() {
        for m in 1..8 {
            assert_eq!(laplace_exact(&vec![0.0; m]), 1.0);
        }
    }

    #[test]
    fn one_dimensional_closed_form() {
        assert!((laplace_exact(&[1.0]) - 0.632_120_558_828_557_7).abs() < 1e-15);
        for a in [-5.0_f64, -0.3, 1e-8, 0.7, 3.0, 40.0] {
            let want = -(-a).exp_m1() / a;
            assert!((laplace_exact(&[a]) - want).abs() < 1e-13 * want.max(1.0), "a={a}");
        }
    }

    #[test]
    fn one_dimensional_matches_quadrature() {
        let q = crate::quad::integrate(|l| (-l).exp(), 0.0, 1.0);
        assert!((laplace_exact(&[1.0]) - q).abs() < 1e-12);
    }

    #[test]
    fn two_dimensional_matches_triangle_quadrature() {
        let x = [0.3, 0.7];
        let q = simplex_quadrature(&x);
        assert!((laplace_exact(&x) - q).abs() < 1e-10);
    }

    #[test]
    fn wide_and_confluent_nodes() {
        // two distinct values repeated: L = E[exp(-a B)] with B ~ Beta(2, 2) for x = (a, a, 0)
        let a: f64 = 7.5;
        let x = [a, a, 0.0];
        let q = crate::quad::integrate(|b| 6.0 * b * (1.0 - b) * (-a * b).exp(), 0.0, 1.0);
        assert!((laplace_exact(&x) - q).abs() < 1e-13);
        assert!((laplace_exact(&x) - simplex_quadrature(&x)).abs() < 1e-10);
        // all arguments equal: L = E[exp(-a S)] with S ~ Beta(m, 1)
        for m in 1..10 {
            let x = vec![a; m];
            let q = crate::quad::integrate(|s| m as f64 * s.powi(m as i32 - 1) * (-a * s).exp(), 0.0, 1.0);
            assert!((laplace_exact(&x) - q).abs() < 1e-12, "m={m}");
        }
    }

    #[test]
    fn large_negative_arguments() {
        // x = (-b): (e^b - 1)/b
        let b: f64 = 30.0;
        let want = b.exp_m1() / b;
        assert!((laplace_exact(&[-b]) / want - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tylrapr_first_order() {
        let t = moment_table(2, 1).unwrap();
        assert_eq!(t.coefficient(&[0, 0]), Ratio::from_integer(1));
        assert_eq!(t.coefficient(&[1, 0]), Ratio::new(-1, 3));
        assert_eq!(t.coefficient(&[0, 1]), Ratio::new(-1, 3));
        let x = [0.2, 0.5];
        assert!((laplace_taylor(&x, 1).unwrap() - (1.0 - 0.7 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn zeroth_order_is_total_mass() {
        assert_eq!(laplace_taylor(&[0.4, -2.0, 9.0], 0).unwrap(), 1.0);
    }

    #[test]
    fn order_cap() {
        assert!(laplace_taylor(&[0.1], DEFAULT_MAX_TAYLOR_ORDER + 1).is_err());
    }

    #[test]
    fn taylor_within_bound() {
        let x = [0.3, 0.7];
        let err = (laplace_exact(&x) - laplace_taylor(&x, 2).unwrap()).abs();
        assert!(err <= taylor_remainder_bound(&x, 2));
        let x = [0.1; 4];
        let err = (laplace_exact(&x) - laplace_taylor(&x, 1).unwrap()).abs();
        assert!(err <= taylor_remainder_bound(&x, 1));
        assert_eq!(taylor_remainder_bound(&[0.0], 0), 0.0);
    }
}
