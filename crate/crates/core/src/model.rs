//! Market model: per-regime parameter vectors and the risk-neutral generator.
//!
//! Regimes are stored 0-based. Anything that leaves the library (violation
//! reports, error messages, CSV output) uses 1-based regime indices.

use std::fmt;
use std::ops::Index;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{PricingError, Result, Violation, ViolationKind, ViolationReport};

/// Row sums of a generator must vanish to this tolerance.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Default replacement value for zero off-diagonal rates in [`Generator::with_epsilon_floor`].
pub const DEFAULT_EPSILON_FLOOR: f64 = 1e-12;

/// Default number of sample points used to validate time-varying generators.
pub const DEFAULT_VALIDATION_SAMPLES: usize = 10_001;

type RateFn = dyn Fn(f64) -> DMatrix<f64> + Send + Sync;

/// A generator whose entries depend on calendar time.
///
/// The rate function must be pure. The declared bounds are trusted: `inf`
/// and `sup` bound each off-diagonal entry over the pricing horizon and
/// `derivative_sup` bounds its time derivative.
#[derive(Clone)]
pub struct TimeVaryingGenerator {
    n: usize,
    rates: Arc<RateFn>,
    inf: DMatrix<f64>,
    sup: DMatrix<f64>,
    derivative_sup: DMatrix<f64>,
}

impl TimeVaryingGenerator {
    /// Wraps a function returning the full generator matrix at time `t`.
    pub fn new<F>(
        n: usize,
        rates: F,
        inf: DMatrix<f64>,
        sup: DMatrix<f64>,
        derivative_sup: DMatrix<f64>,
    ) -> Result<Self>
    where
        F: Fn(f64) -> DMatrix<f64> + Send + Sync + 'static,
    {
        for (name, m) in [("inf", &inf), ("sup", &sup), ("derivative_sup", &derivative_sup)] {
            if m.nrows() != n || m.ncols() != n {
                return Err(PricingError::InvalidModel(format!(
                    "declared {name} bound must be {n}x{n}"
                )));
            }
        }
        Ok(Self {
            n,
            rates: Arc::new(rates),
            inf,
            sup,
            derivative_sup,
        })
    }

    /// Like [`TimeVaryingGenerator::new`], but `rates` only needs to supply the
    /// off-diagonal entries; the diagonal is filled so rows sum to zero.
    pub fn from_off_diagonal<F>(
        n: usize,
        rates: F,
        inf: DMatrix<f64>,
        sup: DMatrix<f64>,
        derivative_sup: DMatrix<f64>,
    ) -> Result<Self>
    where
        F: Fn(f64) -> DMatrix<f64> + Send + Sync + 'static,
    {
        Self::new(
            n,
            move |t| {
                let mut a = rates(t);
                fill_diagonal(&mut a);
                a
            },
            inf,
            sup,
            derivative_sup,
        )
    }

    /// `a_ij(t) = base_ij + amplitude_ij * sin(frequency_ij * t + phase_ij)` off the
    /// diagonal, with bounds derived from the parameters.
    pub fn sinusoidal(
        base: DMatrix<f64>,
        amplitude: DMatrix<f64>,
        frequency: DMatrix<f64>,
        phase: DMatrix<f64>,
    ) -> Result<Self> {
        let n = base.nrows();
        for m in [&base, &amplitude, &frequency, &phase] {
            if m.nrows() != n || m.ncols() != n {
                return Err(PricingError::InvalidModel(
                    "sinusoidal generator blocks must share one square shape".into(),
                ));
            }
        }
        let inf = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                0.0
            } else {
                base[(i, j)] - amplitude[(i, j)].abs()
            }
        });
        let sup = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                0.0
            } else {
                base[(i, j)] + amplitude[(i, j)].abs()
            }
        });
        let dsup = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                0.0
            } else {
                (amplitude[(i, j)] * frequency[(i, j)]).abs()
            }
        });
        Self::from_off_diagonal(
            n,
            move |t| {
                DMatrix::from_fn(n, n, |i, j| {
                    if i == j {
                        0.0
                    } else {
                        base[(i, j)]
                            + amplitude[(i, j)] * (frequency[(i, j)] * t + phase[(i, j)]).sin()
                    }
                })
            },
            inf,
            sup,
            dsup,
        )
    }

    pub fn n_regimes(&self) -> usize {
        self.n
    }

    pub fn at(&self, t: f64) -> DMatrix<f64> {
        (self.rates)(t)
    }

    pub fn declared_inf(&self) -> &DMatrix<f64> {
        &self.inf
    }

    pub fn declared_sup(&self) -> &DMatrix<f64> {
        &self.sup
    }

    pub fn derivative_sup(&self) -> &DMatrix<f64> {
        &self.derivative_sup
    }
}

impl fmt::Debug for TimeVaryingGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TimeVaryingGenerator")
            .field("n", &self.n)
            .field("inf", &self.inf)
            .field("sup", &self.sup)
            .finish_non_exhaustive()
    }
}

/// Risk-neutral generator `A^Q`, constant or time-varying.
#[derive(Clone, Debug)]
pub enum Generator {
    Constant(DMatrix<f64>),
    TimeVarying(TimeVaryingGenerator),
}

impl Generator {
    /// Builds a constant generator from its rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(PricingError::InvalidModel(format!(
                "generator must be square, got {n} rows of unequal length"
            )));
        }
        Ok(Generator::Constant(DMatrix::from_fn(n, n, |i, j| rows[i][j])))
    }

    pub fn n_regimes(&self) -> usize {
        match self {
            Generator::Constant(a) => a.nrows(),
            Generator::TimeVarying(g) => g.n_regimes(),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Generator::Constant(_))
    }

    /// Generator evaluated at calendar time `t`.
    pub fn at(&self, t: f64) -> DMatrix<f64> {
        match self {
            Generator::Constant(a) => a.clone(),
            Generator::TimeVarying(g) => g.at(t),
        }
    }

    /// Upper bound on the total exit rate from regime `i` over the horizon.
    pub fn exit_rate_bound(&self, i: usize) -> f64 {
        let n = self.n_regimes();
        match self {
            Generator::Constant(a) => (0..n).filter(|&j| j != i).map(|j| a[(i, j)]).sum(),
            Generator::TimeVarying(g) => (0..n).filter(|&j| j != i).map(|j| g.sup[(i, j)]).sum(),
        }
    }

    /// Opt-in repair for zero off-diagonal rates: each exact zero becomes
    /// `eps` and the diagonal absorbs the change so rows still sum to zero.
    pub fn with_epsilon_floor(&self, eps: f64) -> Generator {
        match self {
            Generator::Constant(a) => {
                let mut a = a.clone();
                floor_zeros(&mut a, eps);
                Generator::Constant(a)
            }
            Generator::TimeVarying(g) => {
                let inner = g.rates.clone();
                let mut inf = g.inf.clone();
                let n = g.n;
                for i in 0..n {
                    for j in 0..n {
                        if i != j && inf[(i, j)] <= 0.0 {
                            inf[(i, j)] = eps.min(g.sup[(i, j)].max(eps));
                        }
                    }
                }
                let mut sup = g.sup.clone();
                sup.iter_mut().for_each(|v| *v = v.max(eps));
                Generator::TimeVarying(TimeVaryingGenerator {
                    n,
                    rates: Arc::new(move |t| {
                        let mut a = inner(t);
                        floor_zeros(&mut a, eps);
                        a
                    }),
                    inf,
                    sup,
                    derivative_sup: g.derivative_sup.clone(),
                })
            }
        }
    }
}

fn fill_diagonal(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        a[(i, i)] = 0.0;
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| a[(i, j)]).sum();
        a[(i, i)] = -off;
    }
}

fn floor_zeros(a: &mut DMatrix<f64>, eps: f64) {
    let n = a.nrows();
    for i in 0..n {
        for j in 0..n {
            if i != j && a[(i, j)] == 0.0 {
                a[(i, j)] = eps;
                a[(i, i)] -= eps;
            }
        }
    }
}

fn check_matrix(a: &DMatrix<f64>, t: f64, report: &mut ViolationReport) {
    let n = a.nrows();
    for i in 0..n {
        let sum: f64 = a.row(i).iter().sum();
        let scale = a.row(i).iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        if !(sum.abs() <= ROW_SUM_TOL * scale) {
            report.violations.push(Violation {
                row: i + 1,
                col: i + 1,
                time: t,
                value: sum,
                kind: ViolationKind::RowSum,
            });
        }
        for j in (0..n).filter(|&j| j != i) {
            let v = a[(i, j)];
            let kind = if !v.is_finite() {
                Some(ViolationKind::Unbounded)
            } else if v <= 0.0 {
                Some(ViolationKind::NonPositiveRate)
            } else {
                None
            };
            if let Some(kind) = kind {
                report.violations.push(Violation {
                    row: i + 1,
                    col: j + 1,
                    time: t,
                    value: v,
                    kind,
                });
            }
        }
    }
}

/// Checks row sums and strict positivity of the off-diagonal rates over
/// `[0, horizon]`, using [`DEFAULT_VALIDATION_SAMPLES`] points for
/// time-varying generators.
pub fn validate_generator(g: &Generator, horizon: f64) -> std::result::Result<(), ViolationReport> {
    validate_generator_with(g, horizon, DEFAULT_VALIDATION_SAMPLES)
}

pub fn validate_generator_with(
    g: &Generator,
    horizon: f64,
    samples: usize,
) -> std::result::Result<(), ViolationReport> {
    let mut report = ViolationReport::default();
    match g {
        Generator::Constant(a) => check_matrix(a, 0.0, &mut report),
        Generator::TimeVarying(tv) => {
            let n = tv.n;
            for i in 0..n {
                for j in (0..n).filter(|&j| j != i) {
                    let (lo, hi) = (tv.inf[(i, j)], tv.sup[(i, j)]);
                    if !(lo > 0.0) {
                        report.violations.push(Violation {
                            row: i + 1,
                            col: j + 1,
                            time: f64::NAN,
                            value: lo,
                            kind: ViolationKind::NonPositiveRate,
                        });
                    }
                    if !hi.is_finite() {
                        report.violations.push(Violation {
                            row: i + 1,
                            col: j + 1,
                            time: f64::NAN,
                            value: hi,
                            kind: ViolationKind::Unbounded,
                        });
                    }
                }
            }
            let samples = samples.max(2);
            for s in 0..samples {
                let t = horizon * s as f64 / (samples - 1) as f64;
                let a = tv.at(t);
                check_matrix(&a, t, &mut report);
                for i in 0..n {
                    for j in (0..n).filter(|&j| j != i) {
                        let v = a[(i, j)];
                        if v < tv.inf[(i, j)] {
                            report.violations.push(Violation {
                                row: i + 1,
                                col: j + 1,
                                time: t,
                                value: v,
                                kind: ViolationKind::BelowDeclaredInf,
                            });
                        } else if v > tv.sup[(i, j)] {
                            report.violations.push(Violation {
                                row: i + 1,
                                col: j + 1,
                                time: t,
                                value: v,
                                kind: ViolationKind::Unbounded,
                            });
                        }
                    }
                }
            }
        }
    }
    if report.is_empty() {
        Ok(())
    } else {
        Err(report)
    }
}

/// Claim payoff `Ξ(e_i)` per regime.
#[derive(Clone, Debug, PartialEq)]
pub struct PayoffVector(Vec<f64>);

impl PayoffVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(PricingError::InvalidModel(format!(
                "payoff for regime {} is not finite",
                i + 1
            )));
        }
        Ok(Self(values))
    }

    /// Unit payoff in every regime (a zero-coupon bond).
    pub fn ones(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// `max_i |Ξ(e_i)|`
    pub fn sup_norm(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub(crate) fn from_unchecked(values: Vec<f64>) -> Self {
        Self(values)
    }
}

impl Index<usize> for PayoffVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Regime parameters together with the risk-neutral generator.
#[derive(Clone, Debug)]
pub struct RegimeModel {
    short_rates: Vec<f64>,
    hazards: Vec<f64>,
    losses: Vec<f64>,
    vols: Vec<f64>,
    drifts: Vec<f64>,
    generator: Generator,
}

impl RegimeModel {
    pub fn new(
        short_rates: Vec<f64>,
        hazards: Vec<f64>,
        losses: Vec<f64>,
        vols: Vec<f64>,
        drifts: Vec<f64>,
        generator: Generator,
    ) -> Result<Self> {
        let n = generator.n_regimes();
        if n == 0 {
            return Err(PricingError::InvalidModel("at least one regime required".into()));
        }
        for (name, v) in [
            ("short_rates", &short_rates),
            ("hazards", &hazards),
            ("losses", &losses),
            ("vols", &vols),
            ("drifts", &drifts),
        ] {
            if v.len() != n {
                return Err(PricingError::InvalidModel(format!(
                    "{name} has {} entries, generator has {n} regimes",
                    v.len()
                )));
            }
            if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                return Err(PricingError::InvalidModel(format!(
                    "{name}[{}] is not finite",
                    i + 1
                )));
            }
        }
        let bad = |name: &str, i: usize, rule: &str| {
            Err(PricingError::InvalidModel(format!("{name}[{}] must be {rule}", i + 1)))
        };
        for i in 0..n {
            if short_rates[i] <= 0.0 {
                return bad("short_rates", i, "> 0");
            }
            if hazards[i] < 0.0 {
                return bad("hazards", i, ">= 0");
            }
            if !(0.0..=1.0).contains(&losses[i]) {
                return bad("losses", i, "in [0, 1]");
            }
            if vols[i] <= 0.0 {
                return bad("vols", i, "> 0");
            }
        }
        Ok(Self {
            short_rates,
            hazards,
            losses,
            vols,
            drifts,
            generator,
        })
    }

    pub fn n_regimes(&self) -> usize {
        self.short_rates.len()
    }

    pub fn short_rates(&self) -> &[f64] {
        &self.short_rates
    }

    pub fn hazards(&self) -> &[f64] {
        &self.hazards
    }

    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    pub fn vols(&self) -> &[f64] {
        &self.vols
    }

    pub fn drifts(&self) -> &[f64] {
        &self.drifts
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    /// Credit-adjusted discount rates `r_i + h_i L_i`.
    pub fn credit_adjusted_rates(&self) -> Vec<f64> {
        (0..self.n_regimes())
            .map(|i| self.short_rates[i] + self.hazards[i] * self.losses[i])
            .collect()
    }

    /// Same parameters with another generator of matching size.
    pub fn with_generator(&self, generator: Generator) -> Result<Self> {
        Self::new(
            self.short_rates.clone(),
            self.hazards.clone(),
            self.losses.clone(),
            self.vols.clone(),
            self.drifts.clone(),
            generator,
        )
    }

    /// Same model with the [`Generator::with_epsilon_floor`] repair applied.
    pub fn with_epsilon_floor(&self, eps: f64) -> Self {
        Self {
            generator: self.generator.with_epsilon_floor(eps),
            ..self.clone()
        }
    }

    /// Same model with all hazard rates set to zero.
    pub fn default_free(&self) -> Self {
        Self {
            hazards: vec![0.0; self.n_regimes()],
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn table1_generator_fails_strict_positivity() {
        let g = fixtures::table1_generator();
        let report = validate_generator(&g, 1.0).unwrap_err();
        assert_eq!(report.violations.len(), 1);
        let v = &report.violations[0];
        assert_eq!((v.row, v.col), (2, 3));
        assert_eq!(v.kind, ViolationKind::NonPositiveRate);
        assert_eq!(v.value, 0.0);
    }

    #[test]
    fn epsilon_floor_repairs_table1() {
        let g = fixtures::table1_generator().with_epsilon_floor(DEFAULT_EPSILON_FLOOR);
        assert!(validate_generator(&g, 1.0).is_ok());
        let a = g.at(0.0);
        assert_eq!(a[(1, 2)], 1e-12);
        assert!((a[(1, 1)] + 0.254397 + 1e-12).abs() < 1e-15);
    }

    #[test]
    fn symmetric_two_state_is_valid() {
        let g = Generator::from_rows(&[vec![-1.0, 1.0], vec![1.0, -1.0]]).unwrap();
        assert!(validate_generator(&g, 1.0).is_ok());
    }

    #[test]
    fn row_sum_breach_is_reported() {
        let g = Generator::from_rows(&[vec![-1.0, 1.1], vec![1.0, -1.0]]).unwrap();
        let report = validate_generator(&g, 1.0).unwrap_err();
        assert_eq!(report.violations[0].kind, ViolationKind::RowSum);
        assert_eq!(report.violations[0].row, 1);
    }

    #[test]
    fn sinusoidal_generator_rows_sum_to_zero_on_dense_grid() {
        let g = fixtures::sinusoidal_generator();
        assert!(validate_generator(&g, std::f64::consts::PI).is_ok());
        // independent evaluation of the closed form at 10^4 points
        for s in 0..10_000 {
            let t = std::f64::consts::PI * s as f64 / 9_999.0;
            let a = g.at(t);
            for i in 0..3 {
                let sum: f64 = a.row(i).iter().sum();
                assert!(sum.abs() <= 1e-12);
            }
            assert!((a[(0, 1)] - (0.5 + 0.4 * t.sin())).abs() < 1e-15);
            assert!(a[(0, 1)] >= 0.1);
        }
    }

    #[test]
    fn time_varying_generator_below_declared_inf() {
        let n = 2;
        let g = TimeVaryingGenerator::from_off_diagonal(
            n,
            |t| DMatrix::from_row_slice(2, 2, &[0.0, 1.0 - t, 1.0, 0.0]),
            DMatrix::from_element(2, 2, 0.5),
            DMatrix::from_element(2, 2, 2.0),
            DMatrix::from_element(2, 2, 1.0),
        )
        .unwrap();
        let report = validate_generator(&Generator::TimeVarying(g), 1.0).unwrap_err();
        assert!(report
            .violations
            .iter()
            .any(|v| v.kind == ViolationKind::BelowDeclaredInf && v.row == 1 && v.col == 2));
        assert!(report
            .violations
            .iter()
            .any(|v| v.kind == ViolationKind::NonPositiveRate && v.time == 1.0));
    }

    #[test]
    fn model_rejects_bad_inputs() {
        let g = Generator::from_rows(&[vec![-1.0, 1.0], vec![1.0, -1.0]]).unwrap();
        let ok = |r: Vec<f64>, h: Vec<f64>, l: Vec<f64>, s: Vec<f64>| {
            RegimeModel::new(r, h, l, s, vec![0.0, 0.0], g.clone())
        };
        assert!(ok(vec![0.01, 0.02], vec![0.01, 0.02], vec![0.5, 1.0], vec![0.1, 0.2]).is_ok());
        assert!(ok(vec![0.0, 0.02], vec![0.01, 0.02], vec![0.5, 1.0], vec![0.1, 0.2]).is_err());
        assert!(ok(vec![0.01, 0.02], vec![0.01, 0.02], vec![1.5, 1.0], vec![0.1, 0.2]).is_err());
        assert!(ok(vec![0.01, 0.02], vec![-0.1, 0.02], vec![0.5, 1.0], vec![0.1, 0.2]).is_err());
        assert!(ok(vec![0.01, 0.02], vec![0.01, 0.02], vec![0.5, 1.0], vec![0.1, 0.0]).is_err());
        assert!(ok(vec![0.01], vec![0.01, 0.02], vec![0.5, 1.0], vec![0.1, 0.2]).is_err());
    }

    #[test]
    fn payoff_rejects_non_finite() {
        assert!(PayoffVector::new(vec![1.0, f64::NAN]).is_err());
        assert_eq!(PayoffVector::new(vec![1.0, -3.0]).unwrap().sup_norm(), 3.0);
    }
}
