//! Wall-clock comparison of the series pricer against the ODE and matrix
//! exponential engines.
//!
//! For each `(δ, T)` every engine prices the bond at all times to maturity
//! `δ, 2δ, …` up to `T`, plus `T` itself. The series pricer uses `M = 2` with step `δ`, so one
//! backward sweep yields the whole grid.

use std::time::{Duration, Instant};

use vulnprice::reference::{expm_price, ode_price_dense, OdeConfig};
use vulnprice::series::{price_claim, PricerConfig, Steps};
use vulnprice::{PayoffVector, RegimeModel};

use crate::table::Table;
use crate::CliError;

pub const APPENDIX_C_DELTAS: [f64; 4] = [0.1, 0.075, 0.05, 0.025];
pub const APPENDIX_C_MATURITIES: [f64; 8] = [5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0];

#[derive(Debug, Clone, Copy)]
pub struct BenchCell {
    pub delta: f64,
    pub maturity: f64,
    pub series: Duration,
    pub ode: Duration,
    pub expm: Duration,
}

impl BenchCell {
    pub fn ratio_ode(&self) -> f64 {
        self.series.as_secs_f64() / self.ode.as_secs_f64()
    }

    pub fn ratio_expm(&self) -> f64 {
        self.series.as_secs_f64() / self.expm.as_secs_f64()
    }
}

fn fastest<F: FnMut() -> Result<(), CliError>>(reps: usize, mut f: F) -> Result<Duration, CliError> {
    let mut best = Duration::MAX;
    for _ in 0..reps.max(1) {
        let t0 = Instant::now();
        f()?;
        best = best.min(t0.elapsed());
    }
    // clock granularity must not produce a zero denominator
    Ok(best.max(Duration::from_nanos(1)))
}

pub fn time_cell(model: &RegimeModel, delta: f64, maturity: f64, reps: usize) -> Result<BenchCell, CliError> {
    let n = model.n_regimes();
    let ones = PayoffVector::ones(n);
    let k = (maturity / delta + 1e-9).floor() as usize;
    let mut grid: Vec<f64> = (1..=k).map(|i| i as f64 * delta).filter(|z| *z < maturity - 1e-9).collect();
    grid.push(maturity);
    let cfg = PricerConfig::new(2, Steps::Width(delta));
    let ode_cfg = OdeConfig::default();
    let series = fastest(reps, || {
        price_claim(maturity, &ones, &cfg, model)?;
        Ok(())
    })?;
    let ode = fastest(reps, || {
        ode_price_dense(maturity, &ones, model, &ode_cfg, &grid)?;
        Ok(())
    })?;
    let expm = fastest(reps, || {
        for &z in &grid {
            expm_price(z, &ones, model)?;
        }
        Ok(())
    })?;
    Ok(BenchCell {
        delta,
        maturity,
        series,
        ode,
        expm,
    })
}

/// Full grid as a table: timings in seconds and the two ratios.
pub fn appendix_c(model: &RegimeModel, reps: usize) -> Result<Table, CliError> {
    if !model.generator().is_constant() {
        return Err(CliError::Config("expm requires constant generator".into()));
    }
    let mut table = Table::new(
        [
            "delta",
            "maturity",
            "series_seconds",
            "ode_seconds",
            "expm_seconds",
            "ratio_ode",
            "ratio_expm",
        ]
        .map(String::from)
        .to_vec(),
    );
    table.comment("grid", "appendix-c");
    table.comment("reps", reps);
    for &delta in &APPENDIX_C_DELTAS {
        for &maturity in &APPENDIX_C_MATURITIES {
            let c = time_cell(model, delta, maturity, reps)?;
            table.push(vec![
                delta.to_string(),
                maturity.to_string(),
                format!("{:.6e}", c.series.as_secs_f64()),
                format!("{:.6e}", c.ode.as_secs_f64()),
                format!("{:.6e}", c.expm.as_secs_f64()),
                format!("{:.4}", c.ratio_ode()),
                format!("{:.4}", c.ratio_expm()),
            ]);
        }
    }
    Ok(table)
}
