//! The `price`, `converge` and `validate` commands.

use vulnprice::barrier::{knock_out_expm, price_barrier_legs, BarrierDirection, BarrierSpec};
use vulnprice::reference::{expm_price, mc_price, ode_price, McConfig, McPayoff, OdeConfig};
use vulnprice::series::{price_claim, GeneratorMode, PricerConfig, Steps};
use vulnprice::vulnerable::{vuln_option_price, LatticeConfig, OptionKind, OptionSpec};
use vulnprice::{validate_generator, PayoffVector, RegimeModel};

use crate::config::{BarrierBlock, Engine, Instrument, OptionBlock};
use crate::table::{fmt_diff, fmt_price, Table};
use crate::CliError;

/// Everything `price` needs, after run file and flags are merged.
pub struct PriceRequest {
    pub model: RegimeModel,
    pub instrument: Instrument,
    pub engines: Vec<Engine>,
    pub maturities: Vec<f64>,
    pub seed: u64,
    pub pricer: PricerConfig,
    pub barrier: BarrierBlock,
    pub option: OptionBlock,
    pub lattice: LatticeConfig,
    pub mc: McConfig,
    pub ode: OdeConfig,
}

impl PriceRequest {
    pub fn check(&self) -> Result<(), CliError> {
        if self.engines.is_empty() {
            return Err(CliError::Config("no engines selected".into()));
        }
        if self.maturities.is_empty() {
            return Err(CliError::Config("no maturities given".into()));
        }
        if let Some(t) = self.maturities.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(CliError::Config(format!("maturity must be positive, got {t}")));
        }
        for e in &self.engines {
            if *e == Engine::Expm && !self.model.generator().is_constant() {
                return Err(CliError::Config("expm requires constant generator".into()));
            }
            if !e.supports(self.instrument) {
                return Err(CliError::Config(format!(
                    "engine `{e}` does not support instrument `{}`",
                    instrument_name(self.instrument)
                )));
            }
        }
        Ok(())
    }

    fn barrier_spec(&self) -> Result<BarrierSpec, CliError> {
        let b = &self.barrier;
        let spec = match self.instrument {
            Instrument::DigitalBarrier => BarrierSpec::digital(b.level, BarrierDirection::KnockOut, self.model.n_regimes())?,
            _ => BarrierSpec::vol_call(b.level, BarrierDirection::KnockOut, b.strike, self.model.vols())?,
        };
        Ok(spec)
    }

    fn engine_prices(&self, engine: Engine, t: f64) -> Result<Vec<f64>, CliError> {
        let n = self.model.n_regimes();
        let ones = PayoffVector::ones(n);
        let mc = McConfig { seed: self.seed, ..self.mc };
        let out = match (self.instrument, engine) {
            (Instrument::Bond, Engine::Series) => price_claim(t, &ones, &self.pricer, &self.model)?.at_maturity(),
            (Instrument::Bond, Engine::Ode) => ode_price(t, &ones, &self.model, &self.ode)?,
            (Instrument::Bond, Engine::Expm) => expm_price(t, &ones, &self.model)?,
            (Instrument::Bond, Engine::Mc) => mc_price(t, &McPayoff::Terminal(ones), &self.model, &mc)?.mean,
            (Instrument::VulnerableCall, Engine::Series) => {
                let spec = OptionSpec::new(self.option.strike, self.option.spot, OptionKind::Call, t)?;
                vuln_option_price(&spec, &self.lattice, &self.model)?.at_spot()
            }
            (Instrument::VulnerableCall, Engine::Mc) => {
                let payoff = McPayoff::VulnerableCall {
                    spot: self.option.spot,
                    strike: self.option.strike,
                };
                mc_price(t, &payoff, &self.model, &mc)?.mean
            }
            (_, Engine::Series) => {
                price_barrier_legs(t, &self.barrier_spec()?, &self.pricer, &self.model)?
                    .knock_out
                    .at_maturity()
            }
            (_, Engine::Expm) => knock_out_expm(t, &self.barrier_spec()?, &self.model)?,
            (_, Engine::Mc) => {
                let payoff = McPayoff::KnockOut {
                    barrier: self.barrier.level,
                    payoff: self.barrier_spec()?.payoff,
                };
                mc_price(t, &payoff, &self.model, &mc)?.mean
            }
            (i, e) => {
                return Err(CliError::Config(format!(
                    "engine `{e}` does not support instrument `{}`",
                    instrument_name(i)
                )))
            }
        };
        if out.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Numeric(format!("engine `{engine}` produced a non-finite price at T={t}")));
        }
        Ok(out)
    }
}

pub fn instrument_name(i: Instrument) -> &'static str {
    match i {
        Instrument::Bond => "bond",
        Instrument::DigitalBarrier => "digital-barrier",
        Instrument::CallBarrier => "call-barrier",
        Instrument::VulnerableCall => "vulnerable-call",
    }
}

/// One row per (maturity, regime): engine prices, then `|a - b|` for every engine pair.
pub fn price_table(req: &PriceRequest) -> Result<Table, CliError> {
    req.check()?;
    let engines = &req.engines;
    let mut header = vec!["maturity".to_string(), "regime".to_string()];
    header.extend(engines.iter().map(|e| e.name().to_string()));
    let mut pairs = Vec::new();
    for a in 0..engines.len() {
        for b in a + 1..engines.len() {
            pairs.push((a, b));
            header.push(format!("diff_{}_{}", engines[a], engines[b]));
        }
    }
    let mut table = Table::new(header);
    table.comment("seed", req.seed);
    table.comment("instrument", instrument_name(req.instrument));
    for &t in &req.maturities {
        let prices = engines
            .iter()
            .map(|&e| req.engine_prices(e, t))
            .collect::<Result<Vec<_>, _>>()?;
        for i in 0..req.model.n_regimes() {
            let mut row = vec![t.to_string(), (i + 1).to_string()];
            row.extend(prices.iter().map(|p| fmt_price(p[i])));
            row.extend(pairs.iter().map(|&(a, b)| fmt_diff((prices[a][i] - prices[b][i]).abs())));
            table.push(row);
        }
    }
    Ok(table)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

pub struct ConvergeRequest {
    pub model: RegimeModel,
    pub maturity: f64,
    pub terms: usize,
    pub exact_terms: Option<usize>,
    pub frozen: bool,
    pub steps: Vec<usize>,
}

/// Bond error against the reference engine for each step count, with the
/// fitted log-log slope in a `# slope=` line.
pub fn converge_table(req: &ConvergeRequest) -> Result<(Table, f64), CliError> {
    if req.steps.len() < 2 {
        return Err(CliError::Config("converge needs at least two step counts".into()));
    }
    let n = req.model.n_regimes();
    let ones = PayoffVector::ones(n);
    let t = req.maturity;
    let reference = if req.model.generator().is_constant() {
        expm_price(t, &ones, &req.model)?
    } else {
        ode_price(t, &ones, &req.model, &OdeConfig::with_tolerances(1e-14, 1e-13))?
    };
    let mut table = Table::new(vec!["k".into(), "error".into(), "bound".into()]);
    let mut errors = Vec::new();
    for &k in &req.steps {
        let mut cfg = PricerConfig::new(req.terms, Steps::Count(k));
        if let Some(e) = req.exact_terms {
            cfg = cfg.with_exact_terms(e);
        }
        if req.frozen {
            cfg = cfg.with_generator_mode(GeneratorMode::FrozenPerStep);
        }
        let s = price_claim(t, &ones, &cfg, &req.model)?.at_maturity();
        let err = (0..n).map(|i| (s[i] - reference[i]).abs()).fold(0.0, f64::max);
        let bound = vulnprice::series::error_bound(&cfg, t, &ones, 0.0, usize::from(req.frozen))?;
        errors.push(err);
        table.push(vec![k.to_string(), fmt_diff(err), fmt_diff(bound)]);
    }
    if errors.iter().any(|e| !(*e > 0.0)) {
        return Err(CliError::Numeric("zero error: slope undefined".into()));
    }
    let ks: Vec<f64> = req.steps.iter().map(|&k| k as f64).collect();
    let slope = log_log_slope(&ks, &errors);
    table.comment("maturity", t);
    table.comment("terms", req.terms);
    table.comment("slope", format!("{slope:.4}"));
    Ok((table, slope))
}

pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Invariant suite over a model: generator validity, bond bounds and
/// monotonicity, cross-engine agreement and barrier parity.
pub fn validate_model(model: &RegimeModel, horizon: f64) -> Result<Vec<Check>, CliError> {
    let mut checks = Vec::new();
    let gen_ok = validate_generator(model.generator(), horizon);
    checks.push(Check {
        name: "generator",
        passed: gen_ok.is_ok(),
        detail: gen_ok.err().map(|r| r.to_string()).unwrap_or_default(),
    });
    if !checks[0].passed {
        return Ok(checks);
    }
    let n = model.n_regimes();
    let ones = PayoffVector::ones(n);
    let grid: Vec<f64> = (1..=8).map(|i| horizon * i as f64 / 8.0).collect();
    let series_cfg = PricerConfig::new(5, Steps::Width(0.25));
    let mut prev = vec![1.0; n];
    let (mut bounded, mut monotone, mut worst) = (true, true, 0.0f64);
    for &t in &grid {
        let s = price_claim(t, &ones, &series_cfg, model)?.at_maturity();
        let o = ode_price(t, &ones, model, &OdeConfig::default())?;
        for i in 0..n {
            bounded &= s[i] > 0.0 && s[i] <= 1.0 + 1e-12;
            monotone &= s[i] <= prev[i] + 1e-12;
            worst = worst.max((s[i] - o[i]).abs());
        }
        prev = s;
    }
    checks.push(Check {
        name: "bond-in-unit-interval",
        passed: bounded,
        detail: String::new(),
    });
    checks.push(Check {
        name: "bond-nonincreasing-in-maturity",
        passed: monotone,
        detail: String::new(),
    });
    checks.push(Check {
        name: "series-vs-ode",
        passed: worst <= 1e-4,
        detail: format!("max |series - ode| = {worst:.3e}"),
    });
    if model.generator().is_constant() {
        let mut worst = 0.0f64;
        for &t in &grid {
            let e = expm_price(t, &ones, model)?;
            let o = ode_price(t, &ones, model, &OdeConfig::default())?;
            worst = (0..n).map(|i| (e[i] - o[i]).abs()).fold(worst, f64::max);
        }
        checks.push(Check {
            name: "ode-vs-expm",
            passed: worst <= 1e-7,
            detail: format!("max |ode - expm| = {worst:.3e}"),
        });
    }
    let vols = model.vols();
    let level = vols.iter().copied().fold(0.0, f64::max);
    let spec = BarrierSpec::digital(level, BarrierDirection::KnockOut, n)?;
    let legs = price_barrier_legs(horizon, &spec, &series_cfg, model)?;
    let (ko, ki, plain) = (legs.knock_out.at_maturity(), legs.knock_in.at_maturity(), legs.plain.at_maturity());
    let parity = (0..n).map(|i| (ko[i] + ki[i] - plain[i]).abs()).fold(0.0, f64::max);
    let ordered = (0..n).all(|i| ko[i] >= -1e-12 && ko[i] <= plain[i] + 1e-12);
    checks.push(Check {
        name: "barrier-parity",
        passed: parity <= 1e-12 && ordered,
        detail: format!("max |out + in - plain| = {parity:.3e}"),
    });
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let x = [2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-1.5)).collect();
        assert!((log_log_slope(&x, &y) + 1.5).abs() < 1e-12);
    }
}
