//! Model and run files.
//!
//! Both are TOML. A run file names its model file relative to itself, and
//! command-line flags override anything it sets.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::Deserialize;
use vulnprice::model::TimeVaryingGenerator;
use vulnprice::series::{GeneratorMode, LaplaceMode, PricerConfig, Steps};
use vulnprice::{fixtures, Generator, RegimeModel};

use crate::CliError;

/// Table 1 market shipped with the binary; used when no model is given.
pub const TABLE1_MODEL: &str = include_str!("../fixtures/table1.toml");

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub short_rates: Vec<f64>,
    pub hazards: Vec<f64>,
    pub losses: Vec<f64>,
    pub vols: Vec<f64>,
    #[serde(default)]
    pub drifts: Option<Vec<f64>>,
    #[serde(default)]
    pub epsilon_floor: Option<f64>,
    pub generator: GeneratorFile,
}

/// Either `rows` for a constant generator or the four sinusoid blocks.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorFile {
    pub rows: Option<Vec<Vec<f64>>>,
    pub base: Option<Vec<Vec<f64>>>,
    pub amplitude: Option<Vec<Vec<f64>>>,
    pub frequency: Option<Vec<Vec<f64>>>,
    pub phase: Option<Vec<Vec<f64>>>,
}

fn block(name: &str, rows: &[Vec<f64>], n: usize) -> Result<DMatrix<f64>, CliError> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Config(format!("generator.{name} must be {n}x{n}")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl GeneratorFile {
    fn build(&self, n: usize) -> Result<Generator, CliError> {
        match (&self.rows, &self.base) {
            (Some(rows), None) => {
                if self.amplitude.is_some() || self.frequency.is_some() || self.phase.is_some() {
                    return Err(CliError::Config("generator.rows cannot be mixed with sinusoid blocks".into()));
                }
                Ok(Generator::Constant(block("rows", rows, n)?))
            }
            (None, Some(base)) => {
                let zeros = vec![vec![0.0; n]; n];
                let ones = vec![vec![1.0; n]; n];
                let g = TimeVaryingGenerator::sinusoidal(
                    block("base", base, n)?,
                    block("amplitude", self.amplitude.as_ref().unwrap_or(&zeros), n)?,
                    block("frequency", self.frequency.as_ref().unwrap_or(&ones), n)?,
                    block("phase", self.phase.as_ref().unwrap_or(&zeros), n)?,
                )?;
                Ok(Generator::TimeVarying(g))
            }
            _ => Err(CliError::Config(
                "generator needs exactly one of `rows` or `base`".into(),
            )),
        }
    }
}

impl ModelFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("model file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn build(&self) -> Result<RegimeModel, CliError> {
        let n = self.short_rates.len();
        let generator = self.generator.build(n)?;
        let drifts = self.drifts.clone().unwrap_or_else(|| self.short_rates.clone());
        let model = RegimeModel::new(
            self.short_rates.clone(),
            self.hazards.clone(),
            self.losses.clone(),
            self.vols.clone(),
            drifts,
            generator,
        )?;
        Ok(match self.epsilon_floor {
            Some(eps) => model.with_epsilon_floor(eps),
            None => model,
        })
    }
}

/// Loads `path`, or the bundled Table 1 market when `None`.
pub fn load_model(path: Option<&Path>) -> Result<RegimeModel, CliError> {
    match path {
        Some(p) => ModelFile::load(p)?.build(),
        None => ModelFile::parse(TABLE1_MODEL)?.build(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Instrument {
    Bond,
    DigitalBarrier,
    CallBarrier,
    VulnerableCall,
}

impl FromStr for Instrument {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "bond" => Ok(Self::Bond),
            "digital-barrier" => Ok(Self::DigitalBarrier),
            "call-barrier" => Ok(Self::CallBarrier),
            "vulnerable-call" => Ok(Self::VulnerableCall),
            _ => Err(CliError::Config(format!("unknown instrument `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Series,
    Ode,
    Expm,
    Mc,
}

impl Engine {
    pub const ALL: [Engine; 4] = [Engine::Series, Engine::Ode, Engine::Expm, Engine::Mc];

    pub fn name(self) -> &'static str {
        match self {
            Engine::Series => "series",
            Engine::Ode => "ode",
            Engine::Expm => "expm",
            Engine::Mc => "mc",
        }
    }

    pub fn supports(self, instrument: Instrument) -> bool {
        match instrument {
            Instrument::Bond => true,
            Instrument::DigitalBarrier | Instrument::CallBarrier => self != Engine::Ode,
            Instrument::VulnerableCall => matches!(self, Engine::Series | Engine::Mc),
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parses `series,ode` or `all`.
pub fn parse_engines(list: &[String]) -> Result<Vec<Engine>, CliError> {
    let mut out = Vec::new();
    for item in list.iter().flat_map(|s| s.split(',')).map(str::trim).filter(|s| !s.is_empty()) {
        match item {
            "all" => out.extend(Engine::ALL),
            "series" => out.push(Engine::Series),
            "ode" => out.push(Engine::Ode),
            "expm" => out.push(Engine::Expm),
            "mc" => out.push(Engine::Mc),
            _ => return Err(CliError::Config(format!("unknown engine `{item}`"))),
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PricerBlock {
    pub terms: Option<usize>,
    pub steps: Option<usize>,
    pub step_width: Option<f64>,
    /// Taylor order for `m >= 2` terms; exact kernel when absent.
    pub taylor_order: Option<usize>,
    pub exact_terms: Option<usize>,
    #[serde(default)]
    pub frozen: bool,
}

impl PricerBlock {
    pub fn build(&self) -> Result<PricerConfig, CliError> {
        let steps = match (self.steps, self.step_width) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config("set either pricer.steps or pricer.step_width".into()))
            }
            (Some(k), None) => Steps::Count(k),
            (None, Some(w)) => Steps::Width(w),
            (None, None) => PricerConfig::default().steps,
        };
        let mut cfg = PricerConfig::new(self.terms.unwrap_or(PricerConfig::default().terms), steps);
        if let Some(p) = self.taylor_order {
            cfg = cfg.with_laplace(LaplaceMode::Taylor(p));
        }
        if let Some(e) = self.exact_terms {
            cfg = cfg.with_exact_terms(e);
        }
        if self.frozen {
            cfg = cfg.with_generator_mode(GeneratorMode::FrozenPerStep);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierBlock {
    pub level: f64,
    #[serde(default)]
    pub strike: f64,
}

impl Default for BarrierBlock {
    fn default() -> Self {
        Self {
            level: fixtures::BARRIER_LEVEL,
            strike: fixtures::BARRIER_STRIKE,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionBlock {
    pub spot: f64,
    pub strike: f64,
}

impl Default for OptionBlock {
    fn default() -> Self {
        Self { spot: 1.0, strike: 1.0 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeBlock {
    pub steps: Option<usize>,
    pub spacing: Option<f64>,
    pub half_width: Option<usize>,
    pub terms: Option<usize>,
    pub substeps: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McBlock {
    pub paths: Option<usize>,
    #[serde(default)]
    pub antithetic: bool,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdeBlock {
    pub abs_tol: Option<f64>,
    pub rel_tol: Option<f64>,
}

/// Contents of a run file. Every field may also come from a flag.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub model: Option<PathBuf>,
    pub instrument: Option<Instrument>,
    pub engines: Option<Vec<String>>,
    pub maturities: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub pricer: PricerBlock,
    pub barrier: Option<BarrierBlock>,
    pub option: Option<OptionBlock>,
    #[serde(default)]
    pub lattice: LatticeBlock,
    #[serde(default)]
    pub mc: McBlock,
    #[serde(default)]
    pub ode: OdeBlock,
}

impl RunFile {
    /// Reads a run file; a relative `model` path is resolved against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut run: RunFile =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("run file: {e}")))?;
        if let Some(m) = &run.model {
            if m.is_relative() {
                let dir = path.parent().unwrap_or(Path::new("."));
                run.model = Some(dir.join(m));
            }
        }
        Ok(run)
    }
}
