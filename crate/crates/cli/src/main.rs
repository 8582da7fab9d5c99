use std::fs::File;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use vulnprice::reference::{McConfig, OdeConfig};
use vulnprice::vulnerable::LatticeConfig;
use vulnprice_cli::config::{load_model, parse_engines, Instrument, RunFile};
use vulnprice_cli::run::{converge_table, price_table, validate_model, ConvergeRequest, PriceRequest};
use vulnprice_cli::table::Table;
use vulnprice_cli::{bench, CliError};

/// Regime-switching pricer for defaultable bonds, volatility barriers and vulnerable calls.
#[derive(Parser)]
#[command(name = "vulnprice", version)]
struct Cli {
    /// Model file (TOML); the bundled three-regime market when omitted.
    #[arg(long, global = true)]
    model: Option<PathBuf>,

    /// Write CSV here instead of stdout.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Price an instrument with one or more engines.
    Price(PriceArgs),
    /// Time the series pricer against the ODE and expm engines.
    Bench {
        #[arg(long, value_enum, default_value = "appendix-c")]
        grid: Grid,
        /// Repetitions per cell; the fastest is kept.
        #[arg(long, default_value_t = 3)]
        reps: usize,
    },
    /// Bond error against the reference engine as the step count grows.
    Converge {
        #[arg(long = "T", default_value_t = 1.0)]
        maturity: f64,
        #[arg(long, default_value_t = 2)]
        terms: usize,
        #[arg(long)]
        exact_terms: Option<usize>,
        /// Freeze the generator at the start of each step.
        #[arg(long)]
        frozen: bool,
        #[arg(long, value_delimiter = ',', default_value = "2,4,8,16,32")]
        steps: Vec<usize>,
    },
    /// Run the invariant suite over a model.
    Validate {
        #[arg(long, default_value_t = 10.0)]
        horizon: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Grid {
    AppendixC,
}

#[derive(clap::Args)]
struct PriceArgs {
    /// Run file (TOML); flags override its settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// bond, digital-barrier, call-barrier or vulnerable-call.
    #[arg(long)]
    instrument: Option<String>,
    /// Comma-separated: series, ode, expm, mc or all.
    #[arg(long, value_delimiter = ',')]
    engines: Vec<String>,
    /// Maturities in years, comma-separated.
    #[arg(long = "T", value_delimiter = ',')]
    maturities: Vec<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Poisson series truncation M.
    #[arg(long)]
    terms: Option<usize>,
    #[arg(long)]
    step_width: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    barrier: Option<f64>,
    #[arg(long)]
    strike: Option<f64>,
    #[arg(long)]
    spot: Option<f64>,
    #[arg(long)]
    lattice_steps: Option<usize>,
}

fn price_request(args: PriceArgs, model_flag: Option<PathBuf>) -> Result<(PriceRequest, Option<PathBuf>), CliError> {
    let run = match &args.config {
        Some(p) => RunFile::load(p)?,
        None => RunFile::default(),
    };
    let model = load_model(model_flag.or(run.model.clone()).as_deref())?;
    let instrument = match args.instrument {
        Some(s) => s.parse()?,
        None => run.instrument.unwrap_or(Instrument::Bond),
    };
    let engines = if args.engines.is_empty() {
        parse_engines(run.engines.as_deref().unwrap_or(&["series".to_string()]))?
    } else {
        parse_engines(&args.engines)?
    };
    let maturities = if args.maturities.is_empty() {
        run.maturities.clone().unwrap_or_default()
    } else {
        args.maturities
    };

    let mut pricer_block = run.pricer.clone();
    if args.terms.is_some() {
        pricer_block.terms = args.terms;
    }
    if args.steps.is_some() || args.step_width.is_some() {
        pricer_block.steps = args.steps;
        pricer_block.step_width = args.step_width;
    }
    let pricer = pricer_block.build()?;

    let mut barrier = run.barrier.clone().unwrap_or_default();
    if let Some(b) = args.barrier {
        barrier.level = b;
    }
    let mut option = run.option.clone().unwrap_or_default();
    if let Some(k) = args.strike {
        barrier.strike = k;
        option.strike = k;
    }
    if let Some(s) = args.spot {
        option.spot = s;
    }

    let mut lattice = LatticeConfig::default();
    let lb = &run.lattice;
    lattice.steps = args.lattice_steps.or(lb.steps).unwrap_or(lattice.steps);
    lattice.spacing = lb.spacing;
    lattice.half_width = lb.half_width;
    if let Some(m) = lb.terms {
        lattice.pricer.terms = m;
    }
    if let Some(k) = lb.substeps {
        lattice.pricer.steps = vulnprice::series::Steps::Count(k);
    }

    let seed = args.seed.or(run.seed).unwrap_or(McConfig::default().seed);
    let mut mc = McConfig::new(args.paths.or(run.mc.paths).unwrap_or(McConfig::default().n_paths), seed);
    mc.antithetic = run.mc.antithetic;
    let mut ode = OdeConfig::default();
    if let Some(a) = run.ode.abs_tol {
        ode.abs_tol = a;
    }
    if let Some(r) = run.ode.rel_tol {
        ode.rel_tol = r;
    }
    let req = PriceRequest {
        model,
        instrument,
        engines,
        maturities,
        seed,
        pricer,
        barrier,
        option,
        lattice,
        mc,
        ode,
    };
    Ok((req, run.output))
}

fn emit(table: &Table, path: Option<PathBuf>) -> Result<(), CliError> {
    match path {
        Some(p) => {
            let f = File::create(&p).map_err(|e| CliError::Config(format!("cannot create {}: {e}", p.display())))?;
            table.write(f)
        }
        None => table.write(std::io::stdout().lock()),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Price(args) => {
            let (req, run_output) = price_request(args, cli.model)?;
            let table = price_table(&req)?;
            emit(&table, cli.output.or(run_output))
        }
        Command::Bench { grid: Grid::AppendixC, reps } => {
            let model = load_model(cli.model.as_deref())?;
            emit(&bench::appendix_c(&model, reps)?, cli.output)
        }
        Command::Converge {
            maturity,
            terms,
            exact_terms,
            frozen,
            steps,
        } => {
            let req = ConvergeRequest {
                model: load_model(cli.model.as_deref())?,
                maturity,
                terms,
                exact_terms,
                frozen,
                steps,
            };
            let (table, slope) = converge_table(&req)?;
            eprintln!("log-log slope: {slope:.4}");
            emit(&table, cli.output)
        }
        Command::Validate { horizon } => {
            let model = load_model(cli.model.as_deref())?;
            let checks = validate_model(&model, horizon)?;
            let mut out = std::io::stdout().lock();
            for c in &checks {
                let tag = if c.passed { "PASS" } else { "FAIL" };
                writeln!(out, "{tag} {} {}", c.name, c.detail).map_err(|e| CliError::Config(e.to_string()))?;
            }
            if checks.iter().all(|c| c.passed) {
                Ok(())
            } else {
                Err(CliError::Numeric("invariant checks failed".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
