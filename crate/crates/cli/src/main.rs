//! `collat` command-line driver.
//!
//! Subcommands: `bootstrap` (curve calibration), `price` (clean valuation),
//! `experiment` (Monte Carlo / PDE studies). Logs go to standard error;
//! data goes to files (or stdout for `price`).
//!
//! Exit codes: 0 on success, 2 for malformed input files (message carries
//! the line number), 1 for calibration or runtime failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use collat_cli::config::{self, resolve_run};
use collat_cli::experiments;
use collat_cli::io;
use collat_core::dynamics::{FittedModel, SimulationConfig};

#[derive(Parser)]
#[command(
    name = "collat",
    about = "Pricing of collateralized derivatives under asymmetric/imperfect CSA terms",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunFlags {
    /// Market definition (TOML). Its optional [run] table overrides these flags.
    #[arg(long)]
    market: PathBuf,
    /// Monte Carlo path count.
    #[arg(long, default_value_t = 50_000)]
    paths: usize,
    /// Simulation steps per year.
    #[arg(long, default_value_t = 52)]
    steps_per_year: u32,
    /// RNG seed; identical (config, seed) runs produce identical outputs.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Spread-volatility sweep in basis points.
    #[arg(long, value_delimiter = ',', default_values_t = vec![25.0, 50.0, 75.0, 100.0, 150.0, 200.0])]
    sweep_bp: Vec<f64>,
    /// Worker threads (0 = machine cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Bootstrap curves from the market file's quote CSVs and write pillar
    /// curves plus a repricing report.
    Bootstrap {
        /// Market definition (TOML) referencing quote CSVs.
        #[arg(long)]
        market: PathBuf,
        /// Output directory for the curve CSVs.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Price an instrument spec (JSON) off the market curves.
    Price {
        #[arg(long)]
        market: PathBuf,
        /// Instrument spec JSON.
        #[arg(long)]
        instrument: PathBuf,
    },
    /// Run a named study: mtmccois-cca, ois-cca, pde-compare, netting-check.
    Experiment {
        name: String,
        #[command(flatten)]
        flags: RunFlags,
        /// Also dump the simulated paths of the base model to this CSV
        /// (large; use small --paths).
        #[arg(long)]
        dump_paths: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            // malformed input files carry a line number; use exit code 2
            let msg = format!("{e:#}");
            if e.downcast_ref::<io::FileError>().is_some()
                || msg.contains("parsing market file")
                || msg.contains("parsing instrument file")
            {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Bootstrap { market, out } => {
            let loaded = config::load_market(&market)?;
            std::fs::create_dir_all(&out)?;
            let model = &loaded.model;
            let dom_path = out.join(format!("{}_collateral.csv", model.domestic));
            let for_path = out.join(format!("{}_collateral.csv", model.foreign));
            let pair_path = out.join(format!("{}{}_spread.csv", model.domestic, model.foreign));
            io::write_curve_csv(&dom_path, model.collateral_curve(&model.domestic.clone()).unwrap())?;
            io::write_curve_csv(&for_path, model.collateral_curve(&model.foreign.clone()).unwrap())?;
            let pair = model.simulated_spread_curve();
            let pillars: Vec<(f64, f64)> = pair.pillars().collect();
            let pair_ts = collat_core::curves::TermStructure::new(&pillars)
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            io::write_curve_csv(&pair_path, &pair_ts)?;
            for (label, worst) in config::repricing_report(&loaded)? {
                eprintln!("bootstrap repricing: {label}: max par error {worst:.3e}");
            }
            eprintln!(
                "wrote {}, {}, {}",
                dom_path.display(),
                for_path.display(),
                pair_path.display()
            );
            Ok(())
        }
        Command::Price { market, instrument } => {
            let loaded = config::load_market(&market)?;
            let inst = config::load_instrument(&instrument, &loaded.model)?;
            print!("{}", experiments::price_instrument(&loaded.model, &inst)?);
            Ok(())
        }
        Command::Experiment { name, flags, dump_paths } => {
            let loaded = config::load_market(&flags.market)?;
            let cfg = resolve_run(
                &loaded,
                flags.paths,
                flags.steps_per_year,
                flags.seed,
                &flags.sweep_bp,
                flags.threads,
                flags.out.clone(),
            );
            cfg.validate()?;
            if cfg.threads > 0 {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(cfg.threads)
                    .build_global()
                    .ok();
            }
            if let Some(dump) = dump_paths {
                let sigma = cfg.sweep.first().copied().unwrap_or(0.005);
                let mut model = cfg.model.clone();
                model.hw_spread = collat_core::market::HullWhiteParams::new(
                    model.hw_spread.kappa,
                    sigma,
                )
                .map_err(|e| anyhow::anyhow!("{e}"))?;
                let sim = SimulationConfig::new(cfg.n_paths, cfg.steps_per_year, 10.0, cfg.seed);
                let fitted = FittedModel::fit(&model, &sim).map_err(|e| anyhow::anyhow!("{e}"))?;
                io::dump_paths_csv(&dump, &fitted, cfg.n_paths, cfg.seed)?;
                eprintln!("dumped {} paths to {}", cfg.n_paths, dump.display());
            }
            let written = experiments::run_experiment(&name, &cfg)?;
            for p in written {
                eprintln!("wrote {}", p.display());
            }
            Ok(())
        }
    }
}
