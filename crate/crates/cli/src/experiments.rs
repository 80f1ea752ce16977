//! Experiment harness: the numerical studies as reproducible batch runs.
//!
//! Each experiment writes plot-ready CSVs into the output directory and
//! logs progress to standard error. Monte Carlo passes are parallelized
//! over path blocks with rayon; partial sums merge in block order, so
//! results are identical for any thread count.


use anyhow::{anyhow, Context, Result};
use rayon::prelude::*;

use collat_core::adjustments::{
    netting_inequality_check, AdjustmentEngine, Benchmark, BlockAccum, CollateralTerms, Estimates,
};
use collat_core::dynamics::{FittedModel, Paths, SimulationConfig};
use collat_core::instruments::{
    mtmccois_par_spread, mtmccois_value, ois_par_rate, ois_value, CollateralConvention, FixedSide,
    MtmccoisPathValuer, MtmccoisSpec, OisPathValuer, OisSpec, Schedule, SpreadSide,
};
use collat_core::market::{HullWhiteParams, MarketModel};
use collat_core::pde::{self, CompareConfig, CouponLeg, PdeGrid};

use crate::config::RunConfig;
use crate::io::{self, NettingCsvRow, PdeCompareCsvRow, ResultRow};

/// Parallel pass over all blocks with deterministic block-order reduction.
pub fn run_engine_parallel(engine: &AdjustmentEngine<'_>, paths: &dyn Paths) -> Estimates {
    let partials: Vec<BlockAccum> = (0..paths.n_blocks())
        .into_par_iter()
        .map(|b| engine.block_partial(paths, b))
        .collect();
    partials
        .into_iter()
        .fold(BlockAccum::default(), BlockAccum::merge)
        .finalize()
}

fn with_spread_vol(model: &MarketModel, sigma_y: f64) -> Result<MarketModel> {
    let mut m = model.clone();
    m.hw_spread = HullWhiteParams::new(model.hw_spread.kappa, sigma_y)
        .map_err(|e| anyhow!("{e}"))?;
    Ok(m)
}

fn with_domestic_vol(model: &MarketModel, sigma_c: f64) -> Result<MarketModel> {
    let mut m = model.clone();
    m.hw_domestic = HullWhiteParams::new(model.hw_domestic.kappa, sigma_c)
        .map_err(|e| anyhow!("{e}"))?;
    Ok(m)
}

fn side_label_spread(side: SpreadSide) -> &'static str {
    match side {
        SpreadSide::Payer => "payer",
        SpreadSide::Receiver => "receiver",
    }
}

fn side_label_fixed(side: FixedSide) -> &'static str {
    match side {
        FixedSide::Payer => "payer",
        FixedSide::Receiver => "receiver",
    }
}

/// Asymmetric-collateral MtMCCOIS study: CCA by spread volatility for the
/// 10y and 20y par swaps, both sides. Party 1 may post either currency,
/// party 2 only the foreign one.
pub fn mtmccois_cca(cfg: &RunConfig) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for tenor in [10.0, 20.0] {
        let sched = Schedule::regular(tenor, 4).map_err(|e| anyhow!("{e}"))?;
        for &sigma in &cfg.sweep {
            let model = with_spread_vol(&cfg.model, sigma)?;
            let sim = SimulationConfig::new(cfg.n_paths, cfg.steps_per_year, tenor, cfg.seed);
            let fitted = FittedModel::fit(&model, &sim).map_err(|e| anyhow!("{e}"))?;
            let paths = fitted.lazy_paths(sim.n_paths, sim.seed);
            let b = mtmccois_par_spread(&model, &model.domestic, &model.foreign, &sched)
                .map_err(|e| anyhow!("{e}"))?;
            for side in [SpreadSide::Payer, SpreadSide::Receiver] {
                let spec = MtmccoisSpec {
                    domestic: model.domestic.clone(),
                    foreign: model.foreign.clone(),
                    schedule: sched.clone(),
                    basis_spread: b,
                    side,
                    collateral: CollateralConvention::Foreign(model.foreign.clone()),
                };
                let clean = mtmccois_value(&model, &spec).map_err(|e| anyhow!("{e}"))?.value;
                let valuer =
                    MtmccoisPathValuer::new(&model, &fitted, &spec).map_err(|e| anyhow!("{e}"))?;
                let terms = CollateralTerms::asymmetric_ctd(
                    vec![model.domestic.clone(), model.foreign.clone()],
                    model.foreign.clone(),
                );
                let engine = AdjustmentEngine::new(
                    &model,
                    &fitted,
                    &valuer,
                    &terms,
                    Benchmark::ForeignCollateral,
                )
                .map_err(|e| anyhow!("{e}"))?;
                let est = run_engine_parallel(&engine, &paths);
                eprintln!(
                    "mtmccois-cca {tenor}y sigma_y={:.0}bp {}: cca {:.3}bp (se {:.3}bp)",
                    sigma * 1e4,
                    side_label_spread(side),
                    est.cca.value * 1e4,
                    est.cca.stderr * 1e4
                );
                rows.push(ResultRow {
                    experiment: format!("mtmccois-cca-{tenor:.0}y"),
                    sigma_y_bp: sigma * 1e4,
                    side: side_label_spread(side),
                    clean,
                    cca: est.cca.value,
                    cva: est.cva.value,
                    stderr_cca: est.cca.stderr,
                    stderr_cva: est.cva.stderr,
                });
            }
        }
    }
    Ok(rows)
}

/// Asymmetric-collateral OIS study: CCA by spread volatility (10y, 20y)
/// plus the domestic-rate-volatility sweep at fixed σ_y = 75bp (20y).
/// Party 1 may post either currency, party 2 only the domestic one.
pub fn ois_cca(cfg: &RunConfig) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    let run_one = |model: &MarketModel,
                       tenor: f64,
                       experiment: String,
                       sigma_y_bp: f64,
                       rows: &mut Vec<ResultRow>|
     -> Result<()> {
        let sched = Schedule::regular(tenor, 1).map_err(|e| anyhow!("{e}"))?;
        let sim = SimulationConfig::new(cfg.n_paths, cfg.steps_per_year, tenor, cfg.seed);
        let fitted = FittedModel::fit(model, &sim).map_err(|e| anyhow!("{e}"))?;
        let paths = fitted.lazy_paths(sim.n_paths, sim.seed);
        let par = ois_par_rate(model, &model.domestic, &sched, &CollateralConvention::DealCurrency)
            .map_err(|e| anyhow!("{e}"))?;
        for side in [FixedSide::Payer, FixedSide::Receiver] {
            let spec = OisSpec {
                currency: model.domestic.clone(),
                schedule: sched.clone(),
                fixed_rate: par,
                side,
                collateral: CollateralConvention::DealCurrency,
            };
            let clean = ois_value(model, &spec).map_err(|e| anyhow!("{e}"))?.value;
            let valuer = OisPathValuer::new(model, &fitted, &spec).map_err(|e| anyhow!("{e}"))?;
            let terms = CollateralTerms::asymmetric_ctd(
                vec![model.domestic.clone(), model.foreign.clone()],
                model.domestic.clone(),
            );
            let engine =
                AdjustmentEngine::new(model, &fitted, &valuer, &terms, Benchmark::DomesticOis)
                    .map_err(|e| anyhow!("{e}"))?;
            let est = run_engine_parallel(&engine, &paths);
            eprintln!(
                "{experiment} sigma_y={sigma_y_bp:.0}bp {}: cca {:.3}bp (se {:.3}bp)",
                side_label_fixed(side),
                est.cca.value * 1e4,
                est.cca.stderr * 1e4
            );
            rows.push(ResultRow {
                experiment: experiment.clone(),
                sigma_y_bp,
                side: side_label_fixed(side),
                clean,
                cca: est.cca.value,
                cva: est.cva.value,
                stderr_cca: est.cca.stderr,
                stderr_cva: est.cva.stderr,
            });
        }
        Ok(())
    };

    for tenor in [10.0, 20.0] {
        for &sigma in &cfg.sweep {
            let model = with_spread_vol(&cfg.model, sigma)?;
            run_one(&model, tenor, format!("ois-cca-{tenor:.0}y"), sigma * 1e4, &mut rows)?;
        }
    }
    // domestic-rate volatility sweep at fixed sigma_y = 75bp, 20y swap
    let fixed_sigma_y = 0.0075;
    for sigma_c_bp in [25.0f64, 50.0, 75.0, 100.0, 125.0, 150.0] {
        let model = with_domestic_vol(&with_spread_vol(&cfg.model, fixed_sigma_y)?, sigma_c_bp * 1e-4)?;
        run_one(
            &model,
            20.0,
            format!("ois-cca-20y-sigmac-{sigma_c_bp:.0}bp"),
            fixed_sigma_y * 1e4,
            &mut rows,
        )?;
    }
    Ok(rows)
}

/// PDE-vs-Gateaux comparison for the continuous-coupon 10y swap, both
/// sides, across the spread-volatility sweep.
pub fn pde_compare(cfg: &RunConfig) -> Result<Vec<PdeCompareCsvRow>> {
    let compare = CompareConfig {
        n_paths: cfg.n_paths,
        steps_per_year: cfg.steps_per_year,
        seed: cfg.seed,
        ..Default::default()
    };
    let mut rows = Vec::new();
    for side in [SpreadSide::Payer, SpreadSide::Receiver] {
        let report = pde::gateaux_vs_pde_report(&cfg.model, 10.0, side, &cfg.sweep, &compare)
            .map_err(|e| anyhow!("{e}"))?;
        for r in report {
            eprintln!(
                "pde-compare sigma_y={:.0}bp {}: pde-clean {:.3}bp gateaux {:.3}bp disc {:.3}bp",
                r.sigma_y * 1e4,
                side_label_spread(side),
                r.pde_minus_clean * 1e4,
                r.gateaux * 1e4,
                r.discrepancy * 1e4
            );
            rows.push(PdeCompareCsvRow {
                sigma_y_bp: r.sigma_y * 1e4,
                side: side_label_spread(side),
                pde_minus_clean: r.pde_minus_clean,
                gateaux: r.gateaux,
                discrepancy_bp: r.discrepancy * 1e4,
            });
        }
    }
    Ok(rows)
}

/// Netting-inequality study: randomized continuous-coupon pairs priced
/// with the nonlinear PDE under `y¹ ≥ y²`.
pub fn netting_check(cfg: &RunConfig, trials: usize) -> Result<Vec<NettingCsvRow>> {
    let sigma = cfg.sweep.last().copied().unwrap_or(0.0075).max(1e-4);
    let model = with_spread_vol(&cfg.model, sigma)?;
    // deterministic trial parameters from the seed via a tiny LCG
    let mut state = cfg.seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next_unit = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 11) as f64) / ((1u64 << 53) as f64)
    };
    let mut rows = Vec::new();
    for trial in 0..trials {
        let leg = |u: (f64, f64, f64)| CouponLeg {
            weight_y: -1.0 + 2.0 * u.0,
            constant: -0.004 + 0.008 * u.1,
            maturity: (2.0 + (10.0 * u.2).round()).min(12.0),
        };
        let a = leg((next_unit(), next_unit(), next_unit()));
        let b = leg((next_unit(), next_unit(), next_unit()));
        let horizon = a.maturity.max(b.maturity);
        let grid = PdeGrid::default_for(&model, horizon, 6.0, 400, (horizon * 60.0) as usize)
            .map_err(|e| anyhow!("{e}"))?;
        let report =
            netting_inequality_check(&model, &a, &b, &grid).map_err(|e| anyhow!("{e}"))?;
        eprintln!(
            "netting trial {trial}: gap {:+.3e} (err {:.1e}) holds={}",
            report.gap, report.err, report.holds
        );
        rows.push(NettingCsvRow {
            trial,
            weight_a: a.weight_y,
            const_a: a.constant,
            maturity_a: a.maturity,
            weight_b: b.weight_y,
            const_b: b.constant,
            maturity_b: b.maturity,
            v_combined: report.v_combined,
            v_a: report.v_a,
            v_b: report.v_b,
            gap: report.gap,
            err: report.err,
            holds: report.holds,
        });
    }
    Ok(rows)
}

/// Runs one named experiment and writes its outputs under `cfg.out_dir`.
pub fn run_experiment(name: &str, cfg: &RunConfig) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    let out = |file: &str| cfg.out_dir.join(file);
    let written = match name {
        "mtmccois-cca" => {
            let rows = mtmccois_cca(cfg)?;
            let p = out("mtmccois_cca.csv");
            io::write_results_csv(&p, &rows)?;
            vec![p]
        }
        "ois-cca" => {
            let rows = ois_cca(cfg)?;
            let p = out("ois_cca.csv");
            io::write_results_csv(&p, &rows)?;
            vec![p]
        }
        "pde-compare" => {
            let rows = pde_compare(cfg)?;
            let p = out("pde_compare.csv");
            io::write_pde_csv(&p, &rows)?;
            vec![p]
        }
        "netting-check" => {
            let rows = netting_check(cfg, 20)?;
            let p = out("netting_check.csv");
            io::write_netting_csv(&p, &rows)?;
            vec![p]
        }
        other => {
            anyhow::bail!(
                "unknown experiment '{other}'; expected one of \
                 mtmccois-cca, ois-cca, pde-compare, netting-check"
            )
        }
    };
    Ok(written)
}

/// Clean price and par level of a loaded instrument (the `price` command).
pub fn price_instrument(
    model: &MarketModel,
    instrument: &crate::config::Instrument,
) -> Result<String> {
    use crate::config::Instrument;
    let mut out = String::new();
    match instrument {
        Instrument::Ois(spec) => {
            let price = ois_value(model, spec).map_err(|e| anyhow!("{e}"))?;
            let par =
                ois_par_rate(model, &spec.currency, &spec.schedule, &spec.collateral)
                    .map_err(|e| anyhow!("{e}"))?;
            out.push_str(&format!(
                "ois {} {}y fixed={:.6} side={:?}\n",
                spec.currency,
                spec.schedule.maturity(),
                spec.fixed_rate,
                spec.side
            ));
            out.push_str(&format!("par_rate,{par}\nclean_value,{}\n", price.value));
        }
        Instrument::Mtmccois(spec) => {
            let price = mtmccois_value(model, spec).map_err(|e| anyhow!("{e}"))?;
            let par = mtmccois_par_spread(model, &spec.domestic, &spec.foreign, &spec.schedule)
                .map_err(|e| anyhow!("{e}"))?;
            out.push_str(&format!(
                "mtmccois {}/{} {}y spread={:.6} side={:?}\n",
                spec.domestic,
                spec.foreign,
                spec.schedule.maturity(),
                spec.basis_spread,
                spec.side
            ));
            out.push_str(&format!("par_spread,{par}\nclean_value,{}\n", price.value));
        }
    }
    Ok(out)
}

