//! Market and run configuration files.
//!
//! The market file is TOML; curve inputs are referenced as CSV files
//! relative to the TOML's directory, either as bootstrap quotes or as
//! prebuilt pillar curves. Instrument specs are small JSON files.
//!
//! Precedence: values in the market file's optional `[run]` table override
//! command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use collat_core::curves::{
    bootstrap_collateral_curve, bootstrap_spread_curve, decompose_single_currency_spreads,
    Currency, SpreadCurve,
};
use collat_core::instruments::{
    mtmccois_par_spread, ois_par_rate, CollateralConvention, FixedSide, MtmccoisSpec, OisSpec,
    Schedule, SpreadSide,
};
use collat_core::market::{CorrelationMatrix, HullWhiteParams, MarketModel};

use crate::io;

#[derive(Debug, Deserialize)]
pub struct MarketFile {
    pub market: MarketSection,
    #[serde(default)]
    pub terms: TermsSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Deserialize)]
pub struct MarketSection {
    pub domestic: String,
    pub foreign: String,
    /// Currency whose overnight rate is identified with its risk-free rate.
    #[serde(default)]
    pub anchor: Option<String>,
    pub spot_fx: f64,
    pub curves: CurvesSection,
    pub hull_white: HullWhiteSection,
    pub correlation: CorrelationSection,
}

#[derive(Debug, Deserialize)]
pub struct CurvesSection {
    /// OIS par-quote files (bootstrapped at load)...
    pub domestic_ois_quotes: Option<String>,
    pub foreign_ois_quotes: Option<String>,
    pub ccs_basis_quotes: Option<String>,
    /// ...or prebuilt pillar-curve files.
    pub domestic_collateral: Option<String>,
    pub foreign_collateral: Option<String>,
    pub pair_spread: Option<String>,
    #[serde(default = "default_ois_freq")]
    pub ois_fixed_frequency: u32,
    #[serde(default = "default_ccs_freq")]
    pub ccs_frequency: u32,
}

fn default_ois_freq() -> u32 {
    1
}

fn default_ccs_freq() -> u32 {
    4
}

#[derive(Debug, Deserialize)]
pub struct HullWhiteSection {
    pub kappa_domestic: f64,
    pub kappa_foreign: f64,
    pub kappa_spread: f64,
    pub sigma_domestic: f64,
    pub sigma_foreign: f64,
    pub sigma_spread: f64,
    pub fx_vol: f64,
}

#[derive(Debug, Deserialize)]
pub struct CorrelationSection {
    pub rho_dom_for: f64,
    pub rho_dom_fx: f64,
    pub rho_for_fx: f64,
}

/// Default credit terms for adjustment runs.
#[derive(Debug, Deserialize, Clone, Copy)]
pub struct TermsSection {
    pub hazard_party1: f64,
    pub hazard_party2: f64,
    pub recovery_party1: f64,
    pub recovery_party2: f64,
}

impl Default for TermsSection {
    fn default() -> Self {
        TermsSection {
            hazard_party1: 0.01,
            hazard_party2: 0.02,
            recovery_party1: 0.4,
            recovery_party2: 0.4,
        }
    }
}

/// Optional `[run]` table; set fields override the CLI flags.
#[derive(Debug, Deserialize, Default, Clone)]
pub struct RunSection {
    pub paths: Option<usize>,
    pub steps_per_year: Option<u32>,
    pub seed: Option<u64>,
    pub sweep_bp: Option<Vec<f64>>,
    pub threads: Option<usize>,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: MarketModel,
    pub terms: TermsSection,
    pub n_paths: usize,
    pub steps_per_year: u32,
    pub seed: u64,
    /// σ_y sweep in absolute volatility units (not bp).
    pub sweep: Vec<f64>,
    pub threads: usize,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            bail!("paths must be >= 1");
        }
        if self.sweep.iter().any(|&s| s < 0.0) {
            bail!("sweep values must be >= 0");
        }
        Ok(())
    }
}

/// Bootstrap inputs as loaded from the market file (kept for the
/// `bootstrap` subcommand's repricing report).
pub struct LoadedMarket {
    pub model: MarketModel,
    pub terms: TermsSection,
    pub run: RunSection,
    pub quotes: Option<BootstrapInputs>,
}

pub struct BootstrapInputs {
    pub domestic_ois: Vec<collat_core::curves::Quote>,
    pub foreign_ois: Vec<collat_core::curves::Quote>,
    pub ccs_basis: Vec<collat_core::curves::Quote>,
    pub ois_freq: u32,
    pub ccs_freq: u32,
}

pub fn load_market(path: &Path) -> Result<LoadedMarket> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading market file {}", path.display()))?;
    let file: MarketFile = toml::from_str(&text)
        .with_context(|| format!("parsing market file {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));

    let dom = Currency::new(&file.market.domestic).map_err(|e| anyhow::anyhow!("{e}"))?;
    let foreign = Currency::new(&file.market.foreign).map_err(|e| anyhow::anyhow!("{e}"))?;
    let anchor = match &file.market.anchor {
        Some(a) => Currency::new(a).map_err(|e| anyhow::anyhow!("{e}"))?,
        None => dom.clone(),
    };

    let c = &file.market.curves;
    let (dom_curve, for_curve, pair_curve, quotes) = if let (Some(dq), Some(fq), Some(cq)) = (
        c.domestic_ois_quotes.as_ref(),
        c.foreign_ois_quotes.as_ref(),
        c.ccs_basis_quotes.as_ref(),
    ) {
        let dq = io::read_quote_csv(&base.join(dq))?;
        let fq = io::read_quote_csv(&base.join(fq))?;
        let cq = io::read_quote_csv(&base.join(cq))?;
        let dom_curve = bootstrap_collateral_curve(&dq, c.ois_fixed_frequency)
            .map_err(|e| anyhow::anyhow!("domestic OIS bootstrap: {e}"))?;
        let for_curve = bootstrap_collateral_curve(&fq, c.ois_fixed_frequency)
            .map_err(|e| anyhow::anyhow!("foreign OIS bootstrap: {e}"))?;
        let pair = bootstrap_spread_curve(&cq, &dom_curve, &for_curve, c.ccs_frequency)
            .map_err(|e| anyhow::anyhow!("CCS spread bootstrap: {e}"))?;
        let quotes = BootstrapInputs {
            domestic_ois: dq,
            foreign_ois: fq,
            ccs_basis: cq,
            ois_freq: c.ois_fixed_frequency,
            ccs_freq: c.ccs_frequency,
        };
        (dom_curve, for_curve, pair, Some(quotes))
    } else if let (Some(dc), Some(fc), Some(pc)) = (
        c.domestic_collateral.as_ref(),
        c.foreign_collateral.as_ref(),
        c.pair_spread.as_ref(),
    ) {
        let dom_curve = io::read_curve_csv(&base.join(dc))?;
        let for_curve = io::read_curve_csv(&base.join(fc))?;
        let pair_rows = io::read_curve_csv(&base.join(pc))?;
        let pillars: Vec<(f64, f64)> = pair_rows.pillars().collect();
        let pair = SpreadCurve::new(&pillars).map_err(|e| anyhow::anyhow!("{e}"))?;
        (dom_curve, for_curve, pair, None)
    } else {
        bail!(
            "market curves need either the three *_quotes files or the three \
             pillar-curve files"
        );
    };

    // split the pair spread into per-currency curves around the anchor
    let mut pairs = BTreeMap::new();
    pairs.insert((dom.clone(), foreign.clone()), pair_curve);
    let funding = decompose_single_currency_spreads(&pairs, &anchor)
        .map_err(|e| anyhow::anyhow!("{e}"))?;

    let mut collateral = BTreeMap::new();
    collateral.insert(dom.clone(), dom_curve);
    collateral.insert(foreign.clone(), for_curve);

    let hw = &file.market.hull_white;
    let co = &file.market.correlation;
    let mut rho = [[0.0f64; 4]; 4];
    for i in 0..4 {
        rho[i][i] = 1.0;
    }
    rho[0][1] = co.rho_dom_for;
    rho[1][0] = co.rho_dom_for;
    rho[0][3] = co.rho_dom_fx;
    rho[3][0] = co.rho_dom_fx;
    rho[1][3] = co.rho_for_fx;
    rho[3][1] = co.rho_for_fx;

    let model = MarketModel {
        domestic: dom,
        foreign,
        anchor,
        collateral,
        funding,
        spot_fx: file.market.spot_fx,
        hw_domestic: HullWhiteParams::new(hw.kappa_domestic, hw.sigma_domestic)
            .map_err(|e| anyhow::anyhow!("{e}"))?,
        hw_foreign: HullWhiteParams::new(hw.kappa_foreign, hw.sigma_foreign)
            .map_err(|e| anyhow::anyhow!("{e}"))?,
        hw_spread: HullWhiteParams::new(hw.kappa_spread, hw.sigma_spread)
            .map_err(|e| anyhow::anyhow!("{e}"))?,
        fx_vol: hw.fx_vol,
        correlation: CorrelationMatrix::new(rho).map_err(|e| anyhow::anyhow!("{e}"))?,
    };
    model.validate().map_err(|e| anyhow::anyhow!("{e}"))?;

    Ok(LoadedMarket { model, terms: file.terms, run: file.run, quotes })
}

// ---------------------------------------------------------------------------
// Instrument spec JSON
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum InstrumentFile {
    Ois {
        currency: Option<String>,
        maturity_years: f64,
        frequency_per_year: u32,
        /// `null` means the par rate at load time.
        fixed_rate: Option<f64>,
        side: SideField,
        collateral: CollateralField,
    },
    Mtmccois {
        maturity_years: f64,
        frequency_per_year: u32,
        /// `null` means the par spread at load time.
        basis_spread: Option<f64>,
        side: SideField,
        collateral: CollateralField,
    },
}

#[derive(Debug, Deserialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum SideField {
    Receiver,
    Payer,
}

#[derive(Debug, Deserialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum CollateralField {
    Domestic,
    Foreign,
}

/// A loaded instrument, with par levels resolved against the model.
#[derive(Debug, Clone)]
pub enum Instrument {
    Ois(OisSpec),
    Mtmccois(MtmccoisSpec),
}

pub fn load_instrument(path: &Path, model: &MarketModel) -> Result<Instrument> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading instrument file {}", path.display()))?;
    let file: InstrumentFile = serde_json::from_str(&text)
        .with_context(|| format!("parsing instrument file {}", path.display()))?;
    instrument_from_file(&file, model)
}

pub fn instrument_from_file(file: &InstrumentFile, model: &MarketModel) -> Result<Instrument> {
    match file {
        InstrumentFile::Ois { currency, maturity_years, frequency_per_year, fixed_rate, side, collateral } => {
            let ccy = match currency {
                Some(c) => Currency::new(c).map_err(|e| anyhow::anyhow!("{e}"))?,
                None => model.domestic.clone(),
            };
            let schedule = Schedule::regular(*maturity_years, *frequency_per_year)
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            let conv = match collateral {
                CollateralField::Domestic => CollateralConvention::DealCurrency,
                CollateralField::Foreign => CollateralConvention::Foreign(model.foreign.clone()),
            };
            let rate = match fixed_rate {
                Some(r) => *r,
                None => ois_par_rate(model, &ccy, &schedule, &conv)
                    .map_err(|e| anyhow::anyhow!("{e}"))?,
            };
            Ok(Instrument::Ois(OisSpec {
                currency: ccy,
                schedule,
                fixed_rate: rate,
                side: match side {
                    SideField::Receiver => FixedSide::Receiver,
                    SideField::Payer => FixedSide::Payer,
                },
                collateral: conv,
            }))
        }
        InstrumentFile::Mtmccois { maturity_years, frequency_per_year, basis_spread, side, collateral } => {
            if *collateral != CollateralField::Foreign {
                bail!("MtMCCOIS pricing assumes collateral in the foreign currency");
            }
            let schedule = Schedule::regular(*maturity_years, *frequency_per_year)
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            let spread = match basis_spread {
                Some(b) => *b,
                None => mtmccois_par_spread(model, &model.domestic, &model.foreign, &schedule)
                    .map_err(|e| anyhow::anyhow!("{e}"))?,
            };
            Ok(Instrument::Mtmccois(MtmccoisSpec {
                domestic: model.domestic.clone(),
                foreign: model.foreign.clone(),
                schedule,
                basis_spread: spread,
                side: match side {
                    SideField::Receiver => SpreadSide::Receiver,
                    SideField::Payer => SpreadSide::Payer,
                },
                collateral: CollateralConvention::Foreign(model.foreign.clone()),
            }))
        }
    }
}

/// Applies the `[run]` table over flag values (config overrides flags).
pub fn resolve_run(
    loaded: &LoadedMarket,
    flag_paths: usize,
    flag_steps: u32,
    flag_seed: u64,
    flag_sweep_bp: &[f64],
    flag_threads: usize,
    out_dir: PathBuf,
) -> RunConfig {
    let r = &loaded.run;
    let sweep_bp = r.sweep_bp.clone().unwrap_or_else(|| flag_sweep_bp.to_vec());
    RunConfig {
        model: loaded.model.clone(),
        terms: loaded.terms,
        n_paths: r.paths.unwrap_or(flag_paths),
        steps_per_year: r.steps_per_year.unwrap_or(flag_steps),
        seed: r.seed.unwrap_or(flag_seed),
        sweep: sweep_bp.iter().map(|bp| bp * 1e-4).collect(),
        threads: r.threads.unwrap_or(flag_threads),
        out_dir,
    }
}

/// Reprices the bootstrap inputs against the loaded curves and returns the
/// worst absolute par error per instrument set.
pub fn repricing_report(loaded: &LoadedMarket) -> Result<Vec<(String, f64)>> {
    let Some(q) = &loaded.quotes else {
        bail!("market file provides pillar curves, not quotes; nothing to reprice");
    };
    let model = &loaded.model;
    let mut out = Vec::new();
    for (label, ccy, quotes) in [
        ("domestic OIS", &model.domestic, &q.domestic_ois),
        ("foreign OIS", &model.foreign, &q.foreign_ois),
    ] {
        let mut worst = 0.0f64;
        for quote in quotes {
            let sched = Schedule::regular(quote.maturity, q.ois_freq)
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            let par = ois_par_rate(model, ccy, &sched, &CollateralConvention::DealCurrency)
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            worst = worst.max((par - quote.value).abs());
        }
        out.push((label.to_string(), worst));
    }
    let mut worst = 0.0f64;
    for quote in &q.ccs_basis {
        let sched =
            Schedule::regular(quote.maturity, q.ccs_freq).map_err(|e| anyhow::anyhow!("{e}"))?;
        let par = mtmccois_par_spread(model, &model.domestic, &model.foreign, &sched)
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        worst = worst.max((par - quote.value).abs());
    }
    out.push(("CCS basis".to_string(), worst));
    Ok(out)
}
