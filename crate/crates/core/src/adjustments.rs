//! First-order valuation adjustments for asymmetric and imperfect
//! collateralization.
//!
//! The pre-default value discounts at `r - μ(t,v)` where the correction
//!
//! ```text
//! μ(t,v) = ỹ¹ 1{v<0} + ỹ² 1{v≥0},
//! ỹⁱ = δⁱ yⁱ - (1-Rⁱ)(1-δⁱ)⁺ hⁱ + (1-Rʲ)(δⁱ-1)⁺ hʲ
//! ```
//!
//! bundles each party's collateral cost and residual credit risk. Expanding
//! to first order around a symmetric benchmark spread `ȳ` splits the price
//! into the clean value plus two corrections, estimated here as path
//! averages over the simulated exposure `V̄_s`:
//!
//! - CCA, the collateral cost adjustment:
//!   `∫ e^{-∫(r-ȳ)} ( -(δ¹y¹-ȳ)[-V̄]⁺ + (δ²y²-ȳ)[V̄]⁺ ) ds`
//! - CVA, the bilateral credit value adjustment:
//!   `∫ e^{-∫(r-ȳ)} ( h¹(1-R¹){(1-δ¹)⁺[-V̄]⁺ + (δ²-1)⁺[V̄]⁺}
//!                  - h²(1-R²){(1-δ²)⁺[V̄]⁺ + (δ¹-1)⁺[-V̄]⁺} ) ds`
//!
//! both from party 1's viewpoint. Time integrals use the trapezoidal rule
//! on the simulation grid. Collateral thresholds (uncollateralized bands)
//! and one-way CSA are handled as special cases.
//!
//! In the symmetric limit the integrands vanish identically, so the
//! estimators return exact zeros, not just zeros in expectation.

use alloc::vec::Vec;

use crate::curves::{Currency, PiecewiseFlat};
use crate::dynamics::{FittedModel, Node, Paths, SimError};
use crate::instruments::{
    mtmccois_value, ois_value, InstrumentError, MtmccoisPathValuer, MtmccoisSpec, OisPathValuer,
    OisSpec, PathValuer,
};
use crate::market::{MarketModel, ModelError};
use crate::math;
use crate::pde;

#[derive(Debug, Clone, PartialEq)]
pub enum AdjustError {
    BadTerms(&'static str),
    /// Paths were generated on a different grid or end before maturity.
    HorizonMismatch,
    Model(ModelError),
    Sim(SimError),
    Instrument(InstrumentError),
    Pde(pde::PdeError),
}

impl From<ModelError> for AdjustError {
    fn from(e: ModelError) -> Self {
        AdjustError::Model(e)
    }
}

impl From<SimError> for AdjustError {
    fn from(e: SimError) -> Self {
        AdjustError::Sim(e)
    }
}

impl From<InstrumentError> for AdjustError {
    fn from(e: InstrumentError) -> Self {
        AdjustError::Instrument(e)
    }
}

impl From<pde::PdeError> for AdjustError {
    fn from(e: pde::PdeError) -> Self {
        AdjustError::Pde(e)
    }
}

impl core::fmt::Display for AdjustError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            AdjustError::BadTerms(m) => write!(f, "bad collateral terms: {m}"),
            AdjustError::HorizonMismatch => {
                write!(f, "path horizon does not cover the instrument")
            }
            AdjustError::Model(e) => write!(f, "{e}"),
            AdjustError::Sim(e) => write!(f, "{e}"),
            AdjustError::Instrument(e) => write!(f, "{e}"),
            AdjustError::Pde(e) => write!(f, "{e}"),
        }
    }
}

/// Per-party CSA terms: coverage ratio, recovery, hazard, optional
/// threshold, and the set of currencies the party can post.
#[derive(Debug, Clone, PartialEq)]
pub struct PartyTerms {
    /// Coverage ratio δ(t) ≥ 0 of the exposure.
    pub coverage: PiecewiseFlat,
    /// Recovery rate R(t) ∈ [0,1] on uncollateralized exposure.
    pub recovery: PiecewiseFlat,
    /// Hazard rate h(t) ≥ 0.
    pub hazard: PiecewiseFlat,
    /// Collateral threshold Γ(t) ≥ 0 (uncollateralized band).
    pub threshold: Option<PiecewiseFlat>,
    /// Eligible collateral currencies; may be empty only for a party that
    /// never posts (δ ≡ 0).
    pub eligible: Vec<Currency>,
}

impl PartyTerms {
    pub fn constant(
        coverage: f64,
        recovery: f64,
        hazard: f64,
        eligible: Vec<Currency>,
    ) -> Self {
        PartyTerms {
            coverage: PiecewiseFlat::constant(coverage),
            recovery: PiecewiseFlat::constant(recovery),
            hazard: PiecewiseFlat::constant(hazard),
            threshold: None,
            eligible,
        }
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = Some(PiecewiseFlat::constant(threshold));
        self
    }

    fn validate(&self) -> Result<(), AdjustError> {
        if self.coverage.values().iter().any(|&v| v < 0.0) {
            return Err(AdjustError::BadTerms("coverage ratio must be >= 0"));
        }
        if self.recovery.values().iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(AdjustError::BadTerms("recovery must lie in [0,1]"));
        }
        if self.hazard.values().iter().any(|&v| v < 0.0) {
            return Err(AdjustError::BadTerms("hazard rate must be >= 0"));
        }
        if let Some(g) = &self.threshold {
            if g.values().iter().any(|&v| v < 0.0) {
                return Err(AdjustError::BadTerms("threshold must be >= 0"));
            }
        }
        let posts = self.coverage.values().iter().any(|&v| v != 0.0);
        if posts && self.eligible.is_empty() {
            return Err(AdjustError::BadTerms(
                "a collateral-posting party needs a nonempty eligible set",
            ));
        }
        Ok(())
    }

    fn threshold_at(&self, t: f64) -> f64 {
        self.threshold.as_ref().map_or(0.0, |g| g.value(t))
    }
}

/// Bilateral CSA terms; party 1 is the valuation viewpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct CollateralTerms {
    pub party1: PartyTerms,
    pub party2: PartyTerms,
}

impl CollateralTerms {
    pub fn new(party1: PartyTerms, party2: PartyTerms) -> Result<Self, AdjustError> {
        party1.validate()?;
        party2.validate()?;
        Ok(CollateralTerms { party1, party2 })
    }

    /// Perfect symmetric collateralization in one currency: δ = 1 both,
    /// no credit terms needed (they never enter).
    pub fn symmetric_perfect(currency: Currency) -> Self {
        let p = PartyTerms::constant(1.0, 1.0, 0.0, alloc::vec![currency]);
        CollateralTerms { party1: p.clone(), party2: p }
    }

    /// Perfect collateralization where party 1 may post either currency
    /// (cheapest-to-deliver) while party 2 is restricted to `party2_only`.
    pub fn asymmetric_ctd(party1_set: Vec<Currency>, party2_only: Currency) -> Self {
        CollateralTerms {
            party1: PartyTerms::constant(1.0, 1.0, 0.0, party1_set),
            party2: PartyTerms::constant(1.0, 1.0, 0.0, alloc::vec![party2_only]),
        }
    }

    /// One-way CSA: only party 1 posts (coverage δ1), party 2 posts nothing.
    pub fn one_way(
        currency: Currency,
        delta1: f64,
        hazard1: f64,
        recovery1: f64,
        hazard2: f64,
        recovery2: f64,
    ) -> Self {
        CollateralTerms {
            party1: PartyTerms::constant(delta1, recovery1, hazard1, alloc::vec![currency]),
            party2: PartyTerms::constant(0.0, recovery2, hazard2, Vec::new()),
        }
    }
}

/// Effective funding spreads of both parties around a benchmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveSpread {
    /// `ỹ¹, ỹ²`.
    pub y_tilde: [f64; 2],
    /// Benchmark `ȳ`.
    pub benchmark: f64,
    /// `Δỹⁱ = ỹⁱ - ȳ`.
    pub delta: [f64; 2],
}

/// Evaluates `ỹⁱ = δⁱyⁱ - (1-Rⁱ)(1-δⁱ)⁺hⁱ + (1-Rʲ)(δⁱ-1)⁺hʲ` for both
/// parties at time `t`, given their instantaneous collateral spreads.
pub fn effective_spreads(
    terms: &CollateralTerms,
    y1: f64,
    y2: f64,
    benchmark: f64,
    t: f64,
) -> EffectiveSpread {
    let d1 = terms.party1.coverage.value(t);
    let d2 = terms.party2.coverage.value(t);
    let l1 = (1.0 - terms.party1.recovery.value(t)) * terms.party1.hazard.value(t);
    let l2 = (1.0 - terms.party2.recovery.value(t)) * terms.party2.hazard.value(t);
    let y_tilde_1 = d1 * y1 - math::pos(1.0 - d1) * l1 + math::pos(d1 - 1.0) * l2;
    let y_tilde_2 = d2 * y2 - math::pos(1.0 - d2) * l2 + math::pos(d2 - 1.0) * l1;
    EffectiveSpread {
        y_tilde: [y_tilde_1, y_tilde_2],
        benchmark,
        delta: [y_tilde_1 - benchmark, y_tilde_2 - benchmark],
    }
}

/// Effective discounting correction `μ(t,v) = ỹ¹1{v<0} + ỹ²1{v≥0}`;
/// `v = 0` goes to the nonnegative branch.
pub fn mu_effective(terms: &CollateralTerms, y1: f64, y2: f64, t: f64, v: f64) -> f64 {
    let s = effective_spreads(terms, y1, y2, 0.0, t);
    if v < 0.0 {
        s.y_tilde[0]
    } else {
        s.y_tilde[1]
    }
}

/// Effective discounting correction in the presence of collateral
/// thresholds `Γⁱ` (exceeding exposure perfectly collateralized):
///
/// ```text
/// μ(t,v) = y¹1{v<0} + y²1{v≥0}
///        - (y¹ + h¹(1-R¹)) [ 1{-Γ¹≤v<0} - (Γ¹/v)1{v<-Γ¹} ]
///        - (y² + h²(1-R²)) [ 1{0≤v<Γ²} + (Γ²/v)1{v≥Γ²} ]
/// ```
///
/// At Γ ≡ 0 this reduces to [`mu_effective`] with δ = 1; as Γ → ∞ it tends
/// to the fully uncollateralized `-hⁱ(1-Rⁱ)` discounting correction.
pub fn mu_threshold(terms: &CollateralTerms, y1: f64, y2: f64, t: f64, v: f64) -> f64 {
    let g1 = terms.party1.threshold_at(t);
    let g2 = terms.party2.threshold_at(t);
    let l1 = (1.0 - terms.party1.recovery.value(t)) * terms.party1.hazard.value(t);
    let l2 = (1.0 - terms.party2.recovery.value(t)) * terms.party2.hazard.value(t);
    let mut mu = if v < 0.0 { y1 } else { y2 };
    if v < 0.0 {
        let bracket = if v >= -g1 {
            1.0
        } else if g1 > 0.0 {
            -g1 / v
        } else {
            0.0
        };
        mu -= (y1 + l1) * bracket;
    } else {
        let bracket = if v < g2 {
            1.0
        } else if g2 > 0.0 {
            g2 / v
        } else {
            0.0
        };
        mu -= (y2 + l2) * bracket;
    }
    mu
}

/// Gateaux expansion center: the symmetric-collateralization convention
/// defining `ȳ` and the benchmark discounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Benchmark {
    /// Both parties post the deal (domestic) currency; discount at `c_dom`.
    DomesticOis,
    /// Both parties post the model's foreign currency; discount at
    /// `c_dom + y`.
    ForeignCollateral,
    /// Both parties hold the cheapest-to-deliver option over the model
    /// pair; discount at `c_dom + max(y_dom - y_for, 0)` pathwise.
    CheapestToDeliver,
}

/// Spread value as a function of the simulated pair spread `y_t`, derived
/// once from eligible sets and the anchor convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SpreadExpr {
    Zero,
    PosY,
    NegY,
    MinZeroPosY,
    MinZeroNegY,
}

impl SpreadExpr {
    #[inline]
    fn eval(self, y: f64) -> f64 {
        match self {
            SpreadExpr::Zero => 0.0,
            SpreadExpr::PosY => y,
            SpreadExpr::NegY => -y,
            SpreadExpr::MinZeroPosY => y.min(0.0),
            SpreadExpr::MinZeroNegY => (-y).min(0.0),
        }
    }
}

fn per_currency_expr(model: &MarketModel, c: &Currency) -> SpreadExpr {
    if *c == model.anchor {
        SpreadExpr::Zero
    } else if *c == model.domestic {
        SpreadExpr::PosY
    } else {
        SpreadExpr::NegY
    }
}

fn party_expr(model: &MarketModel, eligible: &[Currency]) -> Result<SpreadExpr, AdjustError> {
    for c in eligible {
        if *c != model.domestic && *c != model.foreign {
            return Err(AdjustError::BadTerms("eligible currency not in model"));
        }
    }
    let has_dom = eligible.contains(&model.domestic);
    let has_for = eligible.contains(&model.foreign);
    Ok(match (has_dom, has_for) {
        (true, false) => per_currency_expr(model, &model.domestic),
        (false, true) => per_currency_expr(model, &model.foreign),
        (true, true) => {
            // min(y_dom, y_for): one of the two is the anchor's zero
            match (
                per_currency_expr(model, &model.domestic),
                per_currency_expr(model, &model.foreign),
            ) {
                (SpreadExpr::Zero, SpreadExpr::NegY) => SpreadExpr::MinZeroNegY,
                (SpreadExpr::PosY, SpreadExpr::Zero) => SpreadExpr::MinZeroPosY,
                _ => unreachable!("anchor is one of the two currencies"),
            }
        }
        (false, false) => SpreadExpr::Zero, // never posts; value unused
    })
}

fn benchmark_expr(model: &MarketModel, benchmark: Benchmark) -> SpreadExpr {
    match benchmark {
        Benchmark::DomesticOis => per_currency_expr(model, &model.domestic),
        Benchmark::ForeignCollateral => per_currency_expr(model, &model.foreign),
        Benchmark::CheapestToDeliver => {
            match per_currency_expr(model, &model.domestic) {
                SpreadExpr::Zero => SpreadExpr::MinZeroNegY,
                _ => SpreadExpr::MinZeroPosY,
            }
        }
    }
}

/// Extra discounting spread over `c_dom` implied by the benchmark,
/// `y_dom - ȳ`; a pair quantity, independent of the anchor choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DiscSpread {
    Zero,
    PairY,
    MaxZeroPairY,
}

impl DiscSpread {
    #[inline]
    fn eval(self, y: f64) -> f64 {
        match self {
            DiscSpread::Zero => 0.0,
            DiscSpread::PairY => y,
            DiscSpread::MaxZeroPairY => math::pos(y),
        }
    }
}

fn benchmark_disc(benchmark: Benchmark) -> DiscSpread {
    match benchmark {
        Benchmark::DomesticOis => DiscSpread::Zero,
        Benchmark::ForeignCollateral => DiscSpread::PairY,
        Benchmark::CheapestToDeliver => DiscSpread::MaxZeroPairY,
    }
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_paths: usize,
}

/// CCA and CVA estimates from one pass over the paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimates {
    pub cca: McEstimate,
    pub cva: McEstimate,
}

/// Partial sums over one path block; combines associatively, so the
/// parallel reduction is deterministic when partials are merged in block
/// order.
#[derive(Debug, Clone, Copy, Default)]
pub struct BlockAccum {
    pub n: usize,
    pub sum: [f64; 2],
    pub sumsq: [f64; 2],
}

impl BlockAccum {
    pub fn merge(mut self, other: BlockAccum) -> BlockAccum {
        self.n += other.n;
        for i in 0..2 {
            self.sum[i] += other.sum[i];
            self.sumsq[i] += other.sumsq[i];
        }
        self
    }

    pub fn finalize(&self) -> Estimates {
        let n = self.n as f64;
        let make = |sum: f64, sumsq: f64| {
            let mean = sum / n;
            let var = (sumsq / n - mean * mean).max(0.0);
            McEstimate {
                value: mean,
                stderr: math::sqrt(var / n),
                n_paths: self.n,
            }
        };
        Estimates {
            cca: make(self.sum[0], self.sumsq[0]),
            cva: make(self.sum[1], self.sumsq[1]),
        }
    }
}

enum IntegrandKind {
    Generic,
    Threshold,
}

/// Path estimator for the first-order adjustments of one instrument under
/// one CSA configuration.
///
/// The estimator is a reduction over independent path blocks: call
/// [`AdjustmentEngine::block_partial`] from any number of workers and merge
/// the results in block order with [`BlockAccum::merge`], or use
/// [`AdjustmentEngine::run`] for a serial pass.
pub struct AdjustmentEngine<'a> {
    valuer: &'a dyn PathValuer,
    kind: IntegrandKind,
    expr1: SpreadExpr,
    expr2: SpreadExpr,
    bench: SpreadExpr,
    disc: DiscSpread,
    dt: f64,
    /// Per-node coverage ratios.
    d1: Vec<f64>,
    d2: Vec<f64>,
    /// Per-node loss intensities `h(1-R)`.
    l1: Vec<f64>,
    l2: Vec<f64>,
    /// Per-node thresholds (threshold integrand only).
    g1: Vec<f64>,
    g2: Vec<f64>,
}

impl<'a> AdjustmentEngine<'a> {
    pub fn new(
        model: &MarketModel,
        fitted: &FittedModel,
        valuer: &'a dyn PathValuer,
        terms: &CollateralTerms,
        benchmark: Benchmark,
    ) -> Result<Self, AdjustError> {
        Self::build(model, fitted, valuer, terms, benchmark, IntegrandKind::Generic)
    }

    /// Threshold (uncollateralized band) estimator: both parties post the
    /// deal currency above their thresholds with full coverage, matching
    /// the domestic-collateral benchmark.
    pub fn new_threshold(
        model: &MarketModel,
        fitted: &FittedModel,
        valuer: &'a dyn PathValuer,
        terms: &CollateralTerms,
    ) -> Result<Self, AdjustError> {
        for p in [&terms.party1, &terms.party2] {
            if p.coverage.values().iter().any(|&v| v != 1.0) {
                return Err(AdjustError::BadTerms(
                    "threshold adjustments assume full coverage above the threshold",
                ));
            }
            if p.threshold.is_none() {
                return Err(AdjustError::BadTerms("threshold terms require thresholds"));
            }
        }
        Self::build(model, fitted, valuer, terms, Benchmark::DomesticOis, IntegrandKind::Threshold)
    }

    fn build(
        model: &MarketModel,
        fitted: &FittedModel,
        valuer: &'a dyn PathValuer,
        terms: &CollateralTerms,
        benchmark: Benchmark,
        kind: IntegrandKind,
    ) -> Result<Self, AdjustError> {
        terms.party1.validate()?;
        terms.party2.validate()?;
        let grid = fitted.grid();
        if valuer.maturity_index() > grid.n_steps() {
            return Err(AdjustError::HorizonMismatch);
        }
        let m = valuer.maturity_index();
        let times = &grid.times()[..=m];
        let at = |c: &PiecewiseFlat| -> Vec<f64> { times.iter().map(|&t| c.value(t)).collect() };
        let loss = |p: &PartyTerms| -> Vec<f64> {
            times
                .iter()
                .map(|&t| (1.0 - p.recovery.value(t)) * p.hazard.value(t))
                .collect()
        };
        let thresh = |p: &PartyTerms| -> Vec<f64> {
            times.iter().map(|&t| p.threshold_at(t)).collect()
        };
        Ok(AdjustmentEngine {
            valuer,
            kind,
            expr1: party_expr(model, &terms.party1.eligible)?,
            expr2: party_expr(model, &terms.party2.eligible)?,
            bench: benchmark_expr(model, benchmark),
            disc: benchmark_disc(benchmark),
            dt: grid.dt(),
            d1: at(&terms.party1.coverage),
            d2: at(&terms.party2.coverage),
            l1: loss(&terms.party1),
            l2: loss(&terms.party2),
            g1: thresh(&terms.party1),
            g2: thresh(&terms.party2),
        })
    }

    /// Per-path trapezoidal time integrals of the discounted CCA and CVA
    /// integrands.
    fn path_integrals(&self, path: &[Node]) -> (f64, f64) {
        let m = self.valuer.maturity_index();
        let mut cca = 0.0;
        let mut cva = 0.0;
        let mut disc_extra = 0.0;
        let mut prev_disc_spread = self.disc.eval(path[0].y);
        for (k, node) in path.iter().enumerate().take(m + 1) {
            if k > 0 {
                let s = self.disc.eval(node.y);
                disc_extra += 0.5 * (prev_disc_spread + s) * self.dt;
                prev_disc_spread = s;
            }
            let w = if k == 0 || k == m { 0.5 * self.dt } else { self.dt };
            let disc = math::exp(-(node.i_c_dom + disc_extra));
            let vbar = self.valuer.value(k, path);
            let epos = math::pos(vbar);
            let eneg = math::pos(-vbar);
            let (g_cca, g_cva) = match self.kind {
                IntegrandKind::Generic => {
                    let ybar = self.bench.eval(node.y);
                    let dc1 = self.d1[k] * self.expr1.eval(node.y) - ybar;
                    let dc2 = self.d2[k] * self.expr2.eval(node.y) - ybar;
                    let cca_k = -dc1 * eneg + dc2 * epos;
                    let cva_k = self.l1[k]
                        * (math::pos(1.0 - self.d1[k]) * eneg + math::pos(self.d2[k] - 1.0) * epos)
                        - self.l2[k]
                            * (math::pos(1.0 - self.d2[k]) * epos
                                + math::pos(self.d1[k] - 1.0) * eneg);
                    (cca_k, cva_k)
                }
                IntegrandKind::Threshold => {
                    let y_deal = self.bench.eval(node.y);
                    let (g1, g2) = (self.g1[k], self.g2[k]);
                    let band = (-g1 <= vbar && vbar < g2) as u8 as f64;
                    let below = (vbar < -g1) as u8 as f64;
                    let above = (vbar >= g2) as u8 as f64;
                    let cca_k = -y_deal * vbar * band + y_deal * (g1 * below - g2 * above);
                    let cva_k = -self.l1[k]
                        * (vbar * ((-g1 <= vbar && vbar < 0.0) as u8 as f64) - g1 * below)
                        - self.l2[k]
                            * (vbar * ((0.0 <= vbar && vbar < g2) as u8 as f64) + g2 * above);
                    (cca_k, cva_k)
                }
            };
            cca += w * disc * g_cca;
            cva += w * disc * g_cva;
        }
        (cca, cva)
    }

    /// Accumulates one block of paths.
    pub fn block_partial(&self, paths: &dyn Paths, block: usize) -> BlockAccum {
        let mut acc = BlockAccum::default();
        paths.visit_block(block, &mut |_, path| {
            let (cca, cva) = self.path_integrals(path);
            acc.n += 1;
            acc.sum[0] += cca;
            acc.sumsq[0] += cca * cca;
            acc.sum[1] += cva;
            acc.sumsq[1] += cva * cva;
        });
        acc
    }

    /// Serial pass over all blocks.
    pub fn run(&self, paths: &dyn Paths) -> Result<Estimates, AdjustError> {
        if paths.grid().n_steps() < self.valuer.maturity_index() {
            return Err(AdjustError::HorizonMismatch);
        }
        let mut acc = BlockAccum::default();
        for b in 0..paths.n_blocks() {
            acc = acc.merge(self.block_partial(paths, b));
        }
        Ok(acc.finalize())
    }
}

/// Clean value plus first-order adjustments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdjustedPrice {
    pub clean: f64,
    pub cca: f64,
    pub cva: f64,
    pub total: f64,
    pub stderr_cca: f64,
    pub stderr_cva: f64,
}

impl AdjustedPrice {
    pub fn new(clean: f64, est: &Estimates) -> Self {
        AdjustedPrice {
            clean,
            cca: est.cca.value,
            cva: est.cva.value,
            total: clean + est.cca.value + est.cva.value,
            stderr_cca: est.cca.stderr,
            stderr_cva: est.cva.stderr,
        }
    }
}

// ---------------------------------------------------------------------------
// Named special cases
// ---------------------------------------------------------------------------

/// CCA of the asymmetrically collateralized MtMCCOIS: party 1 may post
/// either currency, party 2 only the foreign one, benchmark at foreign
/// collateral. Reduces to
/// `E[∫ e^{-∫(c_dom+y)} max(-V̄,0) max(-y,0) ds]`.
pub fn cca_asym_mtmccois(
    model: &MarketModel,
    fitted: &FittedModel,
    paths: &dyn Paths,
    spec: &MtmccoisSpec,
) -> Result<Estimates, AdjustError> {
    let valuer = MtmccoisPathValuer::new(model, fitted, spec)?;
    let terms = CollateralTerms::asymmetric_ctd(
        alloc::vec![model.domestic.clone(), model.foreign.clone()],
        model.foreign.clone(),
    );
    let engine =
        AdjustmentEngine::new(model, fitted, &valuer, &terms, Benchmark::ForeignCollateral)?;
    engine.run(paths)
}

/// CCA of the asymmetrically collateralized OIS: party 1 may post either
/// currency, party 2 only the domestic one, benchmark at domestic
/// collateral. Reduces to `E[∫ e^{-∫c_dom} max(-V̄,0) max(y,0) ds]`.
pub fn cca_asym_ois(
    model: &MarketModel,
    fitted: &FittedModel,
    paths: &dyn Paths,
    spec: &OisSpec,
) -> Result<Estimates, AdjustError> {
    let valuer = OisPathValuer::new(model, fitted, spec)?;
    let terms = CollateralTerms::asymmetric_ctd(
        alloc::vec![model.domestic.clone(), model.foreign.clone()],
        model.domestic.clone(),
    );
    let engine = AdjustmentEngine::new(model, fitted, &valuer, &terms, Benchmark::DomesticOis)?;
    engine.run(paths)
}

/// One-way CSA (only party 1 posts, deal-currency collateral): CCA is
/// nonpositive for party 1 whenever the deal currency's funding spread is
/// nonnegative along the paths.
pub fn one_way_csa(
    model: &MarketModel,
    fitted: &FittedModel,
    paths: &dyn Paths,
    valuer: &dyn PathValuer,
    terms: &CollateralTerms,
) -> Result<Estimates, AdjustError> {
    if terms.party2.coverage.values().iter().any(|&v| v != 0.0) {
        return Err(AdjustError::BadTerms("one-way CSA requires party 2 coverage = 0"));
    }
    let engine = AdjustmentEngine::new(model, fitted, valuer, terms, Benchmark::DomesticOis)?;
    engine.run(paths)
}

/// CCA/CVA with collateral thresholds, deal-currency collateral,
/// domestic-OIS benchmark.
pub fn cca_cva_threshold(
    model: &MarketModel,
    fitted: &FittedModel,
    paths: &dyn Paths,
    valuer: &dyn PathValuer,
    terms: &CollateralTerms,
) -> Result<Estimates, AdjustError> {
    let engine = AdjustmentEngine::new_threshold(model, fitted, valuer, terms)?;
    engine.run(paths)
}

/// Clean OIS price plus adjustments under the given terms and benchmark.
pub fn adjusted_price_ois(
    model: &MarketModel,
    fitted: &FittedModel,
    paths: &dyn Paths,
    spec: &OisSpec,
    terms: &CollateralTerms,
    benchmark: Benchmark,
) -> Result<AdjustedPrice, AdjustError> {
    let clean = ois_value(model, spec)?.value;
    let valuer = OisPathValuer::new(model, fitted, spec)?;
    let engine = AdjustmentEngine::new(model, fitted, &valuer, terms, benchmark)?;
    Ok(AdjustedPrice::new(clean, &engine.run(paths)?))
}

/// Clean MtMCCOIS price plus adjustments under the given terms and
/// benchmark.
pub fn adjusted_price_mtmccois(
    model: &MarketModel,
    fitted: &FittedModel,
    paths: &dyn Paths,
    spec: &MtmccoisSpec,
    terms: &CollateralTerms,
    benchmark: Benchmark,
) -> Result<AdjustedPrice, AdjustError> {
    let clean = mtmccois_value(model, spec)?.value;
    let valuer = MtmccoisPathValuer::new(model, fitted, spec)?;
    let engine = AdjustmentEngine::new(model, fitted, &valuer, terms, benchmark)?;
    Ok(AdjustedPrice::new(clean, &engine.run(paths)?))
}

/// Synthetic constant exposure profile, used for deterministic-integrand
/// checks of the estimators against quadrature.
pub struct ConstantExposure {
    pub value: f64,
    pub maturity_index: usize,
}

impl PathValuer for ConstantExposure {
    fn value(&self, _k: usize, _path: &[Node]) -> f64 {
        self.value
    }

    fn maturity_index(&self) -> usize {
        self.maturity_index
    }
}

// ---------------------------------------------------------------------------
// Netting inequality
// ---------------------------------------------------------------------------

/// Result of the netting-inequality evaluation for one instrument pair.
#[derive(Debug, Clone, Copy)]
pub struct NettingReport {
    pub v_combined: f64,
    pub v_a: f64,
    pub v_b: f64,
    /// `V^{ab} - V^a - V^b`; nonnegative under `y¹ ≥ y²`.
    pub gap: f64,
    /// Numerical error bar (grid-refinement estimate across the three
    /// solves).
    pub err: f64,
    /// `false` only if the gap is below `-3·err`.
    pub holds: bool,
}

/// Tests `V^{ab} ≥ V^a + V^b` for two continuous-coupon legs priced with
/// the nonlinear PDE under perfect but asymmetric collateralization with
/// `y¹ ≥ y²` (party 1 restricted to the deal currency, party 2 optimal).
///
/// Each value is solved at the given resolution and at half resolution;
/// the differences provide the error bar.
pub fn netting_inequality_check(
    model: &MarketModel,
    leg_a: &pde::CouponLeg,
    leg_b: &pde::CouponLeg,
    grid: &pde::PdeGrid,
) -> Result<NettingReport, AdjustError> {
    // y¹ = y_deal >= y² = min(y_deal, y_foreign)
    let reaction = pde::Reaction {
        negative_branch: pde::SpreadKind::Identity,
        nonnegative_branch: pde::SpreadKind::PosPart,
    };
    let solve = |legs: Vec<pde::CouponLeg>, g: &pde::PdeGrid| -> Result<f64, AdjustError> {
        let problem = pde::PdeProblem {
            legs,
            reaction,
            boundary_coupon: pde::BoundaryCoupon::ConditionalMean,
        };
        Ok(pde::solve_nonlinear_pde(model, &problem, g)?.value_at_y0)
    };
    let coarse = grid.halved();
    let run = |legs: Vec<pde::CouponLeg>| -> Result<(f64, f64), AdjustError> {
        let fine = solve(legs.clone(), grid)?;
        let half = solve(legs, &coarse)?;
        Ok((fine, math::abs(fine - half)))
    };
    let (v_a, e_a) = run(alloc::vec![leg_a.clone()])?;
    let (v_b, e_b) = run(alloc::vec![leg_b.clone()])?;
    let (v_ab, e_ab) = run(alloc::vec![leg_a.clone(), leg_b.clone()])?;
    let gap = v_ab - v_a - v_b;
    let err = e_a + e_b + e_ab;
    Ok(NettingReport { v_combined: v_ab, v_a, v_b, gap, err, holds: gap >= -3.0 * err })
}
