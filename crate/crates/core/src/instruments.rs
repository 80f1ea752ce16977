//! Clean-price valuation: the value of an instrument under perfect,
//! symmetric collateralization.
//!
//! At inception everything prices in closed form off the curves. Along
//! simulated paths the same instruments are revalued with conditional
//! discount factors rebuilt from the simulated factor state via the
//! exponential-affine coefficients of the discretized dynamics
//! ([`crate::dynamics::bond_coefficients`]), with advance-reset accruals
//! carried as accumulated-integral differences from the preceding payment
//! date. On-path values therefore agree with the inception closed forms to
//! machine precision at `t = 0` and collapse exactly to deterministic-curve
//! prices when all volatilities vanish.

use alloc::vec::Vec;

use crate::curves::Currency;
use crate::dynamics::{
    bond_coefficients, coupon_coefficients, BondCoeffs, CouponCoeffs, FittedModel, Node, SimError,
    TimeGrid,
};
use crate::market::{MarketModel, ModelError};
use crate::math;

#[derive(Debug, Clone, PartialEq)]
pub enum InstrumentError {
    EmptySchedule,
    NonAscendingDates,
    /// Spot-start schedules only: on-path revaluation carries accruals from
    /// the preceding payment date.
    NotSpotStart,
    /// Payment date does not lie on the simulation grid.
    PaymentOffGrid { t: f64 },
    /// Simulation horizon ends before the last payment.
    HorizonTooShort { maturity: f64, horizon: f64 },
    /// The valuation formula requires a specific collateral convention.
    WrongCollateral(&'static str),
    /// The instrument references currencies not in the model pair.
    WrongCurrencies,
    /// Continuous-coupon valuation requires a deterministic domestic rate.
    DeterministicRateRequired,
    BeyondMaturity { t: f64 },
    Model(ModelError),
    Sim(SimError),
}

impl From<ModelError> for InstrumentError {
    fn from(e: ModelError) -> Self {
        InstrumentError::Model(e)
    }
}

impl From<SimError> for InstrumentError {
    fn from(e: SimError) -> Self {
        InstrumentError::Sim(e)
    }
}

impl core::fmt::Display for InstrumentError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            InstrumentError::EmptySchedule => write!(f, "schedule has no payments"),
            InstrumentError::NonAscendingDates => write!(f, "payment dates must ascend"),
            InstrumentError::NotSpotStart => write!(f, "on-path revaluation needs a spot-start schedule"),
            InstrumentError::PaymentOffGrid { t } => {
                write!(f, "payment date {t} is not on the simulation grid")
            }
            InstrumentError::HorizonTooShort { maturity, horizon } => {
                write!(f, "horizon {horizon}y ends before maturity {maturity}y")
            }
            InstrumentError::WrongCollateral(m) => write!(f, "{m}"),
            InstrumentError::WrongCurrencies => write!(f, "instrument currencies not in model"),
            InstrumentError::DeterministicRateRequired => {
                write!(f, "continuous-coupon valuation needs sigma_c = 0")
            }
            InstrumentError::BeyondMaturity { t } => write!(f, "time {t} is beyond maturity"),
            InstrumentError::Model(e) => write!(f, "{e}"),
            InstrumentError::Sim(e) => write!(f, "{e}"),
        }
    }
}

/// Payment schedule: `T₀ = start`, payment dates `T₁..T_N`, accrual
/// fractions `Δₙ = Tₙ - Tₙ₋₁` (ACT/365-fixed on idealized dates).
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub start: f64,
    pub payment_times: Vec<f64>,
    pub accruals: Vec<f64>,
}

impl Schedule {
    pub fn new(start: f64, payment_times: Vec<f64>) -> Result<Self, InstrumentError> {
        if payment_times.is_empty() {
            return Err(InstrumentError::EmptySchedule);
        }
        let mut prev = start;
        let mut accruals = Vec::with_capacity(payment_times.len());
        for &t in &payment_times {
            if !(t > prev) {
                return Err(InstrumentError::NonAscendingDates);
            }
            accruals.push(t - prev);
            prev = t;
        }
        Ok(Schedule { start, payment_times, accruals })
    }

    /// Spot-start schedule with `freq` payments per year out to `maturity`.
    pub fn regular(maturity: f64, freq: u32) -> Result<Self, InstrumentError> {
        let period = 1.0 / freq as f64;
        let n = libm::round(maturity * freq as f64) as usize;
        if n == 0 || math::abs(n as f64 * period - maturity) > 1e-9 {
            return Err(InstrumentError::NonAscendingDates);
        }
        Schedule::new(0.0, (1..=n).map(|i| i as f64 * period).collect())
    }

    pub fn maturity(&self) -> f64 {
        *self.payment_times.last().unwrap()
    }
}

/// Which leg the valuation viewpoint receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedSide {
    /// Receives fixed, pays compounded overnight.
    Receiver,
    /// Pays fixed, receives compounded overnight.
    Payer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpreadSide {
    /// Receives the basis spread on the domestic leg.
    Receiver,
    /// Pays the basis spread.
    Payer,
}

/// Collateral convention of a trade.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CollateralConvention {
    /// Cash collateral in the deal currency; discount at the collateral rate.
    DealCurrency,
    /// Cash collateral in another currency; discount picks up the pair
    /// funding spread.
    Foreign(Currency),
}

/// Overnight index swap: fixed vs. periodically compounded overnight.
#[derive(Debug, Clone, PartialEq)]
pub struct OisSpec {
    pub currency: Currency,
    pub schedule: Schedule,
    pub fixed_rate: f64,
    pub side: FixedSide,
    pub collateral: CollateralConvention,
}

/// Mark-to-market cross-currency overnight index swap: the foreign leg's
/// notional refreshes at every reset; the basis spread is paid on the
/// domestic leg.
#[derive(Debug, Clone, PartialEq)]
pub struct MtmccoisSpec {
    pub domestic: Currency,
    pub foreign: Currency,
    pub schedule: Schedule,
    pub basis_spread: f64,
    pub side: SpreadSide,
    pub collateral: CollateralConvention,
}

/// Clean value with its per-cashflow decomposition. The total is the exact
/// sum of the flows, so portfolio values add across instruments.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanPrice {
    pub value: f64,
    /// `(payment time, PV contribution)` per cashflow.
    pub flows: Vec<(f64, f64)>,
}

impl CleanPrice {
    fn from_flows(flows: Vec<(f64, f64)>) -> Self {
        let value = flows.iter().map(|f| f.1).sum();
        CleanPrice { value, flows }
    }
}

/// Collateralized FX forward for the pair `(i, j)` (price of one unit of
/// `j` in units of `i`) under collateralization in currency `k`:
/// `fx(t) · D^{(j,k)}(t,T) / D^{(i,k)}(t,T)`.
pub fn fx_forward(
    model: &MarketModel,
    pair: (&Currency, &Currency),
    collateral: &Currency,
    t: f64,
) -> Result<f64, InstrumentError> {
    let (i, j) = pair;
    let spot = model.spot(i, j)?;
    let num = model.discount_foreign_collateral(j, collateral, t)?;
    let den = model.discount_foreign_collateral(i, collateral, t)?;
    Ok(spot * num / den)
}

/// Par OIS rate for a schedule under the given collateral convention.
///
/// With deal-currency collateral this is the standard
/// `(D(0,T₀) - D(0,T_N)) / Σ Δₙ D(0,Tₙ)`; with foreign collateral the
/// compounded floating leg prices as `Σ (D(Tₙ₋₁) - D(Tₙ))·Y(Tₙ)` under the
/// independence convention.
pub fn ois_par_rate(
    model: &MarketModel,
    currency: &Currency,
    schedule: &Schedule,
    collateral: &CollateralConvention,
) -> Result<f64, InstrumentError> {
    let (float_leg, annuity) = ois_legs(model, currency, schedule, collateral)?;
    Ok(float_leg / annuity)
}

/// `(float leg PV, fixed annuity)` of an OIS per unit notional.
fn ois_legs(
    model: &MarketModel,
    currency: &Currency,
    schedule: &Schedule,
    collateral: &CollateralConvention,
) -> Result<(f64, f64), InstrumentError> {
    let curve = model.collateral_curve(currency)?;
    let mut float_leg = 0.0;
    let mut annuity = 0.0;
    let mut prev = schedule.start;
    for (n, &t) in schedule.payment_times.iter().enumerate() {
        let d_prev = math::exp(-curve.integral(0.0, prev));
        let d = math::exp(-curve.integral(0.0, t));
        let y_factor = match collateral {
            CollateralConvention::DealCurrency => 1.0,
            CollateralConvention::Foreign(k) => {
                let y = model.pair_spread(currency, k)?;
                math::exp(-y.integral(0.0, t))
            }
        };
        float_leg += (d_prev - d) * y_factor;
        annuity += schedule.accruals[n] * d * y_factor;
        prev = t;
    }
    Ok((float_leg, annuity))
}

/// Clean OIS value at inception per unit notional.
pub fn ois_value(model: &MarketModel, spec: &OisSpec) -> Result<CleanPrice, InstrumentError> {
    let curve = model.collateral_curve(&spec.currency)?;
    let sign = match spec.side {
        FixedSide::Receiver => 1.0,
        FixedSide::Payer => -1.0,
    };
    let mut flows = Vec::with_capacity(spec.schedule.payment_times.len());
    let mut prev = spec.schedule.start;
    for (n, &t) in spec.schedule.payment_times.iter().enumerate() {
        let d_prev = math::exp(-curve.integral(0.0, prev));
        let d = math::exp(-curve.integral(0.0, t));
        let y_factor = match &spec.collateral {
            CollateralConvention::DealCurrency => 1.0,
            CollateralConvention::Foreign(k) => {
                let y = model.pair_spread(&spec.currency, k)?;
                math::exp(-y.integral(0.0, t))
            }
        };
        let fixed = spec.schedule.accruals[n] * spec.fixed_rate * d * y_factor;
        let float = (d_prev - d) * y_factor;
        flows.push((t, sign * (fixed - float)));
        prev = t;
    }
    Ok(CleanPrice::from_flows(flows))
}

/// Par MtMCCOIS basis spread under foreign-currency collateral and the
/// independence convention:
/// `Σ D^{(j,i)}(0,Tₙ₋₁)(1 - e^{-∫ y}) / Σ δₙ D^{(j,i)}(0,Tₙ)`.
pub fn mtmccois_par_spread(
    model: &MarketModel,
    domestic: &Currency,
    foreign: &Currency,
    schedule: &Schedule,
) -> Result<f64, InstrumentError> {
    let curve = model.collateral_curve(domestic)?;
    let y = model.pair_spread(domestic, foreign)?;
    let mut num = 0.0;
    let mut den = 0.0;
    let mut prev = schedule.start;
    for (n, &t) in schedule.payment_times.iter().enumerate() {
        let dji_prev = math::exp(-(curve.integral(0.0, prev) + y.integral(0.0, prev)));
        let dji = math::exp(-(curve.integral(0.0, t) + y.integral(0.0, t)));
        num += dji_prev * (1.0 - math::exp(-y.integral(prev, t)));
        den += schedule.accruals[n] * dji;
        prev = t;
    }
    Ok(num / den)
}

/// Clean MtMCCOIS value at inception per unit domestic notional, from the
/// spread receiver's viewpoint when `side` is `Receiver`.
pub fn mtmccois_value(
    model: &MarketModel,
    spec: &MtmccoisSpec,
) -> Result<CleanPrice, InstrumentError> {
    if spec.domestic != model.domestic || spec.foreign != model.foreign {
        return Err(InstrumentError::WrongCurrencies);
    }
    match &spec.collateral {
        CollateralConvention::Foreign(k) if *k == spec.foreign => {}
        _ => {
            return Err(InstrumentError::WrongCollateral(
                "MtMCCOIS valuation assumes collateral in the foreign (refreshed-leg) currency",
            ))
        }
    }
    let curve = model.collateral_curve(&spec.domestic)?;
    let y = model.pair_spread(&spec.domestic, &spec.foreign)?;
    let sign = match spec.side {
        SpreadSide::Receiver => 1.0,
        SpreadSide::Payer => -1.0,
    };
    let mut flows = Vec::with_capacity(spec.schedule.payment_times.len());
    let mut prev = spec.schedule.start;
    for (n, &t) in spec.schedule.payment_times.iter().enumerate() {
        let dji_prev = math::exp(-(curve.integral(0.0, prev) + y.integral(0.0, prev)));
        let dji = math::exp(-(curve.integral(0.0, t) + y.integral(0.0, t)));
        let spread_leg = spec.schedule.accruals[n] * spec.basis_spread * dji;
        let funding_leg = dji_prev * (1.0 - math::exp(-y.integral(prev, t)));
        flows.push((t, sign * (spread_leg - funding_leg)));
        prev = t;
    }
    Ok(CleanPrice::from_flows(flows))
}

// ---------------------------------------------------------------------------
// Continuous-coupon cross-currency swap (single stochastic spread)
// ---------------------------------------------------------------------------

/// Par spread of the continuous-coupon MtMCCOIS:
/// `∫ D·Y·y(0,s) ds / ∫ D·Y ds`, exact piecewise integration.
pub fn continuous_par_spread(model: &MarketModel, maturity: f64) -> Result<f64, InstrumentError> {
    let curve = model.collateral_curve(&model.domestic)?;
    let y = model.simulated_spread_curve();
    let mut knots: Vec<f64> = curve
        .pillars()
        .map(|p| p.0)
        .chain(y.pillars().map(|p| p.0))
        .filter(|&t| t > 0.0 && t < maturity)
        .collect();
    knots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    knots.dedup();
    knots.insert(0, 0.0);
    knots.push(maturity);

    let mut num = 0.0;
    let mut den = 0.0;
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        let rate = curve.forward(a) + y.forward(a);
        let g_a = math::exp(-(curve.integral(0.0, a) + y.integral(0.0, a)));
        // ∫_a^b e^{-∫(c+y)} ds with flat (c+y) on the piece
        let seg = g_a * (b - a) * math::expm1_over(rate * (b - a));
        den += seg;
        num += y.forward(a) * seg;
    }
    Ok(num / den)
}

// ---------------------------------------------------------------------------
// On-path revaluation
// ---------------------------------------------------------------------------

/// Conditional clean value along a simulated path.
///
/// `value(k, path)` returns the clean value at grid node `k` given the
/// path's state and accumulated integrals; it is zero at and beyond the
/// instrument's maturity node (ex-dividend).
pub trait PathValuer: Sync {
    fn value(&self, k: usize, path: &[Node]) -> f64;
    fn maturity_index(&self) -> usize;
}

/// Maps payment dates onto the grid and precomputes, per node, the index of
/// the next payment.
struct ScheduleOnGrid {
    /// Grid index of `T₀..T_N` (length N+1).
    pay_idx: Vec<usize>,
    /// For node `k < maturity index`: the position `γ(t_k)` in `1..=N`.
    next_pay: Vec<usize>,
}

impl ScheduleOnGrid {
    fn new(schedule: &Schedule, grid: &TimeGrid) -> Result<Self, InstrumentError> {
        if schedule.start != 0.0 {
            return Err(InstrumentError::NotSpotStart);
        }
        if schedule.maturity() > grid.horizon() + 1e-9 {
            return Err(InstrumentError::HorizonTooShort {
                maturity: schedule.maturity(),
                horizon: grid.horizon(),
            });
        }
        let mut pay_idx = Vec::with_capacity(schedule.payment_times.len() + 1);
        pay_idx.push(0);
        for &t in &schedule.payment_times {
            let k = grid.index_of(t).map_err(|_| InstrumentError::PaymentOffGrid { t })?;
            pay_idx.push(k);
        }
        let m = *pay_idx.last().unwrap();
        let mut next_pay = alloc::vec![0usize; m + 1];
        let mut gamma = 1usize;
        for (k, np) in next_pay.iter_mut().enumerate() {
            while gamma < pay_idx.len() && pay_idx[gamma] <= k {
                gamma += 1;
            }
            *np = gamma; // == N+1 exactly at the maturity node
        }
        Ok(ScheduleOnGrid { pay_idx, next_pay })
    }

    fn n_payments(&self) -> usize {
        self.pay_idx.len() - 1
    }
}

/// On-path OIS revaluation (deal-currency collateral):
/// `V̄ = Σ_{n≥γ} Δₙ S D(t,Tₙ) - e^{∫ c from last reset} + D(t,T_N)`,
/// from the fixed receiver's viewpoint, with conditional bonds rebuilt from
/// the simulated domestic rate.
pub struct OisPathValuer {
    sign: f64,
    fixed_rate: f64,
    accruals: Vec<f64>,
    on_grid: ScheduleOnGrid,
    bonds: Vec<BondCoeffs>,
}

impl OisPathValuer {
    pub fn new(
        model: &MarketModel,
        fitted: &FittedModel,
        spec: &OisSpec,
    ) -> Result<Self, InstrumentError> {
        if spec.currency != model.domestic {
            return Err(InstrumentError::WrongCurrencies);
        }
        if spec.collateral != CollateralConvention::DealCurrency {
            return Err(InstrumentError::WrongCollateral(
                "on-path OIS revaluation assumes deal-currency collateral",
            ));
        }
        let on_grid = ScheduleOnGrid::new(&spec.schedule, fitted.grid())?;
        let bonds = on_grid.pay_idx[1..]
            .iter()
            .map(|&m| bond_coefficients(&fitted.dom, fitted.grid(), m))
            .collect();
        Ok(OisPathValuer {
            sign: match spec.side {
                FixedSide::Receiver => 1.0,
                FixedSide::Payer => -1.0,
            },
            fixed_rate: spec.fixed_rate,
            accruals: spec.schedule.accruals.clone(),
            on_grid,
            bonds,
        })
    }
}

impl PathValuer for OisPathValuer {
    fn value(&self, k: usize, path: &[Node]) -> f64 {
        let m = self.maturity_index();
        if k >= m {
            return 0.0;
        }
        let gamma = self.on_grid.next_pay[k];
        let node = &path[k];
        let reset = &path[self.on_grid.pay_idx[gamma - 1]];
        let n_pay = self.on_grid.n_payments();
        let mut v = 0.0;
        for n in gamma..=n_pay {
            v += self.accruals[n - 1] * self.fixed_rate * self.bonds[n - 1].value(k, node.c_dom);
        }
        let accrual = math::exp(node.i_c_dom - reset.i_c_dom);
        v += self.bonds[n_pay - 1].value(k, node.c_dom) - accrual;
        self.sign * v
    }

    fn maturity_index(&self) -> usize {
        *self.on_grid.pay_idx.last().unwrap()
    }
}

/// On-path MtMCCOIS revaluation under foreign-currency collateral and the
/// independence convention, from the spread payer's viewpoint when the spec
/// side is `Payer`:
///
/// ```text
/// V̄ = -B Σ_{n≥γ} δₙ D(t,Tₙ)Y(t,Tₙ)
///     + Σ_{n≥γ+1} D(t,Tₙ₋₁)(Y(t,Tₙ₋₁) - Y(t,Tₙ))
///     - Y(t,T_γ)·e^{∫c_dom from reset} + (fx(t)/fx(reset))·e^{∫c_for from reset}
/// ```
pub struct MtmccoisPathValuer {
    sign: f64,
    spread: f64,
    accruals: Vec<f64>,
    on_grid: ScheduleOnGrid,
    bonds_dom: Vec<BondCoeffs>,
    bonds_y: Vec<BondCoeffs>,
}

impl MtmccoisPathValuer {
    pub fn new(
        model: &MarketModel,
        fitted: &FittedModel,
        spec: &MtmccoisSpec,
    ) -> Result<Self, InstrumentError> {
        if spec.domestic != model.domestic || spec.foreign != model.foreign {
            return Err(InstrumentError::WrongCurrencies);
        }
        match &spec.collateral {
            CollateralConvention::Foreign(k) if *k == spec.foreign => {}
            _ => {
                return Err(InstrumentError::WrongCollateral(
                    "on-path MtMCCOIS revaluation assumes foreign-currency collateral",
                ))
            }
        }
        let on_grid = ScheduleOnGrid::new(&spec.schedule, fitted.grid())?;
        let bonds_dom = on_grid.pay_idx[1..]
            .iter()
            .map(|&m| bond_coefficients(&fitted.dom, fitted.grid(), m))
            .collect();
        let bonds_y = on_grid.pay_idx[1..]
            .iter()
            .map(|&m| bond_coefficients(&fitted.spread, fitted.grid(), m))
            .collect();
        Ok(MtmccoisPathValuer {
            sign: match spec.side {
                SpreadSide::Payer => 1.0,
                SpreadSide::Receiver => -1.0,
            },
            spread: spec.basis_spread,
            accruals: spec.schedule.accruals.clone(),
            on_grid,
            bonds_dom,
            bonds_y,
        })
    }
}

impl PathValuer for MtmccoisPathValuer {
    fn value(&self, k: usize, path: &[Node]) -> f64 {
        let m = self.maturity_index();
        if k >= m {
            return 0.0;
        }
        let gamma = self.on_grid.next_pay[k];
        let node = &path[k];
        let reset = &path[self.on_grid.pay_idx[gamma - 1]];
        let n_pay = self.on_grid.n_payments();

        let mut v = 0.0;
        let mut d_prev = 0.0;
        let mut y_prev = 0.0;
        for n in gamma..=n_pay {
            let d = self.bonds_dom[n - 1].value(k, node.c_dom);
            let y_fac = self.bonds_y[n - 1].value(k, node.y);
            v -= self.spread * self.accruals[n - 1] * d * y_fac;
            if n > gamma {
                v += d_prev * (y_prev - y_fac);
            }
            d_prev = d;
            y_prev = y_fac;
        }
        let y_gamma = self.bonds_y[gamma - 1].value(k, node.y);
        v -= y_gamma * math::exp(node.i_c_dom - reset.i_c_dom);
        v += math::exp(node.ln_fx - reset.ln_fx) * math::exp(node.i_c_for - reset.i_c_for);
        self.sign * v
    }

    fn maturity_index(&self) -> usize {
        *self.on_grid.pay_idx.last().unwrap()
    }
}

/// On-path value of the continuous-coupon swap paying `(w·y_s + c) ds`,
/// under foreign collateral with a deterministic domestic rate.
///
/// The coupon stream is discretized as the trapezoidal sum over grid nodes,
/// matching the estimators' time integration. For σ_y > 0 the exact affine
/// sums are tabulated per node on a fine spread grid and interpolated
/// linearly; with σ_y = 0 values are computed directly.
pub struct ContSwapPathValuer {
    weight: f64,
    constant: f64,
    maturity_idx: usize,
    /// Deterministic σ_y = 0 path values per node, or the interpolation
    /// tables per node.
    mode: ContSwapMode,
}

enum ContSwapMode {
    Deterministic(Vec<f64>),
    Table { y_lo: f64, step: f64, values: Vec<Vec<f64>> },
}

const CONT_TABLE_POINTS: usize = 1025;

impl ContSwapPathValuer {
    pub fn new(
        fitted: &FittedModel,
        weight: f64,
        constant: f64,
        maturity: f64,
    ) -> Result<Self, InstrumentError> {
        if fitted.dom.sigma != 0.0 {
            return Err(InstrumentError::DeterministicRateRequired);
        }
        let grid = fitted.grid();
        let m_idx = grid
            .index_of(maturity)
            .map_err(|_| InstrumentError::PaymentOffGrid { t: maturity })?;
        let dt = grid.dt();
        // coupon tables for every node up to maturity
        let coeffs: Vec<CouponCoeffs> =
            (0..=m_idx).map(|m| coupon_coefficients(&fitted.spread, grid, m)).collect();
        // deterministic domestic discounting: df(k,m) = exp(i_mean[k]-i_mean[m])
        let dom_mean = &fitted.dom.i_mean;

        let eval = |k: usize, y: f64| -> f64 {
            let mut v = 0.0;
            for m in k..=m_idx {
                let w_m = if m == k || m == m_idx { 0.5 * dt } else { dt };
                let df_c = math::exp(dom_mean[k] - dom_mean[m]);
                v += w_m * df_c * coeffs[m].value(k, y, weight, constant);
            }
            v
        };

        let mode = if fitted.spread.sigma == 0.0 {
            ContSwapMode::Deterministic(
                (0..=m_idx).map(|k| eval(k, fitted.spread.mean[k])).collect(),
            )
        } else {
            // cover the simulated range generously: mean path +- 10 sd
            let mut var = 0.0;
            let mut sd_max: f64 = 0.0;
            let phi2 = fitted.spread.phi * fitted.spread.phi;
            let s2dt = fitted.spread.sigma * fitted.spread.sigma * dt;
            for _ in 0..=m_idx {
                var = phi2 * var + s2dt;
                sd_max = sd_max.max(math::sqrt(var));
            }
            let mean_lo = fitted.spread.mean.iter().cloned().fold(f64::INFINITY, f64::min);
            let mean_hi = fitted.spread.mean.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let y_lo = mean_lo - 10.0 * sd_max;
            let y_hi = mean_hi + 10.0 * sd_max;
            let step = (y_hi - y_lo) / (CONT_TABLE_POINTS - 1) as f64;
            let values = (0..=m_idx)
                .map(|k| {
                    (0..CONT_TABLE_POINTS).map(|i| eval(k, y_lo + i as f64 * step)).collect()
                })
                .collect();
            ContSwapMode::Table { y_lo, step, values }
        };

        Ok(ContSwapPathValuer { weight, constant, maturity_idx: m_idx, mode })
    }

    pub fn coupon(&self) -> (f64, f64) {
        (self.weight, self.constant)
    }
}

impl PathValuer for ContSwapPathValuer {
    fn value(&self, k: usize, path: &[Node]) -> f64 {
        if k >= self.maturity_idx {
            return 0.0;
        }
        match &self.mode {
            ContSwapMode::Deterministic(v) => v[k],
            ContSwapMode::Table { y_lo, step, values } => {
                // Catmull-Rom cubic on the uniform table
                let row = &values[k];
                let x = (path[k].y - y_lo) / step;
                let i = (x as isize).clamp(1, (row.len() - 3) as isize) as usize;
                let t = x - i as f64;
                let (f0, f1, f2, f3) = (row[i - 1], row[i], row[i + 1], row[i + 2]);
                f1 + 0.5
                    * t
                    * (f2 - f0
                        + t * (2.0 * f0 - 5.0 * f1 + 4.0 * f2 - f3
                            + t * (3.0 * (f1 - f2) + f3 - f0)))
            }
        }
    }

    fn maturity_index(&self) -> usize {
        self.maturity_idx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{simulate, FittedModel, Paths, SimulationConfig};
    use crate::market::test_support::flat_model;
    use crate::market::HullWhiteParams;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn jpy() -> Currency {
        Currency::new("JPY").unwrap()
    }

    fn usd() -> Currency {
        Currency::new("USD").unwrap()
    }

    #[test]
    fn fx_forward_at_zero_is_spot() {
        let m = flat_model(0.05, 0.01, 0.0);
        let mut m = m;
        m.spot_fx = 100.0;
        let fwd = fx_forward(&m, (&jpy(), &usd()), &usd(), 0.0).unwrap();
        assert_eq!(fwd, 100.0);
    }

    #[test]
    fn fx_forward_deterministic_rates() {
        // pair (i,j) with c_i = 5%, c_j = 1%, y = 0, spot 100, T = 1:
        // forward = 100·e^{0.04}
        let mut m = flat_model(0.05, 0.01, 0.0);
        m.spot_fx = 100.0;
        let dom = jpy();
        let f = usd();
        let fwd = fx_forward(&m, (&dom, &f), &f, 1.0).unwrap();
        assert_relative_eq!(fwd, 100.0 * math::exp(0.04), epsilon = 1e-12);
        assert_relative_eq!(fwd, 104.0811, epsilon = 1e-4);
        // collateral currency is irrelevant when y = 0
        let fwd2 = fx_forward(&m, (&dom, &f), &dom, 1.0).unwrap();
        assert_relative_eq!(fwd, fwd2, epsilon = 1e-14);
    }

    #[test]
    fn ois_par_single_period_flat() {
        let m = flat_model(0.02, 0.03, 0.0);
        let sched = Schedule::regular(1.0, 1).unwrap();
        let par = ois_par_rate(&m, &jpy(), &sched, &CollateralConvention::DealCurrency).unwrap();
        assert_relative_eq!(par, math::exp(0.02) - 1.0, epsilon = 1e-14);
        assert_relative_eq!(par, 0.0202013, epsilon = 1e-7);
    }

    #[test]
    fn ois_par_roundtrip_is_exact() {
        let m = flat_model(0.017, 0.03, 0.0);
        let sched = Schedule::regular(10.0, 1).unwrap();
        let par = ois_par_rate(&m, &jpy(), &sched, &CollateralConvention::DealCurrency).unwrap();
        let spec = OisSpec {
            currency: jpy(),
            schedule: sched,
            fixed_rate: par,
            side: FixedSide::Receiver,
            collateral: CollateralConvention::DealCurrency,
        };
        let price = ois_value(&m, &spec).unwrap();
        assert!(math::abs(price.value) < 1e-14);
    }

    #[test]
    fn ois_two_period_hand_evaluation() {
        // upward-sloping: 1% on [0,1), 2% beyond
        let jpy = jpy();
        let mut m = flat_model(0.0, 0.03, 0.0);
        m.collateral.insert(
            jpy.clone(),
            crate::curves::TermStructure::new(&[(0.0, 0.01), (1.0, 0.02), (40.0, 0.02)]).unwrap(),
        );
        let d1 = math::exp(-0.01);
        let d2 = math::exp(-0.03);
        let sched = Schedule::regular(2.0, 1).unwrap();
        let par = ois_par_rate(&m, &jpy, &sched, &CollateralConvention::DealCurrency).unwrap();
        assert_relative_eq!(par, (1.0 - d2) / (d1 + d2), epsilon = 1e-14);
        let spec = OisSpec {
            currency: jpy,
            schedule: sched,
            fixed_rate: 0.015,
            side: FixedSide::Receiver,
            collateral: CollateralConvention::DealCurrency,
        };
        let got = ois_value(&m, &spec).unwrap().value;
        let want = 0.015 * (d1 + d2) - (1.0 - d2);
        assert_relative_eq!(got, want, epsilon = 1e-14);
    }

    #[test]
    fn ois_empty_schedule_errors() {
        assert!(matches!(Schedule::new(0.0, alloc::vec![]), Err(InstrumentError::EmptySchedule)));
    }

    #[test]
    fn clean_price_is_sum_of_flows() {
        let m = flat_model(0.015, 0.03, -0.003);
        let spec = OisSpec {
            currency: jpy(),
            schedule: Schedule::regular(5.0, 1).unwrap(),
            fixed_rate: 0.02,
            side: FixedSide::Payer,
            collateral: CollateralConvention::DealCurrency,
        };
        let p = ois_value(&m, &spec).unwrap();
        let total: f64 = p.flows.iter().map(|f| f.1).sum();
        assert_eq!(p.value, total);
    }

    #[test]
    fn mtmccois_par_zero_spread() {
        let m = flat_model(0.02, 0.03, 0.0);
        let sched = Schedule::regular(10.0, 4).unwrap();
        let b = mtmccois_par_spread(&m, &jpy(), &usd(), &sched).unwrap();
        assert!(math::abs(b) < 1e-15);
    }

    #[test]
    fn mtmccois_par_roundtrip_and_average_approximation() {
        let m = flat_model(0.02, 0.035, -0.003);
        let sched = Schedule::regular(10.0, 4).unwrap();
        let b = mtmccois_par_spread(&m, &jpy(), &usd(), &sched).unwrap();
        // flat y = -30bp: par spread within 1bp of the average spread
        assert!(math::abs(b - (-0.003)) < 1e-4, "b = {b}");
        let spec = MtmccoisSpec {
            domestic: jpy(),
            foreign: usd(),
            schedule: sched,
            basis_spread: b,
            side: SpreadSide::Receiver,
            collateral: CollateralConvention::Foreign(usd()),
        };
        let v = mtmccois_value(&m, &spec).unwrap();
        assert!(math::abs(v.value) < 1e-14);
    }

    #[test]
    fn mtmccois_average_spread_bound_over_range() {
        // |B_par - mean y| <= 2bp for flat y in [-100bp, 100bp], 10y quarterly
        let sched = Schedule::regular(10.0, 4).unwrap();
        let mut worst: f64 = 0.0;
        for i in -10..=10 {
            let y = i as f64 * 1e-3;
            let m = flat_model(0.02, 0.035, y);
            let b = mtmccois_par_spread(&m, &jpy(), &usd(), &sched).unwrap();
            worst = worst.max(math::abs(b - y));
        }
        assert!(worst < 2e-4, "worst deviation {worst}");
    }

    #[test]
    fn mtmccois_rejects_domestic_collateral() {
        let m = flat_model(0.02, 0.035, -0.003);
        let spec = MtmccoisSpec {
            domestic: jpy(),
            foreign: usd(),
            schedule: Schedule::regular(2.0, 4).unwrap(),
            basis_spread: 0.0,
            side: SpreadSide::Receiver,
            collateral: CollateralConvention::DealCurrency,
        };
        assert!(matches!(
            mtmccois_value(&m, &spec),
            Err(InstrumentError::WrongCollateral(_))
        ));
    }

    #[test]
    fn portfolio_additivity() {
        let m = flat_model(0.015, 0.03, -0.003);
        let mk = |rate: f64, side| OisSpec {
            currency: jpy(),
            schedule: Schedule::regular(7.0, 1).unwrap(),
            fixed_rate: rate,
            side,
            collateral: CollateralConvention::DealCurrency,
        };
        let a = ois_value(&m, &mk(0.02, FixedSide::Receiver)).unwrap();
        let b = ois_value(&m, &mk(0.01, FixedSide::Payer)).unwrap();
        // same schedule: net flows add cashflow by cashflow
        let mut net = 0.0;
        for (fa, fb) in a.flows.iter().zip(b.flows.iter()) {
            net += fa.1 + fb.1;
        }
        assert_relative_eq!(net, a.value + b.value, epsilon = 1e-15);
    }

    // -- on-path revaluation ------------------------------------------------

    fn fitted_for(model: &MarketModel, cfg: &SimulationConfig) -> FittedModel {
        FittedModel::fit(model, cfg).unwrap()
    }

    #[test]
    fn ois_on_path_at_zero_matches_closed_form() {
        let m = flat_model(0.02, 0.035, -0.003);
        let cfg = SimulationConfig::new(1, 52, 10.0, 1);
        let fitted = fitted_for(&m, &cfg);
        let sched = Schedule::regular(10.0, 1).unwrap();
        let spec = OisSpec {
            currency: jpy(),
            schedule: sched,
            fixed_rate: 0.018,
            side: FixedSide::Receiver,
            collateral: CollateralConvention::DealCurrency,
        };
        let valuer = OisPathValuer::new(&m, &fitted, &spec).unwrap();
        let paths = simulate(&m, &cfg).unwrap();
        let v0 = valuer.value(0, paths.path(0));
        let closed = ois_value(&m, &spec).unwrap().value;
        assert!(math::abs(v0 - closed) < 1e-12, "on-path {v0} closed {closed}");
    }

    #[test]
    fn ois_on_path_par_is_zero_at_inception() {
        let m = flat_model(0.02, 0.035, -0.003);
        let cfg = SimulationConfig::new(1, 52, 10.0, 1);
        let fitted = fitted_for(&m, &cfg);
        let sched = Schedule::regular(10.0, 1).unwrap();
        let par = ois_par_rate(&m, &jpy(), &sched, &CollateralConvention::DealCurrency).unwrap();
        let spec = OisSpec {
            currency: jpy(),
            schedule: sched,
            fixed_rate: par,
            side: FixedSide::Payer,
            collateral: CollateralConvention::DealCurrency,
        };
        let valuer = OisPathValuer::new(&m, &fitted, &spec).unwrap();
        let paths = simulate(&m, &cfg).unwrap();
        assert!(math::abs(valuer.value(0, paths.path(0))) < 1e-12);
    }

    #[test]
    fn ois_on_path_zero_vol_matches_deterministic_revaluation() {
        let mut m = flat_model(0.02, 0.035, -0.003);
        m.hw_domestic = HullWhiteParams::new(0.015, 0.0).unwrap();
        m.hw_foreign = HullWhiteParams::new(0.015, 0.0).unwrap();
        m.hw_spread = HullWhiteParams::new(0.015, 0.0).unwrap();
        m.fx_vol = 0.0;
        let cfg = SimulationConfig::new(1, 52, 5.0, 1);
        let fitted = fitted_for(&m, &cfg);
        let spec = OisSpec {
            currency: jpy(),
            schedule: Schedule::regular(5.0, 1).unwrap(),
            fixed_rate: 0.021,
            side: FixedSide::Receiver,
            collateral: CollateralConvention::DealCurrency,
        };
        let valuer = OisPathValuer::new(&m, &fitted, &spec).unwrap();
        let paths = simulate(&m, &cfg).unwrap();
        let path = paths.path(0);
        // flat curve: at t = 2.5 the remaining swap is a 2.5y swap on the
        // same flat curve, scaled by the advance-reset accrual on the float
        let k = fitted.grid().index_of(2.5).unwrap();
        let got = valuer.value(k, path);
        let d = |u: f64| math::exp(-0.02 * u);
        let want = 0.021 * (d(0.5) + d(1.5) + d(2.5))
            - math::exp(0.02 * 0.5)
            + d(2.5);
        assert!(math::abs(got - want) < 1e-12, "got {got} want {want}");
    }

    #[test]
    fn mtmccois_on_path_at_zero_matches_closed_form() {
        let m = flat_model(0.02, 0.035, -0.003);
        let cfg = SimulationConfig::new(1, 52, 10.0, 1);
        let fitted = fitted_for(&m, &cfg);
        let sched = Schedule::regular(10.0, 4).unwrap();
        for side in [SpreadSide::Payer, SpreadSide::Receiver] {
            let spec = MtmccoisSpec {
                domestic: jpy(),
                foreign: usd(),
                schedule: sched.clone(),
                basis_spread: -0.0025,
                side,
                collateral: CollateralConvention::Foreign(usd()),
            };
            let valuer = MtmccoisPathValuer::new(&m, &fitted, &spec).unwrap();
            let paths = simulate(&m, &cfg).unwrap();
            let v0 = valuer.value(0, paths.path(0));
            let closed = mtmccois_value(&m, &spec).unwrap().value;
            assert!(math::abs(v0 - closed) < 1e-12, "on-path {v0} closed {closed}");
        }
    }

    #[test]
    fn mtmccois_on_path_zero_vol_deterministic() {
        let mut m = flat_model(0.02, 0.035, -0.003);
        m.hw_domestic = HullWhiteParams::new(0.015, 0.0).unwrap();
        m.hw_foreign = HullWhiteParams::new(0.015, 0.0).unwrap();
        m.hw_spread = HullWhiteParams::new(0.015, 0.0).unwrap();
        m.fx_vol = 0.0;
        let cfg = SimulationConfig::new(1, 52, 4.0, 1);
        let fitted = fitted_for(&m, &cfg);
        let sched = Schedule::regular(4.0, 4).unwrap();
        let b = mtmccois_par_spread(&m, &jpy(), &usd(), &sched).unwrap();
        let spec = MtmccoisSpec {
            domestic: jpy(),
            foreign: usd(),
            schedule: sched,
            basis_spread: b,
            side: SpreadSide::Payer,
            collateral: CollateralConvention::Foreign(usd()),
        };
        let valuer = MtmccoisPathValuer::new(&m, &fitted, &spec).unwrap();
        let paths = simulate(&m, &cfg).unwrap();
        // on flat curves at par, the remaining value on any reset date is 0
        for t in [1.0, 2.0, 3.0] {
            let k = fitted.grid().index_of(t).unwrap();
            let v = valuer.value(k, paths.path(0));
            assert!(math::abs(v) < 1e-12, "t={t} v={v}");
        }
        assert_eq!(valuer.value(fitted.grid().index_of(4.0).unwrap(), paths.path(0)), 0.0);
    }

    /// Independent nested Monte Carlo for the conditional OIS value: resume
    /// the domestic-rate recursion from the outer node and price the
    /// remaining flows by brute force.
    #[test]
    fn ois_on_path_matches_nested_mc() {
        let m = flat_model(0.02, 0.035, -0.003);
        let cfg = SimulationConfig::new(8, 26, 5.0, 31);
        let fitted = fitted_for(&m, &cfg);
        let spec = OisSpec {
            currency: jpy(),
            schedule: Schedule::regular(5.0, 1).unwrap(),
            fixed_rate: 0.022,
            side: FixedSide::Receiver,
            collateral: CollateralConvention::DealCurrency,
        };
        let valuer = OisPathValuer::new(&m, &fitted, &spec).unwrap();
        let paths = simulate(&m, &cfg).unwrap();
        let grid = fitted.grid();
        let k = grid.index_of(2.5).unwrap();
        let path = paths.path(3);
        let closed = valuer.value(k, path);

        // inner simulation
        let f = &fitted.dom;
        let dt = grid.dt();
        let sdt = math::sqrt(dt);
        let pay_idx: Vec<usize> =
            spec.schedule.payment_times.iter().map(|&t| grid.index_of(t).unwrap()).collect();
        let reset_idx = grid.index_of(2.0).unwrap();
        let acc0 = path[k].i_c_dom - path[reset_idx].i_c_dom;
        let mut rng = ChaCha12Rng::seed_from_u64(555);
        let n_inner = 4000;
        let (mut sum, mut sumsq) = (0.0, 0.0);
        for _ in 0..n_inner {
            let mut x = path[k].c_dom;
            let mut disc = 0.0; // ∫_t^s c
            let mut period = acc0; // ∫ from last reset
            let mut pv = 0.0;
            let mut pay = 2usize; // payments T3, T4, T5 remain; index into pay_idx
            for step in k..*pay_idx.last().unwrap() {
                let z: f64 = {
                    // Box-Muller on two uniforms, independent of the library sampler
                    let u1: f64 = rng.gen::<f64>().max(1e-16);
                    let u2: f64 = rng.gen();
                    math::sqrt(-2.0 * math::ln(u1))
                        * libm::cos(2.0 * core::f64::consts::PI * u2)
                };
                let x2 = f.phi * x + f.drift_step[step] + f.sigma * sdt * z;
                let d_i = 0.5 * (x + x2) * dt;
                disc += d_i;
                period += d_i;
                x = x2;
                if step + 1 == pay_idx[pay] {
                    let flow = spec.schedule.accruals[pay] * spec.fixed_rate
                        - (math::exp(period) - 1.0);
                    pv += math::exp(-disc) * flow;
                    period = 0.0;
                    pay += 1;
                }
            }
            sum += pv;
            sumsq += pv * pv;
        }
        let mean = sum / n_inner as f64;
        let se = math::sqrt((sumsq / n_inner as f64 - mean * mean) / n_inner as f64);
        assert!(
            math::abs(mean - closed) < 3.0 * se,
            "nested {mean} closed {closed} se {se}"
        );
    }

    /// Nested Monte Carlo for the conditional MtMCCOIS value, resuming the
    /// full four-factor recursion from the outer node.
    #[test]
    fn mtmccois_on_path_matches_nested_mc() {
        let m = flat_model(0.02, 0.035, -0.003);
        let cfg = SimulationConfig::new(8, 52, 3.0, 77);
        let fitted = fitted_for(&m, &cfg);
        let sched = Schedule::regular(3.0, 4).unwrap();
        let spec = MtmccoisSpec {
            domestic: jpy(),
            foreign: usd(),
            schedule: sched,
            basis_spread: -0.003,
            side: SpreadSide::Payer,
            collateral: CollateralConvention::Foreign(usd()),
        };
        let valuer = MtmccoisPathValuer::new(&m, &fitted, &spec).unwrap();
        let paths = simulate(&m, &cfg).unwrap();
        let grid = fitted.grid();
        // mid-period node between T=1.5 and T=1.75
        let k = grid.index_of(1.5).unwrap() + 3;
        let path = paths.path(5);
        let closed = valuer.value(k, path);

        let dt = grid.dt();
        let sdt = math::sqrt(dt);
        let pay_idx: Vec<usize> =
            spec.schedule.payment_times.iter().map(|&t| grid.index_of(t).unwrap()).collect();
        let reset_idx = grid.index_of(1.5).unwrap();
        let chol = m.correlation.cholesky();
        let mut rng = ChaCha12Rng::seed_from_u64(4242);
        let mut normal = || -> f64 {
            let u1: f64 = rng.gen::<f64>().max(1e-16);
            let u2: f64 = rng.gen();
            math::sqrt(-2.0 * math::ln(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
        };
        let n_inner = 4000;
        let (mut sum, mut sumsq) = (0.0, 0.0);
        for _ in 0..n_inner {
            let node = path[k];
            let (mut cd, mut cf, mut y, mut lfx) = (node.c_dom, node.c_for, node.y, node.ln_fx);
            let mut disc = 0.0; // ∫(c_dom + y) from t
            let mut acc_d = node.i_c_dom - path[reset_idx].i_c_dom;
            let mut acc_f = node.i_c_for - path[reset_idx].i_c_for;
            let mut lfx_reset = path[reset_idx].ln_fx;
            let mut pv = 0.0;
            let mut pay = 6usize; // next payment T7 = 1.75 has index 6
            for step in k..*pay_idx.last().unwrap() {
                let x = [normal(), normal(), normal(), normal()];
                let mut z = [0.0f64; 4];
                for i in 0..4 {
                    for j in 0..=i {
                        z[i] += chol[i][j] * x[j];
                    }
                }
                let cd2 = fitted.dom.phi * cd + fitted.dom.drift_step[step]
                    + fitted.dom.sigma * sdt * z[0];
                let cf2 = fitted.foreign.phi * cf
                    + fitted.foreign.drift_step[step]
                    + fitted.foreign.quanto_step
                    + fitted.foreign.sigma * sdt * z[1];
                let y2 = fitted.spread.phi * y + fitted.spread.drift_step[step]
                    + fitted.spread.sigma * sdt * z[2];
                let d_icd = 0.5 * (cd + cd2) * dt;
                let d_icf = 0.5 * (cf + cf2) * dt;
                let d_iy = 0.5 * (y + y2) * dt;
                lfx += d_icd - d_icf + d_iy - 0.5 * m.fx_vol * m.fx_vol * dt
                    + m.fx_vol * sdt * z[3];
                cd = cd2;
                cf = cf2;
                y = y2;
                disc += d_icd + d_iy;
                acc_d += d_icd;
                acc_f += d_icf;
                if step + 1 == pay_idx[pay] {
                    let flow = -math::exp(acc_d) - spec.schedule.accruals[pay] * spec.basis_spread
                        + math::exp(lfx - lfx_reset) * math::exp(acc_f);
                    pv += math::exp(-disc) * flow;
                    acc_d = 0.0;
                    acc_f = 0.0;
                    lfx_reset = lfx;
                    pay += 1;
                }
            }
            sum += pv;
            sumsq += pv * pv;
        }
        let mean = sum / n_inner as f64;
        let se = math::sqrt((sumsq / n_inner as f64 - mean * mean) / n_inner as f64);
        assert!(
            math::abs(mean - closed) < 3.0 * se,
            "nested {mean} closed {closed} se {se}"
        );
    }

    #[test]
    fn fx_forward_martingale_under_simulation() {
        // E[e^{-(∫c_dom + ∫y)}·fx(T)] = D^{(dom,for)}(0,T)·fwd(0,T;for)
        let m = flat_model(0.02, 0.035, -0.003);
        let cfg = SimulationConfig::new(20_000, 26, 5.0, 2024);
        let paths = simulate(&m, &cfg).unwrap();
        let t = 5.0;
        let k = paths.grid().index_of(t).unwrap();
        let (mut sum, mut sumsq) = (0.0, 0.0);
        for p in 0..cfg.n_paths {
            let node = paths.path(p)[k];
            let v = math::exp(-(node.i_c_dom + node.i_y)) * math::exp(node.ln_fx);
            sum += v;
            sumsq += v * v;
        }
        let n = cfg.n_paths as f64;
        let mean = sum / n;
        let se = math::sqrt((sumsq / n - mean * mean) / n);
        let fwd = fx_forward(&m, (&m.domestic.clone(), &m.foreign.clone()), &usd(), t).unwrap();
        let dfk = m
            .discount_foreign_collateral(&m.domestic.clone(), &m.foreign.clone(), t)
            .unwrap();
        let target = dfk * fwd;
        assert!(
            math::abs(mean - target) < 3.0 * se,
            "mean {mean} target {target} se {se}"
        );
    }

    #[test]
    fn continuous_par_and_valuer_at_zero() {
        let mut m = flat_model(0.02, 0.035, -0.003);
        m.hw_domestic = HullWhiteParams::new(0.015, 0.0).unwrap();
        let b = continuous_par_spread(&m, 10.0).unwrap();
        // flat spread curve: par equals the flat spread exactly
        assert_relative_eq!(b, -0.003, epsilon = 1e-12);

        let cfg = SimulationConfig::new(1, 52, 10.0, 9);
        let fitted = FittedModel::fit(&m, &cfg).unwrap();
        // payer receives (y - B) ds
        let valuer = ContSwapPathValuer::new(&fitted, 1.0, -b, 10.0).unwrap();
        let paths = simulate(&m, &cfg).unwrap();
        let v0 = valuer.value(0, paths.path(0));
        // at par the grid-discretized value at 0 is ~0 up to trapezoid error
        assert!(math::abs(v0) < 1e-6, "v0 = {v0}");
    }

    #[test]
    fn continuous_valuer_requires_deterministic_rate() {
        let m = flat_model(0.02, 0.035, -0.003);
        let cfg = SimulationConfig::new(1, 52, 5.0, 9);
        let fitted = FittedModel::fit(&m, &cfg).unwrap();
        assert!(matches!(
            ContSwapPathValuer::new(&fitted, 1.0, 0.0, 5.0),
            Err(InstrumentError::DeterministicRateRequired)
        ));
    }

    #[test]
    fn continuous_valuer_table_matches_direct_sum() {
        let mut m = flat_model(0.02, 0.035, -0.003);
        m.hw_domestic = HullWhiteParams::new(0.015, 0.0).unwrap();
        let cfg = SimulationConfig::new(4, 52, 5.0, 13);
        let fitted = FittedModel::fit(&m, &cfg).unwrap();
        let valuer = ContSwapPathValuer::new(&fitted, 1.0, 0.003, 5.0).unwrap();
        let paths = simulate(&m, &cfg).unwrap();
        let grid = fitted.grid();
        let dt = grid.dt();
        let m_idx = valuer.maturity_index();
        for (p, k) in [(0usize, 30usize), (1, 117), (3, 233)] {
            let node = paths.path(p)[k];
            let coeffs: Vec<_> = (k..=m_idx)
                .map(|mm| coupon_coefficients(&fitted.spread, grid, mm))
                .collect();
            let mut want = 0.0;
            for mm in k..=m_idx {
                let w = if mm == k || mm == m_idx { 0.5 * dt } else { dt };
                let df_c = math::exp(fitted.dom.i_mean[k] - fitted.dom.i_mean[mm]);
                want += w * df_c * coeffs[mm - k].value(k, node.y, 1.0, 0.003);
            }
            let got = valuer.value(k, paths.path(p));
            assert!(math::abs(got - want) < 1e-9, "table {got} direct {want}");
        }
    }
}
