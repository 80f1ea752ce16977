//! Term-structure containers and curve calibration.
//!
//! All curves are piecewise-flat in the *instantaneous forward* rate, so
//! every discount integral is exact (no quadrature error) and the bootstrap
//! is strictly local: each quote pins the forward on one segment.
//!
//! Two curve families live here:
//!
//! - [`TermStructure`]: forward collateral rates `c(0,t)` per currency.
//! - [`SpreadCurve`]: forward funding spreads `y(0,t)`, e.g. the
//!   cross-currency spread backed out of CCS markets. These are routinely
//!   negative.
//!
//! Curves are immutable after construction and safe to share across threads.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::math;

/// Currency identifier, e.g. `"JPY"`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Currency(alloc::string::String);

impl Currency {
    pub fn new(code: &str) -> Result<Self, CurveError> {
        if code.is_empty() {
            return Err(CurveError::EmptyCurrencyCode);
        }
        Ok(Currency(alloc::string::String::from(code)))
    }

    pub fn code(&self) -> &str {
        &self.0
    }
}

impl core::fmt::Display for Currency {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Errors from curve construction, evaluation and calibration.
#[derive(Debug, Clone, PartialEq)]
pub enum CurveError {
    EmptyCurrencyCode,
    EmptyPillars,
    FirstTenorNotZero,
    NonAscendingTenors,
    NonFiniteValue,
    NegativeTime,
    EmptyQuotes,
    NonAscendingMaturities,
    /// Quote maturity is not a whole number of coupon periods.
    QuoteOffSchedule { maturity: f64 },
    /// Root finder could not bracket/solve the pillar forward.
    CalibrationFailure { pillar: usize, maturity: f64 },
    /// No spread curve found for the requested currency pair.
    MissingSpreadPair { from: Currency, to: Currency },
}

impl core::fmt::Display for CurveError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            CurveError::EmptyCurrencyCode => write!(f, "currency code must be nonempty"),
            CurveError::EmptyPillars => write!(f, "curve needs at least one pillar"),
            CurveError::FirstTenorNotZero => write!(f, "first pillar tenor must be 0"),
            CurveError::NonAscendingTenors => write!(f, "pillar tenors must be strictly ascending"),
            CurveError::NonFiniteValue => write!(f, "curve values must be finite"),
            CurveError::NegativeTime => write!(f, "time must be nonnegative"),
            CurveError::EmptyQuotes => write!(f, "quote list is empty"),
            CurveError::NonAscendingMaturities => {
                write!(f, "quote maturities must be strictly ascending and positive")
            }
            CurveError::QuoteOffSchedule { maturity } => {
                write!(f, "quote maturity {maturity} is not a whole number of coupon periods")
            }
            CurveError::CalibrationFailure { pillar, maturity } => {
                write!(f, "bootstrap failed at pillar {pillar} (maturity {maturity}y): root not bracketed")
            }
            CurveError::MissingSpreadPair { from, to } => {
                write!(f, "no spread curve for pair ({from},{to})")
            }
        }
    }
}

/// Piecewise-constant function of time with knots starting at 0.
///
/// `value(t)` is `values[i]` for `t` in `[tenors[i], tenors[i+1])`; the last
/// value extends flat beyond the last knot.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseFlat {
    tenors: Vec<f64>,
    values: Vec<f64>,
    /// Cumulative integral from 0 to each knot.
    cumulative: Vec<f64>,
}

impl PiecewiseFlat {
    pub fn new(pillars: &[(f64, f64)]) -> Result<Self, CurveError> {
        if pillars.is_empty() {
            return Err(CurveError::EmptyPillars);
        }
        if pillars[0].0 != 0.0 {
            return Err(CurveError::FirstTenorNotZero);
        }
        let mut tenors = Vec::with_capacity(pillars.len());
        let mut values = Vec::with_capacity(pillars.len());
        for &(t, v) in pillars {
            if !t.is_finite() || !v.is_finite() {
                return Err(CurveError::NonFiniteValue);
            }
            if let Some(&last) = tenors.last() {
                if t <= last {
                    return Err(CurveError::NonAscendingTenors);
                }
            }
            tenors.push(t);
            values.push(v);
        }
        let mut cumulative = Vec::with_capacity(tenors.len());
        cumulative.push(0.0);
        for i in 1..tenors.len() {
            let seg = values[i - 1] * (tenors[i] - tenors[i - 1]);
            cumulative.push(cumulative[i - 1] + seg);
        }
        Ok(PiecewiseFlat { tenors, values, cumulative })
    }

    pub fn constant(v: f64) -> Self {
        PiecewiseFlat::new(&[(0.0, v)]).expect("constant curve")
    }

    pub fn tenors(&self) -> &[f64] {
        &self.tenors
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Last knot; the function is flat beyond it.
    pub fn last_tenor(&self) -> f64 {
        *self.tenors.last().unwrap()
    }

    fn segment_index(&self, t: f64) -> usize {
        // index of the segment containing t (t >= 0)
        match self.tenors.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.values[self.segment_index(t.max(0.0))]
    }

    /// Exact integral from 0 to `t` (`t >= 0`).
    pub fn integral_from_zero(&self, t: f64) -> f64 {
        let i = self.segment_index(t);
        self.cumulative[i] + self.values[i] * (t - self.tenors[i])
    }

    /// Exact integral on `[a, b]`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.integral_from_zero(b) - self.integral_from_zero(a)
    }

    pub fn negated(&self) -> Self {
        let pillars: Vec<(f64, f64)> = self
            .tenors
            .iter()
            .zip(self.values.iter())
            .map(|(&t, &v)| (t, -v))
            .collect();
        PiecewiseFlat::new(&pillars).unwrap()
    }

    /// Pointwise difference `self - other` on the merged knot set.
    pub fn sub(&self, other: &Self) -> Self {
        let mut knots: Vec<f64> = self.tenors.iter().chain(other.tenors.iter()).copied().collect();
        knots.sort_by(|a, b| a.partial_cmp(b).unwrap());
        knots.dedup();
        let pillars: Vec<(f64, f64)> =
            knots.iter().map(|&t| (t, self.value(t) - other.value(t))).collect();
        PiecewiseFlat::new(&pillars).unwrap()
    }
}

macro_rules! forward_curve_impl {
    ($name:ident, $rate_doc:expr) => {
        impl $name {
            /// Builds the curve from `(tenor, rate)` pillars. The first tenor
            /// must be 0 and tenors must be strictly ascending.
            pub fn new(pillars: &[(f64, f64)]) -> Result<Self, CurveError> {
                Ok(Self(PiecewiseFlat::new(pillars)?))
            }

            pub fn flat(rate: f64) -> Self {
                Self(PiecewiseFlat::constant(rate))
            }

            #[doc = $rate_doc]
            pub fn forward(&self, t: f64) -> f64 {
                self.0.value(t)
            }

            /// Exact integral of the forward on `[a, b]`.
            pub fn integral(&self, a: f64, b: f64) -> f64 {
                self.0.integral(a, b)
            }

            /// Last pillar tenor. The curve extrapolates flat beyond it, but
            /// consumers that care (the simulator) must opt in explicitly.
            pub fn covered_to(&self) -> f64 {
                self.0.last_tenor()
            }

            pub fn pillars(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
                self.0.tenors().iter().copied().zip(self.0.values().iter().copied())
            }

            pub fn as_piecewise(&self) -> &PiecewiseFlat {
                &self.0
            }

            pub fn negated(&self) -> Self {
                Self(self.0.negated())
            }
        }
    };
}

/// Forward collateral-rate curve `c(0,t)` of one currency.
#[derive(Debug, Clone, PartialEq)]
pub struct TermStructure(PiecewiseFlat);
forward_curve_impl!(TermStructure, "Instantaneous forward collateral rate at `t`.");

/// Forward funding-spread curve `y(0,t)`; values may be negative.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadCurve(PiecewiseFlat);
forward_curve_impl!(SpreadCurve, "Instantaneous forward funding spread at `t`.");

impl SpreadCurve {
    pub fn zero() -> Self {
        SpreadCurve::flat(0.0)
    }

    /// Pointwise difference of two spread curves.
    pub fn difference(&self, other: &SpreadCurve) -> SpreadCurve {
        SpreadCurve(self.0.sub(&other.0))
    }
}

/// Collateralized zero-coupon bond price `exp(-∫₀ᵀ c(0,s) ds)`.
///
/// The piecewise-flat forward integral is computed exactly.
pub fn discount_factor(curve: &TermStructure, t: f64) -> Result<f64, CurveError> {
    if t < 0.0 {
        return Err(CurveError::NegativeTime);
    }
    Ok(math::exp(-curve.integral(0.0, t)))
}

/// Foreign-collateralized zero-coupon bond under the independence
/// convention: `D(0,T) · exp(-∫₀ᵀ y(0,s) ds)`.
pub fn foreign_collateral_df(
    dom: &TermStructure,
    spread: &SpreadCurve,
    t: f64,
) -> Result<f64, CurveError> {
    Ok(discount_factor(dom, t)? * math::exp(-spread.integral(0.0, t)))
}

/// Deterministic discount functions derived from one collateral curve and
/// one cross-currency spread curve.
#[derive(Debug, Clone, Copy)]
pub struct DiscountSet<'a> {
    pub collateral: &'a TermStructure,
    pub spread: &'a SpreadCurve,
}

impl<'a> DiscountSet<'a> {
    pub fn new(collateral: &'a TermStructure, spread: &'a SpreadCurve) -> Self {
        DiscountSet { collateral, spread }
    }

    /// Domestic-collateral discount factor.
    pub fn discount(&self, t: f64) -> Result<f64, CurveError> {
        discount_factor(self.collateral, t)
    }

    /// Spread factor `Y(0,T) = exp(-∫₀ᵀ y(0,s) ds)`.
    pub fn spread_factor(&self, t: f64) -> Result<f64, CurveError> {
        if t < 0.0 {
            return Err(CurveError::NegativeTime);
        }
        Ok(math::exp(-self.spread.integral(0.0, t)))
    }

    /// Foreign-collateralized discount factor `D·Y`.
    pub fn foreign_collateral(&self, t: f64) -> Result<f64, CurveError> {
        foreign_collateral_df(self.collateral, self.spread, t)
    }
}

/// One market quote: `(maturity in years, quoted level)`.
///
/// For OIS the level is the par fixed rate; for MtM cross-currency OIS it is
/// the par basis spread.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quote {
    pub maturity: f64,
    pub value: f64,
}

impl Quote {
    pub fn new(maturity: f64, value: f64) -> Self {
        Quote { maturity, value }
    }
}

fn validate_quotes(quotes: &[Quote]) -> Result<(), CurveError> {
    if quotes.is_empty() {
        return Err(CurveError::EmptyQuotes);
    }
    let mut prev = 0.0;
    for q in quotes {
        if !(q.maturity > prev) || !q.maturity.is_finite() || !q.value.is_finite() {
            return Err(CurveError::NonAscendingMaturities);
        }
        prev = q.maturity;
    }
    Ok(())
}

/// Payment times `T_1..T_N` for a spot-start schedule with `freq` payments
/// per year; the maturity must be a whole number of periods.
fn regular_payment_times(maturity: f64, freq: u32) -> Result<Vec<f64>, CurveError> {
    let period = 1.0 / freq as f64;
    let n = libm::round(maturity * freq as f64) as usize;
    if n == 0 || math::abs(n as f64 * period - maturity) > 1e-9 {
        return Err(CurveError::QuoteOffSchedule { maturity });
    }
    Ok((1..=n).map(|i| i as f64 * period).collect())
}

/// Par OIS rate implied by a forward curve:
/// `(D(0,T₀) - D(0,T_N)) / Σ Δₙ D(0,Tₙ)` with `T₀ = 0`.
fn ois_par_from_curve(curve: &TermStructure, times: &[f64]) -> f64 {
    let mut annuity = 0.0;
    let mut prev = 0.0;
    for &t in times {
        let df = math::exp(-curve.integral(0.0, t));
        annuity += (t - prev) * df;
        prev = t;
    }
    let d_last = math::exp(-curve.integral(0.0, *times.last().unwrap()));
    (1.0 - d_last) / annuity
}

/// Par MtMCCOIS basis spread implied by the domestic collateral curve and a
/// candidate pair spread curve:
/// `Σ D^{(j,i)}(0,Tₙ₋₁)(1 - e^{-∫ y}) / Σ δₙ D^{(j,i)}(0,Tₙ)`.
fn mtmccois_par_from_curves(dom: &TermStructure, y: &SpreadCurve, times: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut prev = 0.0;
    for &t in times {
        let dji_prev = math::exp(-(dom.integral(0.0, prev) + y.integral(0.0, prev)));
        let dji = math::exp(-(dom.integral(0.0, t) + y.integral(0.0, t)));
        num += dji_prev * (1.0 - math::exp(-y.integral(prev, t)));
        den += (t - prev) * dji;
        prev = t;
    }
    num / den
}

fn solve_pillar<F: FnMut(f64) -> f64>(
    mut err: F,
    pillar: usize,
    maturity: f64,
) -> Result<f64, CurveError> {
    let mut lo = -1.0;
    let mut hi = 1.0;
    // widen until bracketed, up to +-16
    for _ in 0..5 {
        if err(lo) * err(hi) <= 0.0 {
            break;
        }
        lo *= 2.0;
        hi *= 2.0;
    }
    math::brent_root(err, lo, hi, 1e-12, 200)
        .ok_or(CurveError::CalibrationFailure { pillar, maturity })
}

/// Bootstraps the forward collateral curve from OIS par quotes.
///
/// Solved pillar by pillar with a bracketed root finder; each returned curve
/// reprices every input quote to better than 1e-12 on the par rate. `freq`
/// is the fixed-leg payment frequency (annual OIS coupons use `1`).
pub fn bootstrap_collateral_curve(
    quotes: &[Quote],
    freq: u32,
) -> Result<TermStructure, CurveError> {
    validate_quotes(quotes)?;
    let mut tenors: Vec<f64> = alloc::vec![0.0];
    let mut values: Vec<f64> = Vec::new();
    for (p, q) in quotes.iter().enumerate() {
        let times = regular_payment_times(q.maturity, freq)?;
        let f = {
            let tenors = &tenors;
            let values = &values;
            solve_pillar(
                move |trial| {
                    let mut vs = values.clone();
                    vs.push(trial);
                    let pillars: Vec<(f64, f64)> =
                        tenors.iter().copied().zip(vs.iter().copied()).collect();
                    let curve = TermStructure::new(&pillars).unwrap();
                    ois_par_from_curve(&curve, &times) - q.value
                },
                p,
                q.maturity,
            )?
        };
        values.push(f);
        tenors.push(q.maturity);
    }
    // terminal pillar repeats the last forward so covered_to() reflects the
    // full calibrated range
    let last = *values.last().unwrap();
    values.push(last);
    let pillars: Vec<(f64, f64)> = tenors.iter().copied().zip(values.iter().copied()).collect();
    TermStructure::new(&pillars)
}

/// Bootstraps the pair funding-spread curve `y^{(dom,for)}(0,t)` from MtM
/// cross-currency OIS basis quotes, repricing with the domestic collateral
/// curve under the independence convention.
///
/// The foreign collateral curve does not enter the par spread: the
/// notional-refreshed leg reprices to par at every reset, so its discounting
/// cancels. The parameter is part of the calibration interface but unused
/// numerically.
pub fn bootstrap_spread_curve(
    quotes: &[Quote],
    dom: &TermStructure,
    _foreign: &TermStructure,
    freq: u32,
) -> Result<SpreadCurve, CurveError> {
    validate_quotes(quotes)?;
    let mut tenors: Vec<f64> = alloc::vec![0.0];
    let mut values: Vec<f64> = Vec::new();
    for (p, q) in quotes.iter().enumerate() {
        let times = regular_payment_times(q.maturity, freq)?;
        let f = {
            let tenors = &tenors;
            let values = &values;
            solve_pillar(
                move |trial| {
                    let mut vs = values.clone();
                    vs.push(trial);
                    let pillars: Vec<(f64, f64)> =
                        tenors.iter().copied().zip(vs.iter().copied()).collect();
                    let y = SpreadCurve::new(&pillars).unwrap();
                    mtmccois_par_from_curves(dom, &y, &times) - q.value
                },
                p,
                q.maturity,
            )?
        };
        values.push(f);
        tenors.push(q.maturity);
    }
    let last = *values.last().unwrap();
    values.push(last);
    let pillars: Vec<f64> = tenors;
    let pillars: Vec<(f64, f64)> = pillars.into_iter().zip(values).collect();
    SpreadCurve::new(&pillars)
}

/// Splits pairwise spreads into per-currency funding spreads using the
/// anchor convention: the anchor currency's overnight rate is identified
/// with its risk-free rate, so `y(anchor) = 0` and
/// `y(k) = y(k, anchor)` for every other currency.
///
/// Accepts pair keys in either orientation; `(anchor, k)` is negated.
pub fn decompose_single_currency_spreads(
    spread_set: &BTreeMap<(Currency, Currency), SpreadCurve>,
    anchor: &Currency,
) -> Result<BTreeMap<Currency, SpreadCurve>, CurveError> {
    let mut currencies: Vec<Currency> = alloc::vec![anchor.clone()];
    for (a, b) in spread_set.keys() {
        for c in [a, b] {
            if !currencies.contains(c) {
                currencies.push(c.clone());
            }
        }
    }
    let mut out = BTreeMap::new();
    out.insert(anchor.clone(), SpreadCurve::zero());
    for c in currencies {
        if &c == anchor {
            continue;
        }
        let curve = if let Some(y) = spread_set.get(&(c.clone(), anchor.clone())) {
            y.clone()
        } else if let Some(y) = spread_set.get(&(anchor.clone(), c.clone())) {
            y.negated()
        } else {
            return Err(CurveError::MissingSpreadPair { from: c, to: anchor.clone() });
        };
        out.insert(c, curve);
    }
    Ok(out)
}

/// Pairwise spread `y^{(i,j)} = y^{(i)} - y^{(j)}` from decomposed
/// per-currency curves.
pub fn spread_between(
    decomposed: &BTreeMap<Currency, SpreadCurve>,
    i: &Currency,
    j: &Currency,
) -> Result<SpreadCurve, CurveError> {
    let yi = decomposed
        .get(i)
        .ok_or_else(|| CurveError::MissingSpreadPair { from: i.clone(), to: j.clone() })?;
    let yj = decomposed
        .get(j)
        .ok_or_else(|| CurveError::MissingSpreadPair { from: i.clone(), to: j.clone() })?;
    Ok(yi.difference(yj))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn ccy(s: &str) -> Currency {
        Currency::new(s).unwrap()
    }

    #[test]
    fn discount_flat_curve() {
        let c = TermStructure::flat(0.02);
        assert_relative_eq!(discount_factor(&c, 5.0).unwrap(), math::exp(-0.10), epsilon = 1e-15);
        assert_relative_eq!(discount_factor(&c, 5.0).unwrap(), 0.9048374, epsilon = 1e-7);
        assert_eq!(discount_factor(&c, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn discount_two_pillar_hand_integral() {
        // forwards: 1% on [0,2), 3% beyond -> integral to 4 = 0.02 + 0.06
        let c = TermStructure::new(&[(0.0, 0.01), (2.0, 0.03)]).unwrap();
        assert_relative_eq!(discount_factor(&c, 4.0).unwrap(), math::exp(-0.08), epsilon = 1e-15);
        assert_relative_eq!(discount_factor(&c, 4.0).unwrap(), 0.9231163, epsilon = 1e-7);
    }

    #[test]
    fn discount_rejects_negative_time() {
        let c = TermStructure::flat(0.02);
        assert_eq!(discount_factor(&c, -1.0), Err(CurveError::NegativeTime));
    }

    #[test]
    fn invalid_pillars_rejected() {
        assert!(TermStructure::new(&[]).is_err());
        assert!(TermStructure::new(&[(0.5, 0.01)]).is_err());
        assert!(TermStructure::new(&[(0.0, 0.01), (0.0, 0.02)]).is_err());
        assert!(TermStructure::new(&[(0.0, f64::NAN)]).is_err());
    }

    #[test]
    fn foreign_collateral_zero_spread_degenerates() {
        let c = TermStructure::new(&[(0.0, 0.015), (3.0, 0.02), (7.0, 0.025)]).unwrap();
        let y = SpreadCurve::zero();
        for i in 0..=80 {
            let t = i as f64 * 0.25;
            assert_eq!(
                foreign_collateral_df(&c, &y, t).unwrap(),
                discount_factor(&c, t).unwrap()
            );
        }
    }

    #[test]
    fn foreign_collateral_flat_product() {
        let c = TermStructure::flat(0.02);
        let y = SpreadCurve::flat(-0.003);
        let df = foreign_collateral_df(&c, &y, 10.0).unwrap();
        assert_relative_eq!(df, math::exp(-0.2) * math::exp(0.03), epsilon = 1e-15);
        assert_relative_eq!(df, 0.8436648, epsilon = 1e-7);
        assert_eq!(foreign_collateral_df(&c, &y, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn bootstrap_single_annual_quote_is_flat() {
        let q = [Quote::new(1.0, math::exp(0.02) - 1.0)];
        let c = bootstrap_collateral_curve(&q, 1).unwrap();
        assert_relative_eq!(c.forward(0.5), 0.02, epsilon = 1e-10);
        assert_relative_eq!(discount_factor(&c, 1.0).unwrap(), math::exp(-0.02), epsilon = 1e-12);
    }

    #[test]
    fn bootstrap_empty_quotes_errors() {
        assert_eq!(bootstrap_collateral_curve(&[], 1), Err(CurveError::EmptyQuotes));
    }

    #[test]
    fn bootstrap_roundtrip_recovers_generator() {
        let gen = TermStructure::new(&[(0.0, 0.004), (1.0, 0.009), (3.0, 0.016), (7.0, 0.022)])
            .unwrap();
        let maturities = [1.0, 3.0, 5.0, 7.0, 10.0];
        let quotes: Vec<Quote> = maturities
            .iter()
            .map(|&m| {
                let times = regular_payment_times(m, 1).unwrap();
                Quote::new(m, ois_par_from_curve(&gen, &times))
            })
            .collect();
        let boot = bootstrap_collateral_curve(&quotes, 1).unwrap();
        for q in &quotes {
            let times = regular_payment_times(q.maturity, 1).unwrap();
            assert!(math::abs(ois_par_from_curve(&boot, &times) - q.value) < 1e-10);
        }
        // pillars at quote maturities recover the generator forwards
        for t in [0.5, 2.0, 4.0, 6.0, 9.0] {
            assert_relative_eq!(boot.forward(t), gen.forward(t), epsilon = 1e-9);
        }
    }

    #[test]
    fn spread_bootstrap_zero_quotes_give_zero_curve() {
        let dom = TermStructure::new(&[(0.0, 0.002), (5.0, 0.01), (10.0, 0.015)]).unwrap();
        let f = TermStructure::flat(0.03);
        let quotes = [Quote::new(2.0, 0.0), Quote::new(5.0, 0.0), Quote::new(10.0, 0.0)];
        let y = bootstrap_spread_curve(&quotes, &dom, &f, 4).unwrap();
        for t in [0.5, 3.0, 7.0] {
            assert!(math::abs(y.forward(t)) < 1e-12);
        }
    }

    #[test]
    fn spread_bootstrap_roundtrip_two_pillar() {
        let dom = TermStructure::new(&[(0.0, 0.002), (5.0, 0.012)]).unwrap();
        let f = TermStructure::flat(0.03);
        let gen = SpreadCurve::new(&[(0.0, -0.0025), (5.0, -0.0045)]).unwrap();
        let quotes: Vec<Quote> = [2.0, 5.0, 10.0]
            .iter()
            .map(|&m| {
                let times = regular_payment_times(m, 4).unwrap();
                Quote::new(m, mtmccois_par_from_curves(&dom, &gen, &times))
            })
            .collect();
        let y = bootstrap_spread_curve(&quotes, &dom, &f, 4).unwrap();
        for q in &quotes {
            let times = regular_payment_times(q.maturity, 4).unwrap();
            assert!(math::abs(mtmccois_par_from_curves(&dom, &y, &times) - q.value) < 1e-10);
        }
        for t in [1.0, 4.0, 8.0] {
            assert_relative_eq!(y.forward(t), gen.forward(t), epsilon = 1e-9);
        }
    }

    #[test]
    fn spread_bootstrap_flat_recovery() {
        let dom = TermStructure::flat(0.005);
        let f = TermStructure::flat(0.03);
        let gen = SpreadCurve::flat(-0.003);
        let quotes: Vec<Quote> = [1.0, 5.0, 10.0]
            .iter()
            .map(|&m| {
                let times = regular_payment_times(m, 4).unwrap();
                Quote::new(m, mtmccois_par_from_curves(&dom, &gen, &times))
            })
            .collect();
        let y = bootstrap_spread_curve(&quotes, &dom, &f, 4).unwrap();
        for t in [0.3, 2.0, 9.0] {
            assert_relative_eq!(y.forward(t), -0.003, epsilon = 1e-10);
        }
    }

    #[test]
    fn decompose_anchor_convention_signs() {
        // y^(JPY,USD) = y^(JPY) - y^(USD) = -30bp with anchor JPY
        // => y^(USD) = +30bp
        let mut set = BTreeMap::new();
        set.insert((ccy("JPY"), ccy("USD")), SpreadCurve::flat(-0.003));
        let out = decompose_single_currency_spreads(&set, &ccy("JPY")).unwrap();
        assert_eq!(out[&ccy("JPY")].forward(2.0), 0.0);
        assert_relative_eq!(out[&ccy("USD")].forward(2.0), 0.003, epsilon = 1e-15);
    }

    #[test]
    fn decompose_single_currency_is_zero_map() {
        let set = BTreeMap::new();
        let out = decompose_single_currency_spreads(&set, &ccy("JPY")).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[&ccy("JPY")].forward(1.0), 0.0);
    }

    #[test]
    fn decompose_missing_pair_errors() {
        let mut set = BTreeMap::new();
        set.insert((ccy("EUR"), ccy("CHF")), SpreadCurve::flat(0.001));
        let err = decompose_single_currency_spreads(&set, &ccy("JPY")).unwrap_err();
        assert!(matches!(err, CurveError::MissingSpreadPair { .. }));
    }

    #[test]
    fn decompose_triangle_identity_three_currencies() {
        let mut set = BTreeMap::new();
        set.insert(
            (ccy("USD"), ccy("JPY")),
            SpreadCurve::new(&[(0.0, 0.003), (5.0, 0.004)]).unwrap(),
        );
        set.insert(
            (ccy("EUR"), ccy("JPY")),
            SpreadCurve::new(&[(0.0, 0.001), (3.0, 0.002)]).unwrap(),
        );
        let out = decompose_single_currency_spreads(&set, &ccy("JPY")).unwrap();
        let cross = spread_between(&out, &ccy("USD"), &ccy("EUR")).unwrap();
        for t in [0.5, 2.0, 4.0, 8.0] {
            let want = out[&ccy("USD")].forward(t) - out[&ccy("EUR")].forward(t);
            assert_relative_eq!(cross.forward(t), want, epsilon = 1e-15);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn prop_discount_positive_and_monotone(
            rates in proptest::collection::vec(0.0f64..0.10, 1..6),
            t in 0.0f64..40.0,
        ) {
            let pillars: Vec<(f64, f64)> =
                rates.iter().enumerate().map(|(i, &r)| (2.0 * i as f64, r)).collect();
            let c = TermStructure::new(&pillars).unwrap();
            let d1 = discount_factor(&c, t).unwrap();
            let d2 = discount_factor(&c, t + 1.0).unwrap();
            prop_assert!(d1 > 0.0);
            prop_assert!(d2 <= d1 + 1e-15);
        }

        #[test]
        fn prop_bootstrap_roundtrip(
            rates in proptest::collection::vec(-0.01f64..0.10, 3..6),
        ) {
            let pillars: Vec<(f64, f64)> =
                rates.iter().enumerate().map(|(i, &r)| (3.0 * i as f64, r)).collect();
            let gen = TermStructure::new(&pillars).unwrap();
            let maturities = [1.0, 3.0, 6.0, 9.0, 12.0, 15.0];
            let quotes: Vec<Quote> = maturities.iter().map(|&m| {
                let times = regular_payment_times(m, 1).unwrap();
                Quote::new(m, ois_par_from_curve(&gen, &times))
            }).collect();
            let boot = bootstrap_collateral_curve(&quotes, 1).unwrap();
            for q in &quotes {
                let times = regular_payment_times(q.maturity, 1).unwrap();
                prop_assert!(math::abs(ois_par_from_curve(&boot, &times) - q.value) < 1e-10);
            }
        }

        #[test]
        fn prop_triangle_identity(
            a in -0.01f64..0.01,
            b in -0.01f64..0.01,
        ) {
            let mut set = BTreeMap::new();
            set.insert((ccy("USD"), ccy("JPY")), SpreadCurve::flat(a));
            set.insert((ccy("EUR"), ccy("JPY")), SpreadCurve::flat(b));
            let out = decompose_single_currency_spreads(&set, &ccy("JPY")).unwrap();
            // y(i,j) + y(j,k) = y(i,k) pointwise
            let usd_eur = spread_between(&out, &ccy("USD"), &ccy("EUR")).unwrap();
            let eur_jpy = spread_between(&out, &ccy("EUR"), &ccy("JPY")).unwrap();
            let usd_jpy = spread_between(&out, &ccy("USD"), &ccy("JPY")).unwrap();
            for t in [0.0, 1.0, 10.0] {
                prop_assert!(math::abs(
                    usd_eur.forward(t) + eur_jpy.forward(t) - usd_jpy.forward(t)) < 1e-15);
            }
        }
    }
}
