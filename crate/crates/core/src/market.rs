//! Market model bundle: the ground truth every pricer and the simulator
//! consume.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::curves::{
    foreign_collateral_df, spread_between, Currency, CurveError, SpreadCurve, TermStructure,
};
use crate::math;

/// Hull-White parameters of one factor. The deterministic drift is not a
/// model input; it is fitted to the initial term structures on the
/// simulation grid (see [`crate::dynamics::FittedModel`]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HullWhiteParams {
    /// Mean reversion speed (1/year).
    pub kappa: f64,
    /// Absolute (normal) volatility: 1/year for rates, 1/sqrt(year) for
    /// the log FX factor.
    pub sigma: f64,
}

impl HullWhiteParams {
    pub fn new(kappa: f64, sigma: f64) -> Result<Self, ModelError> {
        if !(kappa >= 0.0) || !(sigma >= 0.0) || !kappa.is_finite() || !sigma.is_finite() {
            return Err(ModelError::BadHullWhiteParams);
        }
        Ok(HullWhiteParams { kappa, sigma })
    }
}

/// Index layout of the four simulated factors.
///
/// Correlation entries follow this order; the restriction ρ(Spread, ·) = 0
/// keeps the funding spread independent of rates and FX, which the
/// cross-currency valuation formulas rely on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    DomesticRate = 0,
    ForeignRate = 1,
    Spread = 2,
    LogFx = 3,
}

/// Validated 4x4 correlation matrix of the factor Brownian motions.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    rho: [[f64; 4]; 4],
    chol: [[f64; 4]; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    BadHullWhiteParams,
    CorrelationNotSymmetric,
    CorrelationDiagonalNotOne,
    /// The spread factor must be uncorrelated with all other factors.
    SpreadCorrelationNotZero,
    CorrelationNotPositiveSemidefinite,
    NonPositiveSpotFx,
    MissingCurve(Currency),
    CurrenciesNotDistinct,
    AnchorNotInModel,
    Curve(CurveError),
}

impl From<CurveError> for ModelError {
    fn from(e: CurveError) -> Self {
        ModelError::Curve(e)
    }
}

impl core::fmt::Display for ModelError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ModelError::BadHullWhiteParams => write!(f, "kappa and sigma must be finite and >= 0"),
            ModelError::CorrelationNotSymmetric => write!(f, "correlation matrix not symmetric"),
            ModelError::CorrelationDiagonalNotOne => write!(f, "correlation diagonal must be 1"),
            ModelError::SpreadCorrelationNotZero => {
                write!(f, "spread factor correlations must be 0")
            }
            ModelError::CorrelationNotPositiveSemidefinite => {
                write!(f, "correlation matrix not positive semidefinite")
            }
            ModelError::NonPositiveSpotFx => write!(f, "spot FX must be positive"),
            ModelError::MissingCurve(c) => write!(f, "no curve for currency {c}"),
            ModelError::CurrenciesNotDistinct => write!(f, "currencies must be distinct"),
            ModelError::AnchorNotInModel => write!(f, "anchor currency not in model"),
            ModelError::Curve(e) => write!(f, "{e}"),
        }
    }
}

impl CorrelationMatrix {
    /// Validates symmetry, unit diagonal, the spread-independence
    /// restriction and positive semidefiniteness (via Cholesky).
    pub fn new(rho: [[f64; 4]; 4]) -> Result<Self, ModelError> {
        for i in 0..4 {
            if math::abs(rho[i][i] - 1.0) > 1e-12 {
                return Err(ModelError::CorrelationDiagonalNotOne);
            }
            for j in 0..4 {
                if !rho[i][j].is_finite() || math::abs(rho[i][j] - rho[j][i]) > 1e-12 {
                    return Err(ModelError::CorrelationNotSymmetric);
                }
            }
        }
        let s = Factor::Spread as usize;
        for j in 0..4 {
            if j != s && rho[s][j] != 0.0 {
                return Err(ModelError::SpreadCorrelationNotZero);
            }
        }
        let chol = cholesky4(&rho).ok_or(ModelError::CorrelationNotPositiveSemidefinite)?;
        Ok(CorrelationMatrix { rho, chol })
    }

    pub fn identity() -> Self {
        let mut rho = [[0.0; 4]; 4];
        for (i, row) in rho.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        CorrelationMatrix::new(rho).unwrap()
    }

    pub fn get(&self, i: Factor, j: Factor) -> f64 {
        self.rho[i as usize][j as usize]
    }

    pub fn as_array(&self) -> &[[f64; 4]; 4] {
        &self.rho
    }

    /// Lower-triangular Cholesky factor used to correlate Gaussian draws.
    pub fn cholesky(&self) -> &[[f64; 4]; 4] {
        &self.chol
    }
}

/// Cholesky with tolerance for exactly-singular PSD matrices (zero pivot
/// rows are filled with zeros).
fn cholesky4(a: &[[f64; 4]; 4]) -> Option<[[f64; 4]; 4]> {
    let mut l = [[0.0f64; 4]; 4];
    for i in 0..4 {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s < -1e-12 {
                    return None;
                }
                l[i][j] = math::sqrt(s.max(0.0));
            } else if l[j][j] > 0.0 {
                l[i][j] = s / l[j][j];
            } else if math::abs(s) < 1e-12 {
                l[i][j] = 0.0;
            } else {
                return None;
            }
        }
    }
    Some(l)
}

/// Two-currency market model: collateral curves, decomposed funding-spread
/// curves, spot FX and the Hull-White/correlation parameters of the four
/// simulated factors.
///
/// `domestic` is the deal and simulation-measure currency; `foreign` is the
/// second currency (the notional-refreshed leg of the cross-currency swap).
/// `anchor` names the currency whose overnight rate is identified with its
/// risk-free rate when pairwise spreads are split into per-currency curves.
#[derive(Debug, Clone)]
pub struct MarketModel {
    pub domestic: Currency,
    pub foreign: Currency,
    pub anchor: Currency,
    pub collateral: BTreeMap<Currency, TermStructure>,
    /// Per-currency funding spreads after anchor decomposition.
    pub funding: BTreeMap<Currency, SpreadCurve>,
    /// Spot FX: units of domestic currency per one unit of foreign.
    pub spot_fx: f64,
    pub hw_domestic: HullWhiteParams,
    pub hw_foreign: HullWhiteParams,
    pub hw_spread: HullWhiteParams,
    /// Log-FX volatility (1/sqrt(year)).
    pub fx_vol: f64,
    pub correlation: CorrelationMatrix,
}

impl MarketModel {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.domestic == self.foreign {
            return Err(ModelError::CurrenciesNotDistinct);
        }
        if self.anchor != self.domestic && self.anchor != self.foreign {
            return Err(ModelError::AnchorNotInModel);
        }
        if !(self.spot_fx > 0.0) || !self.spot_fx.is_finite() {
            return Err(ModelError::NonPositiveSpotFx);
        }
        if !(self.fx_vol >= 0.0) || !self.fx_vol.is_finite() {
            return Err(ModelError::BadHullWhiteParams);
        }
        for c in [&self.domestic, &self.foreign] {
            if !self.collateral.contains_key(c) {
                return Err(ModelError::MissingCurve(c.clone()));
            }
            if !self.funding.contains_key(c) {
                return Err(ModelError::MissingCurve(c.clone()));
            }
        }
        // anchor decomposition requires y(anchor) = 0
        if self.funding[&self.anchor].pillars().any(|(_, v)| math::abs(v) > 1e-14) {
            return Err(ModelError::AnchorNotInModel);
        }
        Ok(())
    }

    pub fn collateral_curve(&self, c: &Currency) -> Result<&TermStructure, ModelError> {
        self.collateral.get(c).ok_or_else(|| ModelError::MissingCurve(c.clone()))
    }

    pub fn funding_spread(&self, c: &Currency) -> Result<&SpreadCurve, ModelError> {
        self.funding.get(c).ok_or_else(|| ModelError::MissingCurve(c.clone()))
    }

    /// Pairwise forward spread curve `y^{(i,j)}(0,·) = y^{(i)} - y^{(j)}`.
    pub fn pair_spread(&self, i: &Currency, j: &Currency) -> Result<SpreadCurve, ModelError> {
        Ok(spread_between(&self.funding, i, j)?)
    }

    /// Collateralized discount factor of currency `c`.
    pub fn discount(&self, c: &Currency, t: f64) -> Result<f64, ModelError> {
        Ok(crate::curves::discount_factor(self.collateral_curve(c)?, t)?)
    }

    /// Discount factor of deal currency `deal` under collateralization in
    /// currency `collateral`: `D^{(deal)}·exp(-∫ y^{(deal,collateral)})`.
    pub fn discount_foreign_collateral(
        &self,
        deal: &Currency,
        collateral: &Currency,
        t: f64,
    ) -> Result<f64, ModelError> {
        if deal == collateral {
            return self.discount(deal, t);
        }
        let y = self.pair_spread(deal, collateral)?;
        Ok(foreign_collateral_df(self.collateral_curve(deal)?, &y, t)?)
    }

    /// Spot FX for `(i, j)`: units of `i` per one unit of `j`.
    pub fn spot(&self, i: &Currency, j: &Currency) -> Result<f64, ModelError> {
        if *i == self.domestic && *j == self.foreign {
            Ok(self.spot_fx)
        } else if *i == self.foreign && *j == self.domestic {
            Ok(1.0 / self.spot_fx)
        } else if i == j {
            Ok(1.0)
        } else {
            Err(ModelError::MissingCurve(i.clone()))
        }
    }

    /// Per-currency funding-spread *process* value implied by the simulated
    /// pair spread `y_t = y^{(dom,for)}(t)` under the anchor convention.
    pub fn currency_spread_process(&self, c: &Currency, pair_spread_value: f64) -> f64 {
        if *c == self.anchor {
            0.0
        } else if *c == self.domestic {
            pair_spread_value
        } else {
            -pair_spread_value
        }
    }

    /// Simulated pair-spread curve `y^{(dom,for)}(0,·)`, the initial term
    /// structure of the spread factor.
    pub fn simulated_spread_curve(&self) -> SpreadCurve {
        self.pair_spread(&self.domestic, &self.foreign)
            .expect("model validated")
    }

    pub fn currencies(&self) -> Vec<Currency> {
        alloc::vec![self.domestic.clone(), self.foreign.clone()]
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use alloc::collections::BTreeMap;

    /// Flat two-currency model used across module tests; curves carry a
    /// terminal pillar at 40y so simulation horizons are covered.
    pub fn flat_model(c_dom: f64, c_for: f64, y_pair: f64) -> MarketModel {
        let jpy = Currency::new("JPY").unwrap();
        let usd = Currency::new("USD").unwrap();
        let mut collateral = BTreeMap::new();
        collateral.insert(jpy.clone(), TermStructure::new(&[(0.0, c_dom), (40.0, c_dom)]).unwrap());
        collateral.insert(usd.clone(), TermStructure::new(&[(0.0, c_for), (40.0, c_for)]).unwrap());
        let mut funding = BTreeMap::new();
        // anchor JPY: y(JPY)=0, y(USD) = -y_pair so y(JPY,USD) = y_pair
        funding.insert(jpy.clone(), SpreadCurve::zero());
        funding.insert(usd.clone(), SpreadCurve::new(&[(0.0, -y_pair), (40.0, -y_pair)]).unwrap());
        MarketModel {
            domestic: jpy.clone(),
            foreign: usd,
            anchor: jpy,
            collateral,
            funding,
            spot_fx: 90.0,
            hw_domestic: HullWhiteParams::new(0.015, 0.01).unwrap(),
            hw_foreign: HullWhiteParams::new(0.015, 0.01).unwrap(),
            hw_spread: HullWhiteParams::new(0.015, 0.005).unwrap(),
            fx_vol: 0.12,
            correlation: CorrelationMatrix::identity(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn correlation_requires_spread_independence() {
        let mut rho = [[0.0; 4]; 4];
        for (i, row) in rho.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        rho[2][0] = 0.5;
        rho[0][2] = 0.5;
        assert_eq!(
            CorrelationMatrix::new(rho).unwrap_err(),
            ModelError::SpreadCorrelationNotZero
        );
    }

    #[test]
    fn correlation_rejects_non_psd() {
        let mut rho = [[0.0; 4]; 4];
        for (i, row) in rho.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        // |rho_01| and |rho_03|, |rho_13| chosen so the 3x3 block is not PSD
        rho[0][1] = 0.95;
        rho[1][0] = 0.95;
        rho[0][3] = -0.95;
        rho[3][0] = -0.95;
        rho[1][3] = 0.9;
        rho[3][1] = 0.9;
        assert_eq!(
            CorrelationMatrix::new(rho).unwrap_err(),
            ModelError::CorrelationNotPositiveSemidefinite
        );
    }

    #[test]
    fn cholesky_reproduces_matrix() {
        let mut rho = [[0.0; 4]; 4];
        for (i, row) in rho.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        rho[0][1] = 0.25;
        rho[1][0] = 0.25;
        rho[0][3] = -0.05;
        rho[3][0] = -0.05;
        rho[1][3] = -0.15;
        rho[3][1] = -0.15;
        let c = CorrelationMatrix::new(rho).unwrap();
        let l = c.cholesky();
        for i in 0..4 {
            for j in 0..4 {
                let mut s = 0.0;
                for k in 0..4 {
                    s += l[i][k] * l[j][k];
                }
                assert_relative_eq!(s, rho[i][j], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn model_validates_and_prices_pair_spread() {
        let m = test_support::flat_model(0.02, 0.03, -0.003);
        m.validate().unwrap();
        let y = m.simulated_spread_curve();
        assert_relative_eq!(y.forward(3.0), -0.003, epsilon = 1e-15);
        assert_relative_eq!(
            m.discount_foreign_collateral(&m.domestic.clone(), &m.foreign.clone(), 10.0)
                .unwrap(),
            math::exp(-0.2 + 0.03),
            epsilon = 1e-14
        );
    }

    #[test]
    fn currency_spread_process_respects_anchor() {
        let m = test_support::flat_model(0.02, 0.03, -0.003);
        let y_t = -0.004;
        assert_eq!(m.currency_spread_process(&m.domestic.clone(), y_t), 0.0);
        assert_eq!(m.currency_spread_process(&m.foreign.clone(), y_t), 0.004);
    }
}
