//! Pricing library for collateralized derivatives under asymmetric and
//! imperfect CSA terms.
//!
//! The crate is organized around a two-currency market (a domestic deal
//! currency and one foreign currency) and covers:
//!
//! - [`curves`]: immutable term structures with piecewise-flat instantaneous
//!   forwards, discount/spread integrals and bootstrap from OIS and
//!   cross-currency OIS quotes.
//! - [`market`]: the market model bundle (curves, spot FX, Hull-White
//!   parameters, correlation) shared by all pricers.
//! - [`dynamics`]: correlated four-factor Hull-White simulation of
//!   (domestic rate, foreign rate, funding spread, log FX) under the
//!   domestic spot-martingale measure, with drifts fitted so that the
//!   discretized model reprices the input curves exactly.
//! - [`instruments`]: clean (perfectly, symmetrically collateralized)
//!   valuation of OIS and mark-to-market cross-currency OIS, both at
//!   inception and along simulated paths.
//! - [`adjustments`]: first-order collateral cost adjustment (CCA) and
//!   bilateral credit value adjustment (CVA) estimators, including
//!   one-way CSA and collateral thresholds.
//! - [`pde`]: an independent finite-difference solver for the
//!   nonlinear-discounting PDE of the continuous-coupon cross-currency
//!   swap, used as an oracle for the first-order estimators.
//!
//! The crate is `no_std` (with `alloc`); all I/O, file formats and
//! thread-level parallelism live in the companion CLI crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod adjustments;
pub mod curves;
pub mod dynamics;
pub mod instruments;
pub mod market;
pub mod math;
pub mod pde;

pub use curves::{Currency, SpreadCurve, TermStructure};
pub use market::MarketModel;
