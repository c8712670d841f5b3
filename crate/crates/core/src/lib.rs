//! Asset pricing when the market price of risk is a hidden random variable.
//!
//! The market observes an information process `xi_t` whose law, given the
//! risk-aversion factor `X = x`, is a Levy process with exponent
//! `phi(alpha + x) - phi(x)`. Everything observable (the posterior over `X`,
//! the filtered risk-aversion estimate, the pricing kernel, the natural
//! numeraire) is a function of `(xi_t, t)` alone.
//!
//! Module map:
//!
//! * [`levy`]: Levy exponents, Esscher tilting and the excess rate of return.
//! * [`prior`]: the a priori law of `X` as a finite weighted-atom measure.
//! * [`filter`]: posterior, estimator, pricing kernel, numeraire, aggregation.
//! * [`simulate`]: information, price, kernel and innovations paths.
//! * [`pricing`]: Monte Carlo valuation and optimal investment.
//! * [`verify`]: statistical checks with explicit pass/fail thresholds.

mod error;
pub mod filter;
pub mod levy;
pub mod pricing;
pub mod prior;
pub mod rng;
pub mod simulate;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use filter::{aggregate_kernels, MarketModel, ModelSpec, Posterior};
pub use levy::{Interval, LevyExponent};
pub use pricing::{ClaimKind, ClaimSpec, McEstimate, UtilityKind, UtilitySpec};
pub use prior::{PriorMeasure, PriorSpec};
pub use simulate::{Construction, InfoPath, PathBundle, TimeGrid};
pub use verify::TestReport;

/// Relative tolerance for algebraic identities.
pub const IDENTITY_TOL: f64 = 1e-12;

/// Monte Carlo acceptance band, in standard errors.
pub const MC_SIGMAS: f64 = 3.0;

/// Significance level for distributional tests.
pub const P_VALUE_THRESHOLD: f64 = 0.01;

/// `|a - b| <= tol * max(1, |a|, |b|)`.
pub fn approx_eq(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}
