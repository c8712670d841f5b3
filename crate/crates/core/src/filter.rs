//! Filtering of the hidden risk-aversion factor from the information process.
//!
//! Given the prior atoms `(x_i, w_i)` and fiducial exponent `phi`, every
//! quantity at `(xi, t)` is built from the unnormalized log weights
//!
//! ```text
//! l_i(xi, t) = ln w_i + x_i xi - phi(x_i) t
//! ```
//!
//! The posterior is `softmax(l)`, the natural numeraire is `exp(r t + logsumexp(l))`
//! and the pricing kernel is its reciprocal. All sums use max-subtraction, so
//! long horizons (exponents beyond +-700) stay finite.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::levy::LevyExponent;
use crate::prior::{PriorMeasure, PriorSpec};

/// One market: `(S0, r, sigma, phi, p(dx))`.
#[derive(Clone, Debug)]
pub struct MarketModel {
    s0: f64,
    r: f64,
    sigma: f64,
    phi: LevyExponent,
    prior: PriorMeasure,
    // cached per atom: (x_i, ln w_i, phi(x_i))
    terms: Vec<(f64, f64, f64)>,
    phi_sigma: f64,
}

/// Serialized model: `{"s0":100,"r":0.02,"sigma":0.2,"phi":{...},"prior":{...}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub s0: f64,
    pub r: f64,
    pub sigma: f64,
    pub phi: LevyExponent,
    pub prior: PriorSpec,
}

impl ModelSpec {
    pub fn build(&self) -> Result<MarketModel> {
        MarketModel::new(self.s0, self.r, self.sigma, self.phi.clone(), self.prior.build()?)
    }
}

impl MarketModel {
    pub fn new(s0: f64, r: f64, sigma: f64, phi: LevyExponent, prior: PriorMeasure) -> Result<Self> {
        ensure!(
            s0.is_finite() && s0 > 0.0,
            InvalidInput,
            "s0 must be positive, got {s0}"
        );
        ensure!(
            r.is_finite() && r >= 0.0,
            InvalidInput,
            "r must be nonnegative, got {r}"
        );
        ensure!(
            sigma.is_finite() && sigma > 0.0,
            InvalidInput,
            "sigma must be positive, got {sigma}"
        );
        phi.validate()?;
        let domain = phi.domain();
        ensure!(
            domain.contains(sigma),
            Domain,
            "sigma = {sigma} outside the domain of {phi}"
        );
        for a in prior.atoms() {
            ensure!(
                domain.contains(a.x) && domain.contains(a.x + sigma),
                Domain,
                "prior atom {} needs x and x + sigma inside the domain of {phi}",
                a.x
            );
        }
        let terms = prior
            .atoms()
            .iter()
            .map(|a| (a.x, a.w.ln(), phi.eval_real_unchecked(a.x)))
            .collect();
        let phi_sigma = phi.eval_real_unchecked(sigma);
        Ok(MarketModel {
            s0,
            r,
            sigma,
            phi,
            prior,
            terms,
            phi_sigma,
        })
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn phi(&self) -> &LevyExponent {
        &self.phi
    }

    pub fn prior(&self) -> &PriorMeasure {
        &self.prior
    }

    pub fn is_brownian(&self) -> bool {
        self.phi == LevyExponent::Brownian
    }

    pub fn spec(&self) -> ModelSpec {
        ModelSpec {
            s0: self.s0,
            r: self.r,
            sigma: self.sigma,
            phi: self.phi.clone(),
            prior: PriorSpec::from(&self.prior),
        }
    }

    /// Same market with a different prior.
    pub fn with_prior(&self, prior: PriorMeasure) -> Result<Self> {
        MarketModel::new(self.s0, self.r, self.sigma, self.phi.clone(), prior)
    }

    fn check_point(xi: f64, t: f64) -> Result<()> {
        ensure!(t.is_finite() && t >= 0.0, Domain, "time must be nonnegative, got {t}");
        ensure!(xi.is_finite(), Domain, "information value must be finite, got {xi}");
        Ok(())
    }

    #[inline]
    fn max_log_term(&self, xi: f64, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(x, lw, px)| lw + x * xi - px * t)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `ln sum_i w_i exp(x_i xi - phi(x_i) t)`.
    pub fn log_partition(&self, xi: f64, t: f64) -> Result<f64> {
        Self::check_point(xi, t)?;
        Ok(self.log_partition_unchecked(xi, t))
    }

    #[inline]
    pub(crate) fn log_partition_unchecked(&self, xi: f64, t: f64) -> f64 {
        let m = self.max_log_term(xi, t);
        let s: f64 = self
            .terms
            .iter()
            .map(|&(x, lw, px)| (lw + x * xi - px * t - m).exp())
            .sum();
        m + s.ln()
    }

    /// Posterior law of `X` given `xi_t = xi`.
    pub fn posterior(&self, xi: f64, t: f64) -> Result<Posterior> {
        Self::check_point(xi, t)?;
        let m = self.max_log_term(xi, t);
        let unnorm: Vec<f64> = self
            .terms
            .iter()
            .map(|&(x, lw, px)| (lw + x * xi - px * t - m).exp())
            .collect();
        let total: f64 = unnorm.iter().sum();
        // the maximal term contributes exactly 1
        if !(total.is_finite() && total >= 1.0) {
            return Err(Error::Numerical(format!(
                "posterior normalizer {total} at xi={xi}, t={t}"
            )));
        }
        let atoms = self
            .terms
            .iter()
            .zip(unnorm)
            .map(|(&(x, _, _), u)| (x, u / total))
            .collect();
        Ok(Posterior {
            atoms,
            at_time: t,
            at_information: xi,
        })
    }

    /// `(lambda(xi, t), d lambda / d xi)`: posterior mean and posterior variance of `X`.
    pub fn lambda(&self, xi: f64, t: f64) -> Result<(f64, f64)> {
        Self::check_point(xi, t)?;
        Ok(self.lambda_unchecked(xi, t))
    }

    #[inline]
    pub(crate) fn lambda_unchecked(&self, xi: f64, t: f64) -> (f64, f64) {
        let m = self.max_log_term(xi, t);
        let mut total = 0.0;
        let mut first = 0.0;
        for &(x, lw, px) in &self.terms {
            let u = (lw + x * xi - px * t - m).exp();
            total += u;
            first += u * x;
        }
        let mean = first / total;
        let var = self
            .terms
            .iter()
            .map(|&(x, lw, px)| (lw + x * xi - px * t - m).exp() * (x - mean).powi(2))
            .sum::<f64>()
            / total;
        (mean, var)
    }

    /// Filtered risk-aversion estimate `E[X | xi_t = xi]`.
    pub fn risk_aversion(&self, xi: f64, t: f64) -> Result<f64> {
        self.lambda(xi, t).map(|(l, _)| l)
    }

    /// `n_t = sum_i w_i exp(r t + x_i xi - phi(x_i) t)`.
    pub fn natural_numeraire(&self, xi: f64, t: f64) -> Result<f64> {
        Ok((self.r * t + self.log_partition(xi, t)?).exp())
    }

    /// `pi_t = 1 / n_t`.
    pub fn pricing_kernel(&self, xi: f64, t: f64) -> Result<f64> {
        Ok(1.0 / self.natural_numeraire(xi, t)?)
    }

    #[inline]
    pub(crate) fn log_kernel_unchecked(&self, xi: f64, t: f64) -> f64 {
        -(self.r * t + self.log_partition_unchecked(xi, t))
    }

    /// Kernel of an investor certain that `X = x`: `exp(-r t - x xi + phi(x) t)`.
    pub fn individual_kernel(&self, x: f64, xi: f64, t: f64) -> Result<f64> {
        Self::check_point(xi, t)?;
        let px = self.phi.eval(x)?;
        Ok((-self.r * t - x * xi + px * t).exp())
    }

    /// `S_t = S0 exp(r t + sigma xi - phi(sigma) t)`.
    pub fn asset_price(&self, xi: f64, t: f64) -> f64 {
        self.s0 * (self.r * t + self.sigma * xi - self.phi_sigma * t).exp()
    }

    /// Inverse of [`asset_price`](Self::asset_price) in `xi`.
    pub fn information_from_price(&self, s: f64, t: f64) -> Result<f64> {
        ensure!(
            s.is_finite() && s > 0.0,
            InvalidInput,
            "price must be positive, got {s}"
        );
        ensure!(t.is_finite() && t >= 0.0, Domain, "time must be nonnegative, got {t}");
        Ok(((s / self.s0).ln() - self.r * t + self.phi_sigma * t) / self.sigma)
    }

    /// Risk-aversion estimate read off the asset price: `(lambda, xi)`.
    pub fn estimate_from_price(&self, s: f64, t: f64) -> Result<(f64, f64)> {
        ensure!(t > 0.0, Domain, "estimation needs t > 0, got {t}");
        let xi = self.information_from_price(s, t)?;
        let lambda = self.posterior(xi, t)?.mean();
        Ok((lambda, xi))
    }
}

/// Conditional law `p_t(dx)` of `X` on the prior support.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Posterior {
    pub atoms: Vec<(f64, f64)>,
    pub at_time: f64,
    pub at_information: f64,
}

impl Posterior {
    /// Least-squares estimate of `X`: the posterior mean.
    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|(x, q)| x * q).sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.atoms.iter().map(|(x, q)| q * (x - mean).powi(2)).sum()
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.atoms.iter().map(|a| a.1)
    }
}

/// Weighted harmonic mean `(sum_i w_i / pi_i)^-1` of individual pricing kernels.
pub fn aggregate_kernels(kernels: &[(f64, f64)]) -> Result<f64> {
    ensure!(!kernels.is_empty(), InvalidInput, "no kernels to aggregate");
    let mut total_w = 0.0;
    let mut acc = 0.0;
    for &(pi, w) in kernels {
        ensure!(
            pi.is_finite() && pi > 0.0,
            InvalidInput,
            "kernel value {pi} must be positive"
        );
        ensure!(w.is_finite() && w > 0.0, InvalidInput, "weight {w} must be positive");
        total_w += w;
        acc += w / pi;
    }
    ensure!(
        (total_w - 1.0).abs() <= 1e-9,
        InvalidInput,
        "weights sum to {total_w}, expected 1"
    );
    Ok(1.0 / acc)
}
