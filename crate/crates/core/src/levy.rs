//! Levy exponents `psi(alpha)` with `E[exp(alpha X_t)] = exp(t psi(alpha))`.
//!
//! The catalogue covers the four families needed for information processes
//! (Brownian, Poisson, gamma with unit scale, variance gamma) plus Esscher
//! tilts of any of them. Each exponent carries its real domain `A`; complex
//! arguments are accepted only on the imaginary axis, where the exponent is
//! the log characteristic function.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[cfg(test)]
use crate::error::Error;
use crate::error::{ensure, Result};
use crate::IDENTITY_TOL;

/// A real interval with explicit open/closed ends. Infinite ends are always open.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
    pub lower_closed: bool,
    pub upper_closed: bool,
}

impl Interval {
    pub const REALS: Interval = Interval::open(f64::NEG_INFINITY, f64::INFINITY);

    pub const fn open(lower: f64, upper: f64) -> Self {
        Interval {
            lower,
            upper,
            lower_closed: false,
            upper_closed: false,
        }
    }

    pub fn contains(&self, a: f64) -> bool {
        if a.is_nan() {
            return false;
        }
        let above = if self.lower_closed {
            a >= self.lower
        } else {
            a > self.lower
        };
        let below = if self.upper_closed {
            a <= self.upper
        } else {
            a < self.upper
        };
        above && below
    }

    pub fn contains_interior(&self, a: f64) -> bool {
        a > self.lower && a < self.upper
    }

    /// `{a : a + shift in self}`.
    pub fn shifted_by(&self, shift: f64) -> Self {
        Interval {
            lower: self.lower - shift,
            upper: self.upper - shift,
            ..*self
        }
    }

    /// `n` midpoints of an equal partition of the interval, clipped to `[-reach, reach]`.
    /// Boundary points are never returned.
    pub fn sample_points(&self, n: usize, reach: f64) -> Vec<f64> {
        let lo = self.lower.max(-reach);
        let hi = self.upper.min(reach);
        let width = hi - lo;
        (0..n).map(|k| lo + width * (k as f64 + 0.5) / n as f64).collect()
    }
}

/// A Levy exponent from the catalogue, or an Esscher tilt of one.
///
/// Serialized as `{"family":"gamma","m":1.0}` or
/// `{"family":"esscher","base":{...},"tilt":0.25}`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LevyExponent {
    /// `psi(alpha) = alpha^2 / 2`.
    #[default]
    Brownian,
    /// `psi(alpha) = m (e^alpha - 1)`.
    Poisson { m: f64 },
    /// `psi(alpha) = -m ln(1 - alpha)` for `alpha < 1`.
    Gamma { m: f64 },
    /// `psi(alpha) = -m ln(1 - alpha^2 / 2m)` for `alpha^2 < 2m`.
    #[serde(alias = "vg")]
    VarianceGamma { m: f64 },
    /// `psi(alpha) = base(alpha + tilt) - base(tilt)`.
    #[serde(rename = "esscher")]
    EsscherTilted { base: Box<LevyExponent>, tilt: f64 },
}

impl LevyExponent {
    pub fn poisson(m: f64) -> Result<Self> {
        let e = LevyExponent::Poisson { m };
        e.validate()?;
        Ok(e)
    }

    pub fn gamma(m: f64) -> Result<Self> {
        let e = LevyExponent::Gamma { m };
        e.validate()?;
        Ok(e)
    }

    pub fn variance_gamma(m: f64) -> Result<Self> {
        let e = LevyExponent::VarianceGamma { m };
        e.validate()?;
        Ok(e)
    }

    /// Checks parameter positivity and, for tilts, that the tilt lies in the base domain.
    pub fn validate(&self) -> Result<()> {
        match self {
            LevyExponent::Brownian => Ok(()),
            LevyExponent::Poisson { m } | LevyExponent::Gamma { m } | LevyExponent::VarianceGamma { m } => {
                ensure!(
                    m.is_finite() && *m > 0.0,
                    InvalidInput,
                    "{} rate must be positive and finite, got {m}",
                    self.family_name()
                );
                Ok(())
            }
            LevyExponent::EsscherTilted { base, tilt } => {
                base.validate()?;
                ensure!(
                    base.domain().contains(*tilt),
                    Domain,
                    "tilt {tilt} outside the domain of the base exponent"
                );
                Ok(())
            }
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            LevyExponent::Brownian => "brownian",
            LevyExponent::Poisson { .. } => "poisson",
            LevyExponent::Gamma { .. } => "gamma",
            LevyExponent::VarianceGamma { .. } => "variance-gamma",
            LevyExponent::EsscherTilted { .. } => "esscher",
        }
    }

    /// The untilted family at the bottom of any chain of tilts, with the accumulated tilt.
    pub fn root(&self) -> (&LevyExponent, f64) {
        match self {
            LevyExponent::EsscherTilted { base, tilt } => {
                let (root, inner) = base.root();
                (root, inner + tilt)
            }
            other => (other, 0.0),
        }
    }

    /// Real domain `A` on which the exponent is finite.
    pub fn domain(&self) -> Interval {
        match self {
            LevyExponent::Brownian | LevyExponent::Poisson { .. } => Interval::REALS,
            LevyExponent::Gamma { .. } => Interval::open(f64::NEG_INFINITY, 1.0),
            LevyExponent::VarianceGamma { m } => {
                let edge = (2.0 * m).sqrt();
                Interval::open(-edge, edge)
            }
            LevyExponent::EsscherTilted { base, tilt } => base.domain().shifted_by(*tilt),
        }
    }

    fn check_real(&self, alpha: f64) -> Result<()> {
        ensure!(
            self.domain().contains(alpha),
            Domain,
            "alpha = {alpha} outside the domain of the {} exponent",
            self.family_name()
        );
        Ok(())
    }

    /// `psi(alpha)` for real `alpha` in the domain.
    pub fn eval(&self, alpha: f64) -> Result<f64> {
        self.check_real(alpha)?;
        Ok(self.eval_real_unchecked(alpha))
    }

    pub(crate) fn eval_real_unchecked(&self, alpha: f64) -> f64 {
        match self {
            LevyExponent::Brownian => 0.5 * alpha * alpha,
            LevyExponent::Poisson { m } => m * alpha.exp_m1(),
            LevyExponent::Gamma { m } => -m * (-alpha).ln_1p(),
            LevyExponent::VarianceGamma { m } => -m * (-alpha * alpha / (2.0 * m)).ln_1p(),
            LevyExponent::EsscherTilted { base, tilt } => match **base {
                // drifted Brownian motion in closed form
                LevyExponent::Brownian => 0.5 * alpha * alpha + alpha * tilt,
                _ => base.eval_real_unchecked(alpha + tilt) - base.eval_real_unchecked(*tilt),
            },
        }
    }

    /// `psi(alpha)` for `alpha` real (in the domain) or purely imaginary.
    pub fn eval_complex(&self, alpha: Complex64) -> Result<Complex64> {
        if alpha.im == 0.0 {
            return self.eval(alpha.re).map(Complex64::from);
        }
        ensure!(
            alpha.re == 0.0,
            Domain,
            "complex argument {alpha} is neither real nor purely imaginary"
        );
        Ok(self.eval_complex_unchecked(alpha))
    }

    fn eval_complex_unchecked(&self, z: Complex64) -> Complex64 {
        let one = Complex64::new(1.0, 0.0);
        match self {
            LevyExponent::Brownian => 0.5 * z * z,
            LevyExponent::Poisson { m } => *m * (z.exp() - one),
            LevyExponent::Gamma { m } => -*m * (one - z).ln(),
            LevyExponent::VarianceGamma { m } => -*m * (one - z * z / (2.0 * m)).ln(),
            LevyExponent::EsscherTilted { base, tilt } => {
                base.eval_complex_unchecked(z + tilt) - base.eval_real_unchecked(*tilt)
            }
        }
    }

    /// Esscher transform `alpha -> psi(alpha + lambda) - psi(lambda)`.
    ///
    /// Poisson tilts collapse to a Poisson exponent with rate `m e^lambda`;
    /// repeated tilts accumulate into one tilt of the root family and a net
    /// tilt of zero returns the root itself.
    pub fn esscher_transform(&self, lambda: f64) -> Result<LevyExponent> {
        ensure!(
            self.domain().contains(lambda),
            Domain,
            "Esscher parameter {lambda} outside the domain of the {} exponent",
            self.family_name()
        );
        if lambda == 0.0 {
            return Ok(self.clone());
        }
        Ok(match self {
            LevyExponent::Poisson { m } => LevyExponent::Poisson { m: m * lambda.exp() },
            LevyExponent::EsscherTilted { base, tilt } => {
                let total = tilt + lambda;
                if total == 0.0 {
                    (**base).clone()
                } else {
                    LevyExponent::EsscherTilted {
                        base: base.clone(),
                        tilt: total,
                    }
                }
            }
            other => LevyExponent::EsscherTilted {
                base: Box::new(other.clone()),
                tilt: lambda,
            },
        })
    }

    /// Excess rate of return `R(lambda, sigma) = psi(sigma) + psi(-lambda) - psi(sigma - lambda)`.
    pub fn excess_rate_of_return(&self, lambda: f64, sigma: f64) -> Result<f64> {
        ensure!(lambda >= 0.0, Domain, "risk aversion must be nonnegative, got {lambda}");
        ensure!(sigma > 0.0, Domain, "volatility must be positive, got {sigma}");
        Ok(self.eval(sigma)? + self.eval(-lambda)? - self.eval(sigma - lambda)?)
    }

    /// Recovers the fiducial exponent `phi(alpha) = psi(alpha - lambda) - psi(-lambda)` of a
    /// physical exponent `psi`, and checks `psi(alpha) = phi(alpha + lambda) - phi(lambda)`
    /// at sampled points of the domain.
    pub fn fiducial_physical_pair(&self, lambda: f64) -> Result<(LevyExponent, bool)> {
        let phi = self.esscher_transform(-lambda)?;
        let points = self.domain().sample_points(32, 4.0);
        let mut check = true;
        for alpha in points {
            let direct = self.eval(alpha)?;
            let round_trip = phi.eval(alpha + lambda)? - phi.eval(lambda)?;
            check &= crate::approx_eq(direct, round_trip, IDENTITY_TOL);
        }
        Ok((phi, check))
    }
}

impl std::fmt::Display for LevyExponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LevyExponent::Brownian => write!(f, "brownian"),
            LevyExponent::Poisson { m } => write!(f, "poisson(m={m})"),
            LevyExponent::Gamma { m } => write!(f, "gamma(m={m})"),
            LevyExponent::VarianceGamma { m } => write!(f, "variance-gamma(m={m})"),
            LevyExponent::EsscherTilted { base, tilt } => write!(f, "esscher({base}, {tilt})"),
        }
    }
}
