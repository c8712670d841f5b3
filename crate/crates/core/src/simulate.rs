//! Information, price, kernel and innovations paths on a uniform time grid.
//!
//! Two constructions are provided:
//!
//! * hidden-variable: draw `X` from the prior (or fix it), then simulate `xi`
//!   as a Levy process with the tilted exponent `phi(alpha + X) - phi(X)`;
//! * observable (Brownian only): Euler-Maruyama on `d xi = lambda(xi, t) dt + dW`,
//!   which never generates `X`.
//!
//! Per-family increment laws given `X = x` over a step `dt`, where `(root, theta)`
//! is the untilted family of `phi` and the total tilt including `x`:
//!
//! | family          | increment                                               |
//! |-----------------|---------------------------------------------------------|
//! | Brownian        | `N(theta dt, dt)`                                       |
//! | Poisson(m)      | `Poisson(m e^theta dt)`                                 |
//! | Gamma(m)        | `Gamma(shape m dt, rate 1 - theta)`                     |
//! | VarianceGamma(m)| `theta G + sqrt(G) Z`, `G ~ Gamma(m dt, rate m - theta^2/2)` |

use std::io::{self, Write};

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use rayon::prelude::*;

use crate::error::{ensure, Error, Result};
use crate::filter::MarketModel;
use crate::levy::LevyExponent;
use crate::rng::{path_rng, PathRng};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    t_max: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_max: f64, n_steps: usize) -> Result<Self> {
        ensure!(
            t_max.is_finite() && t_max > 0.0,
            InvalidInput,
            "horizon must be positive, got {t_max}"
        );
        ensure!(n_steps > 0, InvalidInput, "grid needs at least one step");
        Ok(TimeGrid { t_max, n_steps })
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.t_max / self.n_steps as f64
    }

    /// Time of grid point `k`; `time(n_steps) == t_max` exactly.
    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.t_max
        } else {
            self.t_max * k as f64 / self.n_steps as f64
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.time(k)).collect()
    }

    /// Index of the grid point at `t`, if `t` lies on the grid.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let k = (t / self.dt()).round();
        if k < 0.0 || k > self.n_steps as f64 {
            return None;
        }
        let k = k as usize;
        ((self.time(k) - t).abs() <= 1e-9 * self.t_max.max(1.0)).then_some(k)
    }
}

/// Hidden variables of the direct construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Hidden {
    pub x_true: f64,
    /// Brownian driver `B_t`, recorded for Brownian information only.
    pub b: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InfoPath {
    pub xi: Vec<f64>,
    pub hidden: Option<Hidden>,
}

/// Output of the observable construction.
#[derive(Clone, Debug, PartialEq)]
pub struct SdePath {
    pub xi: Vec<f64>,
    pub lam: Vec<f64>,
    pub w: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathBundle {
    pub grid: TimeGrid,
    pub xi: Vec<f64>,
    pub s: Vec<f64>,
    pub pi: Vec<f64>,
    pub lam: Vec<f64>,
    /// Innovations process, Brownian information only.
    pub w: Option<Vec<f64>>,
    pub hidden: Option<Hidden>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Construction {
    Hidden,
    Sde,
}

/// Increment sampler for `xi` conditional on `X = x`.
#[derive(Clone, Copy, Debug)]
enum Increment {
    Gaussian { drift: f64, sd: f64 },
    Poisson(Poisson<f64>),
    Gamma(Gamma<f64>),
    VarianceGamma { drift: f64, clock: Gamma<f64> },
}

impl Increment {
    fn new(phi: &LevyExponent, x: f64, dt: f64) -> Result<Self> {
        let (root, base_tilt) = phi.root();
        let theta = base_tilt + x;
        let bad = |e: &dyn std::fmt::Display| Error::Domain(format!("increment law for x = {x}: {e}"));
        Ok(match *root {
            LevyExponent::Brownian => Increment::Gaussian {
                drift: theta * dt,
                sd: dt.sqrt(),
            },
            LevyExponent::Poisson { m } => Increment::Poisson(Poisson::new(m * theta.exp() * dt).map_err(|e| bad(&e))?),
            LevyExponent::Gamma { m } => {
                ensure!(theta < 1.0, Domain, "gamma information needs x < 1, got tilt {theta}");
                Increment::Gamma(Gamma::new(m * dt, 1.0 / (1.0 - theta)).map_err(|e| bad(&e))?)
            }
            LevyExponent::VarianceGamma { m } => {
                let rate = m - 0.5 * theta * theta;
                ensure!(
                    rate > 0.0,
                    Domain,
                    "variance-gamma information needs x^2 < 2m, got tilt {theta}"
                );
                Increment::VarianceGamma {
                    drift: theta,
                    clock: Gamma::new(m * dt, 1.0 / rate).map_err(|e| bad(&e))?,
                }
            }
            LevyExponent::EsscherTilted { .. } => unreachable!("root() strips tilts"),
        })
    }

    #[inline]
    fn sample(&self, rng: &mut PathRng) -> f64 {
        match self {
            Increment::Gaussian { drift, sd } => {
                let z: f64 = rng.sample(StandardNormal);
                drift + sd * z
            }
            Increment::Poisson(p) => p.sample(rng),
            Increment::Gamma(g) => g.sample(rng),
            Increment::VarianceGamma { drift, clock } => {
                let g = clock.sample(rng);
                let z: f64 = rng.sample(StandardNormal);
                drift * g + g.sqrt() * z
            }
        }
    }
}

fn check_factor(model: &MarketModel, x: f64) -> Result<()> {
    let domain = model.phi().domain();
    ensure!(
        x.is_finite() && domain.contains(x) && domain.contains(x + model.sigma()),
        Domain,
        "risk-aversion value {x} violates the domain of {}",
        model.phi()
    );
    Ok(())
}

/// Samples `X` from the prior.
pub fn draw_factor(model: &MarketModel, rng: &mut PathRng) -> f64 {
    let u: f64 = rng.random();
    model.prior().quantile(u)
}

/// Information path conditional on `X = x` (drawn from the prior when `x` is `None`).
pub fn simulate_conditional_info(
    model: &MarketModel,
    grid: &TimeGrid,
    rng: &mut PathRng,
    x: Option<f64>,
) -> Result<InfoPath> {
    let x = match x {
        Some(x) => {
            check_factor(model, x)?;
            x
        }
        None => draw_factor(model, rng),
    };
    let n = grid.n_steps();
    let law = Increment::new(model.phi(), x, grid.dt())?;
    let mut xi = Vec::with_capacity(n + 1);
    xi.push(0.0);
    if let Increment::Gaussian { sd, .. } = law {
        // keep xi_t = B_t + x t exact on the grid
        let mut b = Vec::with_capacity(n + 1);
        b.push(0.0);
        let mut acc = 0.0;
        for k in 1..=n {
            let z: f64 = rng.sample(StandardNormal);
            acc += sd * z;
            b.push(acc);
            xi.push(acc + x * grid.time(k));
        }
        return Ok(InfoPath {
            xi,
            hidden: Some(Hidden { x_true: x, b: Some(b) }),
        });
    }
    let mut acc = 0.0;
    for _ in 0..n {
        acc += law.sample(rng);
        xi.push(acc);
    }
    Ok(InfoPath {
        xi,
        hidden: Some(Hidden { x_true: x, b: None }),
    })
}

/// Euler-Maruyama solution of `d xi = lambda(xi, t) dt + dW`, `xi_0 = 0`.
pub fn simulate_info_sde(model: &MarketModel, grid: &TimeGrid, rng: &mut PathRng) -> Result<SdePath> {
    ensure!(
        model.is_brownian(),
        UnsupportedModel,
        "the observable construction needs Brownian information, got {}",
        model.phi()
    );
    let n = grid.n_steps();
    let dt = grid.dt();
    let sd = dt.sqrt();
    let mut xi = Vec::with_capacity(n + 1);
    let mut lam = Vec::with_capacity(n + 1);
    let mut w = Vec::with_capacity(n + 1);
    let (mut x, mut wk) = (0.0, 0.0);
    for k in 0..=n {
        let l = model.lambda_unchecked(x, grid.time(k)).0;
        xi.push(x);
        lam.push(l);
        w.push(wk);
        if k < n {
            let dw = sd * rng.sample::<f64, _>(StandardNormal);
            x += l * dt + dw;
            wk += dw;
        }
    }
    Ok(SdePath { xi, lam, w })
}

/// Asset price, kernel, estimate and (Brownian) innovations along an information path.
pub fn build_market_paths(
    model: &MarketModel,
    grid: &TimeGrid,
    xi: &[f64],
    hidden: Option<Hidden>,
) -> Result<PathBundle> {
    ensure!(
        xi.len() == grid.n_steps() + 1,
        InvalidInput,
        "path has {} points, grid has {}",
        xi.len(),
        grid.n_steps() + 1
    );
    ensure!(
        xi[0] == 0.0,
        InvalidInput,
        "information paths start at 0, got {}",
        xi[0]
    );
    ensure!(xi.iter().all(|v| v.is_finite()), Domain, "non-finite information value");
    let n = xi.len();
    let mut s = Vec::with_capacity(n);
    let mut pi = Vec::with_capacity(n);
    let mut lam = Vec::with_capacity(n);
    for (k, &v) in xi.iter().enumerate() {
        let t = grid.time(k);
        s.push(model.asset_price(v, t));
        pi.push(model.log_kernel_unchecked(v, t).exp());
        lam.push(model.lambda_unchecked(v, t).0);
    }
    let w = model.is_brownian().then(|| {
        let dt = grid.dt();
        let mut integral = 0.0;
        let mut w = Vec::with_capacity(n);
        for k in 0..n {
            w.push(xi[k] - integral);
            integral += lam[k] * dt;
        }
        w
    });
    Ok(PathBundle {
        grid: *grid,
        xi: xi.to_vec(),
        s,
        pi,
        lam,
        w,
        hidden,
    })
}

/// `x_hat = xi_T / T` and `b_hat_t = xi_t - x_hat t`.
pub fn reconstruct_hidden(xi: &[f64], grid: &TimeGrid) -> Result<(f64, Vec<f64>)> {
    ensure!(
        xi.len() == grid.n_steps() + 1,
        InvalidInput,
        "path has {} points, grid has {}",
        xi.len(),
        grid.n_steps() + 1
    );
    let x_hat = xi[grid.n_steps()] / grid.t_max();
    let b_hat = xi.iter().enumerate().map(|(k, v)| v - x_hat * grid.time(k)).collect();
    Ok((x_hat, b_hat))
}

/// Runs `f(path_rng(seed, i))` for `i in 0..n_paths` on the current rayon pool.
/// Output order is path order, independent of the worker count.
pub fn par_paths<T, F>(seed: u64, n_paths: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut PathRng) -> Result<T> + Sync,
{
    (0..n_paths as u64)
        .into_par_iter()
        .map(|i| f(&mut path_rng(seed, i)))
        .collect()
}

/// Full bundles for `n_paths` paths.
pub fn simulate_paths(
    model: &MarketModel,
    grid: &TimeGrid,
    seed: u64,
    n_paths: usize,
    construction: Construction,
) -> Result<Vec<PathBundle>> {
    par_paths(seed, n_paths, |rng| match construction {
        Construction::Hidden => {
            let info = simulate_conditional_info(model, grid, rng, None)?;
            build_market_paths(model, grid, &info.xi, info.hidden)
        }
        Construction::Sde => {
            let sde = simulate_info_sde(model, grid, rng)?;
            build_market_paths(model, grid, &sde.xi, None)
        }
    })
}

pub const CSV_HEADER: &str = "t,xi,s,pi,lambda,w,b,x_true";

/// Round-trip exact rendering with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

impl PathBundle {
    /// Writes one row per grid point. With `path_id`, a trailing `path_id` column is added.
    pub fn write_csv_rows<W: Write + ?Sized>(&self, out: &mut W, path_id: Option<usize>) -> io::Result<()> {
        let x_true = self.hidden.as_ref().map(|h| fmt_f64(h.x_true)).unwrap_or_default();
        let b = self.hidden.as_ref().and_then(|h| h.b.as_ref());
        for k in 0..self.xi.len() {
            let w = self.w.as_ref().map(|w| fmt_f64(w[k])).unwrap_or_default();
            let bk = b.map(|b| fmt_f64(b[k])).unwrap_or_default();
            write!(
                out,
                "{},{},{},{},{},{},{},{}",
                fmt_f64(self.grid.time(k)),
                fmt_f64(self.xi[k]),
                fmt_f64(self.s[k]),
                fmt_f64(self.pi[k]),
                fmt_f64(self.lam[k]),
                w,
                bk,
                x_true
            )?;
            match path_id {
                Some(id) => writeln!(out, ",{id}")?,
                None => writeln!(out)?,
            }
        }
        Ok(())
    }
}
