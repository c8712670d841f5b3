//! Valuation through the pricing kernel, `H_0 = E[pi_T H_T]`, and optimal
//! terminal payoffs `H_T = I(beta pi_T)` for a given utility.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::filter::MarketModel;
use crate::simulate::{par_paths, simulate_conditional_info, TimeGrid};
use crate::stats::{mean_and_se, normal_cdf};

/// Payoff of a claim on `S_T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ClaimKind {
    Bond,
    Call {
        strike: f64,
    },
    Put {
        strike: f64,
    },
    /// Piecewise-linear payoff through `(s, payoff)` points, flat outside the table.
    TerminalFunction {
        table: Vec<[f64; 2]>,
    },
}

/// `{"kind":"call","strike":100,"maturity":1.0}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawClaim")]
pub struct ClaimSpec {
    #[serde(flatten)]
    pub kind: ClaimKind,
    pub maturity: f64,
}

impl ClaimSpec {
    pub fn new(kind: ClaimKind, maturity: f64) -> Result<Self> {
        let c = ClaimSpec { kind, maturity };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.maturity.is_finite() && self.maturity > 0.0,
            InvalidInput,
            "maturity must be positive, got {}",
            self.maturity
        );
        match &self.kind {
            ClaimKind::Call { strike } | ClaimKind::Put { strike } => {
                ensure!(
                    strike.is_finite() && *strike > 0.0,
                    InvalidInput,
                    "strike must be positive, got {strike}"
                );
            }
            ClaimKind::TerminalFunction { table } => {
                ensure!(!table.is_empty(), InvalidInput, "payoff table is empty");
                ensure!(
                    table.windows(2).all(|p| p[0][0] < p[1][0]),
                    InvalidInput,
                    "payoff table must be strictly increasing in s"
                );
                ensure!(
                    table.iter().flatten().all(|v| v.is_finite()),
                    InvalidInput,
                    "payoff table has non-finite entries"
                );
            }
            ClaimKind::Bond => {}
        }
        Ok(())
    }

    pub fn payoff(&self, s: f64) -> f64 {
        match &self.kind {
            ClaimKind::Bond => 1.0,
            ClaimKind::Call { strike } => (s - strike).max(0.0),
            ClaimKind::Put { strike } => (strike - s).max(0.0),
            ClaimKind::TerminalFunction { table } => interpolate(table, s),
        }
    }
}

#[derive(Deserialize)]
#[serde(rename_all = "kebab-case")]
enum ClaimTag {
    Bond,
    Call,
    Put,
    TerminalFunction,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClaim {
    kind: ClaimTag,
    maturity: f64,
    strike: Option<f64>,
    table: Option<Vec<[f64; 2]>>,
}

impl TryFrom<RawClaim> for ClaimSpec {
    type Error = String;

    fn try_from(raw: RawClaim) -> std::result::Result<Self, String> {
        let kind = match (raw.kind, raw.strike, raw.table) {
            (ClaimTag::Bond, None, None) => ClaimKind::Bond,
            (ClaimTag::Call, Some(strike), None) => ClaimKind::Call { strike },
            (ClaimTag::Put, Some(strike), None) => ClaimKind::Put { strike },
            (ClaimTag::TerminalFunction, None, Some(table)) => ClaimKind::TerminalFunction { table },
            (ClaimTag::Call | ClaimTag::Put, None, _) => return Err("call and put claims need `strike`".into()),
            (ClaimTag::TerminalFunction, _, None) => return Err("terminal-function claims need `table`".into()),
            _ => return Err("`strike` applies to calls and puts only, `table` to terminal-function only".into()),
        };
        Ok(ClaimSpec {
            kind,
            maturity: raw.maturity,
        })
    }
}

fn interpolate(table: &[[f64; 2]], s: f64) -> f64 {
    let first = table[0];
    let last = table[table.len() - 1];
    if s <= first[0] {
        return first[1];
    }
    if s >= last[0] {
        return last[1];
    }
    let i = table.partition_point(|p| p[0] <= s);
    let (a, b) = (table[i - 1], table[i]);
    a[1] + (b[1] - a[1]) * (s - a[0]) / (b[0] - a[0])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub price: f64,
    pub std_error: f64,
    pub n_paths: usize,
}

impl McEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let (price, std_error) = mean_and_se(xs);
        McEstimate {
            price,
            std_error,
            n_paths: xs.len(),
        }
    }

    /// `|price - target| <= sigmas * std_error`.
    pub fn within(&self, target: f64, sigmas: f64) -> bool {
        (self.price - target).abs() <= sigmas * self.std_error
    }
}

/// `(pi_T, S_T)` per path from the hidden-variable construction, `X` drawn from the prior.
pub fn terminal_samples(
    model: &MarketModel,
    grid: &TimeGrid,
    maturity: f64,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    ensure!(n_paths > 0, InvalidInput, "need at least one path");
    let k = grid.index_of(maturity).ok_or_else(|| {
        Error::InvalidInput(format!(
            "maturity {maturity} is not a grid point of horizon {} with {} steps",
            grid.t_max(),
            grid.n_steps()
        ))
    })?;
    ensure!(k > 0, InvalidInput, "maturity must be after time 0");
    let sub = TimeGrid::new(grid.time(k), k)?;
    let t = sub.t_max();
    par_paths(seed, n_paths, |rng| {
        let info = simulate_conditional_info(model, &sub, rng, None)?;
        let xi = info.xi[k];
        Ok((model.log_kernel_unchecked(xi, t).exp(), model.asset_price(xi, t)))
    })
}

/// Monte Carlo value `E[pi_T H(S_T)]` with its standard error.
pub fn monte_carlo_price(
    model: &MarketModel,
    claim: &ClaimSpec,
    n_paths: usize,
    grid: &TimeGrid,
    seed: u64,
) -> Result<McEstimate> {
    claim.validate()?;
    let samples = terminal_samples(model, grid, claim.maturity, n_paths, seed)?;
    let values: Vec<f64> = samples.iter().map(|&(pi, s)| pi * claim.payoff(s)).collect();
    Ok(McEstimate::from_samples(&values))
}

/// Lognormal call value. Used as an independent check on the Monte Carlo engine.
pub fn black_scholes_oracle(s0: f64, k: f64, r: f64, sigma: f64, t: f64) -> f64 {
    if k <= 0.0 {
        return s0;
    }
    if t <= 0.0 || sigma <= 0.0 {
        return (s0 - k * (-r * t.max(0.0)).exp()).max(0.0);
    }
    let vol = sigma * t.sqrt();
    let d1 = ((s0 / k).ln() + (r + 0.5 * sigma * sigma) * t) / vol;
    let d2 = d1 - vol;
    s0 * normal_cdf(d1) - k * (-r * t).exp() * normal_cdf(d2)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum UtilityKind {
    Log,
    Power { gamma: f64 },
}

/// `{"kind":"power","gamma":2.0,"endowment":1.0}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawUtility")]
pub struct UtilitySpec {
    #[serde(flatten)]
    pub kind: UtilityKind,
    pub endowment: f64,
}

#[derive(Deserialize)]
#[serde(rename_all = "kebab-case")]
enum UtilityTag {
    Log,
    Power,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUtility {
    kind: UtilityTag,
    endowment: f64,
    gamma: Option<f64>,
}

impl TryFrom<RawUtility> for UtilitySpec {
    type Error = String;

    fn try_from(raw: RawUtility) -> std::result::Result<Self, String> {
        let kind = match (raw.kind, raw.gamma) {
            (UtilityTag::Log, None) => UtilityKind::Log,
            (UtilityTag::Power, Some(gamma)) => UtilityKind::Power { gamma },
            (UtilityTag::Log, Some(_)) => return Err("`gamma` does not apply to log utility".into()),
            (UtilityTag::Power, None) => return Err("power utility needs `gamma`".into()),
        };
        Ok(UtilitySpec {
            kind,
            endowment: raw.endowment,
        })
    }
}

impl UtilitySpec {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.endowment.is_finite() && self.endowment > 0.0,
            InvalidInput,
            "endowment must be positive, got {}",
            self.endowment
        );
        if let UtilityKind::Power { gamma } = self.kind {
            ensure!(
                gamma.is_finite() && gamma > 0.0 && gamma != 1.0,
                InvalidInput,
                "power utility needs gamma > 0, gamma != 1, got {gamma}"
            );
        }
        Ok(())
    }

    pub fn utility(&self, h: f64) -> f64 {
        match self.kind {
            UtilityKind::Log => h.ln(),
            UtilityKind::Power { gamma } => h.powf(1.0 - gamma) / (1.0 - gamma),
        }
    }

    /// Inverse marginal utility `I(y)`.
    pub fn inverse_marginal(&self, y: f64) -> f64 {
        match self.kind {
            UtilityKind::Log => 1.0 / y,
            UtilityKind::Power { gamma } => y.powf(-1.0 / gamma),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimalPayoff {
    pub beta: f64,
    pub kernels: Vec<f64>,
    pub payoffs: Vec<f64>,
    pub expected_utility: McEstimate,
    /// Utility of investing the endowment in the bond, `U(H0 e^{rT})`.
    pub bond_utility: f64,
    /// `E[pi_T H_T]` on the solving sample.
    pub budget: McEstimate,
}

/// Relative tolerance on the budget residual when solving for `beta`.
pub const BUDGET_TOL: f64 = 1e-8;

/// Optimal contract at the grid horizon: `H_T = I(beta pi_T)` with `beta` fixed by the budget.
pub fn optimal_payoff(
    model: &MarketModel,
    utility: &UtilitySpec,
    n_paths: usize,
    grid: &TimeGrid,
    seed: u64,
) -> Result<OptimalPayoff> {
    utility.validate()?;
    let horizon = grid.t_max();
    let kernels: Vec<f64> = terminal_samples(model, grid, horizon, n_paths, seed)?
        .into_iter()
        .map(|(pi, _)| pi)
        .collect();
    let h0 = utility.endowment;
    let beta = match utility.kind {
        UtilityKind::Log => 1.0 / h0,
        UtilityKind::Power { .. } => solve_budget(utility, &kernels)?,
    };
    let payoffs: Vec<f64> = match utility.kind {
        UtilityKind::Log => kernels.iter().map(|pi| h0 / pi).collect(),
        UtilityKind::Power { .. } => kernels.iter().map(|pi| utility.inverse_marginal(beta * pi)).collect(),
    };
    let utilities: Vec<f64> = payoffs.iter().map(|h| utility.utility(*h)).collect();
    let discounted: Vec<f64> = kernels.iter().zip(&payoffs).map(|(pi, h)| pi * h).collect();
    Ok(OptimalPayoff {
        beta,
        expected_utility: McEstimate::from_samples(&utilities),
        bond_utility: utility.utility(h0 * (model.r() * horizon).exp()),
        budget: McEstimate::from_samples(&discounted),
        kernels,
        payoffs,
    })
}

/// Bisection in `ln beta` on the decreasing budget function `E[pi I(beta pi)] - H0`.
fn solve_budget(utility: &UtilitySpec, kernels: &[f64]) -> Result<f64> {
    let h0 = utility.endowment;
    let n = kernels.len() as f64;
    let residual = |log_beta: f64| {
        let beta = log_beta.exp();
        kernels
            .iter()
            .map(|pi| pi * utility.inverse_marginal(beta * pi))
            .sum::<f64>()
            / n
            - h0
    };
    let mut lo = -h0.ln() - 20.0;
    let mut hi = -h0.ln() + 20.0;
    if !(residual(lo) > 0.0 && residual(hi) < 0.0) {
        lo -= 200.0;
        hi += 200.0;
        if !(residual(lo) > 0.0 && residual(hi) < 0.0) {
            return Err(Error::RootNotBracketed(format!(
                "budget residual does not change sign on ln beta in [{lo}, {hi}]"
            )));
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        let f = residual(mid);
        if f.abs() <= BUDGET_TOL * h0 || hi - lo < 1e-15 {
            return Ok(mid.exp());
        }
        if f > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}
