mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

const CONFIG_SCHEMA: &str = r#"CONFIG FILE (JSON, unknown keys are rejected):
  {
    "model": {
      "s0": 100, "r": 0.02, "sigma": 0.2,
      "phi": {"family": "brownian"}
           | {"family": "poisson", "m": 1.0}
           | {"family": "gamma", "m": 1.0}
           | {"family": "variance-gamma", "m": 1.0}
           | {"family": "esscher", "base": <phi>, "tilt": 0.5},
      "prior": {"atoms": [[x, weight], ...]}
             | {"density": "uniform" | "truncated-exponential" | "truncated-lognormal",
                "support": [a, b], "nodes": 64, "rate": .., "mu": .., "sigma": ..}
    },
    "grid": {"horizon": 1.0, "steps": 100},
    "seed": 42,
    "paths": 10000,
    "claim": {"kind": "call" | "put", "strike": 100, "maturity": 1.0}
           | {"kind": "bond", "maturity": 1.0}
           | {"kind": "terminal-function", "table": [[s, payoff], ...], "maturity": 1.0},
    "utility": {"kind": "log", "endowment": 1.0}
             | {"kind": "power", "gamma": 2.0, "endowment": 1.0}
  }
Flags override config values. Weights are renormalized; factor values must be positive.

EXIT STATUS: 0 success, 1 a verification test failed, 2 invalid input or configuration.
Without --out, output goes to stdout."#;

const SIMULATE_SCHEMA: &str = "OUTPUT (CSV, numbers with 17 significant digits):
  long layout:     t,xi,s,pi,lambda,w,b,x_true,path_id   (one row per path and grid time)
  per-path layout: t,xi,s,pi,lambda,w,b,x_true           (file <stem>_<path_id>.<ext> per path)
  w is the innovations process (Brownian information only); b and x_true are set for the
  hidden-variable construction with Brownian information (x_true for every hidden path).";

const POSTERIOR_SCHEMA: &str = "OUTPUT (CSV): x,weight   one row per prior atom, posterior weights at (xi, t).
  With --price the information value is first recovered from the asset price.";

const MPR_SCHEMA: &str = "INPUT (CSV with header): t,s
OUTPUT (CSV): t,s,xi,lambda,dlambda,excess_return
  lambda is the filtered risk aversion, dlambda its derivative in xi (the posterior variance),
  excess_return the instantaneous excess rate of return at (lambda, sigma).";

const PRICE_SCHEMA: &str = r#"OUTPUT (JSON): {"price": .., "std_error": .., "n_paths": ..}
  The claim's maturity must lie on the grid; without a grid, a single step to maturity is used."#;

const INVEST_SCHEMA: &str = r#"OUTPUT (JSON):
  {"utility": {..}, "horizon": .., "beta": ..,
   "payoff": {"price": E[H_T], "std_error": .., "n_paths": ..},
   "expected_utility": {"price": E[U(H_T)], "std_error": .., "n_paths": ..},
   "budget": {"price": E[pi_T H_T], "std_error": .., "n_paths": ..},
   "bond_utility": U(H0 e^{rT})}"#;

const VERIFY_SCHEMA: &str = r#"OUTPUT (JSON array):
  [{"name": .., "statistic": .., "threshold": .., "passed": true|false, "n_samples": .., "notes": ..}, ..]
  p-value tests pass when statistic > threshold, all others when statistic <= threshold.
  Exit status 1 if any test fails."#;

#[derive(Parser, Debug)]
#[command(
    name = "levyinfo",
    version,
    about = "Information-based asset pricing with a hidden risk-aversion factor",
    after_long_help = CONFIG_SCHEMA
)]
struct Cli {
    /// Worker threads; results do not depend on this value.
    #[arg(long, global = true, env = "LEVYINFO_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,

    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct MonteCarlo {
    #[arg(long)]
    seed: Option<u64>,

    #[arg(long)]
    paths: Option<usize>,

    #[arg(long)]
    horizon: Option<f64>,

    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ConstructionArg {
    /// Draw X from the prior, then xi conditional on X.
    Hidden,
    /// Euler scheme on the observable equation (Brownian information only).
    Sde,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Layout {
    Long,
    PerPath,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate information, price, kernel and filter paths.
    #[command(after_help = SIMULATE_SCHEMA)]
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        mc: MonteCarlo,
        #[arg(long, value_enum, default_value = "hidden")]
        construction: ConstructionArg,
        #[arg(long, value_enum, default_value = "long")]
        layout: Layout,
    },
    /// Posterior law of the risk-aversion factor at one (xi, t) or (price, t).
    #[command(after_help = POSTERIOR_SCHEMA)]
    Posterior {
        #[command(flatten)]
        common: Common,
        #[arg(long, conflicts_with = "price", required_unless_present = "price")]
        xi: Option<f64>,
        #[arg(long)]
        price: Option<f64>,
        #[arg(long)]
        t: f64,
    },
    /// Filter the market price of risk along an observed price series.
    #[command(name = "estimate-mpr", after_help = MPR_SCHEMA)]
    EstimateMpr {
        #[command(flatten)]
        common: Common,
        /// CSV file with columns t,s.
        #[arg(long)]
        prices: PathBuf,
    },
    /// Monte Carlo price of the configured claim.
    #[command(after_help = PRICE_SCHEMA)]
    Price {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        mc: MonteCarlo,
        #[arg(long)]
        strike: Option<f64>,
        #[arg(long)]
        maturity: Option<f64>,
    },
    /// Optimal terminal payoff for the configured utility at the grid horizon.
    #[command(after_help = INVEST_SCHEMA)]
    Invest {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        mc: MonteCarlo,
    },
    /// Run the statistical verification suite.
    #[command(after_help = VERIFY_SCHEMA)]
    Verify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        mc: MonteCarlo,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| commands::run(cli.command)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
