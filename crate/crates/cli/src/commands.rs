use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use levyinfo_core::pricing::{monte_carlo_price, optimal_payoff};
use levyinfo_core::simulate::{fmt_f64, simulate_paths, CSV_HEADER};
use levyinfo_core::verify::{run_suite, SuiteOptions};
use levyinfo_core::{ClaimKind, Construction, McEstimate, TimeGrid, UtilitySpec};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{self, ConfigError, RunConfig};
use crate::{Command, Common, ConstructionArg, Layout, MonteCarlo};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] levyinfo_core::Error),
    #[error("{0}: {1}")]
    Io(PathBuf, io::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        2
    }
}

type CliResult<T> = Result<T, CliError>;

fn open_out(out: Option<&Path>) -> CliResult<Box<dyn Write>> {
    match out {
        Some(p) => {
            let f = File::create(p).map_err(|e| CliError::Io(p.to_path_buf(), e))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
    }
}

fn io_err(out: Option<&Path>) -> impl Fn(io::Error) -> CliError + '_ {
    move |e| CliError::Io(out.map(Path::to_path_buf).unwrap_or_else(|| "<stdout>".into()), e)
}

fn write_json<T: Serialize>(out: Option<&Path>, value: &T) -> CliResult<()> {
    let mut w = open_out(out)?;
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Usage(e.to_string()))?;
    writeln!(w, "{text}").and_then(|_| w.flush()).map_err(io_err(out))
}

pub fn run(command: Command) -> CliResult<ExitCode> {
    match command {
        Command::Simulate {
            common,
            mc,
            construction,
            layout,
        } => simulate(&common, &mc, construction, layout),
        Command::Posterior { common, xi, price, t } => posterior(&common, xi, price, t),
        Command::EstimateMpr { common, prices } => estimate_mpr(&common, &prices),
        Command::Price {
            common,
            mc,
            strike,
            maturity,
        } => price(&common, &mc, strike, maturity),
        Command::Invest { common, mc } => invest(&common, &mc),
        Command::Verify { common, mc } => verify(&common, &mc),
    }
}

fn simulate(common: &Common, mc: &MonteCarlo, construction: ConstructionArg, layout: Layout) -> CliResult<ExitCode> {
    let cfg = config::load(&common.config)?;
    let seed = cfg.seed(mc.seed)?;
    let n = cfg.paths(mc.paths)?;
    let grid = cfg.grid(mc.horizon, mc.steps)?;
    let construction = match construction {
        ConstructionArg::Hidden => Construction::Hidden,
        ConstructionArg::Sde => Construction::Sde,
    };
    let bundles = simulate_paths(&cfg.model, &grid, seed, n, construction)?;
    let out = common.out.as_deref();
    match layout {
        Layout::Long => {
            let mut w = open_out(out)?;
            let write = |w: &mut dyn Write| -> io::Result<()> {
                writeln!(w, "{CSV_HEADER},path_id")?;
                for (i, b) in bundles.iter().enumerate() {
                    b.write_csv_rows(w, Some(i))?;
                }
                w.flush()
            };
            write(&mut w).map_err(io_err(out))?;
        }
        Layout::PerPath => {
            let base = out.ok_or_else(|| CliError::Usage("--layout per-path needs --out".into()))?;
            for (i, b) in bundles.iter().enumerate() {
                let path = per_path_name(base, i);
                let f = File::create(&path).map_err(|e| CliError::Io(path.clone(), e))?;
                let mut w = BufWriter::new(f);
                writeln!(w, "{CSV_HEADER}")
                    .and_then(|_| b.write_csv_rows(&mut w, None))
                    .and_then(|_| w.flush())
                    .map_err(|e| CliError::Io(path.clone(), e))?;
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// `runs/paths.csv` and path 3 give `runs/paths_3.csv`.
pub fn per_path_name(base: &Path, id: usize) -> PathBuf {
    let stem = base
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match base.extension() {
        Some(ext) => format!("{stem}_{id}.{}", ext.to_string_lossy()),
        None => format!("{stem}_{id}"),
    };
    base.with_file_name(name)
}

fn posterior(common: &Common, xi: Option<f64>, price: Option<f64>, t: f64) -> CliResult<ExitCode> {
    let cfg = config::load(&common.config)?;
    let xi = match (xi, price) {
        (Some(xi), _) => xi,
        (None, Some(s)) => cfg.model.information_from_price(s, t)?,
        (None, None) => return Err(CliError::Usage("give --xi or --price".into())),
    };
    let post = cfg.model.posterior(xi, t)?;
    let out = common.out.as_deref();
    let mut w = open_out(out)?;
    let write = |w: &mut dyn Write| -> io::Result<()> {
        writeln!(w, "x,weight")?;
        for (x, q) in &post.atoms {
            writeln!(w, "{},{}", fmt_f64(*x), fmt_f64(*q))?;
        }
        w.flush()
    };
    write(&mut w).map_err(io_err(out))?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Deserialize)]
struct PriceRow {
    t: f64,
    s: f64,
}

fn estimate_mpr(common: &Common, prices: &Path) -> CliResult<ExitCode> {
    let cfg = config::load(&common.config)?;
    let model = &cfg.model;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(prices)
        .map_err(|e| CliError::Usage(format!("{}: {e}", prices.display())))?;
    let mut rows = Vec::new();
    for (i, rec) in reader.deserialize::<PriceRow>().enumerate() {
        let row = rec.map_err(|e| CliError::Usage(format!("{}: record {}: {e}", prices.display(), i + 1)))?;
        let xi = model.information_from_price(row.s, row.t)?;
        let (lam, dlam) = model.lambda(xi, row.t)?;
        let excess = model
            .phi()
            .esscher_transform(lam)?
            .excess_rate_of_return(lam, model.sigma())?;
        rows.push([row.t, row.s, xi, lam, dlam, excess]);
    }
    let out = common.out.as_deref();
    let mut w = open_out(out)?;
    let write = |w: &mut dyn Write| -> io::Result<()> {
        writeln!(w, "t,s,xi,lambda,dlambda,excess_return")?;
        for r in &rows {
            let cells: Vec<String> = r.iter().map(|v| fmt_f64(*v)).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        w.flush()
    };
    write(&mut w).map_err(io_err(out))?;
    Ok(ExitCode::SUCCESS)
}

fn pricing_grid(cfg: &RunConfig, mc: &MonteCarlo, maturity: f64) -> CliResult<TimeGrid> {
    if mc.horizon.is_none() && mc.steps.is_none() && cfg.grid.is_none() {
        return Ok(TimeGrid::new(maturity, 1)?);
    }
    Ok(cfg.grid(mc.horizon, mc.steps)?)
}

fn price(common: &Common, mc: &MonteCarlo, strike: Option<f64>, maturity: Option<f64>) -> CliResult<ExitCode> {
    let cfg = config::load(&common.config)?;
    let mut claim = cfg
        .claim
        .clone()
        .ok_or_else(|| CliError::Usage(format!("{}: `claim` section required", cfg.file.display())))?;
    if let Some(k) = strike {
        match &mut claim.kind {
            ClaimKind::Call { strike } | ClaimKind::Put { strike } => *strike = k,
            _ => return Err(CliError::Usage("--strike applies to calls and puts only".into())),
        }
    }
    if let Some(m) = maturity {
        claim.maturity = m;
    }
    claim.validate()?;
    let seed = cfg.seed(mc.seed)?;
    let n = cfg.paths(mc.paths)?;
    let grid = pricing_grid(&cfg, mc, claim.maturity)?;
    let est = monte_carlo_price(&cfg.model, &claim, n, &grid, seed)?;
    write_json(common.out.as_deref(), &est)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct InvestSummary {
    utility: UtilitySpec,
    horizon: f64,
    beta: f64,
    payoff: McEstimate,
    expected_utility: McEstimate,
    budget: McEstimate,
    bond_utility: f64,
}

fn invest(common: &Common, mc: &MonteCarlo) -> CliResult<ExitCode> {
    let cfg = config::load(&common.config)?;
    let utility = cfg
        .utility
        .ok_or_else(|| CliError::Usage(format!("{}: `utility` section required", cfg.file.display())))?;
    let seed = cfg.seed(mc.seed)?;
    let n = cfg.paths(mc.paths)?;
    let grid = cfg.grid(mc.horizon, mc.steps)?;
    let sol = optimal_payoff(&cfg.model, &utility, n, &grid, seed)?;
    let summary = InvestSummary {
        utility,
        horizon: grid.t_max(),
        beta: sol.beta,
        payoff: McEstimate::from_samples(&sol.payoffs),
        expected_utility: sol.expected_utility,
        budget: sol.budget,
        bond_utility: sol.bond_utility,
    };
    write_json(common.out.as_deref(), &summary)?;
    Ok(ExitCode::SUCCESS)
}

fn verify(common: &Common, mc: &MonteCarlo) -> CliResult<ExitCode> {
    let cfg = config::load(&common.config)?;
    let opts = SuiteOptions {
        n_paths: cfg.paths(mc.paths)?,
        grid: cfg.grid(mc.horizon, mc.steps)?,
        seed: cfg.seed(mc.seed)?,
    };
    let reports = run_suite(&cfg.model, &opts)?;
    write_json(common.out.as_deref(), &reports)?;
    for r in reports.iter().filter(|r| !r.passed) {
        eprintln!("{}", r.summary_line());
    }
    if reports.iter().all(|r| r.passed) {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(1))
    }
}
