//! End-to-end acceptance checks, one PASS/FAIL line per criterion.
//! Runs without the libtest harness so every line is printed.

use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use levyinfo_core::pricing::{black_scholes_oracle, monte_carlo_price, optimal_payoff, terminal_samples};
use levyinfo_core::rng::{derive_seed, path_rng};
use levyinfo_core::stats::mean_and_se;
use levyinfo_core::verify::{
    conditional_cf_test, construction_equivalence_test, innovations_suite, kernel_martingale_tests,
    measure_change_test, reconstruction_distribution_test, reconstruction_independence_test, revelation_test,
    TestReport,
};
use levyinfo_core::{
    aggregate_kernels, approx_eq, ClaimKind, ClaimSpec, LevyExponent, MarketModel, PriorMeasure, TimeGrid, UtilityKind,
    UtilitySpec, MC_SIGMAS,
};
use num_complex::Complex64;
use rand::Rng;

type Verdict = (bool, String);
type Outcome = Result<Verdict, String>;

fn families() -> Vec<LevyExponent> {
    vec![
        LevyExponent::Brownian,
        LevyExponent::Poisson { m: 1.0 },
        LevyExponent::Gamma { m: 1.0 },
        LevyExponent::VarianceGamma { m: 1.0 },
    ]
}

fn two_atom(phi: LevyExponent, r: f64) -> MarketModel {
    let prior = PriorMeasure::discrete(&[(0.1, 0.5), (0.3, 0.5)]).unwrap();
    MarketModel::new(100.0, r, 0.2, phi, prior).unwrap()
}

fn all_passed(reports: &[TestReport]) -> Verdict {
    let detail = reports
        .iter()
        .map(|r| format!("{} {:.4}/{}", r.name, r.statistic, r.threshold))
        .collect::<Vec<_>>()
        .join("; ");
    (reports.iter().all(|r| r.passed), detail)
}

fn c1_black_scholes() -> Outcome {
    let start = Instant::now();
    let model = MarketModel::new(
        100.0,
        0.0,
        0.2,
        LevyExponent::Brownian,
        PriorMeasure::point_mass(0.3).unwrap(),
    )
    .map_err(|e| e.to_string())?;
    let claim = ClaimSpec::new(ClaimKind::Call { strike: 100.0 }, 1.0).map_err(|e| e.to_string())?;
    let grid = TimeGrid::new(1.0, 1).unwrap();
    let est = monte_carlo_price(&model, &claim, 1_000_000, &grid, 20_240_101).map_err(|e| e.to_string())?;
    let oracle = black_scholes_oracle(100.0, 100.0, 0.0, 0.2, 1.0);
    let secs = start.elapsed().as_secs_f64();
    Ok((
        est.within(oracle, MC_SIGMAS) && secs <= 60.0,
        format!(
            "price {:.5} +- {:.5} vs {oracle:.5} ({:.2} SE), {secs:.1}s",
            est.price,
            est.std_error,
            (est.price - oracle) / est.std_error
        ),
    ))
}

fn c2_harmonic_mean() -> Outcome {
    let start = Instant::now();
    let mut rng = path_rng(2, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let k = rng.random_range(1..8);
        let atoms: Vec<(f64, f64)> = (0..k)
            .map(|i| {
                (
                    0.02 + 0.1 * i as f64 + rng.random_range(0.0..0.09),
                    rng.random_range(0.05..1.0),
                )
            })
            .collect();
        let prior = PriorMeasure::discrete(&atoms).map_err(|e| e.to_string())?;
        let model = MarketModel::new(
            1.0,
            rng.random_range(0.0..0.1),
            0.2,
            LevyExponent::Brownian,
            prior.clone(),
        )
        .map_err(|e| e.to_string())?;
        for _ in 0..100 {
            let t: f64 = rng.random_range(0.01..10.0);
            let xi = prior.mean() * t + rng.random_range(-3.0..3.0) * t.sqrt();
            let parts: Vec<(f64, f64)> = prior
                .atoms()
                .iter()
                .map(|a| (model.individual_kernel(a.x, xi, t).unwrap(), a.w))
                .collect();
            let agg = aggregate_kernels(&parts).map_err(|e| e.to_string())?;
            let pi = model.pricing_kernel(xi, t).map_err(|e| e.to_string())?;
            worst = worst.max((agg - pi).abs() / pi);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        worst <= 1e-12 && secs < 1.0,
        format!("max relative gap {worst:.2e}, {secs:.3}s"),
    ))
}

fn c3_c4_martingales() -> Result<(Verdict, Verdict), String> {
    let start = Instant::now();
    let grid = TimeGrid::new(1.0, 10).unwrap();
    let mut mart = Vec::new();
    let mut bond = Vec::new();
    for (i, phi) in families().into_iter().enumerate() {
        let model = two_atom(phi, 0.03);
        let (m, b) =
            kernel_martingale_tests(&model, &grid, 100_000, derive_seed(0x34, i as u64)).map_err(|e| e.to_string())?;
        mart.push(m);
        bond.push(b);
    }
    let secs = start.elapsed().as_secs_f64();
    let (mp, md) = all_passed(&mart);
    let (bp, bd) = all_passed(&bond);
    Ok(((mp && secs <= 300.0, format!("{md}; {secs:.1}s")), (bp, bd)))
}

fn c5_excess_return() -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut detail = Vec::new();
    for phi in families() {
        let (s_max, l_max): (f64, f64) = match phi {
            LevyExponent::Gamma { .. } => (0.9, 2.0),
            LevyExponent::VarianceGamma { .. } => (0.7, 0.7),
            _ => (1.0, 2.0),
        };
        let sigmas: Vec<f64> = (1..=10).map(|i| s_max * i as f64 / 10.0).collect();
        let lambdas: Vec<f64> = (0..10).map(|j| l_max * j as f64 / 9.0).collect();
        let mut min_r = f64::INFINITY;
        let mut monotone = true;
        for (i, &s) in sigmas.iter().enumerate() {
            for (j, &l) in lambdas.iter().enumerate() {
                let r = phi.excess_rate_of_return(l, s).map_err(|e| e.to_string())?;
                min_r = min_r.min(r);
                if i + 1 < sigmas.len() {
                    monotone &= phi.excess_rate_of_return(l, sigmas[i + 1]).unwrap() >= r;
                }
                if j + 1 < lambdas.len() {
                    monotone &= phi.excess_rate_of_return(lambdas[j + 1], s).unwrap() >= r;
                }
            }
        }
        ok &= min_r >= 0.0 && monotone;
        detail.push(format!("{}: min R {min_r:.3e}, monotone {monotone}", phi.family_name()));
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((ok && secs < 1.0, format!("{}; {secs:.3}s", detail.join("; "))))
}

fn c6_involution() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut pairs_ok = true;
    for phi in [
        LevyExponent::Brownian,
        LevyExponent::Poisson { m: 1.5 },
        LevyExponent::Gamma { m: 2.0 },
        LevyExponent::VarianceGamma { m: 1.0 },
    ] {
        for lambda in [0.3, -0.4] {
            let there = phi.esscher_transform(lambda).map_err(|e| e.to_string())?;
            let back = there.esscher_transform(-lambda).map_err(|e| e.to_string())?;
            for a in phi.domain().sample_points(50, 4.0) {
                let (want, got) = (phi.eval(a).unwrap(), back.eval(a).unwrap());
                worst = worst.max((want - got).abs() / want.abs().max(1.0));
                let direct = phi.eval(a + lambda).ok().map(|v| v - phi.eval(lambda).unwrap());
                if let (Some(d), Ok(t)) = (direct, there.eval(a)) {
                    worst = worst.max((d - t).abs() / d.abs().max(1.0));
                }
            }
            pairs_ok &= there.fiducial_physical_pair(lambda).map_err(|e| e.to_string())?.1;
        }
    }
    Ok((
        worst <= 1e-12 && pairs_ok,
        format!("max relative gap {worst:.2e}, fiducial pairs consistent {pairs_ok}"),
    ))
}

fn c7_revelation() -> Outcome {
    let model = two_atom(LevyExponent::Brownian, 0.0);
    let r = revelation_test(&model, &[10.0, 100.0, 1000.0], 10_000, 7, 1.2).map_err(|e| e.to_string())?;
    Ok((r.passed, r.notes))
}

fn c8_lambda_derivative() -> Outcome {
    let prior = PriorMeasure::discrete(&[(0.05, 0.2), (0.15, 0.3), (0.3, 0.3), (0.5, 0.2)]).unwrap();
    let model = MarketModel::new(1.0, 0.01, 0.2, LevyExponent::Brownian, prior.clone()).unwrap();
    let mut rng = path_rng(8, 0);
    let (mut worst_var, mut worst_fd, mut min_slope) = (0.0f64, 0.0f64, f64::INFINITY);
    for _ in 0..100 {
        let t: f64 = rng.random_range(0.1..10.0);
        let xi = prior.mean() * t + rng.random_range(-2.0..2.0) * t.sqrt();
        let (_, slope) = model.lambda(xi, t).map_err(|e| e.to_string())?;
        let post = model.posterior(xi, t).map_err(|e| e.to_string())?;
        let m: f64 = post.atoms.iter().map(|(x, q)| x * q).sum();
        let var: f64 = post.atoms.iter().map(|(x, q)| q * (x - m).powi(2)).sum();
        worst_var = worst_var.max((slope - var).abs() / var);
        let h = 1e-4;
        let fd = (model.risk_aversion(xi + h, t).unwrap() - model.risk_aversion(xi - h, t).unwrap()) / (2.0 * h);
        worst_fd = worst_fd.max((fd - slope).abs() / slope);
        min_slope = min_slope.min(slope);
    }
    Ok((
        worst_var <= 1e-12 && worst_fd <= 1e-6 && min_slope > 0.0,
        format!("variance gap {worst_var:.2e}, finite-difference gap {worst_fd:.2e}, min slope {min_slope:.3e}"),
    ))
}

fn c9_innovations() -> Outcome {
    let model = two_atom(LevyExponent::Brownian, 0.0);
    let grid = TimeGrid::new(10.0, 1000).unwrap();
    let reports = innovations_suite(&model, &grid, 200, 9).map_err(|e| e.to_string())?;
    Ok(all_passed(&reports))
}

fn c10_equivalence() -> Outcome {
    let model = two_atom(LevyExponent::Brownian, 0.0);
    let mut reports = Vec::new();
    for (t, steps) in [(1.0, 100), (5.0, 500)] {
        let grid = TimeGrid::new(t, steps).unwrap();
        reports.push(construction_equivalence_test(&model, &grid, 10_000, 10).map_err(|e| e.to_string())?);
    }
    Ok(all_passed(&reports))
}

fn c11_reconstruction() -> Outcome {
    let model = two_atom(LevyExponent::Brownian, 0.0);
    let grid = TimeGrid::new(100.0, 1000).unwrap();
    let reports = vec![
        reconstruction_independence_test(&model, &grid, 10_000, 11).map_err(|e| e.to_string())?,
        reconstruction_distribution_test(&model, &grid, 10_000, 12).map_err(|e| e.to_string())?,
    ];
    Ok(all_passed(&reports))
}

fn c12_measure_change() -> Outcome {
    let model = two_atom(LevyExponent::Brownian, 0.0);
    // grid times 0.5, 1, 1.5, 2
    let grid = TimeGrid::new(2.0, 4).unwrap();
    let r = measure_change_test(&model, 100_000, &grid, 12, &[0.25, 0.5, 1.0]).map_err(|e| e.to_string())?;
    Ok(all_passed(&[r]))
}

fn c13_tilted_cf() -> Outcome {
    let grid = TimeGrid::new(1.0, 1).unwrap();
    let alphas: Vec<Complex64> = [0.25, 0.5, 1.0, 1.5, 2.0]
        .iter()
        .map(|&u| Complex64::new(0.0, u))
        .collect();
    let mut reports = Vec::new();
    for (i, phi) in families().into_iter().skip(1).enumerate() {
        let model = two_atom(phi, 0.0);
        reports.push(
            conditional_cf_test(&model, 0.3, &grid, 100_000, 130 + i as u64, &alphas).map_err(|e| e.to_string())?,
        );
    }
    Ok(all_passed(&reports))
}

fn c14_investment() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    let grid = TimeGrid::new(1.0, 1).unwrap();

    let model = two_atom(LevyExponent::Brownian, 0.03);
    let log = UtilitySpec {
        kind: UtilityKind::Log,
        endowment: 2.0,
    };
    let sol = optimal_payoff(&model, &log, 100_000, &grid, 140).map_err(|e| e.to_string())?;
    let exact = sol.kernels.iter().zip(&sol.payoffs).all(|(pi, h)| *h == 2.0 / pi);
    let budget_ok = sol
        .kernels
        .iter()
        .zip(&sol.payoffs)
        .all(|(pi, h)| approx_eq(pi * h, 2.0, 1e-12));
    ok &= exact && budget_ok;
    detail.push(format!(
        "log: H = H0/pi per path {exact}, pi H = H0 per path {budget_ok}"
    ));

    let (x, r, t, h0) = (0.3, 0.03, 1.0, 1.5);
    let point = MarketModel::new(
        100.0,
        r,
        0.2,
        LevyExponent::Brownian,
        PriorMeasure::point_mass(x).unwrap(),
    )
    .unwrap();
    for (i, gamma) in [0.5, 2.0, 5.0].into_iter().enumerate() {
        let u = UtilitySpec {
            kind: UtilityKind::Power { gamma },
            endowment: h0,
        };
        let sol = optimal_payoff(&point, &u, 100_000, &grid, 141 + i as u64).map_err(|e| e.to_string())?;
        let p = 1.0 - 1.0 / gamma;
        // ln pi_T ~ N(-rT - x^2 T / 2, x^2 T)
        let moment = (p * (-r * t - 0.5 * x * x * t) + 0.5 * p * p * x * x * t).exp();
        let beta_exact = (moment / h0).powf(gamma);
        let powered: Vec<f64> = sol.kernels.iter().map(|pi| pi.powf(p)).collect();
        let (m, se) = mean_and_se(&powered);
        let beta_se = gamma * sol.beta * se / m;
        let beta_z = (sol.beta - beta_exact) / beta_se;

        let fresh = terminal_samples(&point, &grid, t, 100_000, 900 + i as u64).map_err(|e| e.to_string())?;
        let spent: Vec<f64> = fresh
            .iter()
            .map(|(pi, _)| pi * u.inverse_marginal(sol.beta * pi))
            .collect();
        let (b, b_se) = mean_and_se(&spent);
        let budget_z = (b - h0) / b_se;
        ok &= beta_z.abs() <= MC_SIGMAS && budget_z.abs() <= MC_SIGMAS;
        detail.push(format!(
            "power gamma={gamma}: beta {:.6} vs {beta_exact:.6} ({beta_z:.2} SE), out-of-sample budget {budget_z:.2} SE",
            sol.beta
        ));
    }
    Ok((ok, detail.join("; ")))
}

fn c15_determinism() -> Outcome {
    let config = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/demo.json");
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_levyinfo"))
            .args([
                "verify",
                "--config",
                config.to_str().unwrap(),
                "--seed",
                "7",
                "--threads",
                threads,
            ])
            .output()
            .map_err(|e| e.to_string())
    };
    let a = run("1")?;
    let b = run("4")?;
    let same = a.stdout == b.stdout && !a.stdout.is_empty();
    Ok((
        same && a.status.code() == Some(0) && b.status.code() == Some(0),
        format!(
            "{} bytes, identical {same}, exit codes {:?}/{:?}",
            a.stdout.len(),
            a.status.code(),
            b.status.code()
        ),
    ))
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut record = |n, name, outcome: Outcome| {
        let line = match &outcome {
            Ok((true, d)) => format!("criterion {n:>2} PASS {name}: {d}"),
            Ok((false, d)) => format!("criterion {n:>2} FAIL {name}: {d}"),
            Err(e) => format!("criterion {n:>2} FAIL {name}: error {e}"),
        };
        println!("{line}");
        results.push((n, name, outcome));
    };

    record(1, "Black-Scholes reproduction", c1_black_scholes());
    record(2, "harmonic-mean aggregation", c2_harmonic_mean());
    match c3_c4_martingales() {
        Ok((m, b)) => {
            record(3, "martingale pi S", Ok(m));
            record(4, "bond identity", Ok(b));
        }
        Err(e) => {
            record(3, "martingale pi S", Err(e.clone()));
            record(4, "bond identity", Err(e));
        }
    }
    record(5, "excess-return surface", c5_excess_return());
    record(6, "Esscher involution", c6_involution());
    record(7, "revelation limit", c7_revelation());
    record(8, "lambda derivative", c8_lambda_derivative());
    record(9, "innovations", c9_innovations());
    record(10, "construction equivalence", c10_equivalence());
    record(11, "hidden-variable reconstruction", c11_reconstruction());
    record(12, "measure change", c12_measure_change());
    record(13, "tilted simulators", c13_tilted_cf());
    record(14, "optimal investment", c14_investment());
    record(15, "determinism", c15_determinism());

    let failed: Vec<u32> = results
        .iter()
        .filter(|(_, _, o)| !matches!(o, Ok((true, _))))
        .map(|(n, _, _)| *n)
        .collect();
    println!("acceptance: {}/{} passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
