use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const DEMO: &str = r#"{
  "model": {
    "s0": 100, "r": 0.0, "sigma": 0.2,
    "phi": {"family": "brownian"},
    "prior": {"atoms": [[0.1, 0.5], [0.3, 0.5]]}
  },
  "grid": {"horizon": 1.0, "steps": 20},
  "seed": 42,
  "paths": 10,
  "claim": {"kind": "call", "strike": 100, "maturity": 1.0},
  "utility": {"kind": "log", "endowment": 2.0}
}"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_levyinfo"))
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("m.json");
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn posterior_demo_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), DEMO);
    let o = run(&[
        "posterior",
        "--config",
        cfg.to_str().unwrap(),
        "--xi",
        "1.0",
        "--t",
        "1.0",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(text.lines().next(), Some("x,weight"));
    assert_eq!(rows.len(), 2);
    assert!((rows[0][1] - 0.4600851154444343).abs() < 1e-12);
    assert!((rows[1][1] - 0.5399148845555657).abs() < 1e-12);
}

#[test]
fn posterior_from_price_matches_xi() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), DEMO);
    // S = 100 exp(0.2 * 1 - 0.02) at xi = 1, t = 1
    let s = 100.0 * (0.2f64 - 0.02).exp();
    let a = run(&["posterior", "--config", cfg.to_str().unwrap(), "--xi", "1", "--t", "1"]);
    let b = run(&[
        "posterior",
        "--config",
        cfg.to_str().unwrap(),
        "--price",
        &s.to_string(),
        "--t",
        "1",
    ]);
    let parse = |o: &Output| -> Vec<f64> {
        stdout(o)
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect()
    };
    let (pa, pb) = (parse(&a), parse(&b));
    for (x, y) in pa.iter().zip(&pb) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn simulate_long_and_per_path_layouts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), DEMO);
    let out = dir.path().join("paths.csv");
    let o = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "42",
        "--paths",
        "10",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,xi,s,pi,lambda,w,b,x_true,path_id"));
    assert_eq!(lines.count(), 10 * 21);

    let o = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--paths",
        "3",
        "--layout",
        "per-path",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    for i in 0..3 {
        let text = std::fs::read_to_string(dir.path().join(format!("paths_{i}.csv"))).unwrap();
        let first: Vec<&str> = text.lines().take(2).collect();
        assert_eq!(first[0], "t,xi,s,pi,lambda,w,b,x_true");
        assert_eq!(first[1].split(',').count(), 8);
    }
    // per-path files hold the same rows as the long layout
    let long: Vec<String> = text.lines().skip(1).take(2 * 21).map(str::to_string).collect();
    let p1 = std::fs::read_to_string(dir.path().join("paths_1.csv")).unwrap();
    for (row, long_row) in p1.lines().skip(1).zip(&long[21..]) {
        assert_eq!(format!("{row},1"), *long_row);
    }
}

#[test]
fn simulate_is_reproducible_with_17_digit_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), DEMO);
    let a = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--paths",
        "4",
        "--construction",
        "sde",
    ]);
    let b = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--paths",
        "4",
        "--construction",
        "sde",
        "--threads",
        "1",
    ]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    let row = text.lines().nth(2).unwrap();
    let xi = row.split(',').nth(1).unwrap();
    let mantissa = xi.trim_start_matches('-').split('e').next().unwrap();
    assert_eq!(mantissa.replace('.', "").len(), 17);
}

#[test]
fn validation_errors_exit_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let bad = DEMO.replace("\"sigma\": 0.2,", "\"sigma\": 0.2, \"volatility\": 0.3,");
    let cfg = write_config(dir.path(), &bad);
    let o = run(&["price", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("m.json:3:") && err.contains("volatility"), "{err}");

    let cfg = write_config(dir.path(), &DEMO.replace("\"seed\": 42,", ""));
    let o = run(&["price", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--seed"));

    let cfg = write_config(dir.path(), &DEMO.replace("[0.1, 0.5]", "[-0.1, 0.5]"));
    let o = run(&["posterior", "--config", cfg.to_str().unwrap(), "--xi", "1", "--t", "1"]);
    assert_eq!(o.status.code(), Some(2));

    let cfg = write_config(dir.path(), DEMO);
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--threads", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn threads_fall_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), DEMO);
    let a = bin()
        .args(["price", "--config", cfg.to_str().unwrap(), "--paths", "500"])
        .env("LEVYINFO_THREADS", "1")
        .output()
        .unwrap();
    let b = bin()
        .args(["price", "--config", cfg.to_str().unwrap(), "--paths", "500"])
        .env("LEVYINFO_THREADS", "3")
        .output()
        .unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let bad = bin()
        .args(["price", "--config", cfg.to_str().unwrap()])
        .env("LEVYINFO_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn price_and_invest_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), DEMO);
    let o = run(&[
        "price",
        "--config",
        cfg.to_str().unwrap(),
        "--paths",
        "1000",
        "--strike",
        "90",
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["n_paths"], 1000);
    assert!(v["price"].as_f64().unwrap() > 10.0);
    assert!(v["std_error"].as_f64().unwrap() > 0.0);

    let o = run(&["invest", "--config", cfg.to_str().unwrap(), "--paths", "1000"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["beta"], 0.5);
    let budget = v["budget"]["price"].as_f64().unwrap();
    assert!((budget - 2.0).abs() < 1e-12);
}

#[test]
fn estimate_mpr_on_simulated_prices() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), DEMO);
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--paths", "1"]);
    let series: String = std::iter::once("t,s".to_string())
        .chain(stdout(&o).lines().skip(1).map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            format!("{},{}", f[0], f[2])
        }))
        .collect::<Vec<_>>()
        .join("\n");
    let prices = dir.path().join("prices.csv");
    std::fs::write(&prices, series).unwrap();
    let o = run(&[
        "estimate-mpr",
        "--config",
        cfg.to_str().unwrap(),
        "--prices",
        prices.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let sim = stdout(&run(&["simulate", "--config", cfg.to_str().unwrap(), "--paths", "1"]));
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("t,s,xi,lambda,dlambda,excess_return"));
    for (est, path) in text.lines().skip(1).zip(sim.lines().skip(1)) {
        let e: Vec<f64> = est.split(',').map(|v| v.parse().unwrap()).collect();
        let p: Vec<f64> = path.split(',').take(5).map(|v| v.parse().unwrap()).collect();
        assert!((e[2] - p[1]).abs() < 1e-9, "xi {} vs {}", e[2], p[1]);
        assert!((e[3] - p[4]).abs() < 1e-9, "lambda {} vs {}", e[3], p[4]);
        // Brownian information: excess return is sigma * lambda
        assert!((e[5] - 0.2 * e[3]).abs() < 1e-12);
        assert!(e[4] > 0.0);
    }
}

#[test]
fn help_documents_schemas() {
    let o = run(&["--help"]);
    let text = stdout(&o);
    assert!(text.contains("\"prior\"") && text.contains("EXIT STATUS"));
    let o = run(&["simulate", "--help"]);
    assert!(stdout(&o).contains("t,xi,s,pi,lambda,w,b,x_true"));
    let o = run(&["verify", "--help"]);
    assert!(stdout(&o).contains("\"passed\""));
}
