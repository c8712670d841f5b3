//! The a priori law of the risk-aversion factor as a finite set of weighted atoms.
//!
//! Continuous densities are discretized once, at construction, by Gauss-Legendre
//! quadrature on a compact subinterval of `(0, inf)`. Every integral against
//! the prior downstream is then a finite sum over atoms.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// Weights below this after renormalization are dropped.
pub const WEIGHT_FLOOR: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Atom {
    pub x: f64,
    pub w: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Provenance {
    UserAtoms,
    QuadratureOfDensity { node_count: usize, support: (f64, f64) },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PriorMeasure {
    atoms: Vec<Atom>,
    provenance: Provenance,
    dropped: usize,
}

impl PriorMeasure {
    /// Builds a prior from `(x, w)` pairs. Weights are renormalized and atoms sorted.
    pub fn discrete(atoms: &[(f64, f64)]) -> Result<Self> {
        ensure!(!atoms.is_empty(), InvalidPrior, "no atoms given");
        for &(x, w) in atoms {
            ensure!(
                x.is_finite() && x > 0.0,
                InvalidPrior,
                "atom location {x} must be positive"
            );
            ensure!(
                w.is_finite() && w > 0.0,
                InvalidPrior,
                "atom weight {w} must be positive"
            );
        }
        let atoms = atoms.iter().map(|&(x, w)| Atom { x, w }).collect();
        Self::from_atoms(atoms, Provenance::UserAtoms)
    }

    /// Discretizes `density` on `[a, b]` with an `n`-node Gauss-Legendre rule.
    pub fn discretize_density<F>(density: F, support: (f64, f64), n: usize) -> Result<Self>
    where
        F: Fn(f64) -> f64,
    {
        let (a, b) = support;
        ensure!(
            a.is_finite() && b.is_finite() && 0.0 < a && a < b,
            InvalidPrior,
            "support ({a}, {b}) must satisfy 0 < a < b"
        );
        ensure!(n >= 2, InvalidPrior, "need at least 2 quadrature nodes, got {n}");
        let (nodes, weights) = gauss_legendre(n);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut atoms = Vec::with_capacity(n);
        for (z, qw) in nodes.iter().zip(&weights) {
            let x = mid + half * z;
            let d = density(x);
            ensure!(
                d.is_finite() && d >= 0.0,
                InvalidPrior,
                "density must be finite and nonnegative, got {d} at {x}"
            );
            if d > 0.0 {
                atoms.push(Atom { x, w: d * qw * half });
            }
        }
        ensure!(
            !atoms.is_empty(),
            InvalidPrior,
            "density integrates to zero on ({a}, {b})"
        );
        Self::from_atoms(atoms, Provenance::QuadratureOfDensity { node_count: n, support })
    }

    fn from_atoms(mut atoms: Vec<Atom>, provenance: Provenance) -> Result<Self> {
        atoms.sort_by(|p, q| p.x.total_cmp(&q.x));
        if let Some(pair) = atoms.windows(2).find(|p| p[0].x == p[1].x) {
            return Err(Error::InvalidPrior(format!("duplicate atom at {}", pair[0].x)));
        }
        let mut dropped = 0;
        loop {
            let total: f64 = atoms.iter().map(|a| a.w).sum();
            ensure!(total.is_finite() && total > 0.0, InvalidPrior, "total weight {total}");
            atoms.iter_mut().for_each(|a| a.w /= total);
            let before = atoms.len();
            atoms.retain(|a| a.w >= WEIGHT_FLOOR);
            if atoms.len() == before {
                break;
            }
            dropped += before - atoms.len();
        }
        Ok(PriorMeasure {
            atoms,
            provenance,
            dropped,
        })
    }

    /// Single atom at `x`.
    pub fn point_mass(x: f64) -> Result<Self> {
        Self::discrete(&[(x, 1.0)])
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Number of atoms discarded for underflowing weights.
    pub fn dropped_atoms(&self) -> usize {
        self.dropped
    }

    pub fn moment(&self, k: u32) -> f64 {
        self.atoms.iter().map(|a| a.w * a.x.powi(k as i32)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.atoms.iter().map(|a| a.w * (a.x - mean).powi(2)).sum()
    }

    pub fn min_x(&self) -> f64 {
        self.atoms[0].x
    }

    pub fn max_x(&self) -> f64 {
        self.atoms[self.atoms.len() - 1].x
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.atoms.iter().take_while(|a| a.x <= x).map(|a| a.w).sum()
    }

    /// Inverse-CDF draw from a uniform `u` in `[0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let mut acc = 0.0;
        for a in &self.atoms {
            acc += a.w;
            if u < acc {
                return a.x;
            }
        }
        self.max_x()
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess for the (i+1)-th largest root
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let step = p / d;
            z -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Named densities available from configuration files.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NamedDensity {
    Uniform,
    TruncatedExponential,
    TruncatedLognormal,
}

/// Serialized prior: `{"atoms":[[0.1,0.5],[0.3,0.5]]}` or
/// `{"density":"uniform","support":[0.1,0.3],"nodes":64}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, try_from = "RawPriorSpec")]
pub enum PriorSpec {
    Atoms {
        atoms: Vec<[f64; 2]>,
    },
    Density {
        density: NamedDensity,
        support: [f64; 2],
        nodes: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rate: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mu: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<f64>,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPriorSpec {
    atoms: Option<Vec<[f64; 2]>>,
    density: Option<NamedDensity>,
    support: Option<[f64; 2]>,
    nodes: Option<usize>,
    rate: Option<f64>,
    mu: Option<f64>,
    sigma: Option<f64>,
}

impl TryFrom<RawPriorSpec> for PriorSpec {
    type Error = String;

    fn try_from(raw: RawPriorSpec) -> Result<Self, String> {
        match (raw.atoms, raw.density) {
            (Some(atoms), None) => {
                let extra = [
                    ("support", raw.support.is_some()),
                    ("nodes", raw.nodes.is_some()),
                    ("rate", raw.rate.is_some()),
                    ("mu", raw.mu.is_some()),
                    ("sigma", raw.sigma.is_some()),
                ];
                if let Some((k, _)) = extra.iter().find(|(_, set)| *set) {
                    return Err(format!("`{k}` does not apply to an atom list"));
                }
                Ok(PriorSpec::Atoms { atoms })
            }
            (None, Some(density)) => Ok(PriorSpec::Density {
                density,
                support: raw.support.ok_or("density prior needs `support`")?,
                nodes: raw.nodes.ok_or("density prior needs `nodes`")?,
                rate: raw.rate,
                mu: raw.mu,
                sigma: raw.sigma,
            }),
            (Some(_), Some(_)) => Err("give either `atoms` or `density`, not both".into()),
            (None, None) => Err("prior needs `atoms` or `density`".into()),
        }
    }
}

impl PriorSpec {
    pub fn build(&self) -> Result<PriorMeasure> {
        match self {
            PriorSpec::Atoms { atoms } => {
                let pairs: Vec<(f64, f64)> = atoms.iter().map(|p| (p[0], p[1])).collect();
                PriorMeasure::discrete(&pairs)
            }
            PriorSpec::Density {
                density,
                support,
                nodes,
                rate,
                mu,
                sigma,
            } => {
                let support = (support[0], support[1]);
                match density {
                    NamedDensity::Uniform => PriorMeasure::discretize_density(|_| 1.0, support, *nodes),
                    NamedDensity::TruncatedExponential => {
                        let rate =
                            rate.ok_or_else(|| Error::InvalidPrior("truncated-exponential needs `rate`".into()))?;
                        ensure!(rate > 0.0, InvalidPrior, "rate must be positive, got {rate}");
                        PriorMeasure::discretize_density(|x| (-rate * x).exp(), support, *nodes)
                    }
                    NamedDensity::TruncatedLognormal => {
                        let (mu, sigma) = mu
                            .zip(*sigma)
                            .ok_or_else(|| Error::InvalidPrior("truncated-lognormal needs `mu` and `sigma`".into()))?;
                        ensure!(sigma > 0.0, InvalidPrior, "sigma must be positive, got {sigma}");
                        PriorMeasure::discretize_density(
                            |x| {
                                let z = (x.ln() - mu) / sigma;
                                (-0.5 * z * z).exp() / x
                            },
                            support,
                            *nodes,
                        )
                    }
                }
            }
        }
    }
}

impl From<&PriorMeasure> for PriorSpec {
    fn from(p: &PriorMeasure) -> Self {
        PriorSpec::Atoms {
            atoms: p.atoms.iter().map(|a| [a.x, a.w]).collect(),
        }
    }
}
