//! Expectation engine: turns `E_x[f(x)]` into a weighted sum over nodes.
//!
//! Quadrature places Gauss-Legendre panels between the posterior's
//! breakpoints so each panel sees a smooth integrand. Monte-Carlo draws a
//! seeded sample. Enumeration sums an empirical set exactly.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{InputDensity, Posterior};

pub const DEFAULT_NODES_PER_PANEL: usize = 64;
pub const DEFAULT_MAX_PANEL_WIDTH: f64 = PI / 4.0;
pub const DEFAULT_MC_SAMPLES: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ExpectationEngine {
    /// Composite Gauss-Legendre; ring and torus densities only.
    Quadrature {
        nodes_per_panel: usize,
        max_panel_width: f64,
    },
    MonteCarlo { samples: usize, seed: u64 },
    /// Exact average over the atoms of an empirical density.
    Enumerate,
}

impl ExpectationEngine {
    pub fn quadrature() -> Self {
        ExpectationEngine::Quadrature {
            nodes_per_panel: DEFAULT_NODES_PER_PANEL,
            max_panel_width: DEFAULT_MAX_PANEL_WIDTH,
        }
    }

    pub fn monte_carlo(seed: u64) -> Self {
        ExpectationEngine::MonteCarlo {
            samples: DEFAULT_MC_SAMPLES,
            seed,
        }
    }

    pub fn estimator(&self) -> Estimator {
        match self {
            ExpectationEngine::Quadrature { .. } => Estimator::Quadrature,
            ExpectationEngine::MonteCarlo { .. } => Estimator::MonteCarlo,
            ExpectationEngine::Enumerate => Estimator::Enumeration,
        }
    }

    /// Nodes for `density`, with quadrature panels split at `posterior`'s breakpoints.
    pub fn nodes(&self, density: &InputDensity, posterior: Option<&Posterior>) -> Result<NodeSet> {
        let breaks = posterior.map(|p| p.breakpoints(density)).unwrap_or_default();
        self.nodes_with_breaks(density, &breaks)
    }

    pub fn nodes_with_breaks(&self, density: &InputDensity, breaks: &[Vec<f64>]) -> Result<NodeSet> {
        let axis_breaks = |i: usize| breaks.get(i).map(Vec::as_slice).unwrap_or(&[]);
        match *self {
            ExpectationEngine::Quadrature {
                nodes_per_panel,
                max_panel_width,
            } => {
                if nodes_per_panel == 0 || !(max_panel_width > 0.0) {
                    return Err(invalid("engine", "quadrature needs positive node count and panel width"));
                }
                let rule = GaussLegendre::new(nodes_per_panel);
                match density {
                    InputDensity::UniformRing1D { p0, length } => {
                        let axis = periodic_axis(&rule, *length, axis_breaks(0), max_panel_width);
                        let scale = p0 / length;
                        let (coords, weights) = axis.into_iter().map(|(x, w)| (x, w * scale)).unzip();
                        Ok(NodeSet::new(1, coords, weights, Estimator::Quadrature))
                    }
                    InputDensity::Torus2 => {
                        let a = periodic_axis(&rule, 2.0 * PI, axis_breaks(0), max_panel_width);
                        let b = periodic_axis(&rule, 2.0 * PI, axis_breaks(1), max_panel_width);
                        let b_embedded: Vec<_> = b.iter().map(|&(t, w)| (t.sin_cos(), w)).collect();
                        let norm = 1.0 / (4.0 * PI * PI);
                        let mut coords = Vec::with_capacity(4 * a.len() * b.len());
                        let mut weights = Vec::with_capacity(a.len() * b.len());
                        for &(ta, wa) in &a {
                            let (sa, ca) = ta.sin_cos();
                            for &((sb, cb), wb) in &b_embedded {
                                coords.extend_from_slice(&[ca, sa, cb, sb]);
                                weights.push(wa * wb * norm);
                            }
                        }
                        Ok(NodeSet::new(4, coords, weights, Estimator::Quadrature))
                    }
                    InputDensity::Empirical { .. } => Err(Error::EngineUnavailable {
                        engine: "quadrature",
                        density: density.name(),
                    }),
                }
            }
            ExpectationEngine::MonteCarlo { samples, seed } => {
                if samples == 0 {
                    return Err(invalid("samples", "must be at least 1"));
                }
                let mass = match density {
                    InputDensity::UniformRing1D { p0, .. } => *p0,
                    _ => 1.0,
                };
                let dim = density.dim();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut coords = Vec::with_capacity(dim * samples);
                for _ in 0..samples {
                    coords.extend(density.draw(&mut rng)?);
                }
                let weights = vec![mass / samples as f64; samples];
                Ok(NodeSet::new(dim, coords, weights, Estimator::MonteCarlo))
            }
            ExpectationEngine::Enumerate => match density {
                InputDensity::Empirical { samples } => {
                    if samples.is_empty() {
                        return Err(Error::EmptyDensity);
                    }
                    let w = 1.0 / samples.len() as f64;
                    let coords = samples.iter().flatten().copied().collect();
                    Ok(NodeSet::new(density.dim(), coords, vec![w; samples.len()], Estimator::Enumeration))
                }
                _ => Err(Error::EngineUnavailable {
                    engine: "enumeration",
                    density: density.name(),
                }),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    Quadrature,
    MonteCarlo,
    Enumeration,
}

impl Estimator {
    pub fn as_str(&self) -> &'static str {
        match self {
            Estimator::Quadrature => "quadrature",
            Estimator::MonteCarlo => "monte-carlo",
            Estimator::Enumeration => "enumeration",
        }
    }
}

/// Weighted nodes `(x_k, w_k)` with `E[f] ~ sum_k w_k f(x_k)`.
#[derive(Debug, Clone)]
pub struct NodeSet {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
    estimator: Estimator,
}

impl NodeSet {
    fn new(dim: usize, coords: Vec<f64>, weights: Vec<f64>, estimator: Estimator) -> Self {
        debug_assert_eq!(coords.len(), dim * weights.len());
        Self {
            dim,
            coords,
            weights,
            estimator,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn estimator(&self) -> Estimator {
        self.estimator
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.coords.chunks_exact(self.dim).zip(self.weights.iter().copied())
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Standard error of `sum_k w_k f_k` for Monte-Carlo node sets, from the
    /// sample variance of `f`. `None` for deterministic rules.
    pub fn standard_error(&self, values: &[f64]) -> Option<f64> {
        if self.estimator != Estimator::MonteCarlo || values.len() < 2 {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        Some(self.total_weight() * (var / n).sqrt())
    }
}

/// Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        let mut nodes = vec![0.0; order];
        let mut weights = vec![0.0; order];
        let n = order as f64;
        for i in 0..order.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (n + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(order, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(order, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[order - 1 - i] = x;
            weights[i] = w;
            weights[order - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| w * f(mid + half * t))
            .sum::<f64>()
            * half
    }
}

fn legendre_with_derivative(order: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if order == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=order {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = order as f64;
    (p1, n * (x * p1 - p0) / (x * x - 1.0))
}

/// Composite rule on the circle `[0, period)` with panel edges at `breaks`.
fn periodic_axis(rule: &GaussLegendre, period: f64, breaks: &[f64], max_width: f64) -> Vec<(f64, f64)> {
    let mut edges: Vec<f64> = breaks.iter().map(|b| b.rem_euclid(period)).collect();
    edges.sort_by(f64::total_cmp);
    edges.dedup_by(|a, b| (*a - *b).abs() < 1e-14 * period);
    if edges.len() > 1 && (edges[0] + period - edges[edges.len() - 1]).abs() < 1e-14 * period {
        edges.pop();
    }
    if edges.is_empty() {
        edges.push(0.0);
    }
    let mut out = Vec::new();
    let k = edges.len();
    for i in 0..k {
        let a = edges[i];
        let b = if i + 1 < k { edges[i + 1] } else { edges[0] + period };
        let width = b - a;
        let pieces = (width / max_width).ceil().max(1.0) as usize;
        let h = width / pieces as f64;
        for j in 0..pieces {
            let lo = a + j as f64 * h;
            let half = 0.5 * h;
            let mid = lo + half;
            for (t, w) in rule.nodes.iter().zip(&rule.weights) {
                out.push(((mid + half * t).rem_euclid(period), w * half));
            }
        }
    }
    out
}
