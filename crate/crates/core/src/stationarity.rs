//! Stationary codebooks and posterior stationarity residuals.
//!
//! Setting `d(D1 + D2)/dx'(y) = 0` gives, with `P(y) = E[Pr(y|x)]`,
//!
//! ```text
//! n E[Pr(y|x) x] = P(y) x'(y) + (n-1) E[Pr(y|x) sum_y' Pr(y'|x) x'(y')]
//! ```
//!
//! which is linear in the codebook. The Newton method solves it exactly with
//! the `M x M` matrix `H = diag(P) + (n-1) C`, `C[y][y'] = E[Pr(y|x) Pr(y'|x)]`;
//! the Picard method iterates the equation in its natural form.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{Codebook, FiringModel, Geometry, InputDensity, Posterior};
use crate::objective::{dot, evaluate, format_float, ExpectationEngine, LocalTerms, NodeSet, ReportOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixedPointMethod {
    /// Full linear solve of the stationarity equation each iteration.
    Newton,
    /// `x'(y) <- x'(y) + damping * E[Pr(y|x)(d_y + (n-1) r)] / P(y)`.
    Picard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FixedPointConfig {
    pub max_iters: usize,
    /// Sup-norm of the per-iteration codebook update that counts as converged.
    pub tol: f64,
    pub damping: f64,
    pub method: FixedPointMethod,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            tol: 1e-10,
            damping: 1.0,
            method: FixedPointMethod::Newton,
        }
    }
}

impl FixedPointConfig {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(invalid("tol", "must be positive"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(invalid("damping", "must lie in (0, 1]"));
        }
        if self.max_iters == 0 {
            return Err(invalid("max_iters", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub sup_change: f64,
}

#[derive(Debug, Clone)]
pub struct FixedPointSolution {
    pub codebook: Codebook,
    pub iterations: usize,
    pub final_change: f64,
    /// Neurons that never fire; their vectors stay at the initial value.
    pub dead_units: Vec<usize>,
    pub trace: Vec<TraceRow>,
}

pub const TRACE_CSV_HEADER: &str = "iteration,sup_change";

pub fn trace_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from(TRACE_CSV_HEADER);
    out.push('\n');
    for row in trace {
        let _ = writeln!(out, "{},{}", row.iteration, format_float(row.sup_change));
    }
    out
}

/// Firing masses `P(y)` and conditional means `E[x|y]`.
///
/// On the ring the mean is taken on the circle, so cells straddling the seam
/// are handled. Neurons with zero mass get the density mean.
pub fn conditional_means(density: &InputDensity, posterior: &Posterior, nodes: &NodeSet) -> (Codebook, Vec<f64>) {
    let m = posterior.m();
    let dim = density.dim();
    let mut mass = vec![0.0; m];
    let mut support = Vec::new();
    match density.geometry() {
        Geometry::Euclidean => {
            let mut sums = vec![vec![0.0; dim]; m];
            for (x, w) in nodes.iter() {
                posterior.support_into(x, &mut support);
                for &(y, p) in &support {
                    mass[y] += w * p;
                    for (s, xi) in sums[y].iter_mut().zip(x) {
                        *s += w * p * xi;
                    }
                }
            }
            let fallback = density.mean();
            let vectors = sums
                .into_iter()
                .zip(&mass)
                .map(|(s, &mk)| {
                    if mk > 0.0 {
                        s.into_iter().map(|v| v / mk).collect()
                    } else {
                        fallback.clone()
                    }
                })
                .collect();
            (Codebook::new_unchecked(vectors), mass)
        }
        Geometry::Ring { length } => {
            let mut sums = vec![[0.0f64; 2]; m];
            for (x, w) in nodes.iter() {
                posterior.support_into(x, &mut support);
                let (s, c) = (2.0 * PI * x[0] / length).sin_cos();
                for &(y, p) in &support {
                    mass[y] += w * p;
                    sums[y][0] += w * p * c;
                    sums[y][1] += w * p * s;
                }
            }
            let vectors = sums
                .iter()
                .zip(&mass)
                .map(|(sc, &mk)| {
                    if mk > 0.0 {
                        vec![(sc[1].atan2(sc[0]) * length / (2.0 * PI)).rem_euclid(length)]
                    } else {
                        density.mean()
                    }
                })
                .collect();
            (Codebook::new_unchecked(vectors), mass)
        }
    }
}

/// Solves the codebook stationarity condition for a fixed posterior, starting
/// from the conditional means (the `n = 1` solution).
pub fn solve_codebook_fixed_point(
    density: &InputDensity,
    posterior: &Posterior,
    firing: FiringModel,
    engine: &ExpectationEngine,
    cfg: &FixedPointConfig,
) -> Result<FixedPointSolution> {
    posterior.check_compatible(density)?;
    let nodes = engine.nodes(density, Some(posterior))?;
    let (init, _) = conditional_means(density, posterior, &nodes);
    iterate(density, posterior, firing, &nodes, cfg, init)
}

/// As [`solve_codebook_fixed_point`] from a caller-supplied codebook.
pub fn solve_codebook_fixed_point_from(
    density: &InputDensity,
    posterior: &Posterior,
    firing: FiringModel,
    engine: &ExpectationEngine,
    cfg: &FixedPointConfig,
    init: Codebook,
) -> Result<FixedPointSolution> {
    posterior.check_compatible(density)?;
    init.check_dim(density.dim())?;
    if init.m() != posterior.m() {
        return Err(Error::DimensionMismatch {
            expected: posterior.m(),
            got: init.m(),
        });
    }
    let nodes = engine.nodes(density, Some(posterior))?;
    iterate(density, posterior, firing, &nodes, cfg, init)
}

struct Accumulated {
    mass: Vec<f64>,
    /// `E[Pr(y|x)(d_y + (n-1) r)]`, the negative gradient up to `4/n`.
    drift: Vec<Vec<f64>>,
    /// `E[Pr(y|x) Pr(y'|x)]`, only when `n > 1` and requested.
    gram: Option<DMatrix<f64>>,
}

fn accumulate(
    density: &InputDensity,
    posterior: &Posterior,
    firing: FiringModel,
    nodes: &NodeSet,
    codebook: &Codebook,
    want_gram: bool,
) -> Result<Accumulated> {
    let m = codebook.m();
    let dim = density.dim();
    let coupling = firing.n() as f64 - 1.0;
    let mut mass = vec![0.0; m];
    let mut drift = vec![vec![0.0; dim]; m];
    let mut gram = (want_gram && firing.n() > 1).then(|| DMatrix::<f64>::zeros(m, m));
    let mut local = LocalTerms::new(dim);
    for (x, w) in nodes.iter() {
        local.fill(density, codebook, posterior, x)?;
        for (i, &(y, p)) in local.support.iter().enumerate() {
            mass[y] += w * p;
            let d = local.disp(i);
            for ((g, di), ri) in drift[y].iter_mut().zip(d).zip(&local.residual) {
                *g += w * p * (di + coupling * ri);
            }
        }
        if let Some(g) = gram.as_mut() {
            for &(a, pa) in &local.support {
                for &(b, pb) in &local.support {
                    g[(a, b)] += w * pa * pb;
                }
            }
        }
    }
    Ok(Accumulated { mass, drift, gram })
}

fn iterate(
    density: &InputDensity,
    posterior: &Posterior,
    firing: FiringModel,
    nodes: &NodeSet,
    cfg: &FixedPointConfig,
    mut codebook: Codebook,
) -> Result<FixedPointSolution> {
    cfg.validate()?;
    if !firing.is_independent() {
        return Err(Error::CorrelatedFiring);
    }
    let geometry = density.geometry();
    let dim = density.dim();
    let m = codebook.m();
    let coupling = firing.n() as f64 - 1.0;
    let mut trace = Vec::new();
    let mut damping = cfg.damping;
    let mut prev_change = f64::INFINITY;
    let mut growth_streak = 0;

    for iteration in 1..=cfg.max_iters {
        let acc = accumulate(density, posterior, firing, nodes, &codebook, cfg.method == FixedPointMethod::Newton)?;
        let mass_floor = 1e-300;
        let dead_units: Vec<usize> = (0..m).filter(|&y| acc.mass[y] <= mass_floor).collect();
        let live: Vec<usize> = (0..m).filter(|&y| acc.mass[y] > mass_floor).collect();
        let mut steps = vec![vec![0.0; dim]; m];

        match cfg.method {
            FixedPointMethod::Picard => {
                for &y in &live {
                    for (s, g) in steps[y].iter_mut().zip(&acc.drift[y]) {
                        *s = damping * g / acc.mass[y];
                    }
                }
            }
            FixedPointMethod::Newton => {
                let k = live.len();
                let mut h = DMatrix::<f64>::zeros(k, k);
                for (i, &a) in live.iter().enumerate() {
                    h[(i, i)] = acc.mass[a];
                    if let Some(g) = &acc.gram {
                        for (j, &b) in live.iter().enumerate() {
                            h[(i, j)] += coupling * g[(a, b)];
                        }
                    }
                }
                let mut rhs = DMatrix::<f64>::zeros(k, dim);
                for (i, &a) in live.iter().enumerate() {
                    for c in 0..dim {
                        rhs[(i, c)] = acc.drift[a][c];
                    }
                }
                let sol = match h.clone().cholesky() {
                    Some(ch) => ch.solve(&rhs),
                    None => h
                        .lu()
                        .solve(&rhs)
                        .ok_or_else(|| Error::Unsupported("singular stationarity system".into()))?,
                };
                for (i, &a) in live.iter().enumerate() {
                    for c in 0..dim {
                        steps[a][c] = damping * sol[(i, c)];
                    }
                }
            }
        }

        let change = steps.iter().flatten().fold(0.0f64, |acc, s| acc.max(s.abs()));
        if !change.is_finite() {
            return Err(Error::NotConverged {
                iters: iteration,
                residual: change,
            });
        }
        for &y in &live {
            geometry.translate(codebook.vector_mut(y), &steps[y]);
        }
        trace.push(TraceRow {
            iteration,
            sup_change: change,
        });
        if change < cfg.tol {
            return Ok(FixedPointSolution {
                codebook,
                iterations: iteration,
                final_change: change,
                dead_units,
                trace,
            });
        }
        // halve the damping when the updates keep growing
        if change > prev_change {
            growth_streak += 1;
            if growth_streak >= 2 {
                damping *= 0.5;
                growth_streak = 0;
            }
        } else {
            growth_streak = 0;
        }
        prev_change = change;
    }
    Err(Error::NotConverged {
        iters: cfg.max_iters,
        residual: prev_change,
    })
}

/// Residual of the posterior stationarity condition at probe point `x`:
///
/// ```text
/// Pr(x) Pr(y|x) sum_y' (Pr(y'|x) - [y = y']) x'(y') . (x'(y')/2 - n x + (n-1) sum_y'' Pr(y''|x) x'(y''))
/// ```
///
/// Evaluated in coordinates centred on `x`; the bracket is translation
/// invariant because the weights `Pr(y'|x) - [y = y']` sum to zero.
pub fn posterior_stationarity_residual(
    density: &InputDensity,
    codebook: &Codebook,
    posterior: &Posterior,
    firing: FiringModel,
    x: &[f64],
) -> Result<Vec<f64>> {
    density.check_dim(x.len())?;
    posterior.check_compatible(density)?;
    codebook.check_dim(density.dim())?;
    if codebook.m() != posterior.m() {
        return Err(Error::DimensionMismatch {
            expected: posterior.m(),
            got: codebook.m(),
        });
    }
    let px = density.density_at(x)?;
    if px <= 0.0 {
        return Err(Error::ZeroDensity);
    }
    let mut local = LocalTerms::new(density.dim());
    local.fill(density, codebook, posterior, x)?;
    let coupling = firing.n() as f64 - 1.0;
    // u = x' - x = -d, mean offset = -r
    let mut term = Vec::with_capacity(local.support.len());
    let mut weighted = 0.0;
    for (i, &(_, p)) in local.support.iter().enumerate() {
        let d = local.disp(i);
        let mut inner = 0.0;
        for (di, ri) in d.iter().zip(&local.residual) {
            inner += (-di) * (-di / 2.0 - coupling * ri);
        }
        term.push(inner);
        weighted += p * inner;
    }
    let mut residual = vec![0.0; codebook.m()];
    for (i, &(y, p)) in local.support.iter().enumerate() {
        residual[y] = px * p * (weighted - term[i]);
    }
    Ok(residual)
}

/// Golden-section search over the trapezoid ramp half-width `s in [0, 1/2]`
/// for the ring code with `x'(y) = y`. Returns `(s*, D1 + D2 per unit length)`.
pub fn optimize_trapezoid_s(
    density: &InputDensity,
    firing: FiringModel,
    engine: &ExpectationEngine,
    tol: f64,
) -> Result<(f64, f64)> {
    let neurons = match density {
        InputDensity::UniformRing1D { length, .. } if length.fract() == 0.0 && *length >= 2.0 => *length as usize,
        InputDensity::UniformRing1D { .. } => {
            return Err(invalid("length", "ring must hold an integer number (>= 2) of unit cells"))
        }
        _ => return Err(Error::Unsupported("trapezoid search runs on the ring density".into())),
    };
    if !(tol > 0.0) {
        return Err(invalid("tol", "must be positive"));
    }
    let codebook = Codebook::integer_grid(neurons);
    let cost = |s: f64| -> Result<f64> {
        let posterior = Posterior::trapezoid(s, neurons)?;
        Ok(evaluate(density, &codebook, &posterior, firing, engine, ReportOptions::default())?.bound)
    };
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0f64, 0.5f64);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = cost(c)?;
    let mut fd = cost(d)?;
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = cost(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = cost(d)?;
        }
    }
    let mid = 0.5 * (a + b);
    let mut best = (mid, cost(mid)?);
    for s in [0.0, 0.5] {
        let v = cost(s)?;
        if v < best.1 {
            best = (s, v);
        }
    }
    Ok(best)
}

/// Largest gradient norm over the codebook, `max_y |d(D1 + D2)/dx'(y)|`.
pub fn max_gradient_norm(grad: &[Vec<f64>]) -> f64 {
    grad.iter().map(|g| dot(g, g).sqrt()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests;
