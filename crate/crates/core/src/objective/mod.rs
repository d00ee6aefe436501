//! Coding-cost objective for `n` firing events.
//!
//! With `d_y = x - x'(y)` and `r = sum_y Pr(y|x) d_y` (the residual of the
//! probability-weighted mean reconstruction):
//!
//! * `D1 = (2/n) E[sum_y Pr(y|x) |d_y|^2]`
//! * `D2 = (2(n-1)/n) E[|r|^2]` for independent events
//! * `D_VQ <= D1 + D2`, with equality at `n = 1`.
//!
//! Working with displacements instead of raw codevectors keeps every
//! formula valid on the periodic ring.

mod engine;
mod enumerate;
mod gradient;
mod report;

pub use engine::{
    Estimator, ExpectationEngine, GaussLegendre, NodeSet, DEFAULT_MAX_PANEL_WIDTH, DEFAULT_MC_SAMPLES,
    DEFAULT_NODES_PER_PANEL,
};
pub use enumerate::{eval_dvq_bruteforce, FiringVector, Reconstruction, ENUMERATION_BUDGET};
pub use gradient::{grad_codebook, grad_logits};
pub use report::{evaluate, format_float, ObjectiveReport, ReportOptions, CSV_HEADER};

use crate::error::{Error, Result};
use crate::model::{Codebook, FiringModel, GaussianModel, InputDensity, Posterior};

/// Tolerance on symmetry and normalization of a pair marginal.
pub const PAIR_MARGINAL_TOL: f64 = 1e-8;

/// Validates the combination and builds the integration nodes.
pub(crate) fn prepare(
    density: &InputDensity,
    codebook: &Codebook,
    posterior: &Posterior,
    engine: &ExpectationEngine,
) -> Result<NodeSet> {
    posterior.check_compatible(density)?;
    codebook.check_dim(density.dim())?;
    if codebook.m() != posterior.m() {
        return Err(Error::DimensionMismatch {
            expected: posterior.m(),
            got: codebook.m(),
        });
    }
    engine.nodes(density, Some(posterior))
}

/// Per-node scratch: posterior support, displacements, and the mean residual `r`.
pub(crate) struct LocalTerms {
    pub support: Vec<(usize, f64)>,
    pub disp: Vec<f64>,
    pub residual: Vec<f64>,
    dim: usize,
}

impl LocalTerms {
    pub fn new(dim: usize) -> Self {
        Self {
            support: Vec::new(),
            disp: Vec::new(),
            residual: vec![0.0; dim],
            dim,
        }
    }

    /// Fills the scratch for input `x`; fails if `Pr(.|x)` is not normalized.
    pub fn fill(&mut self, density: &InputDensity, codebook: &Codebook, posterior: &Posterior, x: &[f64]) -> Result<()> {
        posterior.support_into(x, &mut self.support);
        Posterior::check_normalized(&self.support)?;
        let geometry = density.geometry();
        let dim = self.dim;
        self.disp.resize(self.support.len() * dim, 0.0);
        self.residual.iter_mut().for_each(|r| *r = 0.0);
        for (i, &(y, p)) in self.support.iter().enumerate() {
            let d = &mut self.disp[i * dim..(i + 1) * dim];
            geometry.displacement_into(x, codebook.vector(y), d);
            for (r, di) in self.residual.iter_mut().zip(d.iter()) {
                *r += p * di;
            }
        }
        Ok(())
    }

    pub fn disp(&self, i: usize) -> &[f64] {
        &self.disp[i * self.dim..(i + 1) * self.dim]
    }

    /// `sum_y Pr(y|x) |d_y|^2`
    pub fn incoherent(&self) -> f64 {
        self.support
            .iter()
            .enumerate()
            .map(|(i, (_, p))| p * norm2(self.disp(i)))
            .sum()
    }

    /// `|r|^2`
    pub fn coherent(&self) -> f64 {
        norm2(&self.residual)
    }
}

#[inline]
pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum()
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Integrates `(sum_y p |d_y|^2, |r|^2)` and returns the raw expectations
/// plus per-node values of the bound for error estimation.
pub(crate) fn integrate_terms(
    density: &InputDensity,
    codebook: &Codebook,
    posterior: &Posterior,
    firing: FiringModel,
    nodes: &NodeSet,
    keep_values: bool,
) -> Result<(f64, f64, Vec<f64>)> {
    let mut local = LocalTerms::new(density.dim());
    let mut inc = 0.0;
    let mut coh = 0.0;
    let mut values = Vec::new();
    for (x, w) in nodes.iter() {
        local.fill(density, codebook, posterior, x)?;
        let a = local.incoherent();
        let b = local.coherent();
        inc += w * a;
        coh += w * b;
        if keep_values {
            values.push(firing.d1_factor() * a + firing.d2_factor() * b);
        }
    }
    Ok((inc, coh, values))
}

/// Incoherent part `D1 = (2/n) E[sum_y Pr(y|x) |x - x'(y)|^2]`.
pub fn eval_d1(
    density: &InputDensity,
    codebook: &Codebook,
    posterior: &Posterior,
    firing: FiringModel,
    engine: &ExpectationEngine,
) -> Result<f64> {
    let nodes = prepare(density, codebook, posterior, engine)?;
    let mut local = LocalTerms::new(density.dim());
    let mut total = 0.0;
    for (x, w) in nodes.iter() {
        local.fill(density, codebook, posterior, x)?;
        total += w * local.incoherent();
    }
    Ok(firing.d1_factor() * total)
}

/// Coherent part for independent events, `D2 = (2(n-1)/n) E[|x - sum_y Pr(y|x) x'(y)|^2]`.
pub fn eval_d2_independent(
    density: &InputDensity,
    codebook: &Codebook,
    posterior: &Posterior,
    firing: FiringModel,
    engine: &ExpectationEngine,
) -> Result<f64> {
    if !firing.is_independent() {
        return Err(Error::CorrelatedFiring);
    }
    let nodes = prepare(density, codebook, posterior, engine)?;
    if firing.n() == 1 {
        return Ok(0.0);
    }
    let mut local = LocalTerms::new(density.dim());
    let mut total = 0.0;
    for (x, w) in nodes.iter() {
        local.fill(density, codebook, posterior, x)?;
        total += w * local.coherent();
    }
    Ok(firing.d2_factor() * total)
}

/// Coherent part from an explicit pair marginal `Pr(y1, y2|x)`:
/// `D2 = (2(n-1)/n) E[sum_{y1,y2} Pr(y1,y2|x) (x - x'(y1)).(x - x'(y2))]`.
///
/// The marginal is checked for symmetry and normalization at every node.
pub fn eval_d2_correlated<F>(
    density: &InputDensity,
    codebook: &Codebook,
    pair_marginal: F,
    firing: FiringModel,
    engine: &ExpectationEngine,
) -> Result<f64>
where
    F: Fn(&[f64], usize, usize) -> f64,
{
    codebook.check_dim(density.dim())?;
    let nodes = engine.nodes(density, None)?;
    let m = codebook.m();
    let dim = density.dim();
    let geometry = density.geometry();
    let mut disp = vec![0.0; m * dim];
    let mut pair = vec![0.0; m * m];
    let mut total = 0.0;
    for (x, w) in nodes.iter() {
        let mut sum = 0.0;
        for y1 in 0..m {
            for y2 in 0..m {
                let p = pair_marginal(x, y1, y2);
                if !p.is_finite() || p < 0.0 {
                    return Err(Error::InvalidPairMarginal("negative or non-finite"));
                }
                pair[y1 * m + y2] = p;
                sum += p;
            }
        }
        if (sum - 1.0).abs() > PAIR_MARGINAL_TOL {
            return Err(Error::InvalidPairMarginal("not normalized"));
        }
        for y1 in 0..m {
            for y2 in y1 + 1..m {
                if (pair[y1 * m + y2] - pair[y2 * m + y1]).abs() > PAIR_MARGINAL_TOL {
                    return Err(Error::InvalidPairMarginal("asymmetric"));
                }
            }
        }
        if firing.n() == 1 {
            continue;
        }
        for y in 0..m {
            geometry.displacement_into(x, codebook.vector(y), &mut disp[y * dim..(y + 1) * dim]);
        }
        let mut acc = 0.0;
        for y1 in 0..m {
            for y2 in 0..m {
                let p = pair[y1 * m + y2];
                if p != 0.0 {
                    acc += p * dot(&disp[y1 * dim..(y1 + 1) * dim], &disp[y2 * dim..(y2 + 1) * dim]);
                }
            }
        }
        total += w * acc;
    }
    if firing.n() == 1 {
        return Ok(0.0);
    }
    Ok(firing.d2_factor() * total)
}

/// Full coding cost `D_VQ/(4 sigma^2) + dim ln(sqrt(2 pi) sigma) + ln M`.
///
/// The last term takes the code prior `Q(y)` uniform over the `M` neurons.
/// `D_VQ` equals `D1` when `n = 1`; otherwise it is enumerated with
/// conditional-mean reconstruction.
pub fn eval_full_d(
    density: &InputDensity,
    codebook: &Codebook,
    posterior: &Posterior,
    firing: FiringModel,
    gaussian: GaussianModel,
    engine: &ExpectationEngine,
) -> Result<f64> {
    if gaussian.dim() != density.dim() {
        return Err(Error::DimensionMismatch {
            expected: density.dim(),
            got: gaussian.dim(),
        });
    }
    let dvq = if firing.n() == 1 {
        eval_d1(density, codebook, posterior, firing, engine)?
    } else {
        eval_dvq_bruteforce(
            density,
            codebook,
            posterior,
            firing,
            Reconstruction::OptimalConditionalMean,
            engine,
        )?
    };
    Ok(full_cost_from_dvq(dvq, gaussian, codebook.m()))
}

pub(crate) fn full_cost_from_dvq(dvq: f64, gaussian: GaussianModel, m: usize) -> f64 {
    let sigma = gaussian.sigma();
    dvq / (4.0 * sigma * sigma) + gaussian.log_normalizer() + (m as f64).ln()
}
