use serde::{Deserialize, Serialize};

use super::{norm2, prepare, ExpectationEngine};
use crate::error::{Error, Result};
use crate::model::{Codebook, FiringModel, InputDensity, Posterior};

/// Largest number of firing vectors `M^n` the brute-force evaluator accepts.
pub const ENUMERATION_BUDGET: u128 = 1_000_000;

/// How a firing vector `y = (y_1..y_n)` is decoded back to input space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reconstruction {
    /// `x'(y) = (1/n) sum_i x'(y_i)`
    MeanOfEvents,
    /// `x'(y) = E[x | y]`, the best possible decoder. A single event always
    /// decodes to its own codevector, so with `n = 1` this coincides with
    /// `MeanOfEvents`.
    OptimalConditionalMean,
}

/// Ordered locations of `n` firing events.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FiringVector {
    pub events: Vec<usize>,
}

impl FiringVector {
    /// Every firing vector of length `n` over `m` neurons, in odometer order
    /// (first event varies fastest).
    pub fn all(m: usize, n: usize) -> impl Iterator<Item = FiringVector> {
        let total = (m as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
        (0..total).map(move |mut k| {
            let mut events = Vec::with_capacity(n);
            for _ in 0..n {
                events.push((k % m as u128) as usize);
                k /= m as u128;
            }
            FiringVector { events }
        })
    }

    /// Position in the odometer order of [`FiringVector::all`].
    pub fn flat_index(&self, m: usize) -> usize {
        self.events.iter().rev().fold(0, |acc, &y| acc * m + y)
    }

    /// `prod_i Pr(y_i|x)` for independent events.
    pub fn probability(&self, probs: &[f64]) -> f64 {
        self.events.iter().map(|&y| probs[y]).product()
    }
}

fn check_budget(m: usize, n: usize) -> Result<()> {
    let states = (m as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if states > ENUMERATION_BUDGET {
        return Err(Error::EnumerationBudget {
            states,
            budget: ENUMERATION_BUDGET,
        });
    }
    Ok(())
}

/// Visits every tuple of `n` entries of `support` with its product probability
/// and the positions of its entries inside `support`.
fn for_each_tuple(support: &[(usize, f64)], n: usize, mut visit: impl FnMut(&[usize], f64)) {
    let k = support.len();
    if k == 0 {
        return;
    }
    let mut slots = vec![0usize; n];
    loop {
        let prob: f64 = slots.iter().map(|&i| support[i].1).product();
        visit(&slots, prob);
        let mut j = 0;
        loop {
            if j == n {
                return;
            }
            slots[j] += 1;
            if slots[j] < k {
                break;
            }
            slots[j] = 0;
            j += 1;
        }
    }
}

/// Soft-VQ cost `D_VQ = 2 E[sum_y Pr(y|x) |x - x'(y)|^2]` by explicit
/// enumeration of firing vectors with independent events.
pub fn eval_dvq_bruteforce(
    density: &InputDensity,
    codebook: &Codebook,
    posterior: &Posterior,
    firing: FiringModel,
    reconstruction: Reconstruction,
    engine: &ExpectationEngine,
) -> Result<f64> {
    if !firing.is_independent() {
        return Err(Error::CorrelatedFiring);
    }
    let m = codebook.m();
    let n = firing.n();
    check_budget(m, n)?;
    let nodes = prepare(density, codebook, posterior, engine)?;
    let dim = density.dim();
    let geometry = density.geometry();
    let mut support = Vec::new();

    let reconstruction = if n == 1 { Reconstruction::MeanOfEvents } else { reconstruction };
    match reconstruction {
        Reconstruction::MeanOfEvents => {
            let mut disp = Vec::new();
            let mut mean = vec![0.0; dim];
            let mut total = 0.0;
            for (x, w) in nodes.iter() {
                posterior.support_into(x, &mut support);
                Posterior::check_normalized(&support)?;
                disp.resize(support.len() * dim, 0.0);
                for (i, &(y, _)) in support.iter().enumerate() {
                    geometry.displacement_into(x, codebook.vector(y), &mut disp[i * dim..(i + 1) * dim]);
                }
                let mut acc = 0.0;
                for_each_tuple(&support, n, |slots, prob| {
                    mean.iter_mut().for_each(|c| *c = 0.0);
                    for &i in slots {
                        for (c, d) in mean.iter_mut().zip(&disp[i * dim..(i + 1) * dim]) {
                            *c += d;
                        }
                    }
                    let inv = 1.0 / n as f64;
                    acc += prob * mean.iter().map(|c| c * inv * c * inv).sum::<f64>();
                });
                total += w * acc;
            }
            Ok(2.0 * total)
        }
        Reconstruction::OptimalConditionalMean => {
            if !geometry.is_euclidean() {
                return Err(Error::Unsupported(
                    "conditional-mean reconstruction needs a Euclidean input space".into(),
                ));
            }
            let states = m.pow(n as u32);
            let mut mass = vec![0.0; states];
            let mut centroid = vec![0.0; states * dim];
            let tuple_index = |support: &[(usize, f64)], slots: &[usize]| {
                slots.iter().rev().fold(0usize, |acc, &i| acc * m + support[i].0)
            };
            for (x, w) in nodes.iter() {
                posterior.support_into(x, &mut support);
                Posterior::check_normalized(&support)?;
                for_each_tuple(&support, n, |slots, prob| {
                    let k = tuple_index(&support, slots);
                    let wp = w * prob;
                    mass[k] += wp;
                    for (c, xi) in centroid[k * dim..(k + 1) * dim].iter_mut().zip(x) {
                        *c += wp * xi;
                    }
                });
            }
            for (k, &mk) in mass.iter().enumerate() {
                if mk > 0.0 {
                    centroid[k * dim..(k + 1) * dim].iter_mut().for_each(|c| *c /= mk);
                }
            }
            let mut total = 0.0;
            let mut diff = vec![0.0; dim];
            for (x, w) in nodes.iter() {
                posterior.support_into(x, &mut support);
                let mut acc = 0.0;
                for_each_tuple(&support, n, |slots, prob| {
                    let k = tuple_index(&support, slots);
                    for ((d, xi), c) in diff.iter_mut().zip(x).zip(&centroid[k * dim..(k + 1) * dim]) {
                        *d = xi - c;
                    }
                    acc += prob * norm2(&diff);
                });
                total += w * acc;
            }
            Ok(2.0 * total)
        }
    }
}
