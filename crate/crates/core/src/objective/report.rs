use serde::{Deserialize, Serialize};

use super::{
    eval_dvq_bruteforce, full_cost_from_dvq, integrate_terms, prepare, Estimator, ExpectationEngine, Reconstruction,
};
use crate::error::{Error, Result};
use crate::model::{Codebook, FiringModel, GaussianModel, InputDensity, Posterior};

pub const CSV_HEADER: &str = "estimator,n,M,d1,d2,bound,dvq,d_full,std_error";

/// Evaluated objective terms for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveReport {
    pub estimator: Estimator,
    pub n: usize,
    pub m: usize,
    pub d1: f64,
    pub d2: f64,
    pub bound: f64,
    pub dvq: Option<f64>,
    pub d_full: Option<f64>,
    pub std_error: Option<f64>,
}

/// Optional extras computed alongside `D1` and `D2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReportOptions {
    pub dvq: Option<Reconstruction>,
    pub gaussian: Option<GaussianModel>,
}

/// Scientific notation with 17 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn format_opt(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

impl ObjectiveReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.estimator.as_str(),
            self.n,
            self.m,
            format_float(self.d1),
            format_float(self.d2),
            format_float(self.bound),
            format_opt(self.dvq),
            format_opt(self.d_full),
            format_opt(self.std_error),
        )
    }
}

/// Evaluates `D1`, `D2` and their sum in one pass, plus the requested extras.
///
/// For Monte-Carlo engines `std_error` is the standard error of the bound.
pub fn evaluate(
    density: &InputDensity,
    codebook: &Codebook,
    posterior: &Posterior,
    firing: FiringModel,
    engine: &ExpectationEngine,
    options: ReportOptions,
) -> Result<ObjectiveReport> {
    if !firing.is_independent() {
        return Err(Error::CorrelatedFiring);
    }
    let nodes = prepare(density, codebook, posterior, engine)?;
    let keep = nodes.estimator() == Estimator::MonteCarlo;
    let (inc, coh, values) = integrate_terms(density, codebook, posterior, firing, &nodes, keep)?;
    let d1 = firing.d1_factor() * inc;
    let d2 = if firing.n() == 1 { 0.0 } else { firing.d2_factor() * coh };
    let dvq = match options.dvq {
        Some(rec) => Some(eval_dvq_bruteforce(density, codebook, posterior, firing, rec, engine)?),
        None => None,
    };
    let d_full = match options.gaussian {
        Some(g) => {
            if g.dim() != density.dim() {
                return Err(Error::DimensionMismatch {
                    expected: density.dim(),
                    got: g.dim(),
                });
            }
            let term = if firing.n() == 1 {
                d1
            } else {
                match (options.dvq, dvq) {
                    (Some(Reconstruction::OptimalConditionalMean), Some(v)) => v,
                    _ => eval_dvq_bruteforce(
                        density,
                        codebook,
                        posterior,
                        firing,
                        Reconstruction::OptimalConditionalMean,
                        engine,
                    )?,
                }
            };
            Some(full_cost_from_dvq(term, g, codebook.m()))
        }
        None => None,
    };
    Ok(ObjectiveReport {
        estimator: nodes.estimator(),
        n: firing.n(),
        m: codebook.m(),
        d1,
        d2,
        bound: d1 + d2,
        dvq,
        d_full,
        std_error: nodes.standard_error(&values),
    })
}
