use super::{dot, norm2, prepare, ExpectationEngine, LocalTerms};
use crate::error::{Error, Result};
use crate::model::{Codebook, FiringModel, InputDensity, Posterior};

/// `d(D1 + D2)/dx'(y)` for every neuron:
/// `-(4/n) E[Pr(y|x) (d_y + (n-1) r)]`.
pub fn grad_codebook(
    density: &InputDensity,
    codebook: &Codebook,
    posterior: &Posterior,
    firing: FiringModel,
    engine: &ExpectationEngine,
) -> Result<Vec<Vec<f64>>> {
    if !firing.is_independent() {
        return Err(Error::CorrelatedFiring);
    }
    let nodes = prepare(density, codebook, posterior, engine)?;
    let dim = density.dim();
    let coupling = firing.n() as f64 - 1.0;
    let mut grad = vec![vec![0.0; dim]; codebook.m()];
    let mut local = LocalTerms::new(dim);
    for (x, w) in nodes.iter() {
        local.fill(density, codebook, posterior, x)?;
        for (i, &(y, p)) in local.support.iter().enumerate() {
            let d = local.disp(i);
            for ((g, di), ri) in grad[y].iter_mut().zip(d).zip(&local.residual) {
                *g += w * p * (di + coupling * ri);
            }
        }
    }
    let scale = -4.0 / firing.n() as f64;
    for g in grad.iter_mut().flatten() {
        *g *= scale;
    }
    Ok(grad)
}

/// Gradient of `D1 + D2` with respect to the parameters of a softmax posterior.
///
/// Per input, `dF/dp_y = (2/n)|d_y|^2 + (4(n-1)/n) d_y . r`, and the softmax
/// Jacobian gives `dF/ds_k = p_k (dF/dp_k - sum_y p_y dF/dp_y)`.
pub fn grad_logits(
    density: &InputDensity,
    codebook: &Codebook,
    posterior: &Posterior,
    firing: FiringModel,
    engine: &ExpectationEngine,
) -> Result<Vec<f64>> {
    let model = posterior
        .as_logits()
        .ok_or(Error::WrongPosterior("logit gradient needs a Logits posterior"))?;
    if !firing.is_independent() {
        return Err(Error::CorrelatedFiring);
    }
    let nodes = prepare(density, codebook, posterior, engine)?;
    let m = codebook.m();
    let n = firing.n() as f64;
    let mut grad = vec![0.0; model.num_params()];
    let mut local = LocalTerms::new(density.dim());
    let mut dprob = vec![0.0; m];
    let mut dscore = vec![0.0; m];
    for (x, w) in nodes.iter() {
        local.fill(density, codebook, posterior, x)?;
        dscore.iter_mut().for_each(|v| *v = 0.0);
        let mut mean = 0.0;
        for (i, &(y, p)) in local.support.iter().enumerate() {
            let d = local.disp(i);
            dprob[y] = (2.0 / n) * norm2(d) + (4.0 * (n - 1.0) / n) * dot(d, &local.residual);
            mean += p * dprob[y];
        }
        for &(y, p) in &local.support {
            dscore[y] = w * p * (dprob[y] - mean);
        }
        model.accumulate_param_grad(x, &dscore, &mut grad);
    }
    Ok(grad)
}
