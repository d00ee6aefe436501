//! Random enumerable problem instances and the checks run on them.

use firing_vq::model::{Codebook, FiringModel, InputDensity, InputPoint, LogitModel, Posterior};
use firing_vq::objective::{
    eval_dvq_bruteforce, evaluate, grad_codebook, grad_logits, ExpectationEngine, Reconstruction, ReportOptions,
};
use firing_vq::Result;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::InstanceLimits;

#[derive(Debug, Clone)]
pub struct Instance {
    pub density: InputDensity,
    pub codebook: Codebook,
    pub posterior: Posterior,
    pub firing: FiringModel,
}

fn uniform(rng: &mut ChaCha8Rng, half: f64) -> f64 {
    half * (2.0 * rng.random::<f64>() - 1.0)
}

/// Empirical density, random codebook and affine softmax posterior.
pub fn random_instance(rng: &mut ChaCha8Rng, limits: InstanceLimits) -> Instance {
    let m = rng.random_range(1..=limits.max_m);
    let n = rng.random_range(1..=limits.max_n);
    let dim = rng.random_range(1..=limits.max_dim);
    let points = rng.random_range(1..=limits.max_points);
    let samples = (0..points)
        .map(|_| InputPoint::new((0..dim).map(|_| uniform(rng, 2.0)).collect()))
        .collect();
    let vectors = (0..m).map(|_| (0..dim).map(|_| uniform(rng, 2.0)).collect()).collect();
    let weights = (0..m).map(|_| (0..dim).map(|_| uniform(rng, 3.0)).collect()).collect();
    let bias = (0..m).map(|_| uniform(rng, 1.0)).collect();
    Instance {
        density: InputDensity::empirical(samples).expect("non-empty sample"),
        codebook: Codebook::new(vectors).expect("finite codebook"),
        posterior: Posterior::Logits(LogitModel::affine(weights, bias).expect("consistent shapes")),
        firing: FiringModel::independent(n).expect("n >= 1"),
    }
}

impl Instance {
    pub fn with_events(mut self, n: usize) -> Self {
        self.firing = FiringModel::independent(n).expect("n >= 1");
        self
    }

    /// Every codevector replaced by NaN.
    pub fn corrupted(mut self) -> Self {
        let vectors = vec![vec![f64::NAN; self.codebook.dim()]; self.codebook.m()];
        self.codebook = Codebook::new_unchecked(vectors);
        self
    }

    pub fn bound(&self) -> Result<f64> {
        self.bound_with(&self.codebook, &self.posterior)
    }

    fn bound_with(&self, codebook: &Codebook, posterior: &Posterior) -> Result<f64> {
        let r = evaluate(
            &self.density,
            codebook,
            posterior,
            self.firing,
            &ExpectationEngine::Enumerate,
            ReportOptions::default(),
        )?;
        Ok(r.bound)
    }

    pub fn dvq(&self, reconstruction: Reconstruction) -> Result<f64> {
        eval_dvq_bruteforce(
            &self.density,
            &self.codebook,
            &self.posterior,
            self.firing,
            reconstruction,
            &ExpectationEngine::Enumerate,
        )
    }

    pub fn d1(&self) -> Result<f64> {
        firing_vq::objective::eval_d1(
            &self.density,
            &self.codebook,
            &self.posterior,
            self.firing,
            &ExpectationEngine::Enumerate,
        )
    }

    /// Relative error of the analytic codebook and logit gradients against
    /// central differences with the given step.
    pub fn gradient_errors(&self, step: f64) -> Result<(f64, f64)> {
        let e = ExpectationEngine::Enumerate;
        let analytic: Vec<f64> = grad_codebook(&self.density, &self.codebook, &self.posterior, self.firing, &e)?
            .into_iter()
            .flatten()
            .collect();
        let mut numeric = Vec::with_capacity(analytic.len());
        for y in 0..self.codebook.m() {
            for k in 0..self.codebook.dim() {
                let mut plus = self.codebook.clone();
                plus.vector_mut(y)[k] += step;
                let mut minus = self.codebook.clone();
                minus.vector_mut(y)[k] -= step;
                numeric.push(
                    (self.bound_with(&plus, &self.posterior)? - self.bound_with(&minus, &self.posterior)?) / (2.0 * step),
                );
            }
        }
        let codebook_err = relative_error(&analytic, &numeric);

        let model = self.posterior.as_logits().expect("instances use logit posteriors");
        let analytic = grad_logits(&self.density, &self.codebook, &self.posterior, self.firing, &e)?;
        let theta = model.params();
        let mut numeric = Vec::with_capacity(theta.len());
        for i in 0..theta.len() {
            let mut a = theta.clone();
            a[i] += step;
            let mut b = theta.clone();
            b[i] -= step;
            let pa = Posterior::Logits(model.with_params(&a)?);
            let pb = Posterior::Logits(model.with_params(&b)?);
            numeric.push((self.bound_with(&self.codebook, &pa)? - self.bound_with(&self.codebook, &pb)?) / (2.0 * step));
        }
        Ok((codebook_err, relative_error(&analytic, &numeric)))
    }
}

/// `max |a - b| / max |b|`, or the absolute difference when `b` vanishes.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = b.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if scale > 1e-12 {
        diff / scale
    } else {
        diff
    }
}
