//! Topographic maps from a neighborhood kernel routed through a hidden layer.
//!
//! With one firing event and a hard encoder `y(x)`, the soft-VQ cost becomes
//! `2 E[sum_y' Pr(y'|y(x)) |x - x'(y')|^2]`. The best encoder minimizes the
//! kernel-weighted distortion and online gradient descent moves every vector
//! toward `x` in proportion to its kernel weight.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{Codebook, Geometry, InputDensity, InputPoint, LayerKernel, NeighborhoodKernel};
use crate::objective::format_float;

/// Number of held-out points used for the per-epoch distortion estimate.
pub const VALIDATION_POINTS: usize = 1000;
const VALIDATION_SALT: u64 = 0x5ee_d0f7_a11d;

/// `Pr(y'|y) = sum_z Pr(y'|z) Pr(z|y)`.
pub fn compose_kernel(layer: &LayerKernel) -> NeighborhoodKernel {
    let m = layer.m_y();
    let rows = layer
        .forward()
        .iter()
        .map(|fz| {
            let mut row = vec![0.0; m];
            for (pz, back) in fz.iter().zip(layer.backward()) {
                if *pz == 0.0 {
                    continue;
                }
                for (r, b) in row.iter_mut().zip(back) {
                    *r += pz * b;
                }
            }
            row
        })
        .collect();
    NeighborhoodKernel::from_rows_unchecked(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopoMapState {
    pub codebook: Codebook,
    pub kernel: NeighborhoodKernel,
    /// Learning rate.
    pub step: f64,
    /// Multiplicative learning-rate decay applied after each epoch.
    pub decay: f64,
}

impl TopoMapState {
    pub fn new(codebook: Codebook, kernel: NeighborhoodKernel, step: f64, decay: f64) -> Result<Self> {
        if kernel.m() != codebook.m() {
            return Err(Error::DimensionMismatch {
                expected: codebook.m(),
                got: kernel.m(),
            });
        }
        if !(step >= 0.0 && step.is_finite()) {
            return Err(invalid("step", "must be finite and non-negative"));
        }
        if !(decay > 0.0 && decay <= 1.0) {
            return Err(invalid("decay", "must lie in (0, 1]"));
        }
        Ok(Self {
            codebook,
            kernel,
            step,
            decay,
        })
    }

    /// Codebook of `kernel.m()` vectors scattered uniformly within `spread`
    /// of the density mean.
    pub fn around_mean(
        density: &InputDensity,
        kernel: NeighborhoodKernel,
        step: f64,
        decay: f64,
        spread: f64,
        seed: u64,
    ) -> Result<Self> {
        let mean = density.mean();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vectors = (0..kernel.m())
            .map(|_| mean.iter().map(|c| c + spread * (2.0 * rng.random::<f64>() - 1.0)).collect())
            .collect();
        Self::new(Codebook::new(vectors)?, kernel, step, decay)
    }

    /// Kernel-weighted distortion `sum_y' Pr(y'|y) |x - x'(y')|^2` for every `y`.
    fn weighted_distortions(&self, x: &[f64]) -> Vec<f64> {
        let dist: Vec<f64> = self
            .codebook
            .vectors()
            .iter()
            .map(|v| Geometry::Euclidean.squared_distance(x, v))
            .collect();
        self.kernel
            .rows()
            .iter()
            .map(|row| row.iter().zip(&dist).map(|(k, d)| k * d).sum())
            .collect()
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        self.codebook.check_dim(x.len()).map_err(|_| Error::DimensionMismatch {
            expected: self.codebook.dim(),
            got: x.len(),
        })
    }

    /// Applies one online update in place and returns the winning neuron.
    pub fn step_in_place(&mut self, x: &[f64]) -> Result<usize> {
        let winner = encode(self, x)?;
        let eps = self.step;
        let row = self.kernel.row(winner).to_vec();
        for (y, k) in row.into_iter().enumerate() {
            if k == 0.0 {
                continue;
            }
            let rate = eps * k;
            for (v, xi) in self.codebook.vector_mut(y).iter_mut().zip(x) {
                *v += rate * (xi - *v);
            }
        }
        Ok(winner)
    }
}

fn argmin(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v < best_v {
            best_v = v;
            best = i;
        }
    }
    best
}

/// `argmin_y sum_y' Pr(y'|y) |x - x'(y')|^2`, lowest index on ties.
pub fn encode(state: &TopoMapState, x: &[f64]) -> Result<usize> {
    state.check_point(x)?;
    Ok(argmin(state.weighted_distortions(x)))
}

/// Plain nearest-codevector encoder, lowest index on ties.
pub fn encode_nearest(codebook: &Codebook, x: &[f64]) -> Result<usize> {
    codebook.check_dim(x.len())?;
    Ok(argmin(
        codebook.vectors().iter().map(|v| Geometry::Euclidean.squared_distance(x, v)),
    ))
}

/// Fraction of `points` on which the kernel-weighted and nearest-codevector
/// encoders pick different neurons.
pub fn encoder_disagreement(state: &TopoMapState, points: &[InputPoint]) -> Result<f64> {
    if points.is_empty() {
        return Ok(0.0);
    }
    let mut differ = 0usize;
    for p in points {
        if encode(state, p.as_slice())? != encode_nearest(&state.codebook, p.as_slice())? {
            differ += 1;
        }
    }
    Ok(differ as f64 / points.len() as f64)
}

/// `x'(y') <- x'(y') + eps Pr(y'|y*) (x - x'(y'))` with `y* = encode(x)`.
pub fn train_step(state: &TopoMapState, x: &[f64]) -> Result<TopoMapState> {
    let mut next = state.clone();
    next.step_in_place(x)?;
    Ok(next)
}

/// `2 mean_x sum_y' Pr(y'|y(x)) |x - x'(y')|^2` over `points`.
pub fn kernel_distortion(state: &TopoMapState, points: &[InputPoint]) -> Result<f64> {
    let mut total = 0.0;
    for p in points {
        state.check_point(p.as_slice())?;
        let d = state.weighted_distortions(p.as_slice());
        total += d.into_iter().fold(f64::INFINITY, f64::min);
    }
    Ok(2.0 * total / points.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub distortion: f64,
    /// Learning rate used during the epoch.
    pub step: f64,
    /// Sup-norm codebook change over the epoch.
    pub max_change: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub state: TopoMapState,
    pub trace: Vec<EpochRecord>,
    /// Codebook after each epoch, when requested.
    pub snapshots: Vec<Codebook>,
}

pub const DISTORTION_CSV_HEADER: &str = "epoch,distortion";

impl TrainReport {
    pub fn distortion_csv(&self) -> String {
        let mut out = format!("{DISTORTION_CSV_HEADER}\n");
        for r in &self.trace {
            out.push_str(&format!("{},{}\n", r.epoch, format_float(r.distortion)));
        }
        out
    }
}

/// Held-out sample used for distortion traces.
pub fn validation_sample(density: &InputDensity, seed: u64) -> Result<Vec<InputPoint>> {
    density.sample(seed ^ VALIDATION_SALT, VALIDATION_POINTS)
}

/// Online training. Training samples come from one ChaCha8 stream seeded
/// with `seed`, `samples_per_epoch` draws per epoch in order.
pub fn train(
    state: TopoMapState,
    density: &InputDensity,
    epochs: usize,
    samples_per_epoch: usize,
    seed: u64,
    keep_snapshots: bool,
) -> Result<TrainReport> {
    if epochs == 0 || samples_per_epoch == 0 {
        return Err(invalid("epochs", "epochs and samples per epoch must be at least 1"));
    }
    if !density.geometry().is_euclidean() {
        return Err(Error::Unsupported("topographic training needs a Euclidean input space".into()));
    }
    density.check_dim(state.codebook.dim())?;
    let validation = validation_sample(density, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = state;
    let mut trace = Vec::with_capacity(epochs);
    let mut snapshots = Vec::new();
    for epoch in 1..=epochs {
        let before = state.codebook.clone();
        for x in density.sample_with(&mut rng, samples_per_epoch)? {
            state.step_in_place(x.as_slice())?;
        }
        trace.push(EpochRecord {
            epoch,
            distortion: kernel_distortion(&state, &validation)?,
            step: state.step,
            max_change: state.codebook.sup_distance(&before),
        });
        if keep_snapshots {
            snapshots.push(state.codebook.clone());
        }
        state.step *= state.decay;
    }
    Ok(TrainReport { state, trace, snapshots })
}

/// True when a 1-D codebook is strictly increasing or strictly decreasing in index.
pub fn is_index_monotone(codebook: &Codebook) -> bool {
    let v: Vec<f64> = codebook.vectors().iter().map(|c| c[0]).collect();
    v.windows(2).all(|w| w[0] < w[1]) || v.windows(2).all(|w| w[0] > w[1])
}

#[cfg(test)]
mod tests;
