//! Domain types shared by the objective, solver and topographic-map modules.
//!
//! Neuron indices are zero-based throughout: a network of `m` neurons uses
//! indices `0..m`.

pub(crate) mod density;
mod kernel;
pub(crate) mod posterior;

pub use density::InputDensity;
pub use kernel::{LayerKernel, NeighborhoodKernel};
pub use posterior::{LogitModel, Posterior, TorusAxis};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Tolerance used when checking that a probability row sums to one.
pub const NORMALIZATION_TOL: f64 = 1e-10;

/// A point in input space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InputPoint {
    pub coords: Vec<f64>,
}

impl InputPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        Self { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }
}

impl From<Vec<f64>> for InputPoint {
    fn from(coords: Vec<f64>) -> Self {
        Self { coords }
    }
}

/// Metric structure of an input space.
///
/// Periodic spaces measure the displacement `x - x'` along the shorter way
/// round, so every quantity built from displacements is translation invariant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Geometry {
    Euclidean,
    Ring { length: f64 },
}

impl Geometry {
    /// Writes `x - x'` into `out`.
    #[inline]
    pub fn displacement_into(&self, x: &[f64], xp: &[f64], out: &mut [f64]) {
        match *self {
            Geometry::Euclidean => {
                for ((o, a), b) in out.iter_mut().zip(x).zip(xp) {
                    *o = a - b;
                }
            }
            Geometry::Ring { length } => {
                for ((o, a), b) in out.iter_mut().zip(x).zip(xp) {
                    *o = wrap_signed(a - b, length);
                }
            }
        }
    }

    pub fn displacement(&self, x: &[f64], xp: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.displacement_into(x, xp, &mut out);
        out
    }

    /// Moves `point` by `step`, folding the result back into the fundamental domain.
    #[inline]
    pub fn translate(&self, point: &mut [f64], step: &[f64]) {
        for (p, s) in point.iter_mut().zip(step) {
            *p += s;
        }
        if let Geometry::Ring { length } = *self {
            for p in point.iter_mut() {
                *p = p.rem_euclid(length);
                // rem_euclid rounds tiny negatives up to `length`
                if *p >= length {
                    *p = 0.0;
                }
            }
        }
    }

    pub fn squared_distance(&self, x: &[f64], xp: &[f64]) -> f64 {
        match *self {
            Geometry::Euclidean => x.iter().zip(xp).map(|(a, b)| (a - b) * (a - b)).sum(),
            Geometry::Ring { length } => x
                .iter()
                .zip(xp)
                .map(|(a, b)| {
                    let d = wrap_signed(a - b, length);
                    d * d
                })
                .sum(),
        }
    }

    pub fn is_euclidean(&self) -> bool {
        matches!(self, Geometry::Euclidean)
    }
}

/// Folds `d` into `[-length/2, length/2]`.
#[inline]
pub fn wrap_signed(d: f64, length: f64) -> f64 {
    d - length * (d / length).round()
}

/// Reconstruction vectors `x'(y)`, one per neuron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CodebookRepr", into = "CodebookRepr")]
pub struct Codebook {
    dim: usize,
    vectors: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CodebookRepr {
    m: usize,
    dim: usize,
    vectors: Vec<Vec<f64>>,
}

impl TryFrom<CodebookRepr> for Codebook {
    type Error = Error;

    fn try_from(repr: CodebookRepr) -> Result<Self> {
        if repr.vectors.len() != repr.m {
            return Err(invalid("m", format!("{} vectors listed", repr.vectors.len())));
        }
        let cb = Codebook::new(repr.vectors)?;
        if cb.dim != repr.dim {
            return Err(Error::DimensionMismatch {
                expected: repr.dim,
                got: cb.dim,
            });
        }
        Ok(cb)
    }
}

impl From<Codebook> for CodebookRepr {
    fn from(cb: Codebook) -> Self {
        CodebookRepr {
            m: cb.vectors.len(),
            dim: cb.dim,
            vectors: cb.vectors,
        }
    }
}

impl Codebook {
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Self> {
        let dim = vectors
            .first()
            .map(Vec::len)
            .ok_or_else(|| invalid("m", "a codebook needs at least one vector"))?;
        if dim == 0 {
            return Err(invalid("dim", "vectors must have at least one component"));
        }
        for v in &vectors {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
            if v.iter().any(|c| !c.is_finite()) {
                return Err(invalid("vectors", "all components must be finite"));
            }
        }
        Ok(Self { dim, vectors })
    }

    /// Builds a codebook without the finiteness check. Used to inject faults.
    pub fn new_unchecked(vectors: Vec<Vec<f64>>) -> Self {
        let dim = vectors.first().map_or(0, Vec::len);
        Self { dim, vectors }
    }

    /// One-dimensional codebook with `x'(y) = y`.
    pub fn integer_grid(m: usize) -> Self {
        Self {
            dim: 1,
            vectors: (0..m).map(|y| vec![y as f64]).collect(),
        }
    }

    pub fn m(&self) -> usize {
        self.vectors.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vector(&self, y: usize) -> &[f64] {
        &self.vectors[y]
    }

    pub fn vector_mut(&mut self, y: usize) -> &mut [f64] {
        &mut self.vectors[y]
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn into_vectors(self) -> Vec<Vec<f64>> {
        self.vectors
    }

    /// Largest absolute component-wise difference to `other`.
    pub fn sup_distance(&self, other: &Codebook) -> f64 {
        self.vectors
            .iter()
            .zip(&other.vectors)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(p, q)| (p - q).abs()))
            .fold(0.0, f64::max)
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: self.dim,
            });
        }
        Ok(())
    }
}

/// Number of firing events per input and whether they are independent given `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiringModel {
    n: usize,
    independent: bool,
}

impl FiringModel {
    pub fn new(n: usize, independent: bool) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n", "at least one firing event is required"));
        }
        Ok(Self { n, independent })
    }

    pub fn independent(n: usize) -> Result<Self> {
        Self::new(n, true)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_independent(&self) -> bool {
        self.independent
    }

    /// Weight `2/n` of the incoherent term.
    pub fn d1_factor(&self) -> f64 {
        2.0 / self.n as f64
    }

    /// Weight `2(n-1)/n` of the coherent term.
    pub fn d2_factor(&self) -> f64 {
        2.0 * (self.n as f64 - 1.0) / self.n as f64
    }
}

/// Isotropic Gaussian generative model `Q(x|y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianModel {
    sigma: f64,
    dim: usize,
}

impl GaussianModel {
    pub fn new(sigma: f64, dim: usize) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(invalid("sigma", "must be finite and positive"));
        }
        if dim == 0 {
            return Err(invalid("dim", "must be positive"));
        }
        Ok(Self { sigma, dim })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `dim * ln(sqrt(2 pi) sigma)`, the negative log of the Gaussian normalizer.
    pub fn log_normalizer(&self) -> f64 {
        self.dim as f64 * ((2.0 * std::f64::consts::PI).sqrt() * self.sigma).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_displacement_takes_short_way_round() {
        let g = Geometry::Ring { length: 8.0 };
        assert_eq!(g.displacement(&[7.5], &[0.0]), vec![-0.5]);
        assert_eq!(g.displacement(&[0.25], &[7.0]), vec![1.25]);
        let mut p = [7.5];
        g.translate(&mut p, &[1.0]);
        assert_eq!(p, [0.5]);
    }

    #[test]
    fn codebook_rejects_ragged_and_nonfinite() {
        assert!(Codebook::new(vec![vec![0.0], vec![1.0, 2.0]]).is_err());
        assert!(Codebook::new(vec![vec![f64::NAN]]).is_err());
        assert!(Codebook::new(vec![]).is_err());
    }

    #[test]
    fn codebook_json_schema() {
        let cb = Codebook::new(vec![vec![0.0, 1.0], vec![2.0, 3.0]]).unwrap();
        let json = serde_json::to_string(&cb).unwrap();
        assert_eq!(json, r#"{"m":2,"dim":2,"vectors":[[0.0,1.0],[2.0,3.0]]}"#);
        let back: Codebook = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cb);
        assert!(serde_json::from_str::<Codebook>(r#"{"m":3,"dim":2,"vectors":[[0.0,1.0]]}"#).is_err());
    }

    #[test]
    fn firing_model_requires_an_event() {
        assert!(FiringModel::new(0, true).is_err());
        let f = FiringModel::independent(1).unwrap();
        assert_eq!(f.d2_factor(), 0.0);
        assert_eq!(f.d1_factor(), 2.0);
    }

    #[test]
    fn gaussian_rejects_bad_sigma() {
        assert!(GaussianModel::new(0.0, 1).is_err());
        assert!(GaussianModel::new(f64::INFINITY, 1).is_err());
    }
}
