use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Geometry, InputPoint};
use crate::error::{invalid, Error, Result};

/// Input distribution `Pr(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DensityRepr", into = "DensityRepr")]
pub enum InputDensity {
    /// Constant density `p0` on a periodic segment `[0, length)`.
    ///
    /// Expectations under this density are reported per unit length, so
    /// `p0 * length` need not be one.
    UniformRing1D { p0: f64, length: f64 },
    /// Uniform density on the 2-torus, embedded in R^4 as
    /// `(cos a, sin a, cos b, sin b)`.
    Torus2,
    /// Equally weighted point masses.
    Empirical { samples: Vec<Vec<f64>> },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum DensityRepr {
    #[serde(rename = "uniform-ring-1d")]
    UniformRing1d { p0: f64, length: f64 },
    #[serde(rename = "torus-2")]
    Torus2,
    Empirical { samples: Vec<Vec<f64>> },
}

impl TryFrom<DensityRepr> for InputDensity {
    type Error = Error;

    fn try_from(repr: DensityRepr) -> Result<Self> {
        match repr {
            DensityRepr::UniformRing1d { p0, length } => InputDensity::uniform_ring(p0, length),
            DensityRepr::Torus2 => Ok(InputDensity::Torus2),
            DensityRepr::Empirical { samples } => {
                InputDensity::empirical(samples.into_iter().map(InputPoint::new).collect())
            }
        }
    }
}

impl From<InputDensity> for DensityRepr {
    fn from(d: InputDensity) -> Self {
        match d {
            InputDensity::UniformRing1D { p0, length } => DensityRepr::UniformRing1d { p0, length },
            InputDensity::Torus2 => DensityRepr::Torus2,
            InputDensity::Empirical { samples } => DensityRepr::Empirical { samples },
        }
    }
}

impl InputDensity {
    pub fn uniform_ring(p0: f64, length: f64) -> Result<Self> {
        if !(p0.is_finite() && p0 > 0.0) {
            return Err(invalid("p0", "must be finite and positive"));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(invalid("length", "must be finite and positive"));
        }
        Ok(InputDensity::UniformRing1D { p0, length })
    }

    pub fn empirical(samples: Vec<InputPoint>) -> Result<Self> {
        let first = samples.first().ok_or(Error::EmptyDensity)?;
        let dim = first.dim();
        if dim == 0 {
            return Err(invalid("samples", "points must have at least one coordinate"));
        }
        for p in &samples {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.dim(),
                });
            }
            if p.coords.iter().any(|c| !c.is_finite()) {
                return Err(invalid("samples", "coordinates must be finite"));
            }
        }
        Ok(InputDensity::Empirical {
            samples: samples.into_iter().map(|p| p.coords).collect(),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            InputDensity::UniformRing1D { .. } => "uniform-ring-1d",
            InputDensity::Torus2 => "torus-2",
            InputDensity::Empirical { .. } => "empirical",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            InputDensity::UniformRing1D { .. } => 1,
            InputDensity::Torus2 => 4,
            InputDensity::Empirical { samples } => samples.first().map_or(0, Vec::len),
        }
    }

    pub fn geometry(&self) -> Geometry {
        match *self {
            InputDensity::UniformRing1D { length, .. } => Geometry::Ring { length },
            _ => Geometry::Euclidean,
        }
    }

    /// Value of `Pr(x)` at a probe point.
    ///
    /// For the torus this is the density with respect to the angle measure
    /// `da db`, for empirical sets the mass of the matching atom.
    pub fn density_at(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        Ok(match self {
            InputDensity::UniformRing1D { p0, .. } => *p0,
            InputDensity::Torus2 => {
                let on_torus = ((x[0] * x[0] + x[1] * x[1]) - 1.0).abs() < 1e-9
                    && ((x[2] * x[2] + x[3] * x[3]) - 1.0).abs() < 1e-9;
                if on_torus {
                    1.0 / (4.0 * PI * PI)
                } else {
                    0.0
                }
            }
            InputDensity::Empirical { samples } => {
                let hits = samples.iter().filter(|s| s.as_slice() == x).count();
                hits as f64 / samples.len() as f64
            }
        })
    }

    /// Mean of the density in its ambient coordinates.
    pub fn mean(&self) -> Vec<f64> {
        match self {
            InputDensity::UniformRing1D { length, .. } => vec![length / 2.0],
            InputDensity::Torus2 => vec![0.0; 4],
            InputDensity::Empirical { samples } => {
                let mut mean = vec![0.0; self.dim()];
                for s in samples {
                    for (m, c) in mean.iter_mut().zip(s) {
                        *m += c;
                    }
                }
                let n = samples.len() as f64;
                mean.iter_mut().for_each(|m| *m /= n);
                mean
            }
        }
    }

    /// Draws `count` points; identical seeds give identical samples.
    pub fn sample(&self, seed: u64, count: usize) -> Result<Vec<InputPoint>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(&mut rng, count)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Result<Vec<InputPoint>> {
        if count == 0 {
            return Err(invalid("count", "must be at least 1"));
        }
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            out.push(InputPoint::new(self.draw(rng)?));
        }
        Ok(out)
    }

    pub(crate) fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        Ok(match self {
            InputDensity::UniformRing1D { length, .. } => vec![rng.random::<f64>() * length],
            InputDensity::Torus2 => {
                let a = rng.random::<f64>() * 2.0 * PI;
                let b = rng.random::<f64>() * 2.0 * PI;
                torus_point(a, b).to_vec()
            }
            InputDensity::Empirical { samples } => {
                if samples.is_empty() {
                    return Err(Error::EmptyDensity);
                }
                samples[rng.random_range(0..samples.len())].clone()
            }
        })
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if dim != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: dim,
            });
        }
        Ok(())
    }
}

/// Embeds the angle pair `(a, b)` in R^4.
pub fn torus_point(a: f64, b: f64) -> [f64; 4] {
    let (sa, ca) = a.sin_cos();
    let (sb, cb) = b.sin_cos();
    [ca, sa, cb, sb]
}

/// Angles `(a, b)` of a point on the embedded torus.
pub fn torus_angles(x: &[f64]) -> (f64, f64) {
    (x[1].atan2(x[0]), x[3].atan2(x[2]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus_samples_lie_on_both_circles() {
        let pts = InputDensity::Torus2.sample(3, 1000).unwrap();
        for p in &pts {
            let c = &p.coords;
            assert!((c[0] * c[0] + c[1] * c[1] - 1.0).abs() < 1e-12);
            assert!((c[2] * c[2] + c[3] * c[3] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ring_mean_within_clt_band() {
        let d = InputDensity::uniform_ring(1.0, 8.0).unwrap();
        let n = 100_000;
        let pts = d.sample(1, n).unwrap();
        let mean = pts.iter().map(|p| p.coords[0]).sum::<f64>() / n as f64;
        // uniform on [0, 8): variance 64/12
        let se = (64.0 / 12.0 / n as f64).sqrt();
        assert!((mean - 4.0).abs() < 3.0 * se, "mean {mean}");
        assert!(pts.iter().all(|p| (0.0..8.0).contains(&p.coords[0])));
    }

    #[test]
    fn empirical_frequencies_are_balanced() {
        let d = InputDensity::empirical(vec![
            vec![0.0].into(),
            vec![1.0].into(),
            vec![2.0].into(),
        ])
        .unwrap();
        let n = 30_000;
        let pts = d.sample(9, n).unwrap();
        let se = (1.0 / 3.0 * 2.0 / 3.0 / n as f64).sqrt();
        for v in [0.0, 1.0, 2.0] {
            let f = pts.iter().filter(|p| p.coords[0] == v).count() as f64 / n as f64;
            assert!((f - 1.0 / 3.0).abs() < 4.0 * se, "frequency {f} for {v}");
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let d = InputDensity::Torus2;
        assert_eq!(d.sample(5, 10).unwrap(), d.sample(5, 10).unwrap());
        assert_ne!(d.sample(5, 10).unwrap(), d.sample(6, 10).unwrap());
    }

    #[test]
    fn empty_empirical_is_rejected() {
        assert_eq!(InputDensity::empirical(vec![]), Err(Error::EmptyDensity));
        let d = InputDensity::Empirical { samples: vec![] };
        assert_eq!(d.sample(0, 1), Err(Error::EmptyDensity));
    }

    #[test]
    fn json_schema_uses_kind_tags() {
        let d = InputDensity::uniform_ring(1.0, 8.0).unwrap();
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(json, r#"{"kind":"uniform-ring-1d","p0":1.0,"length":8.0}"#);
        assert_eq!(serde_json::from_str::<InputDensity>(&json).unwrap(), d);
        assert_eq!(
            serde_json::from_str::<InputDensity>(r#"{"kind":"torus-2"}"#).unwrap(),
            InputDensity::Torus2
        );
        assert!(serde_json::from_str::<InputDensity>(r#"{"kind":"uniform-ring-1d","p0":-1.0,"length":8.0}"#).is_err());
    }
}
