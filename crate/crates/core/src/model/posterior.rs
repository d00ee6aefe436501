use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::density::torus_angles;
use super::{Codebook, Geometry, InputDensity, NORMALIZATION_TOL};
use crate::error::{invalid, Error, Result};

/// Which circle of the torus a type-1 code quantizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TorusAxis {
    #[serde(rename = "12")]
    A12,
    #[serde(rename = "34")]
    A34,
}

/// Parametric score map producing `M` unnormalized log-probabilities per input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LogitModel {
    /// `score_y(x) = weights[y] . x + bias[y]`.
    Affine {
        weights: Vec<Vec<f64>>,
        bias: Vec<f64>,
    },
    /// Scores looked up from the nearest tabulated point (lowest index on ties).
    Table {
        points: Vec<Vec<f64>>,
        scores: Vec<Vec<f64>>,
    },
}

impl LogitModel {
    pub fn affine(weights: Vec<Vec<f64>>, bias: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.len() != bias.len() {
            return Err(invalid("weights", "need one weight row and one bias per neuron"));
        }
        let d = weights[0].len();
        if d == 0 || weights.iter().any(|w| w.len() != d) {
            return Err(invalid("weights", "rows must share a positive input dimension"));
        }
        Ok(LogitModel::Affine { weights, bias })
    }

    pub fn table(points: Vec<Vec<f64>>, scores: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() || points.len() != scores.len() {
            return Err(invalid("points", "need one score row per tabulated point"));
        }
        let d = points[0].len();
        let m = scores[0].len();
        if d == 0 || points.iter().any(|p| p.len() != d) {
            return Err(invalid("points", "points must share a positive dimension"));
        }
        if m == 0 || scores.iter().any(|s| s.len() != m) {
            return Err(invalid("scores", "score rows must share a positive length"));
        }
        Ok(LogitModel::Table { points, scores })
    }

    pub fn m(&self) -> usize {
        match self {
            LogitModel::Affine { bias, .. } => bias.len(),
            LogitModel::Table { scores, .. } => scores[0].len(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            LogitModel::Affine { weights, .. } => weights[0].len(),
            LogitModel::Table { points, .. } => points[0].len(),
        }
    }

    pub fn num_params(&self) -> usize {
        match self {
            LogitModel::Affine { weights, bias } => weights.len() * weights[0].len() + bias.len(),
            LogitModel::Table { scores, .. } => scores.len() * scores[0].len(),
        }
    }

    /// Flattened parameters: affine weights row-major then biases; table scores row-major.
    pub fn params(&self) -> Vec<f64> {
        match self {
            LogitModel::Affine { weights, bias } => {
                weights.iter().flatten().chain(bias).copied().collect()
            }
            LogitModel::Table { scores, .. } => scores.iter().flatten().copied().collect(),
        }
    }

    pub fn with_params(&self, params: &[f64]) -> Result<Self> {
        if params.len() != self.num_params() {
            return Err(Error::DimensionMismatch {
                expected: self.num_params(),
                got: params.len(),
            });
        }
        Ok(match self {
            LogitModel::Affine { weights, .. } => {
                let d = weights[0].len();
                let m = weights.len();
                LogitModel::Affine {
                    weights: params[..m * d].chunks(d).map(<[f64]>::to_vec).collect(),
                    bias: params[m * d..].to_vec(),
                }
            }
            LogitModel::Table { points, scores } => LogitModel::Table {
                points: points.clone(),
                scores: params.chunks(scores[0].len()).map(<[f64]>::to_vec).collect(),
            },
        })
    }

    fn table_index(points: &[Vec<f64>], x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in points.iter().enumerate() {
            let d = Geometry::Euclidean.squared_distance(p, x);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    pub fn scores_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            LogitModel::Affine { weights, bias } => {
                for ((o, w), b) in out.iter_mut().zip(weights).zip(bias) {
                    *o = w.iter().zip(x).map(|(a, c)| a * c).sum::<f64>() + b;
                }
            }
            LogitModel::Table { points, scores } => {
                out.copy_from_slice(&scores[Self::table_index(points, x)]);
            }
        }
    }

    /// Adds `sum_k dscore[k] * d score_k(x) / d theta` to `grad`.
    pub fn accumulate_param_grad(&self, x: &[f64], dscore: &[f64], grad: &mut [f64]) {
        match self {
            LogitModel::Affine { weights, .. } => {
                let d = weights[0].len();
                let m = weights.len();
                for (k, &g) in dscore.iter().enumerate() {
                    for (j, xj) in x.iter().enumerate() {
                        grad[k * d + j] += g * xj;
                    }
                    grad[m * d + k] += g;
                }
            }
            LogitModel::Table { points, scores } => {
                let m = scores[0].len();
                let i = Self::table_index(points, x);
                for (k, &g) in dscore.iter().enumerate() {
                    grad[i * m + k] += g;
                }
            }
        }
    }
}

/// Firing-probability family `Pr(y|x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Posterior {
    /// Translation-invariant trapezoids `p(y - x)` on a ring of `neurons`
    /// unit cells; `s` is the ramp half-width.
    Trapezoid1D { s: f64, neurons: usize },
    /// Hard quantizer of one circle into `m` equal arcs.
    TorusType1 { m: usize, axis: TorusAxis },
    /// Hard quantizer of the torus into `sqrt(m) x sqrt(m)` equal cells.
    TorusType2 { m: usize },
    /// Factorial code: neurons `0..m/2` quantize the first circle, `m/2..m`
    /// the second, each firing with probability one half.
    TorusType3 { m: usize },
    /// Deterministic nearest-codevector encoder (lowest index on ties).
    WinnerTakeAll { codebook: Codebook, geometry: Geometry },
    /// Softmax over a parametric score map.
    Logits(LogitModel),
}

impl Posterior {
    pub fn trapezoid(s: f64, neurons: usize) -> Result<Self> {
        if !(0.0..=0.5).contains(&s) {
            return Err(invalid("s", "must lie in [0, 1/2]"));
        }
        if neurons < 2 {
            return Err(invalid("neurons", "the ring needs at least two neurons"));
        }
        Ok(Posterior::Trapezoid1D { s, neurons })
    }

    pub fn torus_type1(m: usize, axis: TorusAxis) -> Result<Self> {
        if m == 0 {
            return Err(invalid("m", "must be positive"));
        }
        Ok(Posterior::TorusType1 { m, axis })
    }

    pub fn torus_type2(m: usize) -> Result<Self> {
        if integer_sqrt(m).is_none() || m == 0 {
            return Err(invalid("m", format!("type 2 needs a perfect square, got {m}")));
        }
        Ok(Posterior::TorusType2 { m })
    }

    pub fn torus_type3(m: usize) -> Result<Self> {
        if m == 0 || !m.is_multiple_of(2) {
            return Err(invalid("m", format!("type 3 needs an even count, got {m}")));
        }
        Ok(Posterior::TorusType3 { m })
    }

    pub fn winner_take_all(codebook: Codebook, geometry: Geometry) -> Self {
        Posterior::WinnerTakeAll { codebook, geometry }
    }

    pub fn m(&self) -> usize {
        match self {
            Posterior::Trapezoid1D { neurons, .. } => *neurons,
            Posterior::TorusType1 { m, .. }
            | Posterior::TorusType2 { m }
            | Posterior::TorusType3 { m } => *m,
            Posterior::WinnerTakeAll { codebook, .. } => codebook.m(),
            Posterior::Logits(model) => model.m(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Posterior::Trapezoid1D { .. } => 1,
            Posterior::TorusType1 { .. } | Posterior::TorusType2 { .. } | Posterior::TorusType3 { .. } => 4,
            Posterior::WinnerTakeAll { codebook, .. } => codebook.dim(),
            Posterior::Logits(model) => model.dim(),
        }
    }

    /// Checks that this family can be evaluated on the support of `density`.
    pub fn check_compatible(&self, density: &InputDensity) -> Result<()> {
        density.check_dim(self.dim())?;
        match (self, density) {
            (Posterior::Trapezoid1D { neurons, .. }, InputDensity::UniformRing1D { length, .. }) => {
                if (*neurons as f64 - length).abs() > 0.0 {
                    return Err(invalid("neurons", "trapezoid code needs one neuron per unit length"));
                }
            }
            (Posterior::Trapezoid1D { .. }, _) => {
                return Err(Error::Unsupported("trapezoid posterior is defined on the ring only".into()))
            }
            (
                Posterior::TorusType1 { .. } | Posterior::TorusType2 { .. } | Posterior::TorusType3 { .. },
                InputDensity::UniformRing1D { .. },
            ) => return Err(Error::Unsupported("torus posterior on a ring density".into())),
            (Posterior::WinnerTakeAll { geometry, .. }, d) if *geometry != d.geometry() => {
                return Err(Error::Unsupported("winner-take-all geometry differs from the density".into()))
            }
            _ => {}
        }
        Ok(())
    }

    /// Nonzero entries of `Pr(.|x)` as `(y, p)` pairs. `x` must have the right dimension.
    pub fn support_into(&self, x: &[f64], out: &mut Vec<(usize, f64)>) {
        out.clear();
        match self {
            Posterior::Trapezoid1D { s, neurons } => trapezoid_support(*s, *neurons, x[0], out),
            Posterior::TorusType1 { m, axis } => {
                let (a, b) = torus_angles(x);
                let theta = match axis {
                    TorusAxis::A12 => a,
                    TorusAxis::A34 => b,
                };
                out.push((arc_cell(theta, *m), 1.0));
            }
            Posterior::TorusType2 { m } => {
                let side = integer_sqrt(*m).unwrap_or(1);
                let (a, b) = torus_angles(x);
                out.push((arc_cell(a, side) * side + arc_cell(b, side), 1.0));
            }
            Posterior::TorusType3 { m } => {
                let half = m / 2;
                let (a, b) = torus_angles(x);
                out.push((arc_cell(a, half), 0.5));
                out.push((half + arc_cell(b, half), 0.5));
            }
            Posterior::WinnerTakeAll { codebook, geometry } => {
                out.push((nearest(codebook, *geometry, x), 1.0));
            }
            Posterior::Logits(model) => {
                let m = model.m();
                let mut scores = vec![0.0; m];
                model.scores_into(x, &mut scores);
                softmax_in_place(&mut scores);
                out.extend(scores.into_iter().enumerate());
            }
        }
    }

    /// Full probability vector `Pr(.|x)`.
    pub fn probs(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let mut support = Vec::new();
        self.support_into(x, &mut support);
        let mut p = vec![0.0; self.m()];
        for (y, v) in support {
            p[y] += v;
        }
        Ok(p)
    }

    /// `Pr(y|x)` for a single neuron.
    pub fn prob(&self, x: &[f64], y: usize) -> Result<f64> {
        if y >= self.m() {
            return Err(Error::IndexOutOfRange { index: y, m: self.m() });
        }
        Ok(self.probs(x)?[y])
    }

    /// Coordinates (per density axis) where `Pr(y|x)` has kinks or jumps.
    ///
    /// Ring densities have one axis, the torus has the two angles.
    pub fn breakpoints(&self, density: &InputDensity) -> Vec<Vec<f64>> {
        match (self, density) {
            (Posterior::Trapezoid1D { s, neurons }, InputDensity::UniformRing1D { length, .. }) => {
                let mut pts = Vec::new();
                for y in 0..*neurons {
                    let c = y as f64;
                    for off in [0.5 - s, 0.5 + s] {
                        pts.push((c + off).rem_euclid(*length));
                        pts.push((c - off).rem_euclid(*length));
                    }
                }
                vec![pts]
            }
            (Posterior::TorusType1 { m, axis }, InputDensity::Torus2) => match axis {
                TorusAxis::A12 => vec![arc_edges(*m), vec![]],
                TorusAxis::A34 => vec![vec![], arc_edges(*m)],
            },
            (Posterior::TorusType2 { m }, InputDensity::Torus2) => {
                let side = integer_sqrt(*m).unwrap_or(1);
                vec![arc_edges(side), arc_edges(side)]
            }
            (Posterior::TorusType3 { m }, InputDensity::Torus2) => {
                vec![arc_edges(m / 2), arc_edges(m / 2)]
            }
            (Posterior::WinnerTakeAll { codebook, .. }, InputDensity::UniformRing1D { length, .. }) => {
                let mut centers: Vec<f64> = codebook.vectors().iter().map(|v| v[0].rem_euclid(*length)).collect();
                centers.sort_by(f64::total_cmp);
                let k = centers.len();
                let mids = (0..k)
                    .map(|i| {
                        let a = centers[i];
                        let b = if i + 1 < k { centers[i + 1] } else { centers[0] + length };
                        ((a + b) / 2.0).rem_euclid(*length)
                    })
                    .collect();
                vec![mids]
            }
            (_, InputDensity::Torus2) => vec![vec![], vec![]],
            _ => vec![vec![]],
        }
    }

    pub fn as_logits(&self) -> Option<&LogitModel> {
        match self {
            Posterior::Logits(model) => Some(model),
            _ => None,
        }
    }

    pub(crate) fn check_normalized(support: &[(usize, f64)]) -> Result<()> {
        let sum: f64 = support.iter().map(|(_, p)| p).sum();
        if !((sum - 1.0).abs() <= NORMALIZATION_TOL) || support.iter().any(|(_, p)| !(*p >= 0.0)) {
            return Err(Error::NonNormalized { sum });
        }
        Ok(())
    }
}

pub(crate) fn integer_sqrt(m: usize) -> Option<usize> {
    let r = (m as f64).sqrt().round() as usize;
    (r * r == m).then_some(r)
}

/// Index of the arc of width `2 pi / k` centred on a multiple of `2 pi / k`.
fn arc_cell(theta: f64, k: usize) -> usize {
    let w = 2.0 * PI / k as f64;
    ((theta / w).round() as i64).rem_euclid(k as i64) as usize
}

fn arc_edges(k: usize) -> Vec<f64> {
    let w = 2.0 * PI / k as f64;
    (0..k).map(|i| ((i as f64 + 0.5) * w).rem_euclid(2.0 * PI)).collect()
}

/// Three-piece trapezoid: flat top on `|d| <= 1/2 - s`, linear ramps, zero outside.
pub fn trapezoid_profile(s: f64, d: f64) -> f64 {
    let a = d.abs();
    if a <= 0.5 - s {
        1.0
    } else if a >= 0.5 + s {
        0.0
    } else {
        (2.0 * s - 2.0 * a + 1.0) / (4.0 * s)
    }
}

fn trapezoid_support(s: f64, neurons: usize, x: f64, out: &mut Vec<(usize, f64)>) {
    let length = neurons as f64;
    let x = x.rem_euclid(length);
    let k = x.floor() as i64;
    if s == 0.0 {
        let f = x - k as f64;
        let lo = k.rem_euclid(neurons as i64) as usize;
        let hi = (k + 1).rem_euclid(neurons as i64) as usize;
        let owner = if f < 0.5 {
            lo
        } else if f > 0.5 {
            hi
        } else {
            lo.min(hi)
        };
        out.push((owner, 1.0));
        return;
    }
    for off in -1..=2 {
        let y = (k + off).rem_euclid(neurons as i64) as usize;
        if out.iter().any(|(seen, _)| *seen == y) {
            continue;
        }
        let d = super::wrap_signed(x - y as f64, length);
        let p = trapezoid_profile(s, d);
        if p > 0.0 {
            out.push((y, p));
        }
    }
    // At most two neurons overlap; the complement keeps the row exactly normalized
    // when the ramp is steep.
    if let [(_, a), (_, b)] = out.as_mut_slice() {
        *b = 1.0 - *a;
    }
}

fn nearest(codebook: &Codebook, geometry: Geometry, x: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (y, v) in codebook.vectors().iter().enumerate() {
        let d = geometry.squared_distance(x, v);
        if d < best_d {
            best_d = d;
            best = y;
        }
    }
    best
}

pub(crate) fn softmax_in_place(scores: &mut [f64]) {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        total += *s;
    }
    for s in scores.iter_mut() {
        *s /= total;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::density::torus_point;

    #[test]
    fn trapezoid_hard_cell_center() {
        let p = Posterior::trapezoid(0.0, 8).unwrap();
        assert_eq!(p.prob(&[3.0], 3).unwrap(), 1.0);
    }

    #[test]
    fn trapezoid_ramp_midpoint() {
        let p = Posterior::trapezoid(0.25, 8).unwrap();
        assert_eq!(p.prob(&[3.5], 3).unwrap(), 0.5);
        assert_eq!(p.prob(&[3.5], 4).unwrap(), 0.5);
    }

    #[test]
    fn trapezoid_wraps_around_the_ring() {
        let p = Posterior::trapezoid(0.25, 8).unwrap();
        let probs = p.probs(&[7.6]).unwrap();
        assert!((probs[0] - 0.7).abs() < 1e-12);
        assert!((probs[7] - 0.3).abs() < 1e-12);
        assert_eq!(p.probs(&[7.75]).unwrap()[0], 1.0);
    }

    #[test]
    fn hard_boundary_goes_to_lower_index() {
        let p = Posterior::trapezoid(0.0, 8).unwrap();
        assert_eq!(p.probs(&[2.5]).unwrap()[2], 1.0);
        assert_eq!(p.probs(&[7.5]).unwrap()[0], 1.0);
    }

    #[test]
    fn type3_fires_two_halves() {
        let p = Posterior::torus_type3(8).unwrap();
        let x = torus_point(1.0, -2.0);
        let probs = p.probs(&x).unwrap();
        let nz: Vec<_> = probs.iter().enumerate().filter(|(_, v)| **v != 0.0).collect();
        assert_eq!(nz.len(), 2);
        assert!(nz[0].0 < 4 && nz[1].0 >= 4);
        assert!(nz.iter().all(|(_, v)| **v == 0.5));
    }

    #[test]
    fn type2_requires_square() {
        assert!(Posterior::torus_type2(8).is_err());
        assert!(Posterior::torus_type3(7).is_err());
        assert!(Posterior::torus_type2(16).is_ok());
    }

    #[test]
    fn torus_cell_one_is_centred_on_zero_angle() {
        let p = Posterior::torus_type1(8, TorusAxis::A12).unwrap();
        assert_eq!(p.probs(&torus_point(0.3, 2.0)).unwrap()[0], 1.0);
        assert_eq!(p.probs(&torus_point(-0.3, 2.0)).unwrap()[0], 1.0);
        assert_eq!(p.probs(&torus_point(PI / 4.0, 2.0)).unwrap()[1], 1.0);
        let p = Posterior::torus_type2(16).unwrap();
        assert_eq!(p.probs(&torus_point(PI / 2.0, 0.1)).unwrap()[4], 1.0);
    }

    #[test]
    fn index_and_dimension_errors() {
        let p = Posterior::trapezoid(0.1, 4).unwrap();
        assert_eq!(p.prob(&[0.0], 4), Err(Error::IndexOutOfRange { index: 4, m: 4 }));
        assert!(matches!(p.prob(&[0.0, 1.0], 0), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn logits_param_roundtrip() {
        let m = LogitModel::affine(vec![vec![1.0, 2.0], vec![3.0, 4.0]], vec![5.0, 6.0]).unwrap();
        let p = m.params();
        assert_eq!(p, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(m.with_params(&p).unwrap(), m);
    }

    #[test]
    fn trapezoid_breakpoints_cover_ramps() {
        let d = InputDensity::uniform_ring(1.0, 4.0).unwrap();
        let p = Posterior::trapezoid(0.25, 4).unwrap();
        let b = p.breakpoints(&d);
        assert_eq!(b.len(), 1);
        assert!(b[0].iter().any(|v| (v - 0.25).abs() < 1e-15));
        assert!(b[0].iter().any(|v| (v - 3.25).abs() < 1e-15));
    }
}
