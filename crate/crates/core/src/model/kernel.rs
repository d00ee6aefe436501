use serde::{Deserialize, Serialize};

use super::NORMALIZATION_TOL;
use crate::error::{invalid, Error, Result};

fn check_stochastic(name: &'static str, rows: &[Vec<f64>], cols: usize) -> Result<()> {
    for (i, row) in rows.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::DimensionMismatch {
                expected: cols,
                got: row.len(),
            });
        }
        if row.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
            return Err(invalid(name, format!("row {i} has a negative or non-finite entry")));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(invalid(name, format!("row {i} sums to {sum}")));
        }
    }
    Ok(())
}

/// Row-stochastic `M x M` matrix with entry `[y][y']` equal to `Pr(y'|y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelRepr", into = "KernelRepr")]
pub struct NeighborhoodKernel {
    rows: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelRepr {
    m: usize,
    rows: Vec<Vec<f64>>,
}

impl TryFrom<KernelRepr> for NeighborhoodKernel {
    type Error = Error;
    fn try_from(r: KernelRepr) -> Result<Self> {
        if r.rows.len() != r.m {
            return Err(Error::DimensionMismatch {
                expected: r.m,
                got: r.rows.len(),
            });
        }
        NeighborhoodKernel::from_rows(r.rows)
    }
}

impl From<NeighborhoodKernel> for KernelRepr {
    fn from(k: NeighborhoodKernel) -> Self {
        KernelRepr {
            m: k.rows.len(),
            rows: k.rows,
        }
    }
}

impl NeighborhoodKernel {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(invalid("rows", "kernel needs at least one neuron"));
        }
        check_stochastic("rows", &rows, rows.len())?;
        Ok(Self { rows })
    }

    pub fn identity(m: usize) -> Self {
        let rows = (0..m)
            .map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self { rows }
    }

    pub fn uniform(m: usize) -> Self {
        Self {
            rows: vec![vec![1.0 / m as f64; m]; m],
        }
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.rows[y]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub(crate) fn from_rows_unchecked(rows: Vec<Vec<f64>>) -> Self {
        Self { rows }
    }
}

/// Two stochastic maps through a hidden layer: `Pr(z|y)` and `Pr(y'|z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LayerRepr", into = "LayerRepr")]
pub struct LayerKernel {
    forward: Vec<Vec<f64>>,
    backward: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerRepr {
    m_y: usize,
    m_z: usize,
    forward: Vec<Vec<f64>>,
    backward: Vec<Vec<f64>>,
}

impl TryFrom<LayerRepr> for LayerKernel {
    type Error = Error;
    fn try_from(r: LayerRepr) -> Result<Self> {
        let k = LayerKernel::new(r.forward, r.backward)?;
        if k.m_y() != r.m_y || k.m_z() != r.m_z {
            return Err(invalid("m_y/m_z", "declared sizes do not match the matrices"));
        }
        Ok(k)
    }
}

impl From<LayerKernel> for LayerRepr {
    fn from(k: LayerKernel) -> Self {
        LayerRepr {
            m_y: k.m_y(),
            m_z: k.m_z(),
            forward: k.forward,
            backward: k.backward,
        }
    }
}

impl LayerKernel {
    /// `forward` is `M_y x M_z` (`Pr(z|y)`), `backward` is `M_z x M_y` (`Pr(y'|z)`).
    pub fn new(forward: Vec<Vec<f64>>, backward: Vec<Vec<f64>>) -> Result<Self> {
        if forward.is_empty() || backward.is_empty() {
            return Err(invalid("forward", "layers must be non-empty"));
        }
        let m_y = forward.len();
        let m_z = backward.len();
        check_stochastic("forward", &forward, m_z)?;
        check_stochastic("backward", &backward, m_y)?;
        Ok(Self { forward, backward })
    }

    /// Hidden units are sliding windows of `width` consecutive neurons; each
    /// neuron reaches every window that contains it, and each window reaches
    /// its members uniformly.
    pub fn sliding_window(m: usize, width: usize) -> Result<Self> {
        if width == 0 || width > m {
            return Err(invalid("width", format!("must lie in 1..={m}")));
        }
        let m_z = m - width + 1;
        let mut forward = vec![vec![0.0; m_z]; m];
        for (y, row) in forward.iter_mut().enumerate() {
            let lo = y.saturating_sub(width - 1);
            let hi = y.min(m_z - 1);
            let count = (hi - lo + 1) as f64;
            row[lo..=hi].fill(1.0 / count);
        }
        let mut backward = vec![vec![0.0; m]; m_z];
        for (z, row) in backward.iter_mut().enumerate() {
            row[z..z + width].fill(1.0 / width as f64);
        }
        Self::new(forward, backward)
    }

    /// One hidden unit per neuron, reaching the neurons within `half_width`
    /// of it (truncated at the ends of the line); each neuron reaches every
    /// hidden unit whose window contains it. Both directions are uniform.
    pub fn centered_windows(m: usize, half_width: usize) -> Result<Self> {
        if m == 0 {
            return Err(invalid("m", "must be at least 1"));
        }
        let window = |z: usize| z.saturating_sub(half_width)..=(z + half_width).min(m - 1);
        let mut forward = vec![vec![0.0; m]; m];
        for (y, row) in forward.iter_mut().enumerate() {
            let zs = window(y);
            let count = zs.clone().count() as f64;
            for z in zs {
                row[z] = 1.0 / count;
            }
        }
        let backward = forward.clone();
        Self::new(forward, backward)
    }

    pub fn m_y(&self) -> usize {
        self.forward.len()
    }

    pub fn m_z(&self) -> usize {
        self.backward.len()
    }

    pub fn forward(&self) -> &[Vec<f64>] {
        &self.forward
    }

    pub fn backward(&self) -> &[Vec<f64>] {
        &self.backward
    }
}
