//! Closed-form stationary solutions used as oracles for the numeric pipeline.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::posterior::integer_sqrt;
use crate::model::{Codebook, Posterior, TorusAxis};
use crate::objective::format_float;

/// Ring trapezoid code values for overlap half-width `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapezoidForms {
    pub d1_per_neuron: f64,
    pub d2_per_unit_length: f64,
    pub total_per_unit_length: f64,
}

pub fn trapezoid_closed_forms(n: usize, p0: f64, s: f64) -> Result<TrapezoidForms> {
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    if !(p0.is_finite() && p0 > 0.0) {
        return Err(invalid("p0", "must be finite and positive"));
    }
    if !(0.0..=0.5).contains(&s) {
        return Err(invalid("s", "must lie in [0, 1/2]"));
    }
    let nf = n as f64;
    let ramp = (2.0 * s - 1.0) * (2.0 * s - 1.0);
    Ok(TrapezoidForms {
        d1_per_neuron: p0 / (6.0 * nf) * (1.0 + 4.0 * s * s),
        d2_per_unit_length: (nf - 1.0) * p0 / (6.0 * nf) * ramp,
        total_per_unit_length: p0 / (6.0 * nf) * (nf * ramp + 4.0 * s),
    })
}

/// Optimal overlap `s = (n-1)/(2n)` and the cost `(2n-1) p0 / (6 n^2)` there.
pub fn trapezoid_optimum(n: usize, p0: f64) -> Result<(f64, f64)> {
    trapezoid_closed_forms(n, p0, 0.0)?;
    let nf = n as f64;
    Ok(((nf - 1.0) / (2.0 * nf), (2.0 * nf - 1.0) * p0 / (6.0 * nf * nf)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TorusSolutionType {
    Type1,
    Type2,
    Type3,
}

impl TorusSolutionType {
    pub const ALL: [TorusSolutionType; 3] = [Self::Type1, Self::Type2, Self::Type3];

    /// Preference when costs tie: the factorial code first.
    fn tie_rank(self) -> u8 {
        match self {
            Self::Type3 => 0,
            Self::Type2 => 1,
            Self::Type1 => 2,
        }
    }

    pub fn check(self, m: usize) -> Result<()> {
        match self {
            _ if m == 0 => Err(invalid("m", "must be positive")),
            Self::Type2 if integer_sqrt(m).is_none() => Err(invalid("m", format!("type 2 needs a perfect square, got {m}"))),
            Self::Type3 if !m.is_multiple_of(2) => Err(invalid("m", format!("type 3 needs an even count, got {m}"))),
            _ => Ok(()),
        }
    }

    /// The posterior family realizing this solution type (type 1 on the first circle).
    pub fn posterior(self, m: usize) -> Result<Posterior> {
        match self {
            Self::Type1 => Posterior::torus_type1(m, TorusAxis::A12),
            Self::Type2 => Posterior::torus_type2(m),
            Self::Type3 => Posterior::torus_type3(m),
        }
    }
}

impl fmt::Display for TorusSolutionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Type1 => "type1",
            Self::Type2 => "type2",
            Self::Type3 => "type3",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for TorusSolutionType {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "type1" | "1" => Ok(Self::Type1),
            "type2" | "2" => Ok(Self::Type2),
            "type3" | "3" => Ok(Self::Type3),
            other => Err(invalid("kind", format!("unknown torus solution type `{other}`"))),
        }
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    Ok(())
}

/// Stationary `D1 + D2` of each symmetric torus code.
pub fn torus_cost(kind: TorusSolutionType, m: usize, n: usize) -> Result<f64> {
    kind.check(m)?;
    check_n(n)?;
    let mf = m as f64;
    let nf = n as f64;
    let pi2 = PI * PI;
    Ok(match kind {
        TorusSolutionType::Type1 => 4.0 - 2.0 * mf * mf / pi2 * (PI / mf).sin().powi(2),
        TorusSolutionType::Type2 => 4.0 - 4.0 * mf / pi2 * (PI / mf.sqrt()).sin().powi(2),
        TorusSolutionType::Type3 => 4.0 - nf * mf * mf / ((nf + 1.0) * pi2) * (2.0 * PI / mf).sin().powi(2),
    })
}

/// Centroid radius of an arc of half-width `pi / k` on the unit circle.
fn arc_centroid(k: f64) -> f64 {
    k / PI * (PI / k).sin()
}

/// Stationary `x'(1)` (the cell centred on zero angle).
pub fn torus_centroid(kind: TorusSolutionType, m: usize, n: usize) -> Result<[f64; 4]> {
    kind.check(m)?;
    check_n(n)?;
    let mf = m as f64;
    let nf = n as f64;
    Ok(match kind {
        TorusSolutionType::Type1 => [arc_centroid(mf), 0.0, 0.0, 0.0],
        TorusSolutionType::Type2 => {
            let c = arc_centroid(mf.sqrt());
            [c, 0.0, c, 0.0]
        }
        TorusSolutionType::Type3 => [2.0 * nf / (nf + 1.0) * arc_centroid(mf / 2.0), 0.0, 0.0, 0.0],
    })
}

/// Every stationary codevector, obtained by rotating `x'(1)` through each cell offset.
pub fn torus_codebook(kind: TorusSolutionType, m: usize, n: usize) -> Result<Codebook> {
    let first = torus_centroid(kind, m, n)?;
    let rot = |r: f64, k: usize, cells: usize| {
        let a = 2.0 * PI * k as f64 / cells as f64;
        (r * a.cos(), r * a.sin())
    };
    let vectors = match kind {
        TorusSolutionType::Type1 => (0..m)
            .map(|y| {
                let (c, s) = rot(first[0], y, m);
                vec![c, s, 0.0, 0.0]
            })
            .collect(),
        TorusSolutionType::Type2 => {
            let side = integer_sqrt(m).unwrap_or(1);
            (0..m)
                .map(|y| {
                    let (c1, s1) = rot(first[0], y / side, side);
                    let (c2, s2) = rot(first[2], y % side, side);
                    vec![c1, s1, c2, s2]
                })
                .collect()
        }
        TorusSolutionType::Type3 => {
            let half = m / 2;
            (0..m)
                .map(|y| {
                    if y < half {
                        let (c, s) = rot(first[0], y, half);
                        vec![c, s, 0.0, 0.0]
                    } else {
                        let (c, s) = rot(first[0], y - half, half);
                        vec![0.0, 0.0, c, s]
                    }
                })
                .collect()
        }
    };
    Codebook::new(vectors)
}

/// Solution types sorted by ascending cost (most stable first).
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityOrder {
    pub order: Vec<TorusSolutionType>,
    pub costs: Vec<(TorusSolutionType, f64)>,
    /// Adjacent pairs in `order` whose costs agree to within rounding.
    pub ties: Vec<(TorusSolutionType, TorusSolutionType)>,
}

/// Relative tolerance under which two costs count as tied.
pub const TIE_TOL: f64 = 1e-12;

pub fn order_by_cost(costs: &[(TorusSolutionType, f64)]) -> StabilityOrder {
    let mut sorted = costs.to_vec();
    let tied = |a: f64, b: f64| (a - b).abs() <= TIE_TOL * a.abs().max(b.abs()).max(1.0);
    sorted.sort_by(|a, b| {
        if tied(a.1, b.1) {
            a.0.tie_rank().cmp(&b.0.tie_rank())
        } else {
            a.1.total_cmp(&b.1)
        }
    });
    let ties = sorted
        .windows(2)
        .filter(|w| tied(w[0].1, w[1].1))
        .map(|w| (w[0].0, w[1].0))
        .collect();
    StabilityOrder {
        order: sorted.iter().map(|(k, _)| *k).collect(),
        costs: costs.to_vec(),
        ties,
    }
}

/// Closed-form stability ranking; `m` must be even and a perfect square.
pub fn stability_order(m: usize, n: usize) -> Result<StabilityOrder> {
    let costs = TorusSolutionType::ALL
        .iter()
        .map(|&k| torus_cost(k, m, n).map(|c| (k, c)))
        .collect::<Result<Vec<_>>>()?;
    Ok(order_by_cost(&costs))
}

pub const ORACLE_CSV_HEADER: &str = "kind,M,n,cost,c1,c2,c3,c4";

pub fn oracle_csv_row(kind: TorusSolutionType, m: usize, n: usize) -> Result<String> {
    let cost = torus_cost(kind, m, n)?;
    let c = torus_centroid(kind, m, n)?;
    Ok(format!(
        "{kind},{m},{n},{},{},{},{},{}",
        format_float(cost),
        format_float(c[0]),
        format_float(c[1]),
        format_float(c[2]),
        format_float(c[3])
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use TorusSolutionType::*;

    #[test]
    fn trapezoid_hard_quantizer() {
        let f = trapezoid_closed_forms(1, 1.0, 0.0).unwrap();
        assert_relative_eq!(f.total_per_unit_length, 1.0 / 6.0, max_relative = 1e-15);
    }

    #[test]
    fn trapezoid_at_n2_optimum() {
        let f = trapezoid_closed_forms(2, 1.0, 0.25).unwrap();
        assert_relative_eq!(f.total_per_unit_length, 0.125, max_relative = 1e-15);
        assert_relative_eq!(f.d1_per_neuron, 1.25 / 12.0, max_relative = 1e-15);
        assert_relative_eq!(f.d2_per_unit_length, 0.25 / 12.0, max_relative = 1e-15);
        assert_relative_eq!(f.d1_per_neuron + f.d2_per_unit_length, f.total_per_unit_length, max_relative = 1e-15);
    }

    #[test]
    fn trapezoid_large_n_limit() {
        let n = 1_000_000;
        let f = trapezoid_closed_forms(n, 1.0, 0.5).unwrap();
        assert_relative_eq!(f.total_per_unit_length, 1.0 / (3.0 * n as f64), max_relative = 1e-12);
    }

    #[test]
    fn trapezoid_domain_errors() {
        assert!(trapezoid_closed_forms(0, 1.0, 0.1).is_err());
        assert!(trapezoid_closed_forms(1, 0.0, 0.1).is_err());
        assert!(trapezoid_closed_forms(1, 1.0, 0.6).is_err());
    }

    #[test]
    fn closed_form_optimum_minimizes_the_total() {
        for n in 1..20 {
            let (s, v) = trapezoid_optimum(n, 1.0).unwrap();
            assert_relative_eq!(trapezoid_closed_forms(n, 1.0, s).unwrap().total_per_unit_length, v, max_relative = 1e-14);
            for k in 0..=50 {
                let t = k as f64 / 100.0;
                assert!(trapezoid_closed_forms(n, 1.0, t).unwrap().total_per_unit_length >= v - 1e-15);
            }
        }
    }

    #[test]
    fn torus_cost_values() {
        assert_relative_eq!(torus_cost(Type1, 8, 3).unwrap(), 2.100_717_593, epsilon = 1e-9);
        let t2 = torus_cost(Type2, 4, 1).unwrap();
        assert_relative_eq!(t2, 4.0 - 16.0 / (PI * PI), max_relative = 1e-14);
        assert_relative_eq!(t2, torus_cost(Type1, 4, 1).unwrap(), max_relative = 1e-14);
        assert_relative_eq!(torus_cost(Type3, 8, 1).unwrap(), 4.0 - 16.0 / (PI * PI), max_relative = 1e-14);
        assert_relative_eq!(torus_cost(Type3, 4, 1).unwrap(), 4.0 - 8.0 / (PI * PI), max_relative = 1e-14);
    }

    #[test]
    fn torus_centroid_values() {
        assert_relative_eq!(torus_centroid(Type1, 8, 1).unwrap()[0], 8.0 / PI * (PI / 8.0).sin(), max_relative = 1e-15);
        assert_relative_eq!(torus_centroid(Type1, 8, 1).unwrap()[0], 0.974_495_358, epsilon = 1e-9);
        let c = torus_centroid(Type2, 16, 1).unwrap();
        assert_relative_eq!(c[0], 0.900_316_316, epsilon = 1e-9);
        assert_eq!(c[0], c[2]);
        assert_relative_eq!(torus_centroid(Type3, 8, 3).unwrap()[0], 1.350_474_474, epsilon = 1e-9);
        // n = 1e6 sits 1.8e-6 below the n -> infinity limit 1.8006326
        assert_relative_eq!(torus_centroid(Type3, 8, 1_000_000).unwrap()[0], 1.800_632_6, epsilon = 5e-6);
    }

    #[test]
    fn invalid_combinations() {
        assert!(torus_cost(Type2, 8, 1).is_err());
        assert!(torus_cost(Type3, 9, 1).is_err());
        assert!(torus_cost(Type1, 8, 0).is_err());
        assert!(stability_order(9, 1).is_err());
    }

    #[test]
    fn stability_limits() {
        assert_eq!(stability_order(16, 1000).unwrap().order, vec![Type3, Type2, Type1]);
        assert_eq!(stability_order(400, 2).unwrap().order, vec![Type2, Type3, Type1]);
    }

    #[test]
    fn stability_reports_exact_tie() {
        let s = stability_order(4, 1).unwrap();
        assert_eq!(s.order, vec![Type2, Type1, Type3]);
        assert_eq!(s.ties, vec![(Type2, Type1)]);
        let t3 = s.costs.iter().find(|(k, _)| *k == Type3).unwrap().1;
        assert_relative_eq!(t3, 3.189_43, epsilon = 1e-5);
    }

    #[test]
    fn type3_cost_decreases_with_n() {
        for m in [6, 8, 16, 100] {
            let mut prev = f64::INFINITY;
            for n in 1..200 {
                let c = torus_cost(Type3, m, n).unwrap();
                assert!(c < prev);
                prev = c;
            }
        }
    }

    #[test]
    fn type1_and_type2_independent_of_n() {
        for n in [1, 2, 10, 1000] {
            assert_eq!(torus_cost(Type1, 16, n).unwrap(), torus_cost(Type1, 16, 1).unwrap());
            assert_eq!(torus_cost(Type2, 16, n).unwrap(), torus_cost(Type2, 16, 1).unwrap());
        }
    }

    #[test]
    fn large_m_limits() {
        let m = 10_000;
        assert!(torus_cost(Type2, m, 3).unwrap().abs() < 2e-3);
        assert!((torus_cost(Type1, m, 3).unwrap() - 2.0).abs() < 1e-3);
        for n in [1, 2, 5] {
            let nf = n as f64;
            assert!((torus_cost(Type3, m, n).unwrap() - (4.0 - 4.0 * nf / (nf + 1.0))).abs() < 1e-3);
        }
    }

    #[test]
    fn costs_stay_in_range() {
        for m in [4usize, 16, 36, 64, 100] {
            for n in [1, 2, 7, 1000] {
                for k in TorusSolutionType::ALL {
                    let c = torus_cost(k, m, n).unwrap();
                    assert!((0.0..=4.0).contains(&c), "{k} {m} {n}: {c}");
                }
            }
        }
    }

    #[test]
    fn rotated_codebook_starts_at_closed_form() {
        for k in TorusSolutionType::ALL {
            let cb = torus_codebook(k, 16, 4).unwrap();
            assert_eq!(cb.vector(0), torus_centroid(k, 16, 4).unwrap().as_slice());
        }
    }
}
