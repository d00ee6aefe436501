use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::analytic::{torus_centroid, torus_codebook, trapezoid_optimum, TorusSolutionType};
use crate::model::{InputPoint, TorusAxis};
use crate::objective::grad_codebook;

fn ring(length: f64) -> InputDensity {
    InputDensity::uniform_ring(1.0, length).unwrap()
}

fn solve(density: &InputDensity, posterior: &Posterior, n: usize) -> FixedPointSolution {
    let f = FiringModel::independent(n).unwrap();
    solve_codebook_fixed_point(density, posterior, f, &ExpectationEngine::quadrature(), &FixedPointConfig::default())
        .unwrap()
}

fn ring_sup(a: &Codebook, b: &Codebook, length: f64) -> f64 {
    a.vectors()
        .iter()
        .zip(b.vectors())
        .map(|(u, v)| crate::model::wrap_signed(u[0] - v[0], length).abs())
        .fold(0.0, f64::max)
}

fn sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn type1_centroid_on_the_torus() {
    let p = Posterior::torus_type1(8, TorusAxis::A12).unwrap();
    for n in [1, 2, 5] {
        let sol = solve(&InputDensity::Torus2, &p, n);
        let expected = [0.974495358, 0.0, 0.0, 0.0];
        assert!(sup(sol.codebook.vector(0), &expected) < 1e-8, "n={n}: {:?}", sol.codebook.vector(0));
    }
}

#[test]
fn type3_centroid_on_the_torus() {
    let p = Posterior::torus_type3(8).unwrap();
    let sol = solve(&InputDensity::Torus2, &p, 3);
    assert!((sol.codebook.vector(0)[0] - 1.350474474).abs() < 1e-8);
    assert!(sup(sol.codebook.vector(0), &torus_centroid(TorusSolutionType::Type3, 8, 3).unwrap()) < 1e-8);
}

#[test]
fn torus_solutions_are_rotations_of_the_first_vector() {
    for kind in TorusSolutionType::ALL {
        let m = if kind == TorusSolutionType::Type2 { 16 } else { 8 };
        let p = kind.posterior(m).unwrap();
        for n in [1, 3] {
            let sol = solve(&InputDensity::Torus2, &p, n);
            let expected = torus_codebook(kind, m, n).unwrap();
            assert!(sol.codebook.sup_distance(&expected) < 1e-8, "{kind} n={n}");
        }
    }
}

#[test]
fn single_event_fixed_point_is_the_conditional_mean() {
    let density = InputDensity::empirical(
        [[0.1, 0.2], [0.5, -0.3], [1.2, 0.8], [-0.4, 0.6], [0.9, 0.1], [-1.0, -1.0]]
            .iter()
            .map(|p| InputPoint::new(p.to_vec()))
            .collect(),
    )
    .unwrap();
    let model = crate::model::LogitModel::affine(vec![vec![1.0, 0.2], vec![-0.5, 0.7], vec![0.1, -0.9]], vec![0.0, 0.3, -0.1])
        .unwrap();
    let p = Posterior::Logits(model);
    let e = ExpectationEngine::Enumerate;
    let f = FiringModel::independent(1).unwrap();
    let sol = solve_codebook_fixed_point(&density, &p, f, &e, &FixedPointConfig::default()).unwrap();
    let nodes = e.nodes(&density, Some(&p)).unwrap();
    let (means, mass) = conditional_means(&density, &p, &nodes);
    assert!(mass.iter().all(|m| *m > 0.0));
    assert!(sol.codebook.sup_distance(&means) < 1e-12);
}

#[test]
fn trapezoid_optimum_has_the_integer_grid_as_fixed_point() {
    for n in [1, 2, 4] {
        let (s, _) = trapezoid_optimum(n, 1.0).unwrap();
        let p = Posterior::trapezoid(s, 8).unwrap();
        let sol = solve(&ring(8.0), &p, n);
        assert!(ring_sup(&sol.codebook, &Codebook::integer_grid(8), 8.0) < 1e-9, "n={n}");
    }
}

#[test]
fn gradient_vanishes_at_the_solution() {
    let cfg = FixedPointConfig::default();
    let cases: Vec<(InputDensity, Posterior, usize)> = vec![
        (ring(8.0), Posterior::trapezoid(0.3, 8).unwrap(), 3),
        (InputDensity::Torus2, Posterior::torus_type3(8).unwrap(), 3),
        (InputDensity::Torus2, Posterior::torus_type2(16).unwrap(), 2),
    ];
    for (d, p, n) in cases {
        let f = FiringModel::independent(n).unwrap();
        let e = ExpectationEngine::quadrature();
        let sol = solve_codebook_fixed_point(&d, &p, f, &e, &cfg).unwrap();
        let g = grad_codebook(&d, &sol.codebook, &p, f, &e).unwrap();
        assert!(max_gradient_norm(&g) <= 10.0 * cfg.tol, "{}", max_gradient_norm(&g));
    }
}

#[test]
fn restarting_from_the_solution_changes_nothing() {
    let d = InputDensity::Torus2;
    let p = Posterior::torus_type3(8).unwrap();
    let f = FiringModel::independent(4).unwrap();
    let e = ExpectationEngine::quadrature();
    let cfg = FixedPointConfig::default();
    let first = solve_codebook_fixed_point(&d, &p, f, &e, &cfg).unwrap();
    let again = solve_codebook_fixed_point_from(&d, &p, f, &e, &cfg, first.codebook.clone()).unwrap();
    assert!(again.codebook.sup_distance(&first.codebook) <= cfg.tol);
    assert_eq!(again.iterations, 1);
}

#[test]
fn picard_converges_for_single_event() {
    let p = Posterior::trapezoid(0.2, 8).unwrap();
    let f = FiringModel::independent(1).unwrap();
    let cfg = FixedPointConfig {
        method: FixedPointMethod::Picard,
        ..FixedPointConfig::default()
    };
    let init = Codebook::new((0..8).map(|y| vec![y as f64 + 0.3]).collect()).unwrap();
    let sol = solve_codebook_fixed_point_from(&ring(8.0), &p, f, &ExpectationEngine::quadrature(), &cfg, init).unwrap();
    assert!(ring_sup(&sol.codebook, &Codebook::integer_grid(8), 8.0) < 1e-9);
    assert!(!sol.trace.is_empty());
    assert!(trace_csv(&sol.trace).starts_with("iteration,sup_change\n"));
}

#[test]
fn picard_with_damping_converges_for_two_events() {
    let p = Posterior::trapezoid(0.25, 8).unwrap();
    let f = FiringModel::independent(2).unwrap();
    let cfg = FixedPointConfig {
        method: FixedPointMethod::Picard,
        damping: 0.5,
        max_iters: 2000,
        ..FixedPointConfig::default()
    };
    let init = Codebook::new((0..8).map(|y| vec![y as f64 + 0.1 * (y % 3) as f64]).collect()).unwrap();
    let sol = solve_codebook_fixed_point_from(&ring(8.0), &p, f, &ExpectationEngine::quadrature(), &cfg, init).unwrap();
    let newton = solve(&ring(8.0), &p, 2);
    assert!(ring_sup(&sol.codebook, &newton.codebook, 8.0) < 1e-8);
}

#[test]
fn unit_that_never_fires_is_left_in_place() {
    let density = InputDensity::empirical(vec![vec![0.0].into(), vec![1.0].into(), vec![2.0].into()]).unwrap();
    let init = Codebook::new(vec![vec![0.2], vec![1.9], vec![50.0]]).unwrap();
    let p = Posterior::winner_take_all(init.clone(), Geometry::Euclidean);
    let f = FiringModel::independent(2).unwrap();
    let sol = solve_codebook_fixed_point_from(
        &density,
        &p,
        f,
        &ExpectationEngine::Enumerate,
        &FixedPointConfig::default(),
        init,
    )
    .unwrap();
    assert_eq!(sol.dead_units, vec![2]);
    assert_eq!(sol.codebook.vector(2), &[50.0]);
    assert!((sol.codebook.vector(0)[0] - 0.5).abs() < 1e-12);
    assert!((sol.codebook.vector(1)[0] - 2.0).abs() < 1e-12);
}

#[test]
fn non_convergence_is_reported() {
    let p = Posterior::trapezoid(0.25, 8).unwrap();
    let f = FiringModel::independent(3).unwrap();
    let cfg = FixedPointConfig {
        method: FixedPointMethod::Picard,
        max_iters: 3,
        ..FixedPointConfig::default()
    };
    let init = Codebook::new((0..8).map(|y| vec![y as f64 + 0.25]).collect()).unwrap();
    let r = solve_codebook_fixed_point_from(&ring(8.0), &p, f, &ExpectationEngine::quadrature(), &cfg, init);
    assert!(matches!(r, Err(Error::NotConverged { iters: 3, .. })));
}

#[test]
fn bad_config_is_rejected() {
    let p = Posterior::trapezoid(0.25, 8).unwrap();
    let f = FiringModel::independent(2).unwrap();
    for cfg in [
        FixedPointConfig { tol: 0.0, ..FixedPointConfig::default() },
        FixedPointConfig { damping: 1.5, ..FixedPointConfig::default() },
        FixedPointConfig { max_iters: 0, ..FixedPointConfig::default() },
    ] {
        assert!(solve_codebook_fixed_point(&ring(8.0), &p, f, &ExpectationEngine::quadrature(), &cfg).is_err());
    }
}

#[test]
fn residual_vanishes_at_the_optimal_trapezoid() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for n in [2, 3, 10] {
        let (s, _) = trapezoid_optimum(n, 1.0).unwrap();
        let p = Posterior::trapezoid(s, 8).unwrap();
        let f = FiringModel::independent(n).unwrap();
        for _ in 0..10 {
            let x = [rng.random::<f64>() * 8.0];
            let r = posterior_stationarity_residual(&ring(8.0), &Codebook::integer_grid(8), &p, f, &x).unwrap();
            assert!(r.iter().all(|v| v.abs() <= 1e-8), "n={n} x={x:?} {r:?}");
        }
    }
}

#[test]
fn residual_is_nonzero_away_from_the_optimum() {
    let p = Posterior::trapezoid(0.1, 8).unwrap();
    let f = FiringModel::independent(2).unwrap();
    let r = posterior_stationarity_residual(&ring(8.0), &Codebook::integer_grid(8), &p, f, &[2.45]).unwrap();
    assert!(r.iter().any(|v| v.abs() > 1e-3));
}

#[test]
fn residual_is_exactly_zero_where_a_neuron_is_silent() {
    let p = Posterior::trapezoid(0.1, 8).unwrap();
    let f = FiringModel::independent(2).unwrap();
    let r = posterior_stationarity_residual(&ring(8.0), &Codebook::integer_grid(8), &p, f, &[2.45]).unwrap();
    for (y, v) in r.iter().enumerate() {
        if p.prob(&[2.45], y).unwrap() == 0.0 {
            assert_eq!(*v, 0.0);
        }
    }
}

#[test]
fn hard_quantizer_at_cell_centre_has_zero_residual() {
    let p = Posterior::trapezoid(0.0, 8).unwrap();
    let f = FiringModel::independent(1).unwrap();
    let r = posterior_stationarity_residual(&ring(8.0), &Codebook::integer_grid(8), &p, f, &[5.0]).unwrap();
    assert!(r.iter().all(|v| *v == 0.0));
}

#[test]
fn residual_needs_positive_density() {
    let p = Posterior::torus_type2(16).unwrap();
    let cb = torus_codebook(TorusSolutionType::Type2, 16, 1).unwrap();
    let f = FiringModel::independent(1).unwrap();
    let off = [3.0, 0.0, 0.0, 1.0];
    assert!(matches!(
        posterior_stationarity_residual(&InputDensity::Torus2, &cb, &p, f, &off),
        Err(Error::ZeroDensity)
    ));
    assert!(posterior_stationarity_residual(&InputDensity::Torus2, &cb, &p, f, &[1.0]).is_err());
}

#[test]
fn golden_section_finds_the_trapezoid_optimum() {
    let e = ExpectationEngine::quadrature();
    let (s1, v1) = optimize_trapezoid_s(&ring(8.0), FiringModel::independent(1).unwrap(), &e, 1e-6).unwrap();
    assert_eq!(s1, 0.0);
    assert!((v1 - 1.0 / 6.0).abs() < 1e-6);
    let (s2, v2) = optimize_trapezoid_s(&ring(8.0), FiringModel::independent(2).unwrap(), &e, 1e-6).unwrap();
    assert!((s2 - 0.25).abs() < 1e-3);
    assert!((v2 - 0.125).abs() < 1e-6);
    let (s10, v10) = optimize_trapezoid_s(&ring(8.0), FiringModel::independent(10).unwrap(), &e, 1e-6).unwrap();
    assert!((s10 - 0.45).abs() < 1e-3);
    assert!((v10 - 19.0 / 600.0).abs() < 1e-6);
}

#[test]
fn golden_section_needs_integer_ring() {
    let e = ExpectationEngine::quadrature();
    let f = FiringModel::independent(2).unwrap();
    assert!(optimize_trapezoid_s(&ring(7.5), f, &e, 1e-6).is_err());
    assert!(optimize_trapezoid_s(&InputDensity::Torus2, f, &e, 1e-6).is_err());
}
