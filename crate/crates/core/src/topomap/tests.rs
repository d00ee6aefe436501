use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn line(values: &[f64]) -> Codebook {
    Codebook::new(values.iter().map(|v| vec![*v]).collect()).unwrap()
}

fn unit_interval() -> InputDensity {
    InputDensity::empirical((0..1000).map(|i| InputPoint::new(vec![(i as f64 + 0.5) / 1000.0])).collect()).unwrap()
}

fn identity_state(codebook: Codebook, step: f64, decay: f64) -> TopoMapState {
    let m = codebook.m();
    TopoMapState::new(codebook, NeighborhoodKernel::identity(m), step, decay).unwrap()
}

#[test]
fn identity_layers_compose_to_identity() {
    let id: Vec<Vec<f64>> = NeighborhoodKernel::identity(4).rows().to_vec();
    let k = compose_kernel(&LayerKernel::new(id.clone(), id).unwrap());
    assert_eq!(k, NeighborhoodKernel::identity(4));
}

#[test]
fn paired_hidden_units_give_block_kernel() {
    let forward = vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]];
    let backward = vec![vec![0.5, 0.5, 0.0, 0.0], vec![0.0, 0.0, 0.5, 0.5]];
    let k = compose_kernel(&LayerKernel::new(forward, backward).unwrap());
    let expected = [
        [0.5, 0.5, 0.0, 0.0],
        [0.5, 0.5, 0.0, 0.0],
        [0.0, 0.0, 0.5, 0.5],
        [0.0, 0.0, 0.5, 0.5],
    ];
    for (row, e) in k.rows().iter().zip(expected) {
        assert_eq!(row.as_slice(), e.as_slice());
    }
}

#[test]
fn composed_rows_are_stochastic() {
    for layer in [
        LayerKernel::sliding_window(9, 3).unwrap(),
        LayerKernel::centered_windows(8, 2).unwrap(),
        LayerKernel::centered_windows(5, 7).unwrap(),
    ] {
        let k = compose_kernel(&layer);
        for row in k.rows() {
            assert!(row.iter().all(|v| *v >= 0.0));
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn kernel_weighted_encoder_example() {
    let kernel =
        NeighborhoodKernel::from_rows(vec![vec![0.8, 0.2, 0.0], vec![0.1, 0.8, 0.1], vec![0.0, 0.2, 0.8]]).unwrap();
    let state = TopoMapState::new(line(&[0.0, 1.0, 2.0]), kernel, 0.1, 1.0).unwrap();
    assert_eq!(encode(&state, &[0.0]).unwrap(), 0);
    assert_eq!(encode(&state, &[2.0]).unwrap(), 2);
}

#[test]
fn encoder_ties_go_to_lower_index() {
    let state = identity_state(line(&[0.0, 1.0]), 0.1, 1.0);
    assert_eq!(encode(&state, &[0.5]).unwrap(), 0);
    assert_eq!(encode_nearest(&state.codebook, &[0.5]).unwrap(), 0);
}

#[test]
fn identity_kernel_encoder_is_nearest_neighbour() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cb = Codebook::new((0..6).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect()).unwrap();
    let state = identity_state(cb, 0.1, 1.0);
    for _ in 0..1000 {
        let x = [rng.random::<f64>() * 1.4 - 0.2, rng.random::<f64>() * 1.4 - 0.2];
        assert_eq!(encode(&state, &x).unwrap(), encode_nearest(&state.codebook, &x).unwrap());
    }
    let probes: Vec<InputPoint> = (0..50).map(|i| InputPoint::new(vec![i as f64 / 50.0, 0.3])).collect();
    assert_eq!(encoder_disagreement(&state, &probes).unwrap(), 0.0);
}

#[test]
fn wrong_dimension_is_rejected() {
    let state = identity_state(line(&[0.0, 1.0]), 0.1, 1.0);
    assert!(encode(&state, &[0.0, 1.0]).is_err());
    assert!(train_step(&state, &[]).is_err());
}

#[test]
fn identity_step_moves_only_the_winner() {
    let state = identity_state(line(&[0.0, 1.0, 2.0]), 0.25, 1.0);
    let next = train_step(&state, &[1.4]).unwrap();
    assert_eq!(next.codebook.vector(0), &[0.0]);
    assert_eq!(next.codebook.vector(1), &[1.0 + 0.25 * 0.4]);
    assert_eq!(next.codebook.vector(2), &[2.0]);
    assert_eq!(next.kernel, state.kernel);
    let before = (1.4f64 - 1.0).powi(2);
    let after = (1.4 - next.codebook.vector(1)[0]).powi(2);
    assert!(after < before);
}

#[test]
fn zero_step_leaves_state_unchanged() {
    let kernel = NeighborhoodKernel::uniform(3);
    let state = TopoMapState::new(line(&[0.0, 1.0, 2.0]), kernel, 0.0, 1.0).unwrap();
    assert_eq!(train_step(&state, &[0.7]).unwrap(), state);
}

#[test]
fn uniform_kernel_moves_every_vector_equally() {
    let kernel = NeighborhoodKernel::uniform(4);
    let cb = line(&[0.0, 1.0, 2.0, 3.0]);
    let state = TopoMapState::new(cb.clone(), kernel, 0.4, 1.0).unwrap();
    let x = 1.7;
    let next = train_step(&state, &[x]).unwrap();
    for y in 0..4 {
        let v = cb.vector(y)[0];
        assert!((next.codebook.vector(y)[0] - (v + 0.1 * (x - v))).abs() < 1e-15);
    }
}

#[test]
fn invalid_states_are_rejected() {
    let cb = line(&[0.0, 1.0]);
    assert!(TopoMapState::new(cb.clone(), NeighborhoodKernel::identity(3), 0.1, 1.0).is_err());
    assert!(TopoMapState::new(cb.clone(), NeighborhoodKernel::identity(2), -0.1, 1.0).is_err());
    assert!(TopoMapState::new(cb.clone(), NeighborhoodKernel::identity(2), 0.1, 0.0).is_err());
    assert!(TopoMapState::new(cb, NeighborhoodKernel::identity(2), 0.1, 1.5).is_err());
}

/// Plain online k-means with the same sample stream, written out directly.
fn online_kmeans(init: &Codebook, density: &InputDensity, step: f64, decay: f64, epochs: usize, per_epoch: usize, seed: u64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let validation = validation_sample(density, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cb: Vec<Vec<f64>> = init.vectors().to_vec();
    let mut eps = step;
    let mut trace = Vec::new();
    for _ in 0..epochs {
        for x in density.sample_with(&mut rng, per_epoch).unwrap() {
            let x = x.as_slice();
            let dist = |v: &[f64]| v.iter().zip(x).map(|(a, b)| (b - a) * (b - a)).sum::<f64>();
            let mut win = 0;
            for y in 1..cb.len() {
                if dist(&cb[y]) < dist(&cb[win]) {
                    win = y;
                }
            }
            for (v, xi) in cb[win].iter_mut().zip(x) {
                *v += eps * (xi - *v);
            }
        }
        let mut total = 0.0;
        for p in &validation {
            let best = cb
                .iter()
                .map(|v| v.iter().zip(p.as_slice()).map(|(a, b)| (b - a) * (b - a)).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            total += best;
        }
        trace.push(2.0 * total / validation.len() as f64);
        eps *= decay;
    }
    (trace, cb)
}

#[test]
fn identity_kernel_training_is_online_kmeans() {
    let d = InputDensity::empirical(
        (0..40)
            .map(|i| {
                let t = i as f64 * 0.37;
                InputPoint::new(vec![t.sin() * 2.0, (1.3 * t).cos()])
            })
            .collect(),
    )
    .unwrap();
    let state = TopoMapState::around_mean(&d, NeighborhoodKernel::identity(5), 0.2, 0.9, 0.3, 8).unwrap();
    let init = state.codebook.clone();
    let report = train(state, &d, 12, 60, 21, false).unwrap();
    let (trace, cb) = online_kmeans(&init, &d, 0.2, 0.9, 12, 60, 21);
    let got: Vec<f64> = report.trace.iter().map(|r| r.distortion).collect();
    assert_eq!(got, trace);
    assert_eq!(report.state.codebook.vectors(), cb.as_slice());
}

#[test]
fn training_is_deterministic_and_snapshots_each_epoch() {
    let d = unit_interval();
    let k = compose_kernel(&LayerKernel::centered_windows(8, 2).unwrap());
    let s = TopoMapState::around_mean(&d, k, 0.3, 0.85, 0.01, 4).unwrap();
    let a = train(s.clone(), &d, 5, 100, 4, true).unwrap();
    let b = train(s, &d, 5, 100, 4, true).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.snapshots.len(), 5);
    assert_eq!(a.snapshots.last().unwrap(), &a.state.codebook);
    assert_eq!(a.distortion_csv(), b.distortion_csv());
    assert!(a.distortion_csv().starts_with("epoch,distortion\n1,"));
}

#[test]
fn banded_kernel_orders_a_line() {
    let d = unit_interval();
    let k = compose_kernel(&LayerKernel::centered_windows(8, 2).unwrap());
    let ordered = (0..20u64)
        .filter(|&seed| {
            let s = TopoMapState::around_mean(&d, k.clone(), 0.3, 0.85, 0.01, seed).unwrap();
            is_index_monotone(&train(s, &d, 50, 200, seed, false).unwrap().state.codebook)
        })
        .count();
    assert!(ordered >= 19, "{ordered}/20");
}

#[test]
fn decaying_step_freezes_the_codebook() {
    let d = unit_interval();
    let k = compose_kernel(&LayerKernel::centered_windows(8, 2).unwrap());
    let s = TopoMapState::around_mean(&d, k, 0.3, 0.85, 0.01, 2).unwrap();
    let r = train(s, &d, 50, 200, 2, false).unwrap();
    assert!(r.trace.last().unwrap().max_change < 1e-3);
    // late-epoch distortion settles
    let late: Vec<f64> = r.trace[40..].iter().map(|e| e.distortion).collect();
    let spread = late.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - late.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread < 1e-3 * late[0]);
}

#[test]
fn training_rejects_bad_arguments() {
    let d = unit_interval();
    let s = identity_state(line(&[0.2, 0.8]), 0.1, 1.0);
    assert!(train(s.clone(), &d, 0, 10, 1, false).is_err());
    assert!(train(s.clone(), &d, 3, 0, 1, false).is_err());
    let ring = InputDensity::uniform_ring(1.0, 4.0).unwrap();
    assert!(matches!(train(s, &ring, 1, 1, 1, false), Err(Error::Unsupported(_))));
}

#[test]
fn monotone_check() {
    assert!(is_index_monotone(&line(&[0.1, 0.2, 0.5])));
    assert!(is_index_monotone(&line(&[0.5, 0.2, 0.1])));
    assert!(!is_index_monotone(&line(&[0.1, 0.5, 0.2])));
    assert!(!is_index_monotone(&line(&[0.1, 0.1, 0.2])));
}
