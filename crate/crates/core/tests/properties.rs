mod common;

use std::collections::BTreeMap;

use common::{random_layered, random_reachable};
use fjsteer::config::{GraphPlan, RandomGraphSpec, ScenarioConfig};
use fjsteer::hull::{convex_hull_2d, hull_distance, point_in_convex_polygon};
use fjsteer::linalg::inf_norm_diff;
use fjsteer::reward::Fallback;
use fjsteer::simulator::{sample_edge_set, StepRecord, TrajectoryLog};
use fjsteer::{
    build_selection_matrices, convergence_certificate, equilibrium, reduce_system, scenarios, spectral_radius,
    steady_state_matrix, step_network, update_influence_row, AgentId, ConvergenceCertificate, DenseMatrix,
    InputVector, LayeringMode, RewardObservation, RowWeights, SystemMatrices,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn box_bounds(u: &InputVector<f64>, j: usize) -> (f64, f64) {
    let b = u.subject_block(j);
    (b.iter().copied().fold(f64::INFINITY, f64::min), b.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fj_step_stays_between_input_extremes(seed in any::<u64>(), subjects in 1usize..=2) {
        let s = random_reachable(&mut rng(seed), 10, subjects);
        let mut x = s.u.initial_state();
        for _ in 0..40 {
            x = step_network(&x, &s.mats, &s.u).unwrap();
            for j in 0..subjects {
                let (lo, hi) = box_bounds(&s.u, j);
                for &v in x.subject_block(j) {
                    prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
                }
            }
        }
    }

    #[test]
    fn steady_state_is_row_stochastic_fixed_point(seed in any::<u64>(), subjects in 1usize..=2) {
        let s = random_reachable(&mut rng(seed), 10, subjects);
        let c = steady_state_matrix(s.mats.a(), &s.mats.b()).unwrap();
        for r in c.row_sums() {
            prop_assert!((r - 1.0).abs() <= 1e-9);
        }
        prop_assert!(c.min_entry().unwrap() >= -1e-12);
        let x_star = equilibrium(&c, &s.u).unwrap();
        let next = step_network(&x_star, &s.mats, &s.u).unwrap();
        prop_assert!(inf_norm_diff(next.as_slice(), x_star.as_slice()) <= 1e-12);
        prop_assert!(spectral_radius(s.mats.a()).unwrap() < 1.0);
    }

    #[test]
    fn spectral_radius_matches_eigenvalues(
        n in 1usize..=7,
        entries in prop::collection::vec(prop_oneof![Just(0.0), 0.0..1.0f64], 49),
    ) {
        let a = DenseMatrix::from_fn(n, n, |i, j| entries[i * 7 + j]);
        let ours = spectral_radius(&a).unwrap();
        let m = DMatrix::from_fn(n, n, |i, j| a[(i, j)]);
        let reference = m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!((ours - reference).abs() <= 1e-7 * reference.max(1.0), "{ours} vs {reference}");
    }

    #[test]
    fn reward_row_is_stochastic_and_scale_free(
        own in 1e-6..1.0f64,
        rewards in prop::collection::vec(prop_oneof![Just(0.0), 0.0..1.0f64], 1..8),
        c in 1e-3..1e3f64,
    ) {
        let map: BTreeMap<AgentId, f64> = rewards.iter().enumerate().map(|(k, &v)| (AgentId(k + 2), v)).collect();
        let prev = RowWeights::uniform(map.keys().copied(), 0.3);
        let row = update_influence_row(&RewardObservation::new(AgentId(1), own, map.clone()).unwrap(), &prev);
        prop_assert!((row.row_sum() - 1.0).abs() <= 1e-12);
        prop_assert_eq!(row.lambda, row.self_share);
        prop_assert!((row.weights.values().sum::<f64>() - 1.0).abs() <= 1e-12);
        if rewards.iter().all(|&v| v == 0.0) {
            prop_assert_eq!(row.fallback, Some(Fallback::SaturatedBias));
            prop_assert_eq!(row.lambda, 1.0);
        } else {
            prop_assert_eq!(row.fallback, None);
            for (j, w) in &row.weights {
                prop_assert!((row.neighbor_shares[j] - (1.0 - row.lambda) * w).abs() <= 1e-12);
            }
        }
        let scaled = map.iter().map(|(&j, &v)| (j, c * v)).collect();
        let row_c = update_influence_row(&RewardObservation::new(AgentId(1), c * own, scaled).unwrap(), &prev);
        prop_assert!((row_c.lambda - row.lambda).abs() <= 1e-15);
        for (j, v) in &row.neighbor_shares {
            prop_assert!((row_c.neighbor_shares[j] - v).abs() <= 1e-15);
        }
    }

    #[test]
    fn zero_reward_keeps_previous_row(k in 1usize..6, lambda in 0.0..1.0f64) {
        let map: BTreeMap<AgentId, f64> = (0..k).map(|j| (AgentId(j + 2), 0.0)).collect();
        let mut prev = RowWeights::uniform(map.keys().copied(), lambda);
        prev.weights.insert(AgentId(2), 2.0);
        let total: f64 = prev.weights.values().sum();
        prev.weights.values_mut().for_each(|w| *w /= total);
        let row = update_influence_row(&RewardObservation::new(AgentId(1), 0.0, map).unwrap(), &prev);
        prop_assert_eq!(row.fallback, Some(Fallback::ZeroReward));
        prop_assert_eq!(&row.weights, &prev.weights);
        prop_assert_eq!(row.lambda, lambda);
    }

    #[test]
    fn transform_round_trip_and_step_equivalence(seed in any::<u64>(), weak in any::<bool>(), subjects in 1usize..=2) {
        let mode = if weak { LayeringMode::Weak } else { LayeringMode::Strict };
        let ls = random_layered(&mut rng(seed), mode, subjects, false);
        let s = &ls.system;
        let sel = build_selection_matrices(&s.community, &ls.partition).unwrap();
        let red = reduce_system(&s.mats, &sel).unwrap();
        prop_assert!(red.structure().is_some());
        if !weak {
            prop_assert_eq!(red.structure(), Some(LayeringMode::Strict));
        }
        let x0 = s.u.initial_state();
        let x_bar = red.transform_state(&x0).unwrap();
        prop_assert_eq!(red.restore_state(&x_bar).unwrap(), x0.clone());
        let u_bar = red.transform_input(&s.u).unwrap();
        let x1 = step_network(&x0, &s.mats, &s.u).unwrap();
        let x1_bar = red.step_transformed(&x_bar, &u_bar).unwrap();
        prop_assert!(inf_norm_diff(red.restore_state(&x1_bar).unwrap().as_slice(), x1.as_slice()) <= 1e-12);
    }

    #[test]
    fn strict_layering_is_nilpotent_and_finite(seed in any::<u64>()) {
        let ls = random_layered(&mut rng(seed), LayeringMode::Strict, 1, true);
        let s = &ls.system;
        let sel = build_selection_matrices(&s.community, &ls.partition).unwrap();
        let red = reduce_system(&s.mats, &sel).unwrap();
        let m = red.depth();
        prop_assert!(red.a_bar().pow(m as u32).is_zero());
        prop_assert_eq!(spectral_radius(s.mats.a()).unwrap(), 0.0);
        let cert = convergence_certificate(&red, LayeringMode::Strict).unwrap();
        let ConvergenceCertificate::Finite { steps, .. } = cert else {
            return Err(TestCaseError::fail("expected a finite certificate"));
        };
        prop_assert!(steps <= m);
        let mut x = s.u.initial_state();
        for _ in 0..steps {
            x = step_network(&x, &s.mats, &s.u).unwrap();
        }
        let after = step_network(&x, &s.mats, &s.u).unwrap();
        prop_assert!(inf_norm_diff(after.as_slice(), x.as_slice()) <= 1e-15);
    }

    #[test]
    fn planar_and_general_hull_tests_agree(
        pts in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 3..10),
        q in (-0.2..1.2f64, -0.2..1.2f64),
        mix in prop::collection::vec(0.0..1.0f64, 10),
    ) {
        let planar: Vec<[f64; 2]> = pts.iter().map(|&(a, b)| [a, b]).collect();
        let general: Vec<Vec<f64>> = pts.iter().map(|&(a, b)| vec![a, b]).collect();
        let hull = convex_hull_2d(&planar);
        let d = hull_distance(&general, &[q.0, q.1]);
        let inside = point_in_convex_polygon(&hull, [q.0, q.1], 1e-9);
        if d > 1e-6 {
            prop_assert!(!inside);
        }
        if inside {
            prop_assert!(d <= 1e-6);
        }
        let w = &mix[..pts.len()];
        let total: f64 = w.iter().sum::<f64>().max(1e-9);
        let c = pts.iter().zip(w).fold([0.0, 0.0], |acc, (&(a, b), &wi)| [acc[0] + a * wi / total, acc[1] + b * wi / total]);
        if w.iter().sum::<f64>() > 1e-6 {
            prop_assert!(point_in_convex_polygon(&hull, c, 1e-9));
            prop_assert!(hull_distance(&general, &c) <= 1e-6);
        }
    }

    #[test]
    fn config_json_round_trip(which in 0usize..3, seed in any::<u64>(), horizon in 1usize..500) {
        let mut cfg = scenarios::builtin(scenarios::NAMES[which], false).unwrap();
        cfg.run.seed = seed;
        cfg.run.horizon = horizon;
        let back = ScenarioConfig::from_json(&cfg.to_json()).unwrap();
        prop_assert_eq!(&back, &cfg);
        let sc = back.resolve(None).unwrap();
        prop_assert_eq!(sc.run.seed, seed);
    }

    #[test]
    fn trajectory_csv_round_trip(
        agents in 1usize..5,
        subjects in 1usize..3,
        values in prop::collection::vec(0.0..1.0f64, 60),
        steps in 1usize..4,
    ) {
        let mut it = values.iter().cycle().copied();
        let log = TrajectoryLog {
            agents,
            subjects,
            steps: (0..steps)
                .map(|k| StepRecord {
                    k,
                    opinions: (0..agents).map(|_| (0..subjects).map(|_| it.next().unwrap()).collect()).collect(),
                    lambda: (0..agents).map(|a| (a % 2 == 0).then(|| it.next().unwrap())).collect(),
                    utility: (0..agents).map(|a| (a % 3 != 1).then(|| it.next().unwrap())).collect(),
                })
                .collect(),
        };
        let text = log.to_csv_string();
        let back = TrajectoryLog::read_csv(text.as_bytes()).unwrap();
        prop_assert_eq!(back, log);
    }

    #[test]
    fn sampler_is_deterministic_and_reachable(seed in any::<u64>(), k in 0usize..50, d in 1usize..6) {
        let sc = scenarios::random_tv();
        let sc = sc.resolve(None).unwrap();
        let spec = RandomGraphSpec { out_degree: d, allow_stubborn_prob: 1.0, require_reachability: true };
        let a = sample_edge_set(&sc.community, &spec, seed, k);
        let b = sample_edge_set(&sc.community, &spec, seed, k);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.fingerprint(), b.fingerprint());
                prop_assert!(fjsteer::graph::all_reachable(&a));
                prop_assert!(a.iter().all(|(_, ns)| ns.len() == d));
            }
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "sampler disagreed with itself"),
        }
    }

    #[test]
    fn f32_dynamics_track_f64(seed in any::<u64>(), subjects in 1usize..=2) {
        let s = random_reachable(&mut rng(seed), 10, subjects);
        let to32 = |m: &DenseMatrix<f64>| DenseMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)] as f32);
        let mats32 = SystemMatrices::<f32>::from_parts(
            to32(s.mats.a()),
            to32(s.mats.s()),
            s.mats.bias().iter().map(|&v| v as f32).collect(),
        )
        .unwrap();
        let u32v = InputVector::<f32>::from_vec(
            s.u.as_slice().iter().map(|&v| v as f32).collect(),
            s.u.n_agents(),
            s.u.n_stubborn(),
        )
        .unwrap();
        let c32 = steady_state_matrix(mats32.a(), &mats32.b()).unwrap();
        let x32 = equilibrium(&c32, &u32v).unwrap();
        let c64 = steady_state_matrix(s.mats.a(), &s.mats.b()).unwrap();
        let x64 = equilibrium(&c64, &s.u).unwrap();
        for (a, b) in x32.as_slice().iter().zip(x64.as_slice()) {
            prop_assert!((*a as f64 - b).abs() <= 1e-4);
        }
        let rho32 = spectral_radius(mats32.a()).unwrap();
        prop_assert!(rho32 < 1.0);
    }
}

#[test]
fn dnn57_declares_strict_layers() {
    let sc = scenarios::dnn57().resolve(None).unwrap();
    let GraphPlan::Static { layers: Some((part, mode)), .. } = &sc.graph else {
        panic!("dnn57 should declare its layers");
    };
    assert_eq!(*mode, LayeringMode::Strict);
    assert_eq!(part.sizes(), vec![4, 12, 36]);
}
