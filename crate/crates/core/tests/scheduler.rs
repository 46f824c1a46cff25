use estsched::instances;
use estsched::linalg::{self, mat, scalar};
use estsched::model::f_map;
use estsched::scheduler::{
    action_boundaries, brute_force_policy_oracle, extract_thresholds, meas_gain_trace,
    solve_finite_horizon, solve_finite_meas, solve_infinite_horizon, solve_markov_drops,
    verify_finite_structure, verify_structure, MarkovHorizon, RviOptions, Scenario,
    ThresholdShape,
};
use estsched::{build_state_space, Action, ChannelModel, Error, PsdOrder, SensorModel};

fn first_transmit(actions: &[Action]) -> usize {
    actions.iter().position(|a| *a != Action::Idle).unwrap_or(actions.len())
}

#[test]
fn finite_horizon_thresholds_single_sensor() {
    let inst = instances::single_sensor();
    let space = build_state_space(&inst.model, &inst.sensors, 10).unwrap();
    let sol = solve_finite_horizon(&space, &inst.sensors, inst.beta, 5).unwrap();
    let t1 = extract_thresholds(&sol.policy.actions[0], &space);
    let t2 = extract_thresholds(&sol.policy.actions[1], &space);
    assert_eq!(t1.first_transmit(space.len()), Some(3));
    assert_eq!(t2.first_transmit(space.len()), Some(2));
    // the last stage values one-step savings only, so it is the laziest
    assert!(first_transmit(&sol.policy.actions[4]) >= 3);
    let report = verify_finite_structure(&sol, &space, &inst.sensors, inst.beta).unwrap();
    assert!(report.is_clean(), "{:?}", report.violations);
}

#[test]
fn one_step_policy_matches_the_inequality() {
    let inst = instances::single_sensor();
    let s = &inst.sensors[0];
    let space = build_state_space(&inst.model, &inst.sensors, 8).unwrap();
    for beta in [0.01, 0.05, 0.2, 0.5] {
        let sol = solve_finite_horizon(&space, &inst.sensors, beta, 1).unwrap();
        let pbar = space.state(0).matrix.trace();
        for i in 0..space.len() {
            let fx = f_map(&space.state(i).matrix, &inst.model).unwrap().trace();
            let gain = beta * s.lambda() * (fx - pbar);
            let expect = if gain > (1.0 - beta) * s.energy_cost() {
                Action::Transmit(0)
            } else {
                Action::Idle
            };
            assert_eq!(sol.policy.action(1, i), expect, "beta {beta} state {i}");
        }
    }
}

#[test]
fn near_one_beta_always_transmits() {
    let inst = instances::single_sensor();
    let space = build_state_space(&inst.model, &inst.sensors, 4).unwrap();
    let sol = solve_finite_horizon(&space, &inst.sensors, 0.999, 2).unwrap();
    assert!(sol.policy.actions.iter().flatten().all(|a| *a == Action::Transmit(0)));
    let oracle = brute_force_policy_oracle(&space, &inst.sensors, 0.999, 2, 0).unwrap();
    assert!(oracle.policy.actions[0][0] == Action::Transmit(0));
    assert!((oracle.cost - sol.cost_from(0)).abs() < 1e-12);
}

#[test]
fn oracle_matches_backward_induction() {
    let inst = instances::single_sensor();
    let space = build_state_space(&inst.model, &inst.sensors, 4).unwrap();
    for start in 0..space.len() {
        let sol = solve_finite_horizon(&space, &inst.sensors, 0.3, 2).unwrap();
        let oracle = brute_force_policy_oracle(&space, &inst.sensors, 0.3, 2, start).unwrap();
        assert!((oracle.cost - sol.cost_from(start)).abs() < 1e-12);
    }
    let inst = instances::two_scalar_sensors(0.4);
    let space = build_state_space(&inst.model, &inst.sensors, 3).unwrap();
    let sol = solve_finite_horizon(&space, &inst.sensors, inst.beta, 3).unwrap();
    let oracle = brute_force_policy_oracle(&space, &inst.sensors, inst.beta, 3, 2).unwrap();
    assert!((oracle.cost - sol.cost_from(2)).abs() < 1e-12);
}

#[test]
fn oracle_size_guard() {
    let inst = instances::two_scalar_sensors(0.4);
    let space = build_state_space(&inst.model, &inst.sensors, 6).unwrap();
    let err = brute_force_policy_oracle(&space, &inst.sensors, inst.beta, 6, 0).unwrap_err();
    assert!(matches!(err, Error::SizeGuard { limit: 1_000_000, .. }));
}

#[test]
fn average_cost_threshold_single_sensor() {
    let inst = instances::single_sensor();
    let space = build_state_space(&inst.model, &inst.sensors, 20).unwrap();
    let sol = solve_infinite_horizon(&space, &inst.sensors, inst.beta, &RviOptions::default()).unwrap();
    let shape = extract_thresholds(&sol.policy.actions, &space);
    assert_eq!(shape.first_transmit(space.len()), Some(3));
    assert!(sol.bellman_residual < 1e-8);
    assert!((sol.avg_cost() - 0.55953).abs() < 1e-4, "{}", sol.avg_cost());
    assert!(sol.boundary_mass < 1e-6);
    let spread = sol
        .rho_history
        .iter()
        .fold(0.0f64, |acc, r| acc.max((r - sol.avg_cost()).abs()));
    assert!(spread < 1e-8);
    let report = verify_structure(&sol.value.values, &space, &inst.sensors, inst.beta).unwrap();
    assert!(report.is_clean(), "{:?}", report.violations);
}

#[test]
fn corrupted_value_function_is_flagged() {
    let inst = instances::single_sensor();
    let space = build_state_space(&inst.model, &inst.sensors, 12).unwrap();
    let sol = solve_infinite_horizon(&space, &inst.sensors, inst.beta, &RviOptions::default()).unwrap();
    let mut h = sol.value.values.clone();
    h[5] = h[4] - 1.0;
    let report = verify_structure(&h, &space, &inst.sensors, inst.beta).unwrap();
    assert!(report.value_violations() > 0);
}

#[test]
fn stability_precondition_is_enforced() {
    let inst = instances::single_sensor();
    let sensors = vec![inst.sensors[0].clone().with_lambda(0.2).unwrap()];
    let space = build_state_space(&inst.model, &sensors, 10).unwrap();
    let err = solve_infinite_horizon(&space, &sensors, 0.05, &RviOptions::default()).unwrap_err();
    match err {
        Error::StabilityPrecondition { lambda, bound } => {
            assert_eq!(lambda, 0.2);
            assert!((bound - (1.0 - 1.0 / 1.44)).abs() < 1e-9);
        }
        e => panic!("unexpected {e:?}"),
    }
}

#[test]
fn two_sensor_scenarios() {
    for (e2, want, bands) in [(1.0, Scenario::OnlyFirst, 2), (0.4, Scenario::SecondThenFirst, 3)] {
        let inst = instances::two_scalar_sensors(e2);
        let space = build_state_space(&inst.model, &inst.sensors, 30).unwrap();
        let sol = solve_infinite_horizon(&space, &inst.sensors, inst.beta, &RviOptions::default()).unwrap();
        let shape = extract_thresholds(&sol.policy.actions, &space);
        assert_eq!(shape.scenario(), Some(want), "{shape:?}");
        assert_eq!(shape.bands().len(), bands);
        let report = verify_structure(&sol.value.values, &space, &inst.sensors, inst.beta).unwrap();
        assert!(report.is_clean(), "{:?}", report.violations);
    }
    let inst = instances::two_scalar_sensors(0.4);
    let space = build_state_space(&inst.model, &inst.sensors, 30).unwrap();
    let sol = solve_infinite_horizon(&space, &inst.sensors, inst.beta, &RviOptions::default()).unwrap();
    let shape = extract_thresholds(&sol.policy.actions, &space);
    let second = shape.threshold(1).unwrap();
    let first = shape.threshold(0).unwrap();
    assert!((second.trace - 1.409).abs() < 1e-3, "{}", second.trace);
    assert!((first.trace - 4.273).abs() < 1e-3, "{}", first.trace);
}

#[test]
fn threshold_shapes() {
    let inst = instances::single_sensor();
    let space = build_state_space(&inst.model, &inst.sensors, 5).unwrap();
    let all = vec![Action::Transmit(0); 5];
    assert_eq!(extract_thresholds(&all, &space).first_transmit(5), Some(0));
    let bad = vec![
        Action::Idle,
        Action::Transmit(0),
        Action::Idle,
        Action::Transmit(0),
        Action::Transmit(0),
    ];
    assert!(matches!(extract_thresholds(&bad, &space), ThresholdShape::Violation(_)));
    let inst = instances::two_vector_sensors();
    let space = build_state_space(&inst.model, &inst.sensors, 10).unwrap();
    assert!(space.incomparable_pairs() > 0);
    let acts = vec![Action::Idle; space.len()];
    assert_eq!(extract_thresholds(&acts, &space), ThresholdShape::NotTotallyOrdered);
}

#[test]
fn markov_drops_reduce_to_iid() {
    let inst = instances::single_sensor();
    let space = build_state_space(&inst.model, &inst.sensors, 20).unwrap();
    let iid_channel = ChannelModel::markov(0.2, 0.8).unwrap();
    let fin = solve_finite_horizon(&space, &inst.sensors, inst.beta, 5).unwrap();
    let mk = solve_markov_drops(&space, &inst.sensors[0], &iid_channel, inst.beta, MarkovHorizon::Finite(5)).unwrap();
    for k in 0..5 {
        for g in [false, true] {
            assert_eq!(mk.slice(k, g), fin.policy.actions[k].as_slice());
        }
    }
    let opts = RviOptions::default();
    let inf = solve_infinite_horizon(&space, &inst.sensors, inst.beta, &opts).unwrap();
    let mk = solve_markov_drops(&space, &inst.sensors[0], &iid_channel, inst.beta, MarkovHorizon::Infinite(opts)).unwrap();
    assert_eq!(mk.slice(0, true), inf.policy.actions.as_slice());
    assert_eq!(mk.slice(0, false), inf.policy.actions.as_slice());
    assert!((mk.avg_cost.unwrap() - inf.avg_cost()).abs() < 1e-8);
    assert!(mk.heuristic_stability_guard);
}

#[test]
fn markov_drops_give_two_thresholds() {
    let inst = instances::single_sensor();
    let space = build_state_space(&inst.model, &inst.sensors, 25).unwrap();
    let ch = ChannelModel::markov(0.1, 0.3).unwrap();
    let sol = solve_markov_drops(&space, &inst.sensors[0], &ch, inst.beta, MarkovHorizon::Infinite(RviOptions::default())).unwrap();
    let [t0, t1] = sol.thresholds(0);
    let (t0, t1) = (t0.unwrap(), t1.unwrap());
    assert!(t0 < space.len() && t1 < space.len());
    let fin = solve_markov_drops(&space, &inst.sensors[0], &ch, inst.beta, MarkovHorizon::Finite(6)).unwrap();
    for k in 0..6 {
        let [a, b] = fin.thresholds(k);
        assert!(a.is_some() && b.is_some());
    }
    let bad = ChannelModel::markov(0.95, 0.1).unwrap();
    let err = solve_markov_drops(&space, &inst.sensors[0], &bad, inst.beta, MarkovHorizon::Infinite(RviOptions::default()));
    assert!(matches!(err, Err(Error::StabilityPrecondition { .. })));
}

#[test]
fn split_band_measurement_boundaries() {
    let inst = instances::split_band_scalar();
    let b = action_boundaries(&inst.model, &inst.sensors, inst.beta, 0.0, 6.0, 6001).unwrap();
    let at: Vec<f64> = b.iter().map(|x| x.at).collect();
    assert_eq!(b.len(), 3, "{b:?}");
    for (got, want) in at.iter().zip([0.5485, 0.8642, 3.9005]) {
        assert!((got - want).abs() < 1e-3, "{got} vs {want}");
    }
    let seq: Vec<Action> = b.iter().map(|x| x.to).collect();
    assert_eq!(seq, vec![Action::Transmit(1), Action::Transmit(0), Action::Transmit(1)]);
}

#[test]
fn nonmonotone_measurement_value() {
    let inst = instances::nonmonotone_vector();
    let pbar = estsched::dare_steady_state(&inst.model, &inst.sensors[0]).unwrap().post_cov;
    let expect = mat(&[&[7.83283, 7.39148], &[7.39148, 7.71268]]);
    assert!(linalg::max_abs(&(&pbar - &expect)) < 1e-4);
    let upper = instances::nonmonotone_upper();
    assert_eq!(linalg::psd_compare(&pbar, &upper, 0.0), PsdOrder::Less);
    assert!(linalg::min_eigenvalue(&(&upper - &pbar)) > 0.0);
    let lo = meas_gain_trace(&inst.model, &inst.sensors[0], &pbar).unwrap();
    let hi = meas_gain_trace(&inst.model, &inst.sensors[0], &upper).unwrap();
    assert!((lo - 1.2862).abs() < 1e-3, "{lo}");
    assert!((hi - 1.1970).abs() < 1e-3, "{hi}");
    assert!(hi < lo);
}

#[test]
fn measurement_tree_single_sensor_threshold() {
    let model = estsched::SystemModel::scalar(1.2, 0.5).unwrap();
    let sensors = vec![SensorModel::scalar(1.0, 1.0, 0.7, 1.0).unwrap()];
    let acts: Vec<Action> = (0..200)
        .map(|i| {
            let p = 0.05 * i as f64;
            solve_finite_meas(&model, &sensors, 0.3, 3, &scalar(p)).unwrap().root().action
        })
        .collect();
    let t = first_transmit(&acts);
    assert!(t > 0 && t < acts.len());
    assert!(acts[t..].iter().all(|a| *a == Action::Transmit(0)));
}

#[test]
fn measurement_tree_guard() {
    let inst = instances::split_band_scalar();
    let err = solve_finite_meas(&inst.model, &inst.sensors, inst.beta, 14, &scalar(1.0)).unwrap_err();
    assert!(matches!(err, Error::SizeGuard { .. }));
    let tree = solve_finite_meas(&inst.model, &inst.sensors, inst.beta, 4, &scalar(1.0)).unwrap();
    assert_eq!(tree.nodes.len(), 1 + 3 + 9 + 27);
}
