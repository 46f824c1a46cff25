use estsched::analysis::stationary_distribution;
use estsched::instances::random_small_instance;
use estsched::linalg::{self, Matrix};
use estsched::model::{f_map, g_map, lyapunov_solve};
use estsched::scheduler::{
    brute_force_policy_oracle, extract_thresholds, solve_finite_horizon, solve_infinite_horizon,
    solve_markov_drops, verify_finite_structure, verify_structure, MarkovHorizon, RviOptions,
};
use estsched::{build_state_space, settled_depth, ChannelModel, Error, SensorModel, SystemModel};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

const TOL: f64 = 1e-9;

fn psd2() -> impl Strategy<Value = Matrix> {
    prop::array::uniform4(-2.0f64..2.0).prop_map(|v| {
        let l = Matrix::from_row_slice(2, 2, &v);
        &l * l.transpose()
    })
}

fn plant() -> impl Strategy<Value = SystemModel> {
    (prop::array::uniform4(-1.3f64..1.3), 0.1f64..2.0)
        .prop_map(|(a, q)| SystemModel::new(Matrix::from_row_slice(2, 2, &a), Matrix::identity(2, 2) * q).unwrap())
}

fn sensor() -> impl Strategy<Value = SensorModel> {
    (prop::array::uniform2(-2.0f64..2.0), 0.2f64..3.0)
        .prop_map(|(c, r)| SensorModel::new(Matrix::from_row_slice(1, 2, &c), linalg::scalar(r), 0.8, 1.0).unwrap())
}

fn le(x: &Matrix, y: &Matrix) -> bool {
    linalg::is_psd(&(y - x), TOL * (1.0 + linalg::max_abs(y)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn maps_preserve_symmetry_and_order(m in plant(), s in sensor(), x in psd2(), d in psd2()) {
        let y = &x + &d;
        let fx = f_map(&x, &m).unwrap();
        let fy = f_map(&y, &m).unwrap();
        let gx = g_map(&x, &m, &s).unwrap();
        let gy = g_map(&y, &m, &s).unwrap();
        for v in [&fx, &fy, &gx, &gy] {
            prop_assert!(linalg::is_symmetric(v, 1e-9));
            prop_assert!(linalg::is_psd(v, 1e-9));
        }
        prop_assert!(le(&fx, &fy));
        prop_assert!(le(&gx, &gy));
        prop_assert!(le(&gx, &fx));
    }

    #[test]
    fn lyapunov_solution_is_a_fixed_point(a in prop::array::uniform4(-1.0f64..1.0), v in psd2(), scale in 0.1f64..0.95) {
        let raw = Matrix::from_row_slice(2, 2, &a);
        let r = linalg::spectral_radius(&raw);
        prop_assume!(r > 1e-3);
        let f = raw * (scale / r);
        let x = lyapunov_solve(&f, &v).unwrap();
        let resid = &x - (&f * &x * f.transpose() + &v);
        prop_assert!(linalg::max_abs(&resid) <= 1e-8 * (1.0 + linalg::max_abs(&x)));
        prop_assert!(linalg::is_psd(&x, 1e-9));
    }

    #[test]
    fn unstable_lyapunov_is_rejected(s in 1.01f64..2.0) {
        let f = Matrix::identity(2, 2) * s;
        let unstable = matches!(lyapunov_solve(&f, &Matrix::identity(2, 2)), Err(Error::Unstable { .. }));
        prop_assert!(unstable);
    }

    #[test]
    fn threshold_chain_is_a_distribution(t in 0usize..20, lambda in 0.05f64..1.0) {
        let c = stationary_distribution(t, lambda).unwrap();
        let len = t + 1 + (60.0 / lambda) as usize;
        let direct: f64 = c.probabilities(len).iter().sum::<f64>() + c.tail_mass(len);
        prop_assert!((direct - 1.0).abs() < 1e-9);
        prop_assert!((c.transmit_fraction() - 1.0 / (lambda * t as f64 + 1.0)).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn memoryless_markov_channel_matches_iid(seed in any::<u64>(), horizon in 1usize..6) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let inst = random_small_instance(&mut rng, 1);
        let lambda = inst.sensors[0].lambda();
        prop_assume!(lambda < 1.0);
        let space = build_state_space(&inst.model, &inst.sensors, 12).unwrap();
        let ch = ChannelModel::markov(1.0 - lambda, lambda).unwrap();
        let fin = solve_finite_horizon(&space, &inst.sensors, inst.beta, horizon).unwrap();
        let mk = solve_markov_drops(&space, &inst.sensors[0], &ch, inst.beta, MarkovHorizon::Finite(horizon)).unwrap();
        for k in 0..horizon {
            for g in [false, true] {
                prop_assert_eq!(mk.slice(k, g), fin.policy.actions[k].as_slice());
                let vals = &mk.values[k][g as usize];
                let want = fin.value(k + 1).unwrap();
                for (a, b) in vals.iter().zip(want) {
                    prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
                }
            }
        }
    }

    #[test]
    fn oracle_matches_backward_induction(seed in any::<u64>(), sensors in 1usize..=2, depth in 2usize..=5, horizon in 1usize..=3) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let inst = random_small_instance(&mut rng, sensors);
        let space = build_state_space(&inst.model, &inst.sensors, depth).unwrap();
        let sol = solve_finite_horizon(&space, &inst.sensors, inst.beta, horizon).unwrap();
        for start in [0, space.len() - 1] {
            match brute_force_policy_oracle(&space, &inst.sensors, inst.beta, horizon, start) {
                Ok(o) => prop_assert!((o.cost - sol.cost_from(start)).abs() <= 1e-12 * (1.0 + o.cost.abs())),
                Err(Error::SizeGuard { .. }) => {}
                Err(e) => return Err(TestCaseError::fail(format!("{e}"))),
            }
        }
    }

    #[test]
    fn random_instances_keep_their_structure(seed in any::<u64>(), sensors in 1usize..=2) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let inst = random_small_instance(&mut rng, sensors);
        let depth = settled_depth(&inst.model, &inst.sensors, 40, 4000, 1e-12).unwrap();
        let space = build_state_space(&inst.model, &inst.sensors, depth).unwrap();
        let fin = solve_finite_horizon(&space, &inst.sensors, inst.beta, 6).unwrap();
        let rep = verify_finite_structure(&fin, &space, &inst.sensors, inst.beta).unwrap();
        prop_assert!(rep.is_clean(), "{:?}", rep.violations);
        let inf = solve_infinite_horizon(&space, &inst.sensors, inst.beta, &RviOptions::default()).unwrap();
        let rep = verify_structure(&inf.value.values, &space, &inst.sensors, inst.beta).unwrap();
        prop_assert!(rep.is_clean(), "{:?}", rep.violations);
        if sensors == 1 {
            prop_assert!(space.chain_order_violations().is_empty());
            prop_assert!(extract_thresholds(&inf.policy.actions, &space).is_banded());
        }
    }
}
